"""Command-line entry point: ``textshape <group> <action> [options]``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .corpus import load_embeddings, read_corpus, tokenize
from .editvec import dumps_edit_vectors, infer_edit, infer_edit_controlled, sample_prior
from .errors import ConfigError, IoError, NoCandidate, TextShapeError, ZeroEdit
from .evaluate import build_report, delta_histogram, sig9
from .generate import generate_with_editor, result_from_json, retrieve_generate, write_results_jsonl
from .neighborhood import (
    NeighborhoodSpec,
    build_index,
    generate_pairs,
    load_index,
    read_pairs_jsonl,
)
from .shape import shape_metrics

log = logging.getLogger("textshape")

COMMANDS = {
    "shape": ("score",),
    "index": ("build",),
    "pairs": ("generate",),
    "editvec": ("infer", "sample"),
    "generate": ("retrieve",),
    "eval": ("report", "histogram"),
}


class Run:
    """Resolved configuration plus artifact bookkeeping for one invocation."""

    def __init__(self, cfg: RunConfig, workers: int):
        self.cfg = cfg
        self.workers = workers
        self.out = Path(cfg.output_dir)
        self.written: list[str] = []
        self._table = None
        self._corpus = None

    @property
    def meta(self) -> dict:
        return {"config_hash": self.cfg.config_hash(), "tool_version": __version__}

    def path(self, name: str) -> Path:
        return self.out / name

    def table(self):
        if self._table is None:
            if not self.cfg.embeddings_path:
                raise ConfigError("embeddings_path is not set")
            self._table = load_embeddings(self.cfg.embeddings_path)
        return self._table

    def corpus(self):
        if self._corpus is None:
            if not self.cfg.corpus_path:
                raise ConfigError("corpus_path is not set")
            self._corpus = read_corpus(self.cfg.corpus_path)
        return self._corpus

    def spec(self, delta: float | None = None, tolerance: float | None = None) -> NeighborhoodSpec:
        cfg = self.cfg
        return NeighborhoodSpec(cfg.scorer(), cfg.delta if delta is None else delta,
                                cfg.epsilon if tolerance is None else tolerance, cfg.jaccard_max)

    def index(self, path: str | None):
        if path:
            idx, _ = load_index(path, self.table())
            if idx.scorer != self.cfg.scorer():
                raise ConfigError("index was built with a different scorer configuration")
            return idx
        return build_index(self.corpus(), self.cfg.scorer(), self.table(), self.cfg.num_hashes,
                           self.cfg.bands, self.cfg.seed, self.workers)

    def ensure_out(self) -> None:
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create output directory {self.out}: {exc}") from exc

    def write_text(self, name: str, text: str) -> None:
        self.write_bytes(name, text.encode("utf-8"))

    def write_bytes(self, name: str, data: bytes) -> None:
        self.ensure_out()
        try:
            self.path(name).write_bytes(data)
        except OSError as exc:
            raise IoError(f"cannot write {name}: {exc}") from exc
        self.written.append(name)

    def note(self, name: str) -> None:
        self.written.append(name)

    def finish_manifest(self) -> None:
        mpath = self.path("manifest.json")
        manifest = {"tool_version": __version__, "config_hash": self.cfg.config_hash(), "artifacts": {}}
        if mpath.exists():
            try:
                old = json.loads(mpath.read_text())
                if old.get("config_hash") == manifest["config_hash"]:
                    manifest["artifacts"] = old.get("artifacts", {})
            except (OSError, json.JSONDecodeError):
                pass
        for name in self.written:
            manifest["artifacts"][name] = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
        manifest["artifacts"] = dict(sorted(manifest["artifacts"].items()))
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _jsonl(records) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def cmd_shape_score(run: Run, args) -> dict:
    table, scorer = run.table(), run.cfg.scorer()
    records = []
    for i, sent in enumerate(run.corpus()):
        try:
            res = shape_metrics(sent, table, scorer)
        except TextShapeError as exc:
            log.info("sentence %d unscorable: %s", i, exc)
            records.append({"id": i, "speed": None, "volume": None, "circuitousness": None,
                            "window_count": 0, "reduced_dim": None})
            continue
        records.append({"id": i, "speed": res.speed, "volume": res.volume,
                        "circuitousness": res.circuitousness, "window_count": res.window_count,
                        "reduced_dim": res.reduced_dim})
    run.write_text("scores.jsonl", _jsonl(records))
    return {"records": len(records)}


def cmd_index_build(run: Run, args) -> dict:
    idx = run.index(None)
    run.ensure_out()
    idx.save(run.path("index.bin"), extra=run.meta)
    run.note("index.bin")
    return {"sentences": len(idx), "unscorable": idx.unscorable}


def cmd_pairs_generate(run: Run, args) -> dict:
    idx = run.index(args.index)
    tol = math.inf if args.unconstrained else None
    spec = run.spec(tolerance=tol)
    pairs = list(generate_pairs(idx, spec, args.max_pairs))
    records = [p.to_json(idx.corpus) for p in pairs]
    run.write_text("pairs.jsonl", _jsonl(records))
    return {"pairs": len(records), "unscorable": idx.unscorable}


def _pair_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


def cmd_editvec_infer(run: Run, args) -> dict:
    cfg, table = run.cfg, run.table()
    pairs = read_pairs_jsonl(args.pairs or run.path("pairs.jsonl"))
    records, vectors, zero = [], [], 0
    for i, rec in enumerate(pairs):
        x, xp = tokenize(rec["src"]), tokenize(rec["proto"])
        rng = _pair_rng(cfg.seed, i)
        try:
            if args.uncontrolled:
                ev = infer_edit(x, xp, table, cfg.kappa, cfg.epsilon, rng)
            else:
                ev = infer_edit_controlled(x, xp, table, cfg.delta, cfg.kappa, cfg.epsilon, rng,
                                           rule=cfg.norm_rule)
        except ZeroEdit:
            zero += 1
            continue
        vectors.append(ev)
        records.append({"src_id": rec["src_id"], "proto_id": rec["proto_id"], **ev.to_json()})
    run.write_text("edits.jsonl", _jsonl(records))
    run.write_bytes("edits.bin", dumps_edit_vectors(vectors))
    return {"edits": len(records), "zero_edits": zero}


def cmd_editvec_sample(run: Run, args) -> dict:
    dim = args.dim if args.dim else 2 * run.table().dim
    rng = np.random.default_rng(run.cfg.seed)
    vectors = [sample_prior(dim, rng) for _ in range(args.count)]
    run.write_text("prior.jsonl", _jsonl(v.to_json() for v in vectors))
    run.write_bytes("prior.bin", dumps_edit_vectors(vectors))
    return {"samples": len(vectors), "dim": dim}


def cmd_generate_retrieve(run: Run, args) -> dict:
    cfg = run.cfg
    idx = run.index(args.index)
    spec = run.spec()
    results, missing = [], 0
    if args.queries:
        queries = [(None, q) for q in read_corpus(args.queries)]
    else:
        queries = list(enumerate(idx.corpus))
    for qi, (sid, x) in enumerate(queries):
        try:
            if args.editor:
                r = generate_with_editor(x, idx, spec, args.editor, cfg.kappa, cfg.epsilon,
                                         _pair_rng(cfg.seed, qi), src_id=sid, seed=cfg.seed)
                results.append(r)
            else:
                results.extend(retrieve_generate(x, idx, spec, cfg.top_k, src_id=sid))
        except (NoCandidate, ZeroEdit):
            missing += 1
        except TextShapeError as exc:
            if sid is not None and math.isnan(idx.scores[sid]):
                missing += 1
                continue
            raise exc
    run.ensure_out()
    write_results_jsonl(results, run.path("results.jsonl"))
    run.note("results.jsonl")
    return {"results": len(results), "no_candidate": missing}


def cmd_eval_report(run: Run, args) -> dict:
    paths = args.results or [run.path("results.jsonl")]
    results = []
    for p in paths:
        for rec in read_pairs_jsonl(p):
            r = result_from_json(rec)
            if not r.attribute:
                r = type(r)(**{**r.__dict__, "attribute": run.cfg.attribute})
            results.append(r)
    report = build_report(results, {**run.meta, "attribute": run.cfg.attribute},
                          run.cfg.bleu_max_n, run.cfg.bleu_smoothing)
    run.write_text("report.json", report.dumps())
    return {"groups": len(report.per_target), "overall_percent_error": sig9(report.overall_percent_error)}


def cmd_eval_histogram(run: Run, args) -> dict:
    pairs = read_pairs_jsonl(args.pairs or run.path("pairs.jsonl"))
    hist = delta_histogram(pairs, run.cfg.bin_width, run.cfg.attribute)
    run.write_text("histogram.csv", hist.to_csv())
    lo, hi = hist.mode_bin
    return {"pairs": hist.total, "bins": len(hist.counts), "mode_bin": [sig9(lo), sig9(hi)]}


HANDLERS = {
    ("shape", "score"): cmd_shape_score,
    ("index", "build"): cmd_index_build,
    ("pairs", "generate"): cmd_pairs_generate,
    ("editvec", "infer"): cmd_editvec_infer,
    ("editvec", "sample"): cmd_editvec_sample,
    ("generate", "retrieve"): cmd_generate_retrieve,
    ("eval", "report"): cmd_eval_report,
    ("eval", "histogram"): cmd_eval_histogram,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--attribute", choices=("speed", "volume", "circuitousness"))
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--embeddings", dest="embeddings_path")
    p.add_argument("--corpus", dest="corpus_path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textshape", description=__doc__)
    parser.add_argument("--version", action="version", version=f"textshape {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)
    for group, actions in COMMANDS.items():
        gp = groups.add_parser(group)
        acts = gp.add_subparsers(dest="action", required=True)
        for action in actions:
            ap = acts.add_parser(action)
            _common(ap)
            if (group, action) in {("pairs", "generate"), ("generate", "retrieve")}:
                ap.add_argument("--index", help="prebuilt index file; built on the fly if omitted")
            if (group, action) == ("pairs", "generate"):
                ap.add_argument("--max-pairs", type=int)
                ap.add_argument("--unconstrained", action="store_true",
                                help="drop the delta window (Jaccard filter only)")
            if (group, action) in {("editvec", "infer"), ("eval", "histogram")}:
                ap.add_argument("--pairs", help="pairs JSONL (default OUT/pairs.jsonl)")
            if (group, action) == ("editvec", "infer"):
                ap.add_argument("--uncontrolled", action="store_true",
                                help="use U(f_norm, f_norm + eps) instead of the delta-controlled norm")
            if (group, action) == ("editvec", "sample"):
                ap.add_argument("--count", type=int, default=10)
                ap.add_argument("--dim", type=int)
            if (group, action) == ("generate", "retrieve"):
                ap.add_argument("--queries", help="sentences to generate for (default: the corpus)")
                ap.add_argument("--editor", help="registered editor name, e.g. identity")
            if (group, action) == ("eval", "report"):
                ap.add_argument("--results", action="append", help="results JSONL (repeatable)")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("TEXTSHAPE_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        overrides = {k: getattr(args, k) for k in
                     ("seed", "delta", "epsilon", "attribute", "output_dir", "embeddings_path", "corpus_path")}
        cfg = load_config(args.config, overrides)
        run = Run(cfg, args.workers)
        summary = HANDLERS[(args.group, args.action)](run, args)
        run.finish_manifest()
    except TextShapeError as exc:
        print(f"textshape: error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps({"command": f"{args.group} {args.action}", **summary,
                      "artifacts": sorted(set(run.written)), **run.meta}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
