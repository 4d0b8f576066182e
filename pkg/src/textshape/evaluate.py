"""Evaluation: achieved delta, percent error, BLEU, delta histograms and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import EmbeddingTable, TokenSeq
from .errors import ConfigError, EmptyInput, ZeroTarget
from .shape import AttributeScorer

SMOOTHING = ("none", "add_one")


def sig9(x):
    """Round a float to 9 significant digits for serialization."""
    if x is None or not math.isfinite(x):
        return x
    return float(f"{x:.9g}")


def achieved_delta(original: TokenSeq, generated: TokenSeq, scorer: AttributeScorer,
                   table: EmbeddingTable) -> float:
    return float(scorer(generated, table) - scorer(original, table))


def percent_error(achieved: float, target: float) -> float:
    if target == 0:
        raise ZeroTarget("percent error is undefined for a zero target")
    return 100.0 * abs(achieved - target) / abs(target)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: TokenSeq, reference: TokenSeq, max_n: int = 4, smoothing: str = "add_one") -> float:
    """Single-reference sentence BLEU with uniform weights over 1..max_n.

    ``add_one`` replaces a zero clipped-match count ``0/l`` by ``1/(l + 1)``.
    """
    if max_n < 1:
        raise ConfigError("max_n must be >= 1")
    if smoothing not in SMOOTHING:
        raise ConfigError(f"unknown smoothing {smoothing!r}")
    cand, ref = candidate.tokens, reference.tokens
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    log_p = 0.0
    for n in range(1, max_n + 1):
        cn = _ngrams(cand, n)
        rn = _ngrams(ref, n)
        total = sum(cn.values())
        match = sum(min(k, rn[g]) for g, k in cn.items())
        if match == 0:
            if smoothing == "none":
                return 0.0
            match, total = 1, total + 1
        log_p += math.log(match / total) / max_n
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p)


@dataclass(frozen=True)
class DeltaHistogram:
    """Bins of width ``w`` centered on multiples of ``w``.

    A value exactly on a bin boundary goes to the bin farther from zero, so the
    binning is mirror-symmetric.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    attribute: str = ""

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def mode_bin(self) -> tuple[float, float]:
        i = int(np.argmax(self.counts))
        return float(self.bin_edges[i]), float(self.bin_edges[i + 1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, n in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            w.writerow([f"{lo:.9g}", f"{hi:.9g}", int(n)])
        return buf.getvalue()


def _delta_of(p) -> float:
    if isinstance(p, dict):
        return float(p["delta"])
    if isinstance(p, (int, float)):
        return float(p)
    return float(p.achieved_delta)


def delta_histogram(pairs: Iterable, bin_width: float, attribute: str = "") -> DeltaHistogram:
    """Histogram of pair deltas; accepts TrainingPairs, pair dicts or plain floats."""
    if not bin_width > 0:
        raise ConfigError("bin_width must be > 0")
    deltas = np.array([_delta_of(p) for p in pairs], dtype=np.float64)
    if deltas.size == 0:
        raise EmptyInput("no pairs to histogram")
    k = np.sign(deltas) * np.floor(np.abs(deltas) / bin_width + 0.5)
    K = int(np.abs(k).max())
    edges = (np.arange(-K, K + 2) - 0.5) * bin_width
    counts = np.bincount((k + K).astype(np.int64), minlength=2 * K + 1)
    return DeltaHistogram(edges, counts, attribute)


@dataclass
class EvalReport:
    per_target: list[dict]
    overall_percent_error: float
    counts: dict
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_target": [{k: sig9(v) if isinstance(v, float) else v for k, v in row.items()}
                           for row in self.per_target],
            "overall_percent_error": sig9(self.overall_percent_error),
            "counts": self.counts,
            "config": self.config,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def build_report(results: Iterable, config: dict | None = None, max_n: int = 4,
                 smoothing: str = "add_one") -> EvalReport:
    """Group results by (attribute, target delta) and aggregate.

    Percent error is taken on each group's mean achieved delta; the overall
    figure is the unweighted mean over groups. BLEU is averaged over results
    that carry their original sentence.
    """
    groups: dict[tuple[str, float], list] = {}
    for r in results:
        groups.setdefault((r.attribute, float(r.target_delta)), []).append(r)
    if not groups:
        raise EmptyInput("no generation results")
    rows = []
    for attr, target in sorted(groups):
        members = groups[(attr, target)]
        # fixed summation order keeps the mean independent of input order
        achieved = sorted(float(m.achieved_delta) for m in members)
        mean_delta = math.fsum(achieved) / len(achieved)
        scores = sorted(bleu(m.output, m.original, max_n, smoothing)
                        for m in members if m.original is not None)
        rows.append({
            "attribute": attr,
            "target_delta": target,
            "mean_achieved_delta": mean_delta,
            "percent_error": percent_error(mean_delta, target),
            "bleu": math.fsum(scores) / len(scores) if scores else None,
            "n": len(members),
        })
    overall = math.fsum(r["percent_error"] for r in rows) / len(rows)
    counts = {"results": sum(r["n"] for r in rows), "groups": len(rows)}
    return EvalReport(rows, overall, counts, dict(config or {}))
