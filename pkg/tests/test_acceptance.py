"""Acceptance criteria, one test each, at the stated tolerances and time budgets.

Each check prints a single ``[PASS]``/``[FAIL]`` line. Run the file directly
(``python tests/test_acceptance.py``) for the summary alone, or through pytest.
"""

import contextlib
import io
import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_path, direct_path_length, direct_speed  # noqa: E402
from scipy import integrate, stats  # noqa: E402

from textshape import kernels  # noqa: E402
from textshape.cli import main as cli_main  # noqa: E402
from textshape.corpus import EmbeddingTable, TokenSeq, write_embeddings  # noqa: E402
from textshape.editvec import VmfParams, bessel_ratio, infer_edit_controlled, sample_vmf  # noqa: E402
from textshape.evaluate import achieved_delta, build_report, delta_histogram  # noqa: E402
from textshape.generate import GenerationResult, generate_with_editor  # noqa: E402
from textshape.neighborhood import (  # noqa: E402
    NeighborhoodSpec,
    build_index,
    constrained_neighborhood,
    generate_pairs,
    jaccard_distance,
    query_candidates,
)
from textshape.shape import AttributeScorer, circuitousness, mvee, shortest_path_length, speed  # noqa: E402
from textshape.synthetic import near_duplicate_corpus, random_table  # noqa: E402


REPORTED = []  # lines collected for the pytest terminal summary


def report(number, title, ok, detail, elapsed, budget=None):
    timing = f"{elapsed:.2f}s" + (f" / {budget:g}s" if budget else "")
    line = f"[{'PASS' if ok else 'FAIL'}] AC{number:<2} {title}: {detail} ({timing})"
    print(line, file=sys.__stdout__, flush=True)
    REPORTED.append(line)
    return line


# --- 1 -----------------------------------------------------------------------

TARGETS = [("speed", 0.125), ("speed", 0.5), ("speed", 2.0), ("speed", 4.0),
           ("volume", 0.125), ("volume", 0.5), ("volume", 2.0),
           ("circuitousness", 0.125), ("circuitousness", 0.5), ("circuitousness", 1.0)]
CEV_LM = [0.118, 0.450, 1.755, 3.547, 0.114, 0.451, 1.863, 0.064, 0.431, 0.781]
N_ONLY = [0.111, 0.457, 1.760, 3.621, 0.111, 0.443, 1.752, 0.072, 0.423, 0.790]


def check_percent_error():
    t0 = time.perf_counter()
    got = []
    for row in (CEV_LM, N_ONLY):
        results = [GenerationResult(i, TokenSeq(("x",), "x"), None, a, t, 0.0, attr)
                   for i, ((attr, t), a) in enumerate(zip(TARGETS, row))]
        got.append(build_report(results).overall_percent_error)
    el = time.perf_counter() - t0
    ok = abs(got[0] - 14.91) <= 0.05 and abs(got[1] - 15.51) <= 0.05 and el < 1.0
    return ok, f"CEV-LM {got[0]:.4f} (14.91), N-only {got[1]:.4f} (15.51)", el, 1


# --- 2 -----------------------------------------------------------------------

def check_metric_oracles():
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    for seed, d in itertools.product(range(100), (2, 5)):
        rng = np.random.default_rng([seed, d])
        T = int(rng.integers(3, 9))
        pts = rng.normal(size=(T, d))
        worst = max(worst, abs(speed(pts) - direct_speed(pts)))
        best = brute_force_path(pts)
        worst = max(worst, abs(shortest_path_length(pts, "exact") - best))
        worst = max(worst, abs(circuitousness(pts, "exact") - direct_path_length(pts) / best))
        count += 1
    el = time.perf_counter() - t0
    return worst <= 1e-9 and el < 10, f"{count} instances, max abs deviation {worst:.2e}", el, 10


# --- 3 -----------------------------------------------------------------------

def check_mvee():
    t0 = time.perf_counter()
    tol = 1e-7
    worst = 0.0
    rng = np.random.default_rng(2024)
    for _ in range(100):
        pts = rng.normal(size=(int(rng.integers(4, 11)), 2))
        e = mvee(pts, tol=tol)
        worst = max(worst, float(e.mahalanobis_sq(pts).max()))
    square = mvee([[1, 1], [1, -1], [-1, 1], [-1, -1]], tol=tol).volume
    el = time.perf_counter() - t0
    rel = abs(square - 2 * math.pi) / (2 * math.pi)
    ok = worst <= 1 + 2 * tol and rel <= 0.01 and el < 5
    return ok, f"max (p-c)'A(p-c) = 1 + {worst - 1:.2e}, square volume rel err {rel:.1e}", el, 5


# --- 4 -----------------------------------------------------------------------

def check_two_opt():
    """2-opt on a distance matrix built independently with ``math.dist``.

    The comparison is exact: the identity length is summed in path order over
    the same matrix the solver sees, so no rounding slack is involved.
    """
    t0 = time.perf_counter()
    bad = 0
    min_circ = math.inf
    rng = np.random.default_rng(4)
    for _ in range(200):
        T = int(rng.integers(3, 31))
        pts = rng.normal(size=(T, int(rng.integers(2, 6))))
        dist = np.array([[math.dist(a, b) for b in pts] for a in pts])
        identity = 0.0
        for i in range(T - 1):
            identity += dist[i, i + 1]
        if kernels.two_opt_path(dist) > identity:
            bad += 1
        min_circ = min(min_circ, circuitousness(pts, "heuristic"))
    el = time.perf_counter() - t0
    ok = bad == 0 and min_circ >= 1.0 and el < 10
    return ok, f"{bad}/200 worse than identity, min circuitousness {min_circ!r}", el, 10


# --- 5 -----------------------------------------------------------------------

def check_lsh():
    t0 = time.perf_counter()
    table = random_table()
    corpus = near_duplicate_corpus(2000, seed=5)
    sc = AttributeScorer("speed")
    idx = build_index(corpus, sc, table)  # default banding
    spec = NeighborhoodSpec(sc, delta=0.0, tolerance=0.1)
    sets = [s.token_set for s in corpus]
    scores = [sc(s, table) for s in corpus]
    true_pairs, true_constrained = set(), set()
    for i in range(len(corpus)):
        for j in range(i + 1, len(corpus)):
            inter = len(sets[i] & sets[j])
            if 1 - inter / (len(sets[i]) + len(sets[j]) - inter) < 0.5:
                true_pairs.add((i, j))
                for a, b in ((i, j), (j, i)):
                    if abs(scores[a] - scores[b]) <= 0.1:
                        true_constrained.add((a, b))
    found = 0
    cand_sizes = []
    emitted, violations = set(), 0
    for i in range(len(corpus)):
        cands = query_candidates(idx, corpus[i], exclude=i)
        cand_sizes.append(len(cands))
        found += sum(1 for j in cands if j > i and (i, j) in true_pairs)
        for p in constrained_neighborhood(corpus[i], idx, spec, src_id=i):
            emitted.add((p.src_id, p.proto_id))
            x, y = corpus[p.src_id], corpus[p.proto_id]
            if not (jaccard_distance(x, y) < 0.5 and abs(sc(x, table) - sc(y, table)) <= 0.1):
                violations += 1
    recall = found / len(true_pairs)
    n_recall = len(emitted & true_constrained) / len(true_constrained)
    el = time.perf_counter() - t0
    ok = violations == 0 and emitted <= true_constrained and recall >= 0.95 and n_recall >= 0.95 and el < 60
    detail = (f"{violations} violations, candidate recall {recall:.4f} over {len(true_pairs)} pairs, "
              f"neighborhood recall {n_recall:.4f}, mean candidates {np.mean(cand_sizes):.1f}")
    return ok, detail, el, 60


# --- 6 -----------------------------------------------------------------------

def check_vmf():
    t0 = time.perf_counter()
    worst = 0.0
    for d, kappa in itertools.product((3, 10), (1.0, 10.0, 100.0)):
        rng = np.random.default_rng([d, int(kappa)])
        mu = rng.normal(size=d)
        mu /= np.linalg.norm(mu)
        x = sample_vmf(VmfParams(mu, kappa), rng, 100_000)
        worst = max(worst, abs(float(np.linalg.norm(x.mean(axis=0))) - bessel_ratio(d, kappa)))
    el = time.perf_counter() - t0
    return worst <= 0.02 and el < 30, f"max |R - A_d(kappa)| = {worst:.4f} over 6 settings", el, 30


# --- 7 -----------------------------------------------------------------------

def clamped_product_mean(f_norm, delta, epsilon):
    def given_u(u):
        inner, _ = integrate.quad(lambda y: y * stats.norm.pdf(y, u * delta, u), 0.0, 10.0)
        return inner + 10.0 * stats.norm.sf(10.0, u * delta, u)

    return integrate.quad(given_u, f_norm, f_norm + epsilon)[0] / epsilon


def check_controlled_norm():
    t0 = time.perf_counter()
    table = EmbeddingTable.from_dict({"p": [2.0, 0.0], "q": [0.0, 0.0]})
    x, xp = TokenSeq(("p",), "p"), TokenSeq(("q",), "q")
    draws = infer_edit_controlled(x, xp, table, 1.0, 100.0, 0.1, np.random.default_rng(7), size=100_000)
    mc = float(np.mean([z.z_norm for z in draws]))
    oracle = clamped_product_mean(2.0, 1.0, 0.1)
    el = time.perf_counter() - t0
    ok = abs(mc - oracle) <= 0.05 and el < 10
    return ok, f"Monte Carlo {mc:.4f} vs oracle {oracle:.4f}", el, 10


# --- 8 -----------------------------------------------------------------------

def planted_corpus(n_queries=40, delta=0.5, seed=8):
    """Queries on a line with one planted sentence hitting ``delta`` exactly and two distractors.

    Each query is six fresh words; with one-token windows its speed is the mean
    gap. The planted sentence appends a word whose gap lifts the mean by
    exactly ``delta``; distractors append words at random gaps.
    """
    rng = np.random.default_rng(seed)
    vecs, corpus, queries = {}, [], []
    for q in range(n_queries):
        pos = np.cumsum(rng.uniform(0.5, 1.5, size=6))
        words = [f"q{q}w{i}" for i in range(6)]
        for w, p in zip(words, pos):
            vecs[w] = [float(p), 0.0]
        total = float(pos[-1] - pos[0])
        gap = 6 * (delta + total / 5) - total
        extras = [("plant", gap), ("far", gap + rng.uniform(0.5, 2.0) * 6), ("near", rng.uniform(0.1, 1.0))]
        queries.append(len(corpus))
        corpus.append(TokenSeq(tuple(words), " ".join(words)))
        for tag, g in extras:
            w = f"q{q}{tag}"
            vecs[w] = [float(pos[-1] + g), 0.0]
            toks = tuple(words) + (w,)
            corpus.append(TokenSeq(toks, " ".join(toks)))
    return EmbeddingTable.from_dict(vecs), corpus, queries


def check_pipeline():
    t0 = time.perf_counter()
    delta, eps = 0.5, 0.1
    table, corpus, queries = planted_corpus(delta=delta)
    sc = AttributeScorer("speed", window_size=1, stride=1)
    idx = build_index(corpus, sc, table)
    spec = NeighborhoodSpec(sc, delta=delta, tolerance=eps)
    outside, planted_first = 0, 0
    for qi, q in enumerate(queries):
        r = generate_with_editor(corpus[q], idx, spec, "identity", 100.0, eps,
                                 np.random.default_rng([8, qi]), src_id=q)
        recomputed = achieved_delta(corpus[q], r.output, sc, table)
        if abs(recomputed - delta) > eps or recomputed != r.achieved_delta:
            outside += 1
        planted_first += r.prototype_id == q + 1
    el = time.perf_counter() - t0
    ok = outside == 0 and el < 10
    detail = (f"{len(queries) - outside}/{len(queries)} outputs within eps, "
              f"planted sentence chosen {planted_first}/{len(queries)}")
    return ok, detail, el, 10


# --- 9 -----------------------------------------------------------------------

def check_histogram():
    t0 = time.perf_counter()
    table = random_table()
    corpus = near_duplicate_corpus(5000, seed=9)
    sc = AttributeScorer("speed")
    idx = build_index(corpus, sc, table)
    pairs = list(generate_pairs(idx, NeighborhoodSpec(sc, 0.0, math.inf)))
    h = delta_histogram(pairs, 0.05, "speed")
    lo, hi = h.mode_bin
    symmetric = bool(np.array_equal(h.counts, h.counts[::-1]))
    el = time.perf_counter() - t0
    ok = lo <= 0.0 < hi and symmetric and h.total == len(pairs) and el < 60
    return ok, f"{len(pairs)} pairs, mode bin [{lo:g}, {hi:g}), symmetric={symmetric}", el, 60


# --- 10 ----------------------------------------------------------------------

def _e2e(root, out, workers):
    base = ["--config", str(root / "run.toml"), "--out", str(out), "--workers", str(workers)]
    steps = [["shape", "score"], ["index", "build"], ["pairs", "generate"], ["editvec", "infer"],
             ["editvec", "sample", "--count", "20"], ["generate", "retrieve", "--editor", "identity"],
             ["eval", "report"], ["eval", "histogram"]]
    with contextlib.redirect_stdout(io.StringIO()):
        for step in steps:
            if cli_main(step + base) != 0:
                raise RuntimeError(f"step {step} failed")
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def check_determinism(root):
    t0 = time.perf_counter()
    write_embeddings(random_table(vocab_size=3000, dim=8, seed=10), root / "emb.txt")
    corpus = near_duplicate_corpus(400, seed=10)
    (root / "corpus.txt").write_text("\n".join(s.raw for s in corpus) + "\n")
    (root / "run.toml").write_text('embeddings_path = "emb.txt"\ncorpus_path = "corpus.txt"\n'
                                   'attribute = "volume"\ndelta = 0.1\nepsilon = 0.2\nseed = 11\n')
    a = _e2e(root, root / "w1", 1)
    b = _e2e(root, root / "w2", 2)
    el = time.perf_counter() - t0
    same = a == b
    return same, f"{len(a)} artifacts, byte-identical across workers 1 and 2: {same}", el, None


# --- pytest entry points ----------------------------------------------------

CHECKS = [
    (1, "%Err arithmetic reproduction", check_percent_error),
    (2, "metric oracles", check_metric_oracles),
    (3, "MVEE containment and square case", check_mvee),
    (4, "2-opt soundness", check_two_opt),
    (5, "LSH soundness and recall", check_lsh),
    (6, "vMF mean resultant length", check_vmf),
    (7, "controlled z_norm", check_controlled_norm),
    (8, "pipeline soundness (planted corpus)", check_pipeline),
    (9, "delta histogram shape", check_histogram),
]


@pytest.mark.parametrize("number,title,fn", CHECKS, ids=[f"AC{n}" for n, _, _ in CHECKS])
def test_criterion(number, title, fn):
    ok, detail, el, budget = fn()
    line = report(number, title, ok, detail, el, budget)
    assert ok, line


def test_criterion_10_determinism(tmp_path):
    ok, detail, el, _ = check_determinism(tmp_path)
    line = report(10, "end-to-end determinism", ok, detail, el)
    assert ok, line


if __name__ == "__main__":
    import tempfile

    print(f"kernel backend: {kernels.BACKEND}")
    passed = 0
    for number, title, fn in CHECKS:
        ok, detail, el, budget = fn()
        report(number, title, ok, detail, el, budget)
        passed += ok
    with tempfile.TemporaryDirectory() as tmp:
        ok, detail, el, _ = check_determinism(Path(tmp))
        report(10, "end-to-end determinism", ok, detail, el)
        passed += ok
    print(f"{passed}/10 criteria passed")
    sys.exit(0 if passed == 10 else 1)
