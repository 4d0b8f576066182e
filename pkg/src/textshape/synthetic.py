"""Seeded synthetic corpora and embedding tables for tests, demos and benchmarks."""

from __future__ import annotations

import numpy as np

from .corpus import EmbeddingTable, TokenSeq


def random_table(vocab_size: int = 3000, dim: int = 16, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab_size)]
    vecs = rng.standard_normal((vocab_size, dim))
    return EmbeddingTable(dim, vecs, {w: i for i, w in enumerate(words)})


def _perturb(base: list[str], edits: int, vocab_size: int, rng: np.random.Generator) -> list[str]:
    toks = list(base)
    for _ in range(edits):
        op = rng.integers(3)
        pos = int(rng.integers(len(toks)))
        word = f"w{int(rng.zipf(1.3)) % vocab_size}"
        if op == 0:
            toks[pos] = word
        elif op == 1 or len(toks) <= 4:
            toks.insert(pos, word)
        else:
            del toks[pos]
    return toks


def near_duplicate_corpus(n: int, vocab_size: int = 3000, seed: int = 0, cluster_size: int = 5,
                          min_len: int = 9, max_len: int = 30, max_edits: int = 6) -> list[TokenSeq]:
    """Clusters of lightly edited copies of random base sentences.

    Words are drawn Zipf-like so unrelated sentences still share common
    tokens; variants differ from their base by 0 to ``max_edits`` edits.
    """
    rng = np.random.default_rng(seed)
    out: list[TokenSeq] = []
    while len(out) < n:
        length = int(rng.integers(min_len, max_len + 1))
        base = [f"w{int(rng.zipf(1.3)) % vocab_size}" for _ in range(length)]
        size = int(rng.integers(1, 2 * cluster_size))
        for _ in range(size):
            if len(out) >= n:
                break
            toks = _perturb(base, int(rng.integers(0, max_edits + 1)), vocab_size, rng)
            out.append(TokenSeq(tuple(toks), " ".join(toks)))
    return out
