"""Pure-Python/numpy kernels. Same API and results as ``_ckernels``."""

import numpy as np

_MASK32 = np.uint64(32)


def held_karp_path(dist):
    """Shortest Hamiltonian path length from node 0 to node n-1 (Held-Karp DP).

    ``dist`` is a symmetric (n, n) distance matrix, n >= 2.
    """
    d = [list(map(float, row)) for row in np.asarray(dist, dtype=np.float64)]
    n = len(d)
    if n == 2:
        return d[0][1]
    last = n - 1
    m = n - 2  # interior nodes 1..n-2 map to bits 0..m-1
    full = 1 << m
    inf = float("inf")
    # cost[mask][k]: start at 0, visit exactly mask, end at interior node k+1
    cost = [[inf] * m for _ in range(full)]
    for k in range(m):
        cost[1 << k][k] = d[0][k + 1]
    for mask in range(1, full):
        row = cost[mask]
        for k in range(m):
            ck = row[k]
            if ck == inf:
                continue
            dk = d[k + 1]
            free = (full - 1) & ~mask
            while free:
                low = free & -free
                j = low.bit_length() - 1
                nxt = cost[mask | low]
                c = ck + dk[j + 1]
                if c < nxt[j]:
                    nxt[j] = c
                free ^= low
    row = cost[full - 1]
    return min(row[k] + d[k + 1][last] for k in range(m))


def two_opt_path(dist):
    """Identity-seeded 2-opt for a path with fixed endpoints 0 and n-1.

    Only strictly improving segment reversals are applied, so the result never
    exceeds the identity path length.
    """
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    order = list(range(n))
    total = float(sum(d[i, i + 1] for i in range(n - 1)))
    thresh = 1e-12 * (1.0 + total)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 2):
            a, b = order[i - 1], order[i]
            dab = d[a, b]
            for j in range(i + 1, n - 1):
                c, e = order[j], order[j + 1]
                gain = d[a, c] + d[b, e] - dab - d[c, e]
                if gain < -thresh:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    total += gain
                    improved = True
                    b = order[i]
                    dab = d[a, b]
    return float(sum(d[order[k], order[k + 1]] for k in range(n - 1)))


def minhash_signatures(keys, offsets, a, b):
    """MinHash signatures with multiply-add-shift hashing.

    Sentence ``s`` owns ``keys[offsets[s]:offsets[s+1]]`` (64-bit token keys).
    Hash ``i`` maps key ``x`` to ``((a[i] * x + b[i]) mod 2**64) >> 32``.
    Returns a (num_sentences, num_hashes) uint32 array; empty sentences get
    all-ones rows.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    offsets = np.asarray(offsets, dtype=np.int64)
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    ns = offsets.shape[0] - 1
    out = np.full((ns, a.shape[0]), np.uint32(0xFFFFFFFF), dtype=np.uint32)
    with np.errstate(over="ignore"):
        for s in range(ns):
            ks = keys[offsets[s]:offsets[s + 1]]
            if ks.size:
                h = (np.multiply.outer(ks, a) + b) >> _MASK32
                out[s] = h.min(axis=0).astype(np.uint32)
    return out
