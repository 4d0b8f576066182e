"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]

Each row reports the best-of-N wall time per call for both backends and the
speedup. Results are also checked for equality so a fast but wrong kernel
cannot slip through.
"""

import argparse
import sys
import timeit

import numpy as np

from textshape import _pykernels
from textshape.neighborhood import hash_params, token_key
from textshape.synthetic import near_duplicate_corpus

try:
    from textshape import _ckernels
except ImportError:
    _ckernels = None


def distance_matrix(n, seed):
    pts = np.random.default_rng(seed).normal(size=(n, 16))
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def minhash_inputs(n_sentences, num_hashes):
    corpus = near_duplicate_corpus(n_sentences, seed=0)
    keys, offsets = [], [0]
    for s in corpus:
        keys.extend(token_key(t) for t in sorted(s.token_set))
        offsets.append(len(keys))
    a, b = hash_params(num_hashes, 0)
    return np.array(keys, dtype=np.uint64), np.array(offsets, dtype=np.int64), a, b


def cases():
    for n in (8, 11, 13):
        d = distance_matrix(n, n)
        yield f"held_karp_path  T={n}", "held_karp_path", (d,)
    for n in (30, 100):
        d = distance_matrix(n, n)
        yield f"two_opt_path    T={n}", "two_opt_path", (d,)
    yield "minhash 2000x128", "minhash_signatures", minhash_inputs(2000, 128)


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':<22}{'python':>12}{'cython':>12}{'speedup':>10}")
    for label, name, inputs in cases():
        py_fn = getattr(_pykernels, name)
        t_py = best_time(py_fn, inputs, args.repeat)
        if _ckernels is None:
            print(f"{label:<22}{t_py * 1e3:>10.3f}ms{'-':>12}{'-':>10}")
            continue
        c_fn = getattr(_ckernels, name)
        if not np.array_equal(np.asarray(py_fn(*inputs)), np.asarray(c_fn(*inputs))):
            print(f"{label}: backends disagree", file=sys.stderr)
            return 1
        t_c = best_time(c_fn, inputs, args.repeat)
        print(f"{label:<22}{t_py * 1e3:>10.3f}ms{t_c * 1e3:>10.3f}ms{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
