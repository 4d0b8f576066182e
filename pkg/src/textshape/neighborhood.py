"""Constrained lexical-similarity neighborhoods over a corpus.

Candidates come from a banded MinHash index; every candidate is then checked
exactly against the Jaccard bound and the attribute-delta window, so LSH only
ever affects recall, never soundness.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .corpus import EmbeddingTable, TokenSeq
from .errors import ConfigError, EmptyInput, FormatError, IoError, TextShapeError
from .shape import AttributeScorer

log = logging.getLogger(__name__)

DEFAULT_NUM_HASHES = 128
DEFAULT_BANDS = 32
DEFAULT_JACCARD_MAX = 0.5
DEFAULT_TOLERANCE = 0.1

INDEX_MAGIC = b"TSLSHIDX"
INDEX_VERSION = 1


def jaccard_distance(a: TokenSeq, b: TokenSeq) -> float:
    """``1 - |A & B| / |A | B|`` over deduplicated token sets."""
    sa, sb = a.token_set, b.token_set
    if not sa or not sb:
        raise EmptyInput("Jaccard distance of an empty token set")
    inter = len(sa & sb)
    return 1.0 - inter / (len(sa) + len(sb) - inter)


@dataclass(frozen=True)
class NeighborhoodSpec:
    attribute: AttributeScorer
    delta: float = 0.0
    tolerance: float = DEFAULT_TOLERANCE
    jaccard_max: float = DEFAULT_JACCARD_MAX

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be > 0")
        if not 0 < self.jaccard_max <= 1:
            raise ConfigError("jaccard_max must lie in (0, 1]")
        if not math.isfinite(self.delta):
            raise ConfigError("delta must be finite")

    def accepts(self, jaccard: float, delta: float) -> bool:
        return jaccard < self.jaccard_max and abs(delta - self.delta) <= self.tolerance


@dataclass(frozen=True)
class TrainingPair:
    """Edit pair ``(x, x')``; ``achieved_delta = s(x) - s(x')``."""

    src_id: int
    proto_id: int
    jaccard: float
    achieved_delta: float

    def to_json(self, corpus: Sequence[TokenSeq]) -> dict:
        return {
            "src_id": self.src_id,
            "proto_id": self.proto_id,
            "src": corpus[self.src_id].raw,
            "proto": corpus[self.proto_id].raw,
            "jaccard": self.jaccard,
            "delta": self.achieved_delta,
        }


def token_key(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


def hash_params(num_hashes: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    top = np.iinfo(np.uint64).max
    a = rng.integers(0, top, size=num_hashes, dtype=np.uint64, endpoint=True) | np.uint64(1)
    b = rng.integers(0, top, size=num_hashes, dtype=np.uint64, endpoint=True)
    return a, b


def minhash(sentences: Sequence[TokenSeq], a: np.ndarray, b: np.ndarray) -> np.ndarray:
    keys: list[int] = []
    offsets = [0]
    for s in sentences:
        keys.extend(token_key(t) for t in sorted(s.token_set))
        offsets.append(len(keys))
    return kernels.minhash_signatures(
        np.array(keys, dtype=np.uint64), np.array(offsets, dtype=np.int64), a, b
    )


# --- scoring, optionally across processes ----------------------------------

_worker_state: dict = {}


def _init_worker(scorer, table):
    _worker_state["scorer"] = scorer
    _worker_state["table"] = table


def _score_or_nan(scorer, table, tokens) -> float:
    try:
        return float(scorer(tokens, table))
    except TextShapeError:
        return math.nan


def _score_chunk(chunk):
    return [_score_or_nan(_worker_state["scorer"], _worker_state["table"], t) for t in chunk]


def score_corpus(corpus: Sequence[TokenSeq], scorer: AttributeScorer, table: EmbeddingTable,
                 workers: int = 1) -> np.ndarray:
    """Per-sentence scores; NaN marks unscorable sentences. Order never depends on ``workers``."""
    if workers <= 1 or len(corpus) < 64:
        return np.array([_score_or_nan(scorer, table, t) for t in corpus], dtype=np.float64)
    size = max(1, math.ceil(len(corpus) / (workers * 4)))
    chunks = [list(corpus[i:i + size]) for i in range(0, len(corpus), size)]
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(scorer, table)) as ex:
        parts = list(ex.map(_score_chunk, chunks))
    return np.array([v for p in parts for v in p], dtype=np.float64)


# --- index -----------------------------------------------------------------

@dataclass
class LshIndex:
    corpus: list[TokenSeq]
    scorer: AttributeScorer
    num_hashes: int
    bands: int
    seed: int
    signatures: np.ndarray
    scores: np.ndarray
    buckets: dict[tuple[int, bytes], list[int]] = field(repr=False)
    table: EmbeddingTable | None = field(default=None, repr=False)

    @property
    def rows_per_band(self) -> int:
        return self.num_hashes // self.bands

    @property
    def unscorable(self) -> int:
        return int(np.isnan(self.scores).sum())

    def __len__(self) -> int:
        return len(self.corpus)

    def band_keys(self, signature: np.ndarray) -> list[tuple[int, bytes]]:
        r = self.rows_per_band
        return [(i, signature[i * r:(i + 1) * r].tobytes()) for i in range(self.bands)]

    def signature_of(self, x: TokenSeq) -> np.ndarray:
        a, b = hash_params(self.num_hashes, self.seed)
        return minhash([x], a, b)[0]

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        save_index(self, path, extra)


def _check_lsh_params(num_hashes: int, bands: int) -> None:
    if num_hashes < 1 or bands < 1:
        raise ConfigError("num_hashes and bands must be positive")
    if num_hashes % bands:
        raise ConfigError(f"bands={bands} does not divide num_hashes={num_hashes}")


def _bucketize(signatures: np.ndarray, bands: int) -> dict[tuple[int, bytes], list[int]]:
    r = signatures.shape[1] // bands
    buckets: dict[tuple[int, bytes], list[int]] = {}
    for sid in range(signatures.shape[0]):
        sig = signatures[sid]
        for i in range(bands):
            buckets.setdefault((i, sig[i * r:(i + 1) * r].tobytes()), []).append(sid)
    return buckets


def build_index(corpus: Sequence[TokenSeq], scorer: AttributeScorer, table: EmbeddingTable,
                num_hashes: int = DEFAULT_NUM_HASHES, bands: int = DEFAULT_BANDS,
                seed: int = 0, workers: int = 1) -> LshIndex:
    """MinHash-band the corpus and cache each sentence's attribute score."""
    if not corpus:
        raise EmptyInput("cannot index an empty corpus")
    _check_lsh_params(num_hashes, bands)
    corpus = list(corpus)
    a, b = hash_params(num_hashes, seed)
    sigs = minhash(corpus, a, b)
    scores = score_corpus(corpus, scorer, table, workers)
    index = LshIndex(corpus, scorer, num_hashes, bands, seed, sigs, scores,
                     _bucketize(sigs, bands), table)
    if index.unscorable:
        log.info("%d of %d sentences are unscorable for %s and excluded from pairing",
                 index.unscorable, len(corpus), scorer.attribute)
    return index


def query_candidates(index: LshIndex, x: TokenSeq, exclude: int | None = None) -> set[int]:
    """Indexed sentences sharing at least one band with ``x``.

    ``exclude`` drops the query's own id when ``x`` is itself indexed.
    """
    sig = index.signatures[exclude] if exclude is not None else index.signature_of(x)
    out: set[int] = set()
    for key in index.band_keys(sig):
        out.update(index.buckets.get(key, ()))
    out.discard(exclude)
    return out


def _query_score(index: LshIndex, x: TokenSeq, src_id: int | None, spec: NeighborhoodSpec) -> float:
    if spec.attribute != index.scorer:
        raise ConfigError("neighborhood attribute differs from the index scorer")
    if src_id is not None:
        s = float(index.scores[src_id])
        if math.isnan(s):
            # re-raise the underlying scoring error
            if index.table is None:
                raise ConfigError(f"sentence {src_id} is unscorable")
            return float(index.scorer(x, index.table))
        return s
    if index.table is None:
        raise ConfigError("index has no embedding table to score an external query")
    return float(index.scorer(x, index.table))


def _verified(index, x, src_id, spec, sign) -> list[TrainingPair]:
    sx = _query_score(index, x, src_id, spec)
    xs = x.token_set
    out = []
    for pid in sorted(query_candidates(index, x, src_id)):
        sp = index.scores[pid]
        if math.isnan(sp):
            continue
        ys = index.corpus[pid].token_set
        inter = len(xs & ys)
        jd = 1.0 - inter / (len(xs) + len(ys) - inter)
        delta = sign * (sx - float(sp))
        if spec.accepts(jd, delta):
            if sign > 0:
                out.append(TrainingPair(src_id if src_id is not None else -1, pid, jd, delta))
            else:
                out.append(TrainingPair(pid, src_id if src_id is not None else -1, jd, delta))
    return out


def constrained_neighborhood(x: TokenSeq, index: LshIndex, spec: NeighborhoodSpec,
                             src_id: int | None = None) -> list[TrainingPair]:
    """Prototypes ``x'`` with ``d_J(x, x') < jaccard_max`` and
    ``|(s(x) - s(x')) - delta| <= tolerance``, sorted by prototype id.

    Pass ``src_id`` when ``x`` is an indexed sentence so it is not paired
    with itself and its cached score is reused; otherwise ``src_id`` is -1.
    """
    return _verified(index, x, src_id, spec, +1)


def reverse_neighborhood(x: TokenSeq, index: LshIndex, spec: NeighborhoodSpec,
                         src_id: int | None = None) -> list[TrainingPair]:
    """Sentences ``y`` such that ``x`` lies in their neighborhood.

    Returned pairs have ``src_id = y`` and ``proto_id = src_id`` (the query),
    with ``achieved_delta = s(y) - s(x)``.
    """
    return _verified(index, x, src_id, spec, -1)


def generate_pairs(index: LshIndex, spec: NeighborhoodSpec,
                   max_pairs: int | None = None) -> Iterator[TrainingPair]:
    """All verified pairs, by ascending source id then prototype id.

    Both directions of a qualifying unordered pair are produced when both
    satisfy the delta window.
    """
    if max_pairs is not None and max_pairs <= 0:
        return
    emitted = 0
    for sid, x in enumerate(index.corpus):
        if math.isnan(index.scores[sid]):
            continue
        for pair in constrained_neighborhood(x, index, spec, sid):
            yield pair
            emitted += 1
            if max_pairs is not None and emitted >= max_pairs:
                return


def write_pairs_jsonl(pairs, corpus: Sequence[TokenSeq], path: str | Path) -> int:
    n = 0
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for p in pairs:
                fh.write(json.dumps(p.to_json(corpus), ensure_ascii=False) + "\n")
                n += 1
    except OSError as exc:
        raise IoError(f"cannot write pairs to {path}: {exc}") from exc
    return n


def read_pairs_jsonl(path: str | Path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except OSError as exc:
        raise IoError(f"cannot read pairs from {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# --- persistence ----------------------------------------------------------

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_index(index: LshIndex, path: str | Path, extra: dict | None = None) -> None:
    """Binary layout (little-endian)::

        magic[8] version:u32 header_len:u32 header(JSON)
        signatures: n * num_hashes * u32
        scores:     n * f64 (NaN = unscorable)
        sentences:  n * (raw:str, tokens:str)     str = len:u32 + UTF-8
        buckets:    count:u32, then (band:u32, size:u32, key:rows*u32, ids:size*u32)
    """
    n = len(index.corpus)
    header = {
        "seed": index.seed,
        "num_hashes": index.num_hashes,
        "bands": index.bands,
        "rows_per_band": index.rows_per_band,
        "count": n,
        "scorer": index.scorer.to_dict(),
    }
    if extra:
        header.update(extra)
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [INDEX_MAGIC, struct.pack("<II", INDEX_VERSION, len(hbytes)), hbytes,
             index.signatures.astype("<u4").tobytes(), index.scores.astype("<f8").tobytes()]
    for s in index.corpus:
        parts.append(_pack_str(s.raw))
        parts.append(_pack_str(" ".join(s.tokens)))
    keys = sorted(index.buckets)
    parts.append(struct.pack("<I", len(keys)))
    for band, key in keys:
        ids = index.buckets[(band, key)]
        parts.append(struct.pack("<II", band, len(ids)))
        parts.append(key)
        parts.append(np.asarray(ids, dtype="<u4").tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write index {path}: {exc}") from exc


def load_index(path: str | Path, table: EmbeddingTable | None = None) -> tuple[LshIndex, dict]:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read index {path}: {exc}") from exc
    if buf[:8] != INDEX_MAGIC:
        raise FormatError(f"{path} is not an index file")
    version, hlen = struct.unpack_from("<II", buf, 8)
    if version != INDEX_VERSION:
        raise FormatError(f"unsupported index version {version}")
    pos = 16
    header = json.loads(buf[pos:pos + hlen])
    pos += hlen
    n, k, bands = header["count"], header["num_hashes"], header["bands"]
    sigs = np.frombuffer(buf, dtype="<u4", count=n * k, offset=pos).reshape(n, k).astype(np.uint32)
    pos += 4 * n * k
    scores = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).astype(np.float64)
    pos += 8 * n

    def read_str():
        nonlocal pos
        (ln,) = struct.unpack_from("<I", buf, pos)
        s = buf[pos + 4:pos + 4 + ln].decode("utf-8")
        pos += 4 + ln
        return s

    corpus = []
    for _ in range(n):
        raw = read_str()
        toks = read_str()
        corpus.append(TokenSeq(tuple(toks.split(" ")), raw))
    (nb,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    rbytes = 4 * (k // bands)
    buckets = {}
    for _ in range(nb):
        band, size = struct.unpack_from("<II", buf, pos)
        pos += 8
        key = buf[pos:pos + rbytes]
        pos += rbytes
        buckets[(band, key)] = np.frombuffer(buf, dtype="<u4", count=size, offset=pos).tolist()
        pos += 4 * size
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    scorer = AttributeScorer(**header["scorer"])
    index = LshIndex(corpus, scorer, k, bands, header["seed"], sigs, scores, buckets, table)
    return index, header
