"""Corpus ingestion: tokenization, GloVe-format embeddings and window sequences."""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import EmptyInput, FormatError, IoError, NoEmbeddableContent

DEFAULT_WINDOW_SIZE = 3
DEFAULT_STRIDE = 3


@dataclass(frozen=True)
class TokenSeq:
    """A tokenized sentence together with the text it came from."""

    tokens: tuple[str, ...]
    raw: str = ""

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def token_set(self) -> frozenset[str]:
        return frozenset(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)


@lru_cache(maxsize=4096)
def _is_separator(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenSeq:
    """Lowercase ``text`` and split it on whitespace and Unicode punctuation.

    Raises
    ------
    EmptyInput
        If no token survives.
    """
    cleaned = "".join(" " if _is_separator(ch) else ch for ch in text.lower())
    tokens = tuple(cleaned.split())
    if not tokens:
        raise EmptyInput(f"no tokens in {text!r}")
    return TokenSeq(tokens, text)


def read_corpus(path: str | Path) -> list[TokenSeq]:
    """Read a one-sentence-per-line UTF-8 file, skipping lines with no tokens."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read corpus {path}: {exc}") from exc
    out = []
    for line in lines:
        try:
            out.append(tokenize(line))
        except EmptyInput:
            continue
    return out


@dataclass(frozen=True)
class EmbeddingTable:
    """Word vectors in a dense matrix with a word -> row lookup."""

    dim: int
    vectors: np.ndarray
    index: Mapping[str, int] = field(repr=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise FormatError("embedding dimension must be positive")
        vec = np.asarray(self.vectors, dtype=np.float64)
        if vec.ndim != 2 or vec.shape[1] != self.dim or vec.shape[0] != len(self.index):
            raise FormatError("vector matrix does not match dim / vocabulary")
        if not np.all(np.isfinite(vec)):
            raise FormatError("embedding table contains non-finite values")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)

    @classmethod
    def from_dict(cls, entries: Mapping[str, Iterable[float]]) -> EmbeddingTable:
        words = list(entries)
        if not words:
            raise FormatError("empty embedding table")
        mat = np.array([np.asarray(entries[w], dtype=np.float64) for w in words])
        if mat.ndim != 2:
            raise FormatError("inconsistent embedding dimensions")
        return cls(mat.shape[1], mat, {w: i for i, w in enumerate(words)})

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __len__(self) -> int:
        return len(self.index)

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[self.index[word]]

    def rows(self, words: Iterable[str]) -> np.ndarray:
        """Row indices of the in-vocabulary ``words``, in order."""
        idx = self.index
        return np.array([idx[w] for w in words if w in idx], dtype=np.intp)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse a GloVe text file (``word v1 ... vd`` per line).

    The dimension is taken from the first line; every other line must agree.
    """
    words: list[str] = []
    rows: list[list[float]] = []
    dim = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read embeddings {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise FormatError(f"line {lineno}: no vector components")
            elif len(values) != dim:
                raise FormatError(f"line {lineno}: expected {dim} components, got {len(values)}")
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in vec):
                raise FormatError(f"line {lineno}: non-finite component")
            words.append(word)
            rows.append(vec)
    if dim is None:
        raise FormatError(f"{path}: no embeddings found")
    index: dict[str, int] = {}
    for i, w in enumerate(words):
        index.setdefault(w, i)
    if len(index) != len(words):
        # keep the first occurrence of duplicated words
        keep = sorted(index.values())
        rows = [rows[i] for i in keep]
        index = {words[i]: j for j, i in enumerate(keep)}
    return EmbeddingTable(dim, np.array(rows, dtype=np.float64), index)


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    words = sorted(table.index, key=table.index.__getitem__)
    with open(path, "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(w + " " + " ".join(repr(float(v)) for v in table[w]) + "\n")


@dataclass(frozen=True)
class WindowSeq:
    windows: np.ndarray
    window_size: int = DEFAULT_WINDOW_SIZE
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        arr = np.asarray(self.windows, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("windows must be a 2-D array (T, dim)")
        arr.setflags(write=False)
        object.__setattr__(self, "windows", arr)

    def __len__(self) -> int:
        return self.windows.shape[0]


def embed_windows(
    tokens: TokenSeq,
    table: EmbeddingTable,
    window_size: int = DEFAULT_WINDOW_SIZE,
    stride: int = DEFAULT_STRIDE,
) -> WindowSeq:
    """Mean-pool the in-vocabulary embeddings of each token window.

    Windows start every ``stride`` tokens and hold up to ``window_size`` tokens;
    a trailing short window is kept. Windows without any known token are dropped.
    """
    if window_size < 1 or stride < 1:
        raise ValueError("window_size and stride must be >= 1")
    toks = tokens.tokens
    out = []
    for start in range(0, len(toks), stride):
        rows = table.rows(toks[start:start + window_size])
        if rows.size:
            out.append(table.vectors[rows].mean(axis=0))
        if start + window_size >= len(toks):
            break
    if not out:
        raise NoEmbeddableContent(f"no in-vocabulary tokens in {tokens.raw or tokens.text()!r}")
    return WindowSeq(np.vstack(out), window_size, stride)
