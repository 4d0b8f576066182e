"""Prototype retrieval generator and the editor plug-in contract."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .corpus import TokenSeq, tokenize
from .editvec import EditVector, infer_edit_controlled
from .errors import EditorError, IoError, NoCandidate, TextShapeError, ZeroEdit
from .neighborhood import LshIndex, NeighborhoodSpec, jaccard_distance, reverse_neighborhood


class Editor(Protocol):
    """Maps a prototype and an edit vector to a new sentence.

    Implementations must be deterministic given ``(prototype, z, seed)``.
    """

    def generate(self, prototype: TokenSeq, z: EditVector, seed: int = 0) -> TokenSeq: ...


class IdentityEditor:
    """Returns the prototype unchanged."""

    def generate(self, prototype: TokenSeq, z: EditVector, seed: int = 0) -> TokenSeq:
        return prototype


_EDITORS: dict[str, Callable[[], Editor]] = {"identity": IdentityEditor}


def register_editor(name: str, factory: Callable[[], Editor]) -> None:
    if name in _EDITORS:
        raise EditorError(f"editor {name!r} already registered")
    _EDITORS[name] = factory


def get_editor(name: str) -> Editor:
    try:
        return _EDITORS[name]()
    except KeyError:
        raise EditorError(f"no editor registered as {name!r}; known: {sorted(_EDITORS)}") from None


def editor_names() -> list[str]:
    return sorted(_EDITORS)


@dataclass(frozen=True)
class GenerationResult:
    original_id: int
    output: TokenSeq
    prototype_id: int | None
    achieved_delta: float
    target_delta: float
    jaccard_to_original: float
    attribute: str = ""
    original: TokenSeq | None = None

    def to_json(self) -> dict:
        return {
            "id": self.original_id,
            "output": self.output.raw or self.output.text(),
            "prototype_id": self.prototype_id,
            "target_delta": self.target_delta,
            "achieved_delta": self.achieved_delta,
            "jaccard": self.jaccard_to_original,
            "attribute": self.attribute,
            "original": None if self.original is None else (self.original.raw or self.original.text()),
        }


def _rank_key(spec: NeighborhoodSpec):
    return lambda p: (abs(p.achieved_delta - spec.delta), p.jaccard, p.src_id)


def retrieve_generate(x: TokenSeq, index: LshIndex, spec: NeighborhoodSpec, k: int = 1,
                      src_id: int | None = None) -> list[GenerationResult]:
    """Corpus sentences ``y`` with ``s(y) - s(x)`` within ``tolerance`` of ``delta``.

    Ranked by distance to the target delta, then Jaccard distance, then id.
    """
    pairs = reverse_neighborhood(x, index, spec, src_id)
    if not pairs:
        raise NoCandidate("constrained neighborhood is empty")
    pairs.sort(key=_rank_key(spec))
    oid = -1 if src_id is None else src_id
    return [
        GenerationResult(oid, index.corpus[p.src_id], p.src_id, p.achieved_delta, spec.delta,
                         p.jaccard, spec.attribute.attribute, x)
        for p in pairs[:k]
    ]


def generate_with_editor(x: TokenSeq, index: LshIndex, spec: NeighborhoodSpec, editor: Editor | str,
                         kappa: float, epsilon: float, rng: np.random.Generator,
                         src_id: int | None = None, seed: int = 0) -> GenerationResult:
    """Retrieve a prototype, infer a controlled edit vector and run the editor.

    Prototypes whose edit feature against ``x`` is zero are skipped.
    """
    if isinstance(editor, str):
        editor = get_editor(editor)
    if index.table is None:
        raise TextShapeError("index has no embedding table attached")
    table = index.table
    ranked = retrieve_generate(x, index, spec, k=len(index), src_id=src_id)
    for cand in ranked:
        proto = cand.output
        try:
            z = infer_edit_controlled(x, proto, table, spec.delta, kappa, epsilon, rng)
        except ZeroEdit:
            continue
        try:
            out = editor.generate(proto, z, seed)
        except Exception as exc:
            raise EditorError(f"editor failed: {exc}") from exc
        if out is proto:
            achieved = cand.achieved_delta
        else:
            achieved = float(spec.attribute(out, table) - spec.attribute(x, table))
        return GenerationResult(cand.original_id, out, cand.prototype_id, achieved, spec.delta,
                                jaccard_distance(out, x), spec.attribute.attribute, x)
    raise NoCandidate("no prototype with a non-zero edit feature")


def write_results_jsonl(results, path) -> int:
    n = 0
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")
                n += 1
    except OSError as exc:
        raise IoError(f"cannot write results to {path}: {exc}") from exc
    return n


def result_from_json(obj: dict) -> GenerationResult:
    orig = obj.get("original")
    return GenerationResult(
        int(obj["id"]),
        tokenize(obj["output"]),
        obj.get("prototype_id"),
        float(obj["achieved_delta"]),
        float(obj["target_delta"]),
        float(obj.get("jaccard", math.nan)),
        obj.get("attribute", ""),
        tokenize(orig) if orig else None,
    )
