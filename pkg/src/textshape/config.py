"""Run configuration: a TOML key/value file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError, IoError
from .shape import ATTRIBUTES, ENDPOINTS, TSP_SOLVERS, AttributeScorer

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class RunConfig:
    embeddings_path: str = ""
    corpus_path: str = ""
    attribute: str = "speed"
    window_size: int = 3
    stride: int = 3
    mvee_tol: float = 1e-7
    max_rank: int = 2
    tsp_solver: str = "auto"
    tsp_endpoints: str = "fixed"
    jaccard_max: float = 0.5
    delta: float = 0.0
    epsilon: float = 0.1
    kappa: float = 100.0
    num_hashes: int = 128
    bands: int = 32
    seed: int = 0
    output_dir: str = "out"
    norm_rule: str = "product_clamped"
    top_k: int = 1
    bin_width: float = 0.05
    bleu_max_n: int = 4
    bleu_smoothing: str = "add_one"

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise ConfigError(f"attribute must be one of {ATTRIBUTES}")
        if self.tsp_solver not in TSP_SOLVERS:
            raise ConfigError(f"tsp_solver must be one of {TSP_SOLVERS}")
        if self.tsp_endpoints not in ENDPOINTS:
            raise ConfigError(f"tsp_endpoints must be one of {ENDPOINTS}")
        for name in ("window_size", "stride", "max_rank", "num_hashes", "bands", "top_k", "bleu_max_n"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.num_hashes % self.bands:
            raise ConfigError("bands must divide num_hashes")
        if not 0 < self.mvee_tol < 1:
            raise ConfigError("mvee_tol must lie in (0, 1)")
        if not 0 < self.jaccard_max <= 1:
            raise ConfigError("jaccard_max must lie in (0, 1]")
        if not 0 < self.epsilon < 10:
            raise ConfigError("epsilon must lie in (0, 10)")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ConfigError("kappa must be finite and >= 0")
        if not math.isfinite(self.delta):
            raise ConfigError("delta must be finite")
        if not self.bin_width > 0:
            raise ConfigError("bin_width must be > 0")
        if self.norm_rule not in ("product_clamped", "product_resample"):
            raise ConfigError("norm_rule must be product_clamped or product_resample")
        if self.bleu_smoothing not in ("none", "add_one"):
            raise ConfigError("bleu_smoothing must be none or add_one")

    @classmethod
    def from_mapping(cls, data: dict) -> RunConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        clean = {}
        for k, v in data.items():
            typ = known[k].type
            try:
                if typ == "int":
                    if isinstance(v, bool) or int(v) != v:
                        raise ValueError
                    v = int(v)
                elif typ == "float":
                    v = float(v)
                elif typ == "str":
                    v = str(v)
            except (TypeError, ValueError):
                raise ConfigError(f"config key {k!r} has invalid value {v!r}") from None
            clean[k] = v
        return cls(**clean)

    def scorer(self) -> AttributeScorer:
        return AttributeScorer(self.attribute, self.window_size, self.stride, self.mvee_tol,
                               self.max_rank, self.tsp_solver, self.tsp_endpoints)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 over every field except the output directory."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base = Path(path).resolve().parent
        for key in ("embeddings_path", "corpus_path", "output_dir"):
            if key in data and not Path(str(data[key])).is_absolute():
                data[key] = str(base / str(data[key]))
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return RunConfig.from_mapping(data)
