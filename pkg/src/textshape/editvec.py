"""Edit-vector algebra: edit features, the edit prior, von Mises-Fisher sampling
and the standard and delta-controlled inverse-editor distributions."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import EmbeddingTable, TokenSeq
from .errors import ConfigError, FormatError, ZeroEdit

MAX_NORM = 10.0
NORM_RULES = ("product_clamped", "product_resample")


def diff_sets(x: TokenSeq, x_proto: TokenSeq) -> tuple[frozenset[str], frozenset[str]]:
    """Words inserted into and deleted from the prototype ``x_proto`` to give ``x``."""
    a, b = x.token_set, x_proto.token_set
    return a - b, b - a


@dataclass(frozen=True)
class EditFeature:
    f: np.ndarray
    f_norm: float
    f_dir: np.ndarray | None
    inserted: frozenset[str]
    deleted: frozenset[str]
    oov: int = 0

    @property
    def is_zero(self) -> bool:
        return self.f_dir is None


def edit_feature(x: TokenSeq, x_proto: TokenSeq, table: EmbeddingTable, epsilon: float = 0.1) -> EditFeature:
    """Concatenated insert-sum and delete-sum embeddings with norm clipping.

    ``f_norm = min(||f||, 10 - epsilon)``. ``f_dir`` is ``f / ||f||`` and is
    ``None`` when ``f`` is the zero vector.
    """
    if not 0.0 < epsilon < MAX_NORM:
        raise ConfigError(f"epsilon must lie in (0, {MAX_NORM}), got {epsilon}")
    inserted, deleted = diff_sets(x, x_proto)
    d = table.dim
    ins_rows = table.rows(sorted(inserted))
    del_rows = table.rows(sorted(deleted))
    oov = len(inserted) + len(deleted) - ins_rows.size - del_rows.size
    f = np.zeros(2 * d)
    if ins_rows.size:
        f[:d] = table.vectors[ins_rows].sum(axis=0)
    if del_rows.size:
        f[d:] = table.vectors[del_rows].sum(axis=0)
    norm = float(np.linalg.norm(f))
    f_dir = f / norm if norm > 0.0 else None
    return EditFeature(f, min(norm, MAX_NORM - epsilon), f_dir, inserted, deleted, oov)


@dataclass(frozen=True)
class EditVector:
    """``z = z_norm * z_dir`` with ``z_dir`` on the unit sphere."""

    z_norm: float
    z_dir: np.ndarray
    z: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.z_dir, dtype=np.float64)
        object.__setattr__(self, "z_dir", d)
        object.__setattr__(self, "z_norm", float(self.z_norm))
        object.__setattr__(self, "z", self.z_norm * d)

    def to_json(self) -> dict:
        return {"z_norm": self.z_norm, "z_dir": self.z_dir.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> EditVector:
        return cls(float(obj["z_norm"]), np.asarray(obj["z_dir"], dtype=np.float64))

    def to_bytes(self) -> bytes:
        """``<u8 n><f8 z_norm><f8 * n z_dir>``, little-endian."""
        n = self.z_dir.shape[0]
        return struct.pack("<Qd", n, self.z_norm) + self.z_dir.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> EditVector:
        if len(buf) < 16:
            raise FormatError("edit vector record too short")
        n, z_norm = struct.unpack_from("<Qd", buf)
        if len(buf) != 16 + 8 * n:
            raise FormatError(f"edit vector record length {len(buf)} does not match n={n}")
        return cls(z_norm, np.frombuffer(buf, dtype="<f8", offset=16).astype(np.float64))


def dumps_edit_vectors(vectors) -> bytes:
    return b"".join(v.to_bytes() for v in vectors)


def loads_edit_vectors(buf: bytes) -> list[EditVector]:
    out, pos = [], 0
    while pos < len(buf):
        if pos + 16 > len(buf):
            raise FormatError("truncated edit vector stream")
        (n,) = struct.unpack_from("<Q", buf, pos)
        end = pos + 16 + 8 * n
        out.append(EditVector.from_bytes(buf[pos:end]))
        pos = end
    return out


# --- Bessel functions -------------------------------------------------------

def _log_iv_series(v: float, x: float) -> float:
    # sum_k (x/2)^(2k+v) / (k! Gamma(k+v+1)), accumulated relative to term 0
    log_t0 = v * (math.log(x) - math.log(2.0)) - math.lgamma(v + 1.0)
    q = (x / 2.0) ** 2
    term, total, k = 1.0, 1.0, 0
    log_scale = 0.0
    while True:
        k += 1
        term *= q / (k * (k + v))
        total += term
        if total > 1e280:
            log_scale += math.log(total)
            term /= total
            total = 1.0
        if term < 1e-17 * total and k > q / (v + 1.0):
            break
    return log_t0 + log_scale + math.log(total)


# Debye polynomials u_k(t) as {power of t: coefficient}
_DEBYE = (
    {1: 3 / 24, 3: -5 / 24},
    {2: 81 / 1152, 4: -462 / 1152, 6: 385 / 1152},
    {3: 30375 / 414720, 5: -369603 / 414720, 7: 765765 / 414720, 9: -425425 / 414720},
    {
        4: 4465125 / 39813120,
        6: -94121676 / 39813120,
        8: 349922430 / 39813120,
        10: -446185740 / 39813120,
        12: 185910725 / 39813120,
    },
)


def _log_iv_debye(v: float, x: float) -> float:
    # uniform asymptotic expansion written in p = 1/sqrt(v^2 + x^2) so v = 0 is allowed
    r = math.hypot(v, x)
    p = 1.0 / r
    eta = r + (v * math.log(x / (v + r)) if v > 0 else 0.0)
    corr = 1.0
    for k, poly in enumerate(_DEBYE, 1):
        # u_k(t) / v^k with t = v p:  sum_j c_j p^j v^(j-k)
        corr += sum(c * p ** j * v ** (j - k) for j, c in poly.items())
    return eta - 0.5 * math.log(2.0 * math.pi) - 0.5 * math.log(r) + math.log(corr)


def log_bessel_iv(v: float, x: float) -> float:
    """``log I_v(x)`` for order ``v >= 0`` and ``x > 0``."""
    if x <= 0.0:
        raise ValueError("log_bessel_iv needs x > 0")
    if math.hypot(v, x) >= 100.0 and x > 20.0 or x > 1000.0:
        return _log_iv_debye(v, x)
    return _log_iv_series(v, x)


def bessel_ratio(d: int, kappa: float) -> float:
    """Mean resultant length of vMF(d, kappa): ``I_{d/2}(kappa) / I_{d/2-1}(kappa)``."""
    if kappa == 0.0:
        return 0.0
    return math.exp(log_bessel_iv(d / 2.0, kappa) - log_bessel_iv(d / 2.0 - 1.0, kappa))


# --- von Mises-Fisher -------------------------------------------------------

@dataclass(frozen=True)
class VmfParams:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.ndim != 1 or mu.shape[0] < 2:
            raise ConfigError("vMF mean direction must be a vector of length >= 2")
        if abs(np.linalg.norm(mu) - 1.0) > 1e-9:
            raise ConfigError("vMF mean direction must have unit norm")
        if not (math.isfinite(self.kappa) and self.kappa >= 0.0):
            raise ConfigError("kappa must be finite and >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def _sample_cosine(kappa: float, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Wood (1994) rejection sampler for ``w = mu . x``."""
    m = d - 1.0
    b = m / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + m * m))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * math.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        batch = max(16, int(need * 1.3))
        z = rng.beta(m / 2.0, m / 2.0, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=batch)
        with np.errstate(divide="ignore"):
            ok = kappa * w + m * np.log1p(-x0 * w) - c >= np.log(u)
        acc = w[ok][:need]
        out[filled:filled + acc.shape[0]] = acc
        filled += acc.shape[0]
    return out


def _householder_to(mu: np.ndarray, samples: np.ndarray) -> np.ndarray:
    # reflect e_1 onto mu
    v = -mu.copy()
    v[0] += 1.0
    vv = v @ v
    if vv < 1e-30:
        return samples
    return samples - np.outer(samples @ v, v) * (2.0 / vv)


def sample_vmf(params: VmfParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from vMF(mu, kappa) by tangent-normal decomposition.

    Returns a unit vector, or a ``(size, d)`` array when ``size`` is given.
    """
    d = params.dim
    n = 1 if size is None else int(size)
    w = _sample_cosine(params.kappa, d, n, rng)
    tangent = rng.standard_normal((n, d - 1))
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    frame = np.empty((n, d))
    frame[:, 0] = w
    frame[:, 1:] = np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * tangent
    out = _householder_to(params.mu, frame)
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out[0] if size is None else out


def log_sphere_area(d: int) -> float:
    """``log`` of the surface area of the unit sphere in R^d."""
    return math.log(2.0) + (d / 2.0) * math.log(math.pi) - math.lgamma(d / 2.0)


def vmf_log_normalizer(d: int, kappa: float) -> float:
    if kappa == 0.0:
        return -log_sphere_area(d)
    v = d / 2.0 - 1.0
    return v * math.log(kappa) - (d / 2.0) * math.log(2.0 * math.pi) - log_bessel_iv(v, kappa)


def vmf_log_density(x, params: VmfParams) -> float:
    x = np.asarray(x, dtype=np.float64)
    return params.kappa * float(params.mu @ x) + vmf_log_normalizer(params.dim, params.kappa)


# --- prior and inverse editor ----------------------------------------------

def _unit_gaussian(dim: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.standard_normal(dim)
        n = np.linalg.norm(g)
        if n > 0.0:
            return g / n


def sample_prior(dim: int, rng: np.random.Generator) -> EditVector:
    """``z_norm ~ U(0, 10)``, ``z_dir`` uniform on the sphere."""
    if dim < 2:
        raise ConfigError("edit vectors need dim >= 2")
    z_norm = rng.uniform(0.0, MAX_NORM)
    return EditVector(z_norm, _unit_gaussian(dim, rng))


def _feature_or_raise(x, x_proto, table, epsilon) -> EditFeature:
    feat = edit_feature(x, x_proto, table, epsilon)
    if feat.is_zero:
        raise ZeroEdit("edit feature is zero; direction undefined")
    return feat


def _assemble(norms, dirs, size):
    if size is None:
        return EditVector(float(norms[0]), dirs[0])
    return [EditVector(float(n), d) for n, d in zip(norms, dirs)]


def infer_edit(x: TokenSeq, x_proto: TokenSeq, table: EmbeddingTable, kappa: float,
               epsilon: float, rng: np.random.Generator, size: int | None = None):
    """``z_dir ~ vMF(f_dir, kappa)``, ``z_norm ~ U(f_norm, f_norm + epsilon)``.

    Returns one ``EditVector``, or a list of ``size`` independent draws.
    """
    feat = _feature_or_raise(x, x_proto, table, epsilon)
    n = 1 if size is None else int(size)
    dirs = sample_vmf(VmfParams(feat.f_dir, kappa), rng, n)
    norms = rng.uniform(feat.f_norm, feat.f_norm + epsilon, size=n)
    return _assemble(norms, dirs, size)


def controlled_norm(f_norm: float, delta: float, epsilon: float, rng: np.random.Generator,
                    size: int | None = None, rule: str = "product_clamped"):
    """Draw ``N(delta, 1) * U(f_norm, f_norm + epsilon)`` restricted to ``[0, 10]``.

    ``product_clamped`` clamps the product into ``[0, 10]``; ``product_resample``
    redraws both factors until the product lands inside.
    """
    if rule not in NORM_RULES:
        raise ConfigError(f"unknown norm rule {rule!r}")
    n = 1 if size is None else int(size)
    g = rng.normal(delta, 1.0, size=n)
    u = rng.uniform(f_norm, f_norm + epsilon, size=n)
    prod = g * u
    if rule == "product_clamped":
        prod = np.clip(prod, 0.0, MAX_NORM)
    else:
        bad = (prod < 0.0) | (prod > MAX_NORM)
        tries = 0
        while bad.any():
            tries += 1
            if tries > 10_000:
                raise ConfigError("resampling rule cannot reach [0, 10] for this delta")
            k = int(bad.sum())
            prod[bad] = rng.normal(delta, 1.0, size=k) * rng.uniform(f_norm, f_norm + epsilon, size=k)
            bad = (prod < 0.0) | (prod > MAX_NORM)
    return float(prod[0]) if size is None else prod


def infer_edit_controlled(x: TokenSeq, x_proto: TokenSeq, table: EmbeddingTable, delta: float,
                          kappa: float, epsilon: float, rng: np.random.Generator,
                          rule: str = "product_clamped", size: int | None = None):
    """Inverse editor whose norm is pushed toward the target change ``delta``.

    Returns one ``EditVector``, or a list of ``size`` independent draws.
    """
    feat = _feature_or_raise(x, x_proto, table, epsilon)
    n = 1 if size is None else int(size)
    dirs = sample_vmf(VmfParams(feat.f_dir, kappa), rng, n)
    norms = controlled_norm(feat.f_norm, delta, epsilon, rng, size=n, rule=rule)
    return _assemble(norms, dirs, size)
