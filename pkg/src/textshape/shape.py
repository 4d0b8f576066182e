"""Shape-of-text metrics over window embeddings: speed, volume, circuitousness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .corpus import (
    DEFAULT_STRIDE,
    DEFAULT_WINDOW_SIZE,
    EmbeddingTable,
    TokenSeq,
    WindowSeq,
    embed_windows,
)
from .errors import ConfigError, Degenerate, NoConvergence, TooFewWindows, UndefinedRatio

ATTRIBUTES = ("speed", "volume", "circuitousness")
TSP_SOLVERS = ("exact", "heuristic", "auto")
ENDPOINTS = ("fixed", "free")
EXACT_TSP_MAX = 13
RANK_RTOL = 1e-8

Points = Union[WindowSeq, np.ndarray]


def _points(windows) -> np.ndarray:
    if isinstance(windows, WindowSeq):
        return windows.windows
    arr = np.asarray(windows, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _steps(pts: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.diff(pts, axis=0), axis=1)


def speed(windows: Points) -> float:
    """Mean Euclidean distance between consecutive windows."""
    pts = _points(windows)
    if pts.shape[0] < 2:
        raise TooFewWindows(f"speed needs >= 2 windows, got {pts.shape[0]}")
    return float(_steps(pts).sum() / (pts.shape[0] - 1))


@dataclass(frozen=True)
class Ellipsoid:
    """``{y : (y - center)^T shape (y - center) <= 1}``."""

    center: np.ndarray
    shape: np.ndarray
    iterations: int = 0

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def semi_axes(self) -> np.ndarray:
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.shape))

    @property
    def volume(self) -> float:
        r = self.dim
        unit_ball = math.pi ** (r / 2) / math.gamma(r / 2 + 1)
        sign, logdet = np.linalg.slogdet(self.shape)
        return float(unit_ball * math.exp(-0.5 * logdet))

    def mahalanobis_sq(self, points) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(points, dtype=np.float64)) - self.center
        return np.einsum("ij,jk,ik->i", diff, self.shape, diff)


def mvee(points, tol: float = 1e-7, max_iter: int = 10_000) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid by Khachiyan's algorithm.

    Works on whitened coordinates and maps the result back (the MVEE is
    affine-equivariant). Each iteration moves weight from the least to the
    most outlying lifted point with the exact line-search step, which avoids
    the zigzagging of plain Khachiyan updates on near-duplicate points. Iteration stops once
    every lifted point satisfies ``M_j <= d + 1 + d * tol``, which gives
    ``(p - c)^T A (p - c) <= 1 + tol`` for every input point.

    Parameters
    ----------
    points : (n, d) array_like
        Points that affinely span R^d.
    tol : float
        Relative duality-gap tolerance.
    max_iter : int
        Iteration cap before ``NoConvergence``.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    n, d = P.shape
    if n < d + 1 or n < 2:
        raise Degenerate(f"{n} points cannot span {d} dimensions")
    if not np.all(np.isfinite(P)):
        raise Degenerate("non-finite coordinates")
    mean = P.mean(axis=0)
    centered = P - mean
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    if sv.shape[0] < d or sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise Degenerate("points do not affinely span their space")
    to_white = vt.T * (math.sqrt(n) / sv)
    W = centered @ to_white

    Q = np.vstack([W.T, np.ones(n)])
    u = np.full(n, 1.0 / n)
    bound = d + 1.0 + d * tol
    for it in range(1, max_iter + 1):
        X = (Q * u) @ Q.T
        Y = np.linalg.solve(X, Q)
        M = np.einsum("ij,ij->j", Q, Y)
        if not np.all(np.isfinite(M)):
            raise NoConvergence("Khachiyan iteration became non-finite")
        j = int(np.argmax(M))
        if M[j] <= bound:
            break
        active = np.flatnonzero(u > 0)
        k = int(active[np.argmin(M[active])])
        # pairwise step: move weight t from k to j, maximizing the exact
        # rank-2 log det change 1 + t (M_j - M_k) - t^2 (M_j M_k - g^2)
        g = float(Q[:, j] @ Y[:, k])
        curv = M[j] * M[k] - g * g
        t = (M[j] - M[k]) / (2.0 * curv) if curv > 0 else u[k]
        if t >= u[k]:
            u[j] += u[k]
            u[k] = 0.0
        else:
            u[j] += t
            u[k] -= t
    else:
        raise NoConvergence(f"Khachiyan did not reach tol={tol} in {max_iter} iterations")

    cw = u @ W
    cov = (W.T * u) @ W - np.outer(cw, cw)
    Aw = np.linalg.inv(cov) / d
    c = mean + cw @ (vt * (sv / math.sqrt(n))[:, None])
    A = to_white @ Aw @ to_white.T
    A = 0.5 * (A + A.T)
    return Ellipsoid(c, A, it)


def volume(windows: Points, tol: float = 1e-7, max_rank: int = 2) -> tuple[float, int]:
    """Dimension-normalized MVEE volume of the windows.

    The windows are centered and projected onto their top
    ``r = min(T - 1, max_rank, numerical rank)`` principal directions; the
    result is ``vol(MVEE)**(1/r)``. Identical windows give ``(0.0, 0)``.
    """
    pts = _points(windows)
    T = pts.shape[0]
    if T < 2:
        raise TooFewWindows(f"volume needs >= 2 windows, got {T}")
    if max_rank < 1:
        raise ConfigError("max_rank must be >= 1")
    centered = pts - pts.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0.0:
        return 0.0, 0
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    r = min(T - 1, max_rank, rank)
    # vol**(1/r) is 1-homogeneous, so solve at unit scale and rescale
    proj = (centered @ vt[:r].T) / s[0]
    ell = mvee(proj, tol=tol)
    return float(ell.volume ** (1.0 / r) * s[0]), r


def _distance_matrix(pts: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _chain_length(dist: np.ndarray) -> float:
    total = 0.0
    for i in range(dist.shape[0] - 1):
        total += float(dist[i, i + 1])
    return total


def _with_free_ends(dist: np.ndarray) -> np.ndarray:
    """Pad with two zero-cost terminals so that any point can start or end the path.

    The first terminal connects to every point at zero cost, as does the last;
    the direct terminal-to-terminal edge is priced out of every optimal path.
    """
    T = dist.shape[0]
    big = 1.0 + 2.0 * float(dist.sum())
    out = np.zeros((T + 2, T + 2))
    out[1:-1, 1:-1] = dist
    out[0, -1] = out[-1, 0] = big
    return out


def _shortest_from_dist(dist: np.ndarray, solver: str, endpoints: str = "fixed") -> float:
    T = dist.shape[0]
    if solver not in TSP_SOLVERS:
        raise ConfigError(f"unknown TSP solver {solver!r}")
    if endpoints not in ENDPOINTS:
        raise ConfigError(f"endpoints must be one of {ENDPOINTS}, got {endpoints!r}")
    if solver == "auto":
        solver = "exact" if T <= EXACT_TSP_MAX else "heuristic"
    if endpoints == "free":
        if T <= 2:
            return _chain_length(dist)
        dist = _with_free_ends(dist)
    elif T <= 3:
        # at most one interior ordering
        return _chain_length(dist)
    if solver == "exact":
        if dist.shape[0] > 26:
            raise ConfigError(f"exact solver refused for {T} points")
        return float(kernels.held_karp_path(dist))
    return float(kernels.two_opt_path(dist))


def shortest_path_length(points: Points, solver: str = "auto", endpoints: str = "fixed") -> float:
    """Shortest Hamiltonian path through the points.

    With ``endpoints="fixed"`` the path runs from the first to the last point;
    ``"free"`` lets it start and end anywhere. ``exact`` runs Held-Karp,
    ``heuristic`` runs identity-seeded 2-opt, and ``auto`` picks exact for at
    most 13 points.
    """
    pts = _points(points)
    if pts.shape[0] < 2:
        raise TooFewWindows(f"shortest path needs >= 2 points, got {pts.shape[0]}")
    return _shortest_from_dist(_distance_matrix(pts), solver, endpoints)


def circuitousness(windows: Points, solver: str = "auto", endpoints: str = "fixed") -> float:
    """Traversed window path length over the shortest Hamiltonian path length.

    Both lengths are summed from one distance matrix in reading order, so the
    ratio is never below 1.
    """
    pts = _points(windows)
    if pts.shape[0] < 3:
        raise TooFewWindows(f"circuitousness needs >= 3 windows, got {pts.shape[0]}")
    dist = _distance_matrix(pts)
    shortest = _shortest_from_dist(dist, solver, endpoints)
    if shortest <= 0.0:
        raise UndefinedRatio("shortest path has zero length")
    return _chain_length(dist) / shortest


@dataclass(frozen=True)
class ShapeResult:
    speed: float | None
    volume: float | None
    circuitousness: float | None
    path_length: float | None
    window_count: int
    reduced_dim: int | None


@dataclass(frozen=True)
class AttributeScorer:
    """Configuration of one target attribute ``s(.)``; pure given its inputs."""

    attribute: str = "speed"
    window_size: int = DEFAULT_WINDOW_SIZE
    stride: int = DEFAULT_STRIDE
    mvee_tol: float = 1e-7
    max_rank: int = 2
    tsp_solver: str = "auto"
    tsp_endpoints: str = "fixed"

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise ConfigError(f"unknown attribute {self.attribute!r}; expected one of {ATTRIBUTES}")
        if self.tsp_solver not in TSP_SOLVERS:
            raise ConfigError(f"unknown TSP solver {self.tsp_solver!r}")
        if self.tsp_endpoints not in ENDPOINTS:
            raise ConfigError(f"tsp_endpoints must be one of {ENDPOINTS}")
        if self.window_size < 1 or self.stride < 1:
            raise ConfigError("window_size and stride must be >= 1")
        if not 0 < self.mvee_tol < 1:
            raise ConfigError("mvee_tol must lie in (0, 1)")
        if self.max_rank < 1:
            raise ConfigError("max_rank must be >= 1")

    def windows(self, tokens: TokenSeq, table: EmbeddingTable) -> WindowSeq:
        return embed_windows(tokens, table, self.window_size, self.stride)

    def score_windows(self, windows: Points) -> float:
        if self.attribute == "speed":
            return speed(windows)
        if self.attribute == "volume":
            return volume(windows, self.mvee_tol, self.max_rank)[0]
        return circuitousness(windows, self.tsp_solver, self.tsp_endpoints)

    def __call__(self, tokens: TokenSeq, table: EmbeddingTable) -> float:
        return self.score_windows(self.windows(tokens, table))

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "window_size": self.window_size,
            "stride": self.stride,
            "mvee_tol": self.mvee_tol,
            "max_rank": self.max_rank,
            "tsp_solver": self.tsp_solver,
            "tsp_endpoints": self.tsp_endpoints,
        }


def score(tokens: TokenSeq, table: EmbeddingTable, scorer: AttributeScorer) -> float:
    return scorer(tokens, table)


def shape_metrics(tokens: TokenSeq, table: EmbeddingTable, scorer: AttributeScorer | None = None) -> ShapeResult:
    """All three metrics for one sentence; undefined ones come back as ``None``."""
    scorer = scorer or AttributeScorer()
    win = scorer.windows(tokens, table)
    pts = win.windows
    T = pts.shape[0]
    sp = vol = circ = path = None
    rdim = None
    if T >= 2:
        sp = speed(pts)
        vol, rdim = volume(pts, scorer.mvee_tol, scorer.max_rank)
        dist = _distance_matrix(pts)
        path = _shortest_from_dist(dist, scorer.tsp_solver, scorer.tsp_endpoints)
        if T >= 3 and path > 0:
            circ = _chain_length(dist) / path
    return ShapeResult(sp, vol, circ, path, T, rdim)
