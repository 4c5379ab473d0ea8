"""
Subject-to-box assignment: score normalization, the weighted combined cost, minimum-cost matching
and the per-pair acceptance checks.

Scores come as three ``M x N`` matrices (subjects by detected boxes): ``s_t`` text-crop
similarity, ``s_d`` detection score and ``s_i`` image-crop similarity. The cost of pairing
subject ``i`` with box ``j`` is ``1 - (alpha * s_t + beta * s_d + gamma * s_i)``.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import DataError, InvalidConfig, NonFiniteCost, OutOfRange, ShapeMismatch, WeightsOffSimplex

__all__ = [
    "ScoreTriple",
    "ScoreMatrix",
    "CostWeights",
    "AcceptThresholds",
    "Verdict",
    "Assignment",
    "normalize_scores",
    "combined_cost",
    "assign",
    "accept_scene",
]

SIMPLEX_TOL = 1e-9
SCORE_KINDS = ("s_t", "s_d", "s_i")


@dataclass(frozen=True)
class ScoreTriple:
    s_t: float
    s_d: float
    s_i: float


@dataclass(frozen=True)
class ScoreMatrix:
    s_t: np.ndarray
    s_d: np.ndarray
    s_i: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_2d(np.array(getattr(self, k), dtype=np.float64)) for k in SCORE_KINDS]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 2:
            raise ShapeMismatch(f"score matrices must share one M x N shape, got {[a.shape for a in arrays]}")
        for k, a in zip(SCORE_KINDS, arrays):
            a.setflags(write=False)
            object.__setattr__(self, k, a)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.s_t.shape

    def __getitem__(self, ij: Tuple[int, int]) -> ScoreTriple:
        return ScoreTriple(float(self.s_t[ij]), float(self.s_d[ij]), float(self.s_i[ij]))

    def check_unit(self) -> "ScoreMatrix":
        for k in SCORE_KINDS:
            a = getattr(self, k)
            if not np.isfinite(a).all():
                raise NonFiniteCost(f"{k} contains NaN or Inf")
            if a.size and (a.min() < 0.0 or a.max() > 1.0):
                raise OutOfRange(f"{k} scores must lie in [0, 1], got [{a.min()}, {a.max()}]")
        return self

    @classmethod
    def from_triples(cls, rows: Sequence[Sequence[Sequence[float]]]) -> "ScoreMatrix":
        """From an ``M x N`` nested list of ``(s_t, s_d, s_i)``."""
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[-1] != 3:
            raise ShapeMismatch(f"expected M x N x 3 score triples, got shape {arr.shape}")
        return cls(arr[..., 0], arr[..., 1], arr[..., 2])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScoreMatrix":
        missing = [k for k in SCORE_KINDS if k not in data]
        if missing:
            raise DataError(f"score block lacks {missing}")
        arrays = [np.asarray(data[k], dtype=np.float64) for k in SCORE_KINDS]
        if any(a.ndim != 2 for a in arrays):
            raise ShapeMismatch(f"score blocks must be M x N lists of lists, got shapes {[a.shape for a in arrays]}")
        return cls(*arrays)


@dataclass(frozen=True)
class CostWeights:
    alpha: float = 1.0 / 3.0
    beta: float = 1.0 / 3.0
    gamma: float = 1.0 / 3.0

    def __post_init__(self):
        w = (self.alpha, self.beta, self.gamma)
        if not all(math.isfinite(v) and v >= 0 for v in w):
            raise WeightsOffSimplex(f"weights must be finite and non-negative, got {w}")
        if abs(sum(w) - 1.0) > SIMPLEX_TOL:
            raise WeightsOffSimplex(f"weights must sum to 1, got {w} (sum {sum(w)!r})")

    @classmethod
    def from_dict(cls, cfg: Optional[Dict[str, Any]]) -> "CostWeights":
        cfg = dict(cfg or {})
        unknown = set(cfg) - {"alpha", "beta", "gamma"}
        if unknown:
            raise InvalidConfig("weights", f"unknown keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in cfg.items()})


@dataclass(frozen=True)
class AcceptThresholds:
    t_min: float = 0.25
    d_min: float = 0.30
    i_min: float = 0.50

    @classmethod
    def from_dict(cls, cfg: Optional[Dict[str, Any]]) -> "AcceptThresholds":
        cfg = dict(cfg or {})
        unknown = set(cfg) - {"t_min", "d_min", "i_min"}
        if unknown:
            raise InvalidConfig("thresholds", f"unknown keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in cfg.items()})


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reasons: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def label(self) -> str:
        return "accepted" if self.accepted else "rejected"


@dataclass(frozen=True)
class Assignment:
    """``pairs`` maps every subject (in order) to its box; empty when the matching was rejected."""

    pairs: Tuple[Tuple[int, int], ...]
    total_cost: float
    verdict: Verdict

    @property
    def accepted(self) -> bool:
        return self.verdict.accepted


def normalize_scores(scores: ScoreMatrix, mode: str = "minmax") -> ScoreMatrix:
    """
    ``"minmax"`` rescales each score kind over the matrix to [0, 1]; a kind whose entries are all
    equal is only clipped. ``"clip"`` clips every kind to [0, 1].
    """
    if mode not in ("minmax", "clip"):
        raise InvalidConfig("normalize", f"unknown mode '{mode}', expected 'minmax' or 'clip'")
    out = []
    for k in SCORE_KINDS:
        a = getattr(scores, k)
        if not np.isfinite(a).all():
            raise NonFiniteCost(f"{k} contains NaN or Inf")
        if mode == "minmax" and a.size and a.max() > a.min():
            a = (a - a.min()) / (a.max() - a.min())
        out.append(np.clip(a, 0.0, 1.0))
    return ScoreMatrix(*out)


def combined_cost(scores: ScoreMatrix, w: CostWeights = CostWeights()) -> np.ndarray:
    scores.check_unit()
    similarity = w.alpha * scores.s_t + w.beta * scores.s_d + w.gamma * scores.s_i
    return np.clip(1.0 - similarity, 0.0, 1.0)


def _solve(cost: np.ndarray) -> float:
    if cost.shape[0] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def assign(cost: np.ndarray) -> Assignment:
    """
    Minimum-cost injective assignment of all ``M`` subjects to ``N`` boxes. With ``M > N`` no
    complete matching exists and the scene is rejected with ``IncompleteMatching``.

    Among optimal matchings the lexicographically smallest one wins: subject 0 takes the lowest box
    index that still allows an optimal completion, then subject 1, and so on.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ShapeMismatch(f"cost must be an M x N matrix, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise NonFiniteCost("cost matrix contains NaN or Inf")
    M, N = cost.shape
    if M == 0:
        raise DataError("cost matrix has no subjects")
    if M > N:
        return Assignment((), math.nan, Verdict(False, ("IncompleteMatching",)))

    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best))
    free_cols = list(range(N))
    pairs: List[Tuple[int, int]] = []
    spent = 0.0
    for i in range(M):
        for j in free_cols:
            rest = [c for c in free_cols if c != j]
            remaining = cost[i + 1 :][:, rest]
            if spent + cost[i, j] + _solve(remaining) <= best + tol:
                pairs.append((i, j))
                spent += cost[i, j]
                free_cols = rest
                break
    if len(pairs) != M:
        pairs = [(int(i), int(j)) for i, j in zip(rows, cols)]
    total = float(sum(cost[i, j] for i, j in pairs))
    return Assignment(tuple(pairs), total, Verdict(True))


def accept_scene(
    a: Assignment, scores: ScoreMatrix, thresholds: AcceptThresholds = AcceptThresholds()
) -> Verdict:
    """Reject when any matched pair has a raw score below its threshold, citing every such pair."""
    if not a.accepted:
        return a.verdict
    reasons = []
    for i, j in a.pairs:
        s = scores[i, j]
        checks = (("s_t", s.s_t, thresholds.t_min), ("s_d", s.s_d, thresholds.d_min), ("s_i", s.s_i, thresholds.i_min))
        for name, value, lo in checks:
            if value < lo:
                reasons.append(f"LowScore(subject={i}, box={j}, {name}={value:.3f} < {lo})")
    return Verdict(not reasons, tuple(reasons))
