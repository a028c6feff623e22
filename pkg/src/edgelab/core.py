"""Shared domain types: operator parameters and point configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BETA_FIELDS = (1, 2, 4)


def _as_weight_tuple(w) -> tuple:
    if np.isscalar(w):
        w = (w,)
    return tuple(float(x) for x in w)


@dataclass(frozen=True)
class SaoParams:
    """Parameters theta = (r, beta, w) of a half-line random Schrodinger operator.

    r is the number of vector components, beta the inverse temperature
    (any positive real when r = 1, one of 1/2/4 otherwise), and w the
    per-component boundary weight: finite for a Robin condition
    f'(i, 0) = w_i f(i, 0), +inf for Dirichlet f(i, 0) = 0.
    """

    r: int
    beta: float
    w: tuple

    def __post_init__(self):
        object.__setattr__(self, "w", _as_weight_tuple(self.w))
        if self.r < 1:
            raise ValueError(f"need r >= 1, got {self.r}")
        if self.beta <= 0:
            raise ValueError(f"need beta > 0, got {self.beta}")
        if self.r > 1 and self.beta not in BETA_FIELDS:
            raise ValueError(f"r > 1 requires beta in {BETA_FIELDS}, got {self.beta}")
        if len(self.w) != self.r:
            raise ValueError(f"w must have length r = {self.r}, got {len(self.w)}")
        for wi in self.w:
            if math.isnan(wi) or wi == -math.inf:
                raise ValueError(f"boundary weight must be finite or +inf, got {wi}")

    @property
    def r0(self) -> int:
        """Number of Robin (finite-weight) components."""
        return sum(1 for wi in self.w if math.isfinite(wi))


@dataclass(frozen=True)
class GeneralizedParams:
    """Drift slope and noise amplitudes eta = (kappa, sigma, upsilon).

    The operator is -1/2 d^2/dx^2 + kappa*x plus matrix white noise whose
    diagonal entries have variance sigma^2 and off-diagonal entries total
    variance upsilon^2 per unit length.
    """

    kappa: float
    sigma: float
    upsilon: float

    def __post_init__(self):
        for name in ("kappa", "sigma", "upsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class PointConfiguration:
    """Finite ascending point set standing in for a truncated spectrum.

    Ties are allowed (binned spectra carry integer multiplicities).
    meta records truncation data: at least "count" and "last" when nonempty.
    """

    points: np.ndarray
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1:
            raise ValueError("points must be one-dimensional")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if pts.size > 1 and np.any(np.diff(pts) < 0):
            raise ValueError("points must be ascending")
        meta = dict(self.meta)
        meta.setdefault("count", int(pts.size))
        if pts.size:
            meta.setdefault("last", float(pts[-1]))
        object.__setattr__(self, "meta", meta)

    def __len__(self):
        return int(self.points.size)

    @property
    def last_gap(self) -> float:
        """Last strictly positive inter-point gap; +inf when none exists."""
        pts = self.points
        for k in range(pts.size - 1, 0, -1):
            gap = pts[k] - pts[k - 1]
            if gap > 0:
                return float(gap)
        return math.inf


def sao_eta(theta: SaoParams) -> GeneralizedParams:
    """The (kappa, sigma, upsilon) at which twice the generalized operator
    equals the edge-canonical operator with parameters theta."""
    return GeneralizedParams(theta.r / 2.0, theta.beta ** -0.5, 2.0 ** -0.5)
