"""Recovery statistics built on exponential trace functionals.

Everything here consumes a PointConfiguration (a truncated spectrum) or a
trace curve and is purely deterministic: summation order is fixed, no
randomness enters. The heat-trace functional estimator_T targets
r0 + 1/beta; rigidity_count counts points removed from a window; the
energy route recovers beta from the log-partition function of the
Gaussian beta-ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammaln

from .core import GeneralizedParams, PointConfiguration, SaoParams

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class EstimatorSettings:
    """Evaluation ladder t_n = exp(-c1 n), n = 1..N_M, N_m = ceil(m^(1+c2)).

    Block m ends at N_m; block averages over m = 1..M drive the
    divergence diagnostics.
    """

    c1: float = 0.05
    c2: float = 0.5
    M: int = 9

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        if self.M < 1:
            raise ValueError("need at least one block")

    def block_ends(self) -> np.ndarray:
        m = np.arange(1, self.M + 1, dtype=float)
        return np.ceil(m ** (1.0 + self.c2)).astype(int)

    @property
    def n_terms(self) -> int:
        return int(self.block_ends()[-1])

    def times(self) -> np.ndarray:
        n = np.arange(1, self.n_terms + 1, dtype=float)
        return np.exp(-self.c1 * n)


class TraceValue(NamedTuple):
    value: float
    tail_bound: float
    flagged: bool


def exp_trace(config: PointConfiguration, t: float,
              tail_policy: float = math.inf) -> TraceValue:
    """Sum of exp(-t x / 2) over the configuration, with a truncation
    tail bound exp(-t x_K / 2) * (1 + 2 / (t s)) from the last gap s.

    The bound is advisory: flagged only when it exceeds tail_policy.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    pts = config.points
    if pts.size == 0:
        return TraceValue(0.0, 0.0, False)
    value = float(np.exp(-0.5 * t * pts).sum())
    s = config.last_gap
    tail = math.exp(-0.5 * t * pts[-1]) * (1.0 + 2.0 / (t * s))
    return TraceValue(value, tail, tail > tail_policy)


@dataclass(frozen=True)
class FunctionalResult:
    """A block-averaged functional value with stability diagnostics."""

    value: float
    block_averages: np.ndarray
    last_increment: float
    diverged: bool
    flagged: bool = False

    @property
    def nearest_integer(self) -> int:
        return int(math.floor(self.value + 0.5))


def _block_average(deviations: np.ndarray, settings: EstimatorSettings,
                   offset: float, scale: float) -> tuple:
    ends = settings.block_ends()
    csum = np.cumsum(deviations)
    averages = offset + scale * csum[ends - 1] / ends
    if averages.size >= 2:
        increments = np.abs(np.diff(averages))
        last = float(increments[-1])
        # growth without stabilization: increments rising across the
        # last three blocks
        diverged = increments.size >= 3 and bool(
            np.all(np.diff(increments[-3:]) > 0))
    else:
        last, diverged = 0.0, False
    return averages, last, diverged


def _t_deviations(trace_at: Callable[[float], float],
                  settings: EstimatorSettings) -> np.ndarray:
    ts = settings.times()
    return np.array([trace_at(t) - SQRT_2_OVER_PI * t ** -1.5 for t in ts])


def estimator_T(config: PointConfiguration, settings: EstimatorSettings,
                tail_policy: float = math.inf) -> FunctionalResult:
    """Recovery functional 1/2 + (2/N_M) sum_n (trace(t_n) - leading term).

    For an edge-canonical spectrum this targets r0 + 1/beta as the ladder
    deepens. Block averages at N_1..N_M and their increments expose
    non-stabilizing inputs (wrong normalization, truncated too hard).
    """
    flagged = False

    def trace_at(t):
        nonlocal flagged
        tv = exp_trace(config, t, tail_policy)
        flagged = flagged or tv.flagged
        return tv.value

    devs = _t_deviations(trace_at, settings)
    averages, last, diverged = _block_average(devs, settings, 0.5, 2.0)
    return FunctionalResult(value=float(averages[-1]), block_averages=averages,
                            last_increment=last, diverged=diverged,
                            flagged=flagged)


def estimator_T_from_trace(trace_at: Callable[[float], float],
                           settings: EstimatorSettings) -> float:
    """Same averaging as estimator_T, applied to a supplied trace curve."""
    devs = _t_deviations(trace_at, settings)
    averages, _, _ = _block_average(devs, settings, 0.5, 2.0)
    return float(averages[-1])


def sao_trace_constant(theta: SaoParams) -> float:
    """Constant term of the edge-canonical mean trace: (r0 + 1/beta)/2 - 1/4."""
    return 0.5 * (theta.r0 + 1.0 / theta.beta) - 0.25


def trace_constant_formula(theta: SaoParams, eta: GeneralizedParams) -> float:
    """Constant term of the generalized-operator mean trace:

        (2 r0 - r + r sigma^2 / kappa + r (r-1) upsilon^2 / kappa) / 4.

    At eta = sao_eta(theta) this reduces to sao_trace_constant(theta).
    """
    r, r0 = theta.r, theta.r0
    k = eta.kappa
    return 0.25 * (2.0 * r0 - r + r * eta.sigma ** 2 / k
                   + r * (r - 1) * eta.upsilon ** 2 / k)


def trace_leading_coefficient(r: int, kappa: float) -> float:
    """Coefficient of t^(-3/2) in the generalized-operator mean trace."""
    return r / (math.sqrt(2.0 * math.pi) * kappa)


def rigidity_count(config: PointConfiguration, window: tuple,
                   known: tuple, settings: EstimatorSettings) -> FunctionalResult:
    """Count the points a configuration is missing from a window.

    config must be the spectrum outside window = [lo, hi); known = (r0, beta)
    fixes the constant term. The functional

        (1/N_M) sum_n ( leading(t_n) + constant - trace(t_n) )

    converges to the number of removed points; value and its nearest
    integer are both reported.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must be a nonempty interval [lo, hi)")
    pts = config.points
    inside = np.count_nonzero((pts >= lo) & (pts < hi))
    if inside:
        raise ValueError(f"configuration has {inside} points inside the window")
    r0, beta = known
    const = 0.5 * (r0 + 1.0 / beta) - 0.25
    ts = settings.times()
    devs = np.array([SQRT_2_OVER_PI * t ** -1.5 + const
                     - exp_trace(config, t).value for t in ts])
    averages, last, diverged = _block_average(devs, settings, 0.0, 1.0)
    return FunctionalResult(value=float(averages[-1]), block_averages=averages,
                            last_increment=last, diverged=diverged)


def hamiltonian_energy(points, n: int) -> float:
    """Quadratic-confinement log-gas energy of a point set:

        (1/4) sum x_i^2 - (1/n) sum_{i<j} log |x_j - x_i|.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 1 or x.size != n:
        raise ValueError(f"expected {n} points, got shape {x.shape}")
    if n < 2:
        raise ValueError("need at least two points")
    iu = np.triu_indices(n, k=1)
    gaps = np.abs(x[iu[1]] - x[iu[0]])
    if np.any(gaps == 0.0):
        raise ValueError("points must be pairwise distinct")
    return float(0.25 * np.dot(x, x) - np.log(gaps).sum() / n)


# digamma via the shift recurrence and the asymptotic series; the
# Bernoulli-number coefficients B_2k / 2k are frozen through k = 7,
# giving < 1e-15 truncation once the argument is shifted past 12
_PSI_COEF = (1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
             1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0)


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function for x > 0."""
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise ValueError("digamma implemented for positive arguments only")
    acc = 0.0
    while x < 12.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for c in _PSI_COEF:
        series += c * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


def F_beta(beta: float) -> float:
    """Limit value of the centered, rescaled log-gas energy statistic:

        F(beta) = log(beta^2 / 4) - 2 psi(1 + beta/2),

    strictly increasing from -inf to 0 on (0, inf).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    return math.log(beta * beta / 4.0) - 2.0 * digamma(1.0 + beta / 2.0)


BETA_BRACKET = (1e-6, 1e6)


def energy_statistic(energy: float, n: int) -> float:
    """Centering and scaling that sends the log-gas energy to F(beta)."""
    return -4.0 * (energy - 0.375 * n + 0.5 * math.log(n)) - 1.0


def beta_from_energy(energy: float, n: int) -> float:
    """Invert the energy statistic for beta by monotone bisection.

    Raises when the statistic falls outside the range F maps the bracket
    [1e-6, 1e6] onto.
    """
    s = energy_statistic(energy, n)
    lo, hi = BETA_BRACKET
    flo, fhi = F_beta(lo), F_beta(hi)
    if not flo <= s <= fhi:
        raise ValueError(
            f"energy statistic {s:.6g} outside recoverable range "
            f"[{flo:.6g}, {fhi:.6g}]")
    # bisect in log space; the bracket spans twelve decades
    llo, lhi = math.log(lo), math.log(hi)
    while lhi - llo > 1e-12:
        mid = 0.5 * (llo + lhi)
        if F_beta(math.exp(mid)) < s:
            llo = mid
        else:
            lhi = mid
    return math.exp(0.5 * (llo + lhi))


def log_Z_gbe(n: int, beta: float) -> float:
    """Log partition function of the quadratic-confinement beta log-gas:

        (n/2) log 2 pi + (-beta n^2/4 + (beta/4 - 1/2) n) log(n beta / 2)
        + sum_{j=1}^n log Gamma(1 + j beta/2) - n log Gamma(1 + beta/2).
    """
    if n < 1 or beta <= 0:
        raise ValueError("need n >= 1 and beta > 0")
    j = np.arange(1, n + 1, dtype=float)
    return float(0.5 * n * math.log(2.0 * math.pi)
                 + (-beta * n * n / 4.0 + (beta / 4.0 - 0.5) * n)
                 * math.log(n * beta / 2.0)
                 + gammaln(1.0 + 0.5 * beta * j).sum()
                 - n * gammaln(1.0 + 0.5 * beta))
