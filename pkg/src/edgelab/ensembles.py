"""Finite random-matrix ensembles and their edge rescalings.

Conventions. The quadratic-confinement beta log-gas is sampled through
its tridiagonal realization and rescaled by 1/sqrt(beta n), so the
spectrum fills [-2, 2]; hamiltonian_energy consumes those points as-is.
Spiked covariance matrices are W = (1/n) D Sigma D^* with D an n x p
standard Gaussian over the beta field (entry second moment 1) and
Sigma = diag(1, ..., 1, 1 + l_{r-1}, ..., 1 + l_0); their n eigenvalues
concentrate on [(1 - sqrt(g))^2, (1 + sqrt(g))^2], g = p/n. Spiked
invariant ensembles are Y = X / sqrt(n) + diag(0, ..., 0, l_{r-1}, ..., l_0)
with X the GOE/GUE/GSE-normalized full matrix. A spike l produces an
outlier at (1 + l)(1 + g/l) (covariance, l > sqrt(g)) or l + 1/l
(invariant, l > 1); subcritical spikes stick to the edge.

Quaternion (beta = 4) matrices are handled through the 2x2 complex
embedding; each eigenvalue of the embedded matrix appears twice and is
reported once.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import eigh, eigvalsh_tridiagonal

from .core import PointConfiguration

PAIR_RTOL = 1e-6

WISHART = "wishart"
GAUSSIAN = "gaussian"


def _check_model(model: str) -> str:
    if model not in (WISHART, GAUSSIAN):
        raise ValueError(f"model must be '{WISHART}' or '{GAUSSIAN}', got {model!r}")
    return model


def _check_beta(beta) -> int:
    if beta not in (1, 2, 4):
        raise ValueError(f"beta must be 1, 2 or 4, got {beta}")
    return int(beta)


def sample_beta_hermite(n: int, beta: float, seed) -> np.ndarray:
    """Eigenvalues of the tridiagonal beta-ensemble, rescaled to [-2, 2].

    Diagonal N(0, 2), off-diagonal chi with beta*(n-k) degrees of freedom,
    spectrum divided by sqrt(beta n). Any beta > 0 is admissible here.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if beta <= 0:
        raise ValueError("beta must be positive")
    rng = np.random.default_rng(seed)
    diag = rng.normal(0.0, math.sqrt(2.0), size=n)
    if n == 1:
        return diag / math.sqrt(beta * n)
    df = beta * (n - np.arange(1, n))
    off = np.sqrt(rng.chisquare(df))
    w = eigvalsh_tridiagonal(diag, off)
    return np.sort(w) / math.sqrt(beta * n)


def _standard_entries(rng, shape, beta):
    """iid entries with E|x|^2 = 1 over the real/complex/quaternion field.

    beta = 4 returns the four quaternion components, each N(0, 1/4).
    """
    if beta == 1:
        return rng.standard_normal(shape)
    if beta == 2:
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return z / math.sqrt(2.0)
    comps = rng.standard_normal((4,) + shape) / 2.0
    return comps


def _embed_quaternion(comps) -> np.ndarray:
    # a + b i + c j + d k  ->  [[a + ib, c + id], [-c + id, a - ib]]
    a, b, c, d = comps
    top = np.concatenate([a + 1j * b, c + 1j * d], axis=1)
    bot = np.concatenate([-c + 1j * d, a - 1j * b], axis=1)
    return np.concatenate([top, bot], axis=0)


def _dedup_pairs(w: np.ndarray) -> np.ndarray:
    """Collapse a doubled (Kramers) spectrum, verifying the pairing."""
    w = np.sort(w)
    a, b = w[0::2], w[1::2]
    scale = np.maximum(1.0, np.abs(a))
    if np.any(np.abs(a - b) > PAIR_RTOL * scale):
        raise RuntimeError("embedded spectrum does not split into pairs")
    return a


def _spike_variances(spikes, p: int) -> np.ndarray:
    ell = np.asarray(spikes, dtype=float)
    if ell.ndim != 1 or ell.size > p:
        raise ValueError("spikes must be a vector no longer than the dimension")
    if np.any(ell < 0):
        raise ValueError("spikes must be nonnegative")
    out = np.ones(p)
    if ell.size:
        # largest spike in the last slot
        out[p - ell.size:] = 1.0 + ell[::-1]
    return out


def sample_spiked_wishart(n: int, p: int, beta, spikes, seed) -> np.ndarray:
    """n eigenvalues of W = (1/n) D Sigma D^*, ascending."""
    beta = _check_beta(beta)
    if n < 1 or p < 1:
        raise ValueError("need n, p >= 1")
    rng = np.random.default_rng(seed)
    var = _spike_variances(spikes, p)
    d = _standard_entries(rng, (n, p), beta)
    if beta == 4:
        d = _embed_quaternion(d)
        var = np.concatenate([var, var])
    scaled = d * np.sqrt(var)[None, :]
    w = eigh(scaled @ scaled.conj().T / n, eigvals_only=True)
    if beta == 4:
        w = _dedup_pairs(w)
    return np.sort(w)


def sample_spiked_gaussian(n: int, beta, spikes, seed) -> np.ndarray:
    """n eigenvalues of Y = X / sqrt(n) + P, ascending.

    X = (A + A^*) / sqrt(2) with A iid standard over the beta field, so the
    diagonal variance is 2/beta and the off-diagonal second moment is 1.
    """
    beta = _check_beta(beta)
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    shift = _spike_variances(spikes, n) - 1.0
    a = _standard_entries(rng, (n, n), beta)
    if beta == 4:
        a = _embed_quaternion(a)
        shift = np.concatenate([shift, shift])
    x = (a + a.conj().T) / math.sqrt(2.0)
    y = x / math.sqrt(n) + np.diag(shift)
    w = eigh(y, eigvals_only=True)
    if beta == 4:
        w = _dedup_pairs(w)
    return np.sort(w)


def soft_edge(model: str, gamma: float | None = None) -> float:
    """Upper spectral edge: (1 + sqrt(gamma))^2 or 2."""
    if _check_model(model) == WISHART:
        if gamma is None or gamma <= 0:
            raise ValueError("covariance edge needs gamma = p/n > 0")
        return (1.0 + math.sqrt(gamma)) ** 2
    return 2.0


def edge_scale(model: str, n: int, gamma: float | None = None) -> float:
    """Fluctuation scale s_n multiplying (edge - eigenvalue)."""
    if _check_model(model) == WISHART:
        if gamma is None or gamma <= 0:
            raise ValueError("covariance scaling needs gamma = p/n > 0")
        sg = math.sqrt(gamma)
        return n ** (2.0 / 3.0) / (sg * (1.0 + 1.0 / sg) ** (4.0 / 3.0))
    return float(n) ** (2.0 / 3.0)


def edge_rescale(eigs, model: str, n: int,
                 gamma: float | None = None) -> PointConfiguration:
    """Map eigenvalues to the edge frame: x = s_n (edge - lambda), ascending.

    The largest eigenvalues land near the origin; outliers go negative.
    """
    e = soft_edge(model, gamma)
    s = edge_scale(model, n, gamma)
    pts = np.sort(s * (e - np.asarray(eigs, dtype=float)))
    return PointConfiguration(points=pts, source=f"{model}-edge")


def critical_spike_from_w(w: float, model: str, n: int,
                          gamma: float | None = None) -> float:
    """Spike strength in the critical window indexed by a boundary weight.

    Covariance: l = sqrt(g) - w sqrt(g) (1 + 1/sqrt(g))^(2/3) n^(-1/3);
    invariant: l = 1 - w n^(-1/3). w = +inf maps to l = 0; negative results
    are clipped to 0 with a warning (the window left the admissible range).
    """
    _check_model(model)
    if w == math.inf:
        return 0.0
    if model == WISHART:
        if gamma is None or gamma <= 0:
            raise ValueError("covariance spikes need gamma = p/n > 0")
        sg = math.sqrt(gamma)
        ell = sg - w * sg * (1.0 + 1.0 / sg) ** (2.0 / 3.0) * n ** (-1.0 / 3.0)
    else:
        ell = 1.0 - w * n ** (-1.0 / 3.0)
    if ell < 0.0:
        warnings.warn(f"critical spike clipped to 0 (got {ell:.4g}); "
                      "increase n or reduce w", stacklevel=2)
        return 0.0
    return float(ell)


def spike_outlier(ell: float, model: str, gamma: float | None = None) -> float:
    """Bulk-exit location O(l) of a supercritical spike; the soft edge when
    the spike is at or below threshold."""
    e = soft_edge(model, gamma)
    if model == WISHART:
        if ell > math.sqrt(gamma):
            return (1.0 + ell) * (1.0 + gamma / ell)
        return e
    if ell > 1.0:
        return ell + 1.0 / ell
    return e


def lrt_error_curve(lam: float, r: int) -> float:
    """Large-n limiting error of the sphericity likelihood-ratio test
    against r equal subcritical spikes: erfc((r/4) sqrt(-log(1 - lam)))."""
    if not 0.0 <= lam < 1.0:
        raise ValueError("lam must lie in [0, 1)")
    if r < 1:
        raise ValueError("need r >= 1")
    return math.erfc(0.25 * r * math.sqrt(-math.log1p(-lam)))
