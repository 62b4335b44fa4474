"""Whittle estimation of ARFIMA(0,d,0) and ARTFIMA(0,d,lam,0) models.

The model spectral density is ``f(w) = sigma^2 / (2 pi) * g(w)`` with

    g(w) = |1 - e^{-lam} e^{-i w}|^{-2d} = (1 - 2 e^{-lam} cos w + e^{-2 lam})^{-d}

and the innovation variance is profiled out of the Whittle objective.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from ._validation import check_1d
from .exceptions import ContractError, FitError
from .fracdiff import MAX_WEIGHTS, WeightCapWarning, frac_weights, tempered_weights
from .timeseries import LogSeries

logger = logging.getLogger(__name__)

ARFIMA_BOUNDS = (-0.499, 0.499)
ARTFIMA_D_BOUNDS = (1e-6, 3.0)
ARTFIMA_LAM_BOUNDS = (1e-6, 2.0)
N_RESTARTS = 5
MAX_ITER = 500
TOL = 1e-8


@dataclass(frozen=True)
class Periodogram:
    """Periodogram at the positive Fourier frequencies ``2 pi j / n``, ``j = 1..(n-1)//2``.

    ``nyquist`` holds the ordinate at ``pi`` for even ``n`` (0 otherwise); it is
    kept only so the full-circle power can be recovered.
    """

    freqs: np.ndarray
    ordinates: np.ndarray
    n: int
    nyquist: float = 0.0

    def total_power(self) -> float:
        """``(2 pi / n)`` times the sum over every nonzero Fourier frequency."""
        return 2 * np.pi / self.n * (2 * self.ordinates.sum() + self.nyquist)


def periodogram(x) -> Periodogram:
    x = check_1d(getattr(x, "values", x), "x", min_length=64)
    n = x.size
    dft = np.fft.fft(x - x.mean())
    power = (dft.real**2 + dft.imag**2) / (2 * np.pi * n)
    m = (n - 1) // 2
    j = np.arange(1, m + 1)
    nyquist = float(power[n // 2]) if n % 2 == 0 else 0.0
    return Periodogram(2 * np.pi * j / n, power[1 : m + 1], n, nyquist)


def spectral_shape(omega, d: float, lam: float = 0.0):
    """``|1 - e^{-lam} e^{-i omega}|^{-2d}``; at ``lam = 0`` this is ``(2 sin(omega/2))^{-2d}``."""
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(omega <= 0) or np.any(omega > np.pi):
        raise ContractError("omega must lie in (0, pi]")
    if lam < 0:
        raise ContractError("lam must be >= 0")
    if lam == 0.0:
        base = (2.0 * np.sin(omega / 2.0)) ** 2
    else:
        a = np.exp(-lam)
        # 1 - 2a cos w + a^2 == (1 - a)^2 + 4a sin^2(w/2), which keeps precision as lam -> 0
        base = (1.0 - a) ** 2 + 4.0 * a * np.sin(omega / 2.0) ** 2
    out = base ** (-d)
    return float(out) if out.ndim == 0 else out


def profiled_sigma2(pg: Periodogram, d: float, lam: float = 0.0) -> float:
    g = spectral_shape(pg.freqs, d, lam)
    return float(2 * np.pi / pg.freqs.size * np.sum(pg.ordinates / g))


def whittle_objective(pg: Periodogram, d: float, lam: float = 0.0) -> float:
    """``sum_j log f_j + I_j / f_j`` with ``sigma^2`` at its profiled optimum."""
    g = spectral_shape(pg.freqs, d, lam)
    m = pg.freqs.size
    s2 = 2 * np.pi / m * np.sum(pg.ordinates / g)
    if not np.isfinite(s2) or s2 <= 0:
        return np.inf
    return float(np.sum(np.log(s2 * g / (2 * np.pi))) + m)


@dataclass(frozen=True)
class LongMemFit:
    model: str
    d_hat: float
    lambda_hat: float
    sigma2_hat: float
    objective: float
    converged: bool
    n_restarts_used: int
    trace: tuple = field(default=(), repr=False, compare=False)

    def report(self) -> str:
        return (
            f"model={self.model} d_hat={self.d_hat:.6f} lambda_hat={self.lambda_hat:.6f} "
            f"sigma2_hat={self.sigma2_hat:.6g} objective={self.objective:.6f} converged={self.converged}"
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "d_hat": self.d_hat,
            "lambda_hat": self.lambda_hat,
            "sigma2_hat": self.sigma2_hat,
            "objective": self.objective,
            "converged": self.converged,
            "n_restarts_used": self.n_restarts_used,
        }


def _starts(objective, candidates, k):
    scored = sorted(((objective(c), i, c) for i, c in enumerate(candidates)), key=lambda t: (t[0], t[1]))
    return [c for _, _, c in scored[:k]]


def whittle_fit(x, model: str = "arfima", n_restarts: int = N_RESTARTS, max_iter: int = MAX_ITER) -> LongMemFit:
    """Whittle estimate of ``d`` (ARFIMA) or ``(d, lam)`` (ARTFIMA).

    The series is demeaned, not detrended. Nelder-Mead is restarted from the
    best points of a coarse grid; ``lam`` is searched on a log scale.
    """
    values = check_1d(x.values if isinstance(x, LogSeries) else x, "x", min_length=256)
    pg = periodogram(values)

    if model == "arfima":
        lo, hi = ARFIMA_BOUNDS
        bounds = [(lo, hi)]

        def unpack(theta):
            return float(theta[0]), 0.0

        grid = [np.array([d]) for d in np.linspace(-0.4, 0.4, 9)]
    elif model == "artfima":
        bounds = [ARTFIMA_D_BOUNDS, tuple(np.log(ARTFIMA_LAM_BOUNDS))]

        def unpack(theta):
            return float(theta[0]), float(np.exp(theta[1]))

        grid = [
            np.array([d, np.log(lam)])
            for d in (0.2, 0.5, 0.8, 1.0, 1.5, 2.5)
            for lam in (1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.5)
        ]
    else:
        raise ContractError(f"model must be 'arfima' or 'artfima', got {model!r}")

    def objective(theta):
        d, lam = unpack(theta)
        if not all(b[0] <= t <= b[1] for t, b in zip(theta, bounds)):
            return np.inf
        return whittle_objective(pg, d, lam)

    best = None
    converged = False
    used = 0
    for start in _starts(objective, grid, n_restarts):
        trace = []

        def record(xk):
            trace.append(objective(xk))

        res = minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=bounds,
            callback=record,
            options={"maxiter": max_iter, "xatol": TOL, "fatol": TOL},
        )
        used += 1
        if not np.isfinite(res.fun):
            continue
        converged = converged or bool(res.success)
        if best is None or res.fun < best[0].fun:
            best = (res, tuple(trace))
    if best is None:
        raise FitError(f"Whittle {model} fit failed on every restart", best=None)
    res, trace = best
    d, lam = unpack(res.x)
    fit = LongMemFit(model, d, lam, profiled_sigma2(pg, d, lam), float(res.fun), converged, used, trace)
    logger.info("whittle %s", fit.report())
    return fit


def simulate_longmem(d: float, lam: float, n: int, seed, burn_in: int | None = None, tau: float = 1e-7) -> np.ndarray:
    """Simulate ARFIMA(0,d,0) / ARTFIMA(0,d,lam,0) noise.

    Standard-normal innovations ``z`` are passed through the AR inversion
    ``x_t = z_t - sum_{k>=1} w_k x_{t-k}`` with the fixed-width weights at
    ``tau``; the first ``burn_in`` values (default: the window) are dropped.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeightCapWarning)
        w = tempered_weights(d, lam, tau) if lam > 0 else frac_weights(d, tau)
    if burn_in is None:
        burn_in = w.window
    if burn_in < w.window - 1:
        raise ContractError(f"burn_in={burn_in} is shorter than the weight window {w.window}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn_in)
    if w.window == 1:
        x = z
    else:
        x = lfilter([1.0], w.weights, z)
    if w.window == MAX_WEIGHTS:
        logger.debug("simulation used a capped AR window of %d weights", MAX_WEIGHTS)
    return x[burn_in:]
