"""
Fitting toolkit: Rabi amplitude, Ramsey fringes, phase unwrapping and the
phase-slope frequency measurement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

TWO_PI = 2 * np.pi


class UnwrapError(ValueError):
    """A phase step could not be assigned to a unique 2*pi branch."""


@dataclass
class FitResult:
    values: dict
    errors: dict
    rss: float
    dof: int
    residuals: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def error(self, key) -> float:
        return self.errors[key]

    def report(self) -> str:
        """``key: value`` lines, parameters first."""
        lines = []
        for k, v in self.values.items():
            lines.append(f"{k}: {v:.12g}")
            if k in self.errors:
                lines.append(f"{k}_stderr: {self.errors[k]:.12g}")
        lines.append(f"rss: {self.rss:.12g}")
        lines.append(f"dof: {self.dof}")
        for k, v in self.flags.items():
            lines.append(f"{k}: {v}")
        return "\n".join(lines) + "\n"


def _split_points(points, ncol_min=2):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < ncol_min:
        raise ValueError("expected rows of (x, y[, stderr])")
    x, y = arr[:, 0], arr[:, 1]
    sigma = arr[:, 2] if arr.shape[1] > 2 else None
    if sigma is not None and np.any(sigma <= 0):
        raise ValueError("standard errors must be positive")
    return x, y, sigma


def rabi_model(energy, a):
    """Bright probability (1/3) sin^2(a sqrt(E) / 2) after a single pulse."""
    return np.sin(0.5 * a * np.sqrt(energy)) ** 2 / 3.0


def fit_rabi(points, a_max: float = 3.0) -> FitResult:
    """Weighted least-squares fit of the Rabi calibration ``a`` (pJ^-1/2).

    ``points`` holds rows (E, p_bright[, stderr]).  The chi-square in ``a`` is
    periodic-looking, so every local minimum on a grid over (0, a_max] is
    refined with a bounded scalar search; ties go to the smallest ``a``.
    """
    E, p, sigma = _split_points(points)
    if np.any(E < 0):
        raise ValueError("pulse energies must be non-negative")
    if np.all(p == 0):
        raise ValueError("all-zero bright data cannot identify a")
    w = np.ones_like(p) if sigma is None else 1.0 / sigma ** 2

    def chi2(a):
        return float(np.sum(w * (p - rabi_model(E, a)) ** 2))

    emax = E.max()
    if emax <= 0:
        raise ValueError("need at least one positive pulse energy")
    step = (np.pi / math.sqrt(emax)) / 20
    grid = np.arange(step, a_max + step, step)
    vals = np.array([chi2(a) for a in grid])
    cands = []
    for i in range(len(grid)):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i + 1 < len(grid) else np.inf
        if vals[i] <= left and vals[i] <= right:
            lo = grid[max(i - 1, 0)] if i > 0 else 1e-12
            hi = grid[min(i + 1, len(grid) - 1)]
            res = minimize_scalar(chi2, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13})
            cands.append((res.fun, res.x))
    best = min(c[0] for c in cands)
    a_hat = min(x for f, x in cands if f <= best + 1e-12 * (1 + best))
    rss = chi2(a_hat)

    # curvature of chi^2/2 at the optimum, residual term included
    h = 1e-5 * max(a_hat, 1e-3)
    curv = (chi2(a_hat + h) - 2 * rss + chi2(a_hat - h)) / (2 * h * h)
    dof = len(E) - 1
    stderr = math.sqrt(1.0 / curv) if curv > 0 else math.inf
    if sigma is None and dof > 0:
        stderr *= math.sqrt(rss / dof)
    resid = p - rabi_model(E, a_hat)
    return FitResult({"a": a_hat}, {"a": stderr}, rss, dof, resid)


def fit_sinusoid(samples, amplitude_tol: float = 1e-12) -> FitResult:
    """Fit offset + amplitude * cos(phase - phase0) as a linear problem.

    Rows are (phase, value[, stderr]).  Without standard errors the parameter
    errors are scaled by the residual variance.  When the fitted amplitude is
    below ``amplitude_tol`` the phase is meaningless; ``phase0`` is then 0 and
    ``flags['phase_undefined']`` is True.
    """
    phi, y, sigma = _split_points(samples)
    if len(phi) < 3:
        raise ValueError("fit_sinusoid needs at least 3 samples")
    X = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    w = np.ones_like(y) if sigma is None else 1.0 / sigma
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    resid = y - X @ coef
    rss = float(np.sum((resid * w) ** 2))
    dof = len(phi) - 3
    cov = np.linalg.pinv((X * w[:, None]).T @ (X * w[:, None]))
    if sigma is None:
        cov = cov * (rss / dof if dof > 0 else 0.0)
    offset, c, s = coef
    amp = math.hypot(c, s)
    undefined = amp < amplitude_tol * max(1.0, abs(offset))
    if undefined:
        amp, phase0, amp_err, phase_err = 0.0, 0.0, math.sqrt(max(cov[1, 1], 0)), math.inf
    else:
        phase0 = math.atan2(s, c) % TWO_PI
        g_amp = np.array([0.0, c / amp, s / amp])
        g_ph = np.array([0.0, -s / amp ** 2, c / amp ** 2])
        amp_err = math.sqrt(max(g_amp @ cov @ g_amp, 0.0))
        phase_err = math.sqrt(max(g_ph @ cov @ g_ph, 0.0))
    return FitResult(
        {"offset": float(offset), "amplitude": amp, "phase0": phase0},
        {"offset": math.sqrt(max(cov[0, 0], 0.0)), "amplitude": amp_err, "phase0": phase_err},
        rss, dof, resid, {"phase_undefined": bool(undefined)},
    )


def fringe_contrast(fit: FitResult) -> float:
    """Twice the fringe amplitude, i.e. amplitude over the ideal fringe mean of 1/2."""
    return 2.0 * fit["amplitude"]


def ground_slope_seed(ground_hf_splitting: float = 14.530) -> float:
    """Phase slope (rad/ps) predicted from the ground hyperfine splitting in GHz."""
    return TWO_PI * ground_hf_splitting * 1e-3


def unwrap_phases(delays, phases, slope_seed: float | None = None,
                  max_error: float = 0.5 * np.pi) -> np.ndarray:
    """Lift wrapped phases onto a continuous line guided by ``slope_seed`` (rad/ps).

    Points are taken in the given order.  Each phase is shifted by a multiple of
    2*pi to land nearest the prediction extrapolated from the previous point.
    A step whose best branch still misses the prediction by more than
    ``max_error`` is ambiguous and raises UnwrapError.
    """
    t = np.asarray(delays, dtype=float)
    ph = np.asarray(phases, dtype=float)
    if t.shape != ph.shape:
        raise ValueError("delays and phases differ in length")
    if slope_seed is None:
        slope_seed = ground_slope_seed()
    out = np.empty_like(ph)
    if len(ph) == 0:
        return out
    out[0] = ph[0]
    for i in range(1, len(ph)):
        pred = out[i - 1] + slope_seed * (t[i] - t[i - 1])
        k = np.round((pred - ph[i]) / TWO_PI)
        out[i] = ph[i] + TWO_PI * k
        miss = abs(out[i] - pred)
        if miss > max_error:
            raise UnwrapError(
                f"step {i} (delay {t[i]:g} ps) misses the seed prediction by {miss:.3f} rad")
    return out


def fit_frequency(delays, phases, delay_sigma=0.1, phase_sigma=0.01,
                  slope_seed: float | None = None) -> FitResult:
    """Weighted straight-line fit of unwrapped phase (rad) against delay (ps).

    Delay uncertainty is folded into an effective phase variance through the
    seed slope, sigma_eff^2 = sigma_phi^2 + (slope_seed * sigma_t)^2.  Errors are
    absolute (not rescaled by the residuals).  The returned ``frequency`` is
    slope / 2pi in GHz.
    """
    t = np.asarray(delays, dtype=float)
    y = np.asarray(phases, dtype=float)
    if len(np.unique(t)) < 2:
        raise ValueError("fit_frequency needs at least 2 distinct delays")
    if slope_seed is None:
        slope_seed = ground_slope_seed()
    var = np.broadcast_to(np.asarray(phase_sigma, dtype=float) ** 2
                          + (slope_seed * np.asarray(delay_sigma, dtype=float)) ** 2, t.shape)
    if np.any(var <= 0):
        raise ValueError("effective phase uncertainties must be positive")
    w = 1.0 / var
    S, Sx, Sy = w.sum(), (w * t).sum(), (w * y).sum()
    tbar = Sx / S
    Stt = (w * (t - tbar) ** 2).sum()
    slope = (w * (t - tbar) * y).sum() / Stt
    intercept = (Sy - slope * Sx) / S
    resid = y - (intercept + slope * t)
    slope_err = math.sqrt(1.0 / Stt)
    icpt_err = math.sqrt(1.0 / S + tbar ** 2 / Stt)
    scale = 1e3 / TWO_PI
    return FitResult(
        {"frequency": slope * scale, "slope": slope, "intercept": intercept},
        {"frequency": slope_err * scale, "slope": slope_err, "intercept": icpt_err},
        float(np.sum(resid ** 2)), len(t) - 2, resid,
        {"chi2": float(np.sum(w * resid ** 2))},
    )


def excited_splitting(f_diff: float, ground: float = 14.530, f_err: float = 0.0,
                      ground_err: float = 0.0):
    """Excited hyperfine splitting (GHz) and its propagated uncertainty."""
    value = ground - f_diff
    if value < 0:
        raise ValueError(f"non-physical excited splitting {value:g} GHz")
    return value, math.hypot(f_err, ground_err)
