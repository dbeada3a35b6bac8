"""
Fluorescence detection: photon-count histograms and the bright-fraction fit.

A shot is bright with probability p and then yields Poisson(lambda_bright)
counts, otherwise Poisson(lambda_dark).  The bright fraction of a measured
histogram is the maximum-likelihood mixture weight with both means known.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .analysis import FitResult

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class DetectionModel:
    lambda_bright: float = 10.0
    lambda_dark: float = 0.2

    def __post_init__(self):
        if self.lambda_dark < 0:
            raise ValueError("lambda_dark must be non-negative")
        if not self.lambda_bright > self.lambda_dark:
            raise ValueError("lambda_bright must exceed lambda_dark")


@dataclass(frozen=True)
class CountHistogram:
    """``bins[k]`` is the number of shots that registered k photons."""

    bins: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.int64)
        if b.ndim != 1 or np.any(b < 0):
            raise ValueError("histogram bins must be a 1-D array of non-negative counts")
        object.__setattr__(self, "bins", b)

    @property
    def total_shots(self) -> int:
        return int(self.bins.sum())

    @property
    def mean(self) -> float:
        return float(np.arange(len(self.bins)) @ self.bins / self.total_shots)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("counts,shots\n")
        for k, n in enumerate(self.bins):
            if n:
                buf.write(f"{k},{n}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountHistogram":
        rows = [r for r in csv.reader(io.StringIO(text))
                if r and not r[0].lstrip().startswith("#")]
        if rows and rows[0][0].strip() == "counts":
            rows = rows[1:]
        pairs = [(int(k), int(n)) for k, n in rows]
        if any(k < 0 or n < 0 for k, n in pairs):
            raise ValueError("negative count or shot number in histogram CSV")
        size = max((k for k, _ in pairs), default=-1) + 1
        bins = np.zeros(size, dtype=np.int64)
        for k, n in pairs:
            bins[k] += n
        return cls(bins)


def simulate_histogram(p_bright: float, shots: int, model: DetectionModel, seed=None) -> CountHistogram:
    if not 0.0 <= p_bright <= 1.0:
        raise ValueError(f"p_bright must lie in [0, 1], got {p_bright!r}")
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    n_bright = rng.binomial(shots, p_bright)
    counts = np.concatenate([rng.poisson(model.lambda_bright, n_bright),
                             rng.poisson(model.lambda_dark, shots - n_bright)])
    return CountHistogram(np.bincount(counts))


def _component_pmfs(hist: CountHistogram, model: DetectionModel):
    k = np.arange(len(hist.bins))
    return poisson.pmf(k, model.lambda_bright), poisson.pmf(k, model.lambda_dark)


def log_likelihood(p: float, hist: CountHistogram, model: DetectionModel) -> float:
    fb, fd = _component_pmfs(hist, model)
    occupied = hist.bins > 0
    mix = p * fb[occupied] + (1 - p) * fd[occupied]
    with np.errstate(divide="ignore"):
        return float(hist.bins[occupied] @ np.log(mix))


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Maximiser of a unimodal ``f`` on [lo, hi]."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_bright_fraction(hist: CountHistogram, model: DetectionModel) -> FitResult:
    """Maximum-likelihood bright fraction with its observed-information error.

    The log-likelihood is concave in p, so the sign of its slope at the ends of
    [0, 1] settles boundary optima exactly; interior optima use golden-section
    search.
    """
    if model.lambda_bright == model.lambda_dark:
        raise ValueError("degenerate detection model: bright and dark means coincide")
    if hist.total_shots == 0:
        raise ValueError("empty histogram")
    fb, fd = _component_pmfs(hist, model)
    occ = hist.bins > 0
    n, fb, fd = hist.bins[occ], fb[occ], fd[occ]

    with np.errstate(divide="ignore", invalid="ignore"):
        slope0 = np.sum(n * (fb - fd) / fd) if np.all(fd > 0) else np.inf
        slope1 = np.sum(n * (fb - fd) / fb) if np.all(fb > 0) else -np.inf
    if slope0 <= 0:
        p_hat = 0.0
    elif slope1 >= 0:
        p_hat = 1.0
    else:
        p_hat = golden_section_max(lambda p: log_likelihood(p, hist, model), 0.0, 1.0)

    mix = p_hat * fb + (1 - p_hat) * fd
    with np.errstate(divide="ignore", invalid="ignore"):
        info = float(np.sum(n * ((fb - fd) / mix) ** 2))
    stderr = 1.0 / math.sqrt(info) if info > 0 and np.isfinite(info) else math.inf
    return FitResult({"p_bright": p_hat}, {"p_bright": stderr},
                     rss=-2.0 * log_likelihood(p_hat, hist, model),
                     dof=max(int(occ.sum()) - 1, 0),
                     flags={"shots": hist.total_shots})
