"""Thermal spread of the optical phase k*x_ion and averages over it."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermitenorm

DEFAULT_ORDER = 40


@dataclass(frozen=True)
class MotionalState:
    eta: float = 0.22
    nbar: float = 40.0
    sigma: float | None = None  # overrides eta*sqrt(2 nbar + 1) when given

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def rms_phase(self) -> float:
        return rms_phase(self)


def rms_phase(motion: MotionalState) -> float:
    if motion.sigma is not None:
        return motion.sigma
    return motion.eta * math.sqrt(2 * motion.nbar + 1)


def gauss_hermite_nodes(sigma: float, order: int = DEFAULT_ORDER, max_harmonic: int = 2):
    """Nodes and weights for E[f(phi)], phi ~ N(0, sigma^2).

    The order is raised when needed so that harmonics up to ``max_harmonic``
    of the phase stay resolved; E[exp(i k phi)] is reproduced once the node
    count exceeds roughly e/2 * (k sigma)^2.
    """
    need = int(math.ceil(0.5 * math.e * (max_harmonic * sigma) ** 2)) + 20
    n = max(order, need)
    x, w = roots_hermitenorm(n)
    return sigma * x, w / w.sum()


def average_over_phase(f, sigma: float, method: str = "gauss_hermite", order: int = DEFAULT_ORDER,
                       n: int = 100_000, seed=None, max_harmonic: int = 2) -> float:
    """E[f(phi)] for a Gaussian optical phase of rms ``sigma``.

    ``f`` must accept a numpy array of phases and return an array of values.
    ``method`` is ``"gauss_hermite"`` (deterministic quadrature) or
    ``"monte_carlo"`` (``n`` samples from ``seed``).
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return float(np.asarray(f(np.zeros(1)))[0])
    if method == "gauss_hermite":
        phi, w = gauss_hermite_nodes(sigma, order, max_harmonic)
        return float(np.dot(w, f(phi)))
    if method == "monte_carlo":
        return monte_carlo_average(f, sigma, n, seed)[0]
    raise ValueError(f"unknown averaging method {method!r}")


def monte_carlo_average(f, sigma: float, n: int, seed=None):
    """Sample mean of f(phi) and its standard error."""
    rng = np.random.default_rng(seed)
    vals = np.asarray(f(sigma * rng.standard_normal(n)), dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def two_pulse_two_level_population(theta: float, sigma: float) -> float:
    """Excited population after two equal counter-propagating pulses, no decay.

    sin^2(theta) * <cos^2(phi)> with <cos^2 phi> = (1 + exp(-2 sigma^2)) / 2.
    """
    return math.sin(theta) ** 2 * 0.5 * (1.0 + math.exp(-2.0 * sigma ** 2))
