"""
Level structure of 111Cd+ for picosecond S1/2 -> P3/2 excitation.

The ground 5s 2S1/2 and excited 5p 2P3/2 manifolds are split into hyperfine
levels by the I = 1/2 nucleus.  Dipole matrix elements between hyperfine
sublevels are obtained by recoupling |(J I) F m> into the uncoupled
|J mJ>|I mI> basis and applying the Wigner-Eckart theorem to the electronic
dipole, so every amplitude and branching ratio below is built from
Clebsch-Gordan coefficients alone.

Units: frequencies in GHz, times in ns for the constants; the dynamics module
works in picoseconds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

NUCLEAR_SPIN = Fraction(1, 2)
J_GROUND = Fraction(1, 2)
J_EXCITED = Fraction(3, 2)


@dataclass(frozen=True)
class AtomicConstants:
    ground_hf_splitting: float = 14.530  # GHz
    excited_hf_splitting: float = 0.626  # GHz
    excited_lifetime: float = 2.65  # ns
    fine_structure_splitting: float = 74000.0  # GHz, bookkeeping only
    pulse_bandwidth: float = 420.0  # GHz, bookkeeping only

    def __post_init__(self):
        for name in ("ground_hf_splitting", "excited_hf_splitting", "excited_lifetime",
                     "fine_structure_splitting", "pulse_bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.ground_hf_splitting <= self.excited_hf_splitting:
            raise ValueError("ground_hf_splitting must exceed excited_hf_splitting")

    @property
    def hf_difference(self) -> float:
        """Ground minus excited hyperfine splitting in GHz."""
        return self.ground_hf_splitting - self.excited_hf_splitting

    @property
    def decay_rate(self) -> float:
        """Total spontaneous decay rate in 1/ps."""
        return 1.0 / (self.excited_lifetime * 1e3)


class Manifold(enum.Enum):
    S_half = "S1/2"
    P_three_half = "P3/2"

    @property
    def J(self) -> Fraction:
        return J_GROUND if self is Manifold.S_half else J_EXCITED


_ALLOWED_F = {Manifold.S_half: (0, 1), Manifold.P_three_half: (1, 2)}


@dataclass(frozen=True)
class Level:
    manifold: Manifold
    F: int
    mF: int

    def __post_init__(self):
        if self.F not in _ALLOWED_F[self.manifold]:
            raise ValueError(f"F={self.F} does not exist in {self.manifold.value}")
        if abs(self.mF) > self.F:
            raise ValueError(f"|mF| > F for {self}")

    @property
    def is_ground(self) -> bool:
        return self.manifold is Manifold.S_half

    def __str__(self):
        tag = "S" if self.is_ground else "P"
        return f"{tag}(F={self.F},m={self.mF:+d})"

    def __lt__(self, other):
        return (self.manifold.value, self.F, self.mF) < (other.manifold.value, other.F, other.mF)


UP = Level(Manifold.S_half, 0, 0)
DOWN = Level(Manifold.S_half, 1, 0)
UP_E = Level(Manifold.P_three_half, 1, 0)
DOWN_E = Level(Manifold.P_three_half, 2, 0)
CLOCK_STATES = (UP, DOWN, UP_E, DOWN_E)


@dataclass(frozen=True)
class LevelScheme:
    """Ordered basis of hyperfine sublevels; ground levels come first."""

    levels: tuple

    def __post_init__(self):
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("duplicate levels in scheme")
        missing = [str(s) for s in CLOCK_STATES if s not in self.levels]
        if missing:
            raise ValueError(f"scheme lacks clock states: {missing}")
        flags = [lv.is_ground for lv in self.levels]
        if flags != sorted(flags, reverse=True):
            raise ValueError("ground levels must precede excited levels")

    @property
    def index(self) -> dict:
        return {lv: i for i, lv in enumerate(self.levels)}

    def __len__(self):
        return len(self.levels)

    def __contains__(self, level):
        return level in self.levels

    @property
    def ground(self) -> tuple:
        return tuple(lv for lv in self.levels if lv.is_ground)

    @property
    def excited(self) -> tuple:
        return tuple(lv for lv in self.levels if not lv.is_ground)

    @property
    def n_ground(self) -> int:
        return len(self.ground)

    def mask(self, predicate) -> np.ndarray:
        return np.array([bool(predicate(lv)) for lv in self.levels])

    @property
    def bright_mask(self) -> np.ndarray:
        """Levels that fluoresce under detection: the whole ground F=1 manifold."""
        return self.mask(lambda lv: lv.is_ground and lv.F == 1)


def build_level_scheme(mode: str = "full_pi") -> LevelScheme:
    if mode == "clock_only":
        return LevelScheme(CLOCK_STATES)
    if mode != "full_pi":
        raise ValueError(f"unknown scheme mode {mode!r}")
    ground = [UP] + [Level(Manifold.S_half, 1, m) for m in (-1, 0, 1)]
    excited = [Level(Manifold.P_three_half, F, m) for F in (1, 2) for m in (-1, 0, 1)]
    return LevelScheme(tuple(ground + excited))


def _as_half_integer(x, name) -> Fraction:
    f = Fraction(x).limit_denominator(2)
    if f != x or f.denominator not in (1, 2):
        raise ValueError(f"{name}={x!r} is not an integer or half-integer")
    return f


@lru_cache(maxsize=None)
def _cg_cached(j1: Fraction, m1: Fraction, j2: Fraction, m2: Fraction,
               J: Fraction, M: Fraction) -> float:
    if m1 + m2 != M:
        return 0.0
    if not (abs(j1 - j2) <= J <= j1 + j2) or (j1 + j2 + J).denominator != 1:
        return 0.0
    fact = math.factorial

    def f(x):
        return fact(int(x))

    pref = (2 * J + 1) * Fraction(
        f(J + j1 - j2) * f(J - j1 + j2) * f(j1 + j2 - J), f(j1 + j2 + J + 1))
    pref *= f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2)
    total = Fraction(0)
    kmin = int(max(0, j2 - J - m1, j1 - J + m2))
    kmax = int(min(j1 + j2 - J, j1 - m1, j2 + m2))
    for k in range(kmin, kmax + 1):
        den = (f(k) * f(j1 + j2 - J - k) * f(j1 - m1 - k) * f(j2 + m2 - k)
               * f(J - j2 + m1 + k) * f(J - j1 - m2 + k))
        total += Fraction((-1) ** k, den)
    return float(np.sign(total)) * math.sqrt(pref * total * total)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> in the Condon-Shortley convention (Racah's formula).

    Zero when M != m1 + m2 or the triangle rule fails.  Raises ValueError for
    arguments that are not valid angular momentum quantum numbers.
    """
    args = [_as_half_integer(v, n) for v, n in
            zip((j1, m1, j2, m2, J, M), ("j1", "m1", "j2", "m2", "J", "M"))]
    j1, m1, j2, m2, J, M = args
    for j, m, tag in ((j1, m1, "1"), (j2, m2, "2"), (J, M, "")):
        if j < 0:
            raise ValueError(f"j{tag} must be non-negative")
        if abs(m) > j or (j - m).denominator != 1:
            raise ValueError(f"m{tag}={m} invalid for j{tag}={j}")
    return _cg_cached(j1, m1, j2, m2, J, M)


def _half_range(j: Fraction):
    m = -j
    while m <= j:
        yield m
        m += 1


def dipole_element(ground: Level, excited: Level, q: int) -> float:
    """<ground| d_q |excited> up to the common reduced matrix element.

    Both hyperfine states are expanded in |J mJ>|I mI>; the electronic operator
    acts through <J mJ| d_q |J' mJ'> ~ <J' mJ'; 1 q | J mJ>.
    """
    if not ground.is_ground or excited.is_ground:
        raise ValueError("expected (ground, excited) pair")
    I = NUCLEAR_SPIN
    J, Jp = J_GROUND, J_EXCITED
    total = 0.0
    for mI in _half_range(I):
        mJ = ground.mF - mI
        mJp = excited.mF - mI
        if abs(mJ) > J or abs(mJp) > Jp:
            continue
        total += (clebsch_gordan(J, mJ, I, mI, ground.F, ground.mF)
                  * clebsch_gordan(Jp, mJp, I, mI, excited.F, excited.mF)
                  * clebsch_gordan(Jp, mJp, 1, q, J, mJ))
    return total


@dataclass(frozen=True)
class CouplingMatrix:
    """Relative pi-polarized amplitudes, rows = ground levels, cols = excited."""

    scheme: LevelScheme
    amplitudes: np.ndarray

    def entry(self, ground: Level, excited: Level) -> float:
        g = self.scheme.ground.index(ground)
        e = self.scheme.excited.index(excited)
        return float(self.amplitudes[g, e])


@dataclass(frozen=True)
class BranchingTable:
    """Decay fractions, rows = excited levels, cols = ground levels."""

    scheme: LevelScheme
    rates: np.ndarray

    def entry(self, excited: Level, ground: Level) -> float:
        e = self.scheme.excited.index(excited)
        g = self.scheme.ground.index(ground)
        return float(self.rates[e, g])

    def bright_fraction(self, excited: Level) -> float:
        """Probability that a decay from ``excited`` ends in the F=1 manifold."""
        e = self.scheme.excited.index(excited)
        mask = np.array([g.F == 1 for g in self.scheme.ground])
        return float(self.rates[e, mask].sum())


def pi_coupling_matrix(scheme: LevelScheme) -> CouplingMatrix:
    amps = np.array([[dipole_element(g, e, 0) for e in scheme.excited]
                     for g in scheme.ground])
    amps[np.abs(amps) < 1e-14] = 0.0
    amps /= dipole_element(UP, UP_E, 0)
    amps.setflags(write=False)
    return CouplingMatrix(scheme, amps)


def branching_table(scheme: LevelScheme, constants: AtomicConstants | None = None) -> BranchingTable:
    """Fluorescence branching fractions from squared dipole elements summed over q.

    Decay into a ground sublevel absent from ``scheme`` is reassigned to the
    clock level of the same F, which keeps the bright/dark split exact in the
    reduced clock_only basis.  ``constants`` is accepted for interface symmetry;
    the total rate lives in ``AtomicConstants.decay_rate``.
    """
    del constants
    full_ground = build_level_scheme("full_pi").ground
    clock_of = {0: UP, 1: DOWN}
    ground_idx = {g: i for i, g in enumerate(scheme.ground)}
    rates = np.zeros((len(scheme.excited), len(scheme.ground)))
    for i, e in enumerate(scheme.excited):
        for g in full_ground:
            strength = sum(dipole_element(g, e, q) ** 2 for q in (-1, 0, 1))
            if strength < 1e-15:
                continue
            target = g if g in ground_idx else clock_of[g.F]
            rates[i, ground_idx[target]] += strength
        rates[i] /= rates[i].sum()
    rates.setflags(write=False)
    return BranchingTable(scheme, rates)


@dataclass(frozen=True)
class IonModel:
    """Everything the dynamics needs about the ion, bundled for convenience."""

    scheme: LevelScheme
    constants: AtomicConstants
    coupling: CouplingMatrix
    branching: BranchingTable

    @classmethod
    def build(cls, mode: str = "full_pi", constants: AtomicConstants | None = None) -> "IonModel":
        constants = constants or AtomicConstants()
        scheme = build_level_scheme(mode)
        return cls(scheme, constants, pi_coupling_matrix(scheme), branching_table(scheme, constants))

    @property
    def dim(self) -> int:
        return len(self.scheme)
