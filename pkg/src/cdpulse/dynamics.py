"""
Density-matrix evolution for picosecond pulse sequences.

Time is in ps and angular frequencies in rad/ps throughout.  The frame
co-rotates with the microwave oscillator at the ground hyperfine splitting
and with the optical carrier on the |up> <-> |up'> line, so ground levels are
all degenerate at zero energy and the excited F'=2 levels sit at
-2*pi*(ground - excited splitting).  An excited-clock coherence therefore
winds at the hyperfine difference while a ground coherence stays put.

Spontaneous emission has one collapse channel per branching-table entry.
Decay photons from different channels are taken as distinguishable, so decay
feeds ground populations and never creates ground coherence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .atomic_model import DOWN, UP, BranchingTable, CouplingMatrix, IonModel, LevelScheme

FORWARD = "forward"
BACKWARD = "backward"


class IntegrationError(RuntimeError):
    """The master-equation integrator could not complete the requested span."""


@dataclass(frozen=True)
class RabiCalibration:
    a: float = 0.42  # pJ^-1/2

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"calibration a must be positive, got {self.a!r}")

    def angle(self, energy: float) -> float:
        return self.a * math.sqrt(energy)

    def energy_for(self, theta: float) -> float:
        """Pulse energy (pJ) that gives clock rotation angle ``theta``."""
        return (theta / self.a) ** 2


@dataclass(frozen=True)
class PulseSpec:
    energy: float  # pJ, before attenuation
    direction: str = FORWARD
    attenuation: float = 0.0  # fraction of energy removed
    arrival_time: float = 0.0  # ps

    def __post_init__(self):
        if self.energy < 0:
            raise ValueError("pulse energy must be non-negative")
        if not 0.0 <= self.attenuation < 1.0:
            raise ValueError("attenuation must lie in [0, 1)")
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}")

    @property
    def effective_energy(self) -> float:
        return self.energy * (1.0 - self.attenuation)

    def angle(self, calib: RabiCalibration) -> float:
        return calib.angle(self.effective_energy)

    @property
    def phase_sign(self) -> int:
        return 1 if self.direction == FORWARD else -1


@dataclass(frozen=True)
class MicrowaveSpec:
    angle: float
    phase: float = 0.0


def frame_energies(scheme: LevelScheme, constants) -> np.ndarray:
    """Diagonal of the rotating-frame Hamiltonian in rad/ps."""
    shift = -2 * np.pi * constants.hf_difference * 1e-3
    return np.array([shift if (not lv.is_ground and lv.F == 2) else 0.0
                     for lv in scheme.levels])


def pure_state(scheme: LevelScheme, level=UP) -> np.ndarray:
    rho = np.zeros((len(scheme), len(scheme)), dtype=complex)
    i = scheme.index[level]
    rho[i, i] = 1.0
    return rho


def check_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-9, pos_tol=1e-9):
    """Raise AssertionError unless ``rho`` is Hermitian, unit-trace and PSD."""
    err = np.max(np.abs(rho - rho.conj().T))
    assert err <= herm_tol, f"not Hermitian (max deviation {err:.3g})"
    tr = np.trace(rho).real
    assert abs(tr - 1) <= trace_tol, f"trace {tr!r} != 1"
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    assert lo >= -pos_tol, f"negative eigenvalue {lo:.3g}"


def rotation_unitary(coupling: CouplingMatrix, theta: float, phase: float = 0.0) -> np.ndarray:
    """exp(-i H) for H = theta/2 * (e^{i phase} B + h.c.), B the ground->excited coupling.

    Built from the singular value decomposition of B, which splits the drive
    into independent two-level rotations between coupled ground and excited
    modes.  Each mode rotates by ``theta`` times its singular value.
    """
    amps = coupling.amplitudes
    ng, ne = amps.shape
    W, s, Vh = np.linalg.svd(amps.T, full_matrices=False)
    V = Vh.conj().T
    c = np.cos(0.5 * theta * s)
    sn = np.sin(0.5 * theta * s)
    U = np.zeros((ng + ne, ng + ne), dtype=complex)
    U[:ng, :ng] = np.eye(ng) + (V * (c - 1)) @ Vh
    U[ng:, ng:] = np.eye(ne) + (W * (c - 1)) @ W.conj().T
    U[ng:, :ng] = -1j * np.exp(1j * phase) * (W * sn) @ Vh
    U[:ng, ng:] = -1j * np.exp(-1j * phase) * (V * sn) @ W.conj().T
    return U


def pulse_unitary(coupling: CouplingMatrix, calib: RabiCalibration, pulse: PulseSpec,
                  optical_phase: float = 0.0) -> np.ndarray:
    """Instantaneous unitary of one ultrafast pulse.

    ``optical_phase`` is k*x_ion; a backward pulse imprints it with opposite sign.
    """
    return rotation_unitary(coupling, pulse.angle(calib), pulse.phase_sign * optical_phase)


def free_evolve(rho: np.ndarray, duration: float, constants, branching: BranchingTable,
                decay: bool = True) -> np.ndarray:
    """Exact solution of the field-free master equation over ``duration`` ps.

    With ``decay=False`` the lifetime is taken as infinite and only the frame
    phases evolve.
    """
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got {duration!r}")
    scheme = branching.scheme
    ng = scheme.n_ground
    energies = frame_energies(scheme, constants)
    out = rho * np.exp(-1j * np.subtract.outer(energies, energies) * duration)
    if not decay:
        return out
    gamma = constants.decay_rate
    surv = math.exp(-gamma * duration)
    amp = math.exp(-0.5 * gamma * duration)
    out[ng:, ng:] *= surv
    out[:ng, ng:] *= amp
    out[ng:, :ng] *= amp
    fed = branching.rates.T @ np.diag(rho).real[ng:] * (1.0 - surv)
    out[np.arange(ng), np.arange(ng)] += fed
    return out


def settle(rho: np.ndarray, branching: BranchingTable) -> np.ndarray:
    """Long-wait limit of ``free_evolve``: every excited level has decayed.

    Ground coherences are untouched because the ground levels are degenerate
    in the frame.
    """
    ng = branching.scheme.n_ground
    out = np.zeros_like(rho)
    out[:ng, :ng] = rho[:ng, :ng]
    out[np.arange(ng), np.arange(ng)] += branching.rates.T @ np.diag(rho).real[ng:]
    return out


def microwave_unitary(scheme: LevelScheme, mw: MicrowaveSpec) -> np.ndarray:
    """Resonant rotation of the ground clock pair; every other level is idle."""
    i, j = scheme.index[UP], scheme.index[DOWN]
    U = np.eye(len(scheme), dtype=complex)
    c, s = math.cos(mw.angle / 2), math.sin(mw.angle / 2)
    U[i, i] = U[j, j] = c
    U[i, j] = -1j * s * np.exp(-1j * mw.phase)
    U[j, i] = -1j * s * np.exp(1j * mw.phase)
    return U


def apply_microwave(rho: np.ndarray, mw: MicrowaveSpec, scheme: LevelScheme) -> np.ndarray:
    U = microwave_unitary(scheme, mw)
    return U @ rho @ U.conj().T


def square_envelope(theta: float, width: float, start: float = 0.0):
    """Constant clock Rabi rate with area ``theta`` over [start, start + width]."""
    rate = theta / width

    def envelope(t):
        return rate if start <= t <= start + width else 0.0

    return envelope


def lindblad_rhs(model: IonModel, envelope=None, phase: float = 0.0, decay: bool = True):
    """Return f(t, y) for solve_ivp with y the flattened density matrix."""
    scheme = model.scheme
    n, ng = len(scheme), scheme.n_ground
    H0 = np.diag(frame_energies(scheme, model.constants)).astype(complex)
    drive = np.zeros((n, n), dtype=complex)
    drive[ng:, :ng] = 0.5 * np.exp(1j * phase) * model.coupling.amplitudes.T
    drive += drive.conj().T
    gamma = model.constants.decay_rate if decay else 0.0
    feed = model.branching.rates.T
    diag_g = np.arange(ng)

    def rhs(t, y):
        rho = y.reshape(n, n)
        H = H0 if envelope is None else H0 + envelope(t) * drive
        d = -1j * (H @ rho - rho @ H)
        if gamma:
            d[ng:, ng:] -= gamma * rho[ng:, ng:]
            d[:ng, ng:] -= 0.5 * gamma * rho[:ng, ng:]
            d[ng:, :ng] -= 0.5 * gamma * rho[ng:, :ng]
            d[diag_g, diag_g] += gamma * (feed @ np.diag(rho)[ng:])
        return d.ravel()

    return rhs


def integrate_master_equation(model: IonModel, rho0: np.ndarray, t_span, envelope=None,
                              phase: float = 0.0, t_eval=None, rtol: float = 1e-7,
                              atol: float = 1e-9, decay: bool = True, max_step: float = np.inf):
    """Integrate the Lindblad equation with an adaptive Dormand-Prince 4(5) scheme.

    Parameters
    ----------
    model : IonModel
    rho0 : ndarray
        Initial density matrix in the model basis.
    t_span : (float, float)
        Start and end time in ps.
    envelope : callable, optional
        t -> clock-transition Rabi rate (rad/ps).  ``None`` means no drive.
    phase : float
        Optical phase carried by the ground->excited coupling.
    t_eval : array_like, optional
        Output times; defaults to the two endpoints.

    Returns
    -------
    times : ndarray
    rhos : ndarray, shape (len(times), n, n)
    """
    n = model.dim
    if t_eval is None:
        t_eval = np.array([t_span[0], t_span[1]], dtype=float)
    sol = solve_ivp(lindblad_rhs(model, envelope, phase, decay), t_span,
                    np.asarray(rho0, dtype=complex).ravel(), method="RK45", t_eval=t_eval,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        raise IntegrationError(f"master equation integration failed: {sol.message}")
    rhos = sol.y.T.reshape(-1, n, n)
    return sol.t, rhos


def finite_pulse(rho: np.ndarray, model: IonModel, theta: float, width: float,
                 phase: float = 0.0, decay: bool = True, **tol) -> np.ndarray:
    """Apply a square pulse of clock area ``theta`` lasting ``width`` ps."""
    env = square_envelope(theta, width)
    # max_step keeps the solver from stepping over the pulse edge
    _, rhos = integrate_master_equation(model, rho, (0.0, width), envelope=env, phase=phase,
                                        decay=decay, max_step=width / 8, **tol)
    return rhos[-1]


def apply_pulse(rho: np.ndarray, model: IonModel, calib: RabiCalibration, pulse: PulseSpec,
                optical_phase: float = 0.0, width: float | None = None,
                decay: bool = True) -> np.ndarray:
    """Instantaneous pulse when ``width`` is None, otherwise a square finite pulse."""
    if width is None:
        U = pulse_unitary(model.coupling, calib, pulse, optical_phase)
        return U @ rho @ U.conj().T
    return finite_pulse(rho, model, pulse.angle(calib), width,
                        pulse.phase_sign * optical_phase, decay=decay)
