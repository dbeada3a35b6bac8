"""
The four pulse-sequence experiments, built from dynamics, motion and detection.

Every sequence starts from the optically pumped dark state |up>, ends with a
wait long enough for all excited population to decay, and reports the
population of the bright F=1 manifold.  In exact mode the result is the
probability itself, averaged over the thermal optical phase by quadrature.
In sampled mode each scan point is additionally pushed through a simulated
photon-count histogram and refit, with a per-point seed derived from the
master seed and the point index.

Sampled mode draws the bright/dark outcome of every shot from the
phase-averaged probability.  That is the same distribution as drawing a phase
per shot first, since shots are independent.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .atomic_model import IonModel
from .detection import DetectionModel, fit_bright_fraction, simulate_histogram
from .dynamics import (BACKWARD, FORWARD, MicrowaveSpec, PulseSpec, RabiCalibration,
                       apply_microwave, apply_pulse, free_evolve, pure_state, settle)
from .motion import MotionalState, gauss_hermite_nodes, rms_phase

DEFAULT_DELAY = 680.0  # ps
N_MW_PHASES = 16


def point_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for scan point ``index``."""
    return np.random.SeedSequence([int(master_seed), int(index)])


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map; results come back in input order whatever the worker count."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class SequenceResult:
    scan_variable: str
    scan_values: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    exact: np.ndarray | None = None
    quantity: str = "p_bright"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scan_values = np.asarray(self.scan_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.exact is None:
            self.exact = self.values
        if self.quantity == "p_bright" and np.any((self.values < -1e-12) | (self.values > 1 + 1e-12)):
            raise ValueError("bright probabilities outside [0, 1]")

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (metadata or {}).items():
            buf.write(f"# {k} = {v}\n")
        buf.write(f"scan_value,{self.quantity},stderr\n")
        err = self.stderr if self.stderr is not None else np.zeros_like(self.values)
        for x, y, e in zip(self.scan_values, self.values, err):
            buf.write(f"{x:.12g},{y:.12g},{e:.12g}\n")
        return buf.getvalue()


@dataclass
class RamseyFringe:
    phases: np.ndarray
    p_bright: np.ndarray
    stderr: np.ndarray | None = None
    exact: np.ndarray | None = None

    def __post_init__(self):
        if len(self.phases) < 8:
            raise ValueError("a Ramsey fringe needs at least 8 phase samples")

    def fit(self) -> analysis.FitResult:
        if self.stderr is None:
            return analysis.fit_sinusoid(np.column_stack([self.phases, self.p_bright]))
        return analysis.fit_sinusoid(np.column_stack([self.phases, self.p_bright, self.stderr]))

    @property
    def contrast(self) -> float:
        return analysis.fringe_contrast(self.fit())

    @property
    def phase(self) -> float:
        return self.fit()["phase0"]

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (metadata or {}).items():
            buf.write(f"# {k} = {v}\n")
        buf.write("phase,p_bright\n")
        for x, y in zip(self.phases, self.p_bright):
            buf.write(f"{x:.12g},{y:.12g}\n")
        return buf.getvalue()


def bright_probability(rho: np.ndarray, model: IonModel) -> float:
    p = float(np.diag(rho)[model.scheme.bright_mask].sum().real)
    return min(max(p, 0.0), 1.0)


def run_sequence(model: IonModel, calib: RabiCalibration, pulses, rho0=None, optical_phase=0.0,
                 decay: bool = True, pulse_width: float | None = None) -> np.ndarray:
    """Apply time-ordered pulses with free evolution in between, then let everything decay.

    Arrival times are pulse centres; a finite pulse occupies ``pulse_width`` ps
    of the gap that follows its predecessor.
    """
    rho = pure_state(model.scheme) if rho0 is None else rho0
    pulses = sorted(pulses, key=lambda p: p.arrival_time)
    t = pulses[0].arrival_time if pulses else 0.0
    for pulse in pulses:
        gap = pulse.arrival_time - t
        if pulse_width is not None and pulse is not pulses[0]:
            gap -= pulse_width
        if gap < -1e-12:
            raise ValueError("pulses overlap")
        rho = free_evolve(rho, max(gap, 0.0), model.constants, model.branching, decay=decay)
        rho = apply_pulse(rho, model, calib, pulse, optical_phase, width=pulse_width, decay=decay)
        t = pulse.arrival_time
    return settle(rho, model.branching)


def phase_averaged_sequence(model, calib, pulses, motion: MotionalState | None, rho0=None,
                            decay=True, pulse_width=None) -> np.ndarray:
    """Final density matrix averaged over the Gaussian thermal optical phase.

    With fewer than two pulses the optical phase cannot reach any ground-state
    observable, so a single evaluation suffices.
    """
    sigma = rms_phase(motion) if motion is not None else 0.0
    if len(pulses) < 2 or sigma == 0:
        return run_sequence(model, calib, pulses, rho0, 0.0, decay, pulse_width)
    nodes, weights = gauss_hermite_nodes(sigma)
    acc = 0
    for phi, w in zip(nodes, weights):
        acc = acc + w * run_sequence(model, calib, pulses, rho0, phi, decay, pulse_width)
    return acc


def two_pulse_train(energy: float, delay: float, attenuation: float = 0.0):
    return [PulseSpec(energy, FORWARD, 0.0, 0.0),
            PulseSpec(energy, BACKWARD, attenuation, delay)]


def _sample_points(exact, shots, detection, seed):
    detection = detection or DetectionModel()
    p_hat, err = [], []
    for i, p in enumerate(exact):
        hist = simulate_histogram(float(np.clip(p, 0, 1)), shots, detection, point_seed(seed, i))
        fit = fit_bright_fraction(hist, detection)
        p_hat.append(fit["p_bright"])
        err.append(fit.error("p_bright"))
    return np.array(p_hat), np.array(err)


def _scan(model, energies, point_fn, shots, detection, seed, workers, scan_variable="energy_pJ"):
    energies = np.asarray(energies, dtype=float)
    exact = np.array(parallel_map(point_fn, energies, workers))
    if shots is None:
        return SequenceResult(scan_variable, energies, exact)
    p_hat, err = _sample_points(exact, shots, detection, seed)
    return SequenceResult(scan_variable, energies, p_hat, err, exact)


def run_single_pulse_scan(calib: RabiCalibration, energies, *, model: IonModel | None = None,
                          shots: int | None = None, detection: DetectionModel | None = None,
                          seed: int = 0, workers: int = 1,
                          pulse_width: float | None = None) -> SequenceResult:
    """Bright probability after one pulse of each energy, starting from |up>."""
    model = model or IonModel.build()

    def point(E):
        rho = run_sequence(model, calib, [PulseSpec(E)], pulse_width=pulse_width)
        return bright_probability(rho, model)

    return _scan(model, energies, point, shots, detection, seed, workers)


def run_two_pulse_scan(calib: RabiCalibration, energies, delay: float = DEFAULT_DELAY,
                       attenuation: float = 0.0, motion: MotionalState | None = None, *,
                       model: IonModel | None = None, decay: bool = True,
                       second_pulse: bool = True, shots: int | None = None,
                       detection: DetectionModel | None = None, seed: int = 0,
                       workers: int = 1, pulse_width: float | None = None) -> SequenceResult:
    """Counter-propagating pulse pair; the second is delayed and attenuated.

    ``decay=False`` switches off emission during the sequence only; the final
    wait still converts excited population to ground population.
    """
    model = model or IonModel.build()
    motion = MotionalState() if motion is None else motion

    def point(E):
        pulses = two_pulse_train(E, delay, attenuation)
        if not second_pulse:
            pulses = pulses[:1]
        rho = phase_averaged_sequence(model, calib, pulses, motion, decay=decay,
                                      pulse_width=pulse_width)
        return bright_probability(rho, model)

    return _scan(model, energies, point, shots, detection, seed, workers)


def default_mw_phases(n: int = N_MW_PHASES) -> np.ndarray:
    return np.linspace(0.0, 2 * np.pi, n, endpoint=False)


def run_ramsey(calib: RabiCalibration, laser_pulses: int = 0, energy: float | None = None,
               delay: float = DEFAULT_DELAY, attenuation: float = 0.0,
               motion: MotionalState | None = None, mw_phases=None, *,
               model: IonModel | None = None, decay: bool = True,
               pulse_width: float | None = None, shots: int | None = None,
               detection: DetectionModel | None = None, seed: int = 0) -> RamseyFringe:
    """Microwave pi/2 - optical pulse(s) - long wait - microwave pi/2(phase) fringe.

    ``energy`` defaults to a pi pulse on the clock transition.
    """
    if laser_pulses not in (0, 1, 2):
        raise ValueError("laser_pulses must be 0, 1 or 2")
    model = model or IonModel.build()
    motion = MotionalState() if motion is None else motion
    phases = default_mw_phases() if mw_phases is None else np.asarray(mw_phases, dtype=float)
    if energy is None:
        energy = calib.energy_for(np.pi)
    scheme = model.scheme
    rho = apply_microwave(pure_state(scheme), MicrowaveSpec(np.pi / 2, 0.0), scheme)
    pulses = two_pulse_train(energy, delay, attenuation)[:laser_pulses]
    rho = phase_averaged_sequence(model, calib, pulses, motion, rho0=rho, decay=decay,
                                  pulse_width=pulse_width)
    exact = np.array([bright_probability(apply_microwave(rho, MicrowaveSpec(np.pi / 2, ph), scheme),
                                         model) for ph in phases])
    if shots is None:
        return RamseyFringe(phases, exact)
    p_hat, err = _sample_points(exact, shots, detection, seed)
    return RamseyFringe(phases, p_hat, err, exact)


def run_contrast_scan(calib: RabiCalibration, energies, pulses: int = 1,
                      delay: float = DEFAULT_DELAY, attenuation: float = 0.0,
                      motion: MotionalState | None = None, mw_phases=None, *,
                      model: IonModel | None = None, decay: bool = True,
                      pulse_width: float | None = None, shots: int | None = None,
                      detection: DetectionModel | None = None, seed: int = 0,
                      workers: int = 1) -> SequenceResult:
    """Ramsey contrast (twice the fitted fringe amplitude) against pulse energy."""
    if pulses not in (1, 2):
        raise ValueError("pulses must be 1 or 2")
    model = model or IonModel.build()
    energies = np.asarray(energies, dtype=float)

    def point(args):
        i, E = args
        fringe = run_ramsey(calib, pulses, E, delay, attenuation, motion, mw_phases, model=model,
                            decay=decay, pulse_width=pulse_width, shots=shots,
                            detection=detection, seed=point_seed(seed, i).generate_state(1)[0])
        fit = fringe.fit()
        return (analysis.fringe_contrast(fit), 2 * fit.error("amplitude"), fit["phase0"])

    rows = np.array(parallel_map(point, list(enumerate(energies)), workers))
    stderr = rows[:, 1] if shots is not None else None
    return SequenceResult("energy_pJ", energies, rows[:, 0], stderr, quantity="contrast",
                          extra={"phase0": rows[:, 2]})


def run_phase_vs_delay(calib: RabiCalibration, delays, energy: float | None = None,
                       attenuation: float = 0.0, motion: MotionalState | None = None,
                       mw_phases=None, *, model: IonModel | None = None,
                       delay_jitter: float = 0.0, phase_noise: float = 0.0,
                       shots: int | None = None, detection: DetectionModel | None = None,
                       seed: int = 0, workers: int = 1) -> list:
    """Two-pulse Ramsey fringe phase at each nominal delay.

    Optional Gaussian noise mimics the measurement: the true delay deviates from
    the nominal one by ``delay_jitter`` ps rms and ``phase_noise`` rad rms is
    added to the fitted phase.  Returns (nominal delay, phase mod 2pi,
    phase stderr) tuples.
    """
    model = model or IonModel.build()
    if energy is None:
        energy = calib.energy_for(np.pi)

    def point(args):
        i, d = args
        rng = np.random.default_rng(point_seed(seed, i))
        true_delay = d + delay_jitter * rng.standard_normal() if delay_jitter else d
        noise = phase_noise * rng.standard_normal() if phase_noise else 0.0
        fringe = run_ramsey(calib, 2, energy, max(true_delay, 0.0), attenuation, motion,
                            mw_phases, model=model, shots=shots, detection=detection,
                            seed=int(rng.integers(2 ** 63)))
        fit = fringe.fit()
        err = math.hypot(fit.error("phase0"), phase_noise)
        return (float(d), float((fit["phase0"] + noise) % (2 * np.pi)), err)

    return parallel_map(point, list(enumerate(np.asarray(delays, dtype=float))), workers)


def analyze_phase_scan(points, constants=None, delay_sigma: float = 0.1,
                       phase_sigma: float = 0.01):
    """Unwrap a phase-vs-delay scan and extract the hyperfine frequencies.

    Returns ``(frequency_fit, (splitting_GHz, splitting_err_GHz))``.
    """
    constants = constants or IonModel.build("clock_only").constants
    pts = np.asarray(points, dtype=float)
    order = np.argsort(pts[:, 0])
    t, ph = pts[order, 0], pts[order, 1]
    seed = analysis.ground_slope_seed(constants.ground_hf_splitting)
    unwrapped = analysis.unwrap_phases(t, ph, seed)
    fit = analysis.fit_frequency(t, unwrapped, delay_sigma, phase_sigma, seed)
    split = analysis.excited_splitting(fit["frequency"], constants.ground_hf_splitting,
                                       fit.error("frequency"))
    fit.flags["unwrapped"] = unwrapped
    return fit, split


EXPERIMENTS = {
    "rabi_scan": ("single-pulse bright probability against pulse energy",
                  run_single_pulse_scan),
    "two_pulse_scan": ("counter-propagating pulse pair, bright probability against energy",
                       run_two_pulse_scan),
    "ramsey_fringe": ("Ramsey fringe with 0, 1 or 2 optical pulses between the microwave zones",
                      run_ramsey),
    "contrast_scan": ("Ramsey contrast against pulse energy for one or two pulses",
                      run_contrast_scan),
    "phase_vs_delay": ("two-pulse Ramsey phase against pulse delay, with frequency fit",
                       run_phase_vs_delay),
    "detect_calibrate": ("simulate a count histogram and fit its bright fraction",
                         fit_bright_fraction),
}
