"""Simulation and analysis of ultrafast optical pulses on a trapped 111Cd+ hyperfine qubit."""

from .analysis import (FitResult, excited_splitting, fit_frequency, fit_rabi, fit_sinusoid,
                       unwrap_phases)
from .atomic_model import (AtomicConstants, IonModel, Level, LevelScheme, branching_table,
                           build_level_scheme, clebsch_gordan, pi_coupling_matrix)
from .detection import CountHistogram, DetectionModel, fit_bright_fraction, simulate_histogram
from .dynamics import (MicrowaveSpec, PulseSpec, RabiCalibration, apply_microwave, free_evolve,
                       integrate_master_equation, pulse_unitary)
from .experiments import (run_contrast_scan, run_phase_vs_delay, run_ramsey,
                          run_single_pulse_scan, run_two_pulse_scan)
from .motion import MotionalState, average_over_phase, rms_phase, two_pulse_two_level_population

__version__ = "0.1.0"
