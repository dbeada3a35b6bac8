import math

import numpy as np
import pytest

from cdpulse.analysis import fit_frequency, fit_sinusoid, unwrap_phases
from cdpulse.atomic_model import DOWN, DOWN_E, UP, UP_E, IonModel
from cdpulse.detection import DetectionModel
from cdpulse.dynamics import BACKWARD, FORWARD, PulseSpec, RabiCalibration
from cdpulse.experiments import (EXPERIMENTS, RamseyFringe, SequenceResult, analyze_phase_scan,
                                 bright_probability, default_mw_phases, phase_averaged_sequence,
                                 run_contrast_scan, run_phase_vs_delay, run_ramsey,
                                 run_single_pulse_scan, run_two_pulse_scan)
from cdpulse.motion import MotionalState

CAL = RabiCalibration(0.42)
FULL = IonModel.build("full_pi")
CLOCK = IonModel.build("clock_only")
E_PI = CAL.energy_for(math.pi)
TAU = 2650.0


def test_energy_for_pi():
    assert E_PI == pytest.approx((math.pi / 0.42) ** 2)
    assert E_PI == pytest.approx(55.94, abs=0.02)


# --- single pulse -----------------------------------------------------------

def test_single_pulse_examples():
    res = run_single_pulse_scan(CAL, [0.0, E_PI])
    assert res.values[0] == 0.0
    assert res.values[1] == pytest.approx(1 / 3, abs=1e-12)


def test_single_pulse_closed_form_20_energies():
    E = np.linspace(0, 60, 20)
    res = run_single_pulse_scan(CAL, E)
    assert np.max(np.abs(res.values - np.sin(0.21 * np.sqrt(E)) ** 2 / 3)) < 1e-9


def test_single_pulse_basis_independent():
    E = np.linspace(0, 200, 17)
    a = run_single_pulse_scan(CAL, E, model=FULL).values
    b = run_single_pulse_scan(CAL, E, model=CLOCK).values
    assert np.max(np.abs(a - b)) < 1e-9


def test_workers_do_not_change_results():
    E = np.linspace(0, 60, 9)
    a = run_single_pulse_scan(CAL, E, shots=2000, seed=3)
    b = run_single_pulse_scan(CAL, E, shots=2000, seed=3, workers=4)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.stderr, b.stderr)


# --- two pulses -------------------------------------------------------------

def test_two_pulse_ceiling_without_decay():
    res = run_two_pulse_scan(CAL, [CAL.energy_for(math.pi / 2)], motion=MotionalState(sigma=1.9),
                             decay=False)
    expected = (1 / 3) * 0.5 * (1 + math.exp(-2 * 1.9 ** 2))
    assert res.values[0] == pytest.approx(expected, abs=1e-9)
    assert res.values[0] == pytest.approx(1 / 6, abs=1e-3)


def test_two_pulse_zero_second_energy_is_single_pulse():
    E = np.linspace(0, 60, 7)
    single = run_single_pulse_scan(CAL, E).values
    out = []
    for e in E:
        pulses = [PulseSpec(e, FORWARD), PulseSpec(0.0, BACKWARD, 0.0, 680.0)]
        out.append(bright_probability(phase_averaged_sequence(FULL, CAL, pulses, MotionalState()), FULL))
    assert np.allclose(out, single, atol=1e-12)
    only_first = run_two_pulse_scan(CAL, E, second_pulse=False).values
    assert np.allclose(only_first, single, atol=1e-12)


def test_attenuation_and_decay_lift_two_pulse_above_one_sixth():
    E = np.linspace(0, 200, 41)
    res = run_two_pulse_scan(CAL, E, attenuation=0.6)
    assert res.values.max() > 1 / 6 + 0.02
    assert np.all((res.values >= 0) & (res.values <= 1))


# --- Ramsey -----------------------------------------------------------------

def contrast_and_phase(fringe):
    fit = fringe.fit()
    return 2 * fit["amplitude"], fit["phase0"]


def test_ramsey_no_pulse():
    c, ph = contrast_and_phase(run_ramsey(CAL, 0))
    assert c == pytest.approx(1.0, abs=1e-12)
    assert min(ph, 2 * math.pi - ph) < 1e-9


def test_ramsey_single_pi_pulse_kills_contrast():
    c, _ = contrast_and_phase(run_ramsey(CAL, 1))
    assert c < 1e-9


def test_ramsey_two_pi_pulses_revival_and_phase():
    c, ph = contrast_and_phase(run_ramsey(CAL, 2, motion=MotionalState(sigma=1.9)))
    assert c == pytest.approx(math.exp(-680 / TAU), abs=1e-3)
    expected = (2 * math.pi * 13.904e-3 * 680) % (2 * math.pi)
    assert ph == pytest.approx(expected, abs=1e-6)
    assert ph / math.pi == pytest.approx(0.91, abs=0.02)


def test_ramsey_fringe_is_two_pi_periodic():
    ph = default_mw_phases(12)
    a = run_ramsey(CAL, 2, E_PI * 0.7, attenuation=0.3, mw_phases=ph)
    b = run_ramsey(CAL, 2, E_PI * 0.7, attenuation=0.3, mw_phases=ph + 2 * math.pi)
    assert np.max(np.abs(a.p_bright - b.p_bright)) < 1e-9


def test_ramsey_fringe_needs_eight_phases():
    with pytest.raises(ValueError):
        RamseyFringe(np.linspace(0, 6, 5), np.zeros(5))


def photon_oracle_contrast(theta, model):
    """Ground coherence surviving one pulse when each emitted photon is traced out.

    Only the clock amplitudes that stay in the ground state keep their phase
    relation; anything that went through an excited level carries a
    distinguishable photon.  With equal pi/2 microwave zones the fringe
    amplitude is |rho_up,down| = |c_up c_down| and the contrast twice that.
    """
    g = abs(model.coupling.entry(DOWN, DOWN_E)) / abs(model.coupling.entry(UP, UP_E))
    return abs(math.cos(theta / 2) * math.cos(g * theta / 2))


def test_single_pulse_contrast_matches_photon_oracle():
    thetas = np.linspace(0, 2 * math.pi, 15)
    E = [CAL.energy_for(t) for t in thetas]
    res = run_contrast_scan(CAL, E, pulses=1)
    oracle = [photon_oracle_contrast(t, FULL) for t in thetas]
    assert np.max(np.abs(res.values - oracle)) < 1e-6
    assert np.max(np.abs(res.values - np.cos(thetas / 2) ** 2)) < 1e-6


def test_contrast_at_zero_energy_is_one():
    for pulses in (1, 2):
        assert run_contrast_scan(CAL, [0.0], pulses=pulses).values[0] == pytest.approx(1.0, abs=1e-12)


def test_two_pulse_attenuated_contrast_non_monotone():
    E = np.linspace(0, 1.2 * E_PI, 25)
    c = run_contrast_scan(CAL, E, pulses=2, attenuation=0.6).values
    i = int(np.argmin(c))
    assert 0 < i < len(E) - 1
    assert c[0] - c[i] > 0.2 and c[-1] - c[i] > 0.2


def test_attenuated_revival_is_partial():
    full = run_contrast_scan(CAL, [E_PI], pulses=2).values[0]
    att = run_contrast_scan(CAL, [E_PI], pulses=2, attenuation=0.6).values[0]
    assert 0.25 < att < full


# --- phase vs delay ---------------------------------------------------------

def test_phase_periodic_in_hyperfine_difference_period():
    period = 1e3 / 13.904
    pts = run_phase_vs_delay(CAL, [680.0, 680.0 + period, 680.0 + 3 * period])
    ph = [p[1] for p in pts]
    for other in ph[1:]:
        d = (other - ph[0]) % (2 * math.pi)
        assert min(d, 2 * math.pi - d) < 1e-6


def test_phase_at_zero_delay_is_zero():
    (_, ph, _), = run_phase_vs_delay(CAL, [0.0])
    assert min(ph, 2 * math.pi - ph) < 1e-9


def test_phase_slope_matches_hyperfine_difference():
    delays = np.linspace(680, 705, 11)
    pts = run_phase_vs_delay(CAL, delays)
    un = unwrap_phases(delays, [p[1] for p in pts])
    fit = fit_frequency(delays, un)
    assert fit["frequency"] == pytest.approx(13.904, abs=1e-6)


def test_analyze_phase_scan_on_exact_data():
    delays = np.linspace(680, 705, 21)
    fit, (split, _) = analyze_phase_scan(run_phase_vs_delay(CAL, delays))
    assert fit["frequency"] == pytest.approx(13.904, abs=1e-6)
    assert split == pytest.approx(0.626, abs=1e-6)


def test_phase_noise_is_reproducible():
    kw = dict(delay_jitter=0.1, phase_noise=0.01, seed=7)
    a = run_phase_vs_delay(CAL, [680.0, 690.0], **kw)
    b = run_phase_vs_delay(CAL, [680.0, 690.0], workers=2, **kw)
    assert a == b


# --- sampled mode -----------------------------------------------------------

def test_sampled_mode_converges_to_exact():
    E = np.linspace(5, 60, 8)
    inside = total = 0
    for seed in range(50):
        res = run_single_pulse_scan(CAL, E, shots=60000, seed=seed)
        inside += int(np.sum(np.abs(res.values - res.exact) < 4 * res.stderr))
        total += len(E)
        assert np.all((res.values >= 0) & (res.values <= 1))
    assert inside / total >= 0.95


def test_sampled_ramsey_has_errors():
    fringe = run_ramsey(CAL, 0, shots=5000, detection=DetectionModel(), seed=1)
    assert fringe.stderr is not None and np.all(fringe.stderr > 0)
    assert abs(2 * fringe.fit()["amplitude"] - 1) < 0.05


# --- result containers ------------------------------------------------------

def test_sequence_result_csv():
    res = run_single_pulse_scan(CAL, [0.0, 10.0])
    text = res.to_csv({"a": 0.42})
    lines = text.splitlines()
    assert lines[0] == "# a = 0.42"
    assert lines[1] == "scan_value,p_bright,stderr"
    assert len(lines) == 4


def test_sequence_result_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        SequenceResult("energy_pJ", np.array([0.0]), np.array([1.5]))


def test_fringe_csv_header():
    text = run_ramsey(CAL, 0).to_csv()
    assert text.splitlines()[0] == "phase,p_bright"


def test_registry_has_six_callables():
    assert len(EXPERIMENTS) == 6
    assert all(callable(fn) and desc for desc, fn in EXPERIMENTS.values())


def test_fit_sinusoid_used_for_contrast_is_consistent():
    fringe = run_ramsey(CAL, 1, 0.5 * E_PI)
    fit = fit_sinusoid(np.column_stack([fringe.phases, fringe.p_bright]))
    assert fringe.contrast == pytest.approx(2 * fit["amplitude"])


def test_noisy_phase_scan_stderr_tracks_delay_span():
    # 0.1 ps / 0.01 rad noise: 25 ps of span gives ~0.06 GHz, a few hundred ps ~0.004 GHz
    narrow, _ = analyze_phase_scan(run_phase_vs_delay(CAL, np.linspace(680, 705, 21),
                                                      delay_jitter=0.1, phase_noise=0.01, seed=0))
    wide, (split, err) = analyze_phase_scan(run_phase_vs_delay(
        CAL, np.linspace(680, 1080, 21), delay_jitter=0.1, phase_noise=0.01, seed=0))
    assert narrow.error("frequency") == pytest.approx(0.062, abs=0.002)
    assert 0.001 < wide.error("frequency") < 0.01
    assert abs(wide["frequency"] - 13.904) < 3 * wide.error("frequency")
    assert abs(split - 0.626) < 3 * err
