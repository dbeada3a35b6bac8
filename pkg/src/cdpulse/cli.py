"""Command-line front end.

    simname <experiment> --config <path> --out <dir> --seed <u64> [--exact|--sampled]
    simname list

Exit status: 0 success, 1 usage, 2 config, 3 runtime.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, experiments
from .config import EXPERIMENT_NAMES, ConfigError, RunConfig, load_config, validate
from .detection import fit_bright_fraction, simulate_histogram

log = logging.getLogger("cdpulse")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def list_experiments() -> list:
    """(name, one-line description) for every registered experiment."""
    return [(name, experiments.EXPERIMENTS[name][0]) for name in EXPERIMENT_NAMES]


def _metadata(cfg: RunConfig) -> dict:
    return dict(cfg.flat_items())


def _write(out: Path, name: str, text: str, written: list):
    path = out / name
    path.write_text(text, encoding="utf-8")
    written.append(path)


def _shots(cfg):
    return cfg.shots if cfg.sampled else None


def _rabi(cfg, out, meta, written):
    res = experiments.run_single_pulse_scan(
        cfg.calibration(), cfg.energies, model=cfg.model(), shots=_shots(cfg),
        detection=cfg.detection(), seed=cfg.seed, workers=cfg.workers,
        pulse_width=cfg.pulse_width)
    _write(out, "rabi_scan.csv", res.to_csv(meta), written)
    cols = [res.scan_values, res.values]
    if res.stderr is not None:
        cols.append(np.maximum(res.stderr, 1e-6))
    fit = analysis.fit_rabi(np.column_stack(cols))
    _write(out, "rabi_scan_report.txt", "experiment: rabi_scan\n" + fit.report(), written)


def _two_pulse(cfg, out, meta, written):
    res = experiments.run_two_pulse_scan(
        cfg.calibration(), cfg.energies, cfg.delay, cfg.attenuation, cfg.motion(),
        model=cfg.model(), decay=cfg.decay, shots=_shots(cfg), detection=cfg.detection(),
        seed=cfg.seed, workers=cfg.workers, pulse_width=cfg.pulse_width)
    _write(out, "two_pulse_scan.csv", res.to_csv(meta), written)


def _ramsey(cfg, out, meta, written):
    fringe = experiments.run_ramsey(
        cfg.calibration(), cfg.laser_pulses, cfg.energy, cfg.delay, cfg.attenuation,
        cfg.motion(), experiments.default_mw_phases(cfg.mw_phases), model=cfg.model(),
        decay=cfg.decay, pulse_width=cfg.pulse_width, shots=_shots(cfg),
        detection=cfg.detection(), seed=cfg.seed)
    _write(out, "ramsey_fringe.csv", fringe.to_csv(meta), written)
    fit = fringe.fit()
    text = (f"experiment: ramsey_fringe\ncontrast: {analysis.fringe_contrast(fit):.12g}\n"
            + fit.report())
    _write(out, "ramsey_fringe_report.txt", text, written)


def _contrast(cfg, out, meta, written):
    res = experiments.run_contrast_scan(
        cfg.calibration(), cfg.energies, cfg.pulses, cfg.delay, cfg.attenuation, cfg.motion(),
        experiments.default_mw_phases(cfg.mw_phases), model=cfg.model(), decay=cfg.decay,
        pulse_width=cfg.pulse_width, shots=_shots(cfg), detection=cfg.detection(),
        seed=cfg.seed, workers=cfg.workers)
    _write(out, "contrast_scan.csv", res.to_csv(meta), written)


def _phase_vs_delay(cfg, out, meta, written):
    noisy = cfg.sampled
    points = experiments.run_phase_vs_delay(
        cfg.calibration(), cfg.delays, cfg.energy, cfg.attenuation, cfg.motion(),
        experiments.default_mw_phases(cfg.mw_phases), model=cfg.model(),
        delay_jitter=cfg.delay_sigma if noisy else 0.0,
        phase_noise=cfg.phase_sigma if noisy else 0.0,
        shots=_shots(cfg), detection=cfg.detection(), seed=cfg.seed, workers=cfg.workers)
    pts = np.array(points)
    res = experiments.SequenceResult("delay_ps", pts[:, 0], pts[:, 1], pts[:, 2], quantity="phase")
    _write(out, "phase_vs_delay.csv", res.to_csv(meta), written)
    fit, (split, split_err) = experiments.analyze_phase_scan(
        points, cfg.constants(), cfg.delay_sigma, cfg.phase_sigma)
    unwrapped = fit.flags.pop("unwrapped")
    lines = ["experiment: phase_vs_delay",
             f"frequency_GHz: {fit['frequency']:.12g}",
             f"frequency_stderr_GHz: {fit.error('frequency'):.12g}",
             f"excited_splitting_MHz: {split * 1e3:.12g}",
             f"excited_splitting_stderr_MHz: {split_err * 1e3:.12g}"]
    _write(out, "phase_vs_delay_report.txt", "\n".join(lines) + "\n" + fit.report(), written)
    resid = "".join(f"{t:.12g},{u:.12g},{r:.12g}\n"
                    for t, u, r in zip(np.sort(pts[:, 0]), unwrapped, fit.residuals))
    _write(out, "phase_vs_delay_residuals.csv",
           "delay_ps,unwrapped_phase,residual\n" + resid, written)


def _detect(cfg, out, meta, written):
    model = cfg.detection()
    hist = simulate_histogram(cfg.p_bright, cfg.shots, model, cfg.seed)
    fit = fit_bright_fraction(hist, model)
    head = "".join(f"# {k} = {v}\n" for k, v in meta.items())
    _write(out, "detect_calibrate.csv", head + hist.to_csv(), written)
    _write(out, "detect_calibrate_report.txt", "experiment: detect_calibrate\n" + fit.report(),
           written)


_RUNNERS = {
    "rabi_scan": _rabi,
    "two_pulse_scan": _two_pulse,
    "ramsey_fringe": _ramsey,
    "contrast_scan": _contrast,
    "phase_vs_delay": _phase_vs_delay,
    "detect_calibrate": _detect,
}


def run(cfg: RunConfig) -> list:
    """Run the configured experiment and return the paths written."""
    if cfg.experiment not in _RUNNERS:
        raise ConfigError(f"experiment: unknown experiment {cfg.experiment!r}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    _RUNNERS[cfg.experiment](cfg, out, _metadata(cfg), written)
    return written


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="simname", description="Ultrafast pulse experiments on a trapped Cd+ ion.")
    p.add_argument("experiment", help="experiment name, or 'list'")
    p.add_argument("--config", help="configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact")
    mode.add_argument("--sampled", dest="mode", action="store_const", const="sampled")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.experiment == "list":
        for name, desc in list_experiments():
            print(f"{name}\t{desc}")
        return EXIT_OK
    if args.experiment not in EXPERIMENT_NAMES:
        print(f"simname: unknown experiment {args.experiment!r}; try 'simname list'",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {"experiment": args.experiment}
        for key in ("out", "seed", "mode"):
            if getattr(args, key) is not None:
                overrides[key] = getattr(args, key)
        cfg = validate(dataclasses.replace(cfg, **overrides))
    except ConfigError as exc:
        print(f"simname: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"simname: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for path in run(cfg):
            log.info("wrote %s", path)
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"simname: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
