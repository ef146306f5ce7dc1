"""``omitq`` command line: run figure experiments from config files and write CSV results."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, METHODS, ConfigError, ExperimentConfig, load_config
from .dynamics import IntegrationError, transistor_schedule
from .liouville import SolverError
from .model import DegenerateBeatError
from .pipeline import (ResourceLimitError, crossover_sweep, main_dip_grid, omit_signal,
                       temperature_sweep, transistor_run)
from .response import StationarityError

log = logging.getLogger("omitq")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_RESOURCE = 0, 2, 3, 4

SPECTRUM_HEADER = ("delta_p", "transmission_quantum", "transmission_classical",
                   "transmission_modified_classical", "omit_signal", "harmonic2")


def _fmt(value) -> str:
    return f"{float(value):.12g}"


def write_csv(path: Path, header, rows) -> Path:
    """Write rows with 12 significant digits and ``\\n`` line endings."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path


def write_spectrum(path: Path, spectrum) -> Path:
    cols = (spectrum.delta_p, spectrum.transmission, spectrum.classical, spectrum.modified_classical,
            spectrum.signal, spectrum.harmonic2)
    return write_csv(path, SPECTRUM_HEADER, zip(*cols))


def _ratio_tag(value: float) -> str:
    return f"{value:g}".replace(".", "p").replace("-", "m")


def _grid(cfg: ExperimentConfig):
    if cfg.grid_start is None:
        return None
    return np.linspace(cfg.grid_start, cfg.grid_stop, cfg.grid_points)


def _td_options(cfg: ExperimentConfig) -> dict:
    opts = {"window": cfg.window}
    if cfg.dt is not None:
        opts["dt"] = cfg.dt
    if cfg.relax is not None:
        opts["relax"] = cfg.relax
    return opts


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Run ``cfg`` and write its CSV files into ``out_dir``.

    Returns a dict with the written paths (``files``) and metadata lines
    (``notes``) describing the resolved truncations.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.params
    common = dict(tol=cfg.tol, ceiling=cfg.ceiling, n_jobs=cfg.threads, td_options=_td_options(cfg))
    files, notes, results = [], [], {}

    if cfg.experiment in ("main_dip", "custom_spectrum"):
        grid = _grid(cfg)
        if grid is None:
            grid = main_dip_grid(p)
        spec = omit_signal(p, grid, cfg.method, space=cfg.space, **common)
        files.append(write_spectrum(out / "spectrum.csv", spec))
        notes += [f"space = {spec.space}", f"reference_space = {spec.reference_space}",
                  f"photon_number = {_fmt(spec.photon_number)}",
                  f"harmonic2_flagged_points = {int(spec.harmonic_flags.sum())}"]
        results["spectrum"] = spec

    elif cfg.experiment in ("crossover_sideband1", "crossover_sideband2"):
        sideband = 1 if cfg.experiment.endswith("1") else 2
        res = crossover_sweep(p, cfg.ratios, sideband, grid=_grid(cfg), method=cfg.method, **common)
        rows = []
        for (ratio, spec), amp, dev in zip(res.entries, res.amplitudes(), res.classical_deviation()):
            files.append(write_spectrum(out / f"spectrum_g0k_{_ratio_tag(ratio)}.csv", spec))
            rows.append((ratio, spec.params.g0, spec.params.eps_c, amp, dev,
                         spec.space.n_photon_levels, spec.space.n_phonon_levels))
            notes.append(f"g0/kappa = {ratio:g}: space = {spec.space}, reference_space = {spec.reference_space}")
        rows.sort(key=lambda r: r[0])
        files.append(write_csv(out / "fano_amplitudes.csv",
                               ("g0_over_kappa", "g0", "eps_c", "fano_amplitude", "max_relative_deviation_classical",
                                "n_photon_levels", "n_phonon_levels"), rows))
        results["crossover"] = res

    elif cfg.experiment == "temperature_sweep":
        res = temperature_sweep(p, cfg.n_th_values, cfg.ratio, grid=_grid(cfg), method=cfg.method, **common)
        rows = []
        for (n_th, spec), amp in zip(res.entries, res.amplitudes):
            files.append(write_spectrum(out / f"spectrum_nth_{_ratio_tag(n_th)}.csv", spec))
            rows.append((n_th, amp, spec.space.n_photon_levels, spec.space.n_phonon_levels))
            notes.append(f"n_th = {n_th:g}: space = {spec.space}")
        rows.sort(key=lambda r: r[0])
        files.append(write_csv(out / "fano_amplitudes.csv",
                               ("n_th", "fano_amplitude", "n_photon_levels", "n_phonon_levels"), rows))
        results["temperature"] = res

    elif cfg.experiment == "transistor":
        schedule = transistor_schedule(cfg.t_switch, cfg.t_hold, mode=cfg.ramp)
        res = transistor_run(p, schedule, space=cfg.space, settle=cfg.settle, tail=cfg.tail, dt=cfg.dt,
                             tol=cfg.tol, ceiling=cfg.ceiling)
        files.append(write_csv(out / "transmission.csv", ("t", "control_amplitude", "transmission"),
                               zip(res.times, res.control, res.transmission)))
        keys = sorted(res.populations)
        files.append(write_csv(out / "populations.csv", ("t",) + tuple(f"p{a}{b}" for a, b in keys),
                               zip(res.population_times, *(res.populations[k] for k in keys))))
        summary = []
        for name, fit in (("switch_on_tau", res.switch_on), ("switch_off_tau", res.switch_off)):
            summary.append((name, _fmt(fit.tau) if fit else "nan", "ok" if fit else "fit_failed"))
        freq = res.p10_frequency
        summary.append(("p10_frequency", _fmt(freq) if freq is not None else "nan",
                        "ok" if freq is not None else "fit_failed"))
        files.append(write_csv(out / "summary.csv", ("quantity", "value", "status"), summary))
        notes.append(f"space = {res.space}")
        notes += [f"fit_error = {e}" for e in res.fit_errors]
        results["transistor"] = res
    else:  # pragma: no cover - rejected by the parser
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    return {"files": files, "notes": notes, "results": results}


def write_metadata(path: Path, cfg: ExperimentConfig, notes, wall_time: float) -> Path:
    """Config text of the resolved run, followed by comment lines with run facts.

    The file parses as a config, so it can be fed back to ``omitq run``.
    """
    lines = [f"# omitq {__version__}", f"# wall_time_s = {wall_time:.3f}", f"# method = {cfg.method}"]
    lines += [f"# {n}" for n in notes]
    path.write_text("\n".join(lines) + "\n" + cfg.to_text(), encoding="utf-8")
    return path


def cmd_list(_args) -> int:
    width = max(len(k) for k in EXPERIMENTS)
    print(f"{'experiment':<{width}}  {'figure':<10}  description")
    for name, (fig, desc) in EXPERIMENTS.items():
        print(f"{name:<{width}}  {fig:<10}  {desc}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.method is not None:
        cfg.method = args.method
    if args.threads is not None:
        if args.threads < 1:
            print("config error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        cfg.threads = args.threads
    if args.figures:
        cfg.figures = True
    out_dir = Path(args.out or cfg.output or "omitq-out")
    start = time.time()
    try:
        outcome = run_experiment(cfg, out_dir)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SolverError, IntegrationError, StationarityError) as exc:
        print(f"solver error ({cfg.experiment}, {cfg.params}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DegenerateBeatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_metadata(out_dir / "metadata.cfg", cfg, outcome["notes"], time.time() - start)
    if cfg.figures:
        from .plotting import render

        for path in render(cfg.experiment, outcome["results"], out_dir):
            log.info("wrote %s", path)
    for path in outcome["files"]:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omitq", description="Quantum OMIT spectra and protocols.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--out", help="output directory (default: config 'output' or ./omitq-out)")
    run.add_argument("--method", choices=METHODS, help="override the sideband method")
    run.add_argument("--threads", type=int, help="worker processes for grid points")
    run.add_argument("--seedless", action="store_true",
                     help="accepted for compatibility; runs are deterministic and use no seed")
    run.add_argument("--figures", action="store_true", help="also render PNG figures next to the CSV files")
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list", help="list experiments and the figures they reproduce")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
