"""Command-line entry point.

Usage::

    approxctrl {resolvent,gramian,sweep,gamma,feasibility} --config run.toml
               [--out DIR] [--seed N] [--quiet]

Exit codes: 0 success, 2 config or I/O error, 3 numerical failure,
4 acceptance property not met.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_model, build_sweep_config, config_hash, dump_config, load_config
from .control import (
    SteeringProblem,
    assemble_gramian,
    eval_Ku,
    linear_ac_test,
    write_decay_csv,
    write_gramian_csv,
)
from .errors import ConfigError, NumericalError
from .experiment import (
    ControllabilityError,
    run_gamma_study,
    run_sweep,
    write_gamma_csv,
    write_ku_csv,
    write_sweep_csv,
)
from .resolvent import TimeGrid, build_table, check_axioms, write_table_csv
from .solver import feasibility_check
from .spectral_model import GrowthEnvelope
from .stochastic import sample_path, write_path_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4

log = logging.getLogger("approxctrl")


def _fmt(x):
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _write_pairs(path, rows, header=("quantity", "value")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


class Run:
    """Output directory, plot switch and the list of written files."""

    def __init__(self, config, out):
        self.config = config
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def plot(self, fn, obj, stem):
        if self.config.output.plots:
            fn(obj, self.path(f"{stem}.{self.config.output.plot_format}"))

    def manifest(self, command, status):
        data = {
            "command": command,
            "status": status,
            "config_hash": config_hash(self.config),
            "seed": self.config.experiment.seed,
            "files": self.files,
            "versions": {
                "approxctrl": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }
        (self.out / "config.toml").write_text(dump_config(self.config))
        with open(self.out / "run_manifest.json", "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)


def cmd_resolvent(run):
    from .plotting import plot_defect, plot_resolvent

    cfg = run.config
    model = build_model(cfg.model)
    table = build_table(model, TimeGrid(model.horizon, cfg.grid.steps))
    report = check_axioms(table)
    write_table_csv(table, run.path("resolvent.csv"))
    _write_pairs(run.path("axioms.csv"), report.summary_rows())
    _write_pairs(run.path("defect.csv"), zip(report.defect_eps.tolist(), report.defect.tolist()),
                 header=("eps", "defect"))
    run.plot(plot_resolvent, table, "resolvent")
    run.plot(plot_defect, report, "defect")
    ok = report.passed(cfg.experiment.residual_tol)
    log.info("semigroup defect max %.3e, gamma_hat %.4g, relative residual %.3e",
             float(np.max(report.defect)), report.gamma_hat, report.relative_residual)
    return ok


def cmd_gramian(run):
    from .plotting import plot_decay

    cfg = run.config
    model = build_model(cfg.model)
    table = build_table(model, TimeGrid(model.horizon, cfg.grid.steps))
    gramian = assemble_gramian(table, model.control)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.experiment.seed)))
    probes = rng.standard_normal((cfg.experiment.probes, model.n_modes))
    mus = cfg.experiment.mu
    if len(mus) < 2:
        raise ConfigError("experiment.mu: the decay test needs at least two values")
    decay = linear_ac_test(gramian, mus, probes)
    write_gramian_csv(gramian, run.path("gramian.csv"))
    write_decay_csv(decay, run.path("decay.csv"))
    run.plot(plot_decay, decay, "decay")
    log.info("lambda_min %.4e, final/initial decay ratio %.3e", gramian.lambda_min, decay.final_ratio)
    return decay.passed


def cmd_sweep(run):
    from .plotting import plot_sweep

    cfg = run.config
    sweep = build_sweep_config(cfg)
    if cfg.output.dump_paths and sweep.mode == "stochastic":
        write_path_csv(sample_path(sweep.model.noise, sweep.grid, sweep.seed, 0),
                       run.path("path_0.csv"))
    report = run_sweep(sweep)
    write_sweep_csv(report, run.path("sweep.csv"))
    write_ku_csv(report, run.path("sweep_ku.csv"))
    run.plot(plot_sweep, report, "sweep")
    return report.decreasing() and report.within_Ku()


def cmd_gamma(run):
    from .plotting import plot_gamma

    cfg = run.config
    sweep = build_sweep_config(cfg)
    gammas = [f * sweep.model.horizon for f in cfg.experiment.gamma_fractions]
    report = run_gamma_study(sweep, gammas, cfg.experiment.gamma_mu)
    write_gamma_csv(report, run.path("gamma.csv"))
    run.plot(plot_gamma, report, "gamma")
    for r in report.rows:
        log.info("gamma=%-8g mean distance %.4e", r.gamma, r.mean_distance)
    return report.nonincreasing


def cmd_feasibility(run):
    cfg = run.config
    exp = cfg.experiment
    model = build_model(cfg.model)
    grid = TimeGrid(model.horizon, cfg.grid.steps)
    table = build_table(model, grid)
    envelope = (GrowthEnvelope.stated() if exp.envelope == "stated"
                else GrowthEnvelope.for_model(model))
    sweep = build_sweep_config(cfg)
    mu = exp.ku_mu if exp.ku_mu is not None else exp.mu[0]
    problem = sweep.target.problem(mu, model.n_modes)
    if exp.mode == "deterministic":
        problem = SteeringProblem(problem.target_mean, mu)
    M = table.sup_norm
    Ku = eval_Ku(problem, model, envelope, exp.radius, grid, M=M)
    ok, lhs = feasibility_check(model, envelope, Ku, exp.radius, M=M)
    _write_pairs(run.path("feasibility.csv"),
                 [(exp.radius, mu, M, model.control.norm(model.n_modes), Ku, lhs, int(ok))],
                 header=("r", "mu", "M", "M_C", "Ku", "lhs", "feasible"))
    print(f"lhs = {lhs:.10g}  r = {exp.radius:.10g}  feasible = {ok}")
    return ok


COMMANDS = {
    "resolvent": cmd_resolvent,
    "gramian": cmd_gramian,
    "sweep": cmd_sweep,
    "gamma": cmd_gamma,
    "feasibility": cmd_feasibility,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="approxctrl", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="TOML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="seed override (unsigned 64-bit)")
        p.add_argument("--quiet", action="store_true", help="only warnings and errors")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            exp = config.experiment.model_copy(update={"seed": args.seed})
            config = config.model_copy(update={"experiment": exp})
        out = args.out if args.out is not None else Path(config.output.directory)
        run = Run(config, out)
        ok = COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ControllabilityError as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    status = "pass" if ok else "fail"
    run.manifest(args.command, status)
    if not ok:
        print(f"{args.command}: acceptance property not met", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
