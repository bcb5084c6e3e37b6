"""Monte Carlo studies: mu-sweeps of the terminal error and gamma-freezing.

Every path index ``i`` draws the same noise at every ``mu`` level and every
``gamma`` value (common random numbers), so differences between rows come
from the control and the freezing alone.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .control import (
    RegularizedInverse,
    SteeringProblem,
    assemble_gramian,
    eval_Ku,
    linear_ac_test,
)
from .errors import ApproxCtrlError, ConfigError, NumericalError
from .resolvent import TimeGrid, build_table
from .spectral_model import GrowthEnvelope, NonlinearitySpec
from .solver import SolveOptions, gamma_sequence_solve, picard_solve
from .stochastic import GENERATOR, sample_path, zero_path

__all__ = [
    "ControllabilityError",
    "TargetSpec",
    "SweepConfig",
    "SweepRow",
    "SweepReport",
    "GammaRow",
    "GammaReport",
    "model_fingerprint",
    "deterministic_variant",
    "realize_target",
    "run_sweep",
    "run_gamma_study",
    "write_sweep_csv",
    "write_ku_csv",
    "write_gamma_csv",
]

log = logging.getLogger(__name__)

SWEEP_HEADER = ["mu", "mean_err", "stderr", "mean_u2", "failures"]


class ControllabilityError(ApproxCtrlError):
    """The linear system failed the approximate-controllability precondition."""


@dataclass(frozen=True)
class TargetSpec:
    """Affine-in-noise target ``mean + noise_coef * W_k(c) e_k``."""

    mean: tuple = (1.0,)
    noise_coef: float = 0.0
    noise_mode: int = 1

    def problem(self, mu, n_modes):
        mean = np.asarray(self.mean, dtype=float)
        if mean.size not in (1, n_modes):
            raise ConfigError(f"target mean has {mean.size} entries, model has {n_modes} modes")
        return SteeringProblem.affine(mean, self.noise_coef, self.noise_mode, mu, n_modes)


@dataclass(frozen=True)
class SweepConfig:
    model: object
    steps: int
    mus: tuple
    paths: int = 1
    target: TargetSpec = field(default_factory=TargetSpec)
    mode: str = "stochastic"
    seed: int = 0
    options: SolveOptions = field(default_factory=SolveOptions)
    probes: int = 10

    def __post_init__(self):
        mus = tuple(float(m) for m in self.mus)
        if not mus or any(m <= 0 for m in mus) or any(b >= a for a, b in zip(mus, mus[1:])):
            raise ConfigError("mu list must be positive and strictly decreasing")
        object.__setattr__(self, "mus", mus)
        if self.mode not in ("stochastic", "deterministic"):
            raise ConfigError(f"mode must be stochastic or deterministic, got {self.mode!r}")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if self.mode == "deterministic":
            object.__setattr__(self, "paths", 1)

    @property
    def grid(self):
        return TimeGrid(self.model.horizon, self.steps)


@dataclass
class SweepRow:
    mu: float
    mean_err: float
    stderr: float
    mean_u2: float
    failures: int
    peak_u2: float = float("nan")         # max_j of the path-mean ||u(s_j)||^2
    peak_u2_stderr: float = float("nan")
    ball_radius: float = float("nan")     # max_j of the path-mean ||x(s_j)||^2
    Ku: float = float("nan")


@dataclass
class SweepReport:
    rows: list
    metadata: dict

    def decreasing(self, factor=0.1, floor=1e-24):
        """Strict decrease with ``final <= factor * initial``; an all-zero sweep also passes."""
        err = [r.mean_err for r in self.rows]
        if max(err) <= floor:
            return True
        strict = all(b < a for a, b in zip(err, err[1:]))
        return strict and err[-1] <= factor * err[0]

    def within_Ku(self, n_se=3.0):
        """Peak ``E||u(s)||^2`` below ``Ku`` plus ``n_se`` standard errors on every row
        that has a bound."""
        return all(
            r.peak_u2 <= r.Ku + n_se * r.peak_u2_stderr
            for r in self.rows if np.isfinite(r.Ku)
        )


def model_fingerprint(model):
    """Stable hash of everything that defines ``model``."""
    spec = model.nonlinearity
    desc = {
        "eigenvalues": [float(a).hex() for a in model.eigenvalues],
        "horizon": float(model.horizon).hex(),
        "kernel": [model.kernel.family, float(model.kernel.amplitude).hex(),
                   float(model.kernel.decay).hex()],
        "control": model.control.kind,
        "noise": [float(x).hex() for x in model.noise.variances],
        "nonlinearity": [spec.family(w) for w in ("f", "g", "zeta")],
    }
    return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()


def deterministic_variant(model):
    """Same model with ``g = 0`` (the noise is then inert)."""
    spec = model.nonlinearity
    return replace(model, nonlinearity=NonlinearitySpec(spec.f, "zero", spec.zeta))


def realize_target(problem, path):
    """Terminal target on ``path``; only constant ``phi`` (affine targets) is supported."""
    if np.ndim(problem.phi) != 1:
        raise ConfigError("only affine-in-W targets (constant phi) can be realized per path")
    return problem.realize(path)


def _stderr(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def _paths(config, model, grid):
    if config.mode == "deterministic":
        yield zero_path(grid, model.n_modes)
        return
    for i in range(config.paths):
        yield sample_path(model.noise, grid, config.seed, i)


def _prepare(config):
    model = config.model
    if config.mode == "deterministic":
        model = deterministic_variant(model)
    grid = config.grid
    table = build_table(model, grid)
    gramian = assemble_gramian(table, model.control)
    return model, grid, table, gramian


def _check_controllable(gramian, config):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed, spawn_key=(2**31,))))
    probes = rng.standard_normal((config.probes, gramian.n_modes))
    ladder = np.logspace(0, -4, 5)
    decay = linear_ac_test(gramian, ladder, probes)
    if not decay.passed:
        raise ControllabilityError(
            f"linear approximate-controllability test failed "
            f"(final/initial ratio {decay.final_ratio:.3g}, lambda_min {gramian.lambda_min:.3e})"
        )
    return decay


def run_sweep(config, envelope=None):
    """Mean terminal error ``E||x_mu(c) - x_c||^2`` for each ``mu``.

    ``envelope`` (default: :meth:`GrowthEnvelope.for_model`) feeds the
    per-row control bound ``Ku``, evaluated on the ball whose radius is the
    largest path-mean ``||x(s)||^2`` observed at that ``mu``.
    """
    model, grid, table, gramian = _prepare(config)
    decay = _check_controllable(gramian, config)
    if envelope is None:
        try:
            envelope = GrowthEnvelope.for_model(model)
        except ConfigError:
            envelope = None
    rows = []
    for mu in config.mus:
        problem = config.target.problem(mu, model.n_modes)
        if config.mode == "deterministic":
            problem = SteeringProblem(problem.target_mean, mu)
        inverse = RegularizedInverse(gramian, mu)
        errs, u2, x2 = [], [], []
        failures = 0
        for path in _paths(config, model, grid):
            try:
                res = picard_solve(model, table, problem, path, config.options, inverse)
            except NumericalError as exc:
                failures += 1
                log.warning("mu=%g path %d failed: %s", mu, path.index, exc)
                continue
            target = realize_target(problem, path)
            errs.append(float(np.sum((res.trajectory.terminal - target) ** 2)))
            u2.append(res.control.energy_profile())
            x2.append(np.sum(res.trajectory.states**2, axis=1))
        if not errs:
            raise NumericalError(f"every path failed at mu={mu}")
        u2 = np.asarray(u2)
        u2_mean = u2.mean(axis=0)
        jpk = int(np.argmax(u2_mean))
        radius = float(np.max(np.mean(x2, axis=0)))
        row = SweepRow(
            mu=mu,
            mean_err=float(np.mean(errs)),
            stderr=_stderr(errs),
            mean_u2=float(grid.trapezoid(u2_mean) / grid.horizon),
            failures=failures,
            peak_u2=float(u2_mean[jpk]),
            peak_u2_stderr=_stderr(u2[:, jpk]),
            ball_radius=radius,
        )
        if envelope is not None and radius > 0:
            row.Ku = eval_Ku(problem, model, envelope, radius, grid, M=table.sup_norm)
        log.info("mu=%g mean_err=%.4e stderr=%.2e failures=%d", mu, row.mean_err, row.stderr, failures)
        rows.append(row)
    meta = {
        "seed": config.seed,
        "generator": GENERATOR,
        "paths": config.paths,
        "mode": config.mode,
        "horizon": model.horizon,
        "steps": grid.steps,
        "model_hash": model_fingerprint(model),
        "gramian_lambda_min": gramian.lambda_min,
        "linear_ac_final_ratio": decay.final_ratio,
    }
    return SweepReport(rows, meta)


@dataclass
class GammaRow:
    index: int
    gamma: float
    mean_distance: float
    stderr: float
    failures: int


@dataclass
class GammaReport:
    mu: float
    rows: list
    reference_failures: int
    mean_successive: list
    metadata: dict

    @property
    def nonincreasing(self):
        d = [r.mean_distance for r in self.rows]
        return all(b <= a for a, b in zip(d, d[1:]))


def run_gamma_study(config, gammas, mu=None):
    """Mean distance between the gamma-frozen solutions and the unfrozen one.

    ``gammas`` are absolute freezing points in ``(0, c)``, strictly
    decreasing. ``mu`` defaults to the first entry of ``config.mus``.
    """
    model, grid, table, gramian = _prepare(config)
    mu = config.mus[0] if mu is None else float(mu)
    problem = config.target.problem(mu, model.n_modes)
    if config.mode == "deterministic":
        problem = SteeringProblem(problem.target_mean, mu)
    inverse = RegularizedInverse(gramian, mu)
    dists = [[] for _ in gammas]
    succ = [[] for _ in gammas[1:]]
    ref_failures = 0
    snapped = None
    for path in _paths(config, model, grid):
        study = gamma_sequence_solve(model, table, problem, path, gammas, config.options, inverse)
        snapped = study.gammas
        if isinstance(study.reference, Exception):
            ref_failures += 1
            continue
        for k, d in enumerate(study.distance_to_reference):
            if np.isfinite(d):
                dists[k].append(d)
        for k, d in enumerate(study.successive_distance):
            if np.isfinite(d):
                succ[k].append(d)
    n_ok = config.paths - ref_failures
    rows = [
        GammaRow(k + 1, g, float(np.mean(d)) if d else float("nan"), _stderr(d), n_ok - len(d))
        for k, (g, d) in enumerate(zip(snapped, dists))
    ]
    meta = {
        "seed": config.seed,
        "generator": GENERATOR,
        "paths": config.paths,
        "mu": mu,
        "steps": grid.steps,
        "model_hash": model_fingerprint(model),
    }
    return GammaReport(mu, rows, ref_failures,
                       [float(np.mean(s)) if s else float("nan") for s in succ], meta)


def _fmt(x):
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def write_sweep_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in report.rows:
            w.writerow([_fmt(r.mu), _fmt(r.mean_err), _fmt(r.stderr), _fmt(r.mean_u2), r.failures])


def write_ku_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "peak_u2", "peak_u2_stderr", "Ku", "ball_radius"])
        for r in report.rows:
            w.writerow([_fmt(r.mu), _fmt(r.peak_u2), _fmt(r.peak_u2_stderr), _fmt(r.Ku),
                        _fmt(r.ball_radius)])


def write_gamma_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "gamma", "mean_distance", "stderr", "failures"])
        for r in report.rows:
            w.writerow([r.index, _fmt(r.gamma), _fmt(r.mean_distance), _fmt(r.stderr), r.failures])
