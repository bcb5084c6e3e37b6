"""Acceptance criteria 1-12, each at its stated tolerance and runtime bound.

Every test records one PASS/FAIL line, printed in the pytest terminal summary.
"""

import time

import numpy as np
import pytest
from scipy.integrate import trapezoid

from approxctrl import (
    ControlOperatorSpec,
    GrowthEnvelope,
    MemoryKernel,
    NonlinearitySpec,
    QWienerSpec,
    RegularizedInverse,
    SolveOptions,
    SpectralModel,
    SweepConfig,
    TargetSpec,
    TimeGrid,
    assemble_gramian,
    build_table,
    check_axioms,
    feasibility_check,
    heat_memory_model,
    picard_solve,
    run_gamma_study,
    run_sweep,
    sample_path,
    scalar_model,
)
from approxctrl import cli
from approxctrl.control import linear_ac_test
from approxctrl.resolvent import solve_mode
from approxctrl.spectral_model import PowerWeight
from approxctrl.stochastic import ito_convolution, stochastic_integral, zero_path
from conftest import record
from oracles import exp_kernel_resolvent, scalar_delta, shoot_nonlocal

EXP = MemoryKernel.exponential(1.0, 1.0)
MUS = (1.0, 0.1, 0.01, 0.001)
AFFINE = TargetSpec((1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0), 0.2, 1)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_01_semigroup_oracle():
    with Timer() as t:
        model = SpectralModel(eigenvalues=[-1.0, -4.0, -9.0, -16.0], kernel=MemoryKernel.zero())
        table = build_table(model, TimeGrid(1.0, 2000))
        s = table.grid.nodes
        err = max(np.max(np.abs(table.values[n] - np.exp(-((n + 1) ** 2) * s))) for n in range(4))
    ok = err <= 1e-4 and t.elapsed < 1.0
    record(1, ok, f"max |r_n - exp(-n^2 s)| = {err:.2e} (<= 1e-4), {t.elapsed:.2f}s (< 1s)")
    assert ok


def test_02_exponential_kernel_oracle():
    with Timer() as t:
        grid = TimeGrid(1.0, 2000)
        r = solve_mode(-1.0, EXP, grid)
        err = np.max(np.abs(r - exp_kernel_resolvent(-1.0, 1.0, 1.0, grid.nodes)))
        model = SpectralModel(eigenvalues=[-1.0], kernel=EXP)
        coarse = check_axioms(build_table(model, TimeGrid(1.0, 1000)))
        fine = check_axioms(build_table(model, TimeGrid(1.0, 2000)))
        ratios = [float(np.min(getattr(coarse, k) / getattr(fine, k)))
                  for k in ("forward_residual", "backward_residual")]
    ok = err <= 1e-6 and min(ratios) >= 3.5 and t.elapsed < 5.0
    record(2, ok, f"oracle error {err:.2e} (<= 1e-6), residual ratios "
                  f"{ratios[0]:.2f}/{ratios[1]:.2f} (>= 3.5), {t.elapsed:.2f}s (< 5s)")
    assert ok


def test_03_semigroup_defect(example_table):
    rep = check_axioms(example_table)
    bounded = bool(np.all(rep.defect <= rep.gamma_hat * rep.defect_eps * (1 + 1e-12)))
    ok = np.isfinite(rep.gamma_hat) and bounded and len(rep.summary_rows()) > 0
    record(3, ok, f"D(eps) <= gamma_hat*eps on the grid, gamma_hat = {rep.gamma_hat:.4f}, "
                  f"max D = {np.max(rep.defect):.3e}")
    assert ok


def test_04_gramian_properties(example_model, example_table):
    with Timer() as t:
        C = ControlOperatorSpec("coupled").matrix(8)
        block = (C @ C.T)[:2, :2]
        g = assemble_gramian(example_table, example_model.control)
        asym = float(np.max(np.abs(g.matrix - g.matrix.T)))
        norms = {mu: RegularizedInverse(g, mu).norm() for mu in (1.0, 1e-3)}
    block_ok = np.array_equal(block, [[4.0, 2.0], [2.0, 1.0]])
    norm_ok = all(n <= 1 / mu + 1e-12 for mu, n in norms.items())
    ok = block_ok and asym <= 1e-12 and g.lambda_min > 0 and norm_ok and t.elapsed < 1.0
    record(4, ok, f"CC* block exact={block_ok}, asymmetry {asym:.1e}, lambda_min {g.lambda_min:.3e}, "
                  f"||S|| <= 1/mu: {norm_ok}, {t.elapsed:.2f}s (< 1s)")
    assert ok


def test_05_linear_controllability(example_model, example_table):
    with Timer() as t:
        g = assemble_gramian(example_table, example_model.control)
        probes = np.random.default_rng(20240607).standard_normal((10, 8))
        rep = linear_ac_test(g, np.logspace(0, -4, 5), probes)
    ok = rep.strictly_decreasing and rep.final_ratio <= 0.1 and t.elapsed < 1.0
    record(5, ok, f"strictly decreasing={rep.strictly_decreasing}, worst final/initial "
                  f"{rep.final_ratio:.3e} (<= 0.1), {t.elapsed:.2f}s (< 1s)")
    assert ok


def test_06_scalar_steering():
    with Timer() as t:
        cfg = SweepConfig(scalar_model(), 2000, MUS, mode="deterministic", target=TargetSpec((1.0,)))
        rep = run_sweep(cfg)
    delta = scalar_delta()
    worst = max(abs(r.mean_err - (r.mu / (r.mu + delta)) ** 2) for r in rep.rows)
    ok = worst <= 1e-4 and t.elapsed < 1.0
    record(6, ok, f"max |err - (mu/(mu+Delta))^2| = {worst:.2e} (<= 1e-4), {t.elapsed:.2f}s (< 1s)")
    assert ok


def test_07_ito_isometry():
    n_paths, m = 10**4, 100
    lam = np.array([1.0, 0.25, 1 / 9])
    eig = [-1.0, -4.0, -9.0]
    with Timer() as t:
        model = SpectralModel(eigenvalues=eig, kernel=EXP, noise=QWienerSpec(lam))
        table = build_table(model, TimeGrid(1.0, m))
        s = table.grid.nodes
        G = np.stack([1 + np.cos(s), s, np.ones_like(s)], axis=1)
        H = np.random.default_rng(7).standard_normal((m + 1, 3))
        conv = np.empty(n_paths)
        plain = np.empty(n_paths)
        for i in range(n_paths):
            p = sample_path(model.noise, table.grid, 123, i)
            conv[i] = np.sum(ito_convolution(table, G, p, m) ** 2)
            plain[i] = np.sum(stochastic_integral(H, p) ** 2)
        fine = np.linspace(0.0, 1.0, 4001)
        Gf = np.stack([1 + np.cos(fine), fine, np.ones_like(fine)], axis=1)
        oracle = sum(
            lam[k] * trapezoid((exp_kernel_resolvent(a, 1.0, 1.0, 1.0 - fine) * Gf[:, k]) ** 2, fine)
            for k, a in enumerate(eig)
        )
    rel = abs(conv.mean() - oracle) / oracle
    bound = lam.sum() * table.grid.trapezoid(np.sum(H**2, axis=1))
    se = plain.std(ddof=1) / np.sqrt(n_paths)
    ok = rel <= 0.05 and plain.mean() <= bound + 3 * se and t.elapsed < 30
    record(7, ok, f"isometry rel. error {rel:.3%} (<= 5%), E||int G dW||^2 = {plain.mean():.4f} "
                  f"<= Tr(Q) int ||G||^2 = {bound:.4f} + 3se, {t.elapsed:.1f}s (< 30s)")
    assert ok


def test_08_nonlocal_fixed_point():
    with Timer() as t:
        model = heat_memory_model(
            8, horizon=0.5, nonlinearity=NonlinearitySpec("bounded", "zero", "bounded"))
        table = build_table(model, TimeGrid(0.5, 1000))
        res = picard_solve(model, table, None, zero_path(table.grid, 8), SolveOptions(tol=1e-8))
        ref = np.array([shoot_nonlocal(a, 1.0, 1.0, table.grid.nodes) for a in model.eigenvalues])
    err = float(np.max(np.abs(res.h_value - ref)))
    ok = res.iterations <= 30 and err <= 1e-7 and res.tail_ratio < 1 and t.elapsed < 5
    record(8, ok, f"{res.iterations} iterations (<= 30), |h - shooting| = {err:.2e} (<= 1e-7), "
                  f"tail ratio {res.tail_ratio:.3f} (< 1), {t.elapsed:.2f}s (< 5s)")
    assert ok


@pytest.mark.slow
def test_09_mu_sweep_headline():
    with Timer() as t:
        cfg = SweepConfig(heat_memory_model(8), 1000, MUS, paths=200, target=AFFINE, seed=20240607)
        rep = run_sweep(cfg)
    errs = [r.mean_err for r in rep.rows]
    strict = all(b < a for a, b in zip(errs, errs[1:]))
    ratio = errs[-1] / errs[0]
    ku_ok = rep.within_Ku()
    ok = strict and ratio <= 0.1 and ku_ok and t.elapsed < 600
    errs_txt = ", ".join(f"{e:.3e}" for e in errs)
    record(9, ok, f"errors [{errs_txt}] strictly decreasing={strict}, final/initial {ratio:.2e} "
                  f"(<= 0.1), peak E||u||^2 <= Ku + 3se: {ku_ok}, {t.elapsed:.0f}s (< 600s)")
    assert ok


@pytest.mark.slow
def test_10_gamma_sequence():
    with Timer() as t:
        cfg = SweepConfig(heat_memory_model(8), 1000, (0.01,), paths=50, target=AFFINE, seed=20240607)
        rep = run_gamma_study(cfg, [0.4, 0.2, 0.1, 0.05])
    d = [r.mean_distance for r in rep.rows]
    ok = rep.nonincreasing and rep.reference_failures == 0 and t.elapsed < 300
    record(10, ok, "mean distances [" + ", ".join(f"{x:.3e}" for x in d)
                   + f"] nonincreasing={rep.nonincreasing}, {t.elapsed:.0f}s (< 300s)")
    assert ok


def test_11_feasibility_evaluator():
    model = SpectralModel(eigenvalues=[-1.0, -4.0], noise=QWienerSpec([np.pi**2 / 6 - 0.25, 0.25]))
    Ku = 0.5
    _, lhs = feasibility_check(model, GrowthEnvelope.stated(), Ku, 1.0, M=1.0, M_C=1.0)
    # 3*(1/3) + 6*(2*(1/12) + 0.5) + 3*(pi^2/6)*(1/4)
    hand = 5.0 + np.pi**2 / 8
    rng = np.random.default_rng(11)
    monotone = True
    for _ in range(500):
        w = rng.uniform(0, 2, 3)
        env = GrowthEnvelope(PowerWeight(w[0], 2), PowerWeight(w[1], 0), PowerWeight(w[2], 2))
        c, r, k = rng.uniform(0.1, 2), rng.uniform(0.1, 3), rng.uniform(0, 3)
        base = SpectralModel(eigenvalues=[-1.0, -4.0], horizon=c)
        lhs0 = feasibility_check(base, env, k, r)[1]
        w2 = w + rng.uniform(0, 1, 3)
        env2 = GrowthEnvelope(PowerWeight(w2[0], 2), PowerWeight(w2[1], 0), PowerWeight(w2[2], 2))
        longer = SpectralModel(eigenvalues=[-1.0, -4.0], horizon=c + rng.uniform(0, 1))
        monotone &= feasibility_check(longer, env2, k, r)[1] >= lhs0
    ok = abs(lhs - hand) <= 1e-10 and monotone
    record(11, ok, f"lhs {lhs:.12f} vs hand {hand:.12f} (|diff| {abs(lhs - hand):.1e} <= 1e-10), "
                   f"monotonicity probes pass={monotone}")
    assert ok


REPRO_CONFIG = """
[model]
n_modes = 8

[grid]
steps = 500

[experiment]
paths = 5
seed = 424242
target_mean = [1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
target_noise_coef = 0.2
gamma_mu = 0.01
residual_tol = 0.05

[output]
plots = true
"""


def test_12_reproducibility(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(REPRO_CONFIG)
    commands = ("resolvent", "gramian", "sweep", "gamma", "feasibility")
    for out in ("first", "second"):
        for cmd in commands:
            cli.main([cmd, "--config", str(cfg), "--out", str(tmp_path / out), "--quiet"])
    files = sorted(p.name for p in (tmp_path / "first").iterdir())
    same = [(tmp_path / "first" / f).read_bytes() == (tmp_path / "second" / f).read_bytes() for f in files]
    n_csv = sum(f.endswith(".csv") for f in files)
    ok = all(same) and n_csv == 9
    record(12, ok, f"{sum(same)}/{len(files)} report files byte-identical across reruns ({n_csv} CSV)")
    assert ok
