"""Controllability Gramian, regularized inverse and the steering control.

The steering control for regularization ``mu > 0`` is

    u(s) = C* R(c - s) (mu I + G)^{-1} b,

where ``G = int_0^c R(c - t) C C* R(c - t) dt`` and the bracket ``b`` is the
terminal defect left by the uncontrolled dynamics. ``b`` does not depend on
``s`` and is computed once per trajectory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import NumericalError, ShapeError
from .spectral_model import eval_nonlinearity
from .stochastic import det_convolution, ito_convolution, stochastic_integral

__all__ = [
    "Gramian",
    "RegularizedInverse",
    "SteeringProblem",
    "ControlSignal",
    "DecayReport",
    "assemble_gramian",
    "regularized_solve",
    "nonlocal_value",
    "steering_bracket",
    "control_from_bracket",
    "synthesize_control",
    "eval_Ku",
    "linear_ac_test",
    "write_gramian_csv",
    "write_decay_csv",
]


@dataclass(frozen=True, eq=False)
class Gramian:
    matrix: np.ndarray
    horizon: float
    steps: int
    control_kind: str

    @property
    def n_modes(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    @property
    def lambda_min(self):
        return float(self.eigenvalues()[0])


def assemble_gramian(table, control):
    """Trapezoid quadrature of ``R(c - s) C C* R(c - s)`` over ``[0, c]``.

    With a diagonal resolvent, entry ``(p, q)`` is
    ``int r_p(c - s) (CC*)_{pq} r_q(c - s) ds``.
    """
    grid = table.grid
    CCt = control.matrix(table.n_modes)
    CCt = CCt @ CCt.T
    rr = table.values.T  # row j = r(s_j); reversal does not change the integral
    w = np.full(grid.steps + 1, grid.dt)
    w[[0, -1]] *= 0.5
    mat = CCt * ((rr.T * w) @ rr)
    mat = 0.5 * (mat + mat.T)
    mat.flags.writeable = False
    return Gramian(mat, grid.horizon, grid.steps, control.kind)


class RegularizedInverse:
    """Cholesky factor of ``mu I + G``, reused across solves."""

    def __init__(self, gramian, mu):
        if not mu > 0:
            raise ValueError(f"regularization mu must be > 0, got {mu}")
        self.mu = float(mu)
        G = gramian.matrix if isinstance(gramian, Gramian) else np.asarray(gramian, float)
        self._op = self.mu * np.eye(G.shape[0]) + G
        try:
            self._cho = la.cho_factor(self._op, lower=True)
        except la.LinAlgError as exc:
            w = np.linalg.eigvalsh(G)
            raise NumericalError(
                f"mu I + G is not positive definite (mu={mu}, eig(G) in "
                f"[{w[0]:.3e}, {w[-1]:.3e}])"
            ) from exc

    def solve(self, rhs):
        return la.cho_solve(self._cho, np.asarray(rhs, dtype=float))

    def norm(self):
        """``||(mu I + G)^{-1}||_2`` via the smallest eigenvalue of ``mu I + G``."""
        return 1.0 / float(np.linalg.eigvalsh(self._op)[0])


def regularized_solve(gramian, mu, rhs):
    """Solve ``(mu I + G) x = rhs``; ``||x|| <= ||rhs|| / mu`` for PSD ``G``."""
    return RegularizedInverse(gramian, mu).solve(rhs)


@dataclass(frozen=True, eq=False)
class SteeringProblem:
    """Target ``x_c = E x_c + int phi dW`` and regularization ``mu``.

    ``phi`` is either a constant field (shape ``(N,)``) or a per-node table
    (shape ``(m + 1, N)``) under the diagonal noise identification.
    """

    target_mean: np.ndarray
    mu: float
    phi: np.ndarray = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        a = np.array(self.target_mean, dtype=float)
        object.__setattr__(self, "target_mean", a)
        phi = np.zeros_like(a) if self.phi is None else np.array(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def affine(cls, mean, noise_coef, noise_mode, mu, n_modes):
        """Target ``mean + noise_coef * W_k(c) e_k`` with ``k = noise_mode`` (1-based)."""
        mean = np.broadcast_to(np.asarray(mean, dtype=float), (n_modes,)).copy()
        phi = np.zeros(n_modes)
        if noise_coef:
            if not 1 <= noise_mode <= n_modes:
                raise ShapeError(f"noise mode {noise_mode} outside 1..{n_modes}")
            phi[noise_mode - 1] = noise_coef
        return cls(mean, mu, phi)

    def with_mu(self, mu):
        return SteeringProblem(self.target_mean, mu, self.phi)

    def phi_table(self, grid):
        return np.broadcast_to(self.phi, (grid.steps + 1, self.target_mean.size))

    def phi_energy(self, grid):
        """``int_0^c ||phi(s)||^2 ds``."""
        return float(grid.trapezoid(np.sum(self.phi_table(grid) ** 2, axis=1)))

    def target_second_moment(self, grid, noise):
        """``E||x_c||^2 = ||E x_c||^2 + sum_n lambda_n int phi_n^2``."""
        phi2 = grid.trapezoid(self.phi_table(grid) ** 2, axis=0)
        return float(self.target_mean @ self.target_mean + noise.variances @ phi2)

    def realize(self, path):
        return self.target_mean + stochastic_integral(self.phi, path)


@dataclass(frozen=True, eq=False)
class ControlSignal:
    values: np.ndarray   # (m + 1, dim K), row j = u(s_j)
    bracket: np.ndarray  # terminal defect b
    steered: np.ndarray  # (mu I + G)^{-1} b

    def energy_profile(self):
        """``||u(s_j)||^2`` per node."""
        return np.sum(self.values**2, axis=1)


def nonlocal_value(model, grid, states):
    """``h(x) = int_0^c zeta(s, x(s)) ds`` by the trapezoid rule."""
    Z = eval_nonlinearity(model.nonlinearity, "zeta", grid.nodes[:, None], states)
    return grid.trapezoid(Z, axis=0)


def steering_bracket(problem, table, path, h_value, F, G, realized=None):
    """``x_c - R(c) h - int R(c-s) F ds - int R(c-s) G dW`` with ``x_c`` realized on ``path``.

    ``F`` or ``G`` may be ``None`` for a zero nonlinearity. ``realized`` skips
    recomputing ``x_c`` when the caller already has it.
    """
    m = table.grid.steps
    x_c = problem.realize(path) if realized is None else realized
    b = x_c - table.terminal * h_value
    if F is not None:
        b = b - det_convolution(table, F, m)
    if G is not None:
        b = b - ito_convolution(table, G, path, m)
    return b


def control_from_bracket(bracket, table, control_matrix, inverse):
    y = inverse.solve(bracket)
    u = (table.reversed_rows() * y) @ control_matrix
    return ControlSignal(u, bracket, y)


def synthesize_control(problem, table, model, states, path, inverse=None):
    """Steering control for the trajectory ``states`` (shape ``(m + 1, N)``).

    ``inverse`` is a :class:`RegularizedInverse` for ``problem.mu``; it is
    assembled from the model's Gramian when omitted.
    """
    grid = table.grid
    states = np.asarray(states, dtype=float)
    if states.shape != (grid.steps + 1, model.n_modes):
        raise ShapeError(f"trajectory has shape {states.shape}")
    if inverse is None:
        inverse = RegularizedInverse(assemble_gramian(table, model.control), problem.mu)
    col = grid.nodes[:, None]
    spec = model.nonlinearity
    F = None if spec.is_zero("f") else eval_nonlinearity(spec, "f", col, states)
    G = None if spec.is_zero("g") else eval_nonlinearity(spec, "g", col, states)
    h = nonlocal_value(model, grid, states)
    b = steering_bracket(problem, table, path, h, F, G)
    return control_from_bracket(b, table, model.control_matrix(), inverse)


def eval_Ku(problem, model, envelope, r, grid, M=None, M_C=None):
    """Second-moment bound ``K_u`` for the steering control on the ball ``B_r``.

    ``M`` defaults to 1 and ``M_C`` to the norm of the model's ``C``; pass the
    resolvent table's ``sup_norm`` for ``M`` when one is available.
    """
    if not r > 0:
        raise ValueError("ball radius r must be > 0")
    c = model.horizon
    trQ = model.noise.trace
    M = 1.0 if M is None else M
    M_C = model.control.norm(model.n_modes) if M_C is None else M_C
    nonlinear = (
        envelope.omega_zeta(r) * envelope.tau_zeta.l1_norm(c)
        + envelope.omega_f(r) * envelope.tau_f.l1_norm(c)
        + trQ * c * envelope.omega_g(r) * envelope.tau_g.l1_norm(c)
    )
    inner = (
        2.0 * problem.target_second_moment(grid, model.noise)
        + 2.0 * trQ * problem.phi_energy(grid)
        + c * M**2 * nonlinear
    )
    return 4.0 * M_C**2 / problem.mu**2 * M**2 * inner


@dataclass
class DecayReport:
    mu: np.ndarray
    delta: np.ndarray  # (len(mu), n_probes)
    nonincreasing: bool
    strictly_decreasing: bool
    final_ratio: float

    @property
    def passed(self):
        return self.nonincreasing and self.final_ratio < 0.1


def linear_ac_test(gramian, mu_list, probes):
    """Decay of ``||mu (mu I + G)^{-1} x||`` as ``mu`` decreases."""
    mu = np.asarray(mu_list, dtype=float)
    if mu.ndim != 1 or mu.size < 2 or np.any(np.diff(mu) >= 0) or np.any(mu <= 0):
        raise ValueError("mu_list must be positive and strictly decreasing")
    X = np.atleast_2d(np.asarray(probes, dtype=float))
    delta = np.empty((mu.size, X.shape[0]))
    for i, m in enumerate(mu):
        sol = RegularizedInverse(gramian, m).solve(X.T)
        delta[i] = m * np.linalg.norm(sol, axis=0)
    steps = np.diff(delta, axis=0)
    scale = np.maximum(delta[:-1], 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(delta[0] > 0, delta[-1] / np.maximum(delta[0], 1e-300), 1.0)
    return DecayReport(
        mu=mu,
        delta=delta,
        nonincreasing=bool(np.all(steps <= 1e-12 * scale)),
        strictly_decreasing=bool(np.all(steps < 0)),
        final_ratio=float(np.max(ratio)),
    )


def write_gramian_csv(gramian, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = gramian.n_modes
        w.writerow(["row"] + [f"col_{q + 1}" for q in range(n)])
        for p in range(n):
            w.writerow([f"row_{p + 1}"] + [f"{x:.17g}" for x in gramian.matrix[p]])


def write_decay_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "probe", "delta"])
        for i, m in enumerate(report.mu):
            for k, d in enumerate(report.delta[i]):
                w.writerow([f"{m:.17g}", k, f"{d:.17g}"])
