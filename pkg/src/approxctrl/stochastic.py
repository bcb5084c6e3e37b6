"""Q-Wiener paths and the two convolution integrals of the mild solution.

Noise enters through the diagonal identification ``K_noise = N``: mode ``n``
of ``g(s, v) dW`` is ``g_n(s, v) sqrt(lambda_n) d gamma_n``. Path increments
are stored already scaled by ``sqrt(lambda_n)``.

Each (path, mode) pair draws from its own Philox substream keyed by
``SeedSequence(seed, spawn_key=(path, mode))``, so paths are reproducible and
independent of evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

__all__ = [
    "GENERATOR",
    "QWienerPath",
    "sample_path",
    "zero_path",
    "ito_convolution",
    "det_convolution",
    "ito_convolution_all",
    "det_convolution_all",
    "stochastic_integral",
    "write_path_csv",
]

GENERATOR = "numpy.Philox4x64/SeedSequence(seed, spawn_key=(path, mode))/v1"


@dataclass(frozen=True, eq=False)
class QWienerPath:
    grid: object
    increments: np.ndarray  # (m, K): increments[j - 1, k] = W_k(s_j) - W_k(s_{j-1})
    seed: int
    index: int = 0

    @property
    def n_modes(self):
        return self.increments.shape[1]

    def values(self):
        """``W_k(s_j)`` as an ``(m + 1, K)`` array, ``W(0) = 0``."""
        out = np.zeros((self.increments.shape[0] + 1, self.n_modes))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def terminal(self):
        return self.values()[-1]


def sample_path(noise, grid, seed, index=0):
    """Draw one path; increments are ``Normal(0, lambda_k * dt)``."""
    lam = np.asarray(noise.variances)
    inc = np.empty((grid.steps, lam.size))
    for k in range(lam.size):
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(index), k))
        rng = np.random.Generator(np.random.Philox(ss))
        inc[:, k] = rng.standard_normal(grid.steps)
    inc *= np.sqrt(lam * grid.dt)
    inc.flags.writeable = False
    return QWienerPath(grid, inc, int(seed), int(index))


def zero_path(grid, n_modes):
    """Noise-free path used by deterministic runs."""
    inc = np.zeros((grid.steps, n_modes))
    inc.flags.writeable = False
    return QWienerPath(grid, inc, 0, 0)


def _check(table, values, name):
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != table.n_modes:
        raise ShapeError(f"{name} has shape {values.shape}, expected (m + 1, {table.n_modes})")
    return values


def ito_convolution(table, integrand, path, j_end):
    """``sum_{i < j_end} R(s_{j_end} - s_i) G(s_i) dW(i + 1)`` (left endpoint)."""
    G = _check(table, integrand, "integrand")
    if path.n_modes != table.n_modes:
        raise ShapeError(
            f"noise has {path.n_modes} modes but the state has {table.n_modes}; "
            "the diagonal identification needs them equal"
        )
    if j_end == 0:
        return np.zeros(table.n_modes)
    lags = table.values[:, j_end:0:-1].T  # r(s_{j_end} - s_i), i = 0..j_end-1
    return np.sum(lags * G[:j_end] * path.increments[:j_end], axis=0)


def det_convolution(table, integrand, j_end):
    """Trapezoid rule for ``int_0^{s_{j_end}} R(s_{j_end} - t) F(t) dt``."""
    F = _check(table, integrand, "integrand")
    if j_end == 0:
        return np.zeros(table.n_modes)
    w = table.values[:, j_end::-1].T * F[: j_end + 1]
    return table.grid.dt * (w.sum(axis=0) - 0.5 * (w[0] + w[-1]))


def _causal(table, x):
    """``y_j = sum_{i <= j} r(s_{j - i}) x_i`` for every node, via FFT."""
    nfft, spec = table.spectrum
    m1 = x.shape[0]
    xs = np.fft.rfft(x.T, n=nfft, axis=1)
    return np.fft.irfft(spec * xs, n=nfft, axis=1)[:, :m1].T


def det_convolution_all(table, integrand):
    """:func:`det_convolution` evaluated at every node at once."""
    F = _check(table, integrand, "integrand")
    full = _causal(table, F)
    r = table.values.T
    return table.grid.dt * (full - 0.5 * (r * F[0] + r[0] * F))


def ito_convolution_all(table, integrand, path):
    """:func:`ito_convolution` evaluated at every node at once."""
    G = _check(table, integrand, "integrand")
    x = np.zeros_like(G)
    x[:-1] = G[:-1] * path.increments
    return _causal(table, x) - table.values[:, 0] * x


def stochastic_integral(phi, path):
    """``int_0^c phi dW`` with the left-endpoint rule (no resolvent)."""
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (path.grid.steps + 1, path.n_modes))
    terms = phi[:-1] * path.increments
    return np.cumsum(terms, axis=0)[-1]


def write_path_csv(path, filename):
    """Debug dump: node, then ``W_k(s_j)`` per noise mode."""
    W = path.values()
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma"] + [f"W_{k + 1}" for k in range(path.n_modes)])
        for s, row in zip(path.grid.nodes, W):
            w.writerow([f"{s:.17g}"] + [f"{x:.17g}" for x in row])
