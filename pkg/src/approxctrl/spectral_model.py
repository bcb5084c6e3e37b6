"""Truncated spectral model of a controlled stochastic memory equation.

All computation happens in coefficient space with respect to the eigenbasis
``e_n`` of a self-adjoint operator ``A`` with ``A e_n = a_n e_n``. A state is
an array of ``N`` mode coefficients, a control is an array of control
coefficients, and the memory operator is ``Pi(s) = theta(s) A``.

The nonlinearities ``f``, ``g`` and ``zeta`` are applied mode-wise to the
coefficients. This keeps every pointwise growth estimate intact without a
collocation transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = [
    "MemoryKernel",
    "ControlOperatorSpec",
    "QWienerSpec",
    "NonlinearitySpec",
    "PowerWeight",
    "AffineEnvelope",
    "GrowthEnvelope",
    "SpectralModel",
    "apply_A",
    "apply_C",
    "apply_C_adjoint",
    "eval_nonlinearity",
    "heat_memory_model",
    "scalar_model",
]


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


# Memory kernel ---------------------------------------------------------------
@dataclass(frozen=True)
class MemoryKernel:
    """Scalar memory weight ``theta``; ``exponential`` is ``beta * exp(-alpha s)``."""

    family: str = "zero"
    amplitude: float = 0.0
    decay: float = 1.0

    def __post_init__(self):
        if self.family not in ("zero", "exponential"):
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.family == "exponential":
            if not self.decay > 0:
                raise ConfigError(f"kernel decay rate must be > 0, got {self.decay}")
            if not np.isfinite(self.amplitude):
                raise ConfigError("kernel amplitude must be finite")

    @classmethod
    def zero(cls):
        return cls("zero", 0.0, 1.0)

    @classmethod
    def exponential(cls, amplitude=1.0, decay=1.0):
        return cls("exponential", float(amplitude), float(decay))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "zero":
            return np.zeros_like(s)
        return self.amplitude * np.exp(-self.decay * s)

    def l1_norm(self):
        if self.family == "zero":
            return 0.0
        return abs(self.amplitude) / self.decay


# Control operator ------------------------------------------------------------
@dataclass(frozen=True)
class ControlOperatorSpec:
    """Bounded control operator ``C``.

    ``identity``
        Control space equals state space, ``C = I``.
    ``coupled``
        Control coefficients ``(u_2, ..., u_N)``; ``(Cu)_1 = 2 u_2`` and
        ``(Cu)_n = u_n`` for ``n >= 2``. The adjoint is
        ``(C*v)_2 = 2 v_1 + v_2`` and ``(C*v)_n = v_n`` for ``n >= 3``.
    """

    kind: str = "identity"

    def __post_init__(self):
        if self.kind not in ("identity", "coupled"):
            raise ConfigError(f"unknown control kind {self.kind!r}")

    def control_dim(self, n_modes):
        return n_modes if self.kind == "identity" else n_modes - 1

    def matrix(self, n_modes):
        """Dense ``N x dim(K)`` matrix of ``C``."""
        if self.kind == "identity":
            return np.eye(n_modes)
        if n_modes < 2:
            raise ShapeError("coupled control needs at least 2 modes")
        mat = np.zeros((n_modes, n_modes - 1))
        mat[1:, :] = np.eye(n_modes - 1)
        mat[0, 0] = 2.0
        return mat

    def norm(self, n_modes):
        """Operator norm ``M_C``."""
        return float(np.linalg.norm(self.matrix(n_modes), 2))


# Noise -----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class QWienerSpec:
    """Diagonal trace-class covariance with mode variances ``lambda_k``."""

    variances: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.variances)
        if lam.ndim != 1 or lam.size == 0:
            raise ConfigError("noise variances must be a non-empty 1-d list")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise ConfigError("noise variances must be finite and > 0")
        object.__setattr__(self, "variances", lam)

    @classmethod
    def inverse_square(cls, n_modes, scale=1.0):
        k = np.arange(1, n_modes + 1, dtype=float)
        return cls(scale / k**2)

    @property
    def trace(self):
        return float(np.sum(self.variances))

    def __len__(self):
        return self.variances.size


# Nonlinearities --------------------------------------------------------------
Family = Union[str, Callable]


def _f_example(s, v):
    return s * v / (2.0 * (1.0 + v * v))


def _g_example(s, v):
    return v / ((1.0 + np.exp(s)) * (1.0 + v * v))


def _zeta_example(s, v):
    # 2 s^2 cos(v / s), continuously extended by 0 at s = 0
    s = np.broadcast_to(s, np.broadcast_shapes(np.shape(s), np.shape(v)))
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    return np.where(pos, 2.0 * s * s * np.cos(v / safe), 0.0)


_EXAMPLES = {"f": _f_example, "g": _g_example, "zeta": _zeta_example}


@dataclass(frozen=True)
class NonlinearitySpec:
    """Families for ``f``, ``g`` and ``zeta``.

    Each entry is ``"zero"``, ``"bounded"`` or a callable
    ``(s, v) -> array`` that broadcasts like the built-ins and is bounded on
    bounded sets.
    """

    f: Family = "zero"
    g: Family = "zero"
    zeta: Family = "zero"

    def __post_init__(self):
        for name in ("f", "g", "zeta"):
            fam = getattr(self, name)
            if not callable(fam) and fam not in ("zero", "bounded"):
                raise ConfigError(f"unknown {name} family {fam!r}")

    @classmethod
    def bounded(cls):
        return cls("bounded", "bounded", "bounded")

    def family(self, which):
        fam = getattr(self, which)
        return "custom" if callable(fam) else fam

    def is_zero(self, which):
        return self.family(which) == "zero"


# Growth envelopes ------------------------------------------------------------
@dataclass(frozen=True)
class PowerWeight:
    """Integrable weight ``tau(s) = coef * s**power``."""

    coef: float = 0.0
    power: float = 0.0

    def __call__(self, s):
        return self.coef * np.asarray(s, dtype=float) ** self.power

    def l1_norm(self, horizon):
        return abs(self.coef) * horizon ** (self.power + 1) / (self.power + 1)


@dataclass(frozen=True)
class AffineEnvelope:
    """Nondecreasing envelope ``Omega(r) = const + slope * r``."""

    const: float = 0.0
    slope: float = 1.0

    def __post_init__(self):
        if self.const < 0 or self.slope < 0:
            raise ConfigError("envelope coefficients must be nonnegative")

    def __call__(self, r):
        return self.const + self.slope * r


@dataclass(frozen=True)
class GrowthEnvelope:
    """Bounds ``||f(s, v)||^2 <= tau_f(s) * omega_f(||v||^2)`` (likewise g, zeta)."""

    tau_f: PowerWeight = field(default_factory=PowerWeight)
    tau_g: PowerWeight = field(default_factory=PowerWeight)
    tau_zeta: PowerWeight = field(default_factory=PowerWeight)
    omega_f: AffineEnvelope = field(default_factory=AffineEnvelope)
    omega_g: AffineEnvelope = field(default_factory=AffineEnvelope)
    omega_zeta: AffineEnvelope = field(default_factory=AffineEnvelope)

    @classmethod
    def stated(cls):
        """The displayed example estimates: s^2/4, 1/4, s^2 with linear envelopes."""
        return cls(
            tau_f=PowerWeight(0.25, 2.0),
            tau_g=PowerWeight(0.25, 0.0),
            tau_zeta=PowerWeight(1.0, 2.0),
        )

    @classmethod
    def for_model(cls, model):
        """Envelopes that provably hold for the model's mode-wise families.

        ``f`` and ``g`` use the stated estimates. The cosine ``zeta`` is not
        controlled by ``||v||^2`` at ``v = 0``; it obeys
        ``||zeta(s, v)||^2 <= 4 N s^4`` instead, encoded as a constant
        envelope. Custom families have no known envelope.
        """
        spec = model.nonlinearity
        stated = cls.stated()
        parts = {}
        for which, tau in (("f", stated.tau_f), ("g", stated.tau_g)):
            fam = spec.family(which)
            if fam == "zero":
                parts[f"tau_{which}"] = PowerWeight(0.0, 0.0)
            elif fam == "bounded":
                parts[f"tau_{which}"] = tau
            else:
                raise ConfigError(f"no growth envelope known for custom {which}")
        fam = spec.family("zeta")
        if fam == "zero":
            parts["tau_zeta"] = PowerWeight(0.0, 0.0)
        elif fam == "bounded":
            parts["tau_zeta"] = PowerWeight(4.0 * model.n_modes, 4.0)
            parts["omega_zeta"] = AffineEnvelope(1.0, 0.0)
        else:
            raise ConfigError("no growth envelope known for custom zeta")
        return cls(**parts)


# Model -----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SpectralModel:
    eigenvalues: np.ndarray
    horizon: float = 1.0
    kernel: MemoryKernel = field(default_factory=MemoryKernel)
    control: ControlOperatorSpec = field(default_factory=ControlOperatorSpec)
    noise: QWienerSpec = None
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    basis_label: str = "sqrt(2/pi) sin(n x)"

    def __post_init__(self):
        a = _frozen(self.eigenvalues)
        if a.ndim != 1 or a.size == 0:
            raise ConfigError("eigenvalues must be a non-empty 1-d list")
        if np.any(a >= 0):
            raise ConfigError("eigenvalues must be strictly negative")
        if np.any(np.diff(a) > 0):
            raise ConfigError("eigenvalues must be non-increasing")
        if self.control.kind == "coupled" and a.size < 2:
            raise ConfigError("coupled control couples modes 1 and 2; need N >= 2")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be > 0, got {self.horizon}")
        object.__setattr__(self, "eigenvalues", a)
        if self.noise is None:
            object.__setattr__(self, "noise", QWienerSpec.inverse_square(a.size))
        if len(self.noise) != a.size:
            raise ShapeError(
                f"diagonal noise identification needs {a.size} noise modes, "
                f"got {len(self.noise)}"
            )

    @property
    def n_modes(self):
        return self.eigenvalues.size

    @property
    def control_dim(self):
        return self.control.control_dim(self.n_modes)

    def control_matrix(self):
        return self.control.matrix(self.n_modes)


def _check_dim(v, n, what="field"):
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (n,):
        raise ShapeError(f"{what} has trailing dimension {v.shape[-1:]}, expected ({n},)")
    return v


def apply_A(model, v):
    """Diagonal action ``(A v)_n = a_n v_n``."""
    v = _check_dim(v, model.n_modes)
    return model.eigenvalues * v


def apply_C(spec, u, n_modes):
    u = _check_dim(u, spec.control_dim(n_modes), "control")
    return u @ spec.matrix(n_modes).T


def apply_C_adjoint(spec, v, n_modes):
    v = _check_dim(v, n_modes)
    return v @ spec.matrix(n_modes)


def eval_nonlinearity(spec, which, s, v):
    """Evaluate ``f``, ``g`` or ``zeta`` mode-wise.

    ``s`` broadcasts against the leading axes of ``v``; pass a column
    ``s[:, None]`` with ``v`` of shape ``(m + 1, N)`` to evaluate a whole
    trajectory at once.
    """
    if which not in _EXAMPLES:
        raise ValueError(f"which must be one of f, g, zeta; got {which!r}")
    fam = getattr(spec, which)
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    if callable(fam):
        out = np.asarray(fam(s, v), dtype=float)
        return np.broadcast_to(out, np.broadcast_shapes(s.shape, v.shape)).copy()
    if fam == "zero":
        return np.zeros(np.broadcast_shapes(s.shape, v.shape))
    return _EXAMPLES[which](s, v)


# Catalog ---------------------------------------------------------------------
def heat_memory_model(n_modes=8, horizon=1.0, kernel=None, noise=None,
                        nonlinearity=None):
    """Heat equation with memory: ``a_n = -n^2``, coupled control, bounded nonlinearities."""
    n = np.arange(1, n_modes + 1, dtype=float)
    return SpectralModel(
        eigenvalues=-(n**2),
        horizon=horizon,
        kernel=MemoryKernel.exponential(1.0, 1.0) if kernel is None else kernel,
        control=ControlOperatorSpec("coupled"),
        noise=QWienerSpec.inverse_square(n_modes) if noise is None else noise,
        nonlinearity=NonlinearitySpec.bounded() if nonlinearity is None else nonlinearity,
    )


def scalar_model(a=-1.0, horizon=1.0, kernel=None, nonlinearity=None, variance=1.0):
    """One-mode linear model with identity control."""
    return SpectralModel(
        eigenvalues=[a],
        horizon=horizon,
        kernel=MemoryKernel.zero() if kernel is None else kernel,
        control=ControlOperatorSpec("identity"),
        noise=QWienerSpec([variance]),
        nonlinearity=NonlinearitySpec() if nonlinearity is None else nonlinearity,
    )
