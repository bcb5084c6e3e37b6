"""Approximate controllability of truncated stochastic integro-differential
systems with nonlocal initial data.

Modules
-------
spectral_model  model data: eigenvalues, memory kernel, control operator, noise
resolvent       per-mode resolvent tables and axiom diagnostics
stochastic      Q-Wiener paths and stochastic/deterministic convolutions
control         Gramian, regularized inverse and steering control
solver          successive approximation of the controlled mild solution
experiment      mu-sweeps and freezing studies
cli             command-line entry point
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ApproxCtrlError,
    ConfigError,
    ConvergenceError,
    DivergenceError,
    NumericalError,
    ShapeError,
)
from .spectral_model import (  # noqa: E402
    ControlOperatorSpec,
    GrowthEnvelope,
    MemoryKernel,
    NonlinearitySpec,
    QWienerSpec,
    SpectralModel,
    heat_memory_model,
    scalar_model,
)
from .resolvent import ResolventTable, TimeGrid, build_table, check_axioms  # noqa: E402
from .stochastic import sample_path  # noqa: E402
from .control import (  # noqa: E402
    RegularizedInverse,
    SteeringProblem,
    assemble_gramian,
    eval_Ku,
    regularized_solve,
)
from .solver import SolveOptions, feasibility_check, picard_solve  # noqa: E402
from .experiment import SweepConfig, TargetSpec, run_gamma_study, run_sweep  # noqa: E402
