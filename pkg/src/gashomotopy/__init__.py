"""Stability-preserving homotopies between GAS dynamical systems.

Fields are described by ``FieldDescription``; ``homotopies`` builds paths
between them, each carrying a per-s Lyapunov pair, and ``lyapunov`` turns a
path into a sampled ``Certificate``.
"""
from ._backend import BACKEND
from .core import ClassKFn, FieldDescription, LyapunovPair, Regularity, quadratic_pair, sqrt_gauge
from .errors import GasHomotopyError
from .homotopies import HomotopyPath, concatenate, gradient_interpolation, reverse, straight_line
from .integrate import DEFAULT_CONFIG, IntegratorConfig, Trajectory, integrate
from .lyapunov import Certificate, check_decrease_grid, check_path, check_traj_decrease
from .normalize import make_normalizer

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Certificate",
    "ClassKFn",
    "DEFAULT_CONFIG",
    "FieldDescription",
    "GasHomotopyError",
    "HomotopyPath",
    "IntegratorConfig",
    "LyapunovPair",
    "Regularity",
    "Trajectory",
    "check_decrease_grid",
    "check_path",
    "check_traj_decrease",
    "concatenate",
    "gradient_interpolation",
    "integrate",
    "make_normalizer",
    "quadratic_pair",
    "reverse",
    "sqrt_gauge",
    "straight_line",
]
