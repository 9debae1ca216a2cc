"""sconclab: marginal semiconcave functions, Tonelli flows and Lax-Oleinik evolutions.

Submodules: ``tonelli`` (systems), ``semiconcave`` (marginal functions), ``flow`` (Hamiltonian and
variational flows), ``evolution`` (fundamental solution, Lax-Oleinik operators, regularity),
``pseudograph`` (phase-space clouds), ``topology`` (strata and paths), plus ``config``/``io``/``cli``.
"""

__version__ = "0.1.0"

from .errors import SconcError  # noqa: E402
from .grids import Grid  # noqa: E402
from .semiconcave import MarginalFunction, make_function  # noqa: E402
from .tonelli import TonelliSystem, make_system  # noqa: E402

__all__ = ["__version__", "SconcError", "Grid", "MarginalFunction", "make_function", "TonelliSystem", "make_system"]
