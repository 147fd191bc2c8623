"""Minimum-relative-entropy estimation of qubit states and weak Hamiltonians."""

__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    HermitianOp,
    StateParams,
    fidelity,
    herm_exp,
    herm_log,
    purity,
    relative_entropy,
    state_from_angles,
    trace_norm,
)
from .errors import MKEError  # noqa: E402
from .hamiltonian import estimate_hamiltonian, evolve, hamiltonian_distance  # noqa: E402
from .solvers import (  # noqa: E402
    MeasurementRecord,
    SolverConfig,
    gram_schmidt_pair,
    mke_estimate,
    mke_pair,
    normalize_observable,
    solve_approx,
    solve_approx_operator_form,
    solve_exact,
)
