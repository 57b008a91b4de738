"""Maximum independent sets with Rydberg-atom annealing and QAOA, simulated
exactly on the independent-set subspace of unit-disk graphs."""

from .anneal import extract_t_lz, hardness_sweep, run_qaa
from .exactmis import branch_and_bound_mis, brute_force_mis
from .qaoa import QAOAParams, heuristic_schedule_optimize, qaoa_state
from .subspace import build_is_basis, build_projected_hamiltonian
from .udgraph import Graph, generate_random_udgraph

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "QAOAParams",
    "branch_and_bound_mis",
    "brute_force_mis",
    "build_is_basis",
    "build_projected_hamiltonian",
    "extract_t_lz",
    "generate_random_udgraph",
    "hardness_sweep",
    "heuristic_schedule_optimize",
    "qaoa_state",
    "run_qaa",
]
