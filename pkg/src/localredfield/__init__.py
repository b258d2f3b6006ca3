"""Local Redfield and local Lindblad master equations for open quantum chains."""

__version__ = "0.1.0"

from .bath import BathFamily, BathSpec, SpectralKind, spectral_function, w_derivatives
from .expansion import ExpansionMode, ExpansionPolicy, adhoc_u, local_u
from .experiments import Method, OpenSystem, bose_hubbard_reservoir, build_generator, xxz_two_bath
from .lindblad import (lambda_local, local_lindblad_generator, pseudo_lindblad_decompose,
                       standard_local_lindblad_generator)
from .models import BoseHubbardSpec, XxzSpec, bose_hubbard_chain, xxz_chain
from .operators import LatticeSpec, SparseOperator
from .redfield import LindbladGenerator, RedfieldGenerator, evolve, exact_redfield, exact_u, steady_state
from .trajectories import TrajectoryConfig, mcwf_run

__all__ = [
    "BathFamily", "BathSpec", "SpectralKind", "spectral_function", "w_derivatives",
    "ExpansionMode", "ExpansionPolicy", "adhoc_u", "local_u",
    "Method", "OpenSystem", "bose_hubbard_reservoir", "build_generator", "xxz_two_bath",
    "lambda_local", "local_lindblad_generator", "pseudo_lindblad_decompose",
    "standard_local_lindblad_generator",
    "BoseHubbardSpec", "XxzSpec", "bose_hubbard_chain", "xxz_chain",
    "LatticeSpec", "SparseOperator",
    "LindbladGenerator", "RedfieldGenerator", "evolve", "exact_redfield", "exact_u", "steady_state",
    "TrajectoryConfig", "mcwf_run",
]
