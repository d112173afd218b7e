"""qfock: desk-scale numerics for truncated q-deformed Fock spaces
with a two-sided (modular) deformation parameter.

The package builds truncated deformed Fock spaces over a small letter
alphabet, realizes creation/annihilation, Wick, and modular operators as
block maps between letter-multiset sectors, and verifies the computable
identities, norm bounds, convergence sequences, and invertibility
thresholds of the underlying operator-algebraic model at desk scale.
"""

from .qcomb import (
    q_int,
    q_factorial,
    q_binomial,
    d_family,
    bound_constants,
    inversions,
    crossings,
    wick_coefficients,
    pair_partition_moment,
)
from .fock import ModelParams, FockSpace, FockVector, build_space
from . import ops
from . import limits

__version__ = "0.1.0"
