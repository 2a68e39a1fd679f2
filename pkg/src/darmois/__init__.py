"""Skitovich-Darmois toolkit for products of R, T, Z and Z(n).

Model LCA groups and their duals, build characteristic functions of
Gaussian and Gaussian-times-signed-measure families, and check or solve
the functional equation that encodes independence of two linear forms.
"""

from .charfn import (
    CharFn,
    ClosedFormCharFn,
    PdReport,
    SignedPi,
    TabulatedCharFn,
    convolve,
    gaussian_charfn,
    point_mass,
    reflect,
    signed_pi_charfn,
    symmetrize,
    tabulate,
    validate_positive_definite,
)
from .embedding import LocalizedLattice, MixedElement, embed_f, rational_coordinates
from .exceptions import (
    DarmoisError,
    DecompositionError,
    GroupMismatchError,
    InadmissibleParametersError,
    InvariantViolationError,
    NotPositiveDefiniteError,
    OutOfGridError,
)
from .finite import FiniteInstance, SolutionRecord, classify, solve
from .groups import (
    Annihilator,
    Automorphism,
    DoubledSubgroup,
    DualTable,
    FullGroup,
    GroupElement,
    KernelOf,
    LcaGroup,
    Trivial,
    adjoint,
    annihilator,
    dual,
    dual_grid,
    finite_difference,
    pair,
)
from .sampling import EmpiricalCharFn, IndependenceReport, Sampler, independence_test, sample
from .sd import (
    CosetDecomposer,
    CosetDecomposition,
    SdInstance,
    SdReport,
    check_m5,
    extract_quadratic_form,
    lemma7_residual,
    lemma9_decompose,
    pexider_fit,
    sd_residual,
)
from .theorem3 import (
    ReductionTrace,
    Theorem3Params,
    compatible_form,
    construct_pair,
    reduce,
    verify_characterization,
)

__version__ = "0.1.0"
