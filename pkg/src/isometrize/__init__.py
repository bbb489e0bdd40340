"""Similarity of operators and representations to isometries and unitaries.

Averages of ``pi(g)* pi(g)`` over Cesaro windows or Folner sets give an
invariant positive form ``F``; ``F^{1/2}`` conjugates the operator (or
representation) to an isometric or unitary one.
"""

from .cesaro import (
    BoundsEstimate,
    CesaroState,
    SimilarityCertificate,
    cesaro_average,
    decay_check,
    eigen_unimodular_check,
    estimate_bounds,
    expansive_isometrize,
    invariant_limit,
    isometrize,
    k_condition_check,
    limit_gram,
    symmetric_average,
    sznagy_unitarize,
)
from .derivations import (
    DerivationMap,
    InnernessCertificate,
    build_pi_D,
    derivation_bound_scan,
    extract_inner,
    leibniz_check,
)
from .errors import *  # noqa: F401,F403
from .folner import (
    FiniteGroupTable,
    FolnerFamily,
    Heisenberg3,
    IntLattice,
    NatLattice,
    doubling_check,
    folner_ratio,
    folner_set,
    parse_group,
    sfc_ratio,
    standard_family,
    symmetrized,
    symmetry_check,
    tempelman_ratio,
)
from .representations import (
    FolnerGram,
    RepCertificate,
    Representation,
    bound_scan,
    cert_uniform_bound,
    folner_gram_pair,
    isometrize_semigroup_rep,
    rep_eval,
    symdiff_decay,
    translated_bound_check,
    unitarize_rep,
)

__version__ = "0.1.0"
