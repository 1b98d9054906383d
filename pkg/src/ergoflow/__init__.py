"""Work extraction from ensembles of identical quantum systems and the entanglement it requires."""

from .bounds import (
    LambdaVector,
    SeparabilityReport,
    bipartitions,
    classify,
    entropy_vector_pure,
    equal_term_lambda,
    flip_states,
    lambda_at,
    lambda_peak,
    partial_transpose,
    ppt_min_eigenvalue,
    separability_index,
    threshold_ratio_exact,
    threshold_ratio_paper,
)
from .ensemble import (
    CapacityError,
    CoherentPairState,
    DiagonalState,
    EnsembleShape,
    ProductState,
    QuditHamiltonian,
    differing_sites,
    energies_of_shape,
    energy_of_label,
    flat_of_label,
    format_label,
    label_of_flat,
    parse_label,
    product_state,
)
from .entropy import relative_entropy, shannon_entropy
from .paths import (
    CertificateError,
    PathPlan,
    SeparableDecomposition,
    TranspositionStep,
    direct_plan,
    evolve_step,
    hybrid_plan,
    indirect_plan,
    ladder_plan,
    plan_power_report,
    separability_certificate,
)
from .scenarios import (
    asymptotic_work_bound,
    entanglement_condition,
    figure1_scan,
    figure1_slice,
    microcanonical,
    microcanonical_plan,
    passive_ensemble,
    thermal_match,
    typical_exchange_plan,
    typical_summary,
)
from .work import WorkReport, apply_swap, is_passive, optimal_permutation, total_energy, work_of_swap

__version__ = "0.1.0"
