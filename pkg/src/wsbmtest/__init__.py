"""Two-sample testing of community memberships for weighted stochastic block models."""

from .errors import (
    ClusteringError,
    DegenerateTestError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    UnsupportedLawError,
    ValidationError,
    WsbmError,
)
from .model import (
    BlockModelSpec,
    Membership,
    WeightLaw,
    block_mean_matrix,
    check_weight_matrix,
    expectation_matrix,
    renyi_half_divergence,
    renyi_region_statistic,
    sample_graph,
    snr,
)
from .spectral import (
    SpectralTopK,
    alignment_matrix,
    linear_term,
    procrustes,
    scaled_subspace_statistic,
    sin_theta_frobenius,
    top_k_spectrum,
)
from .inference import (
    MomentEstimates,
    TestReport,
    block_imbalance_zeta,
    estimate_moments,
    expected_sin_theta_sq,
    gaussian_two_sided_p,
    null_moments_one_sample,
    null_moments_two_sample,
    oracle_moments,
    two_sample_test,
)
from .clustering import (
    ClusteringResult,
    confusion_matrix,
    hamming_distance,
    plant_alternative,
    spectral_cluster,
)
from .experiments import (
    CellResult,
    ExperimentGrid,
    ExperimentResult,
    grid_from_dict,
    load_grid,
    plant_power_alternative,
    run_clt_diag,
    run_experiment,
    run_expansion_diag,
    run_power,
    run_type1,
)
from .graphio import (
    EdgeListDocument,
    ingest_edge_list,
    parse_edge_list,
    read_graph_csv,
    read_membership_tsv,
    write_edge_list_tsv,
    write_graph_csv,
    write_membership_tsv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "WsbmError", "ValidationError", "DomainError", "DimensionError",
    "UnsupportedLawError", "InsufficientDataError", "ClusteringError",
    "DegenerateTestError",
    # model
    "WeightLaw", "Membership", "BlockModelSpec", "sample_graph",
    "expectation_matrix", "block_mean_matrix", "renyi_half_divergence",
    "renyi_region_statistic", "snr", "check_weight_matrix",
    # spectral
    "SpectralTopK", "top_k_spectrum", "procrustes", "alignment_matrix",
    "sin_theta_frobenius", "scaled_subspace_statistic", "linear_term",
    # inference
    "MomentEstimates", "TestReport", "null_moments_two_sample",
    "null_moments_one_sample", "oracle_moments", "estimate_moments",
    "two_sample_test", "block_imbalance_zeta", "expected_sin_theta_sq",
    "gaussian_two_sided_p",
    # clustering
    "ClusteringResult", "spectral_cluster", "confusion_matrix",
    "hamming_distance", "plant_alternative",
    # experiments
    "ExperimentGrid", "CellResult", "ExperimentResult", "run_experiment",
    "run_type1", "run_power", "run_clt_diag", "run_expansion_diag",
    "plant_power_alternative", "grid_from_dict", "load_grid",
    # io
    "EdgeListDocument", "parse_edge_list", "ingest_edge_list",
    "read_graph_csv", "write_graph_csv", "write_edge_list_tsv",
    "write_membership_tsv", "read_membership_tsv",
]
