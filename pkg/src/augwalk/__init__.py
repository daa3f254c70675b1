"""Random walks on augmented partition trees of compact metric measure spaces.

Build index trees over IFS attractors or weighted point clouds, augment
them with horizontal edges, run the natural reversible walk with return
ratio lambda, and compute the induced potential theory: hitting laws,
visiting/Martin/Naim kernels, effective resistances, nonlocal energy
forms and the critical exponents of the induced Besov-type domains.
"""

__version__ = "0.1.0"

from .models import ModelSpec, Similitude, builtin_model, load_model, resolve_model
from .partition import IndexTree, build_ifs_tree, build_net_tree, build_tree, verify_partition
from .augment import (
    AugmentedTree,
    GeodesicPath,
    HyperbolicityReport,
    ball_volume,
    boundary_gromov_product,
    build_augmented_tree,
    canonical_geodesic,
    geodesic_peak_measure,
    graph_distance,
    gromov_metric,
    gromov_product,
    hyperbolicity_report,
)
from .network import Network, build_nrw, isoperimetry_profile, return_ratio, transition_prob
from .potential import (
    KernelEstimate,
    WalkPath,
    ever_visit,
    green,
    hitting_distribution,
    martin_kernel,
    naim_kernel,
    sample_hitting_counts,
    simulate_walk,
    visit_vector,
)
from .reduction import reduce_resistance
from .resistance import (
    CriticalSearchResult,
    ResistanceCurve,
    beta_from_lambda,
    classify_curve,
    critical_lambda_sharp,
    critical_lambda_star,
    effective_resistance,
    graph_effective_resistance,
    level_resistance,
    limit_resistance,
    variational_minimizer,
)
from .energy import (
    EnergyReport,
    SampledFunction,
    besov_seminorm,
    comparability_report,
    graph_energy,
    harmonic_extension,
    sample_function,
    trace,
    upper_dimension,
)

__all__ = [name for name in dir() if not name.startswith("_")]
