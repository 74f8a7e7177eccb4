"""Dynamical-localisation workbench for the disordered XYZ spin-1/2 model."""

from ._version import __version__
from .bounds import (
    BoundInputs,
    BoundReport,
    c_of_s1,
    extension_constants,
    greens_series_bound,
    hurwitz_lerch_phi,
    incomplete_beta_b0,
    lemma1_transfer,
    lemma2_ceiling,
    localisation_length,
    sigma_b_min,
    theorem1_rhs,
)
from .configgraph import (
    CollapsedGraph,
    ConfigurationGraph,
    build_config_graph,
    distance,
    enumerate_simple_cycles_off,
    enumerate_simple_paths,
    export_edge_list,
    y_collapse,
)
from .dynamics import (
    CorrelationExperiment,
    DecayFit,
    SpectralData,
    default_time_grid,
    disorder_decay_experiment,
    evolution_flip_norm,
    fit_decay,
    initial_magnetisation,
    simulate_correlation,
    simulate_magnetisation,
    spectral_projector,
    sup_t_norm,
)
from .errors import (
    ConditioningError,
    ConstructionError,
    DivergenceError,
    DomainError,
    FitError,
    ParameterError,
    SingularityError,
    SizeError,
)
from .greens import (
    GreensBlock,
    PathSumEvaluator,
    diagonal_greens_pathsum,
    fractional_norm_mc,
    greens_instance_discrepancy,
    offdiagonal_greens_pathsum,
    resolvent_oracle,
    run_greens_verification,
    self_energy,
)
from .model import (
    ConfigPotentialStats,
    CouplingParams,
    DisorderRealization,
    PartitionedOperator,
    SpinLattice,
    SystemPartition,
    build_full_hamiltonian,
    build_lattice,
    child_seed,
    conditional_variance,
    configuration_potential,
    covariance_matrix,
    flip_block,
    make_partition,
    partition_operator,
    sample_disorder,
    spin_z_diagonal,
    static_split,
    zero_disorder,
)
from .observables import (
    CorrelationBound,
    MagnetisationBound,
    config_count_n,
    correlation_bounds,
    magnetisation_bounds,
    magnetisation_bounds_mixed,
    susceptibility_bound,
)
from .records import ExperimentRecord, read_record, write_record
