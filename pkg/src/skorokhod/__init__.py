"""Planar Skorokhod embeddings: Gross maps, their energies and exit-law sampling."""

from .conformal import (
    DomainReport,
    EnergyEstimate,
    PowerSeriesMap,
    area,
    boundary_trace,
    closed_form_energy,
    gross_map,
    isoperimetric_report,
    perimeter,
    polygon_map,
    read_map_csv,
    reflect_negate,
    rotate,
    skorokhod_energy,
    square_map,
    write_map_csv,
)
from .distributions import (
    Arcsine,
    Atomic,
    CdfTable,
    DistributionSpec,
    Empirical,
    Normal,
    QuantileFunction,
    TabulatedCdf,
    TwoPoint,
    Uniform,
    ValidationReport,
    empirical_from_samples,
    moments,
    quantile_from_cdf,
    require_valid,
    validate,
)
from .exceptions import (
    AliasingError,
    DivergentEnergyError,
    InvalidDistributionError,
    NoDensityError,
    QuadratureError,
    SkorokhodError,
    UnboundedSupportError,
)
from .montecarlo import (
    ExitBatch,
    KsReport,
    SquareDomain,
    estimate_mu,
    ks_distance,
    ks_two_sample,
    sample_exit_conformal,
    simulate_square_exit,
    verify_energy_dominance,
)
from .rearrangement import (
    SampledFunction,
    equimeasurable,
    monotone_equal_check,
    polya_szego_gap,
    rearrange_samples,
    rearranged_energy,
    rearranged_quantile,
    trace_rearrangement,
)
from .spectral import (
    FourierSeries,
    PeriodicSamples,
    QuadConfig,
    dft_series,
    energy_convergence_diagnostic,
    evaluate,
    gross_coefficients,
    hilbert_multiplier,
    kinetic_energy,
)

__version__ = "0.1.0"
