"""Energy-saving unilateral approximation of a Wiener process.

Optimal concave majorants, Groeneboom's majorant statistics, adaptive pursuit
strategies and the oscillator behind their optimal energy constant.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DomainError,
    IntegrationError,
    MalformedInputError,
    NoStationaryDensityError,
    NumericalFailure,
    OracleError,
    PreconditionError,
)
from .paths import GridSpec, SamplePath, brownian_scaling, replication_seed, sample_wiener, to_ou  # noqa: E402
from .majorant import (  # noqa: E402
    MajorantDecomposition,
    PolylineFunction,
    concave_majorant,
    energy,
    optimal_unilateral_majorant,
    qp_oracle_min_energy,
    tangent_from_point,
)
