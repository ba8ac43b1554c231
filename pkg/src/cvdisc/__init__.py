"""Key rates of discretely modulated continuous-variable QKD with displaced
thermal states: truncated Fock numerics, the Gaussian normal form of the
eavesdropper's state, Shannon and Holevo information, and security
boundaries."""

__version__ = "0.1.0"

from .boundary import (
    ChannelProfile,
    TemperatureConstraint,
    mu_from_temperature,
    numeric_boundary,
    optimal_signal,
    scenario_at,
    weak_boundary,
)
from .constellation import Constellation, build_constellation, project_quadrature, shannon_entropy
from .errors import (
    ConfigError,
    CVDiscError,
    DegenerateScenarioError,
    NumericError,
    ParameterError,
    StateValidityError,
    TruncationError,
)
from .rates import (
    RatePoint,
    ScenarioConfig,
    classicality_diagnostic,
    holevo_bound,
    key_rate,
    mutual_information,
    rate_sweep,
    weak_limit_coefficient,
)
