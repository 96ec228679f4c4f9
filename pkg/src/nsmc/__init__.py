"""n-sphere Monte Carlo: volumes and integrals from extents along random directions."""

__version__ = "0.1.0"

from .analysis import (DensityBounds, ExtentDensity, density_bounds, moment_bounds,
                       moment_ratio, numeric_moment, predicted_relative_error,
                       sample_count_bound, unit_sphere_area, unit_sphere_volume)
from .errors import (ConfigError, DomainError, IllConditionedWarning,
                     IntegrandEvaluationError, NSMCError, RecentreError,
                     UnboundedBodyError)
from .estimators import (Estimate, RadialIntegrand, StoppingRule, estimate_integral,
                         estimate_volume, estimate_volume_multivalued,
                         radial_partial_integral, recentre_reference)
from .geometry import (Cube, DensityBody, Ellipsoid, MembershipBody, SectorBody, Shell,
                       Sphere, body_from_config, extent_cube, extent_ellipsoid,
                       extent_from_membership, extent_sphere, extents_multivalued)
from .sampling import DirectionStream, antithetic_pair, sample_direction, worker_streams

__all__ = [
    "ConfigError", "Cube", "DensityBody", "DensityBounds", "DirectionStream", "DomainError",
    "Ellipsoid", "Estimate", "ExtentDensity", "IllConditionedWarning",
    "IntegrandEvaluationError", "MembershipBody", "NSMCError", "RadialIntegrand",
    "RecentreError", "SectorBody", "Shell", "Sphere", "StoppingRule", "UnboundedBodyError",
    "antithetic_pair", "body_from_config", "density_bounds", "estimate_integral",
    "estimate_volume", "estimate_volume_multivalued", "extent_cube", "extent_ellipsoid",
    "extent_from_membership", "extent_sphere", "extents_multivalued", "moment_bounds",
    "moment_ratio", "numeric_moment", "predicted_relative_error", "radial_partial_integral",
    "recentre_reference", "sample_count_bound", "sample_direction", "unit_sphere_area",
    "unit_sphere_volume", "worker_streams",
]
