"""Point-charge electrodynamics with radiation reaction in 4D and 6D Minkowski space.

Conservation of energy-momentum and angular momentum is used throughout as the
check on equations of motion, radiated fluxes, two-charge interference, and the
behaviour of massless charges.
"""

from radreact.geom import (
    apply_tensor,
    metric,
    minkowski_dot,
    raise_first,
    rotation_to_axis,
    vector,
    wedge,
)
from radreact.worldline import (
    ParticleProps,
    RetardedData,
    Worldline,
    WorldlinePoint,
    retarded_data,
    wavefront_chart,
)

__all__ = [
    "ParticleProps",
    "RetardedData",
    "Worldline",
    "WorldlinePoint",
    "apply_tensor",
    "metric",
    "minkowski_dot",
    "raise_first",
    "retarded_data",
    "rotation_to_axis",
    "vector",
    "wavefront_chart",
    "wedge",
]

__version__ = "0.1.0"
