"""Active-learning design of layered optical stacks: transfer-matrix optics,
a factorization-machine surrogate, QUBO solvers and a statevector QAOA."""

from .errors import *  # noqa: F401,F403
from .materials import (  # noqa: F401
    AIR,
    BinaryEncoding,
    IncidenceCondition,
    Layer,
    LayerStack,
    Material,
    SpectralGrid,
    builtin_material,
    decode,
    load_dispersion,
    refractive_index_at,
)

__version__ = "0.1.0"
