from .dynsys import integrate
from .dynsys import make_system
from .returnmap import build_first_return_map
from .returnmap import build_partial_return_map
from .section import SectionComponent
from .section import build_rho_series
from .version import SCHEMA_VERSION
from .version import TOOL_VERSION

__all__ = [
    "make_system",
    "integrate",
    "SectionComponent",
    "build_rho_series",
    "build_first_return_map",
    "build_partial_return_map",
    "SCHEMA_VERSION",
    "TOOL_VERSION",
]
