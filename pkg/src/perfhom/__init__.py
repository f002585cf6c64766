"""Homogenization of reaction-diffusion in perforated domains: meshes and
finite elements, strange terms and cell problems, microscopic ladders,
rearrangements, shape derivatives and discrete spectral checks."""

from .errors import PerfhomError
from .kinetics import parse_kinetics

__version__ = "0.1.0"

__all__ = ["PerfhomError", "parse_kinetics", "__version__"]
