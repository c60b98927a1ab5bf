"""
slepiankit: Slepian functions and Slepian wavelets on the sphere and on meshes
"""


from ._version import version as __version__
from .functions import FUNCTIONS
from .harmonic import (
    QuadratureGrid,
    SampledField,
    SphericalCoefficients,
    forward_sht,
    inverse_sht,
    make_grid,
)
from .mesh import Mesh, load_mesh, mesh_basis, mesh_laplacian, mesh_slepian
from .region import LatLonBox, MaskRaster, PolarCap, parse_region, rasterize
from .sifting import sift_convolve, translate
from .slepian import (
    SlepianBasis,
    eigendecompose,
    forward_slepian,
    inverse_slepian,
    slepian_basis,
)
from .wavelets import TilingParams, analysis, build_tiling, synthesis

__all__ = (
    "FUNCTIONS",
    "LatLonBox",
    "MaskRaster",
    "Mesh",
    "PolarCap",
    "QuadratureGrid",
    "SampledField",
    "SlepianBasis",
    "SphericalCoefficients",
    "TilingParams",
    "__version__",
    "analysis",
    "build_tiling",
    "eigendecompose",
    "forward_sht",
    "forward_slepian",
    "inverse_sht",
    "inverse_slepian",
    "load_mesh",
    "make_grid",
    "mesh_basis",
    "mesh_laplacian",
    "mesh_slepian",
    "parse_region",
    "rasterize",
    "sift_convolve",
    "slepian_basis",
    "synthesis",
    "translate",
)
