"""Universal inverse Radon transform toolkit."""

from .angular_support import AngularDomain, admissible, angular_mask, mask_sinogram
from .errors import CapabilityError, InputError, NumericError, RadonError
from .inversion import KernelSpec, ReconstructionField, decomposition_report, reconstruct
from .phantoms import PhantomSpec, Primitive, RasterGrid, SupportMask, eval_phantom, rasterize
from .radon import AngularGrid, RadialGrid, Sinogram, direct_radon_analytic, direct_radon_numeric

__all__ = [
    "AngularDomain",
    "AngularGrid",
    "CapabilityError",
    "InputError",
    "KernelSpec",
    "NumericError",
    "PhantomSpec",
    "Primitive",
    "RadialGrid",
    "RadonError",
    "RasterGrid",
    "ReconstructionField",
    "Sinogram",
    "SupportMask",
    "admissible",
    "angular_mask",
    "decomposition_report",
    "direct_radon_analytic",
    "direct_radon_numeric",
    "eval_phantom",
    "mask_sinogram",
    "rasterize",
    "reconstruct",
]
