"""Kernelized local patch descriptors.

Patches are embedded through truncated Fourier feature maps of Von Mises
kernels over per-pixel attributes, sum-pooled into fixed-size descriptors
(polar, Cartesian, or their combination), and optionally post-processed by
learned whitening.  The package also ships the evaluation protocols
(verification FPR, matching/retrieval mAP, parameter and robustness sweeps)
and visualization tools for the underlying pixel similarity.
"""

from .descriptor import (
    CARTESIAN,
    COMBINED,
    POLAR,
    Descriptor,
    DescriptorConfig,
    describe,
    describe_batch,
    describe_cartesian,
    describe_combined,
    describe_polar,
    normalize,
)
from .errors import InputFormatError, NumericalError
from .featuremaps import (
    AttributeKernelSpec,
    FourierCoeffs,
    embed_array,
    embed_scalar,
    eval_kernel_truncated,
    vm_fourier_coeffs,
    vm_kernel_exact,
)
from .patch import (
    PatchAttributes,
    PixelAttributes,
    SyntheticTransform,
    apply_synthetic_transform,
    compute_gradients,
    pixel_attributes,
)
from .whitening import (
    WhiteningModel,
    estimate_stats,
    fit_attenuated,
    fit_pca_sqrt,
    fit_pca_whitening,
    fit_shrinkage,
    fit_supervised,
    intraclass_covariance,
)

__version__ = "0.1.0"
