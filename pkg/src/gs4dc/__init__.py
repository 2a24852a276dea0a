"""gs4dc: multi-rate lossy-lossless codec for deformable-3DGS dynamic scenes.

The pipeline quantizes canonical Gaussians (fixed point + vector-quantized
spherical harmonics) and the Hexplane voxel pyramid, then entropy codes the
quantized content with learned conditional models over a bit-exact range
coder. Everything a decoder needs ships inside one container file.
"""

import os

# Honor GS4D_THREADS before any BLAS gets loaded via numpy.
_threads = os.environ.get("GS4D_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)
del os, _threads

__version__ = "0.1.0"

from . import errors  # noqa: E402,F401
