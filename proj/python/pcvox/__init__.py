"""Point cloud geometry compression toolkit: octree codec, learned entropy
surrogate, and compression-oriented voxelization preprocessor."""

from ._core import (
    ContractViolation,
    IntegrityError,
    SurrogateModel,
    TruncationError,
    VoxNetModel,
    bce,
    bd_rate,
    d1_psnr,
    dequantize,
    estimate_bits,
    estimate_normals,
    morton_code,
    morton_decode,
    octree_decode,
    octree_encode,
    quantize,
    read_ply,
    synth_clouds,
    write_ply,
)

__all__ = [
    "ContractViolation",
    "IntegrityError",
    "SurrogateModel",
    "TruncationError",
    "VoxNetModel",
    "bce",
    "bd_rate",
    "d1_psnr",
    "dequantize",
    "estimate_bits",
    "estimate_normals",
    "morton_code",
    "morton_decode",
    "octree_decode",
    "octree_encode",
    "quantize",
    "read_ply",
    "synth_clouds",
    "write_ply",
]

__version__ = "0.1.0"
