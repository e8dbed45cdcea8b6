"""Channel-image denoising for massive-MIMO VLC (C++ core)."""

from ._core import (
    ArrayGrid,
    DomainError,
    FormatError,
    GeometryError,
    MmseModel,
    Model,
    NumericalError,
    ShapeError,
    VlcScene,
    add_awgn,
    build_channel_matrix,
    channel_gain,
    concentrator_gain,
    fit_mmse,
    init_model,
    lambertian_order,
    load_checkpoint,
    load_mmse,
    matrix_to_image,
    pixel_shuffle,
    pixel_unshuffle,
    psnr,
    radiant_intensity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
