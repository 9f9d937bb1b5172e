"""Hyperspectral XRT dimensionality-reduction toolkit."""

from xrumap._core import (  # noqa: F401
    XrConfigError,
    XrDataError,
    XrNumericalError,
    load_cube,
    save_cube,
    white_normalize,
    fuse_beer_lambert,
    avg_pool2d,
    flatten_pixels,
    PcaModel,
    pca_fit,
    NmfModel,
    nmf_fit,
    UmapModel,
    umap_fit,
    EncoderNet,
    train_parametric,
    s_score,
    sh_score,
    iou,
    dice,
    mutual_information,
    trustworthiness,
    synth_dataset,
)

__all__ = [
    "XrConfigError",
    "XrDataError",
    "XrNumericalError",
    "load_cube",
    "save_cube",
    "white_normalize",
    "fuse_beer_lambert",
    "avg_pool2d",
    "flatten_pixels",
    "PcaModel",
    "pca_fit",
    "NmfModel",
    "nmf_fit",
    "UmapModel",
    "umap_fit",
    "EncoderNet",
    "train_parametric",
    "s_score",
    "sh_score",
    "iou",
    "dice",
    "mutual_information",
    "trustworthiness",
    "synth_dataset",
]
