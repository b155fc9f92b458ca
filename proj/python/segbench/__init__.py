"""Left-atrium segmentation benchmark: metrics, quality, preprocessing and phantoms."""

from ._core import (
    Error,
    Mask,
    Volume,
    assess_quality,
    clahe_slicewise,
    correlate,
    dice,
    dilate,
    erode,
    evaluate_case,
    generate_phantom,
    hausdorff_mm,
    iou,
    largest_component,
    normalize_intensity,
    read_mask,
    read_nrrd,
    read_volume,
    stsd_mm,
    welch_ttest,
    write_nrrd,
)

__version__ = "0.1.0"
