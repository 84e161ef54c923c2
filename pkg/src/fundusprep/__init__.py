"""Retinal fundus image pre-processing toolkit."""

from .amplify import (
    AMPLIFY_METHODS,
    AmplifyMethod,
    MapVariant,
    ScoredResult,
    TransmissionMap,
    dark_channel,
    depth_map,
    pcar,
    pcar_candidates,
    pcar_clahe,
    recover_radiance,
    sharpen,
    solve_transmission,
)
from .erosion import ErosionParams, VesselMask, blend_vessel, choose_side, clean_image, load_mask
from .histops import ClaheParams, cgh, clahe_channel, clahe_rgb3, hist_equalize
from .image import (
    ColorSpace,
    ImageBuffer,
    RoiBox,
    center_crop_roi,
    convert_colorspace,
    embed_roi,
    extract_channel,
    load_image,
    luma,
    merge_channels,
    resize_lanczos,
    save_image,
    to_grayscale,
)
from .methods import METHOD_TAGS, MethodSettings, apply_method
from .metrics import ConfusionMatrix, MetricReport, build_cm, metrics, report_csv, report_table
from .pipeline import (
    DatasetManifest,
    ManifestEntry,
    augment,
    load_manifest,
    manifest_from_tree,
    preview_grid,
    run_batch,
)
from .restore import (
    DpfrParams,
    ReflectionModel,
    coarse_illumination,
    dpfrr,
    dpfrr_clahe,
    dpfrr_with_model,
    fine_illumination,
    scatter_suppression,
)

__version__ = "0.1.0"
