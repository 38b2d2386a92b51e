"""Traffic-context-aware copy-paste augmentation for rare-object detection."""

from .bank import Bank, InstanceCutout, load_bank, make_cutout, resize_cutout, sample_cutout
from .blending import BlendConfig, alpha_composite, feather_alpha, poisson_blend, solve_poisson_system
from .camera import (
    CameraExtrinsics,
    CameraIntrinsics,
    column_from_lateral,
    distance_from_row,
    pixel_height,
    row_from_distance,
)
from .color import RegionStats, adapt_cutout_hsv, hsv_to_rgb, region_stats, rgb_to_hsv
from .config import PipelineConfig, parse_config
from .context import (
    PlacementVerdict,
    discover_bundles,
    SceneContext,
    is_on_freespace,
    lane_columns_at_row,
    load_context,
    make_context,
    occlusion_fraction,
    validate_placement,
)
from .estimator import ContextCopyPaste
from .imaging import load_rgb
from .placement import AugmentedSample, Placement, augment_image, image_stream, propose_placement, sample_depth

__version__ = "0.1.0"
