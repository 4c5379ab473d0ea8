from .palette import Palette, DEFAULT_PALETTE
from .layout import LayoutSpec, LayoutSamplerConfig, sample_layout, render, instance_masks
from .detector import DetectedBox, detect, DEFAULT_TOLERANCE
from .archive import write_scene_archive, read_scene_archive
