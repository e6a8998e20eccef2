"""Core flow/image plumbing: types, file formats, warping, metrics, LK flow."""

from .io import (
    FLO_MAGIC,
    frame_name,
    list_flo,
    list_frames,
    read_flo,
    read_ppm,
    read_video,
    write_flo,
    write_ppm,
    write_video,
)
from .lucas_kanade import estimate_flow
from .metrics import (
    PSNR_CAP,
    endpoint_error,
    flow_metrics,
    image_metrics,
    phase_correlation,
    psnr,
    ssim,
)
from .ops import bilinear_sample, flow_to_color, gaussian_blur, resize, warp_array, warp_backward
from .types import FlowField, ImageBuffer, MetricReport

__all__ = [
    "FLO_MAGIC",
    "PSNR_CAP",
    "FlowField",
    "ImageBuffer",
    "MetricReport",
    "bilinear_sample",
    "endpoint_error",
    "estimate_flow",
    "flow_metrics",
    "flow_to_color",
    "frame_name",
    "gaussian_blur",
    "image_metrics",
    "list_flo",
    "list_frames",
    "phase_correlation",
    "psnr",
    "read_flo",
    "read_ppm",
    "read_video",
    "ssim",
    "warp_array",
    "warp_backward",
    "write_flo",
    "write_ppm",
    "write_video",
]
