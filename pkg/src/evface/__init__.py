"""Synthetic event-camera face and eye datasets.

Pipeline: planar 6-DOF camera motion over a still image (:mod:`.geometry`),
DVS event simulation (:mod:`.simulator`), Temporal Binary Representation
frames (:mod:`.representation`), labelled dataset export (:mod:`.dataset`)
and detection metrics (:mod:`.metrics`). :mod:`.formats` holds the EVS1
event file format and the label/prediction line formats.
"""

__version__ = "0.1.0"

from .errors import EvfaceError
from .geometry import (
    Border,
    CameraPose,
    Intrinsics,
    MotionConfig,
    pose_to_homography,
    relative_homography,
    sample_trajectory,
    warp_image,
    warp_points,
)
from .simulator import (
    EVENT_DTYPE,
    Event,
    EventStream,
    SimConfig,
    simulate_events,
    simulate_sequence,
    stream_frames,
)
from .representation import (
    BinaryFrame,
    TbrConfig,
    TbrFrame,
    binarize_window,
    decode_tbr,
    encode_tbr,
    stream_encode,
)
from .formats import Box, Detection, read_events, write_events
from .dataset import AnnotationSet, BoxClassConfig, LandmarkSet, generate_sample
from .metrics import EvalConfig, MetricsReport, average_precision, evaluate, iou

__all__ = [
    "EvfaceError",
    "Border", "CameraPose", "Intrinsics", "MotionConfig", "pose_to_homography",
    "relative_homography", "sample_trajectory", "warp_image", "warp_points",
    "EVENT_DTYPE", "Event", "EventStream", "SimConfig", "simulate_events",
    "simulate_sequence", "stream_frames",
    "BinaryFrame", "TbrConfig", "TbrFrame", "binarize_window", "decode_tbr",
    "encode_tbr", "stream_encode",
    "Box", "Detection", "read_events", "write_events",
    "AnnotationSet", "BoxClassConfig", "LandmarkSet", "generate_sample",
    "EvalConfig", "MetricsReport", "average_precision", "evaluate", "iou",
]
