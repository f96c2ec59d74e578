"""Multimodal spatial language maps: build, query and navigate voxel maps."""

from ._core import *  # noqa: F401,F403
from ._core import Error, __doc__  # noqa: F401

PRIMARY_DECAY_PER_M = 2.0
AUXILIARY_DECAY_PER_M = 0.2


def fuse(*heatmaps):
    """Element-wise product of equally shaped heatmap arrays."""
    if not heatmaps:
        raise ValueError("fuse needs at least one heatmap")
    out = heatmaps[0].copy()
    for h in heatmaps[1:]:
        if h.shape != out.shape:
            raise ValueError(f"shape mismatch: {h.shape} vs {out.shape}")
        out *= h
    return out
