"""Foreground segmentation with overlapping DCT blocks and a classifier cascade."""
from ._accel import backend_name
from .config import Config, load_config
from .descriptor import BlockGrid, make_grid, dct_block, describe_frame
from .model import BackgroundModel, BlockModel, train, save_model, load_model
from .cascade import BlockLabel, CascadeStats, classify_block, classify_frame, cosdist
from .mask import integrate, precompute_totals
from .reinit import ReinitState, observe, rebuild
from .segment import Segmenter, RunReport, segment_sequence
from .metrics import score_mask, score_tracking, assign, blobs_from_mask, track_blobs

__version__ = "0.1.0"
