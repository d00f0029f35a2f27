from .errors import AgtrackError
from .core import BBox, Detection, TrackState, Tracklet, iou, center, \
    iou_matrix
from .flow import GrayFrame, FlowConfig, build_pyramid, track_point, \
    predict_tracklet_bbox
from .roifeat import FeatureMap, EmbedParams, roi_align, extract_features
from .agnn import AgnnParams, initial_similarity, prior_edges
from .model import TrackModel
from .loss import LossWeights, build_masks, bmse
from .train import LrSchedule, OptimState, FramePairSample, lr_at, \
    adam_step, train_epoch, fit
from .assoc import AssignmentResult, hungarian_max, match
from .tracker import TrackerConfig, TrackletStore, Tracker, step, \
    run_sequence
from .moteval import MetricCounts, MetricsSummary, frame_match, mota, idf1, \
    mt_ml, idsw_count, evaluate
from .config import Config, load_config
from . import agnn, interface


__all__ = [
    "AgtrackError",                                       # From errors
    "BBox", "Detection", "TrackState", "Tracklet",        # From core
    "iou", "center", "iou_matrix",
    "GrayFrame", "FlowConfig", "build_pyramid",           # From flow
    "track_point", "predict_tracklet_bbox",
    "FeatureMap", "EmbedParams", "roi_align",             # From roifeat
    "extract_features",
    "AgnnParams", "initial_similarity", "prior_edges",    # From agnn
    "TrackModel",                                         # From model
    "LossWeights", "build_masks", "bmse",                 # From loss
    "LrSchedule", "OptimState", "FramePairSample",        # From train
    "lr_at", "adam_step", "train_epoch", "fit",
    "AssignmentResult", "hungarian_max", "match",         # From assoc
    "TrackerConfig", "TrackletStore", "Tracker",          # From tracker
    "step", "run_sequence",
    "MetricCounts", "MetricsSummary", "frame_match",      # From moteval
    "mota", "idf1", "mt_ml", "idsw_count", "evaluate",
    "Config", "load_config",                              # From config
    "agnn", "interface"
]
