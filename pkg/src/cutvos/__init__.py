"""Multi-shot video object segmentation toolkit.

Library surface for the most commonly scripted pieces; the full toolkit is
exposed through the `cutvos` command-line interface.
"""

__version__ = "0.1.0"

from . import errors
from .dataset import (
    DatasetStats,
    FrameSequenceSample,
    ShotAnnotation,
    ShotSegment,
    TransitionType,
    compute_stats,
    load_dataset_index,
    load_sample,
    load_shot_annotation,
)
from .imgops import (
    AffineParams,
    AffineRanges,
    affine_transform,
    copy_foreground,
    gradual_translation,
    hflip,
    make_rng,
    spawn_rng,
)
from .metrics import (
    EvalReport,
    TransitionAccuracyReport,
    boundary_f,
    evaluate_track,
    iou,
    jt,
    shot_detection_pr,
    transition_accuracy,
)
from .shotdetect import (
    DetectorConfig,
    HistogramScorer,
    detect_transitions,
    histogram_scorer,
    scores_to_shots,
)
from .localcues import (
    FeatureGrid,
    LocalCueSet,
    RegionPartition,
    build_mask_graph,
    extract_local_cues,
    mst_partition,
    partition_object,
    region_centers,
)
from .tma import DonorPool, TmaConfig, TmaOutcome, apply_tma, sample_same_video_segment
from .harness import (
    BankSet,
    HarnessConfig,
    MemoryItem,
    TrackerTrace,
    make_oracle_segmenter,
    propagate_last_segmenter,
    run_tracker,
)

__all__ = [name for name in dir() if not name.startswith("_")]
