from .splits import (
    SplitSpec,
    build_disjoint_split,
    build_loso_split,
    load_split,
    save_split,
)
from .metrics import Metrics, compute_metrics, evaluate
from .data import clip_feature_vector, dataset_from_records, load_clip_frames
from .reports import (
    figure_confusion,
    figure_f1_bars,
    figure_loss_curve,
    write_confusion_csv,
    write_metrics_report,
    write_run_record,
)

__all__ = [
    "SplitSpec",
    "build_disjoint_split",
    "build_loso_split",
    "load_split",
    "save_split",
    "Metrics",
    "compute_metrics",
    "evaluate",
    "clip_feature_vector",
    "dataset_from_records",
    "load_clip_frames",
    "figure_confusion",
    "figure_f1_bars",
    "figure_loss_curve",
    "write_confusion_csv",
    "write_metrics_report",
    "write_run_record",
]
