"""Bridge from rendered datasets on disk to in-memory feature matrices."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from ..learn import DomainDataset, FeatureConfig, extract_features


def load_clip_frames(root: str, record: dict) -> list:
    """All frames of one manifest record as (H, W, 3) uint8 arrays."""
    clip_dir = os.path.join(root, record["frames_dir"])
    ext = record.get("frame_format", "png")
    frames = []
    for k in range(record["n_frames"]):
        path = os.path.join(clip_dir, f"frame_{k:05d}.{ext}")
        if not os.path.exists(path):
            raise FileNotFoundError(f"{record['video_id']}: missing frame {path}")
        with Image.open(path) as im:
            frames.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
    return frames


def clip_feature_vector(root: str, record: dict,
                        config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    return extract_features(load_clip_frames(root, record), config)


def dataset_from_records(root: str, records: list, classes: list, domain: str,
                         config: FeatureConfig = FeatureConfig(),
                         ids=None) -> DomainDataset:
    """Feature matrix + labels for the given manifest records.

    ids, when given, selects a subset (order follows the manifest). Actions
    must all appear in classes.
    """
    index = {c: i for i, c in enumerate(classes)}
    chosen = records if ids is None else [r for r in records if r["video_id"] in set(ids)]
    if ids is not None and len(chosen) != len(set(ids)):
        missing = sorted(set(ids) - {r["video_id"] for r in chosen})
        raise ValueError(f"split ids not in manifest: {missing[:5]}")
    if not chosen:
        raise ValueError("no videos selected")
    feats, labels = [], []
    for r in chosen:
        if r["action"] not in index:
            raise ValueError(
                f"{r['video_id']}: action {r['action']!r} not in class list {classes}")
        feats.append(clip_feature_vector(root, r, config))
        labels.append(index[r["action"]])
    return DomainDataset(np.stack(feats), np.array(labels), domain)
