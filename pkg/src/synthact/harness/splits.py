"""Train/test split construction over dataset manifests.

Two criteria: leave-one-scene-out, where the held-out scene id defines the
test set, and factor-disjoint splits, where a video goes to test only when
it matches every held-out category, to train only when it matches none,
and is discarded otherwise (reported as a count) so no factor value leaks
across the boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..randomize import HumanoidShape


@dataclass(frozen=True)
class SplitSpec:
    train_ids: tuple
    test_ids: tuple
    criterion: dict
    discarded_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "train_ids", tuple(self.train_ids))
        object.__setattr__(self, "test_ids", tuple(self.test_ids))
        object.__setattr__(self, "discarded_ids", tuple(self.discarded_ids))
        groups = (set(self.train_ids), set(self.test_ids), set(self.discarded_ids))
        for ids, grp in zip((self.train_ids, self.test_ids, self.discarded_ids), groups):
            if len(ids) != len(grp):
                raise ValueError("split contains duplicate video ids")
        if groups[0] & groups[1] or groups[0] & groups[2] or groups[1] & groups[2]:
            raise ValueError("train, test, and discarded ids must be disjoint")

    def to_dict(self) -> dict:
        return {
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
            "discarded_ids": list(self.discarded_ids),
            "criterion": self.criterion,
        }

    @staticmethod
    def from_dict(d: dict) -> "SplitSpec":
        return SplitSpec(tuple(d["train_ids"]), tuple(d["test_ids"]),
                         dict(d["criterion"]), tuple(d.get("discarded_ids", ())))


def save_split(path: str, split: SplitSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(split.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_split(path: str) -> SplitSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return SplitSpec.from_dict(json.load(fh))


def build_loso_split(records: list, leave_out_scene: str) -> SplitSpec:
    """Test = every video of one scene; train = everything else."""
    scenes = sorted({r["scene_id"] for r in records})
    if leave_out_scene not in scenes:
        raise ValueError(
            f"scene {leave_out_scene!r} not in manifest; known scenes: {scenes}")
    test = [r["video_id"] for r in records if r["scene_id"] == leave_out_scene]
    train = [r["video_id"] for r in records if r["scene_id"] != leave_out_scene]
    if not train:
        raise ValueError(f"holding out scene {leave_out_scene!r} leaves no training videos")
    return SplitSpec(train, test, {"kind": "loso", "scene_id": leave_out_scene})


def _record_shape_id(record: dict) -> str:
    return HumanoidShape.from_dict(record["nuisances"]["humanoid"]).shape_id()


def _texture_pool_ids(record: dict):
    n = record["nuisances"]
    return {n["sky"]["pool_id"], n["floor"]["pool_id"], n["body"]["pool_id"]}


def build_disjoint_split(records: list, hold_azimuth: tuple | None = None,
                         hold_textures=None, hold_humanoids=None) -> SplitSpec:
    """Split so no held-out factor value appears on the train side.

    hold_azimuth is a [lo, hi) band in degrees; hold_textures a set of
    texture pool ids (a video matches if any of its sky/floor/body slots
    uses one); hold_humanoids a set of body shape ids. Test videos match
    every given category, train videos match none, and videos matching
    only some are discarded (their count lands in the criterion record).
    """
    categories = []
    if hold_azimuth is not None:
        lo, hi = float(hold_azimuth[0]), float(hold_azimuth[1])
        if not lo < hi:
            raise ValueError(f"azimuth band [{lo}, {hi}) is empty")
        categories.append(("azimuth",
                           lambda r: lo <= r["nuisances"]["camera"]["azimuth_deg"] < hi))
    if hold_textures is not None:
        tex = set(hold_textures)
        if not tex:
            raise ValueError("hold_textures given but empty")
        categories.append(("texture", lambda r: bool(_texture_pool_ids(r) & tex)))
    if hold_humanoids is not None:
        bodies = set(hold_humanoids)
        if not bodies:
            raise ValueError("hold_humanoids given but empty")
        categories.append(("humanoid", lambda r: _record_shape_id(r) in bodies))
    if not categories:
        raise ValueError("no hold-out categories given")

    hits = {name: 0 for name, _ in categories}
    train, test, discarded = [], [], []
    for r in records:
        matches = []
        for name, pred in categories:
            m = bool(pred(r))
            matches.append(m)
            hits[name] += m
        if all(matches):
            test.append(r["video_id"])
        elif not any(matches):
            train.append(r["video_id"])
        else:
            discarded.append(r["video_id"])
    for name, count in hits.items():
        if count == 0:
            raise ValueError(f"held-out {name} values match no manifest records")
    if not test:
        raise ValueError("hold-out leaves an empty test set")
    if not train:
        raise ValueError("hold-out leaves an empty training set")

    criterion = {"kind": "disjoint", "discarded": len(discarded)}
    if hold_azimuth is not None:
        criterion["azimuth_band"] = [float(hold_azimuth[0]), float(hold_azimuth[1])]
    if hold_textures is not None:
        criterion["texture_ids"] = sorted(set(hold_textures))
    if hold_humanoids is not None:
        criterion["humanoid_ids"] = sorted(set(hold_humanoids))
    return SplitSpec(train, test, criterion, discarded)
