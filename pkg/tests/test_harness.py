import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthact.cli import main as cli_main
from synthact.genmodel import (
    GenerationConfig,
    builtin_library,
    generate_dataset,
    pseudo_real_config,
)
from synthact.harness import (
    Metrics,
    SplitSpec,
    build_disjoint_split,
    build_loso_split,
    compute_metrics,
    dataset_from_records,
    evaluate,
    figure_confusion,
    figure_f1_bars,
    figure_loss_curve,
    load_split,
    save_split,
    write_confusion_csv,
    write_metrics_report,
    write_run_record,
)
from synthact.learn import DomainDataset, init_classifier
from synthact.randomize import HumanoidShape, sample_humanoid, NuisanceConfig
from synthact.rng import derive_stream


def fake_record(video_id, scene="s0", azimuth=90.0, sky=0, floor=1, body=0,
                action="wave", humanoid=None):
    if humanoid is None:
        humanoid, _ = sample_humanoid(NuisanceConfig(), derive_stream(5, 5))
    return {
        "video_id": video_id,
        "action": action,
        "scene_id": scene,
        "nuisances": {
            "camera": {"distance": 3.0, "azimuth_deg": azimuth, "elevation_deg": 20.0},
            "sky": {"kind": "noise", "pool_id": sky, "params": None},
            "floor": {"kind": "checker", "pool_id": floor, "params": None},
            "body": {"kind": "checker", "pool_id": body, "params": None},
            "humanoid": humanoid.to_dict(),
        },
    }


class TestLosoSplit:
    def records(self):
        return ([fake_record(f"a{i}", scene="a") for i in range(3)]
                + [fake_record(f"b{i}", scene="b") for i in range(2)]
                + [fake_record(f"c{i}", scene="c") for i in range(4)])

    def test_partition(self):
        split = build_loso_split(self.records(), "c")
        assert sorted(split.test_ids) == ["c0", "c1", "c2", "c3"]
        assert sorted(split.train_ids) == ["a0", "a1", "a2", "b0", "b1"]
        assert split.discarded_ids == ()
        assert split.criterion == {"kind": "loso", "scene_id": "c"}

    def test_unknown_scene_lists_known(self):
        with pytest.raises(ValueError, match=r"'z' not in manifest.*\['a', 'b', 'c'\]"):
            build_loso_split(self.records(), "z")

    def test_single_scene_cannot_split(self):
        recs = [fake_record(f"v{i}", scene="only") for i in range(3)]
        with pytest.raises(ValueError, match="no training videos"):
            build_loso_split(recs, "only")


class TestDisjointSplit:
    def test_azimuth_band_partitions_cleanly(self):
        recs = [fake_record(f"v{i}", azimuth=float(i)) for i in range(0, 360, 10)]
        split = build_disjoint_split(recs, hold_azimuth=(270.0, 360.0))
        assert len(split.test_ids) == 9  # 270..350
        assert len(split.train_ids) == 27
        assert split.discarded_ids == ()
        test_az = [r["nuisances"]["camera"]["azimuth_deg"] for r in recs
                   if r["video_id"] in split.test_ids]
        assert min(test_az) >= 270.0

    def test_band_is_half_open(self):
        recs = [fake_record("lo", azimuth=90.0), fake_record("hi", azimuth=180.0),
                fake_record("out", azimuth=200.0)]
        split = build_disjoint_split(recs, hold_azimuth=(90.0, 180.0))
        assert split.test_ids == ("lo",)
        assert sorted(split.train_ids) == ["hi", "out"]

    def test_texture_hold_out_checks_all_slots(self):
        recs = [fake_record("v0", sky=3, floor=0, body=1),
                fake_record("v1", sky=0, floor=3, body=1),
                fake_record("v2", sky=0, floor=1, body=0)]
        split = build_disjoint_split(recs, hold_textures={3})
        assert sorted(split.test_ids) == ["v0", "v1"]
        assert split.train_ids == ("v2",)

    def test_partial_matches_discarded_with_count(self):
        recs = [
            fake_record("both", azimuth=300.0, sky=3),
            fake_record("az_only", azimuth=310.0, sky=0),
            fake_record("tex_only", azimuth=10.0, sky=3),
            fake_record("neither", azimuth=20.0, sky=0),
        ]
        split = build_disjoint_split(recs, hold_azimuth=(270.0, 360.0),
                                     hold_textures={3})
        assert split.test_ids == ("both",)
        assert split.train_ids == ("neither",)
        assert sorted(split.discarded_ids) == ["az_only", "tex_only"]
        assert split.criterion["discarded"] == 2

    def test_humanoid_hold_out(self):
        h1, _ = sample_humanoid(NuisanceConfig(), derive_stream(1, 1))
        h2, _ = sample_humanoid(NuisanceConfig(), derive_stream(1, 2))
        recs = [fake_record("v0", humanoid=h1), fake_record("v1", humanoid=h2)]
        split = build_disjoint_split(recs, hold_humanoids={h1.shape_id()})
        assert split.test_ids == ("v0",)
        assert split.train_ids == ("v1",)

    def test_hold_out_absent_from_manifest(self):
        recs = [fake_record("v0", azimuth=10.0), fake_record("v1", azimuth=20.0)]
        with pytest.raises(ValueError, match="azimuth.*match no manifest"):
            build_disjoint_split(recs, hold_azimuth=(180.0, 270.0))

    def test_no_categories_rejected(self):
        with pytest.raises(ValueError, match="no hold-out"):
            build_disjoint_split([fake_record("v0")])

    def test_everything_held_out_rejected(self):
        recs = [fake_record(f"v{i}", azimuth=30.0 + i) for i in range(3)]
        with pytest.raises(ValueError, match="empty training"):
            build_disjoint_split(recs, hold_azimuth=(0.0, 360.0))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 359.99), st.integers(0, 3)),
                    min_size=4, max_size=40))
    def test_partition_property(self, draws):
        recs = [fake_record(f"v{i}", azimuth=az, sky=tex)
                for i, (az, tex) in enumerate(draws)]
        try:
            split = build_disjoint_split(recs, hold_azimuth=(180.0, 360.0),
                                         hold_textures={2, 3})
        except ValueError:
            return  # degenerate draw: a side came out empty or a hold missed
        buckets = (set(split.train_ids), set(split.test_ids), set(split.discarded_ids))
        assert buckets[0] | buckets[1] | buckets[2] == {r["video_id"] for r in recs}
        assert not (buckets[0] & buckets[1])
        assert all(r["nuisances"]["camera"]["azimuth_deg"] < 180.0
                   for r in recs if r["video_id"] in buckets[0])


class TestSplitSpec:
    def test_roundtrip(self, tmp_path):
        split = SplitSpec(("a", "b"), ("c",), {"kind": "loso", "scene_id": "x"}, ("d",))
        path = tmp_path / "split.json"
        save_split(str(path), split)
        assert load_split(str(path)) == split

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="disjoint"):
            SplitSpec(("a", "b"), ("b",), {})

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            SplitSpec(("a", "a"), ("b",), {})


class TestMetrics:
    def test_perfect_predictions(self):
        m = compute_metrics([0, 1, 2, 1], [0, 1, 2, 1], ["a", "b", "c"])
        assert m.accuracy == 1.0
        assert np.all(m.f1 == 1.0)
        assert m.undefined_f1 == []

    def test_hand_counted_two_class(self):
        # class 0: TP=3 FP=1 FN=1 -> P = R = F1 = 0.75
        y_true = [0, 0, 0, 0, 1, 1, 1]
        y_pred = [0, 0, 0, 1, 0, 1, 1]
        m = compute_metrics(y_true, y_pred, ["pos", "neg"])
        assert m.precision[0] == pytest.approx(0.75)
        assert m.recall[0] == pytest.approx(0.75)
        assert m.f1[0] == pytest.approx(0.75)
        assert m.accuracy == pytest.approx(5 / 7)

    def test_confusion_rows_are_true_counts(self):
        rng = np.random.default_rng(3)
        y_true = rng.integers(0, 4, 200)
        y_pred = rng.integers(0, 4, 200)
        m = compute_metrics(y_true, y_pred, list("abcd"))
        assert np.array_equal(m.confusion.sum(axis=1), np.bincount(y_true, minlength=4))
        assert m.accuracy == np.trace(m.confusion) / 200

    def test_absent_class_flagged(self):
        m = compute_metrics([0, 0, 1], [0, 0, 1], ["a", "b", "ghost"])
        assert m.undefined_f1 == ["ghost"]
        assert m.f1[2] == 0.0

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            compute_metrics([0, 3], [0, 1], ["a", "b"])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            compute_metrics([], [], ["a"])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)),
                    min_size=1, max_size=60))
    def test_f1_harmonic_identity(self, pairs):
        y_true = [p[0] for p in pairs]
        y_pred = [p[1] for p in pairs]
        m = compute_metrics(y_true, y_pred, ["a", "b", "c"])
        for i in range(3):
            tp = sum(1 for t, p in pairs if t == i and p == i)
            fp = sum(1 for t, p in pairs if t != i and p == i)
            fn = sum(1 for t, p in pairs if t == i and p != i)
            prec = tp / (tp + fp) if tp + fp else 0.0
            rec = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            assert m.precision[i] == pytest.approx(prec, abs=1e-12)
            assert m.recall[i] == pytest.approx(rec, abs=1e-12)
            assert m.f1[i] == pytest.approx(f1, abs=1e-12)
        assert m.accuracy == pytest.approx(
            sum(1 for t, p in pairs if t == p) / len(pairs), abs=1e-15)

    def test_evaluate_label_space_mismatch(self):
        model = init_classifier(4, ["a", "b"], np.random.default_rng(0), 3, 3)
        data = DomainDataset(np.zeros((3, 4)), np.array([0, 1, 2]), "real")
        with pytest.raises(ValueError, match="outside the model"):
            evaluate(model, data)

    def test_evaluate_runs_end_to_end(self):
        rng = np.random.default_rng(1)
        model = init_classifier(4, ["a", "b"], rng, 3, 3)
        data = DomainDataset(rng.normal(size=(10, 4)),
                             rng.integers(0, 2, 10), "real")
        m = evaluate(model, data)
        assert m.confusion.sum() == 10
        assert 0.0 <= m.accuracy <= 1.0


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinyset")
    cfg = GenerationConfig(
        master_seed=77, videos_per_class=3, classes=("wave", "squat"),
        nuisances=pseudo_real_config(), out_root=str(root),
        n_frames=8, width=64, height=48, domain="pseudo-real")
    records = generate_dataset(cfg, builtin_library())
    return str(root), records


class TestDataLoading:
    def test_features_from_disk(self, tiny_dataset):
        root, records = tiny_dataset
        ds = dataset_from_records(root, records, ["squat", "wave"], "real")
        assert ds.features.shape == (6, 1536)
        assert sorted(ds.labels.tolist()) == [0, 0, 0, 1, 1, 1]

    def test_id_subset_and_order(self, tiny_dataset):
        root, records = tiny_dataset
        pick = [records[4]["video_id"], records[1]["video_id"]]
        ds = dataset_from_records(root, records, ["squat", "wave"], "real", ids=pick)
        assert len(ds) == 2

    def test_missing_id_rejected(self, tiny_dataset):
        root, records = tiny_dataset
        with pytest.raises(ValueError, match="not in manifest"):
            dataset_from_records(root, records, ["squat", "wave"], "real",
                                 ids=["nope-00000"])

    def test_unknown_action_rejected(self, tiny_dataset):
        root, records = tiny_dataset
        with pytest.raises(ValueError, match="not in class list"):
            dataset_from_records(root, records, ["squat"], "real")


class TestReports:
    def metrics(self):
        return compute_metrics([0, 0, 1, 1, 1], [0, 1, 1, 1, 0], ["walk", "wave"])

    def test_report_csv_shape(self, tmp_path):
        path = tmp_path / "report.csv"
        write_metrics_report(str(path), self.metrics())
        lines = path.read_text().splitlines()
        assert lines[0] == "class,precision,recall,f1"
        assert len(lines) == 4  # header + 2 classes + summary
        last = lines[-1].split(",")
        assert last[0] == "overall"
        assert float(last[1]) == pytest.approx(3 / 5, abs=1e-6)
        assert float(last[1]) == float(last[2]) == float(last[3])

    def test_confusion_csv(self, tmp_path):
        path = tmp_path / "conf.csv"
        write_confusion_csv(str(path), self.metrics())
        lines = path.read_text().splitlines()
        assert lines[0] == "true\\pred,walk,wave"
        assert lines[1] == "walk,1,1"
        assert lines[2] == "wave,1,2"

    def test_figures_written(self, tmp_path):
        m = self.metrics()
        for name, fn in (("conf.png", figure_confusion), ("f1.png", figure_f1_bars)):
            fn(str(tmp_path / name), m)
            assert (tmp_path / name).stat().st_size > 500
        rows = [(i, "pretrain" if i < 5 else "finetune", 1.0 / (i + 1), -1.3 + 0.01 * i)
                for i in range(10)]
        figure_loss_curve(str(tmp_path / "loss.png"), rows)
        assert (tmp_path / "loss.png").stat().st_size > 500

    def test_run_record(self, tmp_path):
        path = tmp_path / "run.json"
        rec = write_run_record(str(path), "train", {"lr": 0.05, "epochs": 3}, seed=9)
        on_disk = json.loads(path.read_text())
        assert on_disk["command"] == "train"
        assert on_disk["seed"] == 9
        assert on_disk["config_hash"] == rec["config_hash"]
        rec2 = write_run_record(str(tmp_path / "run2.json"), "train",
                                {"epochs": 3, "lr": 0.05}, seed=9)
        assert rec2["config_hash"] == rec["config_hash"]  # key order irrelevant


class TestCli:
    def test_full_pipeline(self, tmp_path, tiny_dataset):
        root, records = tiny_dataset
        scene = records[0]["scene_id"]
        split_path = tmp_path / "split.json"
        rc = cli_main(["split", "--manifest", os.path.join(root, "manifest.jsonl"),
                       "--loso", scene, "--out", str(split_path)])
        assert rc == 0 and split_path.exists()

        weights = tmp_path / "runs" / "model.weights"  # parent dir is created
        rc = cli_main(["train", "--strategy", "real-only",
                       "--real", os.path.join(root, "manifest.jsonl"),
                       "--split", str(split_path), "--out", str(weights),
                       "--epochs", "3", "--seed", "4"])
        assert rc == 0 and weights.exists()
        assert (tmp_path / "runs" / "model_loss.csv").exists()
        assert (tmp_path / "runs" / "model_loss.png").exists()
        assert (tmp_path / "runs" / "model_run.json").exists()

        report = tmp_path / "report.csv"
        rc = cli_main(["eval", "--weights", str(weights),
                       "--manifest", os.path.join(root, "manifest.jsonl"),
                       "--split", str(split_path), "--report", str(report)])
        assert rc == 0
        lines = report.read_text().splitlines()
        assert lines[0] == "class,precision,recall,f1"
        assert lines[-1].startswith("overall,")
        assert (tmp_path / "report_confusion.csv").exists()
        assert (tmp_path / "report_confusion.png").exists()
        assert (tmp_path / "report_f1.png").exists()

    def test_split_stdout(self, tiny_dataset, capsys):
        root, records = tiny_dataset
        rc = cli_main(["split", "--manifest", os.path.join(root, "manifest.jsonl"),
                       "--loso", records[0]["scene_id"]])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) >= {"train_ids", "test_ids", "criterion"}

    def test_missing_manifest_is_structured_error(self, tmp_path, capsys):
        rc = cli_main(["split", "--manifest", str(tmp_path / "absent.jsonl"),
                       "--loso", "x"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_loso_and_hold_are_exclusive(self, tiny_dataset):
        root, _ = tiny_dataset
        with pytest.raises(SystemExit):
            cli_main(["split", "--manifest", os.path.join(root, "manifest.jsonl"),
                      "--loso", "x", "--hold-azimuth", "0:90"])

    def test_hold_texture_takes_pool_ids(self, tmp_path, tiny_dataset):
        # pool ids are strings like "noise#3", not integers
        root, records = tiny_dataset
        pools = [{r["nuisances"][slot]["pool_id"] for slot in ("sky", "floor", "body")}
                 for r in records]
        pool_id = next(p for p in sorted(set.union(*pools))
                       if any(p in s for s in pools) and any(p not in s for s in pools))
        out = tmp_path / "tex_split.json"
        rc = cli_main(["split", "--manifest", os.path.join(root, "manifest.jsonl"),
                       "--hold-texture", pool_id, "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        held = {r["video_id"] for r, s in zip(records, pools) if pool_id in s}
        assert set(payload["test_ids"]) == held
        assert set(payload["train_ids"]) == {r["video_id"] for r in records} - held

    def test_train_requires_domain_manifest(self, tmp_path):
        with pytest.raises(SystemExit):
            cli_main(["train", "--strategy", "joint", "--real", "r.jsonl",
                      "--out", str(tmp_path / "w")])

    def test_convert_motion_roundtrip(self, tmp_path):
        from synthact.motion import clip_positions, parse_bvh
        from synthact.motion.catalog import builtin_clip
        from synthact.motion.solve import format_positions

        clip = builtin_clip("wave", 0)
        pos = clip_positions(clip)[:4]
        src = tmp_path / "positions.txt"
        src.write_text(format_positions(pos, clip.frame_time))
        out = tmp_path / "converted.bvh"
        rc = cli_main(["convert-motion", "--positions", str(src),
                       "--topology", "kinect25", "--out", str(out)])
        assert rc == 0
        back = parse_bvh(out.read_text())
        assert back.topology.names == clip.topology.names
        assert back.frame_count == 4
