"""Taxonomy bins, homography warps, track interpolation and the loaders."""

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safit import (
    Annotation,
    BBox,
    ConfigError,
    DataError,
    GroundTruthDataset,
    Homography,
    WarpError,
    dataset_stats,
    density_level,
    interpolate_dataset,
    interpolate_track,
    load_ground_truth,
    load_predictions,
    parse_ground_truth,
    parse_predictions,
    save_ground_truth,
    save_predictions,
    scale_bin_of_area,
    scale_level,
    warp_bbox,
)

from .helpers import IMG_H, IMG_W, gt_dict, write_json


class TestScaleBins:
    # each edge belongs to the bin on its right (left-closed intervals)
    @pytest.mark.parametrize(
        "area,expected",
        [
            (0.25, "extremely_tiny"),
            (1.0, "extremely_tiny"),
            (63.999, "extremely_tiny"),
            (64.0, "tiny"),
            (255.999, "tiny"),
            (256.0, "small"),
            (1023.999, "small"),
            (1024.0, "medium"),
            (9215.999, "medium"),
            (9216.0, "large"),
            (1e9, "large"),
        ],
    )
    def test_edges(self, area, expected):
        assert scale_bin_of_area(area) == expected

    def test_rejects_nonpositive(self):
        for bad in (0.0, -1.0, math.nan):
            with pytest.raises(ConfigError):
                scale_bin_of_area(bad)

    def test_box_keying(self):
        assert scale_level(BBox(50, 50, 8, 8)) == "tiny"
        assert scale_level(BBox(50, 50, 7.9, 8)) == "extremely_tiny"

    @given(st.floats(min_value=1e-6, max_value=1e12))
    def test_exhaustive(self, area):
        assert scale_bin_of_area(area) in (
            "extremely_tiny",
            "tiny",
            "small",
            "medium",
            "large",
        )


class TestDensityBins:
    @pytest.mark.parametrize(
        "density,expected",
        [
            (0.0, "sparse"),
            (0.5, "sparse"),
            (9.999, "sparse"),
            (10.0, "medium"),
            (49.999, "medium"),
            (50.0, "dense"),
            (400.0, "dense"),
        ],
    )
    def test_edges(self, density, expected):
        assert density_level(density) == expected

    def test_rejects_bad_values(self):
        for bad in (-0.1, math.inf, math.nan, "10"):
            with pytest.raises(ConfigError):
                density_level(bad)


# ---------------------------------------------------------------------------
# homography


class TestHomography:
    def test_identity_and_translation(self):
        assert Homography.identity().apply(3.0, 4.0) == (3.0, 4.0)
        assert Homography.translation(10, -2).apply(3.0, 4.0) == (13.0, 2.0)

    def test_scaling_doubles_a_box(self):
        out = warp_bbox(Homography.scaling(2.0), BBox(4, 4, 8, 8))
        assert (out.cx, out.cy, out.w, out.h) == (8.0, 8.0, 16.0, 16.0)

    def test_rejects_wrong_shape_and_nonfinite(self):
        with pytest.raises(ConfigError):
            Homography([[1, 0], [0, 1]])
        with pytest.raises(ConfigError):
            Homography([[1, 0, 0], [0, 1, 0], [0, 0, math.nan]])

    def test_rejects_singular(self):
        with pytest.raises(ConfigError):
            Homography([[1, 0, 0], [2, 0, 0], [0, 0, 1]])

    def test_singularity_tolerance_is_scale_free(self):
        # det = 1e5 looks healthy in absolute terms, but relative to entries
        # of magnitude 1e6 the matrix is numerically rank deficient
        with pytest.raises(ConfigError):
            Homography([[1e6, 0, 0], [0, 1e6, 0], [0, 0, 1e-7]])
        # the same matrix shrunk to O(1) entries is fine
        Homography([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0.1]])

    def test_horizon_raises(self):
        h = Homography([[1, 0, 0], [0, 1, 0], [1, 0, -4]])
        assert h.apply(8.0, 0.0) == (2.0, 0.0)
        with pytest.raises(WarpError):
            h.apply(4.0, 1.0)  # denominator hits zero on the line x = 4

    def test_warp_propagates_horizon(self):
        h = Homography([[1, 0, 0], [0, 1, 0], [1, 0, -4]])
        with pytest.raises(WarpError):
            warp_bbox(h, BBox(5, 10, 2, 2))  # left edge sits exactly on x = 4

    def test_warp_clipping(self):
        h = Homography.translation(100, 0)
        assert warp_bbox(h, BBox(4, 4, 8, 8), clip_to=(64, 64)) is None
        kept = warp_bbox(h, BBox(4, 4, 8, 8), clip_to=(106, 64))
        x1, y1, x2, y2 = kept.to_corners()
        assert (x1, x2) == (100.0, 106.0)
        assert (y1, y2) == (0.0, 8.0)

    @given(
        st.floats(-50, 50),
        st.floats(-50, 50),
        st.floats(0.5, 3.0),
        st.floats(-0.2, 0.2),
    )
    @settings(max_examples=50)
    def test_inverse_round_trip(self, dx, dy, s, shear):
        h = Homography([[s, shear, dx], [0.0, s, dy], [0.0, 0.0, 1.0]])
        inv = h.inverse()
        for x, y in ((0.0, 0.0), (17.5, -3.0), (640.0, 512.0)):
            rx, ry = inv.apply(*h.apply(x, y))
            assert rx == pytest.approx(x, abs=1e-8)
            assert ry == pytest.approx(y, abs=1e-8)


# ---------------------------------------------------------------------------
# track interpolation


def _track(frames, track_id=7, class_id=1, modality="visible"):
    return [
        Annotation(
            frame_id=f,
            class_id=class_id,
            bbox=BBox(10.0 + f, 20.0, 4.0 + f, 6.0),
            track_id=track_id,
            modality=modality,
        )
        for f in frames
    ]


class TestInterpolateTrack:
    def test_no_gap_is_identity(self):
        track = _track([1, 2, 3])
        filled, gaps = interpolate_track(track)
        assert filled == track
        assert gaps == []

    def test_linear_fill(self):
        a = Annotation(1, 1, BBox(10, 20, 4, 8), track_id=3)
        b = Annotation(4, 1, BBox(16, 26, 10, 2), track_id=3)
        filled, gaps = interpolate_track([a, b])
        assert gaps == []
        assert [x.frame_id for x in filled] == [1, 2, 3, 4]
        mid1, mid2 = filled[1], filled[2]
        assert mid1.bbox == BBox(12, 22, 6, 6)
        assert mid2.bbox == BBox(14, 24, 8, 4)
        assert mid1.interpolated and mid2.interpolated
        assert not filled[0].interpolated and not filled[3].interpolated
        assert mid1.track_id == 3 and mid1.class_id == 1

    def test_gap_of_five_filled_six_left_open(self):
        filled, gaps = interpolate_track(_track([1, 7]))  # 5 missing frames
        assert [x.frame_id for x in filled] == [1, 2, 3, 4, 5, 6, 7]
        assert gaps == []
        filled, gaps = interpolate_track(_track([1, 8]))  # 6 missing frames
        assert [x.frame_id for x in filled] == [1, 8]
        assert gaps == [(1, 8)]

    def test_max_gap_override(self):
        filled, gaps = interpolate_track(_track([1, 4]), max_gap=1)
        assert [x.frame_id for x in filled] == [1, 4]
        assert gaps == [(1, 4)]

    def test_empty_and_singleton(self):
        assert interpolate_track([]) == ([], [])
        one = _track([5])
        assert interpolate_track(one) == (one, [])

    def test_mixed_identity_raises(self):
        bad = _track([1]) + _track([3], track_id=8)
        with pytest.raises(DataError):
            interpolate_track(bad)
        bad = _track([1]) + _track([3], modality="thermal")
        with pytest.raises(DataError):
            interpolate_track(bad)

    def test_unsorted_frames_raise(self):
        with pytest.raises(DataError):
            interpolate_track(_track([3, 1]))
        with pytest.raises(DataError):
            interpolate_track(_track([1, 1]))


class TestInterpolateDataset:
    def _dataset(self, image_frames, ann_frames):
        images = [
            {"id": 100 + n, "width": IMG_W, "height": IMG_H, "sequence_id": "s1", "frame_index": f}
            for n, f in enumerate(image_frames)
        ]
        frame_to_img = {f: 100 + n for n, f in enumerate(image_frames)}
        anns = [
            {
                "id": k,
                "image_id": frame_to_img[f],
                "category_id": 1,
                "bbox": [10.0 + f, 20.0, 4.0, 6.0],
                "track_id": 7,
            }
            for k, f in enumerate(ann_frames, start=1)
        ]
        ds = parse_ground_truth(gt_dict(anns, images=images))
        assert not ds.issues
        return ds, frame_to_img

    def test_fills_against_frame_index(self):
        ds, frame_to_img = self._dataset([0, 1, 2, 3], [0, 3])
        out, gaps = interpolate_dataset(ds)
        assert gaps == []
        by_img = {a.frame_id: a for a in out.annotations}
        assert set(by_img) == {100, 101, 102, 103}
        assert by_img[101].interpolated and by_img[102].interpolated
        # endpoints have cx = 12 and 15, so one third of the way is 13
        assert by_img[101].bbox.cx == pytest.approx(13.0)
        assert not by_img[100].interpolated

    def test_gap_without_image_is_reported(self):
        ds, _ = self._dataset([0, 3], [0, 3])  # frames 1, 2 have no image record
        out, gaps = interpolate_dataset(ds)
        assert len(out.annotations) == 2
        assert ("s1", 7, "visible", 1, 1) in gaps
        assert ("s1", 7, "visible", 2, 2) in gaps

    def test_long_gap_reported_not_filled(self):
        ds, _ = self._dataset(list(range(9)), [0, 8])
        out, gaps = interpolate_dataset(ds)
        assert len(out.annotations) == 2
        assert gaps == [("s1", 7, "visible", 0, 8)]

    def test_untracked_annotations_pass_through(self):
        anns = [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [5, 5, 4, 4]}]
        ds = parse_ground_truth(gt_dict(anns))
        out, gaps = interpolate_dataset(ds)
        assert gaps == []
        assert len(out.annotations) == 1
        assert out.annotations[0].track_id is None


# ---------------------------------------------------------------------------
# loaders


def _ann(image_id=1, category_id=1, bbox=(10, 10, 20, 20), **extra):
    return {"image_id": image_id, "category_id": category_id, "bbox": list(bbox), **extra}


class TestGroundTruthLoader:
    def test_structural_breakage_raises(self):
        with pytest.raises(DataError):
            parse_ground_truth([])
        with pytest.raises(DataError):
            parse_ground_truth({"images": [], "annotations": []})  # no categories

    def test_not_json_raises(self, tmp_path):
        p = tmp_path / "gt.json"
        p.write_text("{nope")
        with pytest.raises(DataError):
            load_ground_truth(p)

    def test_plain_coco_defaults(self):
        obj = {
            "images": [{"id": 1, "width": 100, "height": 80}],
            "categories": [{"id": 3, "name": "car"}],
            "annotations": [_ann(category_id=3, iscrowd=1)],
        }
        ds = parse_ground_truth(obj)
        assert not ds.issues
        img = ds.images[1]
        assert img.sequence_id == "default"
        assert "default" in ds.sequences
        a = ds.annotations[0]
        assert a.modality == "visible" and a.ignore and a.track_id is None

    def test_small_overhang_clips_silently(self):
        # 0.5 px over the left edge: inside tolerance, no issue recorded
        ds = parse_ground_truth(gt_dict([_ann(bbox=(-0.5, 10, 20, 20))]))
        assert not ds.issues
        assert ds.annotations[0].xywh() == (0.0, 10.0, 19.5, 20.0)

    def test_large_overhang_clips_with_issue(self):
        ds = parse_ground_truth(gt_dict([_ann(bbox=(-3.0, 10, 20, 20))]))
        assert [i.code for i in ds.issues] == ["bbox-bounds"]
        assert ds.annotations[0].xywh() == (0.0, 10.0, 17.0, 20.0)

    def test_fully_outside_box_dropped(self):
        ds = parse_ground_truth(gt_dict([_ann(bbox=(IMG_W + 5, 10, 20, 20))]))
        assert [i.code for i in ds.issues] == ["bbox-degenerate"]
        assert ds.annotations == []

    def test_bad_extent_dropped(self):
        for bbox in ((10, 10, 0, 5), (10, 10, 5, -1), (10, 10, 5), ("a", 1, 2, 3)):
            ds = parse_ground_truth(gt_dict([_ann(bbox=bbox)]))
            assert [i.code for i in ds.issues] == ["bbox-extent"]
            assert ds.annotations == []

    def test_unknown_references_dropped(self):
        # pin the tables explicitly; gt_dict would otherwise mint whatever
        # images and categories the annotations mention
        images = [{"id": 1, "width": IMG_W, "height": IMG_H}]
        categories = [{"id": 1, "name": "class1"}]
        ds = parse_ground_truth(
            gt_dict([_ann(), _ann(image_id=99)], images=images, categories=categories)
        )
        assert [i.code for i in ds.issues] == ["unknown-image"]
        assert len(ds.annotations) == 1
        ds = parse_ground_truth(
            gt_dict([_ann(), _ann(category_id=42)], images=images, categories=categories)
        )
        assert [i.code for i in ds.issues] == ["unknown-category"]

    def test_duplicate_track_dropped(self):
        anns = [_ann(track_id=5), _ann(track_id=5, bbox=(50, 50, 10, 10))]
        ds = parse_ground_truth(gt_dict(anns))
        assert [i.code for i in ds.issues] == ["duplicate-track"]
        assert len(ds.annotations) == 1
        # same track id on the other modality is a legitimate paired record
        anns = [_ann(track_id=5), _ann(track_id=5, modality="thermal")]
        assert not parse_ground_truth(gt_dict(anns)).issues

    def test_unknown_modality_kept_with_issue(self):
        ds = parse_ground_truth(gt_dict([_ann(modality="lidar")]))
        assert [i.code for i in ds.issues] == ["modality"]
        assert len(ds.annotations) == 1  # kept: the box itself is fine

    def test_duplicate_ids_and_bad_light(self):
        obj = gt_dict(
            [_ann()],
            images=[
                {"id": 1, "width": 100, "height": 100},
                {"id": 1, "width": 20, "height": 20},
            ],
            sequences=[{"id": "s1", "light_vision": "dusk"}],
        )
        ds = parse_ground_truth(obj)
        codes = sorted(i.code for i in ds.issues)
        assert codes == ["duplicate-image", "light-vision"]
        assert ds.images[1].width == 100  # first record wins
        assert ds.sequences["s1"].light_vision is None

    def test_issue_dicts_are_machine_readable(self):
        images = [{"id": 1, "width": IMG_W, "height": IMG_H}]
        ds = parse_ground_truth(gt_dict([_ann(image_id=99, id=12)], images=images))
        d = ds.issues[0].to_dict()
        assert d["error"] == "unknown-image"
        assert d["record"] == {"index": 0, "id": 12}


class TestPredictionLoader:
    def test_bare_list_accepted(self):
        ps = parse_predictions([_ann(score=0.5)])
        assert len(ps.detections) == 1 and not ps.issues

    def test_wrapped_object(self):
        ps = parse_predictions({"predictions": [_ann(score=0.5)], "schema_version": "1"})
        assert len(ps.detections) == 1

    def test_score_out_of_range_dropped(self):
        for score in (1.5, -0.1, None, "0.5", math.nan):
            ps = parse_predictions([_ann(score=score)])
            assert [i.code for i in ps.issues] == ["score-range"]
            assert ps.detections == []

    def test_boundary_scores_kept(self):
        ps = parse_predictions([_ann(score=0.0), _ann(score=1.0)])
        assert not ps.issues and len(ps.detections) == 2

    def test_reference_checks_need_tables(self):
        recs = [_ann(image_id=9, score=0.5)]
        assert not parse_predictions(recs).issues
        ds = parse_ground_truth(gt_dict([_ann()]))
        ps = parse_predictions(recs, images=ds.images, categories=ds.categories)
        assert [i.code for i in ps.issues] == ["unknown-image"]

    def test_structural_breakage_raises(self):
        with pytest.raises(DataError):
            parse_predictions("nope")
        with pytest.raises(DataError):
            parse_predictions({"detections": []})


class TestRoundTrip:
    def _rich_obj(self):
        return gt_dict(
            [
                _ann(id=1, bbox=(1.1, 2.2, 3.3, 4.4), track_id=3, occlusion="partial"),
                _ann(id=2, bbox=(7, 8, 9, 10), modality="thermal", ignore=True),
            ],
            images=[{"id": 1, "width": IMG_W, "height": IMG_H, "sequence_id": "s1", "frame_index": 0}],
            sequences=[{"id": "s1", "scene": "harbor", "light_vision": "low", "fps": 12.5}],
        )

    def test_save_load_fixed_point(self, tmp_path):
        ds = parse_ground_truth(self._rich_obj())
        assert not ds.issues
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_ground_truth(ds, p1)
        ds2 = load_ground_truth(p1)
        assert not ds2.issues
        save_ground_truth(ds2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_raw_bbox_floats_survive(self, tmp_path):
        ds = parse_ground_truth(self._rich_obj())
        p = tmp_path / "gt.json"
        save_ground_truth(ds, p)
        saved = json.loads(p.read_text())
        assert saved["annotations"][0]["bbox"] == [1.1, 2.2, 3.3, 4.4]

    def test_annotation_fields_survive(self, tmp_path):
        p = tmp_path / "gt.json"
        save_ground_truth(parse_ground_truth(self._rich_obj()), p)
        ds = load_ground_truth(p)
        a1, a2 = ds.annotations
        assert (a1.track_id, a1.occlusion) == (3, "partial")
        assert (a2.modality, a2.ignore) == ("thermal", True)
        assert ds.sequences["s1"].fps == 12.5
        assert ds.sequences["s1"].light_vision == "low"

    def test_prediction_round_trip(self, tmp_path):
        recs = [_ann(score=0.25, bbox=(1.5, 2.5, 3.5, 4.5))]
        ps = parse_predictions(recs)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_predictions(ps, p1)
        save_predictions(load_predictions(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert json.loads(p1.read_text())["predictions"][0]["bbox"] == [1.5, 2.5, 3.5, 4.5]


# ---------------------------------------------------------------------------
# stats


class TestDatasetStats:
    def _dataset(self):
        images = [
            {"id": i, "width": IMG_W, "height": IMG_H, "sequence_id": "s1", "frame_index": i}
            for i in range(10)
        ]
        # 100 annotations over 10 frames: density exactly 10 -> "medium"
        anns = []
        for i in range(100):
            anns.append(
                {
                    "id": i + 1,
                    "image_id": i % 10,
                    "category_id": 1 + (i % 2),
                    # class 1 gets 8x8 boxes (tiny), class 2 gets 40x40 (medium)
                    "bbox": [5, 5, 8, 8] if i % 2 == 0 else [60, 60, 40, 40],
                }
            )
        return parse_ground_truth(gt_dict(anns, images=images))

    def test_density_and_levels(self):
        stats = dataset_stats(self._dataset())
        seq = stats.per_sequence["s1"]
        assert seq["frames"] == 10
        assert seq["annotations"] == 100
        assert seq["density"] == 10.0
        assert seq["density_level"] == "medium"
        assert seq["light_vision"] == "high"

    def test_scale_histogram(self):
        stats = dataset_stats(self._dataset())
        assert stats.scale_histogram["class1"]["tiny"] == 50
        assert stats.scale_histogram["class2"]["medium"] == 50
        assert stats.scale_histogram["class1"]["large"] == 0

    def test_totals_and_light(self):
        stats = dataset_stats(self._dataset())
        assert stats.totals == {
            "images": 10,
            "annotations": 100,
            "sequences": 1,
            "categories": 2,
        }
        assert stats.light_vision["high"] == {"sequences": 1, "annotations": 100}

    def test_modality_filter(self):
        anns = [
            _ann(id=1),
            _ann(id=2, modality="thermal"),
            _ann(id=3, modality="thermal", bbox=(30, 30, 8, 8)),
        ]
        ds = parse_ground_truth(gt_dict(anns))
        assert dataset_stats(ds).totals["annotations"] == 3
        assert dataset_stats(ds, modality="thermal").totals["annotations"] == 2

    def test_csv_rows_shape(self):
        rows = dataset_stats(self._dataset()).to_csv_rows()
        assert rows[0] == ("table", "key", "field", "value")
        assert ("totals", "annotations", "", 100) in rows
        assert ("sequence", "s1", "density_level", "medium") in rows

    def test_empty_sequence_density_zero(self):
        images = [
            {"id": 1, "width": 64, "height": 64, "sequence_id": "s1"},
            {"id": 2, "width": 64, "height": 64, "sequence_id": "s2"},
        ]
        obj = gt_dict(
            [_ann()],
            images=images,
            sequences=[{"id": "s1", "light_vision": "high"}, {"id": "s2"}],
        )
        stats = dataset_stats(parse_ground_truth(obj))
        assert stats.per_sequence["s2"]["density"] == 0.0
        assert stats.per_sequence["s2"]["density_level"] == "sparse"
        assert stats.light_vision["unknown"]["sequences"] == 1


def test_write_json_helper_round_trips(tmp_path):
    path = write_json(tmp_path / "x.json", {"a": 1})
    assert json.loads(open(path).read()) == {"a": 1}


def test_images_by_sequence_grouping():
    images = [
        {"id": 1, "width": 8, "height": 8, "sequence_id": "a"},
        {"id": 2, "width": 8, "height": 8, "sequence_id": "b"},
        {"id": 3, "width": 8, "height": 8, "sequence_id": "a"},
    ]
    ds = parse_ground_truth(
        gt_dict([], images=images, categories=[{"id": 1, "name": "x"}], sequences=[])
    )
    groups = ds.images_by_sequence()
    assert sorted(groups) == ["a", "b"]
    assert [im.id for im in groups["a"]] == [1, 3]
