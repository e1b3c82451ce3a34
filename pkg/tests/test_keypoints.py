import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signpose.keypoints import (
    FRAME_WIDTH,
    HOLISTIC_79,
    KeypointError,
    PoseFrame,
    PoseSequence,
    SynthSpec,
    parse_keypoint_file,
    resample_temporal,
    synth_gloss_sequence,
    validate_sequence,
    write_keypoint_file,
)


def make_sequence(n_frames=3, fill=0.5, presence=(True, True, True), gloss="HELLO"):
    frames = []
    for t in range(n_frames):
        coords = np.full((79, 3), fill)
        pres = np.asarray(presence, dtype=bool)
        for flag, (lo, hi) in zip(pres, [(0, 21), (21, 42), (42, 79)]):
            if not flag:
                coords[lo:hi] = 0.0
        frames.append(PoseFrame(coords, pres))
    return PoseSequence("vid0", gloss, "s1", 25.0, HOLISTIC_79.name, tuple(frames))


def container_dict(seq):
    return json.loads(write_keypoint_file(seq).decode("utf-8"))


class TestLayout:
    def test_default_layout(self):
        assert HOLISTIC_79.name == "holistic-79-v1"
        assert dict(HOLISTIC_79.groups)["face"] == (42, 79)
        assert HOLISTIC_79.nose_index == 42

    def test_joint_mask(self):
        mask = HOLISTIC_79.joint_mask(np.array([True, False, True]))
        assert mask[:21].all() and not mask[21:42].any() and mask[42:].all()


class TestParse:
    def test_minimal_valid_file(self):
        seq = make_sequence(1)
        out = parse_keypoint_file(write_keypoint_file(seq))
        assert len(out) == 1
        assert tuple(out.frames[0].presence) == (True, True, True)

    def test_absent_group_accepted(self):
        seq = make_sequence(2, presence=(False, True, True))
        out = parse_keypoint_file(write_keypoint_file(seq))
        assert not out.frames[0].presence[0]
        assert np.all(out.frames[0].coords[:21] == 0.0)

    def test_wrong_width_names_frame(self):
        doc = container_dict(make_sequence(1))
        doc["frames"][0] = doc["frames"][0][:-1]
        with pytest.raises(KeypointError, match="frame 0"):
            parse_keypoint_file(json.dumps(doc))

    def test_unknown_layout(self):
        doc = container_dict(make_sequence(1))
        doc["format"] = "holistic-80-v9"
        with pytest.raises(KeypointError, match="unknown layout"):
            parse_keypoint_file(json.dumps(doc))

    def test_malformed_json(self):
        with pytest.raises(KeypointError, match="malformed"):
            parse_keypoint_file(b"{nope")

    def test_non_finite_rejected(self):
        doc = container_dict(make_sequence(2))
        body = json.dumps(doc).replace("0.5", "NaN", 1)
        with pytest.raises(KeypointError, match="non-finite"):
            parse_keypoint_file(body)

    def test_huge_literal_becomes_inf(self):
        doc = container_dict(make_sequence(1))
        body = json.dumps(doc).replace("0.5", "1e999", 1)
        with pytest.raises(KeypointError, match="frame 0"):
            parse_keypoint_file(body)

    def test_missing_key(self):
        doc = container_dict(make_sequence(1))
        del doc["fps"]
        with pytest.raises(KeypointError, match="fps"):
            parse_keypoint_file(json.dumps(doc))

    def test_presence_length_mismatch(self):
        doc = container_dict(make_sequence(2))
        doc["presence"] = doc["presence"][:1]
        with pytest.raises(KeypointError, match="presence"):
            parse_keypoint_file(json.dumps(doc))


class TestWrite:
    def test_roundtrip_identity(self):
        seq = make_sequence(4, fill=0.1)
        assert parse_keypoint_file(write_keypoint_file(seq)) == seq

    def test_decimal_roundtrip_is_bit_exact(self):
        seq = make_sequence(1, fill=0.1)
        out = parse_keypoint_file(write_keypoint_file(seq))
        a = out.frames[0].coords[0, 0]
        assert a == 0.1 and a.hex() == np.float64(0.1).hex()

    def test_empty_sequence_rejected(self):
        seq = PoseSequence("v", "G", "s", 25.0, HOLISTIC_79.name, ())
        with pytest.raises(KeypointError, match="no frames"):
            write_keypoint_file(seq)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3))
    def test_roundtrip_arbitrary_floats(self, xyz):
        coords = np.zeros((79, 3))
        coords[30] = xyz  # right hand joint
        seq = PoseSequence(
            "v", "G", "s", 25.0, HOLISTIC_79.name,
            (PoseFrame(coords, np.array([False, True, True])),),
        )
        out = parse_keypoint_file(write_keypoint_file(seq))
        got = out.frames[0].coords[30]
        for g, x in zip(got, xyz):
            assert np.float64(g).tobytes() == np.float64(x).tobytes()


class TestValidate:
    def test_valid_sequence(self):
        assert validate_sequence(make_sequence(3)) == []

    def test_absent_but_nonzero(self):
        coords = np.full((79, 3), 0.5)
        frame = PoseFrame(coords, np.array([False, True, True]))
        seq = PoseSequence("v", "G", "s", 25.0, HOLISTIC_79.name, (frame,))
        violations = validate_sequence(seq)
        assert len(violations) == 1
        assert violations[0].rule == "absent-group-nonzero"
        assert violations[0].frame_index == 0

    def test_nan_coordinate(self):
        coords = np.full((79, 3), 0.5)
        coords[5, 1] = np.nan
        seq = PoseSequence(
            "v", "G", "s", 25.0, HOLISTIC_79.name,
            (PoseFrame(coords, np.array([True, True, True])),),
        )
        rules = [v.rule for v in validate_sequence(seq)]
        assert rules == ["non-finite"]

    def test_empty_gloss(self):
        seq = make_sequence(1, gloss="")
        assert [v.rule for v in validate_sequence(seq)] == ["empty-gloss"]


class TestResample:
    def test_subsample_indices(self):
        seq = make_sequence(4)
        marked = seq.with_frames(
            np.arange(4)[:, None, None] * np.ones((4, 79, 3)), seq.presence_array()
        )
        out = resample_temporal(marked, 2)
        assert out.frames[0].coords[0, 0] == 0.0
        assert out.frames[1].coords[0, 0] == 3.0

    def test_padding(self):
        seq = make_sequence(2)
        out = resample_temporal(seq, 4)
        assert len(out) == 4
        assert out.frames[0] == seq.frames[0] and out.frames[1] == seq.frames[1]
        for f in out.frames[2:]:
            assert not f.presence.any() and np.all(f.coords == 0.0)

    def test_identity_when_equal(self):
        seq = make_sequence(5)
        assert resample_temporal(seq, 5) == seq

    def test_single_frame_target_takes_middle(self):
        seq = make_sequence(5)
        marked = seq.with_frames(
            np.arange(5)[:, None, None] * np.ones((5, 79, 3)), seq.presence_array()
        )
        out = resample_temporal(marked, 1)
        assert out.frames[0].coords[0, 0] == 2.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12))
    def test_idempotent_at_fixed_length(self, n, t):
        seq = make_sequence(n)
        marked = seq.with_frames(
            np.arange(n)[:, None, None] * np.ones((n, 79, 3)), seq.presence_array()
        )
        once = resample_temporal(marked, t)
        assert resample_temporal(once, t) == once
        assert len(once) == t

    def test_bad_target(self):
        with pytest.raises(ValueError):
            resample_temporal(make_sequence(2), 0)


class TestSynth:
    SPEC = SynthSpec(n_classes=4, seqs_per_class=3, frames=12, seed=99)

    def test_deterministic(self):
        a = synth_gloss_sequence(self.SPEC, 1, 2)
        b = synth_gloss_sequence(self.SPEC, 1, 2)
        assert a == b

    def test_nuisance_off_instances_differ_only_by_noise(self):
        a = synth_gloss_sequence(self.SPEC, 0, 0)
        b = synth_gloss_sequence(self.SPEC, 0, 1)
        diff = np.abs(a.coords_array() - b.coords_array())
        assert diff.max() > 0.0
        assert diff.max() < 0.05  # a few sigma of instance noise

    def test_classes_differ(self):
        a = synth_gloss_sequence(self.SPEC, 0, 0)
        b = synth_gloss_sequence(self.SPEC, 1, 0)
        assert np.any(a.coords_array() != b.coords_array())

    def test_outputs_validate(self):
        for c in range(self.SPEC.n_classes):
            for i in range(self.SPEC.seqs_per_class):
                seq = synth_gloss_sequence(self.SPEC, c, i)
                assert validate_sequence(seq) == []
                assert validate_sequence(resample_temporal(seq, 7)) == []

    def test_class_id_out_of_range(self):
        with pytest.raises(ValueError, match="class_id"):
            synth_gloss_sequence(self.SPEC, 4, 0)

    def test_intra_class_tighter_than_inter_class(self):
        # Brute force over a small nuisance-free spec: mean frame-wise
        # distance within a class stays below the across-class mean.
        spec = SynthSpec(n_classes=3, seqs_per_class=3, frames=10, seed=5)
        seqs = {
            (c, i): synth_gloss_sequence(spec, c, i).coords_array()
            for c in range(3)
            for i in range(3)
        }

        def dist(a, b):
            return float(np.linalg.norm(a - b, axis=-1).mean())

        intra, inter = [], []
        keys = list(seqs)
        for i, ka in enumerate(keys):
            for kb in keys[i + 1:]:
                (dist(seqs[ka], seqs[kb]))
                (intra if ka[0] == kb[0] else inter).append(dist(seqs[ka], seqs[kb]))
        assert np.mean(intra) < np.mean(inter)

    def test_nuisance_bounds(self):
        spec = SynthSpec(
            n_classes=2, seqs_per_class=2, frames=6,
            nuisance_translation=0.3, nuisance_scale_range=(0.5, 1.5), seed=3,
        )
        base = SynthSpec(n_classes=2, seqs_per_class=2, frames=6, seed=3)
        # Same class template; only nuisance differs between the two specs.
        a = synth_gloss_sequence(base, 0, 0).coords_array()
        b = synth_gloss_sequence(spec, 0, 0).coords_array()
        assert not np.allclose(a, b)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SynthSpec(n_classes=0, seqs_per_class=1)
        with pytest.raises(ValueError):
            SynthSpec(n_classes=1, seqs_per_class=1, nuisance_scale_range=(0.0, 1.0))
        with pytest.raises(ValueError):
            SynthSpec(n_classes=1, seqs_per_class=1, nuisance_translation=-0.1)


def test_frame_width_constant():
    assert FRAME_WIDTH == 237


def test_resample_preserves_metadata():
    seq = make_sequence(3)
    out = resample_temporal(seq, 6)
    assert (out.video_id, out.gloss, out.signer_id, out.fps, out.layout) == (
        seq.video_id, seq.gloss, seq.signer_id, seq.fps, seq.layout,
    )
