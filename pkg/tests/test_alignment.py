"""Alignment links, quality ratios, container format."""

import numpy as np
import pytest

from midicurate import synth
from midicurate.alignment import (
    Alignment,
    AlignmentLink,
    TABLE_DTYPE,
    adjusted_ratio,
    build_full_alignment,
    export_csv,
    load_table,
    note_ratio,
    precision,
    read_alignment,
    recall,
    save_table,
    validate_alignment,
    write_alignment,
)
from midicurate.errors import (
    AlignmentValidationError,
    UndefinedRatioError,
    UnsupportedVersionError,
)

import oracles


def alignment_with_counts(n_matched, n_score, n_perf):
    matches = [(i, i) for i in range(n_matched)]
    return build_full_alignment(n_score, n_perf, matches)


def random_alignment(rng, max_notes=60):
    n_score = int(rng.integers(1, max_notes))
    n_perf = int(rng.integers(1, max_notes))
    k = int(rng.integers(0, min(n_score, n_perf) + 1))
    s_idx = rng.choice(n_score, size=k, replace=False)
    p_idx = rng.choice(n_perf, size=k, replace=False)
    return build_full_alignment(n_score, n_perf, zip(s_idx.tolist(), p_idx.tolist()))


class TestMetrics:
    def test_note_ratio_upper_bound_example(self):
        assert note_ratio(alignment_with_counts(0, 100, 133)) == pytest.approx(1.33)

    def test_note_ratio_equal(self):
        assert note_ratio(alignment_with_counts(0, 50, 50)) == 1.0

    def test_note_ratio_lower_bound_example(self):
        assert note_ratio(alignment_with_counts(0, 100, 75)) == pytest.approx(0.75)

    def test_definitive_boundary_recall(self):
        a = alignment_with_counts(70, 100, 100)
        assert recall(a) == pytest.approx(0.70)

    def test_perfect_alignment(self):
        a = alignment_with_counts(80, 80, 80)
        assert recall(a) == precision(a) == adjusted_ratio(a) == 1.0

    def test_skipped_repeat_adjusted(self):
        a = alignment_with_counts(60, 100, 60)
        assert recall(a) == pytest.approx(0.6)
        assert precision(a) == 1.0
        assert adjusted_ratio(a) == 1.0

    def test_zero_denominators_raise(self):
        a = Alignment(links=(), n_score=0, n_perf=5)
        with pytest.raises(UndefinedRatioError):
            note_ratio(a)
        with pytest.raises(UndefinedRatioError):
            recall(a)
        b = Alignment(links=(), n_score=5, n_perf=0)
        with pytest.raises(UndefinedRatioError):
            precision(b)
        with pytest.raises(UndefinedRatioError):
            adjusted_ratio(b)

    def test_adjusted_is_max_identity_and_oracle(self, rng):
        for _ in range(1000):
            a = random_alignment(rng)
            r, p, adj = oracles.recount_metrics(a.links, a.n_score, a.n_perf)
            assert recall(a) == r
            assert precision(a) == p
            assert adjusted_ratio(a) == adj
            assert adjusted_ratio(a) == max(recall(a), precision(a))


class TestValidator:
    def test_rejects_double_sentinel(self):
        a = Alignment(links=(AlignmentLink(-1, -1),), n_score=1, n_perf=1)
        with pytest.raises(AlignmentValidationError):
            validate_alignment(a)

    def test_rejects_repeated_score_index(self):
        a = Alignment(
            links=(AlignmentLink(0, 0), AlignmentLink(0, 1)), n_score=2, n_perf=2
        )
        with pytest.raises(AlignmentValidationError):
            validate_alignment(a)

    def test_rejects_repeated_perf_index(self):
        a = Alignment(
            links=(AlignmentLink(0, 0), AlignmentLink(1, 0)), n_score=2, n_perf=2
        )
        with pytest.raises(AlignmentValidationError):
            validate_alignment(a)

    def test_rejects_out_of_bounds(self):
        a = Alignment(links=(AlignmentLink(5, 0),), n_score=2, n_perf=2)
        with pytest.raises(AlignmentValidationError) as err:
            validate_alignment(a)
        assert err.value.bad_links

    def test_accepts_random_valid(self, rng):
        for _ in range(50):
            validate_alignment(random_alignment(rng))


class TestContainer:
    def test_empty_roundtrip(self, tmp_path, rng):
        score = synth.random_score(rng, n_onsets=4)
        perf = synth.render_score(score)
        a = Alignment(links=(), n_score=0, n_perf=0)
        path = tmp_path / "empty.mcal"
        write_alignment(a, score, perf, path)
        back = read_alignment(path)
        assert back.links == ()
        assert back.n_score == 0

    def test_kinds_and_sentinels_roundtrip(self, tmp_path, rng):
        score = synth.random_score(rng, n_onsets=4)
        perf = synth.render_score(score)
        n_s, n_p = len(score.notes), len(perf.notes)
        a = build_full_alignment(n_s, n_p, [(0, 1), (1, 0)])
        a.stage_recalls["raw"] = recall(a)
        path = tmp_path / "small.mcal"
        write_alignment(a, score, perf, path)
        back = read_alignment(path)
        assert back.links == a.links
        assert [l.kind for l in back.links] == [l.kind for l in a.links]
        assert back.stage_recalls == a.stage_recalls
        assert back.n_score == n_s and back.n_perf == n_p

    def test_random_table_byte_identical_reserialization(self, tmp_path, rng):
        n = 10_000
        table = np.zeros(n, dtype=TABLE_DTYPE)
        table["score_index"] = rng.integers(-1, 5000, n)
        table["perf_index"] = rng.integers(-1, 5000, n)
        table["score_pitch"] = rng.integers(-1, 128, n)
        table["perf_pitch"] = rng.integers(-1, 128, n)
        table["score_onset"] = rng.uniform(0, 500, n)
        table["score_offset"] = rng.uniform(0, 500, n)
        table["perf_onset"] = rng.uniform(0, 500, n)
        table["perf_offset"] = rng.uniform(0, 500, n)
        table["interpolated"] = rng.integers(0, 2, n)
        path = tmp_path / "big.mcal"
        recalls = {"raw": 0.934567891234, "hole": 0.93}
        save_table(table, 5000, 5000, recalls, path)
        original = path.read_bytes()
        back, n_s, n_p, r = load_table(path)
        path2 = tmp_path / "big2.mcal"
        save_table(back, n_s, n_p, r, path2)
        assert path2.read_bytes() == original

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "bad.mcal"
        path.write_bytes(b"MCAL 99\nlinks=0 score_notes=0 perf_notes=0\nrecalls=\ncolumns=\n\n")
        with pytest.raises(UnsupportedVersionError):
            read_alignment(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mcal"
        path.write_bytes(b"XXXX 1\nlinks=0 score_notes=0 perf_notes=0\nrecalls=\ncolumns=\n\n")
        with pytest.raises(UnsupportedVersionError):
            read_alignment(path)

    def test_out_of_bounds_indices_rejected_on_write(self, tmp_path, rng):
        score = synth.random_score(rng, n_onsets=3)
        perf = synth.render_score(score)
        a = Alignment(
            links=(AlignmentLink(len(score.notes) + 5, 0),),
            n_score=len(score.notes) + 6,
            n_perf=len(perf.notes),
        )
        with pytest.raises(AlignmentValidationError) as err:
            write_alignment(a, score, perf, tmp_path / "x.mcal")
        assert err.value.bad_links

    def test_csv_export(self, tmp_path, rng):
        score = synth.random_score(rng, n_onsets=5)
        perf = synth.render_score(score)
        a = build_full_alignment(
            len(score.notes), len(perf.notes), [(i, i) for i in range(3)]
        )
        path = tmp_path / "a.mcal"
        write_alignment(a, score, perf, path)
        csv_path = tmp_path / "a.csv"
        export_csv(path, csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == (
            "score_index,perf_index,score_pitch,perf_pitch,"
            "score_onset,score_offset,perf_onset,perf_offset,interpolated"
        )
        assert len(lines) == 1 + len(a.links)
        # lossless float fields: parse back and compare
        row = lines[1].split(",")
        table, _, _, _ = load_table(path)
        assert float(row[6]) == table["perf_onset"][0]
