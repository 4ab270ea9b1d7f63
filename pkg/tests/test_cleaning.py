"""Cleaning chain: duplicates, overlaps, short notes, runaways."""

import pytest

from midicurate.cleaning import (
    clean_sequence,
    filter_short_notes,
    remove_duplicates,
    repair_runaway_notes,
    truncate_overlaps,
)
from midicurate.sequence import FLAG_REPAIRED
from midicurate import synth

import oracles
from conftest import make_note, make_sequence


def random_clean_sequence(rng, n=200):
    score = synth.random_score(rng, n_onsets=n // 2)
    return synth.render_score(score, bpm=110)


class TestRemoveDuplicates:
    def test_no_duplicates_unchanged(self):
        seq = make_sequence([make_note(onset=0.0), make_note(onset=1.0)])
        out, removed = remove_duplicates(seq)
        assert removed == 0
        assert out.notes == seq.notes

    def test_three_identical_one_survives(self):
        seq = make_sequence([make_note(velocity=50)] * 3)
        out, removed = remove_duplicates(seq)
        assert removed == 2
        assert len(out.notes) == 1

    def test_velocity_tiebreak_keeps_loudest(self):
        seq = make_sequence([make_note(velocity=40), make_note(velocity=90)])
        out, _ = remove_duplicates(seq)
        assert out.notes[0].velocity == 90

    def test_matches_hash_set_oracle(self, rng):
        base = random_clean_sequence(rng)
        seq, injected = synth.inject_duplicates(base, rng, 30)
        out, removed = remove_duplicates(seq)
        assert removed == injected
        keys = [(n.pitch, n.onset, n.duration) for n in out.notes]
        assert len(keys) == len(set(keys))
        assert set(keys) == oracles.dedup_oracle(seq.notes)

    def test_idempotent(self, rng):
        seq, _ = synth.inject_duplicates(random_clean_sequence(rng), rng, 10)
        once, _ = remove_duplicates(seq)
        twice, removed = remove_duplicates(once)
        assert removed == 0 and twice.notes == once.notes


class TestTruncateOverlaps:
    def test_same_pitch_truncated(self):
        seq = make_sequence([
            make_note(onset=0.0, duration=2.0),
            make_note(onset=1.0, duration=1.0),
        ])
        out, truncated = truncate_overlaps(seq)
        assert truncated == 1
        assert out.notes[0].duration == pytest.approx(1.0)

    def test_different_pitch_untouched(self):
        seq = make_sequence([
            make_note(pitch=60, onset=0.0, duration=2.0),
            make_note(pitch=64, onset=1.0, duration=1.0),
        ])
        out, truncated = truncate_overlaps(seq)
        assert truncated == 0
        assert out.notes == seq.notes

    def test_chain_of_five_clears_all_overlaps(self):
        seq = make_sequence([
            make_note(onset=0.2 * i, duration=1.0) for i in range(5)
        ])
        out, truncated = truncate_overlaps(seq)
        assert truncated == 4
        assert oracles.overlap_pairs(out.notes) == []

    def test_random_sequence_oracle(self, rng):
        notes = [
            make_note(
                pitch=int(rng.integers(60, 64)),
                onset=float(rng.uniform(0, 10)),
                duration=float(rng.uniform(0.1, 3.0)),
            )
            for _ in range(120)
        ]
        seq = make_sequence(notes)
        out, _ = truncate_overlaps(seq)
        assert oracles.overlap_pairs(out.notes) == []

    def test_idempotent(self, rng):
        seq = make_sequence([
            make_note(onset=0.2 * i, duration=1.0) for i in range(6)
        ])
        once, _ = truncate_overlaps(seq)
        twice, truncated = truncate_overlaps(once)
        assert truncated == 0 and twice.notes == once.notes


class TestFilterShortNotes:
    def test_below_threshold_removed(self):
        seq = make_sequence([make_note(duration=0.004)])
        out, removed = filter_short_notes(seq)
        assert removed == 1 and len(out.notes) == 0

    def test_boundary_kept(self):
        seq = make_sequence([make_note(duration=0.005)])
        out, removed = filter_short_notes(seq)
        assert removed == 0 and len(out.notes) == 1

    def test_mixed_matches_oracle(self, rng):
        notes = [
            make_note(onset=float(i) * 0.1, duration=float(d))
            for i, d in enumerate(rng.uniform(0.001, 0.02, size=100))
        ]
        seq = make_sequence(notes)
        out, removed = filter_short_notes(seq)
        expected = [n for n in seq.notes if n.duration >= 0.005]
        assert list(out.notes) == expected
        assert removed == len(seq.notes) - len(expected)


class TestRepairRunaways:
    def test_normal_sequence_untouched(self, rng):
        seq = random_clean_sequence(rng)
        out, repaired = repair_runaway_notes(seq)
        assert repaired == 0
        assert out.notes == seq.notes

    def test_runaway_truncated_to_local_median(self):
        # notes every 0.5 s with duration 0.4 s; one spans to t=600
        notes = [make_note(pitch=60 + (i % 12), onset=0.5 * i, duration=0.4)
                 for i in range(40)]
        notes.append(make_note(pitch=90, onset=1.0, duration=599.0))
        seq = make_sequence(notes)
        out, repaired = repair_runaway_notes(seq)
        assert repaired == 1
        fixed = [n for n in out.notes if n.pitch == 90][0]
        assert fixed.duration == pytest.approx(0.4, abs=1e-9)
        assert FLAG_REPAIRED in fixed.flags

    def test_truncates_to_next_same_pitch_onset_when_earlier(self):
        notes = [make_note(pitch=60 + (i % 12), onset=0.5 * i, duration=0.4)
                 for i in range(40)]
        notes.append(make_note(pitch=61, onset=0.2, duration=599.8))
        # next pitch-61 note starts at onset 0.5 (i=1)
        seq = make_sequence(notes)
        out, repaired = repair_runaway_notes(seq)
        assert repaired == 1
        fixed = [n for n in out.notes if FLAG_REPAIRED in n.flags][0]
        assert fixed.offset == pytest.approx(0.5, abs=1e-9)

    def test_injected_runaways_all_repaired_nothing_else(self, rng):
        base = random_clean_sequence(rng)
        seq, (pitch, onset) = synth.inject_runaway(base, rng)
        out, repaired = repair_runaway_notes(seq)
        assert repaired == 1
        untouched = [
            n for n in out.notes
            if FLAG_REPAIRED not in n.flags
        ]
        originals = [n for n in seq.notes if not (n.pitch == pitch and n.onset == onset)]
        assert sorted((n.pitch, n.onset, n.duration) for n in untouched) == sorted(
            (n.pitch, n.onset, n.duration) for n in originals
        )

    def test_too_few_notes_skipped_with_warning(self, caplog):
        seq = make_sequence([make_note(duration=500.0)])
        with caplog.at_level("WARNING"):
            out, repaired = repair_runaway_notes(seq)
        assert repaired == 0
        assert "skipped" in caplog.text


class TestCleanChain:
    def test_full_chain_safety(self, rng):
        base = random_clean_sequence(rng, n=300)
        seq, _ = synth.inject_duplicates(base, rng, 20)
        seq, _ = synth.inject_runaway(seq, rng)
        cleaned, report = clean_sequence(seq)
        assert oracles.duplicate_groups(cleaned.notes) == []
        assert oracles.overlap_pairs(cleaned.notes) == []
        assert all(n.duration >= 0.005 for n in cleaned.notes)
        assert report.total > 0

    def test_chain_idempotent(self, rng):
        seq, _ = synth.inject_duplicates(random_clean_sequence(rng), rng, 15)
        cleaned, _ = clean_sequence(seq)
        again, report = clean_sequence(cleaned)
        assert report.total == 0
        assert again.notes == cleaned.notes

    def test_never_increases_note_count(self, rng):
        seq, _ = synth.inject_duplicates(random_clean_sequence(rng), rng, 25)
        cleaned, _ = clean_sequence(seq)
        assert len(cleaned.notes) <= len(seq.notes)
