"""Symbolic-error cleaning for note sequences.

The cleaning chain removes exact duplicates, truncates same-pitch
overlaps, drops sub-5 ms notes and repairs transcription runaways whose
note-off landed at the end of the file. All operations are pure and
idempotent; none of them ever adds a note.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, replace

from .sequence import (
    FLAG_REPAIRED,
    FLAG_RUNAWAY_CANDIDATE,
    Note,
    NoteSequence,
    canonical_sort,
    duration_until,
)

log = logging.getLogger(__name__)

MIN_NOTE_DURATION = 0.005  # seconds; notes shorter than 5 ms are dropped
RUNAWAY_ABS_DURATION = 10.0  # seconds
RUNAWAY_PERCENTILE_FACTOR = 4.0
RUNAWAY_NEIGHBORHOOD = 20  # nearest-by-onset notes for the local median
RUNAWAY_END_TOLERANCE = 1e-3  # offset within 1 ms of sequence end


def remove_duplicates(seq: NoteSequence) -> tuple[NoteSequence, int]:
    """Keep one note per exact (pitch, onset, duration) group.

    The highest-velocity instance survives; earlier position wins a full
    tie, so the pass is deterministic and idempotent.
    """
    best: dict[tuple, int] = {}
    for i, note in enumerate(seq.notes):
        key = (note.pitch, note.onset, note.duration)
        j = best.get(key)
        if j is None or seq.notes[j].velocity < note.velocity:
            best[key] = i
    keep = sorted(best.values())
    removed = len(seq.notes) - len(keep)
    if removed == 0:
        return seq, 0
    return seq.with_notes(seq.notes[i] for i in keep), removed


def truncate_overlaps(seq: NoteSequence) -> tuple[NoteSequence, int]:
    """Shorten any note that is still sounding when the same pitch restrikes.

    After the pass the earlier note's offset equals the later note's onset
    for every same-pitch (and same-channel) collision.
    """
    notes = list(seq.notes)
    last_seen: dict[tuple[int, int], int] = {}
    truncated = 0
    for i, note in enumerate(notes):
        key = (note.pitch, note.channel)
        j = last_seen.get(key)
        if j is not None and notes[j].offset > note.onset:
            notes[j] = _with_duration(
                notes[j], duration_until(notes[j].onset, note.onset)
            )
            truncated += 1
        last_seen[key] = i
    if truncated == 0:
        return seq, 0
    return seq.with_notes(notes), truncated


def _with_duration(note: Note, duration: float) -> Note:
    duration_beat = note.duration_beat
    if duration_beat is not None and note.duration > 0:
        duration_beat = duration_beat * duration / note.duration
    return replace(note, duration=duration, duration_beat=duration_beat)


def filter_short_notes(
    seq: NoteSequence, min_duration: float = MIN_NOTE_DURATION
) -> tuple[NoteSequence, int]:
    """Drop notes shorter than `min_duration`; the boundary is kept."""
    keep = [n for n in seq.notes if n.duration >= min_duration]
    removed = len(seq.notes) - len(keep)
    if removed == 0:
        return seq, 0
    return seq.with_notes(keep), removed


def _percentile(values: list[float], q: float) -> float:
    ordered = sorted(values)
    if not ordered:
        return 0.0
    pos = q * (len(ordered) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(ordered) - 1)
    frac = pos - lo
    return ordered[lo] * (1 - frac) + ordered[hi] * frac


def repair_runaway_notes(seq: NoteSequence) -> tuple[NoteSequence, int]:
    """Truncate notes that spuriously span until the end of the sequence.

    A note is a runaway when its offset coincides with the sequence end
    and its duration exceeds max(10 s, 4x the 95th-percentile duration of
    the other notes). It is cut to the earlier of the next same-pitch
    onset and the local median duration of its 20 onset-neighbours.
    """
    notes = list(seq.notes)
    if len(notes) < 5:
        log.warning("runaway repair skipped: %d notes is too few for statistics", len(notes))
        return seq, 0

    end = max(n.offset for n in notes)
    at_end = [
        i for i, n in enumerate(notes)
        if end - n.offset <= RUNAWAY_END_TOLERANCE and n.duration > RUNAWAY_ABS_DURATION
    ]
    if not at_end:
        return seq, 0
    rest = [n.duration for i, n in enumerate(notes) if i not in set(at_end)]
    if not rest:
        return seq, 0
    threshold = max(RUNAWAY_ABS_DURATION, RUNAWAY_PERCENTILE_FACTOR * _percentile(rest, 0.95))
    runaway = [i for i in at_end if notes[i].duration > threshold]
    if not runaway:
        return seq, 0

    runaway_set = set(runaway)
    clean_notes = [n for i, n in enumerate(notes) if i not in runaway_set]
    for i in runaway:
        note = notes[i]
        neighbours = sorted(clean_notes, key=lambda n: abs(n.onset - note.onset))
        local = neighbours[:RUNAWAY_NEIGHBORHOOD]
        median_duration = statistics.median(n.duration for n in local) if local else MIN_NOTE_DURATION
        next_same_pitch = min(
            (n.onset for n in notes if n.pitch == note.pitch and n.onset > note.onset),
            default=float("inf"),
        )
        if note.onset + median_duration <= next_same_pitch:
            duration = median_duration
        else:
            duration = duration_until(note.onset, next_same_pitch)
        duration = max(duration, MIN_NOTE_DURATION)
        repaired = _with_duration(note, duration)
        flags = (repaired.flags | {FLAG_REPAIRED}) - {FLAG_RUNAWAY_CANDIDATE}
        notes[i] = replace(repaired, flags=frozenset(flags))
    return canonical_sort(seq.with_notes(notes)), len(runaway)


@dataclass
class CleaningReport:
    """Per-sequence counts from the full cleaning chain."""

    duplicates_removed: int = 0
    overlaps_truncated: int = 0
    short_removed: int = 0
    runaways_repaired: int = 0

    def as_dict(self) -> dict:
        return {
            "duplicates_removed": self.duplicates_removed,
            "overlaps_truncated": self.overlaps_truncated,
            "short_removed": self.short_removed,
            "runaways_repaired": self.runaways_repaired,
        }

    @property
    def total(self) -> int:
        return (
            self.duplicates_removed
            + self.overlaps_truncated
            + self.short_removed
            + self.runaways_repaired
        )


def clean_sequence(seq: NoteSequence) -> tuple[NoteSequence, CleaningReport]:
    """Full chain: sort, dedupe, truncate overlaps, drop <5 ms, repair runaways."""
    report = CleaningReport()
    seq = canonical_sort(seq)
    seq, report.duplicates_removed = remove_duplicates(seq)
    seq, report.overlaps_truncated = truncate_overlaps(seq)
    seq, report.short_removed = filter_short_notes(seq)
    seq, report.runaways_repaired = repair_runaway_notes(seq)
    return seq, report
