"""Synthetic scores, deadpan renderings and controlled degradations.

These generators build fixtures with known ground truth: a rendered
score whose note-for-note correspondence is the identity, monotone time
warps that keep the true mapping, and injected defects (duplicates,
overlaps, runaways, jumps, skipped regions) whose locations are known to
the caller. They mirror the synthetic material used to calibrate the
cleaning and refinement stages.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .sequence import KIND_PERFORMANCE, KIND_SCORE, Note, NoteSequence, canonical_sort

PITCH_LOW = 36
PITCH_HIGH = 96


def random_score(
    rng: np.random.Generator,
    n_onsets: int = 120,
    bpm: float = 120.0,
    max_chord: int = 3,
    beat_grid: float = 0.5,
) -> NoteSequence:
    """A random but well-formed score: quantized onsets, no duplicate
    pitches inside a chord, no same-pitch overlaps, tempo embedded."""
    seconds_per_beat = 60.0 / bpm
    notes = []
    beat = 0.0
    sounding: dict[int, float] = {}  # pitch -> offset beat
    for _ in range(n_onsets):
        chord_size = int(rng.integers(1, max_chord + 1))
        pitches = rng.choice(
            np.arange(PITCH_LOW, PITCH_HIGH), size=chord_size, replace=False
        )
        duration_beats = float(rng.choice([0.5, 1.0, 2.0])) * beat_grid
        for pitch in sorted(int(p) for p in pitches):
            if sounding.get(pitch, 0.0) > beat:
                continue  # previous same-pitch note still active
            sounding[pitch] = beat + duration_beats
            notes.append(
                Note(
                    pitch=pitch,
                    onset=beat * seconds_per_beat,
                    duration=duration_beats * seconds_per_beat,
                    velocity=int(rng.integers(30, 101)),
                    onset_beat=beat,
                    duration_beat=duration_beats,
                )
            )
        beat += float(rng.choice([1, 1, 2])) * beat_grid
    tempo = int(round(60e6 / bpm))
    return canonical_sort(
        NoteSequence(
            notes=tuple(notes),
            ticks_per_quarter=480,
            tempo_events=((0, tempo),),
            kind=KIND_SCORE,
        )
    )


def render_score(score: NoteSequence, bpm: float | None = None) -> NoteSequence:
    """Deadpan performance of a score at a fixed tempo.

    The i-th performance note corresponds to the i-th score note (the
    monotone beat-to-time map preserves canonical order).
    """
    if bpm is None:
        spb = None
    else:
        spb = 60.0 / bpm
    notes = []
    for note in score.notes:
        if spb is None:
            onset, duration = note.onset, note.duration
        else:
            onset = note.onset_beat * spb
            duration = note.duration_beat * spb
        notes.append(
            Note(
                pitch=note.pitch,
                onset=onset,
                duration=duration,
                velocity=note.velocity,
                channel=note.channel,
            )
        )
    tempo = int(round(60e6 / bpm)) if bpm else score.tempo_events[0][1]
    return NoteSequence(
        notes=tuple(notes),
        ticks_per_quarter=score.ticks_per_quarter,
        tempo_events=((0, tempo),),
        kind=KIND_PERFORMANCE,
    )


def warp_performance(
    perf: NoteSequence,
    rng: np.random.Generator,
    n_segments: int = 4,
    tempo_range: tuple[float, float] = (0.7, 1.4),
    jitter: float = 0.0,
) -> tuple[NoteSequence, np.ndarray]:
    """Monotone piecewise-linear time warp plus optional onset jitter.

    Returns the warped performance and `perm` with ``perm[new] = old``,
    the ground-truth correspondence after canonical re-sorting.
    """
    span = perf.end_time
    knots_x = np.concatenate([[0.0], np.sort(rng.uniform(0, span, n_segments - 1)), [span]])
    rates = rng.uniform(tempo_range[0], tempo_range[1], n_segments)
    knots_y = np.concatenate([[0.0], np.cumsum(np.diff(knots_x) * rates)])

    def warp(t: float) -> float:
        return float(np.interp(t, knots_x, knots_y))

    tagged = []
    for old_idx, note in enumerate(perf.notes):
        onset = warp(note.onset) + float(rng.uniform(-jitter, jitter))
        offset = warp(note.offset)
        tagged.append(
            (replace(note, onset=max(onset, 0.0), duration=max(offset - onset, 0.01)), old_idx)
        )
    tagged.sort(key=lambda item: (
        item[0].onset, item[0].pitch, item[0].duration, item[0].velocity, item[0].channel,
    ))
    warped = perf.with_notes(n for n, _ in tagged)
    perm = np.array([old for _, old in tagged], dtype=np.int64)
    return warped, perm


def drop_score_region(
    perf: NoteSequence, indices
) -> tuple[NoteSequence, np.ndarray]:
    """Remove the given note indices (e.g. a skipped repeat).

    Returns the shortened performance and ``kept`` mapping new -> old
    index.
    """
    index_set = set(int(i) for i in indices)
    kept = np.array(
        [i for i in range(len(perf.notes)) if i not in index_set], dtype=np.int64
    )
    return perf.with_notes(perf.notes[i] for i in kept), kept


def inject_jump(perf: NoteSequence, at_time: float, gap: float) -> NoteSequence:
    """Shift every note at or after `at_time` by `gap` seconds."""
    return perf.with_notes(
        replace(n, onset=n.onset + gap) if n.onset >= at_time else n
        for n in perf.notes
    )


def inject_duplicates(
    seq: NoteSequence, rng: np.random.Generator, count: int
) -> tuple[NoteSequence, int]:
    """Copy `count` random notes verbatim (exact duplicates)."""
    notes = list(seq.notes)
    picks = rng.choice(len(notes), size=min(count, len(notes)), replace=False)
    for i in picks:
        notes.append(notes[int(i)])
    return canonical_sort(seq.with_notes(notes)), len(picks)


def inject_runaway(
    seq: NoteSequence, rng: np.random.Generator
) -> tuple[NoteSequence, tuple[int, float]]:
    """Stretch one random note to the end of the sequence plus 60 s.

    Returns the sequence and the (pitch, onset) of the stretched note.
    """
    notes = list(seq.notes)
    i = int(rng.integers(0, len(notes)))
    end = max(n.offset for n in notes) + 60.0
    notes[i] = replace(notes[i], duration=end - notes[i].onset)
    return canonical_sort(seq.with_notes(notes)), (notes[i].pitch, notes[i].onset)
