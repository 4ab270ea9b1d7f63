"""Note sequences: the in-memory representation of score and performance MIDI.

Notes live in 64-bit float seconds; ticks exist only at the file boundary.
Score notes additionally carry beat-domain timing (``onset_beat``,
``duration_beat``) derived from ticks independently of the tempo map.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from pathlib import Path

from . import smf

KIND_SCORE = "score"
KIND_PERFORMANCE = "performance"

FLAG_INTERPOLATED = "interpolated"
FLAG_REPAIRED = "repaired"
FLAG_RUNAWAY_CANDIDATE = "runaway_candidate"

INTERP_MARKER_TEXT = "interp"


@dataclass(frozen=True)
class Note:
    """One keyboard event.

    `onset` and `duration` are seconds; for score notes `onset_beat` and
    `duration_beat` hold the beat-domain timing as well.
    """

    pitch: int
    onset: float
    duration: float
    velocity: int
    channel: int = 0
    flags: frozenset = frozenset()
    onset_beat: float | None = None
    duration_beat: float | None = None

    @property
    def offset(self) -> float:
        return self.onset + self.duration

    def with_flags(self, *names: str) -> "Note":
        return replace(self, flags=self.flags | frozenset(names))


class TempoMap:
    """Piecewise-constant tick<->seconds conversion from set-tempo events."""

    def __init__(self, tempo_events, ticks_per_quarter: int):
        events = sorted(tempo_events, key=lambda item: item[0])
        deduped: list[tuple[int, int]] = []
        for tick, tempo in events:
            if deduped and deduped[-1][0] == tick:
                deduped[-1] = (tick, tempo)
            else:
                deduped.append((tick, tempo))
        if not deduped or deduped[0][0] > 0:
            deduped.insert(0, (0, smf.DEFAULT_TEMPO))
        self.ticks_per_quarter = ticks_per_quarter
        self._ticks = [tick for tick, _ in deduped]
        self._tempos = [tempo for _, tempo in deduped]
        self._seconds = [0.0]
        for i in range(1, len(deduped)):
            dt = self._ticks[i] - self._ticks[i - 1]
            self._seconds.append(
                self._seconds[-1]
                + dt * self._tempos[i - 1] / (1e6 * ticks_per_quarter)
            )

    def tick_to_seconds(self, tick: float) -> float:
        i = bisect.bisect_right(self._ticks, tick) - 1
        i = max(i, 0)
        return self._seconds[i] + (tick - self._ticks[i]) * self._tempos[i] / (
            1e6 * self.ticks_per_quarter
        )

    def seconds_to_tick_float(self, seconds: float) -> float:
        i = bisect.bisect_right(self._seconds, seconds) - 1
        i = max(i, 0)
        return self._ticks[i] + (seconds - self._seconds[i]) * (
            1e6 * self.ticks_per_quarter
        ) / self._tempos[i]

    def seconds_to_tick(self, seconds: float) -> int:
        return max(int(round(self.seconds_to_tick_float(seconds))), 0)


@dataclass(frozen=True)
class NoteSequence:
    """An ordered collection of notes plus the file-level metadata needed
    to serialize it back to MIDI."""

    notes: tuple
    ticks_per_quarter: int = 480
    tempo_events: tuple = ((0, smf.DEFAULT_TEMPO),)
    kind: str = KIND_PERFORMANCE
    markers: tuple = ()
    controls: tuple = ()

    def __len__(self) -> int:
        return len(self.notes)

    @property
    def end_time(self) -> float:
        return max((n.offset for n in self.notes), default=0.0)

    def tempo_map(self) -> TempoMap:
        return TempoMap(self.tempo_events, self.ticks_per_quarter)

    def with_notes(self, notes) -> "NoteSequence":
        return replace(self, notes=tuple(notes))


def _sort_key(note: Note):
    return (note.onset, note.pitch, note.duration, note.velocity, note.channel)


def duration_until(onset: float, offset: float) -> float:
    """Largest duration such that onset + duration <= offset exactly.

    Plain subtraction may overshoot by one ulp, which would register as a
    phantom same-pitch overlap in exhaustive scans.
    """
    duration = offset - onset
    while duration > 0 and onset + duration > offset:
        duration = math.nextafter(duration, 0.0)
    return duration


def canonical_sort(seq: NoteSequence) -> NoteSequence:
    """Stable sort of notes by (onset, pitch, duration)."""
    return seq.with_notes(sorted(seq.notes, key=_sort_key))


def load_midi(path, kind: str = KIND_PERFORMANCE) -> NoteSequence:
    """Load a format 0/1 SMF into a canonically sorted NoteSequence.

    Note-ons left open at the end of a track keep their track-end offset
    and are flagged as runaway candidates for the repair pass.
    """
    data = Path(path).read_bytes()
    parsed = smf.parse_smf(data)
    tempo_map = TempoMap(parsed.tempos, parsed.ticks_per_quarter)
    notes = []
    for raw in parsed.notes:
        onset = tempo_map.tick_to_seconds(raw.on_tick)
        offset = tempo_map.tick_to_seconds(raw.off_tick)
        flags = frozenset((FLAG_RUNAWAY_CANDIDATE,)) if raw.unterminated else frozenset()
        onset_beat = duration_beat = None
        if kind == KIND_SCORE:
            onset_beat = raw.on_tick / parsed.ticks_per_quarter
            duration_beat = (raw.off_tick - raw.on_tick) / parsed.ticks_per_quarter
        notes.append(
            Note(
                pitch=raw.pitch,
                onset=onset,
                duration=duration_until(onset, offset),
                velocity=raw.velocity,
                channel=raw.channel,
                flags=flags,
                onset_beat=onset_beat,
                duration_beat=duration_beat,
            )
        )
    notes.sort(key=_sort_key)
    return NoteSequence(
        notes=tuple(notes),
        ticks_per_quarter=parsed.ticks_per_quarter,
        tempo_events=tuple(parsed.tempos) or ((0, smf.DEFAULT_TEMPO),),
        kind=kind,
        markers=tuple(parsed.markers),
        controls=tuple(parsed.controls),
    )


def save_midi(seq: NoteSequence, path) -> None:
    """Write the sequence as a format 0 file.

    Semantic content (notes, tempo map, markers, control changes) round
    trips; byte layout may differ from the original file.
    """
    tempo_map = seq.tempo_map()
    parsed = smf.ParsedMidi(ticks_per_quarter=seq.ticks_per_quarter)
    parsed.tempos = list(seq.tempo_events)
    parsed.markers = list(seq.markers)
    parsed.controls = list(seq.controls)
    for note in seq.notes:
        if seq.kind == KIND_SCORE and note.onset_beat is not None:
            on_tick = int(round(note.onset_beat * seq.ticks_per_quarter))
            off_tick = int(round((note.onset_beat + note.duration_beat) * seq.ticks_per_quarter))
        else:
            on_tick = tempo_map.seconds_to_tick(note.onset)
            off_tick = tempo_map.seconds_to_tick(note.offset)
        if off_tick <= on_tick:
            off_tick = on_tick + 1
        velocity = min(max(int(note.velocity), 1), 127)
        parsed.notes.append(
            smf.RawNote(note.pitch, velocity, note.channel, on_tick, off_tick)
        )
    Path(path).write_bytes(smf.build_smf(parsed))


def notes_equal(a: NoteSequence, b: NoteSequence) -> bool:
    """Note-for-note content equality (pitch, timing, velocity, channel)."""
    if len(a.notes) != len(b.notes):
        return False
    for na, nb in zip(a.notes, b.notes):
        if (na.pitch, na.onset, na.duration, na.velocity, na.channel) != (
            nb.pitch, nb.onset, nb.duration, nb.velocity, nb.channel,
        ):
            return False
    return True
