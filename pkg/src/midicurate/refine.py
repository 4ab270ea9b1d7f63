"""Alignment refinement: hole processing, onset cleaning, note
interpolation and beat synchronization.

The pipeline turns a raw note alignment into a clean, complete and
temporally coherent score-performance pair. Stages run in the fixed
order H (holes) -> O (onset cleaning) -> I (interpolation) -> S (beat
synchronization); each can be toggled independently. Stages H and O only
remove links, so recall is non-increasing across them; stage I fills
every remaining unperformed score note with a synthetic note flagged and
marked in the output MIDI.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import (
    Alignment,
    build_full_alignment,
    recall as alignment_recall,
    validate_alignment,
)
from .errors import InterpolationError, SynchronizationError
from .sequence import (
    FLAG_INTERPOLATED,
    INTERP_MARKER_TEXT,
    Note,
    NoteSequence,
)
from .cleaning import truncate_overlaps

SIDE_SCORE = "score"
SIDE_PERFORMANCE = "performance"

WEIGHT_EPSILON = 1e-6  # guards inverse-distance weights at zero beat distance


@dataclass
class RefineConfig:
    """Tunable thresholds of the refinement pipeline."""

    hole_window: int = 31          # sliding window size, odd
    hole_ratio: float = 0.75       # unaligned fraction that flags a note
    intra_onset_sigma: float = 2.0
    intra_small_chord_spread: float = 0.05  # seconds; 2-note chord cutoff
    tempo_min: float = 15.0        # BPM
    tempo_max: float = 480.0       # BPM
    local_tempo_window: float = 8.0  # seconds
    min_onset_gap: float = 0.010   # seconds
    interp_min_time: float = 0.05  # seconds between interpolation anchors
    interp_min_beats: float = 0.25
    jump_policy: str = "shift"     # or "drop"
    stages: tuple = ("H", "O", "I")
    initial_shift: bool = True
    sync_ticks_per_beat: int = 480

    def __post_init__(self):
        if not 0 < self.hole_ratio <= 1:
            raise ValueError("hole_ratio must be in (0, 1]")
        if self.hole_window < 3 or self.hole_window % 2 == 0:
            raise ValueError("hole_window must be odd and >= 3")
        if self.tempo_min >= self.tempo_max:
            raise ValueError("tempo_min must be below tempo_max")
        if min(self.min_onset_gap, self.interp_min_time, self.interp_min_beats) < 0:
            raise ValueError("gaps must be non-negative")
        if self.jump_policy not in ("shift", "drop"):
            raise ValueError(f"unknown jump policy {self.jump_policy!r}")
        unknown = set(self.stages) - {"H", "O", "I", "S"}
        if unknown:
            raise ValueError(f"unknown stages {sorted(unknown)}")


@dataclass
class OnsetPair:
    """One distinct score onset with the mean performed time of its chord."""

    score_onset: float  # beats
    perf_time: float    # seconds, mean over matched chord notes
    member_links: tuple  # (score_index, perf_index) pairs


@dataclass
class HoleRange:
    """Inclusive note-index range of an alignment hole on one side."""

    side: str
    start: int
    end: int


@dataclass
class RefineReport:
    """Counts and recall ratios produced by the refinement stages."""

    recall_raw: float = 0.0
    recall_after_h: float = 0.0
    recall_after_o: float = 0.0
    holes_removed: int = 0
    hole_spans: list = field(default_factory=list)
    intra_outliers_removed: int = 0
    jumps_adjusted: int = 0
    total_shift_seconds: float = 0.0
    close_onsets_merged: int = 0
    notes_interpolated: int = 0
    notes_stripped: int = 0
    interrupted: bool = False

    def as_dict(self) -> dict:
        return {
            "recall_raw": self.recall_raw,
            "recall_after_h": self.recall_after_h,
            "recall_after_o": self.recall_after_o,
            "holes_removed": self.holes_removed,
            "hole_spans": [
                {"side": h.side, "start": h.start, "end": h.end} for h in self.hole_spans
            ],
            "intra_outliers_removed": self.intra_outliers_removed,
            "jumps_adjusted": self.jumps_adjusted,
            "total_shift_seconds": self.total_shift_seconds,
            "close_onsets_merged": self.close_onsets_merged,
            "notes_interpolated": self.notes_interpolated,
            "notes_stripped": self.notes_stripped,
            "interrupted": self.interrupted,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def _score_beat(note: Note) -> float:
    return note.onset_beat if note.onset_beat is not None else note.onset


def build_onset_pairs(a: Alignment, score: NoteSequence, perf: NoteSequence) -> list[OnsetPair]:
    """Matched links grouped by exact score onset, sorted by beat."""
    groups: dict[float, list[tuple[int, int]]] = {}
    for link in a.links:
        if link.kind == "match":
            beat = _score_beat(score.notes[link.score_index])
            groups.setdefault(beat, []).append((link.score_index, link.perf_index))
    pairs = []
    for beat in sorted(groups):
        members = tuple(groups[beat])
        mean_time = sum(perf.notes[p].onset for _, p in members) / len(members)
        pairs.append(OnsetPair(beat, mean_time, members))
    return pairs


def detect_holes(a: Alignment, side: str, cfg: RefineConfig) -> list[HoleRange]:
    """Contiguous regions whose unaligned fraction exceeds the hole ratio.

    The centered window of `hole_window` notes is truncated at sequence
    edges; sides shorter than the window report no holes.
    """
    if side == SIDE_SCORE:
        n = a.n_score
        aligned = np.zeros(n, dtype=bool)
        for link in a.links:
            if link.kind == "match":
                aligned[link.score_index] = True
    elif side == SIDE_PERFORMANCE:
        n = a.n_perf
        aligned = a.matched_perf_mask()
    else:
        raise ValueError(f"unknown side {side!r}")
    if n < cfg.hole_window:
        return []

    unaligned = (~aligned).astype(np.int64)
    prefix = np.concatenate([[0], np.cumsum(unaligned)])
    half = cfg.hole_window // 2
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    counts = prefix[hi + 1] - prefix[lo]
    flagged = counts / (hi - lo + 1) > cfg.hole_ratio

    ranges = []
    start = None
    for i in range(n):
        if flagged[i] and start is None:
            start = i
        elif not flagged[i] and start is not None:
            ranges.append(HoleRange(side, start, i - 1))
            start = None
    if start is not None:
        ranges.append(HoleRange(side, start, n - 1))
    return ranges


def remove_hole_links(a: Alignment, ranges) -> Alignment:
    """Unlink every match that falls inside a hole on its own side."""
    score_holes = [(r.start, r.end) for r in ranges if r.side == SIDE_SCORE]
    perf_holes = [(r.start, r.end) for r in ranges if r.side == SIDE_PERFORMANCE]

    def in_holes(index, holes):
        return any(start <= index <= end for start, end in holes)

    survivors = [
        (l.score_index, l.perf_index)
        for l in a.links
        if l.kind == "match"
        and not in_holes(l.score_index, score_holes)
        and not in_holes(l.perf_index, perf_holes)
    ]
    return build_full_alignment(a.n_score, a.n_perf, survivors, a.stage_recalls)


def clean_intra_onset(
    a: Alignment, score: NoteSequence, perf: NoteSequence, cfg: RefineConfig
) -> tuple[Alignment, int]:
    """Remove chord members whose onset strays from the chord mean.

    Chords of three or more notes drop members beyond
    ``intra_onset_sigma`` chord standard deviations, iterating with
    recomputed means until clean. Two-note chords cannot be judged by
    their own deviation (each sits exactly one sigma out), so they drop
    both links when their spread exceeds the small-chord cutoff.
    """
    pairs = build_onset_pairs(a, score, perf)
    removed: set[tuple[int, int]] = set()
    for pair in pairs:
        members = list(pair.member_links)
        while len(members) >= 3:
            times = [perf.notes[p].onset for _, p in members]
            mean = sum(times) / len(times)
            devs = [t - mean for t in times]
            sigma = (sum(d * d for d in devs) / len(devs)) ** 0.5
            worst = max(range(len(devs)), key=lambda k: abs(devs[k]))
            if sigma > 0 and abs(devs[worst]) > cfg.intra_onset_sigma * sigma:
                removed.add(members.pop(worst))
            else:
                break
        if len(members) == 2:
            spread = abs(perf.notes[members[0][1]].onset - perf.notes[members[1][1]].onset)
            if spread > cfg.intra_small_chord_spread:
                removed.update(members)

    if not removed:
        return a, 0
    survivors = [
        (l.score_index, l.perf_index)
        for l in a.links
        if l.kind == "match" and (l.score_index, l.perf_index) not in removed
    ]
    return (
        build_full_alignment(a.n_score, a.n_perf, survivors, a.stage_recalls),
        len(removed),
    )


@dataclass
class InterOnsetStats:
    jumps_adjusted: int = 0
    total_shift_seconds: float = 0.0
    close_onsets_merged: int = 0


def _median_tempo(pairs, lo: float, hi: float) -> float:
    tempos = []
    for prev, cur in zip(pairs, pairs[1:]):
        dt = cur.perf_time - prev.perf_time
        if dt > 0:
            tempos.append((cur.score_onset - prev.score_onset) / dt)
    if not tempos:
        return min(max(2.0, lo), hi)
    return min(max(statistics.median(tempos), lo), hi)


def clean_inter_onset(
    a: Alignment, score: NoteSequence, perf: NoteSequence, cfg: RefineConfig
) -> tuple[Alignment, NoteSequence, InterOnsetStats]:
    """Fix implied-tempo outliers between consecutive onsets.

    Onsets closer than ``min_onset_gap`` in performance time are merged
    into the earlier onset (their links are removed). A gap implying a
    tempo outside [tempo_min, tempo_max] BPM is an alignment jump: with
    the default shift policy the rest of the performance is moved so the
    gap matches the local tempo; with the drop policy the onset's links
    are removed instead.
    """
    pairs = build_onset_pairs(a, score, perf)
    stats = InterOnsetStats()
    if len(pairs) < 2:
        return a, perf, stats

    lo_bps = cfg.tempo_min / 60.0
    hi_bps = cfg.tempo_max / 60.0
    fallback = _median_tempo(pairs, lo_bps, hi_bps)

    notes = list(perf.notes)
    times = [p.perf_time for p in pairs]
    kept: list[int] = [0]
    removed_links: set[tuple[int, int]] = set()

    def local_tempo(prev_idx: int) -> float:
        window = [
            j for j in kept if times[prev_idx] - times[j] < cfg.local_tempo_window
        ]
        if len(window) >= 2:
            first = window[0]
            span_t = times[prev_idx] - times[first]
            span_b = pairs[prev_idx].score_onset - pairs[first].score_onset
            if span_t > 0 and span_b > 0:
                return min(max(span_b / span_t, lo_bps), hi_bps)
        return fallback

    def shift_from(pair_idx: int, delta: float) -> None:
        cutoff = min(notes[p].onset for _, p in pairs[pair_idx].member_links) - 1e-9
        for k, note in enumerate(notes):
            if note.onset >= cutoff:
                notes[k] = replace(note, onset=note.onset + delta)
        for j in range(pair_idx, len(times)):
            times[j] += delta

    for i in range(1, len(pairs)):
        prev = kept[-1]
        dt = times[i] - times[prev]
        if dt < cfg.min_onset_gap:
            removed_links.update(pairs[i].member_links)
            stats.close_onsets_merged += 1
            continue
        ioi_beats = pairs[i].score_onset - pairs[prev].score_onset
        tempo_bps = ioi_beats / dt
        if not lo_bps <= tempo_bps <= hi_bps:
            if cfg.jump_policy == "drop":
                removed_links.update(pairs[i].member_links)
                stats.jumps_adjusted += 1
                continue
            tau = local_tempo(prev)
            expected = times[prev] + ioi_beats / tau
            delta = expected - times[i]
            shift_from(i, delta)
            stats.jumps_adjusted += 1
            stats.total_shift_seconds += abs(delta)
        kept.append(i)

    survivors = [
        (l.score_index, l.perf_index)
        for l in a.links
        if l.kind == "match" and (l.score_index, l.perf_index) not in removed_links
    ]
    new_a = build_full_alignment(a.n_score, a.n_perf, survivors, a.stage_recalls)
    return new_a, perf.with_notes(notes), stats


def strip_unaligned(perf: NoteSequence, a: Alignment) -> tuple[NoteSequence, Alignment]:
    """Delete performance notes without a match and compact the indices."""
    matched = a.matched_perf_mask()
    remap = np.full(a.n_perf, -1, dtype=np.int64)
    remap[matched] = np.arange(int(matched.sum()))
    notes = [n for i, n in enumerate(perf.notes) if matched[i]]
    survivors = [
        (l.score_index, int(remap[l.perf_index]))
        for l in a.links
        if l.kind == "match"
    ]
    new_a = build_full_alignment(a.n_score, len(notes), survivors, a.stage_recalls)
    return perf.with_notes(notes), new_a


def _interp_anchors(pairs, beat, cfg):
    """Anchor pair (j, k) straddling `beat`, widened until both the
    minimum time and beat gaps hold (or the list is exhausted)."""
    beats = [p.score_onset for p in pairs]
    k = int(np.searchsorted(beats, beat))
    j = k - 1

    def gaps_ok(j, k):
        return (
            pairs[k].perf_time - pairs[j].perf_time >= cfg.interp_min_time
            and pairs[k].score_onset - pairs[j].score_onset >= cfg.interp_min_beats
        )

    if j < 0 or k >= len(pairs):
        return None
    while not gaps_ok(j, k):
        if j > 0:
            j -= 1
        elif k < len(pairs) - 1:
            k += 1
        else:
            break
    return j, k


def _boundary_tempo(pairs, cfg, at_start: bool) -> float:
    """Tempo (beats/s) of the nearest anchor pair satisfying the minimum
    gaps, scanning inward from the boundary."""
    indices = range(len(pairs) - 1) if at_start else range(len(pairs) - 2, -1, -1)
    for j in indices:
        k = j + 1
        span_t = pairs[k].perf_time - pairs[j].perf_time
        span_b = pairs[k].score_onset - pairs[j].score_onset
        if span_t >= cfg.interp_min_time and span_b >= cfg.interp_min_beats:
            return span_b / span_t
    return _median_tempo(pairs, 1e-3, 1e3)


def interpolate_notes(
    score: NoteSequence, perf: NoteSequence, a: Alignment, cfg: RefineConfig
) -> tuple[NoteSequence, Alignment, int]:
    """Create a synthetic performance note for every unperformed score note.

    Onsets are linearly interpolated between the nearest matched onsets
    satisfying the minimum anchor gaps; duration and velocity are
    inverse-beat-distance weighted means of the matched notes between the
    anchors. Synthetic notes carry the interpolated flag and an "interp"
    text marker; the returned alignment is complete (no deletions).
    """
    matches = [(l.score_index, l.perf_index) for l in a.links if l.kind == "match"]
    if len(matches) < 2:
        raise InterpolationError("need at least two matched notes to interpolate")
    pairs = build_onset_pairs(a, score, perf)
    pair_beats = [p.score_onset for p in pairs]
    # matched notes sorted by score beat, for the feature pools
    matched_feats = sorted(
        (_score_beat(score.notes[s]), perf.notes[p].duration, perf.notes[p].velocity)
        for s, p in matches
    )
    feat_beats = [f[0] for f in matched_feats]

    deletions = [l.score_index for l in a.links if l.kind == "deletion"]
    new_notes: list[Note] = []
    taken = {(n.pitch, n.onset) for n in perf.notes}
    tempo_map = perf.tempo_map()
    markers = list(perf.markers)

    for s_idx in deletions:
        s_note = score.notes[s_idx]
        beat = _score_beat(s_note)
        pos = int(np.searchsorted(pair_beats, beat))
        if pos < len(pairs) and pair_beats[pos] == beat:
            onset = pairs[pos].perf_time
            lo_beat, hi_beat = beat - cfg.interp_min_beats, beat + cfg.interp_min_beats
        else:
            anchors = _interp_anchors(pairs, beat, cfg)
            if anchors is None:
                # before the first or after the last matched onset
                if beat < pairs[0].score_onset:
                    tau = _boundary_tempo(pairs, cfg, at_start=True)
                    onset = pairs[0].perf_time - (pairs[0].score_onset - beat) / tau
                else:
                    tau = _boundary_tempo(pairs, cfg, at_start=False)
                    onset = pairs[-1].perf_time + (beat - pairs[-1].score_onset) / tau
                lo_beat, hi_beat = beat - 2.0, beat + 2.0
            else:
                j, k = anchors
                span_b = pairs[k].score_onset - pairs[j].score_onset
                frac = (beat - pairs[j].score_onset) / span_b if span_b > 0 else 0.5
                onset = pairs[j].perf_time + frac * (pairs[k].perf_time - pairs[j].perf_time)
                lo_beat, hi_beat = pairs[j].score_onset, pairs[k].score_onset

        lo = int(np.searchsorted(feat_beats, lo_beat, side="left"))
        hi = int(np.searchsorted(feat_beats, hi_beat, side="right"))
        pool = matched_feats[lo:hi] or matched_feats
        weights = [1.0 / (WEIGHT_EPSILON + abs(b - beat)) for b, _, _ in pool]
        total = sum(weights)
        duration = sum(w * d for w, (_, d, _) in zip(weights, pool)) / total
        velocity = int(round(sum(w * v for w, (_, _, v) in zip(weights, pool)) / total))
        velocity = min(max(velocity, 1), 127)

        while (s_note.pitch, onset) in taken:
            onset += 0.0005
        taken.add((s_note.pitch, onset))
        new_notes.append(
            Note(
                pitch=s_note.pitch,
                onset=onset,
                duration=max(duration, 1e-3),
                velocity=velocity,
                channel=s_note.channel,
                flags=frozenset((FLAG_INTERPOLATED,)),
                onset_beat=s_note.onset_beat,
                duration_beat=s_note.duration_beat,
            )
        )
        markers.append((tempo_map.seconds_to_tick(onset), INTERP_MARKER_TEXT))

    # merge, resort and remap the alignment onto the new indexing
    tagged = [(note, i) for i, note in enumerate(perf.notes)]
    tagged += [(note, None) for note in new_notes]
    tagged.sort(key=lambda item: (
        item[0].onset, item[0].pitch, item[0].duration, item[0].velocity, item[0].channel,
    ))
    remap: dict[int, int] = {}
    synth_at: dict[int, int] = {}
    merged = []
    for new_idx, (note, old_idx) in enumerate(tagged):
        merged.append(note)
        if old_idx is not None:
            remap[old_idx] = new_idx
        else:
            synth_at[id(note)] = new_idx

    new_matches = [(s, remap[p]) for s, p in matches]
    for s_idx, note in zip(deletions, new_notes):
        new_matches.append((s_idx, synth_at[id(note)]))

    markers.sort(key=lambda item: item[0])
    merged_seq = replace(perf, notes=tuple(merged), markers=tuple(markers))
    merged_seq, _ = truncate_overlaps(merged_seq)
    new_a = build_full_alignment(a.n_score, len(merged), new_matches, a.stage_recalls)
    return merged_seq, new_a, len(new_notes)


def synchronize_beats(
    score: NoteSequence,
    perf: NoteSequence,
    a: Alignment,
    ticks_per_beat: int = 480,
) -> NoteSequence:
    """Re-express the performance on the score's beat grid.

    Score beat positions map to a fixed tick grid (one beat per
    `ticks_per_beat` ticks) with set-tempo events between beats chosen so
    every knot of the beat-to-time map is reproduced exactly; individual
    note events land within half a tick of their pre-sync seconds. The
    performance is first shifted so its first note coincides with the
    first score note's time.
    """
    pairs = build_onset_pairs(a, score, perf)
    if len(pairs) < 1:
        raise SynchronizationError("no matched onsets to synchronize")
    for prev, cur in zip(pairs, pairs[1:]):
        if cur.perf_time <= prev.perf_time:
            raise SynchronizationError(
                f"non-monotone beat-to-time map at beat {cur.score_onset}"
            )

    old_map = perf.tempo_map()
    shift = min(n.onset for n in score.notes) - min(n.onset for n in perf.notes)
    beats = [p.score_onset for p in pairs]
    times = [p.perf_time + shift for p in pairs]

    # knots: matched onsets plus the integer-beat grid inside their range
    knots = {round(b * ticks_per_beat): t for b, t in zip(beats, times)}
    for k in range(int(np.ceil(beats[0])), int(np.floor(beats[-1])) + 1):
        tick = k * ticks_per_beat
        if beats[0] < k < beats[-1] and tick not in knots:
            knots[tick] = float(np.interp(k, beats, times))
    ticks = sorted(knots)
    knot_times = [knots[t] for t in ticks]

    tempos: list[tuple[int, int]] = []
    for i in range(len(ticks) - 1):
        dtick = ticks[i + 1] - ticks[i]
        dt = knot_times[i + 1] - knot_times[i]
        if dtick <= 0 or dt <= 0:
            raise SynchronizationError("degenerate knot spacing")
        uspq = int(round(dt * 1e6 * ticks_per_beat / dtick))
        uspq = min(uspq, 0xFFFFFF)  # SMF set-tempo payload is 3 bytes
        if not tempos or tempos[-1][1] != uspq:
            tempos.append((ticks[i], uspq))
    if not tempos:
        tempos.append((ticks[0], 500_000))
    if tempos[0][0] > 0:
        tempos.insert(0, (0, tempos[0][1]))

    # anchor the tick<->seconds map so that knot ticks hit knot times
    new_seq_map = _AnchoredMap(ticks, knot_times, tempos, ticks_per_beat)

    new_notes = []
    for note in perf.notes:
        on_tick = new_seq_map.seconds_to_tick(note.onset + shift)
        off_tick = max(new_seq_map.seconds_to_tick(note.offset + shift), on_tick + 1)
        new_notes.append(
            replace(
                note,
                onset=new_seq_map.tick_to_seconds(on_tick),
                duration=new_seq_map.tick_to_seconds(off_tick)
                - new_seq_map.tick_to_seconds(on_tick),
            )
        )
    new_markers = tuple(
        (new_seq_map.seconds_to_tick(old_map.tick_to_seconds(tick) + shift), text)
        for tick, text in perf.markers
    )
    new_controls = tuple(
        (new_seq_map.seconds_to_tick(old_map.tick_to_seconds(tick) + shift), ch, cc, val)
        for tick, ch, cc, val in perf.controls
    )
    return NoteSequence(
        notes=tuple(new_notes),
        ticks_per_quarter=ticks_per_beat,
        tempo_events=tuple(tempos),
        kind=perf.kind,
        markers=new_markers,
        controls=new_controls,
    )


class _AnchoredMap:
    """Piecewise-linear tick<->seconds map anchored at the sync knots.

    Bypasses integer-microsecond tempo rounding so knot times reproduce
    exactly; between knots it matches the emitted tempo events to within
    one microsecond per beat.
    """

    def __init__(self, ticks, times, tempos, ticks_per_beat):
        self.ticks = list(ticks)
        self.times = list(times)
        self.tpb = ticks_per_beat
        self.edge_tempo_start = tempos[0][1]
        self.edge_tempo_end = tempos[-1][1]

    def tick_to_seconds(self, tick: float) -> float:
        if tick <= self.ticks[0]:
            return self.times[0] - (self.ticks[0] - tick) * self.edge_tempo_start / (
                1e6 * self.tpb
            )
        if tick >= self.ticks[-1]:
            return self.times[-1] + (tick - self.ticks[-1]) * self.edge_tempo_end / (
                1e6 * self.tpb
            )
        return float(np.interp(tick, self.ticks, self.times))

    def seconds_to_tick(self, seconds: float) -> int:
        if seconds <= self.times[0]:
            delta = (self.times[0] - seconds) * 1e6 * self.tpb / self.edge_tempo_start
            return max(int(round(self.ticks[0] - delta)), 0)
        if seconds >= self.times[-1]:
            delta = (seconds - self.times[-1]) * 1e6 * self.tpb / self.edge_tempo_end
            return int(round(self.ticks[-1] + delta))
        return int(round(float(np.interp(seconds, self.times, self.ticks))))


def refine(
    score: NoteSequence,
    perf: NoteSequence,
    a: Alignment,
    cfg: RefineConfig | None = None,
    recall_floor: float | None = None,
) -> tuple[NoteSequence, Alignment, RefineReport]:
    """Run the enabled pipeline stages in order H -> O -> I -> S.

    Existing links are never re-matched, only removed; stage I then adds
    synthetic notes for whatever is still unperformed. When
    `recall_floor` is given and the post-cleaning recall falls below it,
    the pipeline stops before interpolation and flags the report as
    interrupted.
    """
    cfg = cfg or RefineConfig()
    validate_alignment(a)
    report = RefineReport()
    report.recall_raw = alignment_recall(a)
    recalls = dict(a.stage_recalls)
    recalls["raw"] = report.recall_raw

    if cfg.initial_shift and perf.notes and score.notes:
        delta = min(n.onset for n in score.notes) - min(n.onset for n in perf.notes)
        perf = perf.with_notes(replace(n, onset=n.onset + delta) for n in perf.notes)

    if "H" in cfg.stages:
        ranges = detect_holes(a, SIDE_SCORE, cfg) + detect_holes(a, SIDE_PERFORMANCE, cfg)
        before = a.n_matched
        a = remove_hole_links(a, ranges)
        report.holes_removed = before - a.n_matched
        report.hole_spans = ranges
    report.recall_after_h = alignment_recall(a)
    recalls["hole"] = report.recall_after_h

    if "O" in cfg.stages:
        a, report.intra_outliers_removed = clean_intra_onset(a, score, perf, cfg)
        a, perf, inter_stats = clean_inter_onset(a, score, perf, cfg)
        report.jumps_adjusted = inter_stats.jumps_adjusted
        report.total_shift_seconds = inter_stats.total_shift_seconds
        report.close_onsets_merged = inter_stats.close_onsets_merged
        before = len(perf.notes)
        perf, a = strip_unaligned(perf, a)
        report.notes_stripped = before - len(perf.notes)
    report.recall_after_o = alignment_recall(a)
    recalls["onset"] = report.recall_after_o

    if recall_floor is not None and report.recall_after_o < recall_floor:
        report.interrupted = True
        a = replace_recalls(a, recalls)
        return perf, a, report

    if "I" in cfg.stages:
        perf, a, report.notes_interpolated = interpolate_notes(score, perf, a, cfg)
        recalls["interpolated"] = alignment_recall(a)

    if "S" in cfg.stages:
        perf = synchronize_beats(score, perf, a, cfg.sync_ticks_per_beat)

    a = replace_recalls(a, recalls)
    return perf, a, report


def replace_recalls(a: Alignment, recalls: dict) -> Alignment:
    return Alignment(
        links=a.links,
        n_score=a.n_score,
        n_perf=a.n_perf,
        stage_recalls=dict(recalls),
        table=a.table,
    )
