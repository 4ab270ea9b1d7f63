"""Performance deduplication, heuristic quality labels and synthetic
corruption generators.

Deduplication compares performances by the fraction of notes whose
same-pitch counterpart in the other sequence lies within a 50 ms onset
tolerance (both start-shifted to zero); performances at least 50% similar
cluster together and a single lead survives per cluster. Quality labels
come from the adjusted alignment ratio with deliberately unlabeled bands
at the class boundaries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptySequenceError
from .sequence import Note, NoteSequence, canonical_sort

SIMILARITY_TOLERANCE = 0.05  # seconds; near-perfect AMT onset error bound
DUPLICATE_THRESHOLD = 0.5

# lead selection prefers sources with fewer performance samples
SOURCE_PRIORITY = {"GiantMIDI": 0, "ATEPP": 1, "PERiScoPe": 2, "Aria": 3}
DEFAULT_PRIORITY = 4

LABEL_SCORE = "Score"
LABEL_HIGH_QUALITY = "HighQuality"
LABEL_LOW_QUALITY = "LowQuality"
LABEL_CORRUPTED = "Corrupted"
LABEL_NONE = "NoLabel"

HQ_MIN_RATIO = 0.9   # transcribed HQ requires ratio strictly above
LQ_RANGE = (0.7, 0.85)  # open interval
CORRUPTED_MAX_RATIO = 0.65  # strictly below
STAR_MIN_RECALL = 0.85  # inclusive

# corruption intensities: (removal range, onset/offset jitter, velocity
# jitter bins, max insertion fraction)
CORRUPTION_LEVELS = {
    "LQ": ((0.15, 0.25), 0.020, 5, 0.05),
    "C": ((0.35, 0.50), 0.150, 20, 0.30),
}
SCOREIFY_JITTER = 0.010


@dataclass
class SimilarityScore:
    value: float
    direction: str  # "x->z", "z->x" or "max"
    close_pairs: int
    total_notes: int


def _directed_similarity(x: NoteSequence, z: NoteSequence, tol: float) -> tuple[int, int]:
    """Count notes of x with a same-pitch note of z within tol seconds."""
    x0 = min(n.onset for n in x.notes)
    z0 = min(n.onset for n in z.notes)
    z_by_pitch: dict[int, np.ndarray] = {}
    for note in z.notes:
        z_by_pitch.setdefault(note.pitch, []).append(note.onset - z0)
    z_by_pitch = {p: np.sort(np.asarray(v)) for p, v in z_by_pitch.items()}

    close = 0
    for note in x.notes:
        onsets = z_by_pitch.get(note.pitch)
        if onsets is None:
            continue
        t = note.onset - x0
        i = int(np.searchsorted(onsets, t))
        best = min(
            abs(onsets[j] - t) for j in (i - 1, i) if 0 <= j < len(onsets)
        )
        if best <= tol:
            close += 1
    return close, len(x.notes)


def directed_similarity(
    x: NoteSequence, z: NoteSequence, tol: float = SIMILARITY_TOLERANCE
) -> SimilarityScore:
    """Fraction of x's notes with a close same-pitch note in z."""
    if not x.notes or not z.notes:
        raise EmptySequenceError("similarity needs non-empty sequences")
    close, total = _directed_similarity(x, z, tol)
    return SimilarityScore(close / total, "x->z", close, total)


def similarity(
    x: NoteSequence, z: NoteSequence, tol: float = SIMILARITY_TOLERANCE
) -> SimilarityScore:
    """Max of the two directed close-note fractions between x and z."""
    if not x.notes or not z.notes:
        raise EmptySequenceError("similarity needs non-empty sequences")
    close_xz, n_x = _directed_similarity(x, z, tol)
    close_zx, n_z = _directed_similarity(z, x, tol)
    forward = close_xz / n_x
    backward = close_zx / n_z
    if forward >= backward:
        return SimilarityScore(forward, "max", close_xz, n_x)
    return SimilarityScore(backward, "max", close_zx, n_z)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def cluster_duplicates(
    seqs, sim_threshold: float = DUPLICATE_THRESHOLD, tol: float = SIMILARITY_TOLERANCE
) -> list[list[int]]:
    """Single-linkage clusters over the pairwise similarity graph.

    Returns index lists, each sorted, the clusters ordered by their
    smallest member; singletons are kept. Deterministic for a fixed
    input order.
    """
    n = len(seqs)
    uf = _UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if similarity(seqs[i], seqs[j], tol).value >= sim_threshold:
                uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return [sorted(groups[root]) for root in sorted(groups)]


@dataclass
class DedupMeta:
    """What lead selection needs to know about one performance."""

    path: str
    source: str = "other"
    recall: float | None = None


def select_lead(cluster: list[DedupMeta]) -> DedupMeta:
    """Pick the cluster representative.

    Source priority GiantMIDI > ATEPP > PERiScoPe > Aria, ties broken by
    higher alignment recall when available, then by path for determinism.
    """
    if not cluster:
        raise ValueError("empty cluster")
    return min(
        cluster,
        key=lambda m: (
            SOURCE_PRIORITY.get(m.source, DEFAULT_PRIORITY),
            -(m.recall if m.recall is not None else -1.0),
            m.path,
        ),
    )


@dataclass
class QualityLabel:
    label: str
    basis: str = "heuristic"
    adjusted_ratio_input: float | None = None


def heuristic_label(
    recorded: bool,
    transcribed: bool,
    adjusted_ratio: float | None,
    is_score_midi: bool = False,
) -> QualityLabel:
    """Alignment-based soft quality label.

    All interval boundaries are strict; ratios in [0.65, 0.7] and
    [0.85, 0.9] stay unlabeled on purpose.
    """
    if is_score_midi:
        return QualityLabel(LABEL_SCORE, adjusted_ratio_input=adjusted_ratio)
    if recorded:
        return QualityLabel(LABEL_HIGH_QUALITY, adjusted_ratio_input=adjusted_ratio)
    if transcribed and adjusted_ratio is not None:
        if adjusted_ratio > HQ_MIN_RATIO:
            return QualityLabel(LABEL_HIGH_QUALITY, adjusted_ratio_input=adjusted_ratio)
        if LQ_RANGE[0] < adjusted_ratio < LQ_RANGE[1]:
            return QualityLabel(LABEL_LOW_QUALITY, adjusted_ratio_input=adjusted_ratio)
        if adjusted_ratio < CORRUPTED_MAX_RATIO:
            return QualityLabel(LABEL_CORRUPTED, adjusted_ratio_input=adjusted_ratio)
    return QualityLabel(LABEL_NONE, adjusted_ratio_input=adjusted_ratio)


def star_filter(label: QualityLabel, refined_recall: float) -> bool:
    """High-confidence gate: high quality and at least 85% aligned."""
    return label.label == LABEL_HIGH_QUALITY and refined_recall >= STAR_MIN_RECALL


@dataclass
class CorruptionPlan:
    """Ground truth of one corrupt() run, for calibration and testing."""

    kept_indices: list      # indices into the source notes
    jittered_notes: list    # same order as kept_indices
    inserted_notes: list


def corruption_plan(seq: NoteSequence, level: str, seed: int) -> CorruptionPlan:
    """Deterministic removal/jitter/insertion plan behind corrupt()."""
    if not seq.notes:
        raise EmptySequenceError("cannot corrupt an empty sequence")
    if level not in CORRUPTION_LEVELS:
        raise ValueError(f"unknown corruption level {level!r}")
    (rm_lo, rm_hi), jitter, vel_jitter, ins_max = CORRUPTION_LEVELS[level]
    rng = np.random.default_rng(seed)
    notes = list(seq.notes)
    n = len(notes)

    remove_count = int(round(rng.uniform(rm_lo, rm_hi) * n))
    keep = np.ones(n, dtype=bool)
    if remove_count:
        keep[rng.choice(n, size=remove_count, replace=False)] = False
    kept_indices = [i for i in range(n) if keep[i]]

    jittered = []
    for i in kept_indices:
        note = notes[i]
        onset = max(note.onset + rng.uniform(-jitter, jitter), 0.0)
        offset = note.offset + rng.uniform(-jitter, jitter)
        velocity = int(np.clip(note.velocity + rng.integers(-vel_jitter, vel_jitter + 1), 1, 127))
        jittered.append(
            replace(
                note,
                onset=onset,
                duration=max(offset - onset, 0.001),
                velocity=velocity,
            )
        )

    pitches = [n_.pitch for n_ in notes]
    lo_pitch, hi_pitch = min(pitches), max(pitches)
    span = max(n_.offset for n_ in notes)
    insert_count = int(round(rng.uniform(0.0, ins_max) * n))
    inserted = []
    for _ in range(insert_count):
        source = notes[int(rng.integers(0, n))]
        inserted.append(
            Note(
                pitch=int(rng.integers(lo_pitch, hi_pitch + 1)),
                onset=float(rng.uniform(0.0, span)),
                duration=source.duration,
                velocity=source.velocity,
                channel=source.channel,
            )
        )
    return CorruptionPlan(kept_indices, jittered, inserted)


def corrupt(seq: NoteSequence, level: str, seed: int) -> NoteSequence:
    """Synthetically degrade a clean sequence at LQ or C intensity.

    Applies random note removal, onset/offset jitter, velocity jitter and
    random note insertions, then canonicalizes. Deterministic per seed.
    """
    plan = corruption_plan(seq, level, seed)
    return canonical_sort(seq.with_notes(plan.jittered_notes + plan.inserted_notes))


def scoreify(seq: NoteSequence, seed: int) -> NoteSequence:
    """Make a sequence look like a transcription of a rendered score:
    one constant velocity per file plus up-to-10 ms onset jitter."""
    rng = np.random.default_rng(seed)
    velocity = int(rng.integers(1, 128))
    notes = [
        replace(
            note,
            onset=max(note.onset + rng.uniform(-SCOREIFY_JITTER, SCOREIFY_JITTER), 0.0),
            velocity=velocity,
        )
        for note in seq.notes
    ]
    return canonical_sort(seq.with_notes(notes))


def write_duplicate_report(rows, path) -> None:
    """CSV: piece id, cluster id, member path, is_lead flag."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["piece_id", "cluster_id", "member_path", "is_lead"])
        for piece_id, cluster_id, member_path, is_lead in rows:
            writer.writerow([piece_id, cluster_id, member_path, int(is_lead)])


def write_label_report(rows, path) -> None:
    """CSV: path, label, adjusted ratio, basis."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label", "adjusted_ratio", "basis"])
        for file_path, label in rows:
            ratio = "" if label.adjusted_ratio_input is None else repr(label.adjusted_ratio_input)
            writer.writerow([file_path, label.label, ratio, label.basis])
