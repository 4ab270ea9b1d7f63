"""Candidate pair selection and two-level note matching.

Matching works on onset clusters: a coarse DTW over chord pitch-content
(multiset Jaccard cost, steps diagonal/horizontal/vertical) warps the two
cluster sequences onto each other, then equal pitches inside each warped
cluster pair are matched one-to-one. Unmatched notes become deletions
(score side) and insertions (performance side).

The DTW inner loop is JIT-compiled; a Sakoe-Chiba band can bound the
search region for very long sequences.
"""

from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass

import numpy as np
from numba import njit

from .alignment import (
    Alignment,
    build_full_alignment,
    recall as alignment_recall,
    validate_alignment,
)
from .errors import EmptySequenceError
from .sequence import KIND_SCORE, NoteSequence

RATIO_MIN = 0.75
RATIO_MAX = 1.33
DEFINITIVE_RECALL = 0.7  # strict: recall must exceed this

SCORE_CLUSTER_EPSILON = 0.0  # beats; score chords share exact onsets
PERF_CLUSTER_EPSILON = 0.025  # seconds; spread of a performed chord
DEFAULT_BAND_FRACTION = 0.1  # Sakoe-Chiba width when banding is enabled

SOURCES = ("ASAP", "ATEPP", "GiantMIDI", "PERiScoPe", "Aria", "other")

_CATALOG_RE = re.compile(r"\b(op|bwv|k|d|no)\.?\s*_?(\d+[a-z]?)", re.IGNORECASE)
_KEY_RE = re.compile(r"\b([a-g])_(?:(sharp|flat)_)?(major|minor)\b", re.IGNORECASE)


@dataclass
class PieceMeta:
    """Metadata used to prefilter plausible score-performance pairs."""

    composer: str
    title: str
    note_count: int
    source: str = "other"
    recorded: bool = False
    catalog_tokens: frozenset = frozenset()
    key_tokens: frozenset = frozenset()
    path: str = ""

    @classmethod
    def from_title(
        cls, composer, title, note_count, source="other", recorded=False, path=""
    ) -> "PieceMeta":
        return cls(
            composer=normalize_composer(composer),
            title=title,
            note_count=note_count,
            source=source,
            recorded=recorded,
            catalog_tokens=extract_catalog_tokens(title),
            key_tokens=extract_key_tokens(title),
            path=path,
        )


def normalize_composer(name: str) -> str:
    """Casefold, strip diacritics, and format as "last,first ...".

    "Frédéric Chopin" and "Chopin, Frederic" normalize identically.
    """
    stripped = "".join(
        ch for ch in unicodedata.normalize("NFKD", name) if not unicodedata.combining(ch)
    )
    stripped = stripped.casefold().replace("_", " ").strip()
    if "," in stripped:
        last, _, first = stripped.partition(",")
    else:
        words = stripped.split()
        if not words:
            return ""
        last, first = words[-1], " ".join(words[:-1])
    last = " ".join(last.split())
    first = " ".join(first.split())
    return f"{last},{first}" if first else last


def extract_catalog_tokens(title: str) -> frozenset:
    """Opus/catalog tokens like "op.10", "bwv.847" found in a title."""
    return frozenset(
        f"{prefix.lower()}.{number.lower()}"
        for prefix, number in _CATALOG_RE.findall(title)
    )


def extract_key_tokens(title: str) -> frozenset:
    """Key tokens like "c_sharp_minor" found in a title."""
    tokens = set()
    for note, accidental, mode in _KEY_RE.findall(title.lower()):
        parts = [note] + ([accidental] if accidental else []) + [mode]
        tokens.add("_".join(parts))
    return frozenset(tokens)


def select_candidates(scores, perfs) -> list[tuple[PieceMeta, PieceMeta]]:
    """All (score, performance) pairs passing the metadata prefilter.

    Composers must match exactly after normalization, the note ratio must
    fall in [0.75, 1.33], and whenever both sides carry catalog (or key)
    tokens those token sets must intersect.
    """
    pairs = []
    for score in scores:
        if not score.composer or score.note_count <= 0:
            continue
        for perf in perfs:
            if normalize_composer(perf.composer) != normalize_composer(score.composer):
                continue
            ratio = perf.note_count / score.note_count
            if not RATIO_MIN <= ratio <= RATIO_MAX:
                continue
            if score.catalog_tokens and perf.catalog_tokens:
                if not score.catalog_tokens & perf.catalog_tokens:
                    continue
            if score.key_tokens and perf.key_tokens:
                if not score.key_tokens & perf.key_tokens:
                    continue
            pairs.append((score, perf))
    return pairs


def export_candidates_csv(pairs, path) -> None:
    """Candidate list as CSV: score path, performance path, note ratio."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score_path", "perf_path", "note_ratio"])
        for score, perf in pairs:
            writer.writerow([score.path, perf.path, repr(perf.note_count / score.note_count)])


@dataclass
class OnsetCluster:
    """Notes sharing (approximately) one onset; the level-1 DTW symbol."""

    onset: float
    pitch_multiset: tuple
    note_indices: tuple


def cluster_onsets(seq: NoteSequence, epsilon: float) -> list[OnsetCluster]:
    """Greedy left-to-right clustering anchored at each cluster's first onset.

    Score sequences cluster in the beat domain, performances in seconds.
    """
    use_beats = seq.kind == KIND_SCORE
    clusters: list[OnsetCluster] = []
    current: list[int] = []
    anchor = None
    onsets = [
        n.onset_beat if use_beats and n.onset_beat is not None else n.onset
        for n in seq.notes
    ]

    def flush():
        if current:
            pitches = tuple(sorted(seq.notes[i].pitch for i in current))
            clusters.append(OnsetCluster(anchor, pitches, tuple(current)))

    for i, onset in enumerate(onsets):
        if anchor is None or onset - anchor > epsilon:
            flush()
            current = [i]
            anchor = onset
        else:
            current.append(i)
    flush()
    return clusters


@njit(cache=True)
def _dtw_fill(flat_s, off_s, flat_p, off_p, band):
    n_s = off_s.shape[0] - 1
    n_p = off_p.shape[0] - 1
    dist = np.full((n_s + 1, n_p + 1), np.inf)
    step = np.zeros((n_s + 1, n_p + 1), dtype=np.int8)
    dist[0, 0] = 0.0
    for i in range(1, n_s + 1):
        j_lo, j_hi = 1, n_p
        if band > 0:
            center = i * n_p / n_s
            j_lo = max(1, int(center - band))
            j_hi = min(n_p, int(center + band) + 1)
        for j in range(j_lo, j_hi + 1):
            best = dist[i - 1, j - 1]
            move = 1  # diagonal
            if dist[i - 1, j] < best:
                best = dist[i - 1, j]
                move = 2  # vertical: score advances alone
            if dist[i, j - 1] < best:
                best = dist[i, j - 1]
                move = 3  # horizontal: performance advances alone
            if best == np.inf:
                continue
            # multiset Jaccard distance between the two pitch bags
            ia, ib = off_s[i - 1], off_p[j - 1]
            end_a, end_b = off_s[i], off_p[j]
            inter = 0
            while ia < end_a and ib < end_b:
                pa = flat_s[ia]
                pb = flat_p[ib]
                if pa == pb:
                    inter += 1
                    ia += 1
                    ib += 1
                elif pa < pb:
                    ia += 1
                else:
                    ib += 1
            union = (end_a - off_s[i - 1]) + (end_b - off_p[j - 1]) - inter
            cost = 1.0 - inter / union if union > 0 else 0.0
            dist[i, j] = best + cost
            step[i, j] = move
    return dist, step


def _csr(clusters) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(clusters) + 1, dtype=np.int64)
    for i, cluster in enumerate(clusters):
        offsets[i + 1] = offsets[i] + len(cluster.pitch_multiset)
    flat = np.empty(offsets[-1], dtype=np.int64)
    for i, cluster in enumerate(clusters):
        flat[offsets[i]:offsets[i + 1]] = cluster.pitch_multiset
    return flat, offsets


def cluster_dtw(
    clusters_s, clusters_p, band_fraction: float | None = None
) -> tuple[list[tuple[int, int]], float]:
    """Warp two cluster sequences; returns (path cells, total cost).

    The path is monotone and covers (0,0) .. (len(s)-1, len(p)-1).
    """
    flat_s, off_s = _csr(clusters_s)
    flat_p, off_p = _csr(clusters_p)
    n_s, n_p = len(clusters_s), len(clusters_p)
    band = 0
    if band_fraction is not None:
        band = int(band_fraction * max(n_s, n_p)) + abs(n_s - n_p) + 1
    dist, step = _dtw_fill(flat_s, off_s, flat_p, off_p, band)
    if not np.isfinite(dist[n_s, n_p]) and band > 0:
        dist, step = _dtw_fill(flat_s, off_s, flat_p, off_p, 0)
    path = []
    i, j = n_s, n_p
    while i > 0 or j > 0:
        path.append((i - 1, j - 1))
        move = step[i, j]
        if move == 1:
            i, j = i - 1, j - 1
        elif move == 2:
            i -= 1
        else:
            j -= 1
        if i == 0 and j == 0:
            break
    path.reverse()
    return path, float(dist[n_s, n_p])


def match_notes(
    score: NoteSequence,
    perf: NoteSequence,
    score_epsilon: float = SCORE_CLUSTER_EPSILON,
    perf_epsilon: float = PERF_CLUSTER_EPSILON,
    band_fraction: float | None = None,
) -> Alignment:
    """Two-level note alignment between a cleaned score and performance."""
    if not score.notes or not perf.notes:
        raise EmptySequenceError("cannot match empty sequences")
    clusters_s = cluster_onsets(score, score_epsilon)
    clusters_p = cluster_onsets(perf, perf_epsilon)
    path, _ = cluster_dtw(clusters_s, clusters_p, band_fraction)

    used_s: set[int] = set()
    used_p: set[int] = set()
    matches: list[tuple[int, int]] = []
    for ci, cj in path:
        by_pitch_s: dict[int, list[int]] = {}
        for idx in clusters_s[ci].note_indices:
            if idx not in used_s:
                by_pitch_s.setdefault(score.notes[idx].pitch, []).append(idx)
        by_pitch_p: dict[int, list[int]] = {}
        for idx in clusters_p[cj].note_indices:
            if idx not in used_p:
                by_pitch_p.setdefault(perf.notes[idx].pitch, []).append(idx)
        for pitch in sorted(by_pitch_s.keys() & by_pitch_p.keys()):
            s_notes = sorted(by_pitch_s[pitch], key=lambda k: (score.notes[k].duration, k))
            p_notes = sorted(by_pitch_p[pitch], key=lambda k: (perf.notes[k].duration, k))
            for s_idx, p_idx in zip(s_notes, p_notes):
                matches.append((s_idx, p_idx))
                used_s.add(s_idx)
                used_p.add(p_idx)

    result = build_full_alignment(len(score.notes), len(perf.notes), matches)
    result.stage_recalls["raw"] = alignment_recall(result)
    validate_alignment(result)
    return result


def verify_match(
    score_max: NoteSequence,
    score_min: NoteSequence | None,
    perf: NoteSequence,
    **match_kwargs,
) -> tuple[Alignment, str, bool]:
    """Align against the maximal score, falling back to the minimal one.

    A match is definitive when recall strictly exceeds 0.7. When neither
    variant clears the bar the better-recall alignment is returned with
    definitive=False.
    """
    a_max = match_notes(score_max, perf, **match_kwargs)
    r_max = alignment_recall(a_max)
    if r_max > DEFINITIVE_RECALL:
        return a_max, "maximal", True
    if score_min is not None and score_min.notes:
        a_min = match_notes(score_min, perf, **match_kwargs)
        r_min = alignment_recall(a_min)
        if r_min > DEFINITIVE_RECALL:
            return a_min, "minimal", True
        if r_min > r_max:
            return a_min, "minimal", False
    return a_max, "maximal", False
