"""Score-performance note alignments, quality ratios and container I/O.

An alignment is an ordered set of links; a link either matches a score
note to a performance note or records a one-sided deletion / insertion
via the -1 sentinel. Links are kept in score order (matches and
deletions by score index, then insertions by performance index).

Container format ("MCAL", version 1)
------------------------------------
A self-describing columnar file: an ASCII header followed by packed
little-endian binary rows. Header lines::

    MCAL 1
    links=<N> score_notes=<Ns> perf_notes=<Np>
    recalls=<name>:<float>,...          (may be empty after '=')
    columns=score_index:i4,perf_index:i4,score_pitch:i2,perf_pitch:i2,
            score_onset:f8,score_offset:f8,perf_onset:f8,perf_offset:f8,
            interpolated:u1             (single line in the file)

followed by one blank line and ``N`` packed rows. Integer columns use -1
for absent attributes, real columns use NaN. Score onsets/offsets are in
beats, performance ones in seconds. A lossless CSV export of the same
nine columns is provided for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentValidationError,
    UndefinedRatioError,
    UnsupportedVersionError,
)
from .sequence import FLAG_INTERPOLATED, NoteSequence

SENTINEL = -1

KIND_MATCH = "match"
KIND_DELETION = "deletion"
KIND_INSERTION = "insertion"

MAGIC = "MCAL"
FORMAT_VERSION = 1

STAGE_RAW = "raw"
STAGE_HOLE = "hole"
STAGE_ONSET = "onset"
STAGE_INTERPOLATED = "interpolated"

COLUMN_SPEC = (
    ("score_index", "<i4"),
    ("perf_index", "<i4"),
    ("score_pitch", "<i2"),
    ("perf_pitch", "<i2"),
    ("score_onset", "<f8"),
    ("score_offset", "<f8"),
    ("perf_onset", "<f8"),
    ("perf_offset", "<f8"),
    ("interpolated", "u1"),
)
TABLE_DTYPE = np.dtype(list(COLUMN_SPEC))
CSV_HEADER = ",".join(name for name, _ in COLUMN_SPEC)


@dataclass(frozen=True)
class AlignmentLink:
    score_index: int = SENTINEL
    perf_index: int = SENTINEL

    @property
    def kind(self) -> str:
        if self.score_index >= 0 and self.perf_index >= 0:
            return KIND_MATCH
        if self.score_index >= 0:
            return KIND_DELETION
        return KIND_INSERTION


@dataclass
class Alignment:
    """Links between one score and one performance, with per-stage recalls."""

    links: tuple
    n_score: int
    n_perf: int
    stage_recalls: dict = field(default_factory=dict)
    table: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_matched(self) -> int:
        return sum(1 for link in self.links if link.kind == KIND_MATCH)

    def matches(self) -> list[AlignmentLink]:
        return [link for link in self.links if link.kind == KIND_MATCH]

    def score_to_perf(self) -> np.ndarray:
        """Per-score-note performance index (-1 when unmatched)."""
        out = np.full(self.n_score, SENTINEL, dtype=np.int64)
        for link in self.links:
            if link.kind == KIND_MATCH:
                out[link.score_index] = link.perf_index
        return out

    def matched_perf_mask(self) -> np.ndarray:
        out = np.zeros(self.n_perf, dtype=bool)
        for link in self.links:
            if link.kind == KIND_MATCH:
                out[link.perf_index] = True
        return out


def sort_links(links) -> tuple:
    """Canonical order: score-side links by score index, then insertions."""
    scored = sorted(
        (l for l in links if l.score_index >= 0), key=lambda l: l.score_index
    )
    inserted = sorted(
        (l for l in links if l.score_index < 0), key=lambda l: l.perf_index
    )
    return tuple(scored + inserted)


def build_full_alignment(
    n_score: int, n_perf: int, matches, stage_recalls=None
) -> Alignment:
    """Alignment from matched (score, perf) index pairs; everything not
    matched becomes a deletion or insertion."""
    matches = list(matches)
    matched_s = {s for s, _ in matches}
    matched_p = {p for _, p in matches}
    links = [AlignmentLink(s, p) for s, p in matches]
    links += [AlignmentLink(s, SENTINEL) for s in range(n_score) if s not in matched_s]
    links += [AlignmentLink(SENTINEL, p) for p in range(n_perf) if p not in matched_p]
    return Alignment(
        links=sort_links(links),
        n_score=n_score,
        n_perf=n_perf,
        stage_recalls=dict(stage_recalls or {}),
    )


def validate_alignment(a: Alignment) -> None:
    """Check sentinel structure, index bounds and bijectivity."""
    bad = []
    seen_score: set[int] = set()
    seen_perf: set[int] = set()
    for link in a.links:
        if link.score_index < 0 and link.perf_index < 0:
            bad.append(link)
            continue
        if link.score_index >= a.n_score or link.perf_index >= a.n_perf:
            bad.append(link)
            continue
        if link.score_index >= 0:
            if link.score_index in seen_score:
                bad.append(link)
                continue
            seen_score.add(link.score_index)
        if link.perf_index >= 0:
            if link.perf_index in seen_perf:
                bad.append(link)
                continue
            seen_perf.add(link.perf_index)
    if bad:
        raise AlignmentValidationError(
            f"{len(bad)} invalid links (repeated index, out of bounds or "
            "double sentinel)",
            bad_links=bad,
        )


def note_ratio(a: Alignment) -> float:
    """Performance-to-score note count ratio."""
    if a.n_score == 0:
        raise UndefinedRatioError("note ratio undefined for an empty score")
    return a.n_perf / a.n_score


def recall(a: Alignment) -> float:
    """Fraction of score notes matched to the performance."""
    if a.n_score == 0:
        raise UndefinedRatioError("recall undefined for an empty score")
    return a.n_matched / a.n_score


def precision(a: Alignment) -> float:
    """Fraction of performed notes matched to the score."""
    if a.n_perf == 0:
        raise UndefinedRatioError("precision undefined for an empty performance")
    return a.n_matched / a.n_perf


def adjusted_ratio(a: Alignment) -> float:
    """Matched fraction of the shorter side: max(recall, precision).

    Tolerant of skipped repeats (low recall) and of transcription noise
    (low precision), as long as the other side is fully covered.
    """
    if a.n_score == 0 or a.n_perf == 0:
        raise UndefinedRatioError("adjusted ratio undefined for empty sequences")
    return a.n_matched / min(a.n_score, a.n_perf)


def _format_recalls(stage_recalls: dict) -> str:
    return ",".join(f"{k}:{v!r}" for k, v in sorted(stage_recalls.items()))


def _parse_recalls(text: str) -> dict:
    out = {}
    if text:
        for item in text.split(","):
            key, _, value = item.partition(":")
            out[key] = float(value)
    return out


def build_table(a: Alignment, score: NoteSequence, perf: NoteSequence) -> np.ndarray:
    """Materialize the nine container columns for an alignment."""
    bad = [
        l
        for l in a.links
        if l.score_index >= len(score.notes) or l.perf_index >= len(perf.notes)
    ]
    if bad:
        raise AlignmentValidationError(
            f"{len(bad)} links out of bounds for the given sequences", bad_links=bad
        )
    table = np.zeros(len(a.links), dtype=TABLE_DTYPE)
    for row, link in zip(table, a.links):
        row["score_index"] = link.score_index
        row["perf_index"] = link.perf_index
        if link.score_index >= 0:
            note = score.notes[link.score_index]
            row["score_pitch"] = note.pitch
            if note.onset_beat is not None:
                row["score_onset"] = note.onset_beat
                row["score_offset"] = note.onset_beat + note.duration_beat
            else:
                row["score_onset"] = np.nan
                row["score_offset"] = np.nan
        else:
            row["score_pitch"] = SENTINEL
            row["score_onset"] = np.nan
            row["score_offset"] = np.nan
        if link.perf_index >= 0:
            note = perf.notes[link.perf_index]
            row["perf_pitch"] = note.pitch
            row["perf_onset"] = note.onset
            row["perf_offset"] = note.offset
            row["interpolated"] = 1 if FLAG_INTERPOLATED in note.flags else 0
        else:
            row["perf_pitch"] = SENTINEL
            row["perf_onset"] = np.nan
            row["perf_offset"] = np.nan
            row["interpolated"] = 0
    return table


def save_table(
    table: np.ndarray, n_score: int, n_perf: int, stage_recalls: dict, path
) -> None:
    columns = ",".join(f"{name}:{code.lstrip('<')}" for name, code in COLUMN_SPEC)
    header = (
        f"{MAGIC} {FORMAT_VERSION}\n"
        f"links={len(table)} score_notes={n_score} perf_notes={n_perf}\n"
        f"recalls={_format_recalls(stage_recalls)}\n"
        f"columns={columns}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(table.astype(TABLE_DTYPE, copy=False).tobytes())


def load_table(path) -> tuple[np.ndarray, int, int, dict]:
    data = Path(path).read_bytes()
    try:
        header_end = data.index(b"\n\n") + 2
    except ValueError:
        raise UnsupportedVersionError("missing container header") from None
    lines = data[:header_end].decode("ascii").splitlines()
    magic, _, version = lines[0].partition(" ")
    if magic != MAGIC:
        raise UnsupportedVersionError(f"bad magic {magic!r}")
    if int(version) != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    counts = dict(item.split("=") for item in lines[1].split())
    n_links = int(counts["links"])
    n_score = int(counts["score_notes"])
    n_perf = int(counts["perf_notes"])
    recalls = _parse_recalls(lines[2].partition("=")[2])
    body = data[header_end:]
    expected = n_links * TABLE_DTYPE.itemsize
    if len(body) != expected:
        raise UnsupportedVersionError(
            f"body size {len(body)} does not match {n_links} rows"
        )
    table = np.frombuffer(body, dtype=TABLE_DTYPE).copy()
    return table, n_score, n_perf, recalls


def write_alignment(a: Alignment, score: NoteSequence, perf: NoteSequence, path) -> None:
    """Write an alignment with note attributes pulled from the sequences."""
    table = build_table(a, score, perf)
    save_table(table, a.n_score, a.n_perf, a.stage_recalls, path)


def read_alignment(path) -> Alignment:
    """Read a container file; the raw column table rides along on `.table`."""
    table, n_score, n_perf, recalls = load_table(path)
    links = tuple(
        AlignmentLink(int(row["score_index"]), int(row["perf_index"])) for row in table
    )
    return Alignment(
        links=links,
        n_score=n_score,
        n_perf=n_perf,
        stage_recalls=recalls,
        table=table,
    )


def export_csv(path_in, path_out) -> None:
    """Lossless CSV dump of a container file (floats via repr)."""
    table, _, _, _ = load_table(path_in)
    with open(path_out, "w", encoding="ascii") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in table:
            fields = [
                str(int(row["score_index"])),
                str(int(row["perf_index"])),
                str(int(row["score_pitch"])),
                str(int(row["perf_pitch"])),
                repr(float(row["score_onset"])),
                repr(float(row["score_offset"])),
                repr(float(row["perf_onset"])),
                repr(float(row["perf_offset"])),
                str(int(row["interpolated"])),
            ]
            fh.write(",".join(fields) + "\n")
