"""Corpus manifest: one JSON document per corpus root.

A corpus follows the composer/composition/movement directory hierarchy.
Score files are named ``score.mid`` (all repeats unfolded) and
``score_mini.mid`` (each repeat once); performance filenames carry their
source dataset as a prefix, ``[source]_[original_name].mid``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCORE_FILENAME = "score.mid"
SCORE_MINIMAL_FILENAME = "score_mini.mid"
MANIFEST_FILENAME = "manifest.json"

RECORDED_SOURCES = {"ASAP"}


@dataclass
class PerformanceEntry:
    """One performance file and everything the pipeline learned about it."""

    path: str
    source: str = "other"
    recorded: bool = False
    cleaned_path: str | None = None
    alignment_path: str | None = None
    score_variant: str | None = None  # maximal / minimal
    matched_piece: str | None = None  # piece id of the matched score
    adjusted_ratio: float | None = None
    refined_path: str | None = None
    refined_alignment_path: str | None = None
    stage_recalls: dict = field(default_factory=dict)
    label: str | None = None
    star: bool | None = None
    cluster_id: int | None = None
    is_lead: bool | None = None
    is_duplicate: bool = False


@dataclass
class CorpusRecord:
    """One piece (composer/composition/movement) with its files."""

    composer: str
    composition: str
    movement: str
    score_path: str | None = None
    score_path_minimal: str | None = None
    performances: list[PerformanceEntry] = field(default_factory=list)

    @property
    def piece_id(self) -> str:
        return f"{self.composer}/{self.composition}/{self.movement}"


@dataclass
class CorpusManifest:
    root: str
    records: list[CorpusRecord] = field(default_factory=list)

    def resolve(self, rel_path: str) -> Path:
        return Path(self.root) / rel_path

    def save(self, path=None) -> Path:
        path = Path(path) if path else Path(self.root) / MANIFEST_FILENAME
        payload = {
            "root": self.root,
            "records": [asdict(record) for record in self.records],
        }
        path.write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        records = []
        for rec in payload["records"]:
            perfs = [PerformanceEntry(**entry) for entry in rec.pop("performances")]
            records.append(CorpusRecord(performances=perfs, **rec))
        return cls(root=payload["root"], records=records)

    @classmethod
    def scan(cls, root) -> "CorpusManifest":
        """Discover a corpus from the directory hierarchy.

        Walks composer/composition/movement; unknown file layouts are
        ignored rather than fatal.
        """
        root = Path(root)
        records = []
        for composer_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            if composer_dir.name.startswith(("_", ".")):
                continue
            for composition_dir in sorted(p for p in composer_dir.iterdir() if p.is_dir()):
                for movement_dir in sorted(p for p in composition_dir.iterdir() if p.is_dir()):
                    record = CorpusRecord(
                        composer=composer_dir.name,
                        composition=composition_dir.name,
                        movement=movement_dir.name,
                    )
                    for file in sorted(movement_dir.glob("*.mid")):
                        rel = str(file.relative_to(root))
                        name = file.name
                        if name == SCORE_FILENAME:
                            record.score_path = rel
                        elif name == SCORE_MINIMAL_FILENAME:
                            record.score_path_minimal = rel
                        elif any(name.endswith(suf) for suf in (".clean.mid", ".refined.mid")):
                            continue  # derived artifacts, re-linked by their commands
                        else:
                            source = name.split("_", 1)[0] if "_" in name else "other"
                            record.performances.append(
                                PerformanceEntry(
                                    path=rel,
                                    source=source,
                                    recorded=source in RECORDED_SOURCES,
                                )
                            )
                    if record.score_path or record.performances:
                        records.append(record)
        return cls(root=str(root), records=records)


def load_or_scan(root) -> CorpusManifest:
    manifest_path = Path(root) / MANIFEST_FILENAME
    if manifest_path.exists():
        return CorpusManifest.load(manifest_path)
    return CorpusManifest.scan(root)
