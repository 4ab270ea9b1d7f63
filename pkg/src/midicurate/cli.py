"""Batch front-end: clean | match | refine | dedup | label | stats.

Each subcommand walks the corpus manifest under ``--root``, pushes every
file or pair through the library, writes reports under ``<root>/reports``
and re-saves the manifest. A failure in one file only marks that row;
the exit code is 0 on full success, 1 when some entries failed, 2 on
fatal errors (bad root or config).

Configuration precedence is defaults < config file < command-line flags.
The config file is flat ``key=value`` lines (# comments allowed) covering
every refinement and threshold parameter, e.g.::

    hole_window=31
    tempo_max=480
    stages=H,O,I
    duplicate_threshold=0.5
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import alignment as alignment_mod
from . import cleaning, curation, matching
from .refine import RefineConfig, refine as run_refine
from .manifest import CorpusManifest, load_or_scan
from .sequence import KIND_SCORE, load_midi, save_midi

log = logging.getLogger("midicurate")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2

TOOL_DEFAULTS = {
    "min_note_duration": cleaning.MIN_NOTE_DURATION,
    "similarity_tolerance": curation.SIMILARITY_TOLERANCE,
    "duplicate_threshold": curation.DUPLICATE_THRESHOLD,
    "recall_floor": None,
    "quarantine": False,
}

RECALL_BANDS = (
    (0.95, 1.01),
    (0.90, 0.95),
    (0.85, 0.90),
    (0.80, 0.85),
    (0.75, 0.80),
    (0.70, 0.75),
    (0.60, 0.70),
    (0.00, 0.60),
)


def parse_config_file(path) -> dict:
    settings = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def _coerce(value, target_type):
    if target_type is bool:
        return str(value).lower() in ("1", "true", "yes", "on")
    if target_type is tuple:  # pipeline stages
        text = str(value).replace(",", "").replace(" ", "").upper()
        return tuple(text)
    return target_type(value)


def resolve_settings(config_path=None, overrides=None) -> dict:
    """Merge defaults, config file and CLI overrides into one dict."""
    settings: dict = dict(TOOL_DEFAULTS)
    cfg = RefineConfig()
    for f in dataclass_fields(cfg):
        settings[f.name] = getattr(cfg, f.name)
    raw = {}
    if config_path:
        raw.update(parse_config_file(config_path))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key, value in raw.items():
        if key not in settings:
            raise ValueError(f"unknown config key {key!r}")
        current = settings[key]
        if value is None:
            settings[key] = None
        elif current is None:  # None-default keys are numeric thresholds
            settings[key] = float(value)
        else:
            settings[key] = _coerce(value, type(current))
    return settings


def make_refine_config(settings) -> RefineConfig:
    kwargs = {
        f.name: settings[f.name]
        for f in dataclass_fields(RefineConfig)
    }
    return RefineConfig(**kwargs)


def _reports_dir(manifest: CorpusManifest) -> Path:
    path = Path(manifest.root) / "reports"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _run_pool(workers: int, func, items):
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _cleaned_or_original(manifest, entry) -> Path:
    if entry.cleaned_path:
        return manifest.resolve(entry.cleaned_path)
    return manifest.resolve(entry.path)


def cmd_clean(manifest: CorpusManifest, settings, workers=1, dry_run=False) -> int:
    """Clean every performance file; cleaned copies go alongside originals."""
    entries = [e for record in manifest.records for e in record.performances]
    if dry_run:
        for entry in entries:
            print(f"would clean {entry.path}")
        return EXIT_OK

    def work(entry):
        try:
            seq = load_midi(manifest.resolve(entry.path))
            cleaned, report = cleaning.clean_sequence(seq)
            out_path = manifest.resolve(entry.path + ".clean.mid")
            save_midi(cleaned, out_path)
            entry.cleaned_path = entry.path + ".clean.mid"
            return entry.path, report.as_dict(), None
        except Exception as exc:  # noqa: BLE001 - batch isolation
            log.error("clean failed for %s: %s", entry.path, exc)
            return entry.path, None, str(exc)

    results = _run_pool(workers, work, entries)
    rows, failures = [], 0
    for path, counts, error in results:
        if error:
            failures += 1
            rows.append([path, "", "", "", "", error])
        else:
            rows.append([
                path,
                counts["duplicates_removed"],
                counts["overlaps_truncated"],
                counts["short_removed"],
                counts["runaways_repaired"],
                "",
            ])
    reports = _reports_dir(manifest)
    _write_csv(
        reports / "clean_report.csv",
        ["path", "duplicates_removed", "overlaps_truncated", "short_removed",
         "runaways_repaired", "error"],
        rows,
    )
    (reports / "clean_report.json").write_text(
        json.dumps(
            {path: counts for path, counts, err in results if not err},
            indent=1, sort_keys=True,
        )
    )
    manifest.save()
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_match(manifest: CorpusManifest, settings, workers=1, dry_run=False) -> int:
    """Select candidate pairs from metadata, align and verify them."""
    scores = {}
    score_metas = []
    for record in manifest.records:
        if not record.score_path:
            continue
        try:
            score_max = load_midi(manifest.resolve(record.score_path), kind=KIND_SCORE)
            score_min = None
            if record.score_path_minimal:
                score_min = load_midi(
                    manifest.resolve(record.score_path_minimal), kind=KIND_SCORE
                )
        except Exception as exc:  # noqa: BLE001
            log.error("score load failed for %s: %s", record.piece_id, exc)
            continue
        scores[record.piece_id] = (score_max, score_min)
        # each variant is its own candidate file: a repeat-skipping
        # performance only passes the note-ratio gate against the minimal
        variants = [score_max] + ([score_min] if score_min else [])
        for variant_seq in variants:
            score_metas.append(
                matching.PieceMeta.from_title(
                    composer=record.composer,
                    title=f"{record.composition} {record.movement}",
                    note_count=len(variant_seq.notes),
                    path=record.piece_id,
                )
            )

    perf_items = []
    perf_metas = []
    for record in manifest.records:
        for entry in record.performances:
            try:
                seq = load_midi(_cleaned_or_original(manifest, entry))
            except Exception as exc:  # noqa: BLE001
                log.error("performance load failed for %s: %s", entry.path, exc)
                continue
            perf_items.append((record, entry, seq))
            perf_metas.append(
                matching.PieceMeta.from_title(
                    composer=record.composer,
                    title=f"{record.composition} {record.movement}",
                    note_count=len(seq.notes),
                    source=entry.source,
                    recorded=entry.recorded,
                    path=entry.path,
                )
            )

    seen_pairs = set()
    candidates = []
    for pair in matching.select_candidates(score_metas, perf_metas):
        key = (pair[0].path, pair[1].path)
        if key not in seen_pairs:
            seen_pairs.add(key)
            candidates.append(pair)
    if dry_run:
        for score_meta, perf_meta in candidates:
            print(f"would match {perf_meta.path} against {score_meta.path}")
        return EXIT_OK
    matching.export_candidates_csv(candidates, _reports_dir(manifest) / "candidates.csv")
    by_perf_path = {meta.path: item for item, meta in zip(perf_items, perf_metas)}

    rows = []
    best: dict[str, tuple] = {}
    failures = 0
    for score_meta, perf_meta in candidates:
        record, entry, perf_seq = by_perf_path[perf_meta.path]
        score_max, score_min = scores[score_meta.path]
        try:
            aligned, variant, definitive = matching.verify_match(
                score_max, score_min, perf_seq
            )
        except Exception as exc:  # noqa: BLE001
            log.error("match failed for %s x %s: %s", score_meta.path, perf_meta.path, exc)
            failures += 1
            continue
        r = alignment_mod.recall(aligned)
        p = alignment_mod.precision(aligned)
        rows.append([
            score_meta.path, perf_meta.path,
            repr(perf_meta.note_count / score_meta.note_count),
            repr(r), repr(p), repr(alignment_mod.adjusted_ratio(aligned)),
            variant, int(definitive),
        ])
        key = perf_meta.path
        prior = best.get(key)
        if prior is None or (definitive, r) > (prior[0], prior[1]):
            best[key] = (definitive, r, aligned, variant, score_meta.path, record, entry)

    for definitive, r, aligned, variant, score_piece, record, entry in best.values():
        if not definitive:
            continue
        score_max, score_min = scores[score_piece]
        score_seq = score_min if variant == "minimal" else score_max
        perf_seq = by_perf_path[entry.path][2]
        out_rel = entry.path + ".align.mcal"
        alignment_mod.write_alignment(
            aligned, score_seq, perf_seq, manifest.resolve(out_rel)
        )
        entry.alignment_path = out_rel
        entry.score_variant = variant
        entry.matched_piece = score_piece
        entry.adjusted_ratio = alignment_mod.adjusted_ratio(aligned)
        entry.stage_recalls = dict(aligned.stage_recalls)

    reports = _reports_dir(manifest)
    _write_csv(
        reports / "match_report.csv",
        ["score_piece", "perf_path", "note_ratio", "recall", "precision",
         "adjusted_ratio", "score_variant", "definitive"],
        rows,
    )
    manifest.save()
    return EXIT_PARTIAL if failures else EXIT_OK


def recall_band_table(triples) -> list[dict]:
    """Aggregate (raw, after_H, after_HO) recalls into the banded shape
    used by the refinement evaluation: per band, mean recall and share of
    sequences, per stage."""
    table = []
    n = len(triples) or 1
    for lo, hi in RECALL_BANDS:
        row = {"band": f"{lo:.2f}-{min(hi, 1.0):.2f}"}
        for stage, idx in (("raw", 0), ("h", 1), ("ho", 2)):
            values = [t[idx] for t in triples if lo <= t[idx] < hi]
            row[f"{stage}_mean"] = sum(values) / len(values) if values else 0.0
            row[f"{stage}_pct"] = 100.0 * len(values) / n
        table.append(row)
    return table


def cmd_refine(manifest: CorpusManifest, settings, workers=1, dry_run=False) -> int:
    """Run the refinement pipeline on every aligned pair."""
    cfg = make_refine_config(settings)
    floor = settings.get("recall_floor")
    items = []
    for record in manifest.records:
        for entry in record.performances:
            if entry.alignment_path:
                items.append((record, entry))
    if dry_run:
        for record, entry in items:
            print(f"would refine {entry.path}")
        return EXIT_OK

    piece_index = {record.piece_id: record for record in manifest.records}

    def work(item):
        record, entry = item
        try:
            source_record = piece_index.get(entry.matched_piece or record.piece_id, record)
            score_rel = (
                source_record.score_path_minimal
                if entry.score_variant == "minimal" and source_record.score_path_minimal
                else source_record.score_path
            )
            score = load_midi(manifest.resolve(score_rel), kind=KIND_SCORE)
            perf = load_midi(_cleaned_or_original(manifest, entry))
            raw = alignment_mod.read_alignment(manifest.resolve(entry.alignment_path))
            refined_perf, refined_a, report = run_refine(
                score, perf, raw, cfg, recall_floor=floor
            )
            refined_rel = entry.path + ".refined.mid"
            refined_align_rel = entry.path + ".refined.mcal"
            if not report.interrupted:
                save_midi(refined_perf, manifest.resolve(refined_rel))
                alignment_mod.write_alignment(
                    refined_a, score, refined_perf, manifest.resolve(refined_align_rel)
                )
                entry.refined_path = refined_rel
                entry.refined_alignment_path = refined_align_rel
            entry.stage_recalls = dict(refined_a.stage_recalls)
            return entry.path, report, None
        except Exception as exc:  # noqa: BLE001
            log.error("refine failed for %s: %s", entry.path, exc)
            return entry.path, None, str(exc)

    results = _run_pool(workers, work, items)
    reports = _reports_dir(manifest)
    rows, triples, failures = [], [], 0
    per_pair = {}
    for path, report, error in results:
        if error:
            failures += 1
            rows.append([path, "", "", "", "", "", error])
            continue
        per_pair[path] = report.as_dict()
        rows.append([
            path, repr(report.recall_raw), repr(report.recall_after_h),
            repr(report.recall_after_o), report.notes_interpolated,
            int(report.interrupted), "",
        ])
        triples.append((report.recall_raw, report.recall_after_h, report.recall_after_o))
    _write_csv(
        reports / "refine_report.csv",
        ["path", "recall_raw", "recall_after_h", "recall_after_o",
         "notes_interpolated", "interrupted", "error"],
        rows,
    )
    (reports / "refine_report.json").write_text(
        json.dumps(per_pair, indent=1, sort_keys=True)
    )
    band_rows = [
        [row["band"], repr(row["raw_mean"]), repr(row["raw_pct"]),
         repr(row["h_mean"]), repr(row["h_pct"]),
         repr(row["ho_mean"]), repr(row["ho_pct"])]
        for row in recall_band_table(triples)
    ]
    _write_csv(
        reports / "refine_bands.csv",
        ["band", "raw_mean", "raw_pct", "h_mean", "h_pct", "ho_mean", "ho_pct"],
        band_rows,
    )
    manifest.save()
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_dedup(manifest: CorpusManifest, settings, workers=1, dry_run=False) -> int:
    """Cluster near-identical performances per piece and flag leads."""
    threshold = settings["duplicate_threshold"]
    tol = settings["similarity_tolerance"]
    rows = []
    cluster_counter = 0
    failures = 0
    for record in manifest.records:
        entries = record.performances
        if not entries:
            continue
        seqs = []
        loadable = []
        for entry in entries:
            try:
                seq = load_midi(_cleaned_or_original(manifest, entry))
                if not seq.notes:
                    raise ValueError("no notes")
                seqs.append(seq)
                loadable.append(entry)
            except Exception as exc:  # noqa: BLE001
                log.error("dedup load failed for %s: %s", entry.path, exc)
                failures += 1
        if not loadable:
            continue
        clusters = curation.cluster_duplicates(seqs, threshold, tol)
        for members in clusters:
            cluster_id = cluster_counter
            cluster_counter += 1
            metas = [
                curation.DedupMeta(
                    path=loadable[i].path,
                    source=loadable[i].source,
                    recall=loadable[i].stage_recalls.get("raw"),
                )
                for i in members
            ]
            lead = curation.select_lead(metas)
            for i, meta in zip(members, metas):
                entry = loadable[i]
                is_lead = meta.path == lead.path
                if not dry_run:
                    entry.cluster_id = cluster_id
                    entry.is_lead = is_lead
                    entry.is_duplicate = not is_lead
                rows.append((record.piece_id, cluster_id, entry.path, is_lead))
                if not is_lead and settings.get("quarantine") and not dry_run:
                    src = manifest.resolve(entry.path)
                    dst = Path(manifest.root) / "_quarantine" / entry.path
                    dst.parent.mkdir(parents=True, exist_ok=True)
                    if src.exists():
                        src.rename(dst)
    if dry_run:
        for piece_id, cluster_id, path, is_lead in rows:
            print(f"cluster {cluster_id}: {path} lead={is_lead}")
        return EXIT_OK
    curation.write_duplicate_report(rows, _reports_dir(manifest) / "duplicates.csv")
    manifest.save()
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_label(manifest: CorpusManifest, settings, workers=1, dry_run=False) -> int:
    """Heuristic quality label and star flag for every performance."""
    rows = []
    counts: dict[str, int] = {}
    for record in manifest.records:
        for entry in record.performances:
            label = curation.heuristic_label(
                recorded=entry.recorded,
                transcribed=not entry.recorded,
                adjusted_ratio=entry.adjusted_ratio,
                is_score_midi=False,
            )
            refined_recall = entry.stage_recalls.get(
                "onset", entry.stage_recalls.get("raw", 0.0)
            )
            star = curation.star_filter(label, refined_recall)
            if not dry_run:
                entry.label = label.label
                entry.star = star
            counts[label.label] = counts.get(label.label, 0) + 1
            rows.append((entry.path, label))
    if dry_run:
        print(json.dumps(counts, indent=1, sort_keys=True))
        return EXIT_OK
    reports = _reports_dir(manifest)
    curation.write_label_report(rows, reports / "labels.csv")
    star_rows = [
        [path, label.label,
         "" if label.adjusted_ratio_input is None else repr(label.adjusted_ratio_input)]
        for path, label in rows
    ]
    _write_csv(reports / "label_summary.csv", ["path", "label", "adjusted_ratio"], star_rows)
    (reports / "label_counts.json").write_text(json.dumps(counts, indent=1, sort_keys=True))
    manifest.save()
    return EXIT_OK


def cmd_stats(manifest: CorpusManifest, settings, workers=1, dry_run=False) -> int:
    """Corpus statistics: composer coverage, performances per piece, hours."""
    per_composer: dict[str, int] = {}
    per_piece_counts = []
    total_seconds = 0.0
    for record in manifest.records:
        per_composer[record.composer] = per_composer.get(record.composer, 0) + 1
        per_piece_counts.append(len(record.performances))
        for entry in record.performances:
            try:
                seq = load_midi(_cleaned_or_original(manifest, entry))
                total_seconds += seq.end_time
            except Exception:  # noqa: BLE001
                continue
    n_pieces = len(per_piece_counts)
    sorted_counts = sorted(per_piece_counts)
    if n_pieces:
        mid = n_pieces // 2
        median = (
            sorted_counts[mid]
            if n_pieces % 2
            else (sorted_counts[mid - 1] + sorted_counts[mid]) / 2
        )
        mean = sum(per_piece_counts) / n_pieces
    else:
        median = mean = 0
    summary = {
        "pieces": n_pieces,
        "composers": len(per_composer),
        "performances": sum(per_piece_counts),
        "median_performances_per_piece": median,
        "mean_performances_per_piece": mean,
        "hours": total_seconds / 3600.0,
    }
    if dry_run:
        print(json.dumps(summary, indent=1, sort_keys=True))
        return EXIT_OK
    reports = _reports_dir(manifest)
    _write_csv(
        reports / "stats_composers.csv",
        ["composer", "pieces"],
        sorted(per_composer.items()),
    )
    hist: dict[int, int] = {}
    for count in per_piece_counts:
        hist[count] = hist.get(count, 0) + 1
    _write_csv(
        reports / "stats_pieces_hist.csv",
        ["n_performances", "n_pieces"],
        sorted(hist.items()),
    )
    (reports / "stats_summary.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True)
    )
    return EXIT_OK


COMMANDS = {
    "clean": cmd_clean,
    "match": cmd_match,
    "refine": cmd_refine,
    "dedup": cmd_dedup,
    "label": cmd_label,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midicurate",
        description="Batch curation of score/performance piano MIDI corpora.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--root", required=True, help="corpus root directory")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dry-run", action="store_true")
    parser.add_argument("--quarantine", action="store_true",
                        help="dedup: move non-lead duplicates aside")
    parser.add_argument("--recall-floor", type=float, default=None,
                        help="refine: interrupt pairs below this recall")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    root = Path(args.root)
    if not root.is_dir():
        log.error("root %s is not a directory", root)
        return EXIT_FATAL
    try:
        settings = resolve_settings(
            args.config,
            {"quarantine": args.quarantine or None, "recall_floor": args.recall_floor},
        )
    except (ValueError, OSError) as exc:
        log.error("bad configuration: %s", exc)
        return EXIT_FATAL
    manifest = load_or_scan(root)
    command = COMMANDS[args.command]
    return command(manifest, settings, workers=args.workers, dry_run=args.dry_run)


if __name__ == "__main__":
    sys.exit(main())
