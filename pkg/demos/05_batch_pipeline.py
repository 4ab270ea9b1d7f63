"""The whole batch pipeline over an on-disk corpus.

Builds a small corpus under a temporary directory (the
composer/composition/movement hierarchy with [source]_name.mid files),
then drives the CLI end to end: clean -> match -> refine -> dedup ->
label -> stats, and prints the reports it leaves behind.
"""

import json
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from midicurate.cli import main as midicurate_main
from midicurate.manifest import CorpusManifest
from midicurate.sequence import canonical_sort, save_midi
from midicurate import synth

rng = np.random.default_rng(5)

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "corpus"

    # two pieces by different composers, three takes each (one duplicated)
    for p, composer in enumerate(["Chopin,_Frederic", "Scarlatti,_Domenico"]):
        piece_dir = root / composer / f"Sonata_{p}" / "1st_movement"
        piece_dir.mkdir(parents=True)
        score = synth.random_score(rng, n_onsets=70, bpm=120)
        save_midi(score, piece_dir / "score.mid")
        take1 = synth.render_score(score, bpm=float(rng.uniform(95, 125)))
        warped, _ = synth.warp_performance(take1, rng, n_segments=3, jitter=0.005)
        save_midi(warped, piece_dir / "Aria_take1.mid")
        dup = canonical_sort(warped.with_notes(
            replace(n, onset=n.onset + 1.0 + (0.0 if i == 0 else float(rng.uniform(0, 0.02))))
            for i, n in enumerate(warped.notes)
        ))
        save_midi(dup, piece_dir / "GiantMIDI_take1_reupload.mid")
        save_midi(synth.render_score(score, bpm=80), piece_dir / "ATEPP_take2.mid")

    for command in ("clean", "match", "refine", "dedup", "label", "stats"):
        code = midicurate_main([command, "--root", str(root)])
        print(f"midicurate {command}: exit {code}")

    print("\nreports written:")
    for report in sorted((root / "reports").iterdir()):
        print(f"  {report.name}")

    summary = json.loads((root / "reports" / "stats_summary.json").read_text())
    print(f"\ncorpus: {summary['pieces']} pieces, {summary['performances']} "
          f"performances, {summary['hours']:.2f} h")

    manifest = CorpusManifest.load(root / "manifest.json")
    print("\nper-performance state:")
    for record in manifest.records:
        for entry in record.performances:
            print(f"  {entry.path}")
            print(f"    label={entry.label} star={entry.star} lead={entry.is_lead} "
                  f"recalls={ {k: round(v, 3) for k, v in entry.stage_recalls.items()} }")
