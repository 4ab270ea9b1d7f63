"""Refining a raw alignment into a complete, temporally coherent pair.

Injects the defects each refinement stage targets: a skipped region
(alignment hole), a large timing jump (implied-tempo outlier), and
deleted notes (to be interpolated). Then runs the pipeline and inspects
the per-stage report, the implied tempi, and beat synchronization.
"""

import numpy as np

from midicurate import RefineConfig, match_notes, refine, synchronize_beats
from midicurate.refine import build_onset_pairs
from midicurate.sequence import FLAG_INTERPOLATED
from midicurate import synth

rng = np.random.default_rng(3)

score = synth.random_score(rng, n_onsets=150, bpm=120)
perf = synth.render_score(score, bpm=96)
n = len(perf.notes)

# skipped repeat: one contiguous fifth of the notes never played
shorter, _ = synth.drop_score_region(perf, range(n // 4, n // 4 + n // 5))
# a 12-second transcription jump in the middle
jumped = synth.inject_jump(shorter, shorter.notes[len(shorter.notes) // 2].onset, 12.0)

raw = match_notes(score, jumped)
print(f"raw alignment: {raw.n_matched}/{raw.n_score} matched "
      f"(recall {raw.n_matched / raw.n_score:.3f})")

refined_perf, refined_a, report = refine(score, jumped, raw, RefineConfig())
print("\nrefinement report:")
for key, value in report.as_dict().items():
    if key != "hole_spans":
        print(f"  {key}: {value}")
print(f"stage recalls: { {k: round(v, 4) for k, v in refined_a.stage_recalls.items()} }")

# every remaining score note has exactly one performance counterpart
deletions = sum(1 for l in refined_a.links if l.kind == "deletion")
synthetic = sum(1 for x in refined_perf.notes if FLAG_INTERPOLATED in x.flags)
print(f"\ncompleteness: {deletions} deletions left, {synthetic} synthetic notes "
      f"(marked with 'interp' text markers)")

# all implied tempi are musically plausible after onset cleaning
pairs = build_onset_pairs(refined_a, score, refined_perf)
tempi = [
    60.0 * (cur.score_onset - prev.score_onset) / (cur.perf_time - prev.perf_time)
    for prev, cur in zip(pairs, pairs[1:])
]
print(f"implied tempo range: {min(tempi):.1f} .. {max(tempi):.1f} BPM")

# optional stage S: re-express ticks on the score's beat grid
synced = synchronize_beats(score, refined_perf, refined_a)
print(f"\nbeat-synchronized: {len(synced.tempo_events)} tempo events, "
      f"{synced.ticks_per_quarter} ticks per beat")
