"""Near-duplicate detection, lead selection and quality labeling.

Three MIDI files of the same piece: two are the same transcription
uploaded twice (one time-shifted with jitter), one is a genuinely
different interpretation. Then the heuristic label map and the synthetic
corruption generators.
"""

from dataclasses import replace

import numpy as np

from midicurate import (
    DedupMeta,
    cluster_duplicates,
    corrupt,
    heuristic_label,
    match_notes,
    scoreify,
    select_lead,
    similarity,
    star_filter,
)
from midicurate.alignment import adjusted_ratio
from midicurate.sequence import canonical_sort
from midicurate import synth

rng = np.random.default_rng(4)

score = synth.random_score(rng, n_onsets=60, bpm=120)
take = synth.render_score(score, bpm=112)
reupload = canonical_sort(take.with_notes(
    replace(n, onset=n.onset + 2.5 + (0.0 if i == 0 else float(rng.uniform(0, 0.03))))
    for i, n in enumerate(take.notes)
))
other = synth.render_score(score, bpm=80)

print("pairwise similarities (close-onset fraction, max over directions):")
print(f"  take vs reupload: {similarity(take, reupload).value:.2f}")
print(f"  take vs other:    {similarity(take, other).value:.2f}")

clusters = cluster_duplicates([take, reupload, other])
print(f"clusters: {clusters}")

metas = [
    DedupMeta("Aria_take.mid", "Aria", recall=0.97),
    DedupMeta("GiantMIDI_reupload.mid", "GiantMIDI", recall=0.95),
    DedupMeta("ATEPP_other.mid", "ATEPP", recall=0.99),
]
lead = select_lead([metas[i] for i in clusters[0]])
print(f"lead of the duplicate cluster: {lead.path} (source priority wins)")

# ---- heuristic labels --------------------------------------------------
print("\nlabel map (transcribed MIDI, by adjusted alignment ratio):")
for ratio in (0.5, 0.66, 0.71, 0.86, 0.91):
    label = heuristic_label(recorded=False, transcribed=True, adjusted_ratio=ratio)
    print(f"  ratio {ratio:.2f} -> {label.label}")
print(f"  recorded, no ratio -> {heuristic_label(True, False, None).label}")

hq = heuristic_label(False, True, 0.95)
print(f"star filter (HQ + refined recall): 0.90 -> {star_filter(hq, 0.90)}, "
      f"0.80 -> {star_filter(hq, 0.80)}")

# ---- synthetic degradation for classifier training ---------------------
perf = synth.render_score(score, bpm=120)
for level in ("LQ", "C"):
    bad = corrupt(perf, level, seed=7)
    a = match_notes(score, bad)
    print(f"corrupt({level}): {len(perf.notes)} -> {len(bad.notes)} notes, "
          f"adjusted ratio after matching {adjusted_ratio(a):.2f}")

deadpan_like = scoreify(perf, seed=8)
velocities = {n.velocity for n in deadpan_like.notes}
print(f"scoreify: constant velocity {velocities}, <=10 ms onset jitter")
