"""From metadata prefilter to a verified note alignment.

Shows candidate selection over piece metadata, the two-level matcher on
an expressively warped performance, the quality ratios, and the
alignment container round trip.
"""

import tempfile
from pathlib import Path

import numpy as np

from midicurate import (
    PieceMeta,
    adjusted_ratio,
    match_notes,
    note_ratio,
    precision,
    read_alignment,
    recall,
    select_candidates,
    verify_match,
    write_alignment,
)
from midicurate import synth

rng = np.random.default_rng(2)

# ---- candidate prefilter on metadata ---------------------------------
scores = [
    PieceMeta.from_title("Chopin, Frédéric", "Etude Op.10 No.3", 800, path="chopin/op10no3"),
    PieceMeta.from_title("Bach, Johann Sebastian", "Prelude BWV 846", 520, path="bach/bwv846"),
]
perfs = [
    PieceMeta.from_title("Frederic Chopin", "etude op.10", 900, path="p1.mid"),
    PieceMeta.from_title("Frederic Chopin", "etude op.25 no.11", 860, path="p2.mid"),
    PieceMeta.from_title("Bach, J.S.", "prelude bwv 846", 500, path="p3.mid"),
    PieceMeta.from_title("Bach, J.S.", "chaconne", 2100, path="p4.mid"),  # ratio off
]
pairs = select_candidates(scores, perfs)
print("candidate pairs (composer + note ratio + shared tokens):")
for s, p in pairs:
    print(f"  {s.path} <- {p.path} (ratio {p.note_count / s.note_count:.2f})")

# ---- note-level matching against a warped performance -----------------
score = synth.random_score(rng, n_onsets=200, bpm=120)
perf = synth.render_score(score)
warped, _ = synth.warp_performance(perf, rng, n_segments=5, jitter=0.008)

a = match_notes(score, warped)
print(f"\nmatched {a.n_matched}/{a.n_score} score notes")
print(f"note ratio {note_ratio(a):.3f}, recall {recall(a):.3f}, "
      f"precision {precision(a):.3f}, adjusted {adjusted_ratio(a):.3f}")

# ---- verification ladder: maximal score first, minimal as fallback ----
aligned, variant, definitive = verify_match(score, None, warped)
print(f"verified against the {variant} score, definitive: {definitive}")

# ---- container round trip ---------------------------------------------
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "pair.mcal"
    write_alignment(aligned, score, warped, path)
    back = read_alignment(path)
    assert back.links == aligned.links
    print(f"alignment container: {path.stat().st_size} bytes, "
          f"{len(back.links)} links round-tripped")
