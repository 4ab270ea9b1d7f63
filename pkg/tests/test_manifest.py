"""Corpus manifest discovery and round-trip."""

from midicurate.manifest import CorpusManifest, load_or_scan

import corpus_util


def test_scan_discovers_hierarchy(tmp_path, rng):
    corpus_util.build_basic_corpus(tmp_path, rng, n_pieces=3, perfs_per_piece=2)
    manifest = CorpusManifest.scan(tmp_path)
    assert len(manifest.records) == 3
    for record in manifest.records:
        assert record.score_path is not None
        assert len(record.performances) == 2
        for entry in record.performances:
            assert (tmp_path / entry.path).exists()
            assert entry.source in ("Aria", "ATEPP", "PERiScoPe", "GiantMIDI")


def test_scan_sets_recorded_flag(tmp_path, rng):
    ledger = corpus_util.build_basic_corpus(tmp_path, rng, n_pieces=1, perfs_per_piece=1)
    piece_dir = next(iter(tmp_path.iterdir())) / "Sonata_0" / "1st_movement"
    perf_file = next(piece_dir.glob("Aria_*.mid"))
    perf_file.rename(piece_dir / "ASAP_take.mid")
    manifest = CorpusManifest.scan(tmp_path)
    entry = manifest.records[0].performances[0]
    assert entry.source == "ASAP"
    assert entry.recorded


def test_minimal_score_detected(tmp_path, rng):
    from midicurate import synth

    score = synth.random_score(rng, n_onsets=20)
    corpus_util.write_piece(
        tmp_path, "Bach,_JS", "Suite_1", "Prelude", corpus_util.doubled_score(score),
        [("Aria_x.mid", synth.render_score(score))], minimal_score=score,
    )
    manifest = CorpusManifest.scan(tmp_path)
    record = manifest.records[0]
    assert record.score_path.endswith("score.mid")
    assert record.score_path_minimal.endswith("score_mini.mid")


def test_save_load_roundtrip(tmp_path, rng):
    corpus_util.build_basic_corpus(tmp_path, rng, n_pieces=2)
    manifest = CorpusManifest.scan(tmp_path)
    manifest.records[0].performances[0].label = "HighQuality"
    manifest.records[0].performances[0].stage_recalls = {"raw": 0.91}
    manifest.records[0].performances[0].cluster_id = 4
    path = manifest.save()
    back = CorpusManifest.load(path)
    assert back.root == manifest.root
    assert back.records == manifest.records


def test_load_or_scan_prefers_saved_manifest(tmp_path, rng):
    corpus_util.build_basic_corpus(tmp_path, rng, n_pieces=1)
    manifest = CorpusManifest.scan(tmp_path)
    manifest.records[0].performances[0].label = "Corrupted"
    manifest.save()
    again = load_or_scan(tmp_path)
    assert again.records[0].performances[0].label == "Corrupted"


def test_every_performance_in_exactly_one_record(tmp_path, rng):
    corpus_util.build_basic_corpus(tmp_path, rng, n_pieces=4, perfs_per_piece=3)
    manifest = CorpusManifest.scan(tmp_path)
    seen = [e.path for record in manifest.records for e in record.performances]
    assert len(seen) == len(set(seen)) == 12
