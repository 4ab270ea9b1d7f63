"""midicurate: cleaning, matching, alignment refinement, deduplication
and quality labeling for symbolic piano score/performance corpora."""

from .sequence import (
    Note,
    NoteSequence,
    TempoMap,
    canonical_sort,
    load_midi,
    save_midi,
    KIND_SCORE,
    KIND_PERFORMANCE,
    FLAG_INTERPOLATED,
    FLAG_REPAIRED,
)
from .cleaning import (
    CleaningReport,
    clean_sequence,
    filter_short_notes,
    remove_duplicates,
    repair_runaway_notes,
    truncate_overlaps,
)
from .alignment import (
    Alignment,
    AlignmentLink,
    adjusted_ratio,
    build_full_alignment,
    export_csv,
    note_ratio,
    precision,
    read_alignment,
    recall,
    validate_alignment,
    write_alignment,
)
from .matching import (
    OnsetCluster,
    PieceMeta,
    cluster_onsets,
    match_notes,
    select_candidates,
    verify_match,
)
from .refine import (
    HoleRange,
    OnsetPair,
    RefineConfig,
    RefineReport,
    build_onset_pairs,
    clean_inter_onset,
    clean_intra_onset,
    detect_holes,
    interpolate_notes,
    refine,
    remove_hole_links,
    strip_unaligned,
    synchronize_beats,
)
from .curation import (
    DedupMeta,
    QualityLabel,
    SimilarityScore,
    cluster_duplicates,
    corrupt,
    directed_similarity,
    heuristic_label,
    scoreify,
    select_lead,
    similarity,
    star_filter,
)
from .manifest import CorpusManifest, CorpusRecord, PerformanceEntry
from .errors import (
    AlignmentValidationError,
    EmptySequenceError,
    InterpolationError,
    MidiCurateError,
    MidiParseError,
    SynchronizationError,
    UndefinedRatioError,
    UnsupportedVersionError,
)

__version__ = "0.1.0"
