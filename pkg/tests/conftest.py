import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def make_note(pitch=60, onset=0.0, duration=0.5, velocity=64, channel=0, **kw):
    from midicurate.sequence import Note

    return Note(pitch=pitch, onset=onset, duration=duration, velocity=velocity,
                channel=channel, **kw)


def make_sequence(notes, **kw):
    from midicurate.sequence import NoteSequence, canonical_sort

    return canonical_sort(NoteSequence(notes=tuple(notes), **kw))
