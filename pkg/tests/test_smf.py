"""Binary Standard MIDI File layer."""

import struct

import pytest

from midicurate import smf
from midicurate.errors import MidiParseError


def build_track(events):
    """events: list of (delta, raw_bytes)."""
    payload = b"".join(smf._write_varlen(d) + raw for d, raw in events)
    payload += b"\x00\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(payload)) + payload


def build_file(tracks, fmt=1, tpq=480):
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), tpq)
    return header + b"".join(tracks)


def test_empty_file_no_notes():
    data = build_file([build_track([])])
    parsed = smf.parse_smf(data)
    assert parsed.notes == []
    assert parsed.ticks_per_quarter == 480


def test_single_note_with_tempo():
    track = build_track([
        (0, b"\xff\x51\x03" + (500_000).to_bytes(3, "big")),
        (0, b"\x90\x3c\x50"),
        (480, b"\x80\x3c\x00"),
    ])
    parsed = smf.parse_smf(build_file([track]))
    assert len(parsed.notes) == 1
    note = parsed.notes[0]
    assert (note.pitch, note.velocity, note.on_tick, note.off_tick) == (60, 80, 0, 480)
    assert parsed.tempos == [(0, 500_000)]


def test_note_on_velocity_zero_is_note_off():
    track = build_track([(0, b"\x90\x3c\x40"), (100, b"\x90\x3c\x00")])
    parsed = smf.parse_smf(build_file([track]))
    assert parsed.notes[0].off_tick == 100


def test_running_status():
    track = build_track([
        (0, b"\x90\x3c\x40"),
        (10, b"\x3e\x40"),     # running status: second note-on
        (90, b"\x3c\x00"),     # running status: note-offs via velocity 0
        (0, b"\x3e\x00"),
    ])
    parsed = smf.parse_smf(build_file([track]))
    assert len(parsed.notes) == 2
    assert sorted((n.pitch, n.on_tick, n.off_tick) for n in parsed.notes) == [
        (60, 0, 100), (62, 10, 100),
    ]


def test_unterminated_note_flagged_and_held_to_track_end():
    track = build_track([(0, b"\x90\x3c\x40"), (200, b"\x90\x3e\x40"), (50, b"\x80\x3e\x00")])
    parsed = smf.parse_smf(build_file([track]))
    hanging = [n for n in parsed.notes if n.unterminated]
    assert len(hanging) == 1
    assert hanging[0].pitch == 60
    assert hanging[0].off_tick == 250


def test_marker_and_controls_preserved():
    track = build_track([
        (0, b"\xff\x06\x06interp"),
        (5, b"\xb0\x40\x7f"),
        (5, b"\x90\x3c\x40"),
        (100, b"\x80\x3c\x00"),
    ])
    parsed = smf.parse_smf(build_file([track]))
    assert parsed.markers == [(0, "interp")]
    assert parsed.controls == [(5, 0, 64, 127)]


def test_format_1_merges_tracks():
    t1 = build_track([(0, b"\xff\x51\x03" + (400_000).to_bytes(3, "big"))])
    t2 = build_track([(0, b"\x90\x30\x40"), (60, b"\x80\x30\x00")])
    parsed = smf.parse_smf(build_file([t1, t2], fmt=1))
    assert parsed.tempos == [(0, 400_000)]
    assert len(parsed.notes) == 1


def test_bad_header_raises_with_offset():
    with pytest.raises(MidiParseError) as err:
        smf.parse_smf(b"XXXX" + b"\x00" * 20)
    assert err.value.offset == 0


def test_bad_track_magic_offset():
    data = build_file([build_track([])])
    corrupted = data[:14] + b"XTrk" + data[18:]
    with pytest.raises(MidiParseError) as err:
        smf.parse_smf(corrupted)
    assert err.value.offset == 14


def test_format_2_rejected():
    with pytest.raises(MidiParseError):
        smf.parse_smf(build_file([build_track([])], fmt=2))


def test_truncated_event_raises():
    track = b"MTrk" + struct.pack(">I", 3) + b"\x00\x90\x3c"
    with pytest.raises(MidiParseError):
        smf.parse_smf(build_file([track]))


def test_build_parse_roundtrip(rng):
    # no same-pitch overlaps: the writer's contract is a cleaned sequence
    parsed = smf.ParsedMidi(ticks_per_quarter=960)
    tick = 0
    last_off: dict[tuple, int] = {}
    for _ in range(200):
        tick += int(rng.integers(0, 300))
        pitch = int(rng.integers(21, 109))
        channel = int(rng.integers(0, 4))
        on_tick = max(tick, last_off.get((pitch, channel), 0))
        off_tick = on_tick + int(rng.integers(1, 2000))
        last_off[(pitch, channel)] = off_tick
        parsed.notes.append(
            smf.RawNote(
                pitch=pitch,
                velocity=int(rng.integers(1, 128)),
                channel=channel,
                on_tick=on_tick,
                off_tick=off_tick,
            )
        )
    parsed.tempos = [(0, 500_000), (960, 750_000)]
    parsed.markers = [(480, "interp"), (960, "section")]
    parsed.controls = [(10, 0, 64, 127), (500, 0, 64, 0)]
    data = smf.build_smf(parsed)
    back = smf.parse_smf(data)
    assert back.tempos == parsed.tempos
    assert back.markers == parsed.markers
    assert back.controls == parsed.controls
    key = lambda n: (n.on_tick, n.pitch, n.off_tick, n.velocity, n.channel)
    assert sorted(map(key, back.notes)) == sorted(map(key, parsed.notes))


def test_varlen_roundtrip():
    for value in (0, 1, 127, 128, 8192, 16383, 16384, 2097151, 2097152):
        encoded = smf._write_varlen(value)
        decoded, pos = smf._read_varlen(encoded, 0)
        assert decoded == value and pos == len(encoded)
