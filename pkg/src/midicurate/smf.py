"""Standard MIDI File (format 0/1) binary reading and writing.

Only the event types the toolkit cares about are decoded: note on/off,
set-tempo meta events, marker text (meta type 0x06) and control changes
(kept verbatim, never interpreted). Everything else is skipped but
validated enough to keep the byte cursor in sync; malformed files raise
:class:`~midicurate.errors.MidiParseError` with the byte offset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import MidiParseError

HEADER_MAGIC = b"MThd"
TRACK_MAGIC = b"MTrk"

META_TEXT_MARKER = 0x06
META_SET_TEMPO = 0x51
META_END_OF_TRACK = 0x2F

DEFAULT_TEMPO = 500_000  # microseconds per quarter note (120 BPM)


@dataclass
class RawNote:
    """A paired note-on/note-off event in tick time."""

    pitch: int
    velocity: int
    channel: int
    on_tick: int
    off_tick: int
    unterminated: bool = False


@dataclass
class ParsedMidi:
    """Merged, tick-domain content of a format 0/1 file."""

    ticks_per_quarter: int
    notes: list[RawNote] = field(default_factory=list)
    tempos: list[tuple[int, int]] = field(default_factory=list)
    markers: list[tuple[int, str]] = field(default_factory=list)
    controls: list[tuple[int, int, int, int]] = field(default_factory=list)
    end_tick: int = 0


def _read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    start = pos
    while True:
        if pos >= len(data):
            raise MidiParseError("truncated variable-length quantity", offset=start)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
        if pos - start > 4:
            raise MidiParseError("variable-length quantity too long", offset=start)


def _write_varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError(f"negative delta time {value}")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def _parse_track(data: bytes, base: int, parsed: ParsedMidi) -> None:
    """Parse one MTrk payload, appending events to `parsed`.

    `base` is the payload's offset in the whole file, used for error
    reporting only.
    """
    pos = 0
    tick = 0
    running_status = None
    # (pitch, channel) -> FIFO of pending note-ons
    active: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def close(pitch: int, channel: int, off_tick: int) -> None:
        queue = active.get((pitch, channel))
        if queue:
            on_tick, velocity = queue.pop(0)
            parsed.notes.append(
                RawNote(pitch, velocity, channel, on_tick, off_tick)
            )

    while pos < len(data):
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= len(data):
            raise MidiParseError("event truncated", offset=base + pos)
        status = data[pos]
        if status & 0x80:
            pos += 1
            if status < 0xF0:
                running_status = status
        else:
            if running_status is None:
                raise MidiParseError(
                    "data byte without running status", offset=base + pos
                )
            status = running_status

        kind = status & 0xF0
        channel = status & 0x0F
        if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
            if pos + 2 > len(data):
                raise MidiParseError("channel event truncated", offset=base + pos)
            d1, d2 = data[pos], data[pos + 1]
            pos += 2
            if kind == 0x90 and d2 > 0:
                active.setdefault((d1, channel), []).append((tick, d2))
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                close(d1, channel, tick)
            elif kind == 0xB0:
                parsed.controls.append((tick, channel, d1, d2))
        elif kind in (0xC0, 0xD0):
            if pos + 1 > len(data):
                raise MidiParseError("channel event truncated", offset=base + pos)
            pos += 1
        elif status in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos)
            pos += length
            if pos > len(data):
                raise MidiParseError("sysex event truncated", offset=base + pos)
        elif status == 0xFF:
            if pos >= len(data):
                raise MidiParseError("meta event truncated", offset=base + pos)
            meta_type = data[pos]
            pos += 1
            length, pos = _read_varlen(data, pos)
            if pos + length > len(data):
                raise MidiParseError("meta event truncated", offset=base + pos)
            payload = data[pos:pos + length]
            pos += length
            if meta_type == META_SET_TEMPO:
                if length != 3:
                    raise MidiParseError(
                        "set-tempo event must carry 3 bytes", offset=base + pos
                    )
                parsed.tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == META_TEXT_MARKER:
                parsed.markers.append(
                    (tick, payload.decode("latin-1", errors="replace"))
                )
            elif meta_type == META_END_OF_TRACK:
                break
        else:
            raise MidiParseError(
                f"unexpected status byte 0x{status:02x}", offset=base + pos - 1
            )

    parsed.end_tick = max(parsed.end_tick, tick)
    # finish dangling note-ons at the end of the track
    for (pitch, channel), queue in active.items():
        for on_tick, velocity in queue:
            parsed.notes.append(
                RawNote(pitch, velocity, channel, on_tick, tick, unterminated=True)
            )


def parse_smf(data: bytes) -> ParsedMidi:
    """Parse format 0/1 SMF bytes into merged tick-domain events."""
    if data[:4] != HEADER_MAGIC:
        raise MidiParseError("missing MThd header", offset=0)
    if len(data) < 14:
        raise MidiParseError("header chunk truncated", offset=4)
    (header_len, fmt, n_tracks, division) = struct.unpack(">IHHH", data[4:14])
    if header_len < 6:
        raise MidiParseError(f"bad header length {header_len}", offset=4)
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", offset=8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division not supported", offset=12)
    if division == 0:
        raise MidiParseError("zero ticks per quarter", offset=12)

    parsed = ParsedMidi(ticks_per_quarter=division)
    pos = 8 + header_len
    for _ in range(n_tracks):
        if data[pos:pos + 4] != TRACK_MAGIC:
            raise MidiParseError("missing MTrk chunk", offset=pos)
        if pos + 8 > len(data):
            raise MidiParseError("track header truncated", offset=pos)
        (track_len,) = struct.unpack(">I", data[pos + 4:pos + 8])
        payload = data[pos + 8:pos + 8 + track_len]
        if len(payload) < track_len:
            raise MidiParseError("track payload truncated", offset=pos + 8)
        _parse_track(payload, pos + 8, parsed)
        pos += 8 + track_len

    parsed.tempos.sort(key=lambda item: item[0])
    parsed.markers.sort(key=lambda item: item[0])
    parsed.controls.sort(key=lambda item: (item[0], item[1], item[2]))
    return parsed


def build_smf(parsed: ParsedMidi) -> bytes:
    """Serialize merged events into a single-track (format 0) file.

    Events at equal ticks are ordered tempo < marker < control < note-off
    < note-on, so back-to-back same-pitch notes re-pair correctly.
    """
    events: list[tuple[int, int, bytes]] = []
    for tick, tempo in parsed.tempos:
        events.append(
            (tick, 0, bytes([0xFF, META_SET_TEMPO, 3]) + tempo.to_bytes(3, "big"))
        )
    for tick, text in parsed.markers:
        payload = text.encode("latin-1", errors="replace")
        events.append(
            (tick, 1, bytes([0xFF, META_TEXT_MARKER]) + _write_varlen(len(payload)) + payload)
        )
    for tick, channel, controller, value in parsed.controls:
        events.append((tick, 2, bytes([0xB0 | channel, controller, value])))
    end_tick = parsed.end_tick
    for note in parsed.notes:
        events.append((note.on_tick, 4, bytes([0x90 | note.channel, note.pitch, note.velocity])))
        events.append((note.off_tick, 3, bytes([0x80 | note.channel, note.pitch, 0])))
        end_tick = max(end_tick, note.off_tick)

    events.sort(key=lambda item: (item[0], item[1]))

    chunks = []
    last_tick = 0
    for tick, _, raw in events:
        chunks.append(_write_varlen(tick - last_tick))
        chunks.append(raw)
        last_tick = tick
    chunks.append(_write_varlen(max(end_tick - last_tick, 0)))
    chunks.append(bytes([0xFF, META_END_OF_TRACK, 0]))

    track = b"".join(chunks)
    header = HEADER_MAGIC + struct.pack(">IHHH", 6, 0, 1, parsed.ticks_per_quarter)
    return header + TRACK_MAGIC + struct.pack(">I", len(track)) + track
