"""Standard MIDI File ingestion and emission.

Reads format 0 and 1 files into note lists: all tracks are merged, running
status is honored, note-on with velocity 0 counts as note-off, and
overlapping same-pitch notes pair FIFO per (channel, pitch).  Ticks convert
to seconds through the tempo map with exact integer accumulation (one float
division at the end).  Writing emits a fixed-tempo format-0 file whose
parse reproduces the input within half a tick.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .grid import NoteEvent, NoteList

__all__ = [
    "MidiFormatError",
    "TempoMap",
    "parse_smf",
    "parse_pedal_events",
    "write_smf",
    "extend_offsets_with_pedal",
]

DEFAULT_TEMPO_US = 500000  # 120 BPM
_MAX_VARLEN = 0x0FFFFFFF


class MidiFormatError(ValueError):
    """Malformed SMF data; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class TempoMap:
    """Tempo changes as (tick, microseconds per quarter), first entry at 0."""

    ticks_per_quarter: int
    events: Tuple[Tuple[int, int], ...] = ((0, DEFAULT_TEMPO_US),)

    def __post_init__(self):
        if self.ticks_per_quarter < 1:
            raise ValueError(f"ticks_per_quarter must be >= 1, got {self.ticks_per_quarter}")
        events = tuple((int(t), int(us)) for t, us in self.events)
        if not events or events[0][0] != 0:
            events = ((0, DEFAULT_TEMPO_US),) + events
        ticks = [t for t, _ in events]
        if any(b <= a for a, b in zip(ticks, ticks[1:])):
            raise ValueError("tempo event ticks must be strictly increasing")
        if any(us <= 0 for _, us in events):
            raise ValueError("tempo values must be positive")
        # cumulative elapsed time up to each change, in tick*us units (exact)
        cum = [0]
        for (t0, us0), (t1, _) in zip(events, events[1:]):
            cum.append(cum[-1] + (t1 - t0) * us0)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "_cum_tick_us", tuple(cum))
        object.__setattr__(self, "_ticks", tuple(ticks))

    def tick_to_seconds(self, tick: int) -> float:
        if tick < 0:
            raise ValueError(f"tick must be >= 0, got {tick}")
        i = bisect_right(self._ticks, tick) - 1
        t0, us0 = self.events[i]
        exact = self._cum_tick_us[i] + (tick - t0) * us0
        return exact / (self.ticks_per_quarter * 1e6)


def _read_varlen(data: bytes, pos: int) -> Tuple[int, int]:
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise MidiFormatError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiFormatError("variable-length quantity exceeds 4 bytes", pos)


def _encode_varlen(value: int) -> bytes:
    if not 0 <= value <= _MAX_VARLEN:
        raise ValueError(f"delta time {value} outside variable-length range")
    out = bytearray([value & 0x7F])
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


@dataclass
class _Track:
    notes: List[Tuple[int, int, str, int, int, int]]  # (tick, seq, kind, ch, pitch, vel)
    tempos: List[Tuple[int, int]]
    cc64: List[Tuple[int, int]]
    end_tick: int


def _parse_track(data: bytes, start: int, length: int, warnings: List[str]) -> _Track:
    pos = start
    end = start + length
    tick = 0
    seq = 0
    running: Optional[int] = None
    track = _Track(notes=[], tempos=[], cc64=[], end_tick=0)
    saw_end = False
    while pos < end:
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= end:
            raise MidiFormatError("truncated event after delta time", pos)
        byte = data[pos]
        if byte & 0x80:
            status = byte
            pos += 1
        else:
            if running is None:
                raise MidiFormatError("data byte with no running status", pos)
            status = running

        if status < 0xF0:
            running = status
            kind = status & 0xF0
            channel = status & 0x0F
            n_data = 1 if kind in (0xC0, 0xD0) else 2
            if pos + n_data > end:
                raise MidiFormatError("truncated channel event", pos)
            d = data[pos : pos + n_data]
            pos += n_data
            if kind == 0x90 and d[1] > 0:
                track.notes.append((tick, seq, "on", channel, d[0], d[1]))
            elif kind == 0x80 or (kind == 0x90 and d[1] == 0):
                track.notes.append((tick, seq, "off", channel, d[0], d[1]))
            elif kind == 0xB0 and d[0] == 64:
                track.cc64.append((tick, d[1]))
            seq += 1
        elif status in (0xF0, 0xF7):
            running = None
            length_sx, pos = _read_varlen(data, pos)
            if pos + length_sx > end:
                raise MidiFormatError("truncated sysex event", pos)
            pos += length_sx
        elif status == 0xFF:
            running = None
            if pos >= end:
                raise MidiFormatError("truncated meta event", pos)
            meta_type = data[pos]
            pos += 1
            meta_len, pos = _read_varlen(data, pos)
            if pos + meta_len > end:
                raise MidiFormatError("truncated meta event payload", pos)
            payload = data[pos : pos + meta_len]
            pos += meta_len
            if meta_type == 0x51:
                if meta_len != 3:
                    raise MidiFormatError("tempo meta event must carry 3 bytes", pos)
                track.tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == 0x2F:
                saw_end = True
                break
        else:
            raise MidiFormatError(f"unexpected status byte 0x{status:02X}", pos)
    if not saw_end:
        warnings.append("track missing end-of-track meta event")
    track.end_tick = tick
    return track


def _parse_file(data: bytes) -> Tuple[List[_Track], int, List[str]]:
    if len(data) < 14:
        raise MidiFormatError("file too short for an SMF header", 0)
    if data[0:4] != b"MThd":
        raise MidiFormatError("bad header magic, expected MThd", 0)
    header_len = int.from_bytes(data[4:8], "big")
    if header_len < 6 or 8 + header_len > len(data):
        raise MidiFormatError(f"bad header length {header_len}", 4)
    fmt = int.from_bytes(data[8:10], "big")
    n_tracks = int.from_bytes(data[10:12], "big")
    division = int.from_bytes(data[12:14], "big")
    if fmt not in (0, 1):
        raise MidiFormatError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiFormatError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiFormatError("ticks per quarter must be positive", 12)

    warnings: List[str] = []
    tracks: List[_Track] = []
    pos = 8 + header_len
    while pos < len(data) and len(tracks) < n_tracks:
        if pos + 8 > len(data):
            raise MidiFormatError("truncated chunk header", pos)
        magic = data[pos : pos + 4]
        length = int.from_bytes(data[pos + 4 : pos + 8], "big")
        if pos + 8 + length > len(data):
            raise MidiFormatError(f"chunk length {length} exceeds file size", pos + 4)
        if magic == b"MTrk":
            tracks.append(_parse_track(data, pos + 8, length, warnings))
        else:
            warnings.append(f"skipped unknown chunk {magic!r} at offset {pos}")
        pos = pos + 8 + length
    if len(tracks) != n_tracks:
        warnings.append(f"header declared {n_tracks} tracks, found {len(tracks)}")
    return tracks, division, warnings


def _tempo_map(tracks: Sequence[_Track], tpq: int) -> TempoMap:
    merged: dict[int, int] = {}
    for track in tracks:
        for tick, us in track.tempos:
            merged[tick] = us  # later tracks/events at the same tick win
    events = sorted(merged.items())
    if not events:
        events = [(0, DEFAULT_TEMPO_US)]
    return TempoMap(ticks_per_quarter=tpq, events=tuple(events))


def parse_smf(data: bytes) -> Tuple[NoteList, TempoMap, List[str]]:
    """Parse SMF bytes into (notes, tempo map, warnings)."""
    tracks, tpq, warnings = _parse_file(data)
    tempo = _tempo_map(tracks, tpq)

    merged = []
    for t_idx, track in enumerate(tracks):
        for tick, seq, kind, ch, pitch, vel in track.notes:
            merged.append((tick, t_idx, seq, kind, ch, pitch, vel))
    merged.sort(key=lambda ev: (ev[0], ev[1], ev[2]))

    open_notes: dict[Tuple[int, int], deque] = {}
    finished: List[Tuple[int, int, int, int]] = []  # (on_tick, off_tick, pitch, vel)
    for tick, t_idx, _seq, kind, ch, pitch, vel in merged:
        key = (ch, pitch)
        if kind == "on":
            open_notes.setdefault(key, deque()).append((tick, vel, t_idx))
        else:
            queue = open_notes.get(key)
            if not queue:
                warnings.append(f"unmatched note-off for pitch {pitch} at tick {tick}")
                continue
            on_tick, on_vel, _ = queue.popleft()
            finished.append((on_tick, tick, pitch, on_vel))
    for (ch, pitch), queue in open_notes.items():
        for on_tick, on_vel, t_idx in queue:
            end_tick = tracks[t_idx].end_tick
            warnings.append(
                f"note-on without note-off for pitch {pitch} at tick {on_tick}; "
                f"closed at end of track"
            )
            finished.append((on_tick, max(end_tick, on_tick + 1), pitch, on_vel))

    events = []
    for on_tick, off_tick, pitch, vel in finished:
        if off_tick <= on_tick:
            warnings.append(f"zero-length note for pitch {pitch} at tick {on_tick}")
            off_tick = on_tick + 1
        events.append(
            NoteEvent(
                onset_s=tempo.tick_to_seconds(on_tick),
                offset_s=tempo.tick_to_seconds(off_tick),
                pitch=pitch,
                velocity=max(1, min(127, vel)),
            )
        )
    return NoteList(tuple(events)), tempo, warnings


def parse_pedal_events(data: bytes) -> List[Tuple[float, int]]:
    """Sustain-pedal (CC64) events as (time_s, value), time-sorted."""
    tracks, tpq, _ = _parse_file(data)
    tempo = _tempo_map(tracks, tpq)
    merged = []
    for track in tracks:
        merged.extend(track.cc64)
    merged.sort()
    return [(tempo.tick_to_seconds(tick), value) for tick, value in merged]


def write_smf(
    notes: NoteList,
    ticks_per_quarter: int = 480,
    tempo_us: int = DEFAULT_TEMPO_US,
) -> bytes:
    """Emit a fixed-tempo format-0 SMF for the given notes."""
    if ticks_per_quarter < 1 or ticks_per_quarter > 0x7FFF:
        raise ValueError(f"ticks_per_quarter must be in 1..32767, got {ticks_per_quarter}")
    if tempo_us < 1 or tempo_us > 0xFFFFFF:
        raise ValueError(f"tempo_us must fit in 3 bytes, got {tempo_us}")

    def to_tick(time_s: float) -> int:
        tick = round(time_s * 1e6 * ticks_per_quarter / tempo_us)
        if tick > _MAX_VARLEN:
            raise ValueError(f"time {time_s} s exceeds the writable tick range")
        return tick

    timed = []  # (tick, order, status, data1, data2): offs sort before ons
    for note in notes:
        on_tick = to_tick(note.onset_s)
        off_tick = max(to_tick(note.offset_s), on_tick + 1)
        vel = note.velocity if note.velocity is not None else 64
        timed.append((on_tick, 1, 0x90, note.pitch, vel))
        timed.append((off_tick, 0, 0x80, note.pitch, 0))
    timed.sort()

    body = bytearray()
    body += _encode_varlen(0) + bytes([0xFF, 0x51, 0x03]) + tempo_us.to_bytes(3, "big")
    last_tick = 0
    for tick, _, status, d1, d2 in timed:
        body += _encode_varlen(tick - last_tick)
        body += bytes([status, d1, d2])
        last_tick = tick
    body += _encode_varlen(0) + bytes([0xFF, 0x2F, 0x00])

    out = bytearray()
    out += b"MThd" + (6).to_bytes(4, "big")
    out += (0).to_bytes(2, "big") + (1).to_bytes(2, "big")
    out += ticks_per_quarter.to_bytes(2, "big")
    out += b"MTrk" + len(body).to_bytes(4, "big") + body
    return bytes(out)


def extend_offsets_with_pedal(
    notes: NoteList,
    pedal_events: Sequence[Tuple[float, int]],
    threshold: int = 64,
) -> NoteList:
    """Extend key-release offsets while the sustain pedal is held.

    A note whose pedal value at its raw offset is at or above the threshold
    extends to the first pedal event after the offset whose value drops
    below the threshold; extensions clip at the next same-pitch onset.  A
    pedal that never releases leaves the offset unchanged.
    """
    if not pedal_events:
        return notes
    times = [t for t, _ in pedal_events]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("pedal events must be time-sorted")

    by_pitch: dict[int, List[NoteEvent]] = {}
    for n in notes:
        by_pitch.setdefault(n.pitch, []).append(n)

    out = []
    for pitch, group in by_pitch.items():
        group.sort(key=lambda n: n.onset_s)
        for i, note in enumerate(group):
            new_offset = note.offset_s
            idx = bisect_right(times, note.offset_s) - 1
            if idx >= 0 and pedal_events[idx][1] >= threshold:
                for t, v in pedal_events[idx + 1 :]:
                    if v < threshold:
                        new_offset = t
                        break
            if i + 1 < len(group):
                new_offset = min(new_offset, group[i + 1].onset_s)
            new_offset = max(new_offset, note.offset_s)
            out.append(
                NoteEvent(
                    onset_s=note.onset_s,
                    offset_s=new_offset,
                    pitch=pitch,
                    velocity=note.velocity,
                )
            )
    return NoteList(tuple(out))
