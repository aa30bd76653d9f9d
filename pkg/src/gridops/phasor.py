"""Binary synchrophasor-style measurement frames.

Big-endian layout: sync pair (0xAA, type byte), uint16 frame size
including the checksum, uint16 stream id, uint32 epoch seconds, uint32
fraction-of-second word (flags byte in the top 8 bits, 24-bit fraction
below), a payload, and a trailing CRC-CCITT. Data frames carry float32
(magnitude, angle) pairs plus a float32 frequency deviation; the minimal
config frame carries the channel count and data rate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

SYNC_BYTE = 0xAA
TYPE_DATA = 0x01
TYPE_CONFIG = 0x03

HEADER_LEN = 14  # sync(2) size(2) idcode(2) soc(4) fracsec(4)
CHK_LEN = 2
MAX_CHANNELS = 4096
MAX_FRACTION = (1 << 24) - 1


class FrameError(Exception):
    """Base class for every decode failure; decoding never raises anything else."""


class SyncError(FrameError):
    pass


class SizeError(FrameError):
    pass


class ChecksumError(FrameError):
    pass


class EncodeError(ValueError):
    pass


def _build_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _build_crc_table()


def crc_ccitt(data: bytes) -> int:
    """CRC-CCITT (0x1021, init 0xFFFF, MSB first, no reflection, no final xor)."""
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


@dataclass
class PhasorFrame:
    frame_type: int            # TYPE_DATA or TYPE_CONFIG
    idcode: int
    soc: int
    fracsec: int               # raw 32-bit word: (flags << 24) | fraction
    phasors: list[tuple[float, float]] = field(default_factory=list)
    freq_dev: float = 0.0
    channel_count: int = 0     # config frames only
    data_rate: int = 0         # config frames only

    @property
    def fraction(self) -> int:
        return self.fracsec & MAX_FRACTION

    @property
    def time_flags(self) -> int:
        return (self.fracsec >> 24) & 0xFF


def _header(frame_type: int, size: int, idcode: int, soc: int, fracsec: int) -> bytes:
    return struct.pack(">BBHHII", SYNC_BYTE, frame_type, size, idcode, soc, fracsec)


def encode_data_frame(
    phasors: list[tuple[float, float]],
    idcode: int,
    soc: int,
    fracsec: int,
    freq_dev: float = 0.0,
) -> bytes:
    """Serialize one measurement frame. Values are quantized to float32."""
    if len(phasors) > MAX_CHANNELS:
        raise EncodeError(f"{len(phasors)} phasor channels exceeds the limit {MAX_CHANNELS}")
    payload = b"".join(struct.pack(">ff", m, a) for m, a in phasors)
    payload += struct.pack(">f", freq_dev)
    size = HEADER_LEN + len(payload) + CHK_LEN
    body = _header(TYPE_DATA, size, idcode, soc, fracsec) + payload
    return body + struct.pack(">H", crc_ccitt(body))


def encode_config_frame(channel_count: int, data_rate: int, idcode: int, soc: int,
                        fracsec: int) -> bytes:
    if not (0 <= channel_count <= MAX_CHANNELS):
        raise EncodeError(f"channel count {channel_count} out of range")
    payload = struct.pack(">Hh", channel_count, data_rate)
    size = HEADER_LEN + len(payload) + CHK_LEN
    body = _header(TYPE_CONFIG, size, idcode, soc, fracsec) + payload
    return body + struct.pack(">H", crc_ccitt(body))


def decode_frame(data: bytes) -> PhasorFrame:
    """Parse one frame. Raises a classified FrameError, never anything else."""
    if len(data) < HEADER_LEN + CHK_LEN:
        raise SizeError(f"{len(data)} bytes is shorter than the minimal frame")
    sync, ftype, size, idcode, soc, fracsec = struct.unpack(">BBHHII", data[:HEADER_LEN])
    if sync != SYNC_BYTE:
        raise SyncError(f"bad sync byte 0x{sync:02X}")
    if ftype not in (TYPE_DATA, TYPE_CONFIG):
        raise SyncError(f"unknown frame type 0x{ftype:02X}")
    if size != len(data):
        raise SizeError(f"frame_size field {size} but {len(data)} bytes supplied")
    if size < HEADER_LEN + CHK_LEN:
        raise SizeError(f"frame_size field {size} smaller than the minimal frame")
    (chk,) = struct.unpack(">H", data[-CHK_LEN:])
    if chk != crc_ccitt(data[:-CHK_LEN]):
        raise ChecksumError("checksum mismatch")

    payload = data[HEADER_LEN:-CHK_LEN]
    frame = PhasorFrame(frame_type=ftype, idcode=idcode, soc=soc, fracsec=fracsec)
    if ftype == TYPE_DATA:
        if len(payload) < 4 or (len(payload) - 4) % 8 != 0:
            raise SizeError(f"data payload of {len(payload)} bytes is not 8n + 4")
        n = (len(payload) - 4) // 8
        for k in range(n):
            m, a = struct.unpack(">ff", payload[8 * k : 8 * k + 8])
            frame.phasors.append((m, a))
        (frame.freq_dev,) = struct.unpack(">f", payload[-4:])
    else:
        if len(payload) != 4:
            raise SizeError(f"config payload must be 4 bytes, got {len(payload)}")
        frame.channel_count, frame.data_rate = struct.unpack(">Hh", payload)
    return frame
