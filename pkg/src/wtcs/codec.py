"""Bit-exact persistence: PGM images and the WCS1 measurement container.

Images travel as binary PGM ("P5", maxval 255); intensities are divided by
255 on ingest and rounded half-away-from-zero back to 8 bits on egress.

Measurements travel in the WCS1 container.  All multi-byte integers are
little-endian:

    magic          4 bytes  "WCS1"
    version        u16      = 1
    height         u32      image rows before padding
    width          u32      image cols before padding
    block_size     u16
    levels         u8
    rate_num       u32      sampling rate as an exact fraction
    rate_den       u32
    operator_seed  u64
    subband_count  u8       = 3 * levels + 1
    counts         u32 x subband_count   (canonical subband order)
    flags          u8       bit0 rows orthonormalized, bit1 degenerate alloc
    payload        f32-LE x (J * sum(counts))
                   per block row-major, per subband canonical order

Operators are not stored: the seed plus the normative generation procedure
(SplitMix64 stream, Box-Muller, modified Gram-Schmidt, fixed row-major
order) reproduce them exactly on the decoding side.
"""

import struct
from fractions import Fraction
from math import ceil

import numpy as np

from .allocation import MeasurementPlan, measurement_budget
from .errors import (
    BadMagicError,
    BadVersionError,
    BudgetMismatchError,
    DimensionError,
    PgmError,
    TruncatedPayloadError,
)
from .sampling import MeasurementSet
from .wavelet import canonical_subbands, subband_side

MAGIC = b"WCS1"
VERSION = 1

FLAG_ROWS_ORTHONORMAL = 0x01
FLAG_DEGENERATE_ALLOC = 0x02

_FIXED_HEADER = struct.Struct("<4sHIIHBIIQB")  # through subband_count


# --------------------------------------------------------------------------
# PGM
# --------------------------------------------------------------------------


def _next_token(data, pos):
    """Scan one whitespace/comment-delimited token; returns (token, next_pos)."""
    n = len(data)
    while pos < n:
        byte = data[pos]
        if byte in b"#":
            while pos < n and data[pos] not in b"\n":
                pos += 1
        elif bytes((byte,)).isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not bytes((data[pos],)).isspace() and data[pos] not in b"#":
        pos += 1
    if start == pos:
        raise PgmError("unexpected end of header", offset=start)
    return data[start:pos], pos


def _header_int(data, pos, what):
    token, pos = _next_token(data, pos)
    try:
        value = int(token)
    except ValueError:
        raise PgmError(
            f"invalid {what} {token!r}", offset=pos - len(token)
        ) from None
    return value, pos


def read_image(path):
    """Load a binary PGM into a [0,1] float array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise PgmError(
            f"not a binary PGM (expected magic 'P5', got {data[:2]!r})", offset=0
        )
    pos = 2
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width <= 0 or height <= 0:
        raise PgmError(f"bad dimensions {width}x{height}", offset=2)
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval} (only 255)", offset=pos)
    if pos >= len(data) or not bytes((data[pos],)).isspace():
        raise PgmError("expected single whitespace after maxval", offset=pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise PgmError(
            f"payload holds {len(data) - pos} bytes, need {need}",
            offset=len(data),
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return pixels.reshape(height, width).astype(np.float64) / 255.0


def quantize(image):
    """[0,1] floats -> uint8, rounding half away from zero, clamped."""
    image = np.asarray(image, dtype=np.float64)
    scaled = np.clip(image * 255.0, 0.0, 255.0)
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_image(image, path):
    """Write a [0,1] float array as binary PGM (maxval 255)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise DimensionError(f"expected a nonempty 2-D image, got {image.shape}")
    h, w = image.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantize(image).tobytes())


# --------------------------------------------------------------------------
# WCS1
# --------------------------------------------------------------------------


def encode(measurements, plan=None):
    """Serialize a MeasurementSet (and its plan) to WCS1 bytes."""
    if plan is None:
        plan = measurements.plan
    plan.validate()
    subs = canonical_subbands(plan.levels)
    num, den = plan.rate.numerator, plan.rate.denominator
    if not (0 < num <= 0xFFFFFFFF and 0 < den <= 0xFFFFFFFF):
        raise ValueError(f"rate {plan.rate} does not fit u32/u32")
    flags = 0
    if plan.rows_orthonormalized:
        flags |= FLAG_ROWS_ORTHONORMAL
    if plan.degenerate_fallback:
        flags |= FLAG_DEGENERATE_ALLOC

    head = bytearray(
        _FIXED_HEADER.pack(
            MAGIC,
            VERSION,
            measurements.height,
            measurements.width,
            plan.block_size,
            plan.levels,
            num,
            den,
            plan.operator_seed,
            len(subs),
        )
    )
    for sid in subs:
        head += struct.pack("<I", plan.counts[sid])
    head += struct.pack("<B", flags)

    j_total = measurements.n_blocks
    nonzero = [sid for sid in subs if plan.counts[sid] > 0]
    if nonzero:
        stacked = np.concatenate(
            [measurements.data[sid] for sid in nonzero], axis=1
        )
        if stacked.shape != (j_total, plan.total):
            raise DimensionError(
                f"measurement array is {stacked.shape}, expected "
                f"{(j_total, plan.total)}"
            )
        payload = stacked.astype("<f4").tobytes(order="C")
    else:
        payload = b""
    return bytes(head) + payload


def decode(data):
    """Parse WCS1 bytes back into (MeasurementSet, MeasurementPlan)."""
    if len(data) < _FIXED_HEADER.size:
        raise TruncatedPayloadError(
            "stream shorter than the fixed header", offset=len(data)
        )
    (magic, version, height, width, block_size, levels, num, den, seed,
     subband_count) = _FIXED_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}", offset=4)
    if levels < 1 or subband_count != 3 * levels + 1:
        raise BudgetMismatchError(
            f"subband count {subband_count} does not match levels {levels}",
            offset=_FIXED_HEADER.size - 1,
        )
    if den == 0:
        raise BudgetMismatchError("rate denominator is zero", offset=21)
    pos = _FIXED_HEADER.size
    need = 4 * subband_count + 1
    if len(data) < pos + need:
        raise TruncatedPayloadError("header truncated", offset=len(data))
    counts_raw = struct.unpack_from(f"<{subband_count}I", data, pos)
    pos += 4 * subband_count
    (flags,) = struct.unpack_from("<B", data, pos)
    pos += 1

    subs = canonical_subbands(levels)
    counts = dict(zip(subs, counts_raw))
    rate = Fraction(num, den)
    total = sum(counts_raw)
    expected = measurement_budget(rate, block_size)
    if total != expected:
        raise BudgetMismatchError(
            f"counts sum to {total}, rate {num}/{den} implies {expected}",
            offset=_FIXED_HEADER.size,
        )
    for sid in subs:
        cap = subband_side(block_size, sid.level) ** 2
        if counts[sid] > cap:
            raise BudgetMismatchError(
                f"{sid}: count {counts[sid]} exceeds capacity {cap}",
                offset=_FIXED_HEADER.size,
            )

    plan = MeasurementPlan(
        block_size=block_size,
        levels=levels,
        rate=rate,
        total=total,
        counts=counts,
        operator_seed=seed,
        degenerate_fallback=bool(flags & FLAG_DEGENERATE_ALLOC),
        rows_orthonormalized=bool(flags & FLAG_ROWS_ORTHONORMAL),
    ).validate()

    j_total = ceil(height / block_size) * ceil(width / block_size)
    need = j_total * total * 4
    if len(data) - pos < need:
        raise TruncatedPayloadError(
            f"payload holds {len(data) - pos} bytes, need {need}",
            offset=len(data),
        )
    flat = np.frombuffer(data, dtype="<f4", count=j_total * total, offset=pos)
    stacked = flat.reshape(j_total, total).astype(np.float64)

    measurements = {}
    col = 0
    for sid in subs:
        m_s = counts[sid]
        if m_s > 0:
            measurements[sid] = np.ascontiguousarray(stacked[:, col : col + m_s])
            col += m_s
    mset = MeasurementSet(plan=plan, height=height, width=width,
                          data=measurements)
    return mset, plan
