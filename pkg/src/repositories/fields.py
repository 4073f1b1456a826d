"""Binary field files in the LFD1 layout.

Header (20 bytes, little-endian): magic ``b"LFD1"``, kind byte (0 scalar,
1 vector, 2 matrix), dimension byte, two reserved zero bytes, u32 n, f64 L.
Samples follow as interleaved f64 (re, im), row-major over grid points with
components innermost.
"""
import logging
import struct
from pathlib import Path
from typing import Dict, Optional, Type, Union

import numpy as np

from src.errors import FieldFormatError, FieldIOError, FieldShapeError
from src.models.fields import FieldKind, MatrixPotentialField, ScalarField, VectorField, _GridField
from src.models.grid import Grid

logger = logging.getLogger(__name__)

MAGIC = b"LFD1"
HEADER = struct.Struct("<4sBBHId")
SAMPLE_DTYPE = np.dtype("<c16")

FIELD_TYPES: Dict[FieldKind, Type[_GridField]] = {
    FieldKind.SCALAR: ScalarField,
    FieldKind.VECTOR: VectorField,
    FieldKind.MATRIX: MatrixPotentialField,
}


def encode_field(field: _GridField) -> bytes:
    grid = field.grid
    header = HEADER.pack(MAGIC, int(field.kind), grid.d, 0, grid.n, grid.L)
    return header + np.ascontiguousarray(field.samples, dtype=SAMPLE_DTYPE).tobytes()


def decode_field(data: bytes, expected: Optional[Type[_GridField]] = None) -> _GridField:
    if len(data) < HEADER.size:
        raise FieldFormatError(f"truncated header: {len(data)} of {HEADER.size} bytes", offset=len(data))
    magic, kind_byte, d, reserved, n, L = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}", offset=0)
    try:
        kind = FieldKind(kind_byte)
    except ValueError:
        raise FieldFormatError(f"unknown field kind {kind_byte}", offset=4) from None
    if not 1 <= d <= 3:
        raise FieldFormatError(f"dimension {d} outside 1..3", offset=5)
    if reserved:
        raise FieldFormatError("reserved bytes are not zero", offset=6)
    if n < 4 or n & (n - 1):
        raise FieldFormatError(f"n={n} is not a power of two >= 4", offset=8)
    if not np.isfinite(L) or L <= 0:
        raise FieldFormatError(f"side length {L} is not positive", offset=12)

    field_type = FIELD_TYPES[kind]
    if expected is not None and field_type is not expected:
        raise FieldShapeError(f"file holds a {field_type.__name__}, expected {expected.__name__}")

    grid = Grid(d=d, n=n, L=L)
    shape = field_type.expected_shape(grid)
    count = int(np.prod(shape))
    end = HEADER.size + count * SAMPLE_DTYPE.itemsize
    if len(data) < end:
        # offset of the first missing byte
        raise FieldFormatError(f"truncated samples: expected {end} bytes, got {len(data)}", offset=len(data))
    if len(data) > end:
        raise FieldFormatError(f"{len(data) - end} trailing bytes after samples", offset=end)

    samples = np.frombuffer(data, dtype=SAMPLE_DTYPE, count=count, offset=HEADER.size).reshape(shape)
    if not np.all(np.isfinite(samples)):
        bad = int(np.flatnonzero(~np.isfinite(samples.reshape(-1)))[0])
        raise FieldFormatError("non-finite sample", offset=HEADER.size + bad * SAMPLE_DTYPE.itemsize)
    return field_type(grid=grid, samples=samples)


class FieldRepository:
    """Reads and writes LFD1 field files."""

    def save_field(self, field: _GridField, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(encode_field(field))
        except OSError as e:
            logger.error(f"Failed to write field to {path}: {e}")
            raise FieldIOError(f"cannot write {path}: {e}") from e
        logger.info(f"Saved {type(field).__name__} (d={field.grid.d}, n={field.grid.n}) to {path}")
        return path

    def load_field(self, path: Union[str, Path], expected: Optional[Type[_GridField]] = None) -> _GridField:
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            logger.error(f"Failed to read field from {path}: {e}")
            raise FieldIOError(f"cannot read {path}: {e}") from e
        return decode_field(data, expected)
