"""Binary and CSV file formats.

Binary files are little-endian. Every complex matrix is stored row-major as
interleaved (re, im) float64 pairs.

HEM1 (matrix dump)::

    b"HEM1" | int64 rows | int64 cols | rows*cols complex128

HGSM1 (antenna GSM)::

    b"HGSM1" | int64 n_port | int64 l_max | float64 frequency
    | n_port float64 reference impedances | Gamma | R | T | S

HTM1 (T-matrix blocks)::

    b"HTM1" | int64 l_int | int64 l_ext | float64 frequency | t | psi | psi_t | rho
"""

from __future__ import annotations

import csv
import io
import os
import threading
from pathlib import Path
from typing import BinaryIO, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import ValidationError

PathLike = Union[str, Path]

HEM_MAGIC = b"HEM1"
HGSM_MAGIC = b"HGSM1"
HTM_MAGIC = b"HTM1"

_COMPLEX = np.dtype("<c16")
_INT = np.dtype("<i8")
_FLOAT = np.dtype("<f8")


# --- Primitive blocks ---


def write_matrix(stream: BinaryIO, matrix: np.ndarray) -> None:
    stream.write(np.ascontiguousarray(matrix, dtype=_COMPLEX).tobytes())


def read_matrix(stream: BinaryIO, rows: int, cols: int) -> np.ndarray:
    count = rows * cols
    raw = stream.read(count * _COMPLEX.itemsize)
    if len(raw) != count * _COMPLEX.itemsize:
        raise ValidationError(f"truncated file: expected {rows}x{cols} complex block")
    return np.frombuffer(raw, dtype=_COMPLEX).astype(complex).reshape(rows, cols)


def read_scalars(stream: BinaryIO, dtype: np.dtype, count: int) -> np.ndarray:
    raw = stream.read(count * dtype.itemsize)
    if len(raw) != count * dtype.itemsize:
        raise ValidationError("truncated file header")
    return np.frombuffer(raw, dtype=dtype)


def expect_magic(stream: BinaryIO, magic: bytes, source: str) -> None:
    got = stream.read(len(magic))
    if got != magic:
        raise ValidationError(f"{source}: expected {magic!r} header, found {got!r}")


def atomic_write(path: PathLike, payload: bytes) -> Path:
    """Write through a temporary sibling and rename into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(f"{target.name}.tmp{os.getpid()}.{threading.get_ident()}")
    tmp.write_bytes(payload)
    os.replace(tmp, target)
    return target


# --- HEM1 ---


def write_hem(path: PathLike, matrix: np.ndarray) -> Path:
    m = np.asarray(matrix)
    if m.ndim == 1:
        m = m[:, None]
    buf = io.BytesIO()
    buf.write(HEM_MAGIC)
    buf.write(np.array(m.shape, dtype=_INT).tobytes())
    write_matrix(buf, m)
    return atomic_write(path, buf.getvalue())


def read_hem(path: PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        expect_magic(fh, HEM_MAGIC, str(path))
        rows, cols = (int(x) for x in read_scalars(fh, _INT, 2))
        return read_matrix(fh, rows, cols)


# --- CSV ---


def format_float(x: float) -> str:
    return format(float(x), ".12e")


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return atomic_write(path, buf.getvalue().encode("utf-8"))


def read_csv(path: PathLike) -> Tuple[List[str], List[List[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV file") from None
        return header, [row for row in reader]


COEFF_HEADER = ("tau", "l", "m", "re", "im")


def write_coeff_csv(path: PathLike, rows: Iterable[Tuple[int, int, int, float, float]]) -> Path:
    return write_csv(path, COEFF_HEADER, rows)
