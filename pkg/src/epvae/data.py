"""MNIST IDX ingestion, pixel normalisation, batching and PGM grid export."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
ROWS = COLS = 28
IMAGE_DIM = ROWS * COLS


class IdxFormatError(ValueError):
    """Base class for malformed IDX files. ``offset`` is the byte position at fault."""

    def __init__(self, message, path, offset):
        super().__init__(f"{path}: {message} (offset {offset})")
        self.path = str(path)
        self.offset = offset


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class DimensionMismatchError(IdxFormatError):
    pass


@dataclass(frozen=True)
class RawMnist:
    images: np.ndarray  # (N, 28, 28) uint8
    labels: np.ndarray  # (N,) uint8


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, 784) float64 in [-1, 1]
    labels: np.ndarray  # (N,) uint8

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.images)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.images[idx], self.labels[idx])

    @classmethod
    def from_raw(cls, raw: RawMnist) -> "Dataset":
        return cls(normalize(raw.images.reshape(len(raw.images), -1)), raw.labels.copy())


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_idx(buf: bytes, path, magic: int, ndim: int) -> np.ndarray:
    header = 4 + 4 * ndim
    if len(buf) < 4:
        raise TruncatedFileError("file ends inside the magic number", path, len(buf))
    (found,) = struct.unpack(">I", buf[:4])
    if found != magic:
        raise BadMagicError(f"magic 0x{found:08x}, expected 0x{magic:08x}", path, 0)
    if len(buf) < header:
        raise TruncatedFileError("file ends inside the dimension header", path, len(buf))
    dims = struct.unpack(">" + "I" * ndim, buf[4:header])
    if ndim == 3 and dims[1:] != (ROWS, COLS):
        raise DimensionMismatchError(f"image size {dims[1]}x{dims[2]}, expected 28x28", path, 8)
    expected = header + int(np.prod(dims))
    if len(buf) < expected:
        raise TruncatedFileError(
            f"expected {expected} bytes, file has {len(buf)}", path, len(buf))
    if len(buf) > expected:
        raise DimensionMismatchError(
            f"{len(buf) - expected} trailing bytes after declared data", path, expected)
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims).copy()


def load_idx(images_path, labels_path) -> RawMnist:
    """Read an MNIST image/label file pair (plain or ``.gz``) as raw bytes."""
    images = _parse_idx(_read_bytes(images_path), images_path, IMAGE_MAGIC, 3)
    labels = _parse_idx(_read_bytes(labels_path), labels_path, LABEL_MAGIC, 1)
    if len(images) != len(labels):
        raise DimensionMismatchError(
            f"{len(images)} images vs {len(labels)} labels", labels_path, 4)
    return RawMnist(images, labels)


def load_mnist(images_path, labels_path) -> Dataset:
    return Dataset.from_raw(load_idx(images_path, labels_path))


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    images = np.asarray(images, dtype=np.uint8).reshape(-1, ROWS, COLS)
    labels = np.asarray(labels, dtype=np.uint8)
    for path, magic, arr in ((images_path, IMAGE_MAGIC, images), (labels_path, LABEL_MAGIC, labels)):
        payload = struct.pack(">I" + "I" * arr.ndim, magic, *arr.shape) + arr.tobytes()
        path = Path(path)
        if path.suffix == ".gz":
            # mtime=0 keeps the archive bytes reproducible
            with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
                f.write(payload)
        else:
            path.write_bytes(payload)


def normalize(raw):
    """Map pixel bytes 0..255 onto [-1, 1]; 0 and 255 land exactly on the ends."""
    return np.asarray(raw, dtype=np.float64) / 127.5 - 1.0


def to_bytes(images) -> np.ndarray:
    """Inverse of :func:`normalize` with round-half-up and clamping."""
    return np.clip(np.floor((np.asarray(images, dtype=np.float64) + 1.0) * 127.5 + 0.5),
                   0, 255).astype(np.uint8)


def batches(n, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled index slices for one epoch, keyed by ``(seed, epoch)``.

    ``n`` may be a count or anything with ``len``. The last batch is short
    when ``batch_size`` does not divide ``n``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = n if isinstance(n, (int, np.integer)) else len(n)
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def image_grid(images, cols: int) -> np.ndarray:
    """Tile flattened 28x28 images row-major into a uint8 raster (unused cells black)."""
    images = np.asarray(images, dtype=np.float64).reshape(-1, ROWS, COLS)
    if len(images) == 0:
        raise ValueError("cannot build a grid from zero images")
    if cols < 1:
        raise ValueError("cols must be >= 1")
    nrows = -(-len(images) // cols)
    raster = np.zeros((nrows * ROWS, cols * COLS), dtype=np.uint8)
    tiles = to_bytes(images)
    for k, tile in enumerate(tiles):
        r, c = divmod(k, cols)
        raster[r * ROWS:(r + 1) * ROWS, c * COLS:(c + 1) * COLS] = tile
    return raster


def write_pgm(raster: np.ndarray, path):
    raster = np.asarray(raster, dtype=np.uint8)
    h, w = raster.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + raster.tobytes())


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while not buf[pos:pos + 1].isspace():
            pos += 1
        fields.append(buf[start:pos])
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit P5 graymap")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=pos + 1).reshape(h, w).copy()


def write_image_grid(images, cols: int, path) -> np.ndarray:
    raster = image_grid(images, cols)
    write_pgm(raster, path)
    return raster
