"""Dataset readers, writers and the bouncing-ball sequence generator.

File formats
------------
IDX (images): big-endian ``u32`` magic ``0x00000803`` (unsigned bytes, 3
dims), then ``u32`` count, rows, cols, then ``count*rows*cols`` pixel bytes.
Files ending in ``.gz`` are decompressed transparently.

Packed bitmaps (binary sequences): little-endian header::

    bytes 0-7    magic  b"TRUGBITS"
    bytes 8-11   u32    version (1)
    bytes 12-15  u32    count of sequences
    bytes 16-19  u32    frames per sequence T
    bytes 20-23  u32    pixels per frame n

followed by ``count`` records of ``ceil(T*n/8)`` bytes each: the sequence's
``T x n`` bits in row-major order, most significant bit first
(``numpy.packbits``).  Single images are stored with ``T = 1``.
"""
from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDX_UBYTE_3D = 0x00000803
BITMAP_MAGIC = b"TRUGBITS"
BITMAP_VERSION = 1
_BITMAP_HEADER = struct.Struct("<8sIIII")


class FormatError(ValueError):
    """Malformed or truncated input file."""


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


# ---------------------------------------------------------------- images

@dataclass
class BinaryImageDataset:
    images: np.ndarray  # (N, height*width) of 0/1
    width: int
    height: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        if self.images.ndim != 2 or self.images.shape[0] < 1:
            raise ValueError("need at least one image")
        if self.images.shape[1] != self.width * self.height:
            raise ValueError("image size does not match width * height")
        if np.any(self.images > 1):
            raise ValueError("images must be binary")

    def __len__(self):
        return self.images.shape[0]


def read_idx(path) -> np.ndarray:
    """Raw ``(count, rows, cols)`` uint8 array from an IDX image file."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise FormatError(f"{path}: header truncated at byte {len(raw)} (need 16)")
    magic, count, rows, cols = struct.unpack_from(">IIII", raw, 0)
    if magic != IDX_UBYTE_3D:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at byte 0 (want 0x{IDX_UBYTE_3D:08x})")
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise FormatError(f"{path}: payload truncated at byte {len(raw)}, expected {need}")
    if len(raw) > need:
        raise FormatError(f"{path}: {len(raw) - need} trailing bytes after offset {need}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def write_idx(path, images) -> None:
    images = np.asarray(images)
    if images.ndim != 3 or images.dtype != np.uint8:
        raise ValueError("write_idx expects a (count, rows, cols) uint8 array")
    blob = struct.pack(">IIII", IDX_UBYTE_3D, *images.shape) + images.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        # fixed mtime keeps the bytes reproducible
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(blob)
    else:
        path.write_bytes(blob)


def load_idx_images(path, binarize_threshold: float = 0.5, stochastic: bool = False,
                    rng: np.random.Generator | None = None, limit: int | None = None) -> BinaryImageDataset:
    """Load and binarize an IDX image file.

    Intensities are scaled to [0, 1].  The deterministic mode sets a bit
    when the intensity reaches ``binarize_threshold``; the stochastic mode
    draws Bernoulli(intensity) per pixel and needs ``rng``.
    """
    if not 0.0 < binarize_threshold < 1.0:
        raise ValueError("binarize_threshold must lie in (0, 1)")
    raw = read_idx(path)
    if limit is not None:
        raw = raw[:limit]
    count, rows, cols = raw.shape
    inten = raw.reshape(count, rows * cols).astype(float) / 255.0
    if stochastic:
        if rng is None:
            raise ValueError("stochastic binarization needs a random generator")
        bits = rng.random(inten.shape) < inten
    else:
        bits = inten >= binarize_threshold
    return BinaryImageDataset(bits.astype(np.uint8), width=cols, height=rows)


# ---------------------------------------------------------------- regression

@dataclass
class ColumnStats:
    mean: np.ndarray
    std: np.ndarray
    kept: np.ndarray  # indices of retained columns in the source table
    dropped: list = field(default_factory=list)


@dataclass
class RegressionDataset:
    inputs: np.ndarray   # standardized
    targets: np.ndarray  # standardized
    feature_stats: ColumnStats
    target_stats: ColumnStats

    def __len__(self):
        return self.inputs.shape[0]

    def destandardize(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.target_stats.std + self.target_stats.mean

    @property
    def raw_targets(self) -> np.ndarray:
        return self.destandardize(self.targets)


class CsvParseError(FormatError):
    pass


def read_numeric_csv(path, header: bool = False) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for r, row in enumerate(reader, start=1):
            if header and r == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvParseError(f"{path}: non-numeric cell {cell!r} at row {r}, column {c}") from None
            if rows and len(vals) != len(rows[0]):
                raise CsvParseError(f"{path}: row {r} has {len(vals)} columns, expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    return np.array(rows)


def _fit_stats(cols: np.ndarray, index: np.ndarray, drop_constant: bool) -> ColumnStats:
    mean = cols.mean(axis=0)
    std = cols.std(axis=0)
    const = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if np.any(const) and not drop_constant:
        raise ValueError("constant target column cannot be standardized")
    keep = ~const
    return ColumnStats(mean[keep], std[keep], index[keep], [int(i) for i in index[const]])


def split_regression(table: np.ndarray, target_columns, split_seed: int, test_fraction: float):
    """Shuffle rows with ``split_seed`` and standardize with train-split statistics."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n_rows, n_cols = table.shape
    tcols = np.array(sorted({int(c) % n_cols for c in np.atleast_1d(target_columns)}))
    fcols = np.array([c for c in range(n_cols) if c not in set(tcols)])
    n_test = int(round(n_rows * test_fraction))
    if n_test == 0 or n_test == n_rows:
        raise ValueError(f"split of {n_rows} rows at fraction {test_fraction} leaves an empty side")
    perm = np.random.default_rng(split_seed).permutation(n_rows)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    train, test = table[train_idx], table[test_idx]
    fs = _fit_stats(train[:, fcols], fcols, drop_constant=True)
    ts = _fit_stats(train[:, tcols], tcols, drop_constant=False)

    def make(rows):
        return RegressionDataset((rows[:, fs.kept] - fs.mean) / fs.std,
                                 (rows[:, ts.kept] - ts.mean) / ts.std, fs, ts)

    return make(train), make(test)


def load_regression_csv(path, target_columns=-1, split_seed: int = 0, test_fraction: float = 0.1,
                        header: bool = False):
    """Read a numeric CSV and return standardized ``(train, test)`` splits."""
    return split_regression(read_numeric_csv(path, header=header), target_columns, split_seed, test_fraction)


# ---------------------------------------------------------------- bouncing balls

@dataclass
class BouncingBallConfig:
    n_balls: int = 3
    frame_size: int = 30
    n_frames: int = 100
    radius: float = 3.0
    speed: float = 1.0
    seed: int = 0
    n_sequences: int = 1

    def __post_init__(self):
        if self.n_balls < 0 or self.frame_size < 1 or self.n_frames < 1 or self.n_sequences < 0:
            raise ValueError("invalid bouncing-ball sizes")
        if not 0 < self.radius < self.frame_size / 2:
            raise ValueError("radius must lie in (0, frame_size / 2)")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")


def simulate_balls(config: BouncingBallConfig, pos, vel) -> np.ndarray:
    """Centre trajectories ``(n_frames, n_balls, 2)`` with elastic wall reflections.

    Balls ignore each other.  ``pos``/``vel`` are ``(n_balls, 2)`` arrays in
    pixel units, (column, row) order; frame 0 shows the initial positions.
    """
    lo, hi = config.radius, config.frame_size - config.radius
    pos = np.array(pos, dtype=float).reshape(-1, 2)
    vel = np.array(vel, dtype=float).reshape(-1, 2)
    out = np.empty((config.n_frames, pos.shape[0], 2))
    for t in range(config.n_frames):
        out[t] = pos
        pos = pos + vel
        # a step never exceeds the box width, so one fold per wall suffices
        below, above = pos < lo, pos > hi
        pos = np.where(below, 2 * lo - pos, pos)
        pos = np.where(above, 2 * hi - pos, pos)
        vel = np.where(below | above, -vel, vel)
    return out


def rasterize(centres, radius: float, frame_size: int) -> np.ndarray:
    """Filled discs on a ``frame_size`` grid, flattened row-major; pixel centres at +0.5."""
    grid = np.arange(frame_size) + 0.5
    cols, rows = np.meshgrid(grid, grid)
    frame = np.zeros((frame_size, frame_size), dtype=bool)
    for cx, cy in np.reshape(centres, (-1, 2)):
        frame |= (cols - cx) ** 2 + (rows - cy) ** 2 <= radius * radius
    return frame.reshape(-1).astype(np.uint8)


def generate_bouncing_balls(config: BouncingBallConfig) -> list:
    """``config.n_sequences`` binary videos of shape ``(n_frames, frame_size**2)``."""
    if config.speed > config.frame_size - 2 * config.radius:
        raise ValueError("speed exceeds the free width of the box")
    rng = np.random.default_rng(config.seed)
    lo, hi = config.radius, config.frame_size - config.radius
    seqs = []
    for _ in range(config.n_sequences):
        pos = rng.uniform(lo, hi, size=(config.n_balls, 2))
        angle = rng.uniform(0.0, 2 * np.pi, size=config.n_balls)
        vel = config.speed * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
        traj = simulate_balls(config, pos, vel)
        seqs.append(np.stack([rasterize(c, config.radius, config.frame_size) for c in traj]))
    return seqs


# ---------------------------------------------------------------- packed bitmaps

def write_bitmaps(path, sequences, n_pixels: int | None = None, n_frames: int | None = None) -> None:
    """Write equal-shape binary ``(T, n)`` sequences to the packed container.

    An empty collection needs ``n_pixels`` and ``n_frames`` for the header.
    """
    seqs = [np.asarray(s) for s in sequences]
    if seqs:
        shape = seqs[0].shape
        if len(shape) != 2 or any(s.shape != shape for s in seqs):
            raise ValueError("all sequences must share one (T, n) shape")
        n_frames, n_pixels = shape
        if any(np.any((s != 0) & (s != 1)) for s in seqs):
            raise ValueError("sequences must be binary")
    elif n_pixels is None or n_frames is None:
        raise ValueError("an empty container needs n_frames and n_pixels")
    parts = [_BITMAP_HEADER.pack(BITMAP_MAGIC, BITMAP_VERSION, len(seqs), n_frames, n_pixels)]
    parts += [np.packbits(s.astype(np.uint8).reshape(-1)).tobytes() for s in seqs]
    Path(path).write_bytes(b"".join(parts))


def read_bitmaps(path) -> np.ndarray:
    """Inverse of ``write_bitmaps``: a ``(count, T, n)`` uint8 array."""
    raw = _read_bytes(path)
    size = _BITMAP_HEADER.size
    if len(raw) < size:
        raise FormatError(f"{path}: header truncated at byte {len(raw)} (need {size})")
    magic, version, count, n_frames, n_pixels = _BITMAP_HEADER.unpack_from(raw, 0)
    if magic != BITMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0")
    if version != BITMAP_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 8")
    rec = math.ceil(n_frames * n_pixels / 8)
    need = size + count * rec
    if len(raw) != need:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {need}")
    out = np.zeros((count, n_frames, n_pixels), dtype=np.uint8)
    for i in range(count):
        bits = np.unpackbits(np.frombuffer(raw, np.uint8, rec, size + i * rec))
        out[i] = bits[: n_frames * n_pixels].reshape(n_frames, n_pixels)
    return out


def render_ascii(frame, width: int) -> str:
    """Quick text view of one binary frame."""
    rows = np.asarray(frame).reshape(-1, width)
    return "\n".join("".join("#" if v else "." for v in row) for row in rows)
