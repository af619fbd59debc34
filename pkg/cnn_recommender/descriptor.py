"""
Whole-image SURF-style descriptor
=================================

Every training sample is represented by a single 64-dimensional SURF-style
descriptor computed from one upright keypoint that covers the image:

* the keypoint is the square of side ``min(width, height)`` centred on the
  image, rotation 0;
* the square is split into a 4×4 grid of cells and every cell is sampled on
  a fixed 5×5 lattice;
* at each sample point Haar wavelets of side ``cell`` (rounded to an even
  number ≥ 2) give a horizontal response ``dx`` and a vertical response
  ``dy``, evaluated in constant time on an integral image;
* each cell contributes ``(Σdx, Σdy, Σ|dx|, Σ|dy|)`` and the 64 values are
  L2-normalised.  An image without intensity change yields the all-zero
  vector.

Responses use uniform weights (no Gaussian weighting) and wavelet support
outside the image is filled by edge replication.  Sample points are snapped
to pixel boundaries by rounding toward the image centre, which keeps the
descriptor exactly antisymmetric under a horizontal flip.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DescriptorError
from .ingest import GrayImage, LabeledDataset
from .reports import fmt_sig, write_csv

logger = logging.getLogger(__name__)

DESCRIPTOR_SIZE = 64
GRID = 4
LATTICE = 5
MIN_SIDE = 8
ZERO_ENERGY = 1e-12
DESCRIPTOR_VARIANT = "surf64-upright-whole-image-uniform"


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area table with a zero first row and column.

    ``table[y, x]`` is the sum of all pixels above and left of ``(x, y)``
    exclusive, so ``table`` has shape ``(height + 1, width + 1)``.
    """

    table: np.ndarray

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "IntegralImage":
        height, width = pixels.shape
        table = np.zeros((height + 1, width + 1), dtype=np.float64)
        table[1:, 1:] = np.cumsum(np.cumsum(pixels, axis=0, dtype=np.float64), axis=1)
        table.setflags(write=False)
        return cls(table)

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def box_sum(self, x0, y0, x1, y1):
        """Sum over columns ``[x0, x1)`` and rows ``[y0, y1)``; accepts arrays."""
        t = self.table
        return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """A 64-value descriptor, unit-norm or exactly zero."""

    values: np.ndarray
    source_id: int = -1

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if values.size != DESCRIPTOR_SIZE:
            raise DescriptorError(f"descriptor needs {DESCRIPTOR_SIZE} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise DescriptorError("descriptor values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.source_id == other.source_id and bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]


def integral(image: GrayImage) -> IntegralImage:
    """Summed-area table of ``image``."""
    return IntegralImage.from_array(image.pixels)


def wavelet_side(cell: float) -> int:
    """Cell side rounded to an even number, at least 2."""
    return max(2, 2 * int(math.floor(cell / 2.0 + 0.5)))


def _snap(positions: np.ndarray, extent: int) -> np.ndarray:
    # nearest pixel boundary, ties resolved toward the image centre
    half = extent / 2.0
    snapped = np.where(positions < half, np.floor(positions + 0.5), np.ceil(positions - 0.5))
    return snapped.astype(np.int64)


def sample_grid(width: int, height: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """Sample boundaries of the keypoint grid.

    Returns
    -------
    (bx, by, half)
        ``bx[c, j]`` is the x boundary of lattice column ``j`` in grid column
        ``c`` and ``by`` the same along y (both shape ``(4, 5)``, image
        coordinates).  Each Haar wavelet spans ``half`` pixels on either side.
    """
    side = min(width, height)
    if side < MIN_SIDE:
        raise DescriptorError(f"image {width}x{height} is too small; the descriptor needs at least {MIN_SIDE}x{MIN_SIDE}")
    cell = side / GRID
    # odd multiples of side / 40, so rounding ties are represented exactly
    steps = 2 * LATTICE * np.arange(GRID)[:, None] + 2 * np.arange(LATTICE)[None, :] + 1
    offsets = steps * side / (2 * GRID * LATTICE)
    x0 = (width - side) / 2.0
    y0 = (height - side) / 2.0
    return _snap(x0 + offsets, width), _snap(y0 + offsets, height), wavelet_side(cell) // 2


def haar_cell_sums(image: GrayImage) -> np.ndarray:
    """Per-cell ``(Σdx, Σdy, Σ|dx|, Σ|dy|)`` before normalisation, shape (4, 4, 4)."""
    bx, by, half = sample_grid(image.width, image.height)
    pad = 2 * half
    ii = IntegralImage.from_array(np.pad(image.pixels, pad, mode="edge"))

    # axes: (cell row, cell column, lattice row, lattice column)
    x = bx[None, :, None, :] + pad
    y = by[:, None, :, None] + pad
    left, right = x - half, x + half
    top, bottom = y - half, y + half

    dx = ii.box_sum(x, top, right, bottom) - ii.box_sum(left, top, x, bottom)
    dy = ii.box_sum(left, y, right, bottom) - ii.box_sum(left, top, right, y)

    sums = np.stack(
        [dx.sum(axis=(2, 3)), dy.sum(axis=(2, 3)), np.abs(dx).sum(axis=(2, 3)), np.abs(dy).sum(axis=(2, 3))],
        axis=-1,
    )
    return sums


def extract_global_descriptor(image: GrayImage, source_id: int = -1) -> FeatureVector:
    """Describe ``image`` with one whole-image keypoint.

    Raises
    ------
    DescriptorError
        If the image is smaller than 8×8.
    """
    raw = haar_cell_sums(image).reshape(DESCRIPTOR_SIZE)
    energy = float(np.dot(raw, raw))
    if energy < ZERO_ENERGY:
        return FeatureVector(np.zeros(DESCRIPTOR_SIZE), source_id)
    return FeatureVector(raw / math.sqrt(energy), source_id)


def extract_features(dataset: LabeledDataset, workers: Optional[int] = None) -> np.ndarray:
    """Descriptor matrix of shape ``(len(dataset), 64)`` in sample order.

    Extraction runs on a thread pool; each descriptor depends only on its
    image, so the result does not depend on ``workers``.
    """
    if workers == 1:
        rows = [extract_global_descriptor(img, i).values for i, img in enumerate(dataset.images)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda item: extract_global_descriptor(item[1], item[0]).values, enumerate(dataset.images)))
    logger.info("extracted %d descriptors from %s", len(rows), dataset.name)
    if not rows:
        return np.zeros((0, DESCRIPTOR_SIZE))
    return np.stack(rows)


def write_descriptor_csv(path: str, features: np.ndarray, labels: Sequence[int]) -> None:
    """Dump descriptors as CSV: sample_id, class_id, d0..d63 (9 significant digits)."""
    header = ["sample_id", "class_id"] + [f"d{i}" for i in range(DESCRIPTOR_SIZE)]
    rows = ([i, int(label)] + [fmt_sig(float(v)) for v in vec] for i, (vec, label) in enumerate(zip(features, labels)))
    write_csv(path, header, rows)
