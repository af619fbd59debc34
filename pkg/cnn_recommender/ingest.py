"""
Dataset ingestion
=================

This module decodes image-classification datasets into one uniform in-memory
representation, :class:`LabeledDataset`, made of :class:`GrayImage` samples
with dense 0-based class ids.  Four sources are supported:

* **load_idx** – the big-endian IDX pair used by MNIST (images magic
  ``0x00000803``, labels magic ``0x00000801``).
* **load_cifar_binary** – CIFAR binary batches, one label byte followed by
  1024 red, 1024 green and 1024 blue bytes per record.
* **load_image_dir** – one sub-directory per class holding PNG or binary
  PGM/PPM files; class ids follow the lexicographic order of the
  sub-directory names.
* **synth_blob_task** – a seeded generator of Gaussian-blob tasks whose
  difficulty is controlled by the blob separation and the pixel noise.

Colour inputs are converted to luminance with fixed BT.601 weights and no
resizing takes place: the whole-image descriptor works at native size.

Datasets are immutable once built and may be shared between threads.
"""

from __future__ import annotations

import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .config import LUMA_WEIGHTS
from .errors import CifarFormatError, DatasetError, IdxFormatError, ImageDecodeError, InputError
from .reports import write_bytes

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE

IMAGE_SUFFIXES = {".png", ".pgm", ".ppm"}
MIN_IMAGE_SIDE = 3


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale image with luminance values in ``[0, 1]``.

    ``pixels`` is a read-only ``(height, width)`` float64 array; its row-major
    flattening is the pixel buffer.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise DatasetError(f"image must be 2-D, got shape {arr.shape}")
        height, width = arr.shape
        if width < MIN_IMAGE_SIDE or height < MIN_IMAGE_SIDE:
            raise DatasetError(f"image {width}x{height} is smaller than {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise DatasetError("pixel values must be finite and within [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Images with integer class labels.

    Construction checks that every label lies in ``[0, class_count)`` and that
    there are at least two classes.  Completeness (every class referenced by a
    sample) is checked by :meth:`require_complete`, which every scoring entry
    point calls; partial fixtures such as a single CIFAR record can therefore
    still be loaded and inspected.
    """

    images: Tuple[GrayImage, ...]
    labels: Tuple[int, ...]
    class_count: int
    name: str = "dataset"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        object.__setattr__(self, "metadata", dict(self.metadata))
        if len(self.images) != len(self.labels):
            raise DatasetError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.class_count < 2:
            raise DatasetError(f"class_count must be >= 2, got {self.class_count}")
        for idx, label in enumerate(self.labels):
            if not 0 <= label < self.class_count:
                raise DatasetError(f"sample {idx} has label {label} outside [0, {self.class_count})")

    def __len__(self) -> int:
        return len(self.images)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.name == other.name
            and self.labels == other.labels
            and self.images == other.images
        )

    @property
    def label_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)

    def class_sizes(self) -> List[int]:
        return np.bincount(self.label_array, minlength=self.class_count).tolist()

    def missing_classes(self) -> List[int]:
        return [c for c, n in enumerate(self.class_sizes()) if n == 0]

    def require_complete(self) -> "LabeledDataset":
        """Raise :class:`DatasetError` unless every class has a sample."""
        missing = self.missing_classes()
        if missing:
            shown = ", ".join(str(c) for c in missing[:10])
            raise DatasetError(f"{self.name}: classes without samples: {shown}")
        return self

    def _select(self, indices: Sequence[int], **metadata: Any) -> "LabeledDataset":
        meta = dict(self.metadata)
        meta.update(metadata)
        return LabeledDataset(
            images=tuple(self.images[i] for i in indices),
            labels=tuple(self.labels[i] for i in indices),
            class_count=self.class_count,
            name=self.name,
            metadata=meta,
        )

    def subsample(self, max_per_class: int, seed: int = 0) -> "LabeledDataset":
        """Keep at most ``max_per_class`` samples per class.

        The kept samples are a seeded uniform choice; file order is preserved.
        """
        if max_per_class < 1:
            raise InputError(f"max_per_class must be >= 1, got {max_per_class}")
        rng = np.random.default_rng(seed)
        labels = self.label_array
        keep: List[int] = []
        for cls in range(self.class_count):
            members = np.flatnonzero(labels == cls)
            if members.size > max_per_class:
                members = rng.choice(members, size=max_per_class, replace=False)
            keep.extend(int(i) for i in members)
        keep.sort()
        if len(keep) == len(self):
            return self
        logger.info("%s: subsampled %d -> %d samples (cap %d/class)", self.name, len(self), len(keep), max_per_class)
        return self._select(keep, max_per_class=max_per_class, subsample_seed=seed)

    def permuted(self, seed: int) -> "LabeledDataset":
        """Return the same samples in a seeded random order."""
        order = np.random.default_rng(seed).permutation(len(self))
        return self._select([int(i) for i in order])


def _finalize(
    images: List[GrayImage],
    labels: List[int],
    class_count: int,
    name: str,
    metadata: Dict[str, Any],
    max_per_class: Optional[int],
    seed: int,
) -> LabeledDataset:
    dataset = LabeledDataset(tuple(images), tuple(labels), class_count, name, metadata)
    missing = dataset.missing_classes()
    if missing:
        logger.warning("%s: %d of %d classes have no samples", name, len(missing), class_count)
    if max_per_class is not None:
        dataset = dataset.subsample(max_per_class, seed)
    logger.info("loaded %s: %d samples, %d classes", name, len(dataset), class_count)
    return dataset


# ----------------------------------------------------------------------------
# IDX


def _read_idx(path: Path, magic: int, ndims: int) -> Tuple[Tuple[int, ...], bytes, int]:
    """Return (dimensions, raw bytes, payload offset) of an IDX file."""
    data = path.read_bytes()
    if len(data) < 4:
        raise IdxFormatError("truncated", len(data), f"{path}: file ends inside the magic number")
    (found,) = struct.unpack_from(">I", data, 0)
    if found != magic:
        raise IdxFormatError("magic", 0, f"{path}: magic number 0x{found:08x}, expected 0x{magic:08x}")
    header = 4 + 4 * ndims
    if len(data) < header:
        raise IdxFormatError("truncated", len(data), f"{path}: file ends inside the dimension header")
    dims = struct.unpack_from(f">{ndims}I", data, 4)
    expected = math.prod(dims)
    available = len(data) - header
    if available < expected:
        raise IdxFormatError(
            "truncated",
            len(data),
            f"{path}: payload has {available} bytes, dimensions {dims} need {expected}",
        )
    if available > expected:
        logger.warning("%s: ignoring %d trailing bytes", path, available - expected)
    return dims, data, header


def load_idx(
    images_path: str,
    labels_path: str,
    max_per_class: Optional[int] = None,
    seed: int = 0,
) -> LabeledDataset:
    """Decode an IDX image/label file pair.

    Parameters
    ----------
    images_path, labels_path : str
        Paths of the ``idx3-ubyte`` images and ``idx1-ubyte`` labels files.
    max_per_class : int, optional
        Ingestion cap; a seeded uniform subset is kept per class.
    seed : int
        Seed of the subsampling choice.

    Returns
    -------
    LabeledDataset
        Samples in file order, pixel bytes scaled by 1/255,
        ``class_count = 1 + max(label)``.

    Raises
    ------
    IdxFormatError
        On a wrong magic number, a truncated payload or a count mismatch;
        the message names the byte offset.
    """
    img_path, lbl_path = Path(images_path), Path(labels_path)
    for p in (img_path, lbl_path):
        if not p.is_file():
            raise InputError(f"no such file: {p}")
    (count, rows, cols), img_data, img_off = _read_idx(img_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,), lbl_data, lbl_off = _read_idx(lbl_path, IDX_LABELS_MAGIC, 1)
    if n_labels != count:
        raise IdxFormatError(
            "count-mismatch",
            4,
            f"images file {img_path} holds {count} items but labels file {lbl_path} holds {n_labels}",
        )
    if count == 0:
        raise DatasetError(f"{img_path}: no samples")

    pixels = np.frombuffer(img_data, dtype=np.uint8, count=count * rows * cols, offset=img_off)
    pixels = pixels.reshape(count, rows, cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lbl_data, dtype=np.uint8, count=count, offset=lbl_off).astype(np.int64)

    images = [GrayImage(pixels[i]) for i in range(count)]
    class_count = int(labels.max()) + 1
    metadata = {"source": "idx", "images": str(img_path), "labels": str(lbl_path), "native_size": [cols, rows]}
    return _finalize(images, labels.tolist(), class_count, img_path.name, metadata, max_per_class, seed)


def write_idx(dataset: LabeledDataset, images_path: str, labels_path: str) -> None:
    """Write ``dataset`` as an IDX pair; luminance is quantized to bytes."""
    shapes = {img.pixels.shape for img in dataset.images}
    if len(shapes) != 1:
        raise DatasetError("IDX needs every image to have the same size")
    if dataset.class_count > 256:
        raise DatasetError("IDX labels are single bytes; class_count must be <= 256")
    ((rows, cols),) = shapes
    stack = np.stack([img.pixels for img in dataset.images])
    payload = np.rint(stack * 255.0).astype(np.uint8).tobytes()
    write_bytes(images_path, struct.pack(">IIII", IDX_IMAGES_MAGIC, len(dataset), rows, cols) + payload)
    labels = np.asarray(dataset.labels, dtype=np.uint8).tobytes()
    write_bytes(labels_path, struct.pack(">II", IDX_LABELS_MAGIC, len(dataset)) + labels)


# ----------------------------------------------------------------------------
# CIFAR binary


def _luminance(red: np.ndarray, green: np.ndarray, blue: np.ndarray) -> np.ndarray:
    wr, wg, wb = LUMA_WEIGHTS
    lum = wr * red + wg * green + wb * blue
    return np.clip(lum, 0.0, 1.0)


def _decode_cifar_file(path: Path, class_count: int) -> Tuple[np.ndarray, np.ndarray]:
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    data = path.read_bytes()
    if not data or len(data) % CIFAR_RECORD:
        raise CifarFormatError(
            f"{path}: length {len(data)} is not a positive multiple of the {CIFAR_RECORD}-byte record"
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= class_count)
    if bad.size:
        first = int(bad[0])
        raise CifarFormatError(f"{path}: record {first} has label {labels[first]} >= class_count {class_count}")
    planes = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE).astype(np.float64) / 255.0
    lum = _luminance(planes[:, 0], planes[:, 1], planes[:, 2])
    logger.debug("%s: %d records", path, len(labels))
    return lum, labels


def load_cifar_binary(
    paths: Sequence[str],
    class_count: int = 10,
    max_per_class: Optional[int] = None,
    seed: int = 0,
    workers: Optional[int] = None,
) -> LabeledDataset:
    """Decode one or more CIFAR binary batches.

    Files are decoded concurrently; records keep path order, then file order.
    """
    if not paths:
        raise InputError("no CIFAR batch files given")
    files = [Path(p) for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        decoded = list(pool.map(lambda p: _decode_cifar_file(p, class_count), files))
    images = [GrayImage(plane) for lum, _ in decoded for plane in lum]
    labels = [int(v) for _, lbl in decoded for v in lbl]
    name = files[0].name if len(files) == 1 else files[0].parent.name or "cifar"
    metadata = {"source": "cifar", "files": [str(p) for p in files], "native_size": [CIFAR_SIDE, CIFAR_SIDE]}
    return _finalize(images, labels, class_count, name, metadata, max_per_class, seed)


# ----------------------------------------------------------------------------
# Image directories


def decode_image_file(path: Path) -> GrayImage:
    """Decode a PNG/PGM/PPM file to luminance."""
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("1", "LA"):
                img = img.convert("L")
            elif img.mode in ("P", "RGBA"):
                img = img.convert("RGB")
            if img.mode == "L":
                return GrayImage(np.asarray(img, dtype=np.float64) / 255.0)
            if img.mode == "RGB":
                rgb = np.asarray(img, dtype=np.float64) / 255.0
                return GrayImage(_luminance(rgb[..., 0], rgb[..., 1], rgb[..., 2]))
            raise ImageDecodeError(str(path), f"unsupported mode {img.mode!r} (need 8-bit gray or RGB)")
    except (OSError, UnidentifiedImageError, ValueError, DatasetError) as exc:
        if isinstance(exc, ImageDecodeError):
            raise
        raise ImageDecodeError(str(path), str(exc)) from exc


def load_image_dir(
    root: str,
    max_per_class: Optional[int] = None,
    seed: int = 0,
) -> LabeledDataset:
    """Load ``root/<class>/<image>`` trees.

    Class ids follow the lexicographic order of the sub-directory names.  Files
    with other extensions are skipped with a warning; an undecodable image
    aborts ingestion with an :class:`ImageDecodeError` naming its path.
    """
    root_path = Path(root)
    if not root_path.is_dir():
        raise InputError(f"no such directory: {root_path}")
    class_dirs = sorted((p for p in root_path.iterdir() if p.is_dir() and not p.name.startswith(".")), key=lambda p: p.name)
    if len(class_dirs) < 2:
        raise DatasetError(f"{root_path}: fewer than 2 classes")

    images: List[GrayImage] = []
    labels: List[int] = []
    for class_id, class_dir in enumerate(class_dirs):
        found = 0
        for file in sorted((f for f in class_dir.iterdir() if f.is_file()), key=lambda p: p.name):
            if file.suffix.lower() not in IMAGE_SUFFIXES:
                logger.warning("ignoring %s: not a PNG/PGM/PPM file", file)
                continue
            images.append(decode_image_file(file))
            labels.append(class_id)
            found += 1
        if not found:
            raise DatasetError(f"class directory {class_dir} contains no images")
    metadata = {"source": "dir", "root": str(root_path), "class_names": [d.name for d in class_dirs]}
    return _finalize(images, labels, len(class_dirs), root_path.name, metadata, max_per_class, seed)


# ----------------------------------------------------------------------------
# Synthetic tasks


def blob_template(class_id: int, class_count: int, image_side: int, separation: float) -> np.ndarray:
    """Gaussian blob displaced from the image centre in a class-specific direction."""
    centre = (image_side - 1) / 2.0
    radius = min(separation * image_side / 4.0, 0.45 * image_side)
    angle = 2.0 * math.pi * class_id / class_count
    cx = centre + radius * math.cos(angle)
    cy = centre + radius * math.sin(angle)
    width = image_side / 8.0
    yy, xx = np.mgrid[0:image_side, 0:image_side].astype(np.float64)
    return np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * width * width))


def synth_blob_task(
    class_count: int,
    samples_per_class: int,
    image_side: int = 32,
    separation: float = 1.0,
    noise_sigma: float = 0.1,
    seed: int = 0,
) -> LabeledDataset:
    """Generate a seeded Gaussian-blob classification task.

    Each class has a deterministic template; every sample is its template
    plus i.i.d. Gaussian pixel noise of standard deviation ``noise_sigma``,
    clamped to ``[0, 1]``.  Samples are ordered class by class.
    """
    if class_count < 2:
        raise InputError(f"class_count must be >= 2, got {class_count}")
    if samples_per_class < 1:
        raise InputError(f"samples_per_class must be >= 1, got {samples_per_class}")
    if image_side < 8:
        raise InputError(f"image_side must be >= 8, got {image_side}")
    if separation < 0 or noise_sigma < 0:
        raise InputError("separation and noise_sigma must be >= 0")

    rng = np.random.default_rng(seed)
    images: List[GrayImage] = []
    labels: List[int] = []
    for cls in range(class_count):
        template = blob_template(cls, class_count, image_side, separation)
        if noise_sigma > 0:
            noise = rng.normal(0.0, noise_sigma, size=(samples_per_class, image_side, image_side))
            samples = np.clip(template + noise, 0.0, 1.0)
        else:
            samples = np.repeat(template[None], samples_per_class, axis=0)
        images.extend(GrayImage(s) for s in samples)
        labels.extend([cls] * samples_per_class)
    metadata = {
        "source": "synth",
        "separation": separation,
        "noise_sigma": noise_sigma,
        "seed": seed,
        "native_size": [image_side, image_side],
    }
    name = f"synth-blob-n{class_count}-k{samples_per_class}-s{noise_sigma:g}"
    return LabeledDataset(tuple(images), tuple(labels), class_count, name, metadata)
