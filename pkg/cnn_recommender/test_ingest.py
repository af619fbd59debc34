import struct

import numpy as np
import pytest
from PIL import Image

from cnn_recommender.complexity import dataset_complexity
from cnn_recommender.errors import CifarFormatError, DatasetError, IdxFormatError, ImageDecodeError, InputError
from cnn_recommender.ingest import (
    CIFAR_RECORD,
    GrayImage,
    LabeledDataset,
    load_cifar_binary,
    load_idx,
    load_image_dir,
    synth_blob_task,
    write_idx,
)


def _idx_pair(tmp_path, pixels, labels, image_magic=0x803, label_count=None):
    count, rows, cols = pixels.shape
    images = tmp_path / "images.idx"
    images.write_bytes(struct.pack(">IIII", image_magic, count, rows, cols) + pixels.astype(np.uint8).tobytes())
    lbl = tmp_path / "labels.idx"
    n = len(labels) if label_count is None else label_count
    lbl.write_bytes(struct.pack(">II", 0x801, n) + bytes(labels))
    return str(images), str(lbl)


def test_load_idx_mnist_layout(tmp_path):
    pixels = np.zeros((3, 28, 28), dtype=np.uint8)
    pixels[0, 0, 0] = 255
    pixels[2, 27, 27] = 51
    images, labels = _idx_pair(tmp_path, pixels, [5, 0, 4])
    ds = load_idx(images, labels)
    assert len(ds) == 3
    assert ds.labels == (5, 0, 4)
    assert ds.class_count == 6
    assert ds.images[0].width == 28 and ds.images[0].height == 28
    assert ds.images[0].pixels[0, 0] == 1.0
    assert ds.images[2].pixels[27, 27] == pytest.approx(0.2)
    # classes 1-3 are empty; loading works, scoring would not
    with pytest.raises(DatasetError):
        ds.require_complete()


def test_load_idx_bad_magic(tmp_path):
    images, labels = _idx_pair(tmp_path, np.zeros((2, 4, 4)), [0, 1], image_magic=0x804)
    with pytest.raises(IdxFormatError) as info:
        load_idx(images, labels)
    assert info.value.kind == "magic"
    assert info.value.offset == 0
    assert "byte offset 0" in str(info.value)


def test_load_idx_truncated_payload(tmp_path):
    images, labels = _idx_pair(tmp_path, np.zeros((2, 4, 4)), [0, 1])
    with open(images, "rb") as fh:
        data = fh.read()
    with open(images, "wb") as fh:
        fh.write(data[:-5])
    with pytest.raises(IdxFormatError) as info:
        load_idx(images, labels)
    assert info.value.kind == "truncated"
    assert info.value.offset == len(data) - 5


def test_load_idx_huge_dimensions_are_truncated(tmp_path):
    # the dimension product exceeds 64 bits
    images = tmp_path / "images.idx"
    images.write_bytes(struct.pack(">IIII", 0x803, 65536, 2**24, 2**24))
    labels = tmp_path / "labels.idx"
    labels.write_bytes(struct.pack(">II", 0x801, 0))
    with pytest.raises(IdxFormatError) as info:
        load_idx(str(images), str(labels))
    assert info.value.kind == "truncated"
    assert info.value.offset == 16


def test_load_idx_count_mismatch(tmp_path):
    images, labels = _idx_pair(tmp_path, np.zeros((3, 4, 4)), [0, 1])
    with pytest.raises(IdxFormatError) as info:
        load_idx(images, labels)
    assert info.value.kind == "count-mismatch"


def test_load_idx_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.idx"
    with pytest.raises(InputError, match="nope.idx"):
        load_idx(str(missing), str(missing))


def test_idx_writer_is_the_loader_inverse(tmp_path):
    ds = synth_blob_task(3, 4, image_side=12, noise_sigma=0.0, seed=1)
    quantized = LabeledDataset(
        tuple(GrayImage(np.rint(img.pixels * 255.0) / 255.0) for img in ds.images), ds.labels, ds.class_count
    )
    images, labels = str(tmp_path / "i.idx"), str(tmp_path / "l.idx")
    write_idx(ds, images, labels)
    back = load_idx(images, labels)
    assert back.labels == ds.labels
    assert back.images == quantized.images


def test_cifar_single_record(tmp_path):
    record = bytearray(CIFAR_RECORD)
    record[0] = 7
    record[1:1025] = b"\xff" * 1024  # red plane only
    path = tmp_path / "batch.bin"
    path.write_bytes(bytes(record))
    ds = load_cifar_binary([str(path)])
    assert len(ds) == 1
    assert ds.labels == (7,)
    assert ds.class_count == 10
    assert ds.images[0].width == 32 and ds.images[0].height == 32
    assert np.allclose(ds.images[0].pixels, 0.299)


def test_cifar_bad_length(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(b"\x00" * (CIFAR_RECORD + 1))
    with pytest.raises(CifarFormatError):
        load_cifar_binary([str(path)])


def test_cifar_files_keep_path_order(tmp_path):
    paths = []
    for i, label in enumerate([3, 1, 2]):
        record = bytearray(CIFAR_RECORD)
        record[0] = label
        p = tmp_path / f"b{i}.bin"
        p.write_bytes(bytes(record) * 2)
        paths.append(str(p))
    ds = load_cifar_binary(paths, workers=3)
    assert ds.labels == (3, 3, 1, 1, 2, 2)


def test_image_dir(tmp_path):
    for name, value in (("cat", 40), ("ant", 200)):
        d = tmp_path / name
        d.mkdir()
        Image.fromarray(np.full((10, 12), value, dtype=np.uint8)).save(d / "a.png")
        Image.fromarray(np.full((10, 12, 3), value, dtype=np.uint8)).save(d / "b.ppm")
        (d / "notes.txt").write_text("not an image")
    ds = load_image_dir(str(tmp_path))
    assert ds.metadata["class_names"] == ["ant", "cat"]
    assert ds.labels == (0, 0, 1, 1)
    assert ds.images[0].pixels[0, 0] == pytest.approx(200 / 255)
    assert ds.images[3].pixels[0, 0] == pytest.approx(40 / 255)


def test_image_dir_undecodable_file(tmp_path):
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        Image.fromarray(np.zeros((8, 8), dtype=np.uint8)).save(tmp_path / name / "ok.png")
    (tmp_path / "b" / "broken.png").write_bytes(b"not really a png")
    with pytest.raises(ImageDecodeError, match="broken.png"):
        load_image_dir(str(tmp_path))


def test_image_dir_needs_two_classes(tmp_path):
    (tmp_path / "only").mkdir()
    Image.fromarray(np.zeros((8, 8), dtype=np.uint8)).save(tmp_path / "only" / "x.png")
    with pytest.raises(DatasetError):
        load_image_dir(str(tmp_path))


def test_subsample_caps_each_class():
    ds = synth_blob_task(3, 10, image_side=8, seed=0)
    small = ds.subsample(4, seed=2)
    assert small.class_sizes() == [4, 4, 4]
    assert small == ds.subsample(4, seed=2)
    assert ds.subsample(20) is ds


def test_synth_is_seeded():
    a = synth_blob_task(4, 5, seed=9)
    b = synth_blob_task(4, 5, seed=9)
    c = synth_blob_task(4, 5, seed=10)
    assert a == b
    assert a != c
    assert a.class_sizes() == [5, 5, 5, 5]


def test_dataset_rejects_out_of_range_label():
    img = GrayImage(np.zeros((4, 4)))
    with pytest.raises(DatasetError):
        LabeledDataset((img,), (2,), 2)


def test_gray_image_rejects_out_of_range_pixels():
    with pytest.raises(DatasetError):
        GrayImage(np.full((4, 4), 1.5))


def test_noise_free_blobs_are_separable():
    report = dataset_complexity(synth_blob_task(4, 6, image_side=16, separation=1.0, noise_sigma=0.0, seed=3))
    assert all(s.centroid_correct for s in report.per_sample)
    assert report.centroid_accuracy == 1.0
