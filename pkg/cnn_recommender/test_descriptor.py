import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnn_recommender.descriptor import (
    DESCRIPTOR_SIZE,
    IntegralImage,
    extract_features,
    extract_global_descriptor,
    haar_cell_sums,
    sample_grid,
    wavelet_side,
    write_descriptor_csv,
)
from cnn_recommender.errors import DescriptorError
from cnn_recommender.ingest import GrayImage, synth_blob_task

images = st.builds(
    lambda w, h, seed: np.random.default_rng(seed).random((h, w)),
    st.integers(16, 64),
    st.integers(16, 64),
    st.integers(0, 2**32 - 1),
)


def _direct_haar(pixels):
    """Wavelet responses summed with plain slices of the padded image."""
    height, width = pixels.shape
    bx, by, half = sample_grid(width, height)
    pad = 2 * half
    p = np.pad(pixels, pad, mode="edge")
    out = np.zeros((4, 4, 4))
    for cy in range(4):
        for cx in range(4):
            for j in range(5):
                for i in range(5):
                    x = bx[cx, i] + pad
                    y = by[cy, j] + pad
                    dx = p[y - half:y + half, x:x + half].sum() - p[y - half:y + half, x - half:x].sum()
                    dy = p[y:y + half, x - half:x + half].sum() - p[y - half:y, x - half:x + half].sum()
                    out[cy, cx] += [dx, dy, abs(dx), abs(dy)]
    raw = out.reshape(DESCRIPTOR_SIZE)
    return raw / np.linalg.norm(raw)


@settings(max_examples=50, deadline=None)
@given(images)
def test_descriptor_matches_direct_oracle(pixels):
    got = extract_global_descriptor(GrayImage(pixels)).values
    assert np.allclose(got, _direct_haar(pixels), rtol=0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(images, st.floats(0.0, 0.5))
def test_brightness_shift_invariance(pixels, shift):
    dimmed = pixels * 0.5
    a = extract_global_descriptor(GrayImage(dimmed)).values
    b = extract_global_descriptor(GrayImage(dimmed + shift)).values
    assert np.allclose(a, b, rtol=0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(images, st.floats(0.1, 1.0))
def test_contrast_scale_invariance(pixels, scale):
    a = extract_global_descriptor(GrayImage(pixels)).values
    b = extract_global_descriptor(GrayImage(pixels * scale)).values
    assert np.allclose(a, b, rtol=0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(images)
def test_horizontal_flip_negates_dx(pixels):
    a = extract_global_descriptor(GrayImage(pixels)).values.reshape(4, 4, 4)
    b = extract_global_descriptor(GrayImage(pixels[:, ::-1])).values.reshape(4, 4, 4)
    mirrored = a[:, ::-1, :].copy()
    mirrored[..., 0] *= -1
    assert np.allclose(b, mirrored, rtol=0, atol=1e-9)


def test_constant_image_gives_zero_vector():
    fv = extract_global_descriptor(GrayImage(np.full((20, 20), 0.7)))
    assert fv.is_zero
    assert fv.values.shape == (DESCRIPTOR_SIZE,)


def test_textured_image_is_unit_norm():
    pixels = np.random.default_rng(3).random((28, 28))
    fv = extract_global_descriptor(GrayImage(pixels))
    assert np.linalg.norm(fv.values) == pytest.approx(1.0, abs=1e-12)


def test_vertical_step_edge():
    pixels = np.zeros((32, 32))
    pixels[:, 16:] = 1.0
    sums = haar_cell_sums(GrayImage(pixels))
    assert np.all(sums[..., 1] == 0)
    assert np.all(sums[..., 0] >= 0)
    assert np.all(sums[:, 1:3, 0] > 0)
    assert np.all(sums[:, [0, 3], 0] == 0)


def test_too_small_image():
    with pytest.raises(DescriptorError):
        extract_global_descriptor(GrayImage(np.zeros((7, 7))))


def test_sample_grid_is_centred_on_the_short_side():
    bx, by, half = sample_grid(40, 20)
    assert half == wavelet_side(5) // 2 == 3
    assert bx.min() >= 10 and bx.max() <= 30
    assert by.min() >= 0 and by.max() <= 20


def test_wavelet_side_is_even():
    assert wavelet_side(0.5) == 2
    assert wavelet_side(4) == 4
    assert wavelet_side(5) == 6
    assert wavelet_side(7) == 8


def test_box_sum():
    pixels = np.arange(12, dtype=float).reshape(3, 4)
    ii = IntegralImage.from_array(pixels)
    assert ii.box_sum(1, 0, 3, 2) == pixels[0:2, 1:3].sum()
    assert ii.box_sum(0, 0, 4, 3) == pixels.sum()


def test_parallel_extraction_matches_serial(tmp_path):
    ds = synth_blob_task(3, 6, image_side=16, seed=4)
    serial = extract_features(ds, workers=1)
    parallel = extract_features(ds, workers=4)
    assert serial.shape == (18, DESCRIPTOR_SIZE)
    assert np.array_equal(serial, parallel)

    path = tmp_path / "d.csv"
    write_descriptor_csv(str(path), serial, ds.labels)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("sample_id,class_id,d0,")
    assert len(lines) == 19
