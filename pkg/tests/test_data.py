import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest

from epvae.data import (BadMagicError, Dataset, DimensionMismatchError, TruncatedFileError,
                        batches, image_grid, load_idx, load_mnist, normalize, read_pgm, to_bytes,
                        write_idx, write_image_grid)

from conftest import MNIST_IMAGES, MNIST_LABELS


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, (5, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, 5, dtype=np.uint8)
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx(imgs, labels, ip, lp)
    return imgs, labels, ip, lp


def test_round_trip(idx_pair):
    imgs, labels, ip, lp = idx_pair
    raw = load_idx(ip, lp)
    np.testing.assert_array_equal(raw.images, imgs)
    np.testing.assert_array_equal(raw.labels, labels)
    assert ip.read_bytes()[:4] == b"\x00\x00\x08\x03"
    assert lp.read_bytes()[:4] == b"\x00\x00\x08\x01"


def test_label_file_fed_as_images(idx_pair):
    _, _, ip, lp = idx_pair
    with pytest.raises(BadMagicError) as err:
        load_idx(lp, lp)
    assert err.value.offset == 0


def test_truncated_by_one_byte(idx_pair, tmp_path):
    _, _, ip, lp = idx_pair
    buf = ip.read_bytes()
    short = tmp_path / "short.idx"
    short.write_bytes(buf[:-1])
    with pytest.raises(TruncatedFileError) as err:
        load_idx(short, lp)
    assert err.value.offset == len(buf) - 1


def test_truncated_header(tmp_path, idx_pair):
    _, _, ip, lp = idx_pair
    short = tmp_path / "short.idx"
    short.write_bytes(ip.read_bytes()[:10])
    with pytest.raises(TruncatedFileError) as err:
        load_idx(short, lp)
    assert err.value.offset == 10


def test_wrong_image_size(tmp_path, idx_pair):
    _, _, _, lp = idx_pair
    bad = tmp_path / "bad.idx"
    bad.write_bytes(struct.pack(">IIII", 0x803, 5, 27, 28) + bytes(5 * 27 * 28))
    with pytest.raises(DimensionMismatchError):
        load_idx(bad, lp)


def test_count_mismatch(tmp_path):
    ip, lp = tmp_path / "i", tmp_path / "l"
    write_idx(np.zeros((3, 28, 28)), np.zeros(3), ip, lp)
    write_idx(np.zeros((4, 28, 28)), np.zeros(4), tmp_path / "i4", tmp_path / "l4")
    with pytest.raises(DimensionMismatchError):
        load_idx(ip, tmp_path / "l4")


def test_gzip_files_are_read(tmp_path, idx_pair):
    imgs, labels, ip, lp = idx_pair
    gz = tmp_path / "img.idx.gz"
    gz.write_bytes(gzip.compress(ip.read_bytes()))
    np.testing.assert_array_equal(load_idx(gz, lp).images, imgs)


def test_bundled_subset():
    data = load_mnist(MNIST_IMAGES, MNIST_LABELS)
    assert data.images.shape == (5000, 784)
    assert data.images.min() == -1.0 and data.images.max() == 1.0
    assert np.bincount(data.labels).tolist() == [500] * 10


@pytest.mark.skipif("EPHV_MNIST_DIR" not in os.environ,
                    reason="set EPHV_MNIST_DIR to the official MNIST files")
def test_official_training_files():
    d = Path(os.environ["EPHV_MNIST_DIR"])
    raw = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    assert raw.images.shape == (60000, 28, 28)


def test_normalize_endpoints_and_spot_values():
    assert normalize(0) == -1.0
    assert normalize(255) == 1.0
    for b, expected in ((64, 64 / 127.5 - 1), (128, 128 / 127.5 - 1), (192, 192 / 127.5 - 1)):
        assert normalize(b) == pytest.approx(expected, abs=1e-15)
    v = normalize(np.arange(256))
    assert np.all(np.diff(v) > 0)


def test_normalize_then_export_round_trip():
    b = np.arange(256)
    back = to_bytes(normalize(b)).astype(int)
    assert np.max(np.abs(back - b)) <= 1


def test_batches():
    one = batches(10, 10, 0, 0)
    assert len(one) == 1 and sorted(one[0]) == list(range(10))
    a, b = batches(23, 5, 4, 2), batches(23, 5, 4, 2)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert sorted(np.concatenate(a)) == list(range(23))
    assert [len(x) for x in a] == [5, 5, 5, 5, 3]
    for seed in range(10):
        e0 = np.concatenate(batches(50, 7, seed, 0))
        e1 = np.concatenate(batches(50, 7, seed, 1))
        assert not np.array_equal(e0, e1)
    with pytest.raises(ValueError):
        batches(5, 0, 0, 0)


def test_grid_extremes_and_shape(tmp_path):
    assert not np.any(image_grid(-np.ones((1, 784)), 1))
    assert np.all(image_grid(np.ones((1, 784)), 1) == 255)
    raster = write_image_grid(np.zeros((10, 784)), 5, tmp_path / "g.pgm")
    assert raster.shape == (56, 140)  # height, width
    assert (tmp_path / "g.pgm").read_bytes().startswith(b"P5\n140 56\n255\n")


def test_pgm_read_back_is_exact(tmp_path):
    imgs = np.random.default_rng(3).uniform(-1, 1, (7, 784))
    raster = write_image_grid(imgs, 3, tmp_path / "g.pgm")
    np.testing.assert_array_equal(read_pgm(tmp_path / "g.pgm"), raster)


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        image_grid(np.zeros((0, 784)), 3)


def test_dataset_length_check():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 784)), np.zeros(2, dtype=np.uint8))
