import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfca.tensor_io import (BadMagicError, DatasetIndexError, Tensor,
                            TruncatedError, UnsupportedDtypeError, load_dataset,
                            load_image, read_tensor, resize_image, write_tensor)


def test_write_tensor_known_bytes_float32(tmp_path):
    p = tmp_path / "t.qtf"
    write_tensor(Tensor.from_array(np.array([1.0, 2.0], dtype=np.float32)), p)
    raw = p.read_bytes()
    expected = bytes.fromhex(
        "51544631" "01" "01" "0200000000000000" "0000803f" "00000040")
    assert raw == expected
    assert len(raw) == 6 + 8 * 1 + 4 * 2


def test_write_tensor_known_bytes_uint8(tmp_path):
    p = tmp_path / "t.qtf"
    write_tensor(Tensor.from_array(np.array([0], dtype=np.uint8)), p)
    raw = p.read_bytes()
    assert len(raw) == 15
    assert raw[-1] == 0
    assert raw[:4] == b"QTF1"


def test_round_trip_exact(tmp_path):
    a = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    p = tmp_path / "t.qtf"
    write_tensor(Tensor.from_array(a), p)
    back = read_tensor(p)
    assert back.shape == (2, 3, 4)
    np.testing.assert_array_equal(back.to_array(), a)


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.qtf"
    p.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(BadMagicError):
        read_tensor(p)


def test_truncated_payload(tmp_path):
    p = tmp_path / "t.qtf"
    write_tensor(Tensor.from_array(np.zeros(100, dtype=np.float32)), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:14 + 50 * 4])  # 50 of 100 declared elements
    with pytest.raises(TruncatedError):
        read_tensor(p)


def test_unsupported_dtype_code(tmp_path):
    p = tmp_path / "t.qtf"
    write_tensor(Tensor.from_array(np.array([0], dtype=np.uint8)), p)
    raw = bytearray(p.read_bytes())
    raw[4] = 7
    p.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedDtypeError):
        read_tensor(p)


def test_rejects_float64_tensor():
    with pytest.raises(UnsupportedDtypeError):
        Tensor.from_array(np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(
    shape=st.lists(st.integers(1, 5), min_size=1, max_size=4),
    use_u8=st.booleans(),
    seed=st.integers(0, 2**31),
)
def test_round_trip_property(tmp_path_factory, shape, use_u8, seed):
    rng = np.random.default_rng(seed)
    if use_u8:
        a = rng.integers(0, 256, size=shape).astype(np.uint8)
    else:
        a = rng.standard_normal(shape).astype(np.float32)
    p = tmp_path_factory.mktemp("rt") / "t.qtf"
    write_tensor(Tensor.from_array(a), p)
    back = read_tensor(p)
    np.testing.assert_array_equal(back.to_array(), a)
    # exact file size: header + dims + payload
    assert os.path.getsize(p) == 6 + 8 * a.ndim + a.dtype.itemsize * a.size


def _save_ppm(path, arr):
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(arr.astype(np.uint8).tobytes())


def test_load_image_red_ppm(tmp_path):
    arr = np.zeros((2, 2, 3), dtype=np.uint8)
    arr[..., 0] = 255
    p = tmp_path / "red.ppm"
    _save_ppm(p, arr)
    t = load_image(p).to_array()
    assert t.shape == (3, 2, 2)
    np.testing.assert_allclose(t[0], 1.0)
    np.testing.assert_allclose(t[1:], 0.0)


def test_load_image_grayscale_replication(tmp_path):
    from PIL import Image
    p = tmp_path / "g.png"
    Image.fromarray(np.full((3, 3), 128, dtype=np.uint8), mode="L").save(p)
    t = load_image(p).to_array()
    assert t.shape == (3, 3, 3)
    np.testing.assert_allclose(t, 128 / 255)


def test_bilinear_downsample_block_mean():
    rng = np.random.default_rng(0)
    img = rng.random((3, 4, 4)).astype(np.float32)
    out = resize_image(img, 2, 2, "bilinear")
    # aligned half-integer sample points average each 2x2 source block
    expected = img.reshape(3, 2, 2, 2, 2).mean(axis=(2, 4))
    np.testing.assert_allclose(out, expected, atol=1e-6)


def test_decode_error(tmp_path):
    p = tmp_path / "junk.png"
    p.write_bytes(b"not an image")
    from qfca.tensor_io import DecodeError
    with pytest.raises(DecodeError):
        load_image(p)


def _make_tree(root, with_mask=True):
    from PIL import Image
    good = root / "cls" / "test" / "good"
    bad = root / "cls" / "test" / "crack"
    gt = root / "cls" / "ground_truth" / "crack"
    for d in (good, bad, gt):
        d.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray(np.zeros((4, 4), dtype=np.uint8))
    img.save(good / "000.png")
    img.save(good / "001.png")
    img.save(bad / "000.png")
    if with_mask:
        Image.fromarray(np.full((4, 4), 255, np.uint8)).save(
            gt / "000_mask.png")


def test_load_dataset(tmp_path):
    _make_tree(tmp_path)
    idx = load_dataset(tmp_path, "cls")
    assert len(idx.samples) == 3
    assert sum(s.is_anomalous for s in idx.samples) == 1
    assert [s.mask_path is not None for s in idx.samples] == [True, False, False]


def test_load_dataset_missing_mask(tmp_path):
    _make_tree(tmp_path, with_mask=False)
    with pytest.raises(DatasetIndexError, match="000"):
        load_dataset(tmp_path, "cls")


def test_load_dataset_deterministic_order(tmp_path):
    _make_tree(tmp_path)
    a = load_dataset(tmp_path, "cls")
    b = load_dataset(tmp_path, "cls")
    assert a == b
