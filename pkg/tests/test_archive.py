"""Archive format: NPY bytes, manifest validation, flatten/unflatten."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tensors_equal, toy_manifest
from sketchprune.architectures import random_archive
from sketchprune.archive import (
    LayerSpec,
    ModelManifest,
    TensorArchive,
    flatten_filters,
    load_archive,
    save_archive,
    unflatten_filters,
)
from sketchprune.errors import (
    MalformedNpyError,
    MissingFileError,
    NonFiniteError,
    ShapeMismatchError,
    TopologyError,
    ValidationError,
)
from sketchprune.npyio import read_npy, write_npy


# ---------------------------------------------------------------- npy bytes


def test_npy_roundtrip(tmp_path):
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    write_npy(tmp_path / "a.npy", arr)
    back = read_npy(tmp_path / "a.npy")
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)


def test_npy_readable_by_numpy_and_vice_versa(tmp_path):
    arr = np.linspace(-1, 1, 30, dtype=np.float32).reshape(5, 6)
    write_npy(tmp_path / "ours.npy", arr)
    assert np.array_equal(np.load(tmp_path / "ours.npy"), arr)
    np.save(tmp_path / "theirs.npy", arr)
    assert np.array_equal(read_npy(tmp_path / "theirs.npy"), arr)


def test_npy_write_is_byte_deterministic(tmp_path):
    arr = np.random.default_rng(3).standard_normal((7, 5)).astype(np.float32)
    write_npy(tmp_path / "a.npy", arr)
    write_npy(tmp_path / "b.npy", arr)
    assert (tmp_path / "a.npy").read_bytes() == (tmp_path / "b.npy").read_bytes()


def test_npy_header_is_64_byte_aligned(tmp_path):
    write_npy(tmp_path / "a.npy", np.zeros((3,), dtype=np.float32))
    raw = (tmp_path / "a.npy").read_bytes()
    assert raw[:6] == b"\x93NUMPY"
    assert raw[6:8] == b"\x01\x00"
    hlen = int.from_bytes(raw[8:10], "little")
    assert (10 + hlen) % 64 == 0
    assert raw[10 + hlen - 1:10 + hlen] == b"\n"


def test_npy_refuses_nan(tmp_path):
    with pytest.raises(NonFiniteError):
        write_npy(tmp_path / "a.npy", np.array([1.0, np.nan], dtype=np.float32))


def test_npy_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        read_npy(tmp_path / "nope.npy")


@pytest.mark.parametrize(
    "mangle",
    [
        lambda raw: b"JUNK" + raw[4:],                      # bad magic
        lambda raw: raw[:6] + b"\x02\x00" + raw[8:],        # unsupported version
        lambda raw: raw[:40],                                # truncated header
        lambda raw: raw[:-4],                                # short payload
        lambda raw: raw + b"\x00\x00\x00\x00",               # long payload
    ],
)
def test_npy_malformed_variants(tmp_path, mangle):
    path = tmp_path / "a.npy"
    write_npy(path, np.ones((4, 4), dtype=np.float32))
    path.write_bytes(mangle(path.read_bytes()))
    with pytest.raises(MalformedNpyError):
        read_npy(path)


def test_npy_rejects_wrong_dtype(tmp_path):
    path = tmp_path / "a.npy"
    np.save(path, np.ones(3, dtype=np.float64))
    with pytest.raises(MalformedNpyError):
        read_npy(path)


@settings(max_examples=50, deadline=None)
@given(
    shape=st.lists(st.integers(1, 6), min_size=1, max_size=4),
    seed=st.integers(0, 2**31 - 1),
)
def test_npy_roundtrip_property(tmp_path_factory, shape, seed):
    tmp = tmp_path_factory.mktemp("npy")
    arr = np.random.default_rng(seed).standard_normal(shape).astype(np.float32)
    write_npy(tmp / "x.npy", arr)
    assert np.array_equal(read_npy(tmp / "x.npy"), arr)


# ------------------------------------------------------------- archive I/O


def test_archive_roundtrip_bit_identical(tmp_path, toy_archive):
    save_archive(toy_archive, tmp_path / "m")
    back = load_archive(tmp_path / "m")
    assert back.manifest == toy_archive.manifest
    assert tensors_equal(back, toy_archive)


def test_archive_save_is_byte_deterministic(tmp_path, toy_archive):
    save_archive(toy_archive, tmp_path / "a")
    save_archive(toy_archive, tmp_path / "b")
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_archive_refuses_nan(tmp_path, toy_archive):
    toy_archive.tensors["conv1"]["weight"][0, 0, 0, 0] = np.nan
    with pytest.raises(NonFiniteError):
        save_archive(toy_archive, tmp_path / "m")


def test_archive_shape_mismatch(tmp_path, toy_archive):
    save_archive(toy_archive, tmp_path / "m")
    # overwrite one tensor with a short payload
    short = toy_archive.tensors["conv1"]["weight"].reshape(-1)[:-1]
    write_npy(tmp_path / "m" / "conv1.weight.npy", short)
    with pytest.raises(ShapeMismatchError):
        load_archive(tmp_path / "m")


def test_archive_missing_manifest(tmp_path):
    with pytest.raises(MissingFileError):
        load_archive(tmp_path)


def test_archive_missing_tensor_file(tmp_path, toy_archive):
    save_archive(toy_archive, tmp_path / "m")
    (tmp_path / "m" / "conv2.weight.npy").unlink()
    with pytest.raises(MissingFileError):
        load_archive(tmp_path / "m")


def test_archive_rejects_unknown_schema(tmp_path, toy_archive):
    save_archive(toy_archive, tmp_path / "m")
    doc = json.loads((tmp_path / "m" / "manifest.json").read_text())
    doc["schema"] = "sketchprune-manifest-v999"
    (tmp_path / "m" / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_archive(tmp_path / "m")


# ------------------------------------------------------ manifest invariants


def test_manifest_rejects_cycle():
    layers = (
        LayerSpec(name="a", kind="conv", out_channels=4, in_channels=4, kernel_h=1, kernel_w=1),
        LayerSpec(name="b", kind="conv", out_channels=4, in_channels=4, kernel_h=1, kernel_w=1),
    )
    with pytest.raises(TopologyError):
        ModelManifest(layers=layers, edges=(("a", "b"), ("b", "a")),
                      input_spatial=(8, 8), num_classes=2)


def test_manifest_rejects_width_mismatch():
    layers = (
        LayerSpec(name="a", kind="conv", out_channels=4, in_channels=3, kernel_h=1, kernel_w=1),
        LayerSpec(name="b", kind="conv", out_channels=4, in_channels=5, kernel_h=1, kernel_w=1),
    )
    with pytest.raises(TopologyError):
        ModelManifest(layers=layers, edges=(("a", "b"),), input_spatial=(8, 8), num_classes=2)


def test_manifest_concat_sums_producer_widths():
    layers = (
        LayerSpec(name="a", kind="conv", out_channels=4, in_channels=3, kernel_h=1, kernel_w=1),
        LayerSpec(name="b", kind="conv", out_channels=6, in_channels=3, kernel_h=1, kernel_w=1),
        LayerSpec(name="cat", kind="concat", out_channels=10, in_channels=10),
    )
    # both a and b are roots feeding the concat
    m = ModelManifest(layers=layers, edges=(("a", "cat"), ("b", "cat")),
                      input_spatial=(8, 8), num_classes=2)
    assert m.toposort()[-1] == "cat"


def test_manifest_rejects_group_width_disagreement():
    layers = (
        LayerSpec(name="a", kind="conv", out_channels=4, in_channels=3,
                  kernel_h=1, kernel_w=1, prune_group="g"),
        LayerSpec(name="b", kind="conv", out_channels=6, in_channels=3,
                  kernel_h=1, kernel_w=1, prune_group="g"),
    )
    with pytest.raises(TopologyError):
        ModelManifest(layers=layers, edges=(), input_spatial=(8, 8), num_classes=2)


def test_manifest_dict_roundtrip():
    m = toy_manifest()
    assert ModelManifest.from_dict(m.to_dict()) == m


# --------------------------------------------------------- filter matrices


def test_flatten_filters_index_mapping():
    # shape [2,3,1,1]: column j is filter j in (channel, row, col) order
    t = np.array([[[[1.0]], [[2.0]], [[3.0]]],
                  [[[4.0]], [[5.0]], [[6.0]]]], dtype=np.float32)
    m = flatten_filters(t)
    assert m.shape == (3, 2)
    assert np.array_equal(m[:, 0], [1.0, 2.0, 3.0])
    assert np.array_equal(m[:, 1], [4.0, 5.0, 6.0])


def test_flatten_singleton():
    t = np.full((1, 1, 1, 1), 7.0, dtype=np.float32)
    assert flatten_filters(t).item() == 7.0


def test_flatten_rejects_non_4d():
    with pytest.raises(ValidationError):
        flatten_filters(np.zeros((3, 3)))


def test_unflatten_row_count_mismatch():
    with pytest.raises(ShapeMismatchError):
        unflatten_filters(np.zeros((10, 2)), c_in=3, h=2, w=2)


@settings(max_examples=100, deadline=None)
@given(
    c=st.integers(1, 8),
    cin=st.integers(1, 8),
    kh=st.integers(1, 4),
    kw=st.integers(1, 4),
    seed=st.integers(0, 2**31 - 1),
)
def test_flatten_unflatten_bijection(c, cin, kh, kw, seed):
    t = np.random.default_rng(seed).standard_normal((c, cin, kh, kw)).astype(np.float32)
    m = flatten_filters(t)
    assert m.shape == (cin * kh * kw, c)
    back = unflatten_filters(m, cin, kh, kw)
    assert back.dtype == np.float32
    assert np.array_equal(back, t)  # f32 -> f64 -> f32 is exact


def test_validate_detects_missing_bias(toy_archive):
    del toy_archive.tensors["fc"]["bias"]
    with pytest.raises(MissingFileError):
        toy_archive.validate()


def test_random_archive_is_seed_deterministic():
    m = toy_manifest()
    a = random_archive(m, seed=5)
    b = random_archive(m, seed=5)
    assert tensors_equal(a, b)
    c = random_archive(m, seed=6)
    assert not tensors_equal(a, c)
