from __future__ import annotations

import numpy as np
import pytest

from visor.errors import (
    DimensionMismatchError,
    InvalidOpError,
    UnknownLocatorError,
    UnsupportedFormatError,
)
from visor.visual import VisualStore, codecs
from visor.visual.ops import Crop, Resize, Threshold
from visor.visual.tiled import TiledReader

from .oracles import resize_oracle, threshold_oracle


@pytest.fixture
def store(tmp_dir):
    return VisualStore(tmp_dir / "blobs")


def test_store_retrieve_png_identical_pixels(store):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (32, 24)).astype(np.uint8)
    record = store.store_image(img, "png")
    assert (record.width, record.height, record.channels) == (24, 32, 1)
    out = codecs.decode(store.retrieve_image(record.blob_locator, [], "png"))
    assert np.array_equal(out, img)


def test_store_tiled_lossless_roundtrip(store):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (33, 17, 3)).astype(np.uint8)
    record = store.store_image(img, "tiled", tile_size=8)
    assert np.array_equal(store.load_pixels(record.blob_locator), img)


def test_no_ops_matching_format_is_byte_exact_passthrough(store):
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    record = store.store_image(img, "tiled")
    stored = store.blobs.get(record.blob_locator)
    assert store.retrieve_image(record.blob_locator, [], "tiled") == stored
    record2 = store.store_image(img, "png")
    stored2 = store.blobs.get(record2.blob_locator)
    assert store.retrieve_image(record2.blob_locator, [], "png") == stored2


def test_pipeline_matches_oracles(store):
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (40, 40)).astype(np.uint8)
    record = store.store_image(img, "tiled", tile_size=16)
    data = store.retrieve_image(
        record.blob_locator, [Threshold(150), Resize(10, 10)], "png"
    )
    expected = resize_oracle(threshold_oracle(img, 150), 10, 10)
    assert np.array_equal(codecs.decode(data), expected)


def test_pipeline_deterministic_bytes(store):
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (25, 31)).astype(np.uint8)
    record = store.store_image(img, "tiled")
    ops = [Threshold(90), Resize(12, 9)]
    first = store.retrieve_image(record.blob_locator, ops, "png")
    for _ in range(3):
        assert store.retrieve_image(record.blob_locator, ops, "png") == first


def test_crop_pushdown_reads_only_intersecting_tiles(store, monkeypatch):
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (64, 64)).astype(np.uint8)
    record = store.store_image(img, "tiled", tile_size=16)

    reads = []
    original = TiledReader.tile

    def counting_tile(self, r, c):
        reads.append((r, c))
        return original(self, r, c)

    monkeypatch.setattr(TiledReader, "tile", counting_tile)
    data = store.retrieve_image(record.blob_locator, [Crop(10, 10, 20, 20)], "png")
    assert np.array_equal(codecs.decode(data), img[10:30, 10:30])
    assert len(reads) == TiledReader.intersecting_tiles(10, 10, 20, 20, 16)


def test_crop_pushdown_out_of_bounds_is_invalid_op(store):
    img = np.zeros((16, 16), np.uint8)
    record = store.store_image(img, "tiled", tile_size=8)
    with pytest.raises(InvalidOpError):
        store.retrieve_image(record.blob_locator, [Crop(8, 8, 16, 16)], "png")


def test_ops_validated_in_sequence(store):
    img = np.zeros((16, 16), np.uint8)
    record = store.store_image(img, "png")
    with pytest.raises(InvalidOpError):
        store.retrieve_image(
            record.blob_locator, [Resize(4, 4), Crop(0, 0, 8, 8)], "png"
        )


def test_unknown_locator(store):
    with pytest.raises(UnknownLocatorError):
        store.retrieve_image("deadbeef-0", [], "png")
    with pytest.raises(UnknownLocatorError):
        store.blobs.get("../../etc/passwd")


def test_unsupported_format(store):
    img = np.zeros((4, 4), np.uint8)
    with pytest.raises(UnsupportedFormatError):
        store.store_image(img, "webp")
    record = store.store_image(img, "png")
    with pytest.raises(UnsupportedFormatError):
        store.retrieve_image(record.blob_locator, [], "bmp")


def test_pixel_buffer_length_checked(store):
    with pytest.raises(DimensionMismatchError):
        store.store_pixel_buffer(b"\x00" * 10, 4, 4, 1)
    record = store.store_pixel_buffer(bytes(range(16)), 4, 4, 1)
    assert (record.width, record.height) == (4, 4)


def test_duplicate_content_gets_distinct_locators(store):
    img = np.full((8, 8), 7, np.uint8)
    a = store.store_image(img, "png")
    b = store.store_image(img, "png")
    assert a.blob_locator != b.blob_locator
    assert a.blob_locator.split("-")[0] == b.blob_locator.split("-")[0]
    assert store.blobs.get(a.blob_locator) == store.blobs.get(b.blob_locator)


def test_jpeg_output_decodes_with_right_dimensions(store):
    rng = np.random.default_rng(6)
    img = rng.integers(0, 256, (32, 48)).astype(np.uint8)
    record = store.store_image(img, "tiled")
    data = store.retrieve_image(record.blob_locator, [], "jpeg")
    assert codecs.sniff(data) == "jpeg"
    assert codecs.decode(data).shape == (32, 48)
