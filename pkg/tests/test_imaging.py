import numpy as np
import pytest

from cxrpipe.errors import ConfigError, PgmError
from cxrpipe.imaging import (
    ClaheParams,
    GrayImage,
    clahe,
    clip_histogram,
    load_pgm,
    resize_preserve_aspect,
    save_pgm,
)

from oracles import global_equalize_oracle, tiled_equalize_oracle


def random_image(seed, height, width):
    rng = np.random.default_rng(seed)
    return GrayImage(rng.random((height, width)))


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(np.array([[0.0, 1.5]]))
        with pytest.raises(ValueError):
            GrayImage(np.array([[np.nan]]))

    def test_rejects_empty_and_wrong_rank(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            GrayImage(np.zeros(4))

    def test_pixels_are_read_only(self):
        img = random_image(0, 4, 4)
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 0.5


class TestPgm:
    def test_load_2x2_maxval_255(self):
        data = b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64])
        img = load_pgm(data)
        assert img.width == 2 and img.height == 2
        assert img.pixels.ravel().tolist() == [0.0, 1.0, 128 / 255, 64 / 255]

    def test_load_1x1_maxval_65535(self):
        data = b"P5\n1 1\n65535\n" + bytes([0xFF, 0xFF])
        assert load_pgm(data).pixels.tolist() == [[1.0]]

    def test_load_rejects_p6(self):
        with pytest.raises(PgmError, match="offset 0"):
            load_pgm(b"P6\n1 1\n255\n\x00")

    def test_load_rejects_zero_maxval(self):
        with pytest.raises(PgmError, match="maxval"):
            load_pgm(b"P5\n1 1\n0\n\x00")

    def test_load_rejects_truncated_raster(self):
        with pytest.raises(PgmError, match="truncated raster"):
            load_pgm(b"P5\n2 2\n255\n\x00\x01")

    def test_load_rejects_bad_header_token(self):
        with pytest.raises(PgmError, match="non-numeric"):
            load_pgm(b"P5\nxx 2\n255\n\x00")

    def test_load_honors_header_comments(self):
        data = b"P5\n# a radiograph\n1 1\n255\n\x2a"
        assert load_pgm(data).pixels[0, 0] == 42 / 255

    def test_save_quantization(self):
        assert save_pgm(GrayImage(np.array([[0.0]])), 255)[-1] == 0
        assert save_pgm(GrayImage(np.array([[1.0]])), 255)[-1] == 255
        # round-half-up: 0.5 * 255 = 127.5 -> 128
        assert save_pgm(GrayImage(np.array([[0.5]])), 255)[-1] == 128

    def test_save_rejects_other_maxval(self):
        with pytest.raises(ConfigError):
            save_pgm(random_image(0, 2, 2), 1023)

    @pytest.mark.parametrize("maxval", [255, 65535])
    def test_round_trip_error_bound(self, maxval):
        for seed in range(5):
            img = random_image(seed, 13, 17)
            back = load_pgm(save_pgm(img, maxval))
            assert np.abs(back.pixels - img.pixels).max() <= 1 / (2 * maxval)


class TestResize:
    def test_landscape_pads_rows(self):
        img = random_image(3, 768, 1024)
        out = resize_preserve_aspect(img, 512)
        assert out.pixels.shape == (512, 512)
        assert np.all(out.pixels[:64] == 0.0)
        assert np.all(out.pixels[448:] == 0.0)
        assert out.pixels[64:448].any()

    def test_same_size_is_identity(self):
        img = random_image(4, 512, 512)
        out = resize_preserve_aspect(img, 512)
        assert np.array_equal(out.pixels, img.pixels)

    def test_small_constant_upscales(self):
        img = GrayImage(np.full((50, 100), 0.5))
        out = resize_preserve_aspect(img, 512)
        assert np.allclose(out.pixels[128:384], 0.5)
        assert np.all(out.pixels[:128] == 0.0)
        assert np.all(out.pixels[384:] == 0.0)

    def test_constant_content_and_zero_border(self):
        for seed, (h, w) in enumerate([(30, 70), (70, 30), (7, 7), (1, 9)]):
            value = (seed + 1) / 5
            out = resize_preserve_aspect(GrayImage(np.full((h, w), value)), 64)
            nonzero = out.pixels != 0.0
            assert np.allclose(out.pixels[nonzero], value)

    def test_output_range(self):
        for seed in range(5):
            out = resize_preserve_aspect(random_image(seed, 41, 97), 64)
            assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


class TestClipHistogram:
    def test_redistribution_example(self):
        result = clip_histogram(np.array([10.0, 0.0, 0.0, 0.0]), 4.0)
        assert result.tolist() == [5.5, 1.5, 1.5, 1.5]

    def test_under_limit_unchanged(self):
        result = clip_histogram(np.array([3.0, 3.0, 3.0, 3.0]), 4.0)
        assert result.tolist() == [3.0, 3.0, 3.0, 3.0]

    def test_all_zero(self):
        assert clip_histogram(np.zeros(4), 2.5).tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_mass_conserved(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            hist = rng.random(rng.integers(2, 64)) * rng.uniform(1, 100)
            limit = rng.uniform(0.01, hist.max() * 1.5)
            clipped = clip_histogram(hist, limit)
            assert abs(clipped.sum() - hist.sum()) <= 1e-9 * max(hist.sum(), 1.0)


class TestClahe:
    def test_constant_image_is_exact_fixed_point(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            value = float(rng.random())
            params = ClaheParams(
                tile_rows=int(rng.integers(1, 6)),
                tile_cols=int(rng.integers(1, 6)),
                clip_factor=float(rng.uniform(1.0, 50.0)),
                n_bins=int(rng.integers(2, 300)),
            )
            img = GrayImage(np.full((32, 40), value))
            assert np.array_equal(clahe(img, params).pixels, img.pixels)

    def test_single_tile_matches_global_oracle(self):
        for seed in range(5):
            img = random_image(seed, 64, 64)
            params = ClaheParams(tile_rows=1, tile_cols=1, clip_factor=2.0, n_bins=256)
            expected = np.array(global_equalize_oracle(img.pixels.tolist(), 2.0, 256))
            out = clahe(img, params)
            assert np.abs(out.pixels - expected).max() <= 1 / 255

    def test_unclipped_grid_matches_tiled_oracle(self):
        for seed in range(3):
            img = random_image(seed + 50, 64, 64)
            params = ClaheParams(tile_rows=8, tile_cols=8, clip_factor=1e6, n_bins=256)
            expected = np.array(tiled_equalize_oracle(img.pixels.tolist(), 8, 8, 256))
            out = clahe(img, params)
            assert np.abs(out.pixels - expected).max() <= 1 / 255

    def test_mapping_is_monotone(self):
        # With one tile the output is the tile's own mapping, so any
        # input ordering must survive: p1 <= p2 => out1 <= out2.
        for seed in range(3):
            img = random_image(seed + 9, 32, 32)
            out = clahe(img, ClaheParams(tile_rows=1, tile_cols=1))
            order = np.argsort(img.pixels.ravel(), kind="stable")
            mapped = out.pixels.ravel()[order]
            assert np.all(np.diff(mapped) >= -1e-12)

    def test_output_range(self):
        for seed in range(5):
            out = clahe(random_image(seed, 40, 56), ClaheParams(tile_rows=4, tile_cols=7))
            assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0

    def test_grid_larger_than_image_rejected(self):
        with pytest.raises(ConfigError):
            clahe(random_image(0, 4, 4), ClaheParams(tile_rows=8, tile_cols=8))

    def test_bad_params_rejected(self):
        with pytest.raises(ConfigError):
            ClaheParams(tile_rows=0)
        with pytest.raises(ConfigError):
            ClaheParams(clip_factor=0.5)
        with pytest.raises(ConfigError):
            ClaheParams(n_bins=1)
