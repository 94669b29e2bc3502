import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irissr.cli.fixtures import EyeGeometry, eye_dataset, render_eye, subject_texture
from irissr.iris import (Circle, IrisCode, NormalizedIris, SegmentationError, SegmentationResult,
                         encode_gabor, encode_qsw, gabor_kernel, hamming_distance, load_segmentation,
                         load_template, normalize, qsw_details, sample_grid, save_segmentation,
                         save_template, segment, sidecar_path, sift_extract, sift_match)
from irissr.iris.codes import _make_code, band_signals

GEOM = EyeGeometry()


@pytest.fixture(scope="module")
def texture():
    return subject_texture(np.random.default_rng(5))


def seg_of(circles):
    (pcx, pcy, pr), (icx, icy, ir) = circles
    return SegmentationResult(Circle(pcx, pcy, pr), Circle(icx, icy, ir))


def random_code(rng, cols=512, bands=4, filters=8, scheme="gabor"):
    n = bands * cols * filters * 2
    bits = np.packbits(rng.integers(0, 2, n).astype(bool))
    return IrisCode(bits, np.full(n // 8, 255, np.uint8), scheme, (bands, cols, filters))


class TestSegmentation:
    def test_recovers_rendered_circles(self):
        for s in eye_dataset(n_subjects=4, n_samples=2, seed=9):
            seg = segment(s.image)
            assert seg.usable
            for found, true in ((seg.pupil, s.pupil), (seg.iris, s.iris)):
                assert abs(found.cx - true[0]) <= 1.5
                assert abs(found.cy - true[1]) <= 1.5
                assert abs(found.r - true[2]) <= 1.5

    def test_flat_image_unusable(self):
        assert not segment(np.full((96, 96), 0.5)).usable

    def test_noise_image_unusable_or_valid(self):
        seg = segment(np.random.default_rng(0).random((96, 96)))
        if seg.usable:
            assert seg.pupil.r < seg.iris.r

    def test_too_small(self):
        with pytest.raises(ValueError):
            segment(np.zeros((40, 40)))

    def test_invariants(self):
        with pytest.raises(SegmentationError):
            SegmentationResult(Circle(10, 10, 30), Circle(10, 10, 20))
        with pytest.raises(SegmentationError):
            SegmentationResult(Circle(50, 10, 5), Circle(10, 10, 20))

    def test_sidecar_round_trip(self, tmp_path):
        seg = SegmentationResult(Circle(95.25, 96.5, 24), Circle(95.0, 96.0, 72))
        p = sidecar_path(tmp_path / "img.png")
        assert p.endswith("img.seg.csv")
        save_segmentation(p, seg)
        assert load_segmentation(p) == seg

    @pytest.mark.parametrize("body", ["1,2,3\n", "1,2,3\n4,5\n", "a,b,c\n1,2,3\n", "1,2,30\n1,2,3\n"])
    def test_bad_sidecar(self, tmp_path, body):
        p = tmp_path / "x.seg.csv"
        p.write_text(body)
        with pytest.raises(SegmentationError):
            load_segmentation(p)

    def test_missing_sidecar(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_segmentation(tmp_path / "none.seg.csv")


class TestNormalize:
    def test_unwraps_rendered_texture(self, texture):
        img, circles = render_eye(texture, GEOM)
        norm = normalize(img, seg_of(circles))
        assert norm.texture.shape == (64, 512)
        inner = slice(8, 56)  # away from the soft boundaries
        err = np.abs(norm.texture[inner] - texture[inner])
        assert err.mean() < 0.01

    def test_grid_endpoints(self):
        seg = SegmentationResult(Circle(50, 60, 10), Circle(52, 60, 40))
        x, y = sample_grid(seg, rows=2, cols=4)
        # first column sits at angle pi/4, rows at t = 1/4 and 3/4
        a = np.pi / 4
        px, qx = 50 + 10 * np.cos(a), 52 + 40 * np.cos(a)
        assert x[0, 0] == pytest.approx(0.75 * px + 0.25 * qx)
        assert y[1, 0] == pytest.approx(60 + (0.25 * 10 + 0.75 * 40) * np.sin(a))

    def test_mask_marks_off_image(self, texture):
        img, ((pcx, pcy, pr), (icx, icy, ir)) = render_eye(texture, GEOM)
        shifted = SegmentationResult(Circle(30, pcy, pr), Circle(30, icy, ir))
        norm = normalize(img, shifted)
        assert 0 < norm.noise_mask.mean() < 1
        assert np.all(norm.texture[~norm.noise_mask & (norm.texture != 0)] >= 0)

    def test_errors(self):
        img = np.zeros((100, 100))
        with pytest.raises(ValueError):
            normalize(img, SegmentationResult(Circle(0, 0, 0), Circle(0, 0, 0), usable=False))
        with pytest.raises(ValueError):
            normalize(img, SegmentationResult(Circle(500, 500, 5), Circle(500, 500, 20)))
        with pytest.raises(ValueError):
            NormalizedIris(np.zeros((10, 10)), np.ones((10, 10), bool))


class TestCodes:
    def test_gabor_kernel_zero_mean(self):
        for lam in (8, 24, 96):
            k = gabor_kernel(lam, 512)
            assert abs(k.sum()) < 1e-9

    def test_qsw_constant_signal_has_no_detail(self):
        d = qsw_details(np.full((2, 64), 0.3))
        assert np.abs(d).max() < 1e-12

    @pytest.mark.parametrize("encode", [encode_gabor, encode_qsw])
    def test_rotation_is_column_shift(self, texture, encode):
        k = 5
        a, ca = render_eye(texture, GEOM)
        b, cb = render_eye(texture, GEOM, rotation=2 * np.pi * k / 512)
        A, B = encode(normalize(a, seg_of(ca))), encode(normalize(b, seg_of(cb)))
        assert hamming_distance(A, B, max_shift=8) < 0.05
        assert hamming_distance(A, B, max_shift=0) > hamming_distance(A, B, max_shift=8)

    def test_genuine_below_impostor(self):
        data = eye_dataset(n_subjects=3, n_samples=2, seed=4)
        codes = [encode_gabor(normalize(s.image, seg_of((s.pupil, s.iris)))) for s in data]
        gen = [hamming_distance(codes[i], codes[i + 1]) for i in (0, 2, 4)]
        imp = [hamming_distance(codes[i], codes[j]) for i in (0, 2, 4) for j in (0, 2, 4) if i < j]
        assert max(gen) < min(imp)
        assert min(imp) > 0.35

    def test_band_signals_mask(self):
        mask = np.ones((64, 512), bool)
        mask[:10, :5] = False  # 10 of 16 rows missing in band 0, columns 0-4
        sig, valid = band_signals(NormalizedIris(np.full((64, 512), 0.5), mask), 4)
        assert sig.shape == (4, 512)
        assert not valid[0, :5].any() and valid[0, 5:].all() and valid[1:].all()

    def test_invalid_wavelength(self):
        norm = NormalizedIris(np.zeros((64, 512)), np.ones((64, 512), bool))
        with pytest.raises(ValueError):
            encode_gabor(norm, wavelengths=(0,))

    def test_code_geometry_checked(self):
        with pytest.raises(ValueError):
            IrisCode(np.zeros(3, np.uint8), np.zeros(3, np.uint8), "gabor", (4, 512, 8))


class TestHamming:
    def test_identical_and_complement(self):
        c = random_code(np.random.default_rng(0))
        inv = IrisCode(~c.bits, c.mask, c.scheme, c.geometry)
        assert hamming_distance(c, c) == 0.0
        assert hamming_distance(c, inv, max_shift=0) == 1.0

    @given(st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_monotone_in_shift(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_code(rng, cols=64), random_code(rng, cols=64)
        d = [hamming_distance(a, b, s) for s in range(6)]
        assert all(x >= y for x, y in zip(d, d[1:]))

    def test_symmetric_without_shift(self):
        rng = np.random.default_rng(1)
        a, b = random_code(rng), random_code(rng)
        assert hamming_distance(a, b, 0) == hamming_distance(b, a, 0)

    def test_mask_excludes_bits(self):
        rng = np.random.default_rng(2)
        a = random_code(rng, cols=16)
        flipped = a.bits.copy()
        flipped[:8] ^= 0xFF
        mask = a.mask.copy()
        mask[:8] = 0
        b = IrisCode(flipped, mask, a.scheme, a.geometry)
        assert hamming_distance(a, b, 0) == 0.0

    def test_no_joint_bits_sentinel(self):
        a = random_code(np.random.default_rng(3), cols=8)
        empty = IrisCode(a.bits, np.zeros_like(a.mask), a.scheme, a.geometry)
        assert hamming_distance(a, empty) == 1.0

    def test_odd_bits_per_column_shift(self):
        rng = np.random.default_rng(4)
        # 3 bands x 2 filters x 2 bits = 12 bits per column, not a whole number of bytes
        bits = rng.integers(0, 2, (3, 8, 2, 2)).astype(bool)
        a = _make_code(bits, np.ones_like(bits), "qsw")
        b = _make_code(np.roll(bits, 3, axis=1), np.ones_like(bits), "qsw")
        assert a.bits_per_column == 12 and a.n_bits == 96
        assert hamming_distance(a, b, max_shift=0) > 0
        assert hamming_distance(a, b, max_shift=3) == 0.0

    def test_incompatible(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            hamming_distance(random_code(rng), random_code(rng, scheme="qsw"))
        with pytest.raises(ValueError):
            hamming_distance(random_code(rng), random_code(rng), max_shift=-1)

    def test_template_round_trip(self, tmp_path):
        c = random_code(np.random.default_rng(6))
        save_template(tmp_path / "t.bin", c)
        back = load_template(tmp_path / "t.bin")
        assert back.scheme == c.scheme and back.geometry == c.geometry
        assert np.array_equal(back.bits, c.bits) and np.array_equal(back.mask, c.mask)
        (tmp_path / "bad.bin").write_bytes(b"NOTACODE" + bytes(20))
        with pytest.raises(ValueError):
            load_template(tmp_path / "bad.bin")


class TestSift:
    def test_blank_has_no_keypoints(self):
        ks = sift_extract(np.full((64, 64), 0.5))
        assert len(ks.keypoints) == 0
        assert sift_match(ks, ks) == 0.0

    def test_blob_keypoint_location(self):
        yy, xx = np.mgrid[0:64, 0:64]
        img = 0.2 + 0.6 * np.exp(-((xx - 35) ** 2 + (yy - 30) ** 2) / (2 * 3.0**2))
        ks = sift_extract(img)
        d = np.hypot(ks.keypoints[:, 0] - 35, ks.keypoints[:, 1] - 30)
        assert d.min() < 1.0

    def test_descriptors_unit_norm_and_deterministic(self, texture):
        img, _ = render_eye(texture, GEOM)
        a, b = sift_extract(img), sift_extract(img)
        assert len(a.keypoints) > 10
        np.testing.assert_allclose(np.linalg.norm(a.descriptors, axis=1), 1.0, atol=1e-5)
        assert np.array_equal(a.keypoints, b.keypoints)

    def test_genuine_beats_impostor(self):
        data = eye_dataset(n_subjects=2, n_samples=2, seed=8)
        ks = [sift_extract(s.image) for s in data]
        assert sift_match(ks[0], ks[1]) > sift_match(ks[0], ks[2])
        assert sift_match(ks[0], ks[0]) == pytest.approx(1.0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            sift_extract(np.zeros((16, 16)))
