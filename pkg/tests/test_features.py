import os

import numpy as np
import pytest

from mammocad import synth
from mammocad.features import (
    EmptyRegionError,
    FeatureCsvError,
    FeatureMatrix,
    FeatureVector,
    build_matrix,
    extract_features,
    feature_names,
    image_features,
    moments,
    read_manifest,
)
from mammocad.imgio import GrayImage, save_pgm
from mammocad.preprocess import BinaryMask, preprocess
from mammocad.transforms import make_basis

from oracles import two_pass_moments


class TestMoments:
    def test_two_point(self):
        assert moments(np.array([0.0, 1.0])) == (0.5, 0.5, 0.0, 1.0)

    def test_constant_convention(self):
        assert moments(np.full(7, 3.25)) == (3.25, 0.0, 0.0, 0.0)

    def test_empty_region(self):
        with pytest.raises(EmptyRegionError):
            moments(np.ones((2, 2)), np.zeros((2, 2), dtype=bool))

    def test_region_restricts(self):
        x = np.array([[1.0, 100.0], [3.0, -50.0]])
        mask = BinaryMask(np.array([[True, False], [True, False]]))
        assert moments(x, mask) == moments(np.array([1.0, 3.0]))

    def test_matches_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.standard_normal(int(rng.integers(2, 300))) * rng.uniform(0.01, 100) + rng.uniform(-5, 5)
            got = moments(x)
            ref = two_pass_moments(x)
            for g, r in zip(got, ref):
                assert abs(g - r) <= 1e-12 * max(abs(r), 1.0)

    def test_symmetric_multiset_has_zero_skew(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            half = rng.random(20)
            c = float(rng.uniform(-3, 3))
            x = np.concatenate([c + half, c - half])
            assert abs(moments(x)[2]) < 1e-12


class TestExtract:
    def test_default_count_and_names(self):
        rng = np.random.default_rng(2)
        img = GrayImage(rng.random((1024, 1024)))
        fv = extract_features(img, None, make_basis("db4"))
        assert len(fv.names) == 100
        assert sum(n.startswith("db4.") for n in fv.names) == 96
        assert sum(n.startswith("fourier.") for n in fv.names) == 4
        assert fv.names == feature_names("db4")
        assert "db4.L3.horizontal.kurtosis" in fv.names
        assert np.all(np.isfinite(fv.values))

    def test_constant_image_details_vanish(self):
        img = GrayImage(np.full((256, 256), 0.4))
        fv = extract_features(img, None, make_basis("db2")).as_dict()
        for name, v in fv.items():
            if any(f".{band}." in name for band in ("horizontal", "vertical", "diagonal")):
                if name.endswith((".mean", ".std")):
                    assert abs(v) < 1e-9, name

    def test_level_range_validated(self):
        with pytest.raises(ValueError):
            extract_features(GrayImage(np.ones((64, 64))), None, make_basis("db2"), levels=(0, 3))

    def test_mask_shape_checked(self):
        with pytest.raises(ValueError):
            extract_features(GrayImage(np.ones((64, 64))), BinaryMask(np.ones((8, 8), dtype=bool)),
                             make_basis("db2"), levels=(1, 2))

    def test_bright_blob_raises_detail_kurtosis(self):
        spec = synth.random_spec(np.random.default_rng((77, 1)), 77, False, 256, 256)
        region = synth.breast_region(spec)
        rows, cols = np.nonzero(region)
        r, c = int(np.median(rows)), int(np.median(cols))
        base, _ = synth.generate(spec)
        blob = base.pixels.copy()
        blob[r - 1:r + 2, c - 1:c + 2] = base.pixels.max() * 1.2
        names = [n for n in feature_names("db4", (1, 3), fourier=False) if n.endswith("kurtosis")
                 and ".approx." not in n]
        values = []
        for x in (base.pixels, blob):
            pre, mask = preprocess(GrayImage(x))
            values.append(extract_features(pre, mask, make_basis("db4"), (1, 3), fourier=False).as_dict())
        assert any(values[1][n] > values[0][n] for n in names)

    def test_vector_validation(self):
        with pytest.raises(ValueError):
            FeatureVector(["a", "a"], [1.0, 2.0])
        with pytest.raises(ValueError):
            FeatureVector(["a", "b"], [1.0, np.inf])


def _write_corpus(tmp_path, n, size=64):
    items = synth.generate_corpus(n // 2, n - n // 2, seed=5, out_dir=str(tmp_path), height=size, width=size)
    return read_manifest(os.path.join(tmp_path, "manifest.csv")), items


class TestBuildMatrix:
    def test_two_image_shape(self, tmp_path):
        corpus, _ = _write_corpus(tmp_path, 2)
        out = build_matrix(corpus, ["db2", "db4"], levels=(1, 3), resolution=64)
        for basis, m in out.items():
            assert m.shape == (2, 16 * 3 + 4)
            assert m.feature_names == feature_names(basis, (1, 3))
            assert list(m.labels) == [0, 1]
            assert m.image_ids == ["phantom_00000.pgm", "phantom_00001.pgm"]

    def test_duplicates_are_kept(self, tmp_path):
        corpus, _ = _write_corpus(tmp_path, 1)
        path = corpus[0][0]
        out = build_matrix([(path, 0), (path, 1)], ["db2"], levels=(1, 2), resolution=64)["db2"]
        assert len(out) == 2
        np.testing.assert_array_equal(out.values[0], out.values[1])

    def test_unreadable_file_skipped(self, tmp_path):
        corpus, _ = _write_corpus(tmp_path, 1)
        bad = tmp_path / "broken.pgm"
        bad.write_bytes(b"P5\n64 64\n255\n" + bytes(10))
        out = build_matrix([corpus[0], (str(bad), 1)], ["db2"], levels=(1, 2), resolution=64)["db2"]
        assert len(out) == 1
        assert len(out.skipped) == 1 and out.skipped[0][0] == "broken.pgm"
        assert "TruncatedPayloadError" in out.skipped[0][1]

    def test_bad_inputs(self, tmp_path):
        with pytest.raises(ValueError):
            build_matrix([], ["db2"])
        with pytest.raises(ValueError):
            build_matrix([("x.pgm", 2)], ["db2"])

    def test_workers_do_not_change_output(self, tmp_path):
        corpus, _ = _write_corpus(tmp_path, 4)
        a = build_matrix(corpus, ["db2", "bior6.8"], levels=(1, 3), resolution=64, workers=1)
        b = build_matrix(corpus, ["db2", "bior6.8"], levels=(1, 3), resolution=64, workers=2)
        for basis in a:
            assert a[basis].values.tobytes() == b[basis].values.tobytes()
            assert a[basis].image_ids == b[basis].image_ids

    def test_resampling_happens(self, tmp_path):
        corpus, _ = _write_corpus(tmp_path, 1, size=50)
        vecs = image_features(corpus[0][0], ["db2"], levels=(1, 2), resolution=64)
        assert len(vecs) == 1 and len(vecs[0].names) == 36


class TestFeatureMatrixCsv:
    def _matrix(self):
        rng = np.random.default_rng(3)
        return FeatureMatrix(["f.a", "f.b", "f.c"], rng.standard_normal((4, 3)) * 1e-7, [0, 1, 1, 0],
                             ["i0", "i1", "i2", "i3"])

    def test_round_trip_exact(self, tmp_path):
        m = self._matrix()
        m.write_csv(tmp_path / "m.csv")
        back = FeatureMatrix.read_csv(tmp_path / "m.csv")
        assert back.feature_names == m.feature_names
        assert back.values.tobytes() == m.values.tobytes()
        assert list(back.labels) == list(m.labels) and back.image_ids == m.image_ids
        with open(tmp_path / "m.csv") as fh:
            assert fh.readline().strip() == "image_id,f.a,f.b,f.c,label"

    def test_bad_csv(self, tmp_path):
        (tmp_path / "bad.csv").write_text("id,x\n")
        with pytest.raises(FeatureCsvError):
            FeatureMatrix.read_csv(tmp_path / "bad.csv")
        (tmp_path / "short.csv").write_text("image_id,x,label\na,1\n")
        with pytest.raises(FeatureCsvError):
            FeatureMatrix.read_csv(tmp_path / "short.csv")

    def test_join_dedups_shared_columns(self):
        m = self._matrix()
        other = FeatureMatrix(["g", "f.b"], np.column_stack([np.ones(4), m.values[:, 1]]), m.labels, m.image_ids)
        joined = FeatureMatrix.join([m, other])
        assert joined.feature_names == ["f.a", "f.b", "f.c", "g"]

    def test_join_rejects_conflicts(self):
        m = self._matrix()
        other = FeatureMatrix(["f.b"], np.zeros((4, 1)), m.labels, m.image_ids)
        with pytest.raises(ValueError):
            FeatureMatrix.join([m, other])

    def test_rows_and_columns(self):
        m = self._matrix()
        sub = m.rows([2, 0]).columns(["f.c", "f.a"])
        assert sub.image_ids == ["i2", "i0"]
        np.testing.assert_array_equal(sub.values, m.values[[2, 0]][:, [2, 0]])
        with pytest.raises(KeyError):
            m.columns(["nope"])


def test_manifest_paths_resolve_against_its_directory(tmp_path):
    save_pgm(GrayImage(np.ones((4, 4))), tmp_path / "a.pgm")
    (tmp_path / "m.csv").write_text("filename,label\na.pgm,1\n")
    assert read_manifest(tmp_path / "m.csv") == [(str(tmp_path / "a.pgm"), 1)]
