"""
Tests for matrix loading and the synthetic two-NMF toy.

Tests cover:
- Dense CSV and coordinate-sparse parsing, with line-numbered errors
- Negative clipping on load
- Toy construction: exact equal products, separation, noise bound, seeding
- Ground truth written by save_dataset reads back through load_factorizations
"""

import numpy as np
import pytest

from app.services.coverage import wad
from app.services.datasets import (
    MatrixFormatError,
    ToyConstructionError,
    clip_negatives,
    gen_two_nmf_toy,
    load_factorizations,
    load_matrix,
    parse_coordinate_sparse,
    parse_dense_csv,
    save_dataset,
    two_factorization_core,
)


class TestDenseCsv:

    def test_parses_rows(self):
        X = parse_dense_csv(["1, 2, 3\n", "\n", "4,5,6.5\n"])
        np.testing.assert_array_equal(X, [[1, 2, 3], [4, 5, 6.5]])

    def test_ragged_row_reports_line(self):
        with pytest.raises(MatrixFormatError) as excinfo:
            parse_dense_csv(["1,2", "3,4", "5"], path="x.csv")
        assert excinfo.value.line_number == 3
        assert "x.csv:3" in str(excinfo.value)

    def test_non_number(self):
        with pytest.raises(MatrixFormatError) as excinfo:
            parse_dense_csv(["1,abc"])
        assert excinfo.value.line_number == 1

    def test_non_finite(self):
        with pytest.raises(MatrixFormatError):
            parse_dense_csv(["1,nan"])

    def test_empty(self):
        with pytest.raises(MatrixFormatError):
            parse_dense_csv(["", "  "])


class TestCoordinateSparse:

    def test_parses_with_comments(self):
        lines = ["%%MatrixMarket matrix coordinate real general", "% comment", "2 3 2", "1 1 0.5", "2 3 4"]
        X = parse_coordinate_sparse(lines)
        np.testing.assert_array_equal(X, [[0.5, 0, 0], [0, 0, 4.0]])

    def test_duplicates_are_summed(self):
        X = parse_coordinate_sparse(["1 1 2", "1 1 1.5", "1 1 0.5"])
        assert X[0, 0] == 2.0

    def test_index_out_of_range(self):
        with pytest.raises(MatrixFormatError) as excinfo:
            parse_coordinate_sparse(["2 2 1", "3 1 1.0"])
        assert excinfo.value.line_number == 2

    def test_zero_index_rejected(self):
        with pytest.raises(MatrixFormatError):
            parse_coordinate_sparse(["2 2 1", "0 1 1.0"])

    def test_nnz_mismatch(self):
        with pytest.raises(MatrixFormatError):
            parse_coordinate_sparse(["2 2 3", "1 1 1.0"])

    def test_missing_header(self):
        with pytest.raises(MatrixFormatError):
            parse_coordinate_sparse(["% only comments"])

    def test_bad_header(self):
        with pytest.raises(MatrixFormatError):
            parse_coordinate_sparse(["2 x 1"])


class TestLoadMatrix:

    def test_clips_negatives(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1,-2\n-0.5,3\n", encoding="utf-8")
        dataset = load_matrix(path)
        assert dataset.clipped_count == 2
        assert dataset.name == "data"
        np.testing.assert_array_equal(dataset.X, [[1, 0], [0, 3]])

    def test_sparse_format(self, tmp_path):
        path = tmp_path / "data.mtx"
        path.write_text("3 2 1\n3 2 7\n", encoding="utf-8")
        dataset = load_matrix(path, "coordinate-sparse", name="sparse")
        assert dataset.shape == (3, 2)
        assert dataset.provenance["format"] == "coordinate-sparse"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_matrix(tmp_path / "absent.csv")

    def test_clip_negatives_leaves_nonnegative_input(self):
        X = np.ones((2, 2))
        clipped, count = clip_negatives(X)
        assert count == 0 and clipped is X


class TestTwoNmfToy:

    def test_core_factorizations_have_equal_products(self):
        first, second = two_factorization_core(np.random.default_rng(0))
        np.testing.assert_allclose(first.reconstruction(), second.reconstruction(), atol=1e-12)
        assert np.all(first.A >= 0) and np.all(second.W >= 0)
        assert first.A.shape == (4, 3)

    def test_generated_dataset(self):
        dataset = gen_two_nmf_toy(D=40, N=30, noise_eps=0.01, seed=2)
        assert dataset.shape == (40, 30)
        assert np.all(dataset.X >= 0)
        first, second = dataset.ground_truth
        np.testing.assert_allclose(first.reconstruction(), second.reconstruction(), atol=1e-10)
        assert np.max(np.abs(dataset.X - first.reconstruction())) <= 0.01
        assert dataset.provenance["embedded_wad_deg"] > 1.0
        assert dataset.provenance["core_wad_deg"] > 5.0
        assert wad(first, second) == pytest.approx(dataset.provenance["embedded_wad_deg"])

    def test_same_seed_same_data(self):
        a = gen_two_nmf_toy(D=10, N=12, seed=5)
        b = gen_two_nmf_toy(D=10, N=12, seed=5)
        np.testing.assert_array_equal(a.X, b.X)

    def test_noiseless(self):
        dataset = gen_two_nmf_toy(D=8, N=8, noise_eps=0.0, seed=1)
        np.testing.assert_allclose(dataset.X, dataset.ground_truth[0].reconstruction())

    @pytest.mark.parametrize("kwargs", [{"D": 3}, {"N": 2}, {"noise_eps": -0.1}])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ValueError):
            gen_two_nmf_toy(**{"D": 10, "N": 10, **kwargs})

    def test_failed_construction(self, monkeypatch):
        monkeypatch.setattr("app.services.datasets.synthetic.MIN_CORE_WAD_DEG", 90.0)
        with pytest.raises(ToyConstructionError):
            gen_two_nmf_toy(D=5, N=5, seed=0)


class TestSaveDataset:

    def test_truth_reads_back_as_factorizations(self, tmp_path):
        dataset = gen_two_nmf_toy(D=6, N=5, seed=3)
        save_dataset(dataset, tmp_path)
        assert load_matrix(tmp_path / "X.csv").X.tolist() == dataset.X.tolist()
        found = load_factorizations(tmp_path)
        assert sorted(found) == ["truth_0", "truth_1"]
        np.testing.assert_array_equal(found["truth_1"].W, dataset.ground_truth[1].W)

    def test_missing_partner(self, tmp_path):
        (tmp_path / "lonely.A.csv").write_text("1,2\n", encoding="utf-8")
        with pytest.raises(MatrixFormatError):
            load_factorizations(tmp_path)
