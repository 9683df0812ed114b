"""CSV ingestion, synthetic sampling, and k-means++ initialization."""

import numpy as np
import pytest

from conftest import align_components
from riemmix.data import (
    Dataset,
    kmeanspp_init,
    load_csv,
    random_separated_mixture,
    sample_gmm,
)
from riemmix.objective import make_mixture


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_plain_matrix(self, tmp_path):
        ds = load_csv(write(tmp_path, "1.0,2.0\n3.5,-4.25\n"))
        np.testing.assert_array_equal(ds.rows, [[1.0, 2.0], [3.5, -4.25]])
        assert ds.n == 2 and ds.d == 2

    def test_header_skipped(self, tmp_path):
        ds = load_csv(write(tmp_path, "x,y\n1,2\n"), header=True)
        np.testing.assert_array_equal(ds.rows, [[1.0, 2.0]])

    def test_blank_lines_ignored(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,2\n\n3,4\n"))
        assert ds.n == 2

    def test_scientific_notation(self, tmp_path):
        ds = load_csv(write(tmp_path, "1e-3,2.5E+2\n"))
        np.testing.assert_allclose(ds.rows, [[1e-3, 250.0]])

    def test_ragged_row_reports_location(self, tmp_path):
        path = write(tmp_path, "1,2\n3,4,5\n")
        with pytest.raises(ValueError, match="line 2"):
            load_csv(path)

    def test_non_numeric_cell_reports_location(self, tmp_path):
        path = write(tmp_path, "1,2\n3,oops\n")
        with pytest.raises(ValueError, match="line 2, column 2"):
            load_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(write(tmp_path, ""))

    def test_custom_delimiter(self, tmp_path):
        ds = load_csv(write(tmp_path, "1;2\n3;4\n"), delimiter=";")
        np.testing.assert_array_equal(ds.rows, [[1, 2], [3, 4]])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv")


class TestSampleGmm:
    def test_deterministic(self):
        truth = random_separated_mixture(2, 3, seed=0)
        a = sample_gmm(truth, 100, seed=42)
        b = sample_gmm(truth, 100, seed=42)
        np.testing.assert_array_equal(a.rows, b.rows)
        c = sample_gmm(truth, 100, seed=43)
        assert not np.array_equal(a.rows, c.rows)

    def test_zero_samples(self):
        truth = random_separated_mixture(2, 3, seed=0)
        ds = sample_gmm(truth, 0, seed=0)
        assert ds.rows.shape == (0, 3)

    def test_moments_match_truth(self):
        # CLT check on the mixture mean and total covariance
        truth = make_mixture([0.3, 0.7], [[-2.0, 0.0], [2.0, 1.0]],
                             np.stack([np.eye(2), 2.0 * np.eye(2)]))
        n = 200000
        ds = sample_gmm(truth, n, seed=5)
        mix_mean = truth.weights @ truth.means
        emp_mean = ds.rows.mean(axis=0)
        # component-wise second moment: sum_j w_j (Sigma_j + mu_j mu_j^T)
        second = sum(w * (c + np.outer(m, m)) for w, m, c in
                     zip(truth.weights, truth.means, truth.covariances))
        mix_cov = second - np.outer(mix_mean, mix_mean)
        emp_cov = np.cov(ds.rows, rowvar=False, bias=True)
        scale = np.sqrt(np.diag(mix_cov).max() / n)
        assert np.abs(emp_mean - mix_mean).max() < 5 * scale
        np.testing.assert_allclose(emp_cov, mix_cov, atol=0.05)

    def test_provenance_records_seed(self):
        truth = random_separated_mixture(1, 2, seed=0)
        ds = sample_gmm(truth, 10, seed=9)
        assert ds.provenance["seed"] == 9


class TestKmeansppInit:
    def test_single_component_exact_moments(self, rng):
        data = rng.standard_normal((80, 3)) + 1.5
        est = kmeanspp_init(data, 1, seed=0)
        np.testing.assert_allclose(est.weights, [1.0])
        np.testing.assert_allclose(est.means[0], data.mean(axis=0), rtol=1e-12)
        # single cluster: blended covariance equals the global covariance
        np.testing.assert_allclose(
            est.covariances[0],
            np.cov(data, rowvar=False, bias=True), rtol=1e-6)

    def test_deterministic(self, rng):
        data = rng.standard_normal((60, 2))
        a = kmeanspp_init(data, 3, seed=7)
        b = kmeanspp_init(data, 3, seed=7)
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.covariances, b.covariances)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_requires_enough_samples(self, rng):
        with pytest.raises(ValueError):
            kmeanspp_init(rng.standard_normal((2, 2)), 3)

    def test_weights_floored_and_normalized(self, rng):
        # one extreme outlier grabs its own center but keeps positive weight
        data = np.vstack([rng.standard_normal((50, 2)), [[100.0, 100.0]]])
        est = kmeanspp_init(data, 3, seed=0)
        # floor 1/(10K) is applied before renormalization (divisor <= 1.1)
        assert np.all(est.weights >= 1.0 / 33.0 - 1e-12)
        assert est.weights.sum() == pytest.approx(1.0)

    def test_separated_clusters_found(self):
        # candidate scoring should locate well-separated components reliably
        hits = 0
        for seed in range(10):
            truth = random_separated_mixture(3, 2, seed=seed, separation=10.0)
            data = sample_gmm(truth, 600, seed=seed).rows
            est = kmeanspp_init(data, 3, seed=seed)
            perm = align_components(est, truth)
            err = np.linalg.norm(est.means[perm] - truth.means, axis=1).max()
            spread = np.sqrt(max(np.trace(c) for c in truth.covariances))
            if err < spread:
                hits += 1
        assert hits >= 9


class TestRandomSeparatedMixture:
    def test_pairwise_separation(self):
        truth = random_separated_mixture(4, 3, seed=1, separation=5.0)
        dists = [np.linalg.norm(truth.means[i] - truth.means[j])
                 for i in range(4) for j in range(i + 1, 4)]
        assert min(dists) == pytest.approx(5.0)

    def test_valid_mixture(self):
        truth = random_separated_mixture(3, 4, seed=2)
        assert truth.weights.sum() == pytest.approx(1.0)
        assert np.all(truth.weights > 0)
        for c in truth.covariances:
            assert np.all(np.linalg.eigvalsh(c) > 0)

    def test_deterministic(self):
        a = random_separated_mixture(2, 2, seed=3)
        b = random_separated_mixture(2, 2, seed=3)
        np.testing.assert_array_equal(a.means, b.means)
