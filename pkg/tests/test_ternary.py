"""
Tests for the 1D ternary pattern encoder.
"""
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from src.data.signal import fault_presets, synthesize
from src.data.ternary import (
    TernaryConfig,
    code_point,
    encode,
    export_feature_csv,
    featurize,
    load_feature_csv,
)


def brute_force_encode(sequence, k, beta):
    """Literal per-center encoder, neighbors ordered left_k..left_1, right_1..right_k."""
    pos, neg = [], []
    for c in range(k, len(sequence) - k):
        neighbors = [sequence[c - d] for d in range(k, 0, -1)] + [sequence[c + d] for d in range(1, k + 1)]
        p = n = 0
        for j, value in enumerate(neighbors):
            if sequence[c] > value + beta:
                p += 2 ** j
            elif sequence[c] < value - beta:
                n += 2 ** j
        pos.append(p)
        neg.append(n)
    return pos, neg


class TestCodePoint:
    """Test cases for single comparisons."""

    def test_examples(self):
        assert code_point(5, 3, 1) == 1
        assert code_point(3, 3, 0.5) == 0
        assert code_point(1, 3, 1) == -1

    def test_dead_zone_edges(self):
        assert code_point(4, 3, 1) == 0
        assert code_point(2, 3, 1) == 0

    def test_negative_beta(self):
        with pytest.raises(ValueError):
            code_point(1, 2, -0.1)


class TestEncode:
    """Test cases for encode and featurize."""

    def test_config_bounds(self):
        with pytest.raises(ValidationError):
            TernaryConfig(k=0, beta=1.0)
        with pytest.raises(ValidationError):
            TernaryConfig(k=2, beta=-1.0)
        with pytest.raises(ValidationError):
            TernaryConfig(k=2, beta=float("inf"))

    def test_constant_sequence(self):
        pos, neg = encode(np.full(20, 3.0), TernaryConfig(k=4, beta=0.1))
        assert pos.size == neg.size == 12
        assert not pos.any() and not neg.any()

    def test_increasing_sequence_k1(self):
        pos, neg = encode(np.arange(10.0) * 2.0, TernaryConfig(k=1, beta=0.5))
        # left neighbor smaller sets bit 0, right neighbor larger sets bit 1
        assert set(pos.tolist()) == {1}
        assert set(neg.tolist()) == {2}

    def test_too_short(self):
        with pytest.raises(ValueError):
            encode(np.arange(8.0), TernaryConfig(k=4, beta=0.0))

    def test_random_sequence_matches_brute_force(self):
        rng = np.random.default_rng(1)
        sequence = rng.normal(size=64)
        pos, neg = encode(sequence, TernaryConfig(k=4, beta=0.3))
        expected_pos, expected_neg = brute_force_encode(sequence, 4, 0.3)
        assert pos.tolist() == expected_pos
        assert neg.tolist() == expected_neg

    def test_brute_force_equivalence_many_instances(self):
        rng = np.random.default_rng(200)
        for _ in range(200):
            k = int(rng.integers(1, 5))
            n = int(rng.integers(2 * k + 1, 2 * k + 40))
            beta = float(rng.choice([0.0, rng.random(), 2 * rng.random()]))
            sequence = np.round(rng.normal(size=n), 1)
            pos, neg = encode(sequence, TernaryConfig(k=k, beta=beta))
            expected_pos, expected_neg = brute_force_encode(sequence, k, beta)
            assert pos.tolist() == expected_pos
            assert neg.tolist() == expected_neg

    def test_antisymmetry(self):
        sequence = np.random.default_rng(2).normal(size=50)
        config = TernaryConfig(k=3, beta=0.2)
        pos, neg = encode(sequence, config)
        flipped_pos, flipped_neg = encode(-sequence, config)
        np.testing.assert_array_equal(pos, flipped_neg)
        np.testing.assert_array_equal(neg, flipped_pos)

    def test_shift_invariance(self):
        sequence = np.random.default_rng(3).integers(-5, 5, size=40).astype(float)
        config = TernaryConfig(k=2, beta=1.0)
        pos, neg = encode(sequence, config)
        shifted_pos, shifted_neg = encode(sequence + 7.0, config)
        np.testing.assert_array_equal(pos, shifted_pos)
        np.testing.assert_array_equal(neg, shifted_neg)

    def test_beta_monotonicity(self):
        sequence = np.random.default_rng(4).normal(size=60)
        zeros = []
        for beta in (0.0, 0.1, 0.5, 1.0, 3.0):
            pos, neg = encode(sequence, TernaryConfig(k=2, beta=beta))
            bits = np.array([[(p >> j) & 1 or (q >> j) & 1 for j in range(4)] for p, q in zip(pos, neg)])
            zeros.append(bits == 0)
        for looser, tighter in zip(zeros, zeros[1:]):
            assert np.all(tighter[looser])

    def test_codes_in_range(self):
        pos, neg = encode(np.random.default_rng(5).normal(size=100), TernaryConfig(k=3, beta=0.0))
        assert pos.min() >= 0 and pos.max() <= 2 ** 6 - 1
        assert neg.min() >= 0 and neg.max() <= 2 ** 6 - 1


class TestFeaturize:
    """Test cases for histograms and feature export."""

    @pytest.fixture
    def temp_dir(self):
        """Create a temporary directory for testing."""
        temp_dir = tempfile.mkdtemp()
        yield Path(temp_dir)
        shutil.rmtree(temp_dir)

    def test_constant_length_nine(self):
        vector = featurize(np.full(9, 1.5), TernaryConfig(k=4, beta=0.2))
        assert vector.total_centers == 1
        assert vector.hist_pos[0] == vector.hist_neg[0] == 1
        assert vector.hist_pos[1:].sum() == vector.hist_neg[1:].sum() == 0
        assert vector.hist_pos.size == 256

    def test_histogram_totals(self):
        vector = featurize(np.random.default_rng(6).normal(size=77), TernaryConfig(k=2, beta=0.4))
        assert vector.hist_pos.sum() == vector.hist_neg.sum() == vector.total_centers == 73
        assert vector.as_vector().shape == (32,)
        assert vector.as_vector().sum() == pytest.approx(2.0)

    def test_concatenation_is_not_additive(self):
        config = TernaryConfig(k=1, beta=0.0)
        a, b = np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.0, 1.0, 2.0, 3.0])
        joined = featurize(np.concatenate([a, b]), config)
        separate = featurize(a, config).hist_pos + featurize(b, config).hist_pos
        assert not np.array_equal(joined.hist_pos, separate)

    def test_impulse_train_differs_from_sine(self):
        config = TernaryConfig(k=4, beta=0.3)
        presets = fault_presets()
        sine = featurize(synthesize(presets[0], 1024, seed=1).samples, config).as_vector()
        impulses = featurize(synthesize(presets[7], 1024, seed=1).samples, config).as_vector()
        assert np.abs(sine - impulses).sum() > 0

    def test_feature_csv(self, temp_dir):
        config = TernaryConfig(k=1, beta=0.1)
        rows = [featurize(np.random.default_rng(i).normal(size=30), config).as_vector() for i in range(3)]
        path = export_feature_csv(np.vstack(rows), [0, 1, 1], temp_dir / "features.csv", k=1)
        header = path.read_text().splitlines()[0].split(",")
        assert header == ["pos_0", "pos_1", "pos_2", "pos_3", "neg_0", "neg_1", "neg_2", "neg_3", "label"]
        matrix, labels = load_feature_csv(path)
        np.testing.assert_array_equal(matrix, np.vstack(rows))
        assert labels.tolist() == [0, 1, 1]

    def test_feature_csv_column_mismatch(self, temp_dir):
        with pytest.raises(ValueError):
            export_feature_csv(np.zeros((2, 5)), [0, 1], temp_dir / "bad.csv", k=1)
