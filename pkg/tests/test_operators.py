import numpy as np
import pytest

from nonnormal_lab import linalg, operators


def random_spd_pair(rng, n):
    H = rng.standard_normal((n, n))
    H = (H + H.T) / 2.0
    M = rng.uniform(0.2, 3.0, n)
    return H, M


class TestAdamFrozen:
    def test_identity_case(self):
        op = operators.build_adam_frozen(np.eye(3), np.ones(3), 0.5)
        assert np.allclose(op.J, 0.5 * np.eye(3), atol=0)

    def test_scalar_preconditioner_gives_symmetric_operator(self):
        rng = np.random.default_rng(0)
        H, _ = random_spd_pair(rng, 5)
        op = operators.build_adam_frozen(H, 2.5 * np.ones(5), 0.1)
        C = operators.normality_commutator(op.J)
        assert linalg.operator_norm_2(C) <= 1e-12 * linalg.operator_norm_2(op.J) ** 2

    def test_hand_example(self):
        op = operators.build_adam_frozen([[2.0, 1.0], [1.0, 3.0]], [1.0, 4.0], 0.1)
        assert np.allclose(op.J, [[0.8, -0.1], [-0.025, 0.925]], atol=1e-15)

    def test_rejects_asymmetric_h(self):
        with pytest.raises(ValueError):
            operators.build_adam_frozen([[1.0, 0.5], [0.0, 1.0]], [1.0, 1.0], 0.1)

    def test_rejects_nonpositive_preconditioner(self):
        with pytest.raises(ValueError):
            operators.build_adam_frozen(np.eye(2), [1.0, 0.0], 0.1)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            operators.build_adam_frozen(np.eye(2), [1.0, 1.0, 1.0], 0.1)


class TestAdamAugmented:
    def test_momentum_off_reduces_to_frozen(self):
        rng = np.random.default_rng(1)
        H, M = random_spd_pair(rng, 4)
        aug = operators.build_adam_augmented(H, M, 0.05, 0.0)
        frozen = operators.build_adam_frozen(H, M, 0.05)
        assert np.array_equal(aug.J[:4, :4], frozen.J)
        assert np.all(aug.J[:4, 4:] == 0.0)
        assert np.array_equal(aug.J[4:, :4], H)
        assert np.all(aug.J[4:, 4:] == 0.0)
        w = np.linalg.eigvals(aug.J)
        w_frozen = np.linalg.eigvals(frozen.J)
        assert np.allclose(np.sort_complex(w), np.sort_complex(np.concatenate([w_frozen, np.zeros(4)])), atol=1e-10)

    def test_hand_example_n1(self):
        op = operators.build_adam_augmented([[2.0]], [1.0], 0.1, 0.9)
        assert np.allclose(op.J, [[0.98, -0.09], [0.2, 0.9]], atol=1e-15)

    def test_nonzero_momentum_always_nonnormal(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            H, M = random_spd_pair(rng, n)
            op = operators.build_adam_augmented(H, M, rng.uniform(0.01, 0.3), rng.uniform(0.1, 0.99))
            C = operators.normality_commutator(op.J)
            assert linalg.operator_norm_2(C) > 1e-8 * linalg.operator_norm_2(op.J) ** 2


class TestSgdmAugmented:
    def test_scalar_case_matches_toy_bit_for_bit(self):
        for lam, eta, beta in [(5.0, 0.18, 0.9), (1.0, 0.05, 0.5), (3.0, 0.2, 0.99)]:
            aug = operators.build_sgdm_augmented(np.array([[lam]]), eta, beta)
            toy = operators.build_scalar_toy(lam, eta, beta)
            assert np.array_equal(aug.J, toy.J)

    def test_momentum_off_spectrum(self):
        rng = np.random.default_rng(3)
        H, _ = random_spd_pair(rng, 3)
        op = operators.build_sgdm_augmented(H, 0.1, 0.0)
        w = np.sort_complex(np.linalg.eigvals(op.J))
        want = np.sort_complex(np.concatenate([np.linalg.eigvals(np.eye(3) - 0.1 * H), np.zeros(3)]))
        assert np.allclose(w, want, atol=1e-10)

    def test_block_diagonal_curvature_decouples(self):
        # diag(1, 5) splits into two independent scalar problems
        op = operators.build_sgdm_augmented(np.diag([1.0, 5.0]), 0.18, 0.9)
        w = np.linalg.eigvals(op.J)
        want = np.concatenate(
            [
                np.linalg.eigvals(operators.build_scalar_toy(1.0, 0.18, 0.9).J),
                np.linalg.eigvals(operators.build_scalar_toy(5.0, 0.18, 0.9).J),
            ]
        )
        assert np.allclose(np.sort_complex(w), np.sort_complex(want), atol=1e-12)

    def test_always_nonnormal(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(1, 6))
            H, _ = random_spd_pair(rng, n)
            op = operators.build_sgdm_augmented(H, rng.uniform(0.01, 0.5), rng.uniform(0.05, 0.99))
            C = operators.normality_commutator(op.J)
            assert linalg.operator_norm_2(C) > 1e-10 * linalg.operator_norm_2(op.J) ** 2


class TestScalarToy:
    def test_default_matrix(self):
        op = operators.build_scalar_toy(5.0, 0.18, 0.9)
        assert np.allclose(op.J, [[0.1, -0.162], [5.0, 0.9]], atol=1e-15)
        ed = linalg.eig(op.J)
        assert ed.spectral_radius == pytest.approx(np.sqrt(0.9), abs=1e-12)

    def test_no_momentum_theta_map_is_normal_scalar(self):
        op = operators.build_scalar_toy(5.0, 0.18, 0.0)
        # the step coordinate decouples: powers act as (1 - eta*lam)^t on it
        for t in (1, 3, 6):
            assert np.linalg.matrix_power(op.J, t)[0, 0] == pytest.approx(0.1**t, rel=1e-12)

    def test_commutator_vanishes_only_on_the_balance_line(self):
        eta, beta = 0.18, 0.9
        op = operators.build_scalar_toy(eta * beta, eta, beta)
        C = operators.normality_commutator(op.J)
        assert abs(C[0, 0]) <= 1e-14
        assert abs(C[1, 1]) <= 1e-14


class TestCommutators:
    def test_symmetric_input_is_normal(self):
        rng = np.random.default_rng(5)
        H, _ = random_spd_pair(rng, 6)
        assert operators.is_normal(H)

    def test_toy_commutator_diagonal(self):
        op = operators.build_scalar_toy(5.0, 0.18, 0.9)
        C = operators.normality_commutator(op.J)
        want = 0.162**2 - 25.0
        assert C[0, 0] == pytest.approx(want, rel=1e-12)
        assert C[1, 1] == pytest.approx(-want, rel=1e-12)

    def test_hm_commutator_examples(self):
        assert np.all(operators.hm_commutator(np.diag([2.0, 3.0]), [1.0, 5.0]) == 0.0)
        H = np.array([[1.0, 2.0], [2.0, 4.0]])
        assert np.all(operators.hm_commutator(H, [3.0, 3.0]) == 0.0)
        got = operators.hm_commutator(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 2.0])
        assert np.array_equal(got, [[0.0, 1.0], [-1.0, 0.0]])

    def test_diagonal_h_always_commutes(self):
        rng = np.random.default_rng(6)
        H = np.diag(rng.uniform(-2, 2, 5))
        M = rng.uniform(0.1, 4.0, 5)
        assert np.all(operators.hm_commutator(H, M) == 0.0)
        op = operators.build_adam_frozen(H, M, 0.1)
        assert operators.is_normal(op.J)

    def test_normality_iff_hm_commute(self):
        # both directions, scale-aware thresholds
        rng = np.random.default_rng(7)
        for trial in range(50):
            n = int(rng.integers(2, 7))
            H, M = random_spd_pair(rng, n)
            commuting = trial % 2 == 0
            if commuting:
                H = np.diag(rng.uniform(-2, 2, n))
            op = operators.build_adam_frozen(H, M, rng.uniform(0.01, 0.5))
            c_norm = linalg.operator_norm_2(operators.normality_commutator(op.J))
            hm_norm = linalg.operator_norm_2(operators.hm_commutator(H, M))
            j_scale = linalg.operator_norm_2(op.J) ** 2
            hm_scale = linalg.operator_norm_2(H) * M.max()
            assert (c_norm < 1e-10 * j_scale) == (hm_norm < 1e-10 * hm_scale)

    def test_commutator_closed_form(self):
        # J J^T - J^T J = eta^2 (M^-1 H^2 M^-1 - H M^-2 H) for the frozen operator
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            H, M = random_spd_pair(rng, n)
            eta = rng.uniform(0.01, 0.5)
            op = operators.build_adam_frozen(H, M, eta)
            direct = operators.normality_commutator(op.J)
            Minv = np.diag(1.0 / M)
            closed = eta**2 * (Minv @ H @ H @ Minv - H @ Minv @ Minv @ H)
            denom = max(linalg.operator_norm_2(direct), 1e-30)
            assert linalg.operator_norm_2(direct - closed) <= 1e-10 * denom
