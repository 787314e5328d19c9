import math

import numpy as np
import pytest

from nonnormal_lab import linalg

TOY_J = np.array([[0.1, -0.162], [5.0, 0.9]])


def closed_form_eig_2x2(J):
    """Independent quadratic-formula eigenpairs for a 2x2 matrix."""
    tr = complex(J[0, 0] + J[1, 1])
    det = complex(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    disc = np.sqrt(complex(tr * tr - 4.0 * det))
    return (tr + disc) / 2.0, (tr - disc) / 2.0


def closed_form_svals_2x2(J):
    G = np.asarray(J, dtype=complex).conj().T @ np.asarray(J, dtype=complex)
    tr = float((G[0, 0] + G[1, 1]).real)
    det = float((G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]).real)
    disc = math.sqrt(max(tr * tr - 4.0 * det, 0.0))
    return math.sqrt((tr + disc) / 2.0), math.sqrt(max((tr - disc) / 2.0, 0.0))


def closed_form_kappa_2x2(J):
    """Unit-column eigenvector condition number via the Gram off-diagonal."""
    z1, z2 = closed_form_eig_2x2(J)
    vecs = []
    for z in (z1, z2):
        a, b = J[0, 0] - z, J[0, 1]
        c, d = J[1, 0], J[1, 1] - z
        v = np.array([-b, a]) if max(abs(a), abs(b)) >= max(abs(c), abs(d)) else np.array([-d, c])
        vecs.append(v / np.linalg.norm(v))
    c = abs(np.vdot(vecs[0], vecs[1]))
    return math.sqrt((1.0 + c) / (1.0 - c))


class TestEig:
    def test_identity(self):
        ed = linalg.eig(np.eye(3))
        assert np.allclose(ed.eigenvalues, 1.0)
        assert ed.kappa_V == pytest.approx(1.0, abs=1e-12)
        assert ed.spectral_radius == pytest.approx(1.0, abs=1e-14)
        assert ed.diagonalizable

    def test_toy_eigenvalues(self):
        ed = linalg.eig(TOY_J)
        got = sorted(ed.eigenvalues, key=lambda z: z.imag)
        want = sorted([0.5 + 1j * math.sqrt(0.65), 0.5 - 1j * math.sqrt(0.65)], key=lambda z: z.imag)
        assert abs(got[0] - want[0]) <= 1e-10
        assert abs(got[1] - want[1]) <= 1e-10
        assert ed.spectral_radius == pytest.approx(math.sqrt(0.9), abs=1e-12)

    def test_toy_kappa_matches_independent_closed_form(self):
        # eigenvector conditioning confirmed against the quadratic-formula
        # route before the general solver is trusted anywhere else
        ed = linalg.eig(TOY_J)
        kappa_cf = closed_form_kappa_2x2(TOY_J)
        assert ed.kappa_V == pytest.approx(kappa_cf, rel=1e-9)
        assert ed.kappa_V == pytest.approx(6.242480262, rel=1e-8)

    def test_eigenvector_residuals_and_normalization(self):
        rng = np.random.default_rng(0)
        J = rng.standard_normal((12, 12))
        ed = linalg.eig(J)
        assert np.allclose(np.linalg.norm(ed.V, axis=0), 1.0, atol=1e-12)
        res = np.linalg.norm(J @ ed.V - ed.V * ed.eigenvalues, axis=0)
        assert res.max() <= linalg.TOL_EIG * linalg.operator_norm_2(J)

    def test_defective_input_flagged(self):
        ed = linalg.eig(np.array([[0.9, 1.0], [0.0, 0.9]]))
        assert not ed.diagonalizable
        assert ed.kappa_V > 1e12

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            linalg.eig(np.ones((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            linalg.eig(np.array([[1.0, np.nan], [0.0, 1.0]]))

    def test_size_guard(self):
        with pytest.raises(ValueError):
            linalg.eig(np.eye(linalg.MAX_DENSE_N + 1))


class TestOperatorNorm:
    def test_identity(self):
        assert linalg.operator_norm_2(np.eye(5)) == pytest.approx(1.0, abs=1e-14)

    def test_diagonal(self):
        assert linalg.operator_norm_2(np.diag([3.0, -7.0])) == pytest.approx(7.0, abs=1e-14)

    def test_toy_against_gram_polynomial(self):
        smax, _ = closed_form_svals_2x2(TOY_J)
        got = linalg.operator_norm_2(TOY_J)
        assert got == pytest.approx(smax, rel=1e-12)
        assert got == pytest.approx(5.080833271, rel=1e-9)


class TestSigmaMin:
    def test_identity(self):
        assert linalg.sigma_min(np.eye(4)) == pytest.approx(1.0, abs=1e-14)

    def test_nilpotent_is_zero(self):
        assert linalg.sigma_min(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0

    def test_shifted_jordan_closed_form(self):
        # sigma_min of [[r, -1], [0, r]] solves the 2x2 Gram polynomial
        r = 0.1
        want = math.sqrt((1.0 + 2.0 * r * r - math.sqrt(1.0 + 4.0 * r * r)) / 2.0)
        got = linalg.sigma_min(np.array([[r, -1.0], [0.0, r]]))
        assert got == pytest.approx(want, rel=1e-10)

    def test_inverse_norm_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            A = rng.standard_normal((6, 6)) + 3.0 * np.eye(6)
            prod = linalg.sigma_min(A) * linalg.operator_norm_2(np.linalg.inv(A))
            assert prod == pytest.approx(1.0, rel=1e-8)


class TestMatrixPowerNorms:
    def test_scaled_identity(self):
        norms = linalg.matrix_power_norms(0.5 * np.eye(3), 3)
        assert np.allclose(norms, [1.0, 0.5, 0.25, 0.125], atol=1e-14)

    def test_toy_transient_window(self):
        # spectrally stable (rho ~ 0.949) yet the powers stay large for
        # tens of steps; the rotating complex pair makes the sequence dip
        # below 1 first at t=22 and leave for good after t=32
        norms = linalg.matrix_power_norms(TOY_J, 60)
        assert norms[1] == pytest.approx(5.080833271, rel=1e-9)
        below = [t for t in range(1, 61) if norms[t] < 1.0]
        above = [t for t in range(1, 61) if norms[t] > 1.0]
        assert below[0] == 22
        assert above[-1] == 32

    def test_jordan_block_closed_form(self):
        lam, t_max = 0.9, 10
        norms = linalg.matrix_power_norms(np.array([[lam, 1.0], [0.0, lam]]), t_max)
        Jt = np.array([[lam**t_max, t_max * lam ** (t_max - 1)], [0.0, lam**t_max]])
        want, _ = closed_form_svals_2x2(Jt)
        assert norms[t_max] == pytest.approx(want, rel=1e-10)
        assert norms[t_max] == pytest.approx(3.905335799, rel=1e-9)

    def test_overflow_reported_as_inf(self):
        norms = linalg.matrix_power_norms(np.array([[1e200, 0.0], [0.0, 1e200]]), 3)
        assert norms[1] == 1e200
        assert math.isinf(norms[2])

    def test_t_max_validation(self):
        with pytest.raises(ValueError):
            linalg.matrix_power_norms(np.eye(2), 0)


class TestSpectralProperties:
    def test_transient_growth_bound(self):
        # ||J^t|| <= kappa(V) rho^t for diagonalizable J
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(2, 21))
            J = rng.standard_normal((n, n))
            J *= rng.uniform(0.5, 0.99) / linalg.eig(J).spectral_radius
            ed = linalg.eig(J)
            norms = linalg.matrix_power_norms(J, 50)
            bound = ed.kappa_V * ed.spectral_radius ** np.arange(51) + 1e-6
            assert np.all(norms <= bound)

    def test_symmetric_matrices_are_perfectly_conditioned(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            A = rng.standard_normal((8, 8))
            ed = linalg.eig(A + A.T)
            assert ed.kappa_V <= 1.0 + 1e-6

    def test_reconstruction(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            J = rng.standard_normal((7, 7))
            ed = linalg.eig(J)
            if not ed.diagonalizable:
                continue
            back = ed.V @ np.diag(ed.eigenvalues) @ np.linalg.inv(ed.V)
            assert np.linalg.norm(back - J, 2) <= 1e-6 * linalg.operator_norm_2(J)
