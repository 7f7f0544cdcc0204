import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speclearn.spectral import (
    CoeffSpectrum,
    FourierGrid,
    corrector_deriv,
    corrector_eval,
    dft_1d,
    dft_2d,
    dirichlet_basis,
    gauss_lobatto,
    hermitian_symmetrize,
    idft_1d,
    idft_2d,
    is_hermitian,
    legendre_deriv,
    legendre_eval,
)


def mp_legendre(n, x, dps=50):
    """Extended-precision recurrence oracle for L_n(x)."""
    import mpmath

    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        p_prev, p = mpmath.mpf(1), x
        if n == 0:
            return float(p_prev)
        for k in range(1, n):
            p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
        return float(p)


def naive_dft_1d(u):
    u = np.asarray(u, dtype=complex)
    n = u.size
    h = 2 * np.pi / n
    x = h * np.arange(n)
    k = np.arange(n)
    k[k > n // 2] -= n
    return h * np.array([np.sum(np.exp(-1j * xi * x) * u) for xi in k])


def naive_dft_2d(u):
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    h = 2 * np.pi / n
    x = h * np.arange(n)
    k = np.arange(n)
    k[k > n // 2] -= n
    out = np.empty((n, n), dtype=complex)
    for i, kx in enumerate(k):
        for j, ky in enumerate(k):
            phase = np.exp(-1j * (kx * x[:, None] + ky * x[None, :]))
            out[i, j] = h * h * np.sum(phase * u)
    return out


class TestLegendre:
    def test_degree_zero(self):
        assert legendre_eval(0, 0.37) == 1.0

    def test_degree_two_closed_form(self):
        assert legendre_eval(2, 0.5) == pytest.approx(-0.125, abs=1e-15)

    def test_against_extended_precision_recurrence(self):
        for n in (1, 3, 5, 12, 25):
            for x in (-0.9, -0.3, 0.0, 0.3, 0.77):
                assert legendre_eval(n, x) == pytest.approx(
                    mp_legendre(n, x), abs=1e-14, rel=1e-14
                )

    def test_endpoints(self):
        for n in range(12):
            assert legendre_eval(n, 1.0) == pytest.approx(1.0, abs=1e-13)
            assert legendre_eval(n, -1.0) == pytest.approx((-1.0) ** n, abs=1e-13)

    def test_deriv_matches_finite_difference(self):
        eps = 1e-6
        for n in (1, 2, 5, 9):
            for x in (-0.5, 0.1, 0.8):
                fd = (legendre_eval(n, x + eps) - legendre_eval(n, x - eps)) / (2 * eps)
                assert legendre_deriv(n, x) == pytest.approx(fd, rel=1e-8, abs=1e-8)


class TestGaussLobatto:
    def test_two_nodes(self):
        nodes, weights = gauss_lobatto(2)
        assert np.allclose(nodes, [-1, 1])
        assert np.allclose(weights, [1, 1])

    def test_three_nodes(self):
        nodes, weights = gauss_lobatto(3)
        assert np.allclose(nodes, [-1, 0, 1], atol=1e-15)
        assert np.allclose(weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)

    def test_degree_sixteen_with_ten_nodes(self):
        nodes, weights = gauss_lobatto(10)
        assert np.sum(weights * nodes**16) == pytest.approx(2 / 17, abs=1e-13)

    @pytest.mark.parametrize("M", range(2, 21))
    def test_exactness_up_to_2m_minus_3(self, M):
        nodes, weights = gauss_lobatto(M)
        for d in range(0, 2 * M - 2):
            exact = 0.0 if d % 2 == 1 else 2.0 / (d + 1)
            assert np.sum(weights * nodes**d) == pytest.approx(exact, abs=1e-12)

    def test_nodes_increasing_weights_positive(self):
        for M in (2, 5, 12, 33):
            nodes, weights = gauss_lobatto(M)
            assert np.all(np.diff(nodes) > 0)
            assert np.all(weights > 0)
            assert np.sum(weights) == pytest.approx(2.0, abs=1e-12)


class TestDirichletBasis:
    def test_first_function_closed_form(self):
        basis = dirichlet_basis(1)
        expected = 1.5 * (1 - basis.nodes**2)
        assert np.allclose(basis.values[0], expected, atol=1e-13)

    def test_boundary_annihilation(self):
        basis = dirichlet_basis(9)
        assert np.all(np.abs(basis.values[:, 0]) <= 1e-12)
        assert np.all(np.abs(basis.values[:, -1]) <= 1e-12)

    def test_quadrature_orthogonality_pattern(self):
        # Exact integral: phi_m phi_n integrates to zero unless |m-n| in {0, 2},
        # by L_n orthogonality.  Checked through the basis quadrature rule.
        basis = dirichlet_basis(8)
        gram = basis.mass_matrix()
        for m in range(8):
            for n in range(8):
                if abs(m - n) not in (0, 2):
                    assert abs(gram[m, n]) <= 1e-12

    def test_mass_matrix_against_exact_formula(self):
        # integral of (L_m - L_{m+2})(L_n - L_{n+2}) from L_k orthogonality.
        N = 6
        basis = dirichlet_basis(N)
        gram = basis.mass_matrix()

        def ll(a, b):
            return 2.0 / (2 * a + 1) if a == b else 0.0

        for m in range(N):
            for n in range(N):
                exact = ll(m, n) - ll(m, n + 2) - ll(m + 2, n) + ll(m + 2, n + 2)
                # quadrature exact for degree <= 2M-3 = 2N+1; only the
                # highest diagonal entry exceeds it
                if m + n + 4 <= 2 * (N + 2) - 3:
                    assert gram[m, n] == pytest.approx(exact, abs=1e-12)

    def test_custom_node_count(self):
        basis = dirichlet_basis(4, M=12)
        assert basis.M == 12
        assert basis.values.shape == (4, 12)


class TestCorrector:
    def test_vanishes_at_endpoints(self):
        for nu in (1.0, 0.1, 1e-3, 1e-6):
            assert corrector_eval(nu, -1.0) == 0.0
            assert abs(corrector_eval(nu, 1.0)) <= 1e-15

    def test_against_extended_precision(self):
        import mpmath

        with mpmath.workdps(50):
            nu = mpmath.mpf("0.1")
            x = mpmath.mpf("0.0")
            exact = mpmath.exp(-(1 + x) / nu) - (
                1 - (1 - mpmath.exp(-2 / nu)) / 2 * (x + 1)
            )
            exact = float(exact)
        assert corrector_eval(0.1, 0.0) == pytest.approx(exact, abs=1e-14)

    def test_tiny_nu_underflow_is_clean(self):
        vals = corrector_eval(1e-6, np.linspace(-0.9, 1.0, 11))
        assert np.all(np.isfinite(vals))

    def test_deriv_matches_finite_difference(self):
        nu = 0.3
        for x in (-0.4, 0.0, 0.6):
            eps = 1e-7
            fd = (corrector_eval(nu, x + eps) - corrector_eval(nu, x - eps)) / (2 * eps)
            assert corrector_deriv(nu, x) == pytest.approx(fd, rel=1e-7)


class TestFourierGrid:
    def test_wavenumber_labels(self):
        grid = FourierGrid(8)
        assert list(grid.wavenumbers) == [0, 1, 2, 3, 4, -3, -2, -1]

    def test_nodes(self):
        grid = FourierGrid(4)
        assert np.allclose(grid.nodes, [0, np.pi / 2, np.pi, 3 * np.pi / 2])

    def test_odd_rejected(self):
        with pytest.raises(ValueError):
            FourierGrid(7)

    def test_deriv_symbol_zeroes_nyquist(self):
        grid = FourierGrid(8)
        sym = grid.deriv_symbol()
        assert sym[4] == 0
        assert sym[1] == 1j
        assert sym[-1] == -1j


class TestTransforms1D:
    def test_constant_field(self):
        spec = dft_1d(np.ones(8))
        assert spec.values[0] == pytest.approx(2 * np.pi, abs=1e-12)
        assert np.all(np.abs(spec.values[1:]) <= 1e-12)

    def test_cosine_two_modes(self):
        grid = FourierGrid(8)
        spec = dft_1d(np.cos(grid.nodes))
        vals = spec.values
        assert vals[1] == pytest.approx(np.pi, abs=1e-12)
        assert vals[-1] == pytest.approx(np.pi, abs=1e-12)
        mask = np.ones(8, bool)
        mask[[1, 7]] = False
        assert np.all(np.abs(vals[mask]) <= 1e-12)

    def test_matches_naive_sum_and_roundtrips(self):
        rng = np.random.default_rng(0)
        u = rng.standard_normal(32)
        spec = dft_1d(u)
        assert np.max(np.abs(spec.values - naive_dft_1d(u))) <= 1e-10
        assert np.max(np.abs(idft_1d(spec) - u)) <= 1e-12

    def test_complex_roundtrip(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        spec = dft_1d(u)
        assert not spec.real_field
        assert np.max(np.abs(idft_1d(spec) - u)) <= 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(2)
        u = rng.standard_normal(64)
        spec = dft_1d(u)
        h = 2 * np.pi / 64
        lhs = h * np.sum(np.abs(u) ** 2)
        rhs = np.sum(np.abs(spec.values) ** 2) / (2 * np.pi)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_roundtrip_property(self, half_n, seed):
        n = 2 * half_n
        u = np.random.default_rng(seed).standard_normal(n)
        assert np.max(np.abs(idft_1d(dft_1d(u)) - u)) <= 1e-12

    def test_hermitian_closure_is_bitexact(self):
        u = np.random.default_rng(3).standard_normal(24)
        spec = dft_1d(u)
        assert is_hermitian(spec.values)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        u, v = rng.standard_normal((2, 16))
        left = dft_1d(2.5 * u - 0.5 * v).values
        right = 2.5 * dft_1d(u).values - 0.5 * dft_1d(v).values
        assert np.max(np.abs(left - right)) <= 1e-12


class TestTransforms2D:
    def test_constant_field(self):
        spec = dft_2d(np.ones((8, 8)))
        assert spec.values[0, 0] == pytest.approx((2 * np.pi) ** 2, abs=1e-10)
        other = spec.values.copy()
        other[0, 0] = 0
        assert np.max(np.abs(other)) <= 1e-10

    def test_separable_cosines(self):
        grid = FourierGrid(8, dims=2)
        x = grid.nodes
        u = np.cos(x)[:, None] * np.cos(x)[None, :]
        vals = dft_2d(u).values
        hits = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        mags = [abs(vals[i, j]) for i, j in hits]
        assert np.allclose(mags, mags[0], rtol=1e-12)
        assert mags[0] == pytest.approx(np.pi**2, abs=1e-10)

    def test_matches_naive_double_sum_and_roundtrips(self):
        rng = np.random.default_rng(5)
        u = rng.standard_normal((16, 16))
        spec = dft_2d(u)
        assert np.max(np.abs(spec.values - naive_dft_2d(u))) <= 1e-9
        assert np.max(np.abs(idft_2d(spec) - u)) <= 1e-12

    def test_parseval_2d(self):
        rng = np.random.default_rng(6)
        u = rng.standard_normal((12, 12))
        spec = dft_2d(u)
        h = 2 * np.pi / 12
        lhs = h * h * np.sum(np.abs(u) ** 2)
        rhs = np.sum(np.abs(spec.values) ** 2) / (2 * np.pi) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_hermitian_closure_2d(self):
        u = np.random.default_rng(7).standard_normal((10, 10))
        assert is_hermitian(dft_2d(u).values)


class TestHermitianHelpers:
    def test_symmetrize_idempotent(self):
        a = np.random.default_rng(8).standard_normal(16) + 1j * np.random.default_rng(
            9
        ).standard_normal(16)
        s = hermitian_symmetrize(a)
        assert is_hermitian(s)
        assert np.array_equal(hermitian_symmetrize(s), s)

    def test_spectrum_validation(self):
        with pytest.raises(ValueError):
            CoeffSpectrum(np.array([1.0, 2.0 + 1j, 3.0, 4.0]), real_field=True)

    def test_batched_symmetrize(self):
        a = np.random.default_rng(10).standard_normal((3, 8)).astype(complex)
        a += 1j * np.random.default_rng(11).standard_normal((3, 8))
        s = hermitian_symmetrize(a, 1)
        for row in s:
            assert is_hermitian(row)
