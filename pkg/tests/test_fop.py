import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GAP_FIXTURES, M_A, M_B, M_B_EXT, M_C, M_E, NU1_TWO, measure_family, pivot_growth, random_measure
from fopgauss import (
    DEFAULT_TOLERANCES,
    HorizonExceeded,
    NotQuasiDefinite,
    Polynomial,
    SingularAlphaSystem,
    TripletFunctional,
    analysis_from_pattern,
    assemble_block_tridiagonal,
    build_fop_sequence,
    determinant_sequence,
    jacobi_matrix,
    verify_orthogonality,
)


def charpoly(T: np.ndarray) -> np.ndarray:
    """Coefficients of det(lambda I - T), lowest degree first."""
    return np.poly(T)[::-1] if T.size else np.ones(1)


def rel_coeff_error(a, b) -> float:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def test_m_e_polynomials():
    seq = build_fop_sequence(M_E, 2)
    assert seq[1].allclose(Polynomial([-1, 1]))
    assert seq[2].allclose(Polynomial([0, 0, 1]), atol=1e-14)
    assert all(k.regular for k in seq.kinds)


def test_m_b_gap_fill():
    seq = build_fop_sequence(M_B_EXT, 3)
    assert seq[1] == Polynomial([0, 1])
    assert seq[2] == Polynomial([0, 0, 1])
    assert not seq.kinds[2].regular and seq.kinds[2].order == 1
    assert seq.kinds[3].regular and seq[3].allclose(Polynomial([-1, 0, 0, 1]))
    assert seq.nu == (0, 1, 3)
    assert seq.alphas[(2, 1)] == 0
    assert seq.gammas[3] == pytest.approx(1.0)


def test_m_b_needs_moment_five():
    with pytest.raises(HorizonExceeded):
        build_fop_sequence(M_B, 3)


def test_centered_point():
    assert build_fop_sequence([1, 0], 1)[1] == Polynomial([0, 1])


def test_block_tridiagonal_examples():
    T = assemble_block_tridiagonal(build_fop_sequence([1, 0, 1 / 3], 1))
    np.testing.assert_allclose(T.matrix, [[0]])
    T = assemble_block_tridiagonal(build_fop_sequence(M_A, 1))
    np.testing.assert_allclose(T.matrix, [[1]])
    T = assemble_block_tridiagonal(build_fop_sequence(M_B_EXT, 3))
    np.testing.assert_allclose(T.matrix, [[0, 1, 0], [0, 0, 1], [1, 0, 0]], atol=1e-15)
    assert T.gamma_positions == ((2, 0),)
    assert np.all(np.triu(T.matrix, 2) == 0)
    assert T.nu[:3] == (0, 1, 3)


def test_jacobi_examples():
    J = jacobi_matrix([1, 0.25], 1)
    np.testing.assert_allclose(J.matrix, [[0.25]])
    J = jacobi_matrix(M_C, 2)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(J.matrix).real), [1, 3], atol=1e-13)
    np.testing.assert_allclose(J.matrix, J.matrix.T)
    with pytest.raises(NotQuasiDefinite):
        jacobi_matrix([1, 0, 0], 2)


def test_jacobi_principal_roots():
    # moments with m_0 < 0 force a complex normalization
    J = jacobi_matrix([-2, 1, -3, 2], 2)
    beta = J.matrix[0, 1]
    assert -np.pi / 2 < np.angle(beta) <= np.pi / 2


def test_orthogonality_examples():
    seq = build_fop_sequence(M_E, 2)
    rep = verify_orthogonality(M_E, seq)
    assert rep.absolute[2] == 0
    seq = build_fop_sequence(M_B_EXT, 3)
    rep = verify_orthogonality(M_B_EXT, seq)
    # p_1 = lambda is orthogonal to lambda as well, since Delta_1 = 0
    assert 1 in rep.extended_absolute and rep.extended_absolute[1] == 0
    assert rep.ok()


def test_singular_alpha_system_on_inconsistent_pattern():
    # pretending Delta_1 != 0 for M_B makes the block Gram system singular
    with pytest.raises(SingularAlphaSystem):
        build_fop_sequence(M_B_EXT, 2, analysis_from_pattern("xxx"))


def _all_fixture_sequences():
    """(name, moments, n) for every fixture and every n <= 8 the moments support."""
    out = []
    named = {"M_A": M_A, "M_C": M_C, "M_E": M_E, "nu1_two": NU1_TWO, **GAP_FIXTURES}
    for name, m in named.items():
        K = len(m) - 1
        for n in range(1, min(8, (K + 1) // 2) + 1):
            out.append((name, m, n))
    for i, mu in enumerate(measure_family(5, 16)):
        m = mu.moments(2 * mu.n + 2)
        for n in range(1, mu.n + 1):
            out.append((f"measure_{i}", m, n))
    return out


@pytest.mark.parametrize("name,m,n", _all_fixture_sequences())
def test_characteristic_polynomial_identity(name, m, n):
    seq = build_fop_sequence(m, n)
    T = assemble_block_tridiagonal(seq)
    assert rel_coeff_error(charpoly(T.matrix), seq[n].coeffs) <= DEFAULT_TOLERANCES.residual_tol


@pytest.mark.parametrize("name,m,n", _all_fixture_sequences())
def test_matrix_recurrence_rows(name, m, n):
    """lambda p = T_n p + beta_n p_n e_n, row by row, as polynomial identities."""
    seq = build_fop_sequence(m, n)
    T = assemble_block_tridiagonal(seq).matrix
    for r in range(n):
        lhs = seq[r].mulx()
        rhs = seq[n] * seq.betas[n - 1] if r == n - 1 else Polynomial([0])
        for j in range(n):
            if T[r, j] != 0:
                rhs = rhs + seq[j] * T[r, j]
        scale = max(1.0, float(np.max(np.abs(lhs.coeffs))))
        diff = (lhs - rhs).coeffs
        assert np.max(np.abs(diff)) <= 1e-12 * scale


@pytest.mark.parametrize("name", list(GAP_FIXTURES))
def test_gap_polynomials_factor(name):
    m = GAP_FIXTURES[name]
    n = len(m) // 2
    seq = build_fop_sequence(m, n)
    for k in range(n + 1):
        t = seq.block_of(k)
        base = seq[seq.nu[t]]
        q, r = seq[k].divmod(base)
        assert r.is_zero() or np.max(np.abs(r.coeffs)) < 1e-12
        assert q.allclose(Polynomial.monomial(k - seq.nu[t]), atol=1e-12)


@pytest.mark.parametrize("name", list(GAP_FIXTURES))
def test_gap_fixture_orthogonality(name):
    m = GAP_FIXTURES[name]
    n = len(m) // 2
    seq = build_fop_sequence(m, n)
    assert verify_orthogonality(m, seq).ok()


def test_triplet_functional_sequence():
    A = np.diag([1.0, 2.0, 3.0])
    f = TripletFunctional(np.ones(3), A, np.ones(3))
    seq = build_fop_sequence(f, 3)
    assert seq[3].allclose(Polynomial.from_roots([1, 2, 3]))
    rep = verify_orthogonality(f, seq)
    assert rep.ok()
    # tail certified: p_3 annihilates everything
    assert rep.extended_relative[3] <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans())
def test_quasi_definite_jacobi_similar(seed, max_mult, complex_nodes):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, int(rng.integers(1, 4)), complex_nodes, max_mult, 1)
    m = mu.moments(2 * mu.n)
    n = mu.n
    T = assemble_block_tridiagonal(build_fop_sequence(m, n)).matrix
    J = jacobi_matrix(m, n).matrix
    assert rel_coeff_error(charpoly(J), charpoly(T)) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_random_measure_orthogonality(seed, nu1):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, int(rng.integers(nu1, 5)), bool(seed % 2), 2, nu1)
    m = mu.moments(2 * mu.n + 2)
    seq = build_fop_sequence(m, mu.n)
    assert seq.nu[1] == nu1
    assert verify_orthogonality(m, seq).ok()
    for k, p in enumerate(seq.polys):
        assert p.degree == k and p.leading == 1


@pytest.mark.parametrize("name", ["M_C", "M_E", "nu1_two", *GAP_FIXTURES])
def test_exact_sequence_matches_float(name):
    m = {"M_C": M_C, "M_E": M_E, "nu1_two": NU1_TWO, **GAP_FIXTURES}[name]
    n = len(m) // 2
    a = determinant_sequence(m, exact=True)
    fl = build_fop_sequence(m, n, a)
    ex = build_fop_sequence(m, n, a, exact=True)
    assert ex.nu == fl.nu
    for p, q in zip(ex.polys, fl.polys):
        assert p.allclose(q, atol=1e-10)


def test_exact_recurrence_near_breakdown():
    """Small Delta_3 between large neighbours: the rounded exact T keeps the moments to roundoff."""
    m = [1, 0, -3, 0, -3, 1, -3, -2, 0, 0, 0, 0]
    a = determinant_sequence(m, exact=True)
    T = assemble_block_tridiagonal(build_fop_sequence(m, 6, a, exact=True))
    assert T.matrix[4, 3] == pytest.approx(-2264)
    y = np.zeros(6, dtype=complex)
    y[0] = 1.0
    got = []
    for _ in range(11):
        got.append(y[0])
        y = T.matrix @ y
    assert np.max(np.abs(np.array(got) - m[:11])) <= 1e-11


def test_near_breakdown_needs_exact_recurrence():
    """A small Delta_1 costs the floating recurrence digits; exact mode keeps them."""
    rng = np.random.default_rng(653295)
    mu = random_measure(rng, int(rng.integers(1, 4)), False, 2, 1, max_growth=np.inf)
    m = mu.moments(2 * mu.n)
    n = mu.n
    assert pivot_growth(m, n) > 1e5
    want = np.poly(np.repeat(mu.nodes, [len(w) for w in mu.weights]))[::-1]
    exact = assemble_block_tridiagonal(build_fop_sequence(m, n, exact=True)).matrix
    assert rel_coeff_error(charpoly(exact), want) <= 1e-9
