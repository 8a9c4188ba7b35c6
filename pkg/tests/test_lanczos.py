import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import M_B, M_C, measure_family, measure_triplet
from fopgauss import (
    DEFAULT_TOLERANCES,
    BreakdownKind,
    TripletFunctional,
    ZeroInitialCoupling,
    assemble_block_tridiagonal,
    build_fop_sequence,
    classify_breakdown,
    determinant_sequence,
    lanczos,
    look_ahead_lanczos,
    matching_moment_check,
    trivial_realization,
)
from fopgauss.lanczos import StopReason, block_biorthogonality_residual, krylov_residuals
from fopgauss.quadrature import guaranteed_matching_range

TOL = DEFAULT_TOLERANCES


def charpoly(T):
    return np.poly(T) if T.size else np.ones(1)


def rel_err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))


def m_a_source():
    return np.diag([1.0, 2.0]), np.array([1.0, 1.0]), np.array([1.0, 0.0])


def analysis_of(A, v, w):
    return determinant_sequence(TripletFunctional(w, A, v))


def diagonal_source(m):
    """Diagonal triplet with the two-point measure behind ``M_C``."""
    return np.diag([1.0, 3.0]), np.ones(2) / np.sqrt(2), np.ones(2) / np.sqrt(2)


def test_hermitian_two_point():
    A, v, w = diagonal_source(M_C)
    state, rep = lanczos(A, v, w)
    assert rep.kind is BreakdownKind.NONE and state.stop is StopReason.EXHAUSTED
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(state.T.matrix).real), [1, 3], atol=1e-13)
    np.testing.assert_allclose(state.W.conj().T @ state.V, np.eye(2), atol=1e-14)
    # same moments as M_C, hence the same Jacobi matrix spectrum
    T = assemble_block_tridiagonal(build_fop_sequence(M_C, 2))
    assert rel_err(charpoly(state.T.matrix), charpoly(T.matrix)) < 1e-12


def test_m_a_source_stops_after_one_step():
    A, v, w = m_a_source()
    state, rep = lanczos(A, v, w)
    assert state.step == 1 and rep.kind is BreakdownKind.LUCKY
    assert state.stop is StopReason.W_VANISHED
    np.testing.assert_allclose(state.T.matrix, [[1]])
    cls = classify_breakdown(state, analysis_of(A, v, w))
    assert cls.kind is BreakdownKind.INCURABLE and cls.step == 1


def test_zero_initial_coupling():
    with pytest.raises(ZeroInitialCoupling):
        lanczos(np.eye(2), [1, 0], [0, 1])


def test_dimension_checks():
    with pytest.raises(ValueError):
        lanczos(np.eye(2), [1, 0, 0], [1, 0])
    with pytest.raises(ValueError):
        look_ahead_lanczos(np.eye(2), [0, 0], [1, 0])


def test_look_ahead_bridges_m_b_gap():
    t = trivial_realization(M_B)
    state, _ = look_ahead_lanczos(t.A, t.v, t.w)
    assert state.nu[:3] == (0, 1, 3)
    assert state.blocks()[:2] == [(0, 1), (1, 3)]
    assert block_biorthogonality_residual(state) <= TOL.residual_tol
    assert max(krylov_residuals(state)) <= TOL.residual_tol
    T3 = state.T.matrix[:3, :3]
    ref = assemble_block_tridiagonal(build_fop_sequence(M_B + [0] * 7, 3)).matrix
    assert rel_err(charpoly(T3), charpoly(ref)) <= 1e-12


def test_plain_lanczos_on_m_b_is_serious():
    t = trivial_realization(M_B)
    state, rep = lanczos(t.A, t.v, t.w)
    assert rep.kind is BreakdownKind.SERIOUS and state.step == 1
    cls = classify_breakdown(state, determinant_sequence(t.functional()))
    assert cls.kind is BreakdownKind.SERIOUS


def test_identity_is_lucky():
    A = np.eye(3)
    v, w = np.array([1.0, 2, 3]), np.array([1.0, 0, 0])
    for run in (lanczos, look_ahead_lanczos):
        state, rep = run(A, v, w)
        assert state.step == 1 and rep.kind is BreakdownKind.LUCKY
        np.testing.assert_allclose(state.T.matrix, [[1]])
        assert classify_breakdown(state, analysis_of(A, v, w)).kind is BreakdownKind.LUCKY


def test_look_ahead_quasi_definite_blocks_are_scalar():
    A, v, w = diagonal_source(M_C)
    state, _ = look_ahead_lanczos(A, v, w)
    assert all(hi - lo == 1 for lo, hi in state.blocks())
    plain, _ = lanczos(A, v, w)
    assert rel_err(charpoly(state.T.matrix), charpoly(plain.T.matrix)) < 1e-12


def test_n_max_limits_and_truncation():
    t = trivial_realization(M_B)
    state, rep = look_ahead_lanczos(t.A, t.v, t.w, n_max=2)
    assert state.step == 2 and state.truncated and rep.kind is BreakdownKind.NONE
    assert "open block" in rep.detail


def test_incurable_bound_stop():
    # w sees one eigencomponent only: moments 1, 1, 1, ... of rank one
    A = np.diag([1.0, 2.0, 3.0])
    v, w = np.ones(3), np.array([1.0, 0, 0])
    state, rep = look_ahead_lanczos(A, v, w)
    cls = classify_breakdown(state, analysis_of(A, v, w))
    assert cls.kind is BreakdownKind.INCURABLE and state.block_start == 1


def _random_triplet(seed, N, complex_entries):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(N, N))
    v, w = rng.normal(size=N), rng.normal(size=N)
    if complex_entries:
        A = A + 1j * rng.normal(size=(N, N))
        v, w = v + 1j * rng.normal(size=N), w + 1j * rng.normal(size=N)
    return A / np.sqrt(N), v, w


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.booleans())
def test_krylov_identity_on_random_triplets(seed, N, complex_entries):
    A, v, w = _random_triplet(seed, N, complex_entries)
    for run in (lanczos, look_ahead_lanczos):
        state, _ = run(A, v, w, n_max=N)
        assert max(krylov_residuals(state)) <= TOL.residual_tol


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_plain_and_look_ahead_agree(seed, complex_nodes):
    A, v, w, mu = measure_triplet(seed, complex_nodes)
    plain, _ = lanczos(A, v, w)
    la, _ = look_ahead_lanczos(A, v, w)
    assert plain.step == la.step == mu.n
    assert all(hi - lo == 1 for lo, hi in la.blocks())
    for state in (plain, la):
        assert max(krylov_residuals(state)) <= TOL.residual_tol
        assert block_biorthogonality_residual(state) <= TOL.residual_tol
    assert rel_err(charpoly(plain.T.matrix), charpoly(la.T.matrix)) <= 1e-8
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(la.T.matrix)), np.sort_complex(mu.nodes), atol=1e-8)


@pytest.mark.parametrize("index", range(12))
def test_look_ahead_matches_fop_on_measures(index):
    """Look-ahead on the trivial realization of a measure stream reproduces the block structure of T."""
    mu = measure_family(17, 12)[index]
    m = list(mu.moments(2 * mu.n + 2))
    t = trivial_realization(m)
    state, _ = look_ahead_lanczos(t.A, t.v, t.w)
    a = determinant_sequence(m)
    n = mu.n
    assert state.step >= n
    assert state.nu[: len([x for x in a.regular_indices if x <= n])] == tuple(x for x in a.regular_indices if x <= n)
    T = state.T.matrix[:n, :n]
    ref = assemble_block_tridiagonal(build_fop_sequence(m, n, a)).matrix
    assert rel_err(charpoly(T), charpoly(ref)) <= 1e-8
    # past degree n the zero-padded tail drives the run; without
    # reorthogonalization biorthogonality is only checked up to n
    head, _ = look_ahead_lanczos(t.A, t.v, t.w, n_max=n)
    assert block_biorthogonality_residual(head) <= TOL.residual_tol
    assert max(krylov_residuals(head)) <= TOL.residual_tol
    # moment consistency through the matrix produced by look-ahead
    k = guaranteed_matching_range(a, n)
    k = len(m) - 1 if k is None else min(k, len(m) - 1)
    ref_T = assemble_block_tridiagonal(build_fop_sequence(m, n, a))
    assert matching_moment_check(ref_T, m, k).max_residual <= TOL.residual_tol
