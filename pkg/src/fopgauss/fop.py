"""Formal orthogonal polynomials, gap-filling quasi-orthogonal polynomials, and the matrix T_n."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _exact
from .core import (
    DEFAULT_TOLERANCES,
    Polynomial,
    TolerancePolicy,
    as_functional,
    principal_sqrt,
)
from .exceptions import InsufficientPattern, NotQuasiDefinite, SingularAlphaSystem
from .hankel import HankelAnalysis, determinant_sequence

__all__ = [
    "PolyKind",
    "FopSequence",
    "BlockTridiagonal",
    "OrthogonalityReport",
    "build_fop_sequence",
    "assemble_block_tridiagonal",
    "jacobi_matrix",
    "verify_orthogonality",
    "default_analysis",
]


@dataclass(frozen=True)
class PolyKind:
    """Orthogonality type of ``p_m``.

    ``regular`` marks a unique FOP. Otherwise ``order`` is the quasi-orthogonality
    order ``q``: ``L(p_m lambda^j) = 0`` for ``j <= m - q - 1``. Order 0 means
    ``p_m`` is a (non-unique) FOP.
    """

    regular: bool
    order: int = 0

    def __str__(self):
        return "regular" if self.regular else f"quasi-orthogonal({self.order})"


@dataclass(frozen=True)
class FopSequence:
    """Monic polynomials ``p_0 .. p_n`` with their recurrence coefficients.

    Attributes
    ----------
    polys : tuple of Polynomial
        ``p_m`` is monic of exact degree ``m``.
    kinds : tuple of PolyKind
    alphas : dict
        ``(m, i) -> alpha_{m,i}``, the block coefficients of the recurrence for ``p_m``.
    betas : tuple of complex
        ``beta_1 .. beta_n``; all equal to one for monic polynomials.
    gammas : dict
        ``m -> gamma_m`` for regular ``m = nu(t)``, ``t >= 2``.
    nu : tuple of int
        Regular indices ``nu(0) = 0, nu(1), ...`` up to ``n``.
    next_regular : int or None
        First regular index beyond ``n``, if known from the analysis.
    """

    polys: tuple[Polynomial, ...]
    kinds: tuple[PolyKind, ...]
    alphas: dict[tuple[int, int], complex]
    betas: tuple[complex, ...]
    gammas: dict[int, complex]
    nu: tuple[int, ...]
    next_regular: int | None = None
    analysis: HankelAnalysis | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.polys) - 1

    def __getitem__(self, m: int) -> Polynomial:
        return self.polys[m]

    def block_of(self, m: int) -> int:
        """Index ``t`` with ``nu(t) <= m < nu(t+1)``."""
        return max(t for t, nu in enumerate(self.nu) if nu <= m)


@dataclass(frozen=True)
class BlockTridiagonal:
    """Lower Hessenberg matrix ``T_n`` encoding the recurrences row by row.

    Row ``m`` (0-based) holds ``lambda p_m = p_{m+1} + sum_j T[m, j] p_j``
    with ``T[m, m+1] = beta_{m+1}``, so ``lambda p = T p + beta_n p_n e_n``.
    """

    matrix: np.ndarray
    nu: tuple[int, ...]
    betas: tuple[complex, ...]
    gamma_positions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        T = np.array(self.matrix, dtype=complex)
        T.setflags(write=False)
        object.__setattr__(self, "matrix", T)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nu1(self) -> int:
        return self.nu[1] if len(self.nu) > 1 else self.n + 1

    @property
    def mu(self) -> complex:
        """``1 / (beta_1 ... beta_{nu(1)-1})``, one when ``nu(1) = 1``."""
        k = min(self.nu1, self.n) - 1
        return complex(1.0 / np.prod(np.diag(self.matrix, 1)[:k])) if k > 0 else 1.0 + 0j

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2)) if self.n else 0.0

    def balanced_norm(self) -> float:
        """2-norm after diagonal balancing, the scale seen by the eigensolver."""
        if not self.n:
            return 0.0
        B, _ = sla.matrix_balance(self.matrix)
        return float(np.linalg.norm(B, 2))


@dataclass(frozen=True)
class OrthogonalityReport:
    """Orthogonality residuals ``|L(p_m lambda^j)|`` per polynomial.

    ``absolute[m]`` and ``relative[m]`` are maxima over the range promised by
    ``kinds[m]``; ``extended`` covers regular polynomials up to degree
    ``nu(t+1) - 2`` (as far as the moments allow). Relative values divide by
    the normwise scale ``sum_i |c_i| * max_i |m_{i+j}|``.
    """

    absolute: tuple[float, ...]
    relative: tuple[float, ...]
    extended_absolute: dict[int, float]
    extended_relative: dict[int, float]

    @property
    def max_residual(self) -> float:
        vals = list(self.relative) + list(self.extended_relative.values())
        return max(vals, default=0.0)

    def ok(self, tol: TolerancePolicy = DEFAULT_TOLERANCES) -> bool:
        return self.max_residual <= tol.residual_tol


def default_analysis(functional, tol: TolerancePolicy = DEFAULT_TOLERANCES, exact: bool = False) -> HankelAnalysis:
    """Determinant analysis over everything the functional supports."""
    f = as_functional(functional)
    return determinant_sequence(f, None, tol, exact)


def _exact_step(em, ep, lo, m, nu, alphas, gammas) -> list:
    """Exact version of one regular step; records rounded coefficients and returns ``p_m``."""
    GR = _exact.GaussianRational

    def L(p):
        return _exact.apply_moments(em, p)

    q = [GR(0)] + ep[m - 1]
    block = range(lo, m)
    G = [[L(_exact.poly_mul(ep[j], ep[i])) for i in block] for j in block]
    rhs = [L(_exact.poly_mul(q, ep[j])) for j in block]
    a = _exact.solve(G, rhs)
    if a is None:
        raise SingularAlphaSystem(f"Gram system for p_{m} over block {lo}..{m - 1} is singular")
    p = q
    for i, ai in zip(block, a):
        alphas[(m, i)] = complex(ai)
        p = [c - ai * (ep[i][k] if k < len(ep[i]) else GR(0)) for k, c in enumerate(p)]
    if len(nu) >= 2:
        prev = nu[-2]
        g = L(_exact.poly_mul(q, ep[lo - 1])) / L(_exact.poly_mul(ep[lo - 1], ep[prev]))
        gammas[m] = complex(g)
        p = [c - g * (ep[prev][k] if k < len(ep[prev]) else GR(0)) for k, c in enumerate(p)]
    return p


def _gap_order(m: int, nu_t: int, analysis: HankelAnalysis) -> int:
    """Quasi-orthogonality order of ``lambda^(m - nu_t) p_{nu_t}``."""
    if nu_t == m:
        return 0
    nxt = analysis.next_regular_after(nu_t)
    if nxt is None:
        if analysis.tail_certified:
            return 0
        # only a lower bound on the zero run is known
        nxt = analysis.computed + 1
    # p_{nu_t} is orthogonal to all degrees <= nxt - 2
    return max(0, 2 * m - nu_t - nxt + 1)


def build_fop_sequence(
    functional,
    n: int,
    analysis: HankelAnalysis | None = None,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
    exact: bool = False,
) -> FopSequence:
    """Build monic ``p_0 .. p_n``.

    Inside a gap ``nu(t) < m < nu(t+1)`` the polynomial is ``lambda p_{m-1}``.
    At ``m = nu(t+1)`` the block recurrence

        p_m = lambda p_{m-1} - sum_{i=nu(t)}^{m-1} alpha_{m,i} p_i - gamma_m p_{nu(t-1)}

    is used, with the ``alpha`` solving the Gram system over the block and
    ``gamma_m = L(lambda p_{m-1} p_{nu(t)-1}) / L(p_{nu(t)-1} p_{nu(t-1)})``.

    With ``exact=True`` the recurrence runs in rational arithmetic on the
    exact binary values of the moments, and only the results are rounded.
    Near a breakdown this avoids the error growth of floating Gram products.

    Raises
    ------
    HorizonExceeded
        If moments up to ``2 m - 1`` are needed but unavailable.
    SingularAlphaSystem
        If a Gram system is numerically singular, meaning the zero pattern
        of the analysis is inconsistent with the moments.
    InsufficientPattern
        If the analysis does not decide whether ``Delta_{m-1}`` vanishes.
    """
    f = as_functional(functional)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if analysis is None:
        analysis = default_analysis(f, tol)

    one = Polynomial([1.0])
    polys = [one]
    kinds = [PolyKind(True)]
    alphas: dict[tuple[int, int], complex] = {}
    gammas: dict[int, complex] = {}
    nu = [0]
    if exact:
        top = min(2 * n, f.horizon) if f.horizon is not None else 2 * n
        em = _exact.exact_moments(f, top + 1)
        ep = [[_exact.GaussianRational(1)]]
    for m in range(1, n + 1):
        z = analysis.zero_at(m - 1)
        if z is None:
            raise InsufficientPattern(f"Delta_{m - 1} is not covered by the analysis")
        q = polys[m - 1].mulx()
        if z:
            alphas[(m, m - 1)] = 0j
            polys.append(q)
            kinds.append(PolyKind(False, _gap_order(m, nu[-1], analysis)))
            if exact:
                ep.append([_exact.GaussianRational(0)] + ep[-1])
            continue
        lo = nu[-1]
        block = range(lo, m)
        # degree 2m-1 is the highest moment touched below
        f.check_horizon(2 * m - 1)
        if exact:
            pe = _exact_step(em, ep, lo, m, nu, alphas, gammas)
            ep.append(pe)
            polys.append(Polynomial([complex(c) for c in pe]))
            kinds.append(PolyKind(True))
            nu.append(m)
            continue
        G = np.array([[f.apply(polys[j] * polys[i]) for i in block] for j in block], dtype=complex)
        rhs = np.array([f.apply(q * polys[j]) for j in block], dtype=complex)
        if not np.all(np.isfinite(G)) or np.linalg.cond(G) > 1.0 / tol.zero_det_tol:
            raise SingularAlphaSystem(f"Gram system for p_{m} over block {lo}..{m - 1} is singular")
        a = sla.solve(G, rhs)
        p = q
        for i, ai in zip(block, a):
            alphas[(m, i)] = complex(ai)
            p = p - polys[i] * ai
        if len(nu) >= 2:
            prev = nu[-2]
            den = f.apply(polys[lo - 1] * polys[prev])
            g = f.apply(q * polys[lo - 1]) / den
            gammas[m] = complex(g)
            p = p - polys[prev] * g
        polys.append(Polynomial(p.coeffs))
        kinds.append(PolyKind(True))
        nu.append(m)

    return FopSequence(
        polys=tuple(polys),
        kinds=tuple(kinds),
        alphas=alphas,
        betas=tuple(1.0 + 0j for _ in range(n)),
        gammas=gammas,
        nu=tuple(nu),
        next_regular=analysis.next_regular_after(n),
        analysis=analysis,
    )


def assemble_block_tridiagonal(seq: FopSequence, n: int | None = None) -> BlockTridiagonal:
    """Collect the recurrence coefficients of ``p_1 .. p_n`` into ``T_n``."""
    n = seq.n if n is None else n
    if not 0 <= n <= seq.n:
        raise ValueError(f"n must lie in 0..{seq.n}")
    T = np.zeros((n, n), dtype=complex)
    gpos = []
    nu = [v for v in seq.nu if v <= n]
    for (m, i), a in seq.alphas.items():
        if m <= n:
            T[m - 1, i] = a
    for r in range(n - 1):
        T[r, r + 1] = seq.betas[r]
    for m, g in seq.gammas.items():
        if m <= n:
            t = seq.nu.index(m)
            col = seq.nu[t - 2]
            T[m - 1, col] += g
            gpos.append((m - 1, col))
    later = [v for v in seq.nu if v > n] + ([seq.next_regular] if seq.next_regular else [])
    if later:
        nu.append(later[0])
    return BlockTridiagonal(T, tuple(nu), tuple(seq.betas[:n]), tuple(gpos))


def jacobi_matrix(
    functional,
    n: int,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
    analysis: HankelAnalysis | None = None,
) -> BlockTridiagonal:
    """Complex symmetric Jacobi matrix of the orthonormal three-term recurrence.

    ``p_0 = 1 / sqrt(m_0)``, ``alpha_k = L(lambda p_k^2)`` and ``beta_{k+1}``
    is the principal square root of ``L(r_k^2)`` for the unnormalized
    remainder ``r_k``.

    Raises
    ------
    NotQuasiDefinite
        If some ``Delta_k`` with ``k < n`` is zero.
    """
    f = as_functional(functional)
    if analysis is None or analysis.computed < n:
        analysis = determinant_sequence(f, n, tol)
    for k in range(n):
        if analysis.is_zero[k]:
            raise NotQuasiDefinite(k)
    alpha = np.zeros(n, dtype=complex)
    beta = np.zeros(max(n - 1, 0), dtype=complex)
    p_prev = Polynomial([0.0])
    p = Polynomial([1.0 / principal_sqrt(f.moment(0))]) if n else None
    b_prev = 0j
    for k in range(n):
        lp = p.mulx()
        alpha[k] = f.apply(lp * p)
        if k == n - 1:
            break
        r = lp - p * alpha[k] - p_prev * b_prev
        b = principal_sqrt(f.apply(r * r))
        beta[k] = b
        p_prev, p, b_prev = p, r / b, b
    J = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    return BlockTridiagonal(J, tuple(range(n + 1)), tuple(complex(b) for b in beta))


def _orth_residuals(p: Polynomial, moments: np.ndarray, jmax: int) -> tuple[float, float]:
    c = p.coeffs
    d = len(c)
    worst_abs = 0.0
    worst_rel = 0.0
    for j in range(jmax + 1):
        seg = moments[j: j + d]
        val = abs(np.dot(c, seg))
        scale = float(np.sum(np.abs(c)) * np.max(np.abs(seg)))
        worst_abs = max(worst_abs, val)
        worst_rel = max(worst_rel, val / scale if scale > 0 else 0.0)
    return worst_abs, worst_rel


def verify_orthogonality(functional, seq: FopSequence) -> OrthogonalityReport:
    """Measure ``|L(p_m lambda^j)|`` over the range each ``p_m`` promises."""
    f = as_functional(functional)
    need = 2 * seq.n
    an = seq.analysis
    ext_top: dict[int, int] = {}
    for t, v in enumerate(seq.nu):
        nxt = seq.nu[t + 1] if t + 1 < len(seq.nu) else seq.next_regular
        if nxt is not None:
            top = nxt - 2
        elif an is not None and an.tail_certified:
            # orthogonal to every degree; check as far as p_n itself
            top = 2 * seq.n
        else:
            continue
        if top > v - 1:
            ext_top[v] = top
            need = max(need, v + top)
    if f.horizon is not None:
        need = min(need, f.horizon)
    m = f.moments(need + 1)

    absolute, relative = [], []
    ext_abs: dict[int, float] = {}
    ext_rel: dict[int, float] = {}
    for k, (p, kind) in enumerate(zip(seq.polys, seq.kinds)):
        jmax = k - 1 - (0 if kind.regular else kind.order)
        jmax = min(jmax, need - k)
        a, r = _orth_residuals(p, m, jmax)
        absolute.append(a)
        relative.append(r)
        if kind.regular and k in ext_top:
            top = min(ext_top[k], need - k)
            if top > k - 1:
                ext_abs[k], ext_rel[k] = _orth_residuals(p, m, top)
    return OrthogonalityReport(tuple(absolute), tuple(relative), ext_abs, ext_rel)
