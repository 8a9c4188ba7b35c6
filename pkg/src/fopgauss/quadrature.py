"""Gauss quadrature for linear functionals: nodes with multiplicities, derivative weights, matrix form."""
from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.cluster.hierarchy import linkage

from .core import DEFAULT_TOLERANCES, Polynomial, TolerancePolicy, TripletFunctional, as_functional
from .exceptions import IllConditionedWeights, InsufficientPattern, NotRegularDegree
from .fop import BlockTridiagonal, FopSequence, assemble_block_tridiagonal, build_fop_sequence, default_analysis
from .hankel import HankelAnalysis

__all__ = [
    "QuadratureNode",
    "QuadratureRule",
    "SmoothFunction",
    "MomentMatchReport",
    "cluster_eigenvalues",
    "gauss_quadrature",
    "interpolatory_quadrature",
    "prune_rule",
    "apply_quadrature",
    "matrix_form_evaluate",
    "matching_moment_check",
    "degree_of_exactness",
    "guaranteed_matching_range",
]

@dataclass(frozen=True)
class QuadratureNode:
    """Node ``lambda_i`` of multiplicity ``s_i`` with weights for ``f, f', ..., f^(s_i - 1)``."""

    value: complex
    multiplicity: int
    weights: tuple[complex, ...]
    suspect: bool = False


@dataclass(frozen=True)
class QuadratureRule:
    """Rule ``G_n(f) = sum_i sum_j w_{i,j} f^(j)(lambda_i)``.

    Attributes
    ----------
    nodes : tuple of QuadratureNode
    n : int
        Total number of conditions ``sum_i s_i``.
    prefactor : complex
        ``mu * m_{nu(1)-1}`` for the matrix form.
    nu1 : int
        First nonzero regular index; the matrix form reads column ``nu1``.
    exactness : int or None
        Degree of exactness measured against the functional.
    source_T : BlockTridiagonal or None
    weight_residual : float
        Relative residual of the weight solve.
    """

    nodes: tuple[QuadratureNode, ...]
    n: int
    prefactor: complex = 1.0 + 0j
    nu1: int = 1
    exactness: int | None = None
    source_T: BlockTridiagonal | None = field(default=None, repr=False)
    weight_residual: float = 0.0

    @property
    def is_zero(self) -> bool:
        return not self.nodes

    @property
    def suspect_nodes(self) -> tuple[int, ...]:
        return tuple(i for i, nd in enumerate(self.nodes) if nd.suspect)

    def node_values(self) -> np.ndarray:
        return np.array([nd.value for nd in self.nodes], dtype=complex)


class SmoothFunction:
    """Callback ``(lam, j) -> f^(j)(lam)``, needed up to the largest multiplicity."""

    def __init__(self, evaluator: Callable[[complex, int], complex]):
        self.evaluator = evaluator

    def __call__(self, lam: complex, j: int = 0) -> complex:
        return self.evaluator(lam, j)

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> SmoothFunction:
        derivs: dict[int, Polynomial] = {}

        def ev(lam, j):
            if j not in derivs:
                derivs[j] = p.derivative(j)
            return complex(derivs[j](lam))

        return cls(ev)

    @classmethod
    def from_derivatives(cls, funcs: Sequence[Callable[[complex], complex]]) -> SmoothFunction:
        """Wrap explicit callables ``f, f', f'', ...``."""
        return cls(lambda lam, j: funcs[j](lam))

    @classmethod
    def exp(cls, scale: complex = 1.0) -> SmoothFunction:
        """``exp(scale * lambda)`` with all derivatives."""
        return cls(lambda lam, j: complex(scale) ** j * np.exp(scale * lam))


def _node_matrix(values: Sequence[complex], mults: Sequence[int], rows: int) -> np.ndarray:
    """Confluent Vandermonde matrix: entry ``(k, (i, j)) = d^j/dx^j x^k`` at ``x = lambda_i``."""
    cols = []
    ks = np.arange(rows)
    for lam, s in zip(values, mults):
        for j in range(s):
            falling = np.ones(rows)
            for r in range(j):
                falling = falling * (ks - r)
            powers = np.zeros(rows, dtype=complex)
            mask = ks >= j
            powers[mask] = complex(lam) ** (ks[mask] - j)
            cols.append(falling * powers)
    if not cols:
        return np.zeros((rows, 0), dtype=complex)
    return np.column_stack(cols)


def _spread(group: np.ndarray, scale: float) -> float:
    """``max_j |e_j(d)| / scale^j`` for the deviations ``d`` of a group from its mean."""
    d = group - group.mean()
    c = np.poly(d)
    return max((abs(c[j]) / scale**j for j in range(2, len(d) + 1)), default=0.0)


def cluster_eigenvalues(
    eigs: Sequence[complex], scale: float, tol: TolerancePolicy = DEFAULT_TOLERANCES
) -> list[tuple[complex, int]]:
    """Group eigenvalues into nodes along a single-linkage dendrogram.

    Walking from the root, a group is kept as one node when the polynomial
    ``prod (x - d_i)`` of its deviations ``d_i`` from the group mean is
    ``x^k`` up to ``cluster_tol``: ``|e_j(d)| <= cluster_tol * scale^j`` for
    every elementary symmetric function ``e_j``, ``j >= 2``. A perturbed
    ``k``-fold eigenvalue spreads like ``eps^(1/k)`` but keeps all ``e_j``
    at ``O(eps)``, whereas merging distinct eigenvalues gives ``e_2`` of
    the order of their squared separation. Any group of diameter at most
    ``cluster_tol * scale`` passes. Returns ``(mean, size)`` pairs ordered
    by real then imaginary part.
    """
    eigs = np.asarray(eigs, dtype=complex)
    n = len(eigs)
    if n == 0:
        return []
    if n == 1:
        return [(complex(eigs[0]), 1)]
    scale = scale if scale > 0 else 1.0
    pts = np.column_stack([eigs.real, eigs.imag])
    Z = linkage(pts, method="single")
    members: list[list[int]] = [[i] for i in range(n)]
    for a, b, _, _ in Z:
        members.append(members[int(a)] + members[int(b)])
    children = {n + r: (int(Z[r, 0]), int(Z[r, 1])) for r in range(n - 1)}

    groups: list[list[int]] = []
    stack = [2 * n - 2]
    while stack:
        node = stack.pop()
        size = len(members[node])
        if size == 1 or _spread(eigs[members[node]], scale) <= tol.cluster_tol:
            groups.append(members[node])
        else:
            stack.extend(children[node])
    out = [(complex(np.mean(eigs[g])), len(g)) for g in groups]
    out.sort(key=lambda c: (round(c[0].real, 12), round(c[0].imag, 12)))
    return out


def _solve_weights(
    moments: np.ndarray, values: Sequence[complex], mults: Sequence[int], tol: TolerancePolicy
) -> tuple[list[tuple[complex, ...]], float]:
    n = int(sum(mults))
    V = _node_matrix(values, mults, n)
    try:
        w = sla.solve(V, moments[:n])
    except (sla.LinAlgError, ValueError) as exc:
        raise IllConditionedWeights(f"confluent Vandermonde system is singular: {exc}") from None
    res = np.max(np.abs(V @ w - moments[:n]))
    scale = np.max(np.abs(moments[:n]))
    rel = float(res / scale) if scale > 0 else float(res)
    if not np.isfinite(rel) or rel > tol.residual_tol:
        raise IllConditionedWeights(f"weight residual {rel:.3e} exceeds {tol.residual_tol:.1e}")
    out, pos = [], 0
    for s in mults:
        out.append(tuple(complex(x) for x in w[pos: pos + s]))
        pos += s
    return out, rel


def _make_nodes(values, mults, weights, tol: TolerancePolicy) -> tuple[QuadratureNode, ...]:
    wmax = max((abs(x) for ws in weights for x in ws), default=0.0)
    nodes = []
    for lam, s, ws in zip(values, mults, weights):
        suspect = abs(ws[-1]) <= tol.residual_tol * wmax
        nodes.append(QuadratureNode(complex(lam), int(s), tuple(ws), bool(suspect)))
    return tuple(nodes)


def _zero_rule(n: int, nu1: int, T: BlockTridiagonal | None = None) -> QuadratureRule:
    return QuadratureRule(nodes=(), n=n, prefactor=0j, nu1=nu1, exactness=None, source_T=T)


def _nearest_regular(analysis: HankelAnalysis, n: int) -> tuple[int, ...]:
    below = [v for v in analysis.regular_indices if 0 < v < n]
    above = [v for v in analysis.regular_indices if v > n]
    return tuple(([below[-1]] if below else []) + ([above[0]] if above else []))


def gauss_quadrature(
    functional,
    n: int,
    seq: FopSequence | None = None,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
    analysis: HankelAnalysis | None = None,
) -> QuadratureRule:
    """n-node Gauss rule of the functional.

    Nodes are the eigenvalues of ``T_n`` grouped by :func:`cluster_eigenvalues`;
    weights solve the confluent Vandermonde system against ``m_0 .. m_{n-1}``.
    For ``n < nu(1)`` the rule is identically zero.

    Raises
    ------
    NotRegularDegree
        If ``Delta_{n-1} = 0`` and ``n >= nu(1)``.
    IllConditionedWeights
        If the weight solve fails its residual check.
    """
    f = as_functional(functional)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if analysis is None:
        analysis = seq.analysis if seq is not None and seq.analysis is not None else default_analysis(f, tol)
    nu1 = analysis.regular_indices[1] if len(analysis.regular_indices) > 1 else None
    z = analysis.zero_at(n - 1)
    if z is None:
        raise InsufficientPattern(f"Delta_{n - 1} is not covered by the analysis")
    if n == 0 or (z and (nu1 is None or n < nu1)):
        rule = _zero_rule(n, nu1 if nu1 is not None else analysis.computed + 1)
        return _with_exactness(rule, f)
    if z:
        raise NotRegularDegree(n, _nearest_regular(analysis, n))

    if seq is None or seq.n < n:
        seq = build_fop_sequence(f, n, analysis, tol)
    T = assemble_block_tridiagonal(seq, n)
    eigs = sla.eigvals(T.matrix)
    groups = cluster_eigenvalues(eigs, T.balanced_norm(), tol)
    values = [g[0] for g in groups]
    mults = [g[1] for g in groups]
    weights, rel = _solve_weights(f.moments(n), values, mults, tol)
    prefactor = T.mu * f.moment(nu1 - 1)
    rule = QuadratureRule(
        nodes=_make_nodes(values, mults, weights, tol),
        n=n,
        prefactor=complex(prefactor),
        nu1=nu1,
        source_T=T,
        weight_residual=rel,
    )
    return _with_exactness(rule, f, tol)


def interpolatory_quadrature(
    functional,
    nodes: Sequence[complex],
    multiplicities: Sequence[int] | None = None,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
) -> QuadratureRule:
    """Interpolatory rule on prescribed nodes, matching ``m_0 .. m_{n-1}`` with ``n = sum s_i``."""
    f = as_functional(functional)
    if multiplicities is None:
        multiplicities = [1] * len(nodes)
    n = int(sum(multiplicities))
    weights, rel = _solve_weights(f.moments(n), nodes, multiplicities, tol)
    rule = QuadratureRule(
        nodes=_make_nodes(nodes, multiplicities, weights, tol), n=n, weight_residual=rel
    )
    return _with_exactness(rule, f, tol)


def prune_rule(rule: QuadratureRule, tol: TolerancePolicy = DEFAULT_TOLERANCES) -> QuadratureRule:
    """Drop trailing weights ``|w_{i,s_i-1}| <= residual_tol * max|w|``, lowering multiplicities.

    Nodes whose multiplicity drops to zero are removed.
    """
    wmax = max((abs(x) for nd in rule.nodes for x in nd.weights), default=0.0)
    kept = []
    for nd in rule.nodes:
        ws = list(nd.weights)
        while ws and abs(ws[-1]) <= tol.residual_tol * wmax:
            ws.pop()
        if ws:
            kept.append(QuadratureNode(nd.value, len(ws), tuple(ws), False))
    n = sum(nd.multiplicity for nd in kept)
    return QuadratureRule(
        nodes=tuple(kept),
        n=n,
        prefactor=rule.prefactor,
        nu1=rule.nu1,
        exactness=rule.exactness,
        weight_residual=rule.weight_residual,
    )


def apply_quadrature(rule: QuadratureRule, f) -> complex:
    """Evaluate ``sum_i sum_j w_{i,j} f^(j)(lambda_i)``.

    ``f`` is a :class:`SmoothFunction`, a :class:`Polynomial`, or any callable
    ``(lam, j) -> value``.
    """
    if isinstance(f, Polynomial):
        f = SmoothFunction.from_polynomial(f)
    total = 0j
    for nd in rule.nodes:
        for j, w in enumerate(nd.weights):
            total += w * f(nd.value, j)
    return complex(total)


def matrix_form_evaluate(
    T: BlockTridiagonal | np.ndarray, p: Polynomial, prefactor: complex, nu1: int
) -> complex:
    """``prefactor * e_1^T p(T) e_{nu1}`` by Horner iteration on vectors."""
    M = T.matrix if isinstance(T, BlockTridiagonal) else np.asarray(T, dtype=complex)
    n = M.shape[0]
    if p.is_zero() or nu1 > n or n == 0:
        return 0j
    e = np.zeros(n, dtype=complex)
    e[nu1 - 1] = 1.0
    c = p.coeffs
    y = c[-1] * e
    for ck in c[-2::-1]:
        y = M @ y + ck * e
    return complex(prefactor * y[0])


@dataclass(frozen=True)
class MomentMatchReport:
    """Residuals ``|prefactor e_1^T T^k e_{nu1} - m_k|`` for ``k = 0 .. k_max``."""

    residuals: tuple[float, ...]
    matrix_moments: tuple[complex, ...]
    moment_scale: float
    prefactor: complex
    nu1: int

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def relative(self) -> float:
        """Normwise relative residual ``max|a_k - m_k| / max|m_k|``."""
        s = self.moment_scale
        return self.max_residual / s if s > 0 else self.max_residual


def matching_moment_check(T: BlockTridiagonal, functional, k_max: int) -> MomentMatchReport:
    """Compare ``mu m_{nu1-1} e_1^T T^k e_{nu1}`` with ``m_k`` for ``k = 0 .. k_max``.

    ``mu`` is recovered from the superdiagonal of ``T``.

    Raises
    ------
    HorizonExceeded
        If ``m_{k_max}`` is not available.
    """
    f = as_functional(functional)
    f.check_horizon(k_max)
    m = f.moments(k_max + 1)
    n = T.n
    nu1 = T.nu1
    if n == 0 or nu1 > n:
        vals = np.zeros(k_max + 1, dtype=complex)
        pref = 0j
    else:
        pref = T.mu * m[nu1 - 1] if nu1 - 1 <= k_max else T.mu * f.moment(nu1 - 1)
        y = np.zeros(n, dtype=complex)
        y[nu1 - 1] = 1.0
        vals = np.empty(k_max + 1, dtype=complex)
        for k in range(k_max + 1):
            vals[k] = pref * y[0]
            y = T.matrix @ y
    res = np.abs(vals - m)
    scale = float(np.max(np.abs(m))) if len(m) else 0.0
    return MomentMatchReport(
        residuals=tuple(float(r) for r in res),
        matrix_moments=tuple(complex(v) for v in vals),
        prefactor=complex(pref),
        nu1=nu1,
        moment_scale=scale,
    )


def guaranteed_matching_range(analysis: HankelAnalysis, n: int) -> int | None:
    """Largest ``k`` with guaranteed moment matching for regular ``n = nu(t)``: ``nu(t) + nu(t+1) - 2``.

    Returns ``None`` when matching holds for every ``k`` (certified zero tail).
    If ``nu(t+1)`` lies beyond the computed pattern, a safe lower bound is returned.
    """
    if n not in analysis.regular_indices:
        raise NotRegularDegree(n, _nearest_regular(analysis, n))
    nxt = analysis.next_regular_after(n)
    if nxt is None:
        if analysis.tail_certified:
            return None
        nxt = analysis.computed + 1
    return n + nxt - 2


def _default_horizon(rule: QuadratureRule, f) -> int:
    if f.horizon is not None:
        return f.horizon
    dim = f.dimension if isinstance(f, TripletFunctional) else 0
    return 2 * (rule.n + dim) + 1


def degree_of_exactness(
    rule: QuadratureRule,
    functional,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
    max_degree: int | None = None,
) -> int:
    """Largest ``d`` with ``G_n(lambda^j) = m_j`` for all ``j <= d``, up to ``residual_tol``.

    The check runs to the functional's horizon (or ``max_degree``); if no
    violation occurs, that horizon is returned. ``-1`` means ``m_0`` is
    already missed. Each comparison is relative to the larger of ``max_{i<=j} |m_i|``
    and the summed magnitude of the rule's terms.
    """
    f = as_functional(functional)
    H = _default_horizon(rule, f) if max_degree is None else max_degree
    if f.horizon is not None:
        H = min(H, f.horizon)
    m = f.moments(H + 1)
    running = 0.0
    for j in range(H + 1):
        running = max(running, abs(m[j]))
        g = 0j
        mag = 0.0
        for nd in rule.nodes:
            for d, w in enumerate(nd.weights):
                if d > j:
                    break
                term = w * math.perm(j, d) * nd.value ** (j - d)
                g += term
                mag += abs(term)
        if abs(g - m[j]) > tol.residual_tol * max(running, mag):
            return j - 1
    return H


def _with_exactness(rule: QuadratureRule, f, tol: TolerancePolicy = DEFAULT_TOLERANCES) -> QuadratureRule:
    return replace(rule, exactness=degree_of_exactness(rule, f, tol))
