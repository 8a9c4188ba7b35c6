"""Trivial and minimal partial realizations of Markov sequences, and the Ritz/spectrum mismatch check."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .core import DEFAULT_TOLERANCES, MomentSequence, TolerancePolicy, TripletFunctional
from .exceptions import HorizonExceeded, NoRealizableDegree
from .fop import assemble_block_tridiagonal, build_fop_sequence
from .hankel import determinant_sequence
from .lanczos import BreakdownKind, BreakdownReport, classify_breakdown, look_ahead_lanczos

__all__ = [
    "RealizationTriplet",
    "MismatchReport",
    "trivial_realization",
    "minimal_partial_realization",
    "markov_parameters",
    "mismatch_check",
    "incurable_instance",
]


@dataclass(frozen=True)
class RealizationTriplet:
    """Triplet ``(w, A, v)`` whose Markov parameters are ``w* A^j v``."""

    w: np.ndarray
    A: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        if A.size == 0:
            A = np.zeros((0, 0), dtype=complex)
        v = np.array(self.v, dtype=complex).ravel()
        w = np.array(self.w, dtype=complex).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or v.shape[0] != A.shape[0] or w.shape[0] != A.shape[0]:
            raise ValueError("inconsistent triplet dimensions")
        for arr in (A, v, w):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    def functional(self) -> TripletFunctional:
        return TripletFunctional(self.w, self.A, self.v)

    def transformed(self, B) -> RealizationTriplet:
        """Similar triplet ``(B* w, B^{-1} A B, B^{-1} v)`` with the same Markov parameters."""
        B = np.asarray(B, dtype=complex)
        Binv = np.linalg.inv(B)
        return RealizationTriplet(B.conj().T @ self.w, Binv @ self.A @ B, Binv @ self.v)


@dataclass(frozen=True)
class MismatchReport:
    """Distances from the Ritz values of ``T_{nu(t)}`` to the spectrum of ``A``.

    ``applicable`` is True only when the look-ahead run ends in an incurable
    breakdown; the distances are computed in every case.
    """

    ritz: tuple[complex, ...]
    spectrum: tuple[complex, ...]
    max_min_distance: float
    applicable: bool
    breakdown: BreakdownReport
    nu: tuple[int, ...] = ()


def trivial_realization(moments: MomentSequence | Sequence[complex]) -> RealizationTriplet:
    """Upshift realization of ``m_0 .. m_k``: ``A`` shifts up, ``v = (m_0..m_k)``, ``w = e_1``."""
    ms = moments if isinstance(moments, MomentSequence) else MomentSequence(tuple(moments))
    K = len(ms)
    A = np.eye(K, k=1, dtype=complex)
    w = np.zeros(K, dtype=complex)
    w[0] = 1.0
    return RealizationTriplet(w, A, ms.as_array())


def markov_parameters(triplet: RealizationTriplet, k_max: int) -> MomentSequence:
    """``w* A^j v`` for ``j = 0 .. k_max`` by repeated matrix-vector products."""
    if triplet.dimension == 0:
        return MomentSequence(tuple(0j for _ in range(k_max + 1)))
    y = triplet.v.copy()
    out = []
    for j in range(k_max + 1):
        if j:
            y = triplet.A @ y
        out.append(complex(np.vdot(triplet.w, y)))
    return MomentSequence(tuple(out))


def _markov_match(triplet: RealizationTriplet, m: np.ndarray, tol: TolerancePolicy) -> bool:
    got = markov_parameters(triplet, len(m) - 1).as_array()
    scale = float(np.max(np.abs(m)))
    res = float(np.max(np.abs(got - m)))
    return res <= tol.residual_tol * scale if scale > 0 else res == 0.0


def minimal_partial_realization(
    moments: MomentSequence | Sequence[complex],
    k: int,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
    exact: bool = False,
) -> tuple[RealizationTriplet, int]:
    """Smallest-dimension triplet matching ``m_0 .. m_k``.

    The dimension is the smallest regular index ``n = nu(t)`` whose Gauss rule
    is exact on ``P_k``, i.e. ``nu(t) + nu(t+1) - 2 >= k``; the triplet is
    ``(e_1, T_n, mu m_{nu(1)-1} e_{nu(1)})``. Minimality holds relative to the
    computed determinant pattern. When ``nu(t+1)`` lies beyond the available
    moments, the candidate is accepted if its Markov parameters match. If
    ``T_n`` needs the one moment past the horizon, that moment is taken as 0;
    any value gives a valid realization.

    Raises
    ------
    HorizonExceeded
        If ``k`` exceeds the horizon.
    NoRealizableDegree
        If no regular index with computable ``T_n`` passes.
    """
    ms = moments if isinstance(moments, MomentSequence) else MomentSequence(tuple(moments))
    K = ms.horizon
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > K:
        raise HorizonExceeded(k, K)
    m = ms.as_array()
    target = m[: k + 1]
    if not np.any(target):
        empty = np.zeros(0, dtype=complex)
        return RealizationTriplet(empty, np.zeros((0, 0), dtype=complex), empty), 0

    analysis = determinant_sequence(ms, K // 2 + 1, tol, exact)
    # m_{2n-1} does not affect m_0..m_{2n-2}; when it is missing it is a free choice, fixed to 0
    padded = MomentSequence(ms.moments + (0j,))
    nus = analysis.regular_indices
    for t, n in enumerate(nus):
        if n == 0 or 2 * n - 2 > K:
            continue
        nxt = nus[t + 1] if t + 1 < len(nus) else None
        if nxt is not None:
            if n + nxt - 2 < k:
                continue
            known = True
        else:
            known = n + analysis.computed + 1 - 2 >= k
        seq = build_fop_sequence(ms if 2 * n - 1 <= K else padded, n, analysis, tol, exact)
        T = assemble_block_tridiagonal(seq, n)
        nu1 = nus[1]
        v = np.zeros(n, dtype=complex)
        v[nu1 - 1] = T.mu * m[nu1 - 1]
        e1 = np.zeros(n, dtype=complex)
        e1[0] = 1.0
        triplet = RealizationTriplet(e1, T.matrix, v)
        if known or _markov_match(triplet, target, tol):
            return triplet, n
    raise NoRealizableDegree(
        f"no regular index with 2n-2 <= {K} realizes m_0..m_{k} (pattern {analysis.pattern})"
    )


def mismatch_check(A, v, w, tol: TolerancePolicy = DEFAULT_TOLERANCES) -> MismatchReport:
    """Run look-ahead Lanczos and compare Ritz values of ``T_{nu(t)}`` with the spectrum of ``A``."""
    A = np.array(A, dtype=complex)
    state, _ = look_ahead_lanczos(A, v, w, tol=tol)
    analysis = determinant_sequence(TripletFunctional(w, A, v), None, tol)
    report = classify_breakdown(state, analysis)
    Tk = state.regular_T()
    ritz = sla.eigvals(Tk) if Tk.size else np.zeros(0, dtype=complex)
    eigs = sla.eigvals(A)
    if ritz.size:
        dist = float(np.max(np.min(np.abs(ritz[:, None] - eigs[None, :]), axis=1)))
    else:
        dist = 0.0
    return MismatchReport(
        ritz=tuple(complex(x) for x in np.sort_complex(ritz)),
        spectrum=tuple(complex(x) for x in np.sort_complex(eigs)),
        max_min_distance=dist,
        applicable=report.kind is BreakdownKind.INCURABLE,
        breakdown=report,
        nu=state.nu,
    )


def incurable_instance(
    rng: np.random.Generator,
    dimension: int,
    support: Sequence[int],
    complex_entries: bool = False,
    separation: float = 0.2,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonal test triplet whose Markov sequence has rank ``len(support)``.

    ``A`` is diagonal with distinct entries at least ``separation`` apart,
    ``v`` is all ones and ``w`` is nonzero only on ``support``. The moments
    are ``sum_{i in support} conj(w_i) d_i^j``.
    """
    support = sorted(set(int(i) for i in support))
    if not support or support[-1] >= dimension:
        raise ValueError("support must be a nonempty subset of range(dimension)")
    d: list[complex] = []
    while len(d) < dimension:
        if complex_entries:
            z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        else:
            z = complex(rng.uniform(-1.5, 1.5))
        if all(abs(z - x) >= separation for x in d):
            d.append(z)
    A = np.diag(np.array(d))
    v = np.ones(dimension, dtype=complex)
    w = np.zeros(dimension, dtype=complex)
    for i in support:
        mag = rng.uniform(0.5, 1.5)
        phase = rng.uniform(0, 2 * np.pi) if complex_entries else (0.0 if rng.random() < 0.5 else np.pi)
        w[i] = mag * np.exp(1j * phase)
    if not complex_entries:
        A, w = A.real.astype(complex), w.real.astype(complex)
    return A, v, w
