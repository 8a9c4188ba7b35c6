"""Hankel determinants, their zero pattern, and the structural indices derived from it."""
from __future__ import annotations

import enum
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._exact import GaussianRational, bareiss_determinant, exact_triplet_moments
from .core import DEFAULT_TOLERANCES, TolerancePolicy, TripletFunctional, as_functional
from .exceptions import InsufficientPattern

__all__ = [
    "DegreeKind",
    "HankelAnalysis",
    "DegreeClassification",
    "hankel_matrix",
    "determinant_sequence",
    "analysis_from_pattern",
    "classify_degrees",
    "classify_degree",
]


class DegreeKind(enum.Enum):
    REGULAR = "regular"
    SINGULAR = "singular"
    NONEXISTENT = "nonexistent"


def hankel_matrix(functional, k: int) -> np.ndarray:
    """Return the ``k x k`` Hankel matrix with entry ``(i, j) = m_{i+j}``.

    Raises
    ------
    HorizonExceeded
        If ``m_{2k-2}`` is not available.
    """
    if k < 0:
        raise ValueError("size must be nonnegative")
    if k == 0:
        return np.zeros((0, 0), dtype=complex)
    f = as_functional(functional)
    f.check_horizon(2 * k - 2)
    m = f.moments(2 * k - 1)
    return sla.hankel(m[:k], m[k - 1:])


def _log_abs_det(H: np.ndarray) -> tuple[complex, float]:
    """Determinant (possibly over/underflowing) and log of its modulus, via pivoted LU."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(H, check_finite=False)
    d = np.diag(lu)
    sign = -1.0 if np.count_nonzero(piv != np.arange(len(piv))) % 2 else 1.0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logabs = float(np.sum(np.log(np.abs(d))))
        det = complex(sign * np.prod(d))
    return det, logabs


def _log_hadamard(H: np.ndarray) -> float:
    # rescale rows so the norms neither underflow nor overflow
    peak = np.max(np.abs(H), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(peak[:, None] > 0, H / peak[:, None], 0.0)
        return float(np.sum(np.log(peak) + np.log(np.linalg.norm(scaled, axis=1))))


def _right_runs(is_zero: Sequence[bool]) -> list[int | None]:
    """R(k): zeros strictly after index k before the next nonzero; None if no nonzero follows."""
    K = len(is_zero)
    out: list[int | None] = [None] * K
    nxt = None  # index of the nearest nonzero to the right
    for k in range(K - 1, -1, -1):
        out[k] = None if nxt is None else nxt - k - 1
        if not is_zero[k]:
            nxt = k
    return out


@dataclass(frozen=True)
class HankelAnalysis:
    """Zero/nonzero pattern of ``Delta_0 .. Delta_{M}`` and the indices derived from it.

    Attributes
    ----------
    deltas : tuple of complex
        Computed determinants (synthetic ``1``/``0`` values for pattern overrides).
    is_zero : tuple of bool
        Zero classification of each ``Delta_k``.
    regular_indices : tuple of int
        ``0`` followed by every ``k + 1`` with ``Delta_k`` nonzero.
    kronecker : tuple
        ``R(k)``, the number of zeros right after ``Delta_k`` before the next
        nonzero one; ``None`` when no nonzero follows within the computed range.
    euclidean : tuple
        ``R(k) - R(k-1)``, with ``R(-1)`` the length of the leading zero run.
    incurable_from : int or None
        Index ``n`` with ``Delta_{n-1}`` nonzero (or ``n = 0``) and every later
        computed determinant zero, provided at least one such zero exists.
    tail_certified : bool
        True when every determinant beyond the computed range is known to
        vanish (matrix-defined functionals computed past the matrix dimension).
    """

    deltas: tuple[complex, ...]
    is_zero: tuple[bool, ...]
    regular_indices: tuple[int, ...]
    kronecker: tuple[int | None, ...]
    euclidean: tuple[int | None, ...]
    incurable_from: int | None
    tail_certified: bool = False
    hadamard_log: tuple[float, ...] = field(default=(), repr=False)
    exact: bool = False

    @classmethod
    def from_zero_pattern(
        cls,
        deltas: Sequence[complex],
        is_zero: Sequence[bool],
        tail_certified: bool = False,
        hadamard_log: Sequence[float] = (),
        exact: bool = False,
    ) -> HankelAnalysis:
        is_zero = tuple(bool(z) for z in is_zero)
        K = len(is_zero)
        regular = (0,) + tuple(k + 1 for k in range(K) if not is_zero[k])
        right = _right_runs(is_zero)
        # leading zero run, treating Delta_{-1} as nonzero
        lead = next((k for k in range(K) if not is_zero[k]), None)
        prev = lead
        euclid: list[int | None] = []
        for k in range(K):
            cur = right[k]
            euclid.append(None if cur is None or prev is None else cur - prev)
            prev = cur
        incurable = None
        if K and is_zero[-1]:
            incurable = regular[-1]
        return cls(
            deltas=tuple(complex(d) for d in deltas),
            is_zero=is_zero,
            regular_indices=regular,
            kronecker=tuple(right),
            euclidean=tuple(euclid),
            incurable_from=incurable,
            tail_certified=bool(tail_certified),
            hadamard_log=tuple(hadamard_log),
            exact=exact,
        )

    @property
    def computed(self) -> int:
        """Number of determinants computed (indices ``0 .. computed-1``)."""
        return len(self.is_zero)

    @property
    def pattern(self) -> str:
        """Pattern string with ``x`` for nonzero and ``0`` for zero determinants."""
        return "".join("0" if z else "x" for z in self.is_zero)

    def zero_at(self, k: int) -> bool | None:
        """Zero test for ``Delta_k``; ``None`` if unknown. ``Delta_{-1}`` counts as nonzero."""
        if k < 0:
            return False
        if k < self.computed:
            return self.is_zero[k]
        if self.tail_certified:
            return True
        return None

    def left_run(self, k: int) -> int:
        """L(k): zeros right before ``Delta_k``, with ``Delta_{-1}`` counted as nonzero."""
        if k > self.computed:
            raise InsufficientPattern(f"Delta_{k - 1} not computed")
        j = k - 1
        while j >= 0 and self.is_zero[j]:
            j -= 1
        return k - 1 - j

    def right_run(self, k: int) -> int | None:
        """R(k), or ``None`` when undetermined (or infinite for a certified zero tail)."""
        if 0 <= k < self.computed:
            return self.kronecker[k]
        return None

    def last_regular_before(self, n: int) -> int:
        """Largest regular index strictly smaller than ``n``."""
        return max(nu for nu in self.regular_indices if nu < n)

    def next_regular_after(self, n: int) -> int | None:
        """Smallest regular index strictly larger than ``n`` within the computed range."""
        later = [nu for nu in self.regular_indices if nu > n]
        return later[0] if later else None


@dataclass(frozen=True)
class DegreeClassification:
    """Kind of FOP available at each degree ``1 .. n_max``."""

    kinds: dict[int, DegreeKind]

    def __getitem__(self, n: int) -> DegreeKind:
        return self.kinds[n]

    def degrees(self, kind: DegreeKind) -> list[int]:
        return sorted(n for n, k in self.kinds.items() if k is kind)


def determinant_sequence(
    functional,
    max_k: int | None = None,
    tol: TolerancePolicy = DEFAULT_TOLERANCES,
    exact: bool = False,
) -> HankelAnalysis:
    """Compute ``Delta_0 .. Delta_{max_k-1}`` and classify their zeros.

    Parameters
    ----------
    functional : Functional or sequence of moments
    max_k : int, optional
        Number of determinants. Defaults to the largest count the moments
        support, or ``2 N`` for a matrix functional of dimension ``N``.
    tol : TolerancePolicy
        ``zero_det_tol`` is compared with ``|Delta_k|`` divided by the
        Hadamard bound (product of row norms of ``H_k``).
    exact : bool
        Use fraction-free elimination on the exact binary values of the
        moments; zero tests are then exact.

    Raises
    ------
    HorizonExceeded
        If ``max_k`` needs moments beyond the horizon.
    """
    f = as_functional(functional)
    is_triplet = isinstance(f, TripletFunctional)
    if max_k is None:
        max_k = 2 * f.dimension if is_triplet else f.horizon // 2 + 1
    if max_k < 0:
        raise ValueError("max_k must be nonnegative")
    if max_k:
        f.check_horizon(2 * max_k - 2)
    count = max(2 * max_k - 1, 0)
    m = f.moments(count)

    deltas: list[complex] = []
    zeros: list[bool] = []
    hlog: list[float] = []
    if exact:
        if is_triplet:
            em = exact_triplet_moments(f.w, f.A, f.v, count)
        else:
            em = [GaussianRational.from_complex(x) for x in m]
        for k in range(max_k):
            H = [[em[i + j] for j in range(k + 1)] for i in range(k + 1)]
            d = bareiss_determinant(H)
            deltas.append(complex(d))
            zeros.append(d.is_zero())
    else:
        logtol = math.log(tol.zero_det_tol)
        for k in range(max_k):
            H = sla.hankel(m[: k + 1], m[k: 2 * k + 1])
            bound = _log_hadamard(H)
            hlog.append(bound)
            if not np.isfinite(bound):
                # a zero row forces a zero determinant
                deltas.append(0j)
                zeros.append(True)
                continue
            det, logabs = _log_abs_det(H)
            deltas.append(det)
            zeros.append(logabs <= logtol + bound)

    certified = is_triplet and max_k >= f.dimension
    return HankelAnalysis.from_zero_pattern(deltas, zeros, certified, hlog, exact)


def analysis_from_pattern(pattern: str, tail_certified: bool = False) -> HankelAnalysis:
    """Build an analysis from a pattern string such as ``"xx0xx0000x000x"``.

    ``x`` (or ``*``) marks a nonzero determinant and ``0`` a zero one.
    """
    zeros = []
    for ch in pattern.strip():
        if ch in "xX*":
            zeros.append(False)
        elif ch == "0":
            zeros.append(True)
        elif ch in " ,":
            continue
        else:
            raise ValueError(f"invalid pattern character {ch!r}")
    deltas = [0.0 if z else 1.0 for z in zeros]
    return HankelAnalysis.from_zero_pattern(deltas, zeros, tail_certified)


def classify_degree(analysis: HankelAnalysis, n: int) -> DegreeKind:
    """Classify a single degree; see :func:`classify_degrees`."""
    top = analysis.zero_at(n - 1)
    if top is False:
        return DegreeKind.REGULAR
    K = analysis.computed
    if top is None:
        raise InsufficientPattern(f"Delta_{n - 1} is needed for degree {n} but only {K} determinants are known")
    k = analysis.last_regular_before(n)
    hi = 2 * n - k - 1
    if any(not analysis.is_zero[j] for j in range(k, min(hi, K - 1) + 1)):
        return DegreeKind.NONEXISTENT
    if hi < K or analysis.tail_certified:
        return DegreeKind.SINGULAR
    raise InsufficientPattern(
        f"degree {n} needs Delta_{k}..Delta_{hi} but only {K} determinants are known"
    )


def classify_degrees(analysis: HankelAnalysis, n_max: int) -> DegreeClassification:
    """Classify each degree ``1 .. n_max`` as regular, singular or nonexistent.

    A degree is regular when ``Delta_{n-1}`` is nonzero. Otherwise, with ``k``
    the last regular index below ``n``, a FOP exists (non-uniquely) exactly
    when ``Delta_k .. Delta_{2n-k-1}`` all vanish.

    Raises
    ------
    InsufficientPattern
        If a decision needs determinants beyond the computed range and no
        nonzero inside the computed part already settles it.
    """
    return DegreeClassification({n: classify_degree(analysis, n) for n in range(1, n_max + 1)})
