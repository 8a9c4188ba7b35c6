"""Shared value types: polynomials, moment sequences, linear functionals, tolerances.

Complex scalars are plain Python ``complex`` (or ``numpy.complex128``); all
arithmetic is double precision.
"""
from __future__ import annotations

import cmath
import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from numpy.polynomial import polynomial as npoly

from .exceptions import HorizonExceeded

__all__ = [
    "Polynomial",
    "MomentSequence",
    "Functional",
    "MomentFunctional",
    "TripletFunctional",
    "TolerancePolicy",
    "DEFAULT_TOLERANCES",
    "as_functional",
    "moment",
    "apply",
    "principal_sqrt",
]


def principal_sqrt(c: complex) -> complex:
    """Square root with argument in (-pi/2, pi/2]; a signed zero imaginary part is ignored."""
    c = complex(c)
    return cmath.sqrt(complex(c.real, c.imag + 0.0))


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} must be finite (no NaN or Inf)")


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial with complex coefficients stored lowest degree first.

    Trailing zero coefficients are dropped on construction, so the leading
    coefficient is nonzero unless the polynomial is zero (stored as ``[0]``).
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1].copy() if nz.size else np.zeros(1, dtype=complex)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def monomial(cls, k: int, c: complex = 1.0) -> Polynomial:
        coeffs = np.zeros(k + 1, dtype=complex)
        coeffs[k] = c
        return cls(coeffs)

    @classmethod
    def constant(cls, c: complex) -> Polynomial:
        return cls([c])

    @classmethod
    def from_roots(cls, roots: Iterable[complex]) -> Polynomial:
        roots = list(roots)
        if not roots:
            return cls([1.0])
        return cls(npoly.polyfromroots(np.asarray(roots, dtype=complex)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0

    def monic(self) -> Polynomial:
        if self.is_zero():
            raise ZeroDivisionError("the zero polynomial has no monic rescaling")
        return Polynomial(self.coeffs / self.coeffs[-1])

    def mulx(self, power: int = 1) -> Polynomial:
        """Multiply by ``lambda**power``."""
        return Polynomial(np.concatenate([np.zeros(power, dtype=complex), self.coeffs]))

    def derivative(self, order: int = 1) -> Polynomial:
        if order >= len(self.coeffs):
            return Polynomial([0.0])
        return Polynomial(npoly.polyder(self.coeffs, order))

    def divmod(self, other: Polynomial) -> tuple[Polynomial, Polynomial]:
        q, r = npoly.polydiv(self.coeffs, other.coeffs)
        return Polynomial(q), Polynomial(r)

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs)

    def __add__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(npoly.polyadd(self.coeffs, other.coeffs))
        return Polynomial(npoly.polyadd(self.coeffs, [complex(other)]))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(npoly.polymul(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Polynomial(self.coeffs / complex(scalar))

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def allclose(self, other: Polynomial, rtol: float = 1e-9, atol: float = 0.0) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, dtype=complex)
        b = np.zeros(n, dtype=complex)
        a[: len(self.coeffs)] = self.coeffs
        b[: len(other.coeffs)] = other.coeffs
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
        return bool(np.max(np.abs(a - b)) <= atol + rtol * scale)

    def __repr__(self):
        terms = ", ".join(f"{c:.6g}" for c in self.coeffs)
        return f"Polynomial([{terms}])"


@dataclass(frozen=True)
class MomentSequence:
    """Finite moment sequence m_0, ..., m_K."""

    moments: tuple[complex, ...]

    def __post_init__(self):
        values = tuple(complex(m) for m in self.moments)
        if not values:
            raise ValueError("a moment sequence needs at least one moment")
        _check_finite(np.array(values), "moments")
        object.__setattr__(self, "moments", values)

    @property
    def horizon(self) -> int:
        return len(self.moments) - 1

    def __len__(self):
        return len(self.moments)

    def __getitem__(self, j):
        return self.moments[j]

    def as_array(self) -> np.ndarray:
        return np.array(self.moments, dtype=complex)


class Functional(ABC):
    """Linear functional on polynomials, known through its moments L(lambda^j)."""

    #: largest moment index available, ``None`` when unbounded
    horizon: int | None = None

    @abstractmethod
    def moment(self, j: int) -> complex:
        ...

    def moments(self, count: int) -> np.ndarray:
        """Return ``m_0 .. m_{count-1}`` as a complex array."""
        return np.array([self.moment(j) for j in range(count)], dtype=complex)

    def check_horizon(self, j: int) -> None:
        if j < 0:
            raise ValueError("moment index must be nonnegative")
        if self.horizon is not None and j > self.horizon:
            raise HorizonExceeded(j, self.horizon)

    def apply(self, p: Polynomial) -> complex:
        self.check_horizon(p.degree)
        m = self.moments(p.degree + 1)
        return complex(np.dot(p.coeffs, m))


class MomentFunctional(Functional):
    """Functional given by an explicit finite list of moments."""

    def __init__(self, moments: MomentSequence | Sequence[complex]):
        if not isinstance(moments, MomentSequence):
            moments = MomentSequence(tuple(moments))
        self.sequence = moments
        self.horizon = moments.horizon
        self._values = moments.as_array()

    def moment(self, j: int) -> complex:
        self.check_horizon(j)
        return complex(self._values[j])

    def moments(self, count: int) -> np.ndarray:
        if count > 0:
            self.check_horizon(count - 1)
        return self._values[:count].copy()

    def __repr__(self):
        return f"MomentFunctional(horizon={self.horizon})"


class TripletFunctional(Functional):
    """Functional ``L(p) = w* p(A) v`` defined by a matrix bilinear form.

    Moments ``w* A^j v`` are computed by repeated matrix-vector products and
    memoized up to the highest index requested so far.
    """

    horizon = None

    def __init__(self, w, A, v):
        A = np.array(A, dtype=complex)
        v = np.array(v, dtype=complex).ravel()
        w = np.array(w, dtype=complex).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        if v.shape[0] != A.shape[0] or w.shape[0] != A.shape[0]:
            raise ValueError("v and w must have the dimension of A")
        for arr, name in ((A, "A"), (v, "v"), (w, "w")):
            _check_finite(arr, name)
            arr.setflags(write=False)
        self.A, self.v, self.w = A, v, w
        self._cache: list[complex] = []
        self._krylov = v.copy()

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    def _extend(self, j: int) -> None:
        while len(self._cache) <= j:
            if self._cache:
                self._krylov = self.A @ self._krylov
            self._cache.append(complex(np.vdot(self.w, self._krylov)))

    def moment(self, j: int) -> complex:
        self.check_horizon(j)
        self._extend(j)
        return self._cache[j]

    def moments(self, count: int) -> np.ndarray:
        if count <= 0:
            return np.zeros(0, dtype=complex)
        self._extend(count - 1)
        return np.array(self._cache[:count], dtype=complex)

    def apply(self, p: Polynomial) -> complex:
        # Horner on vectors: p(A) v without forming powers of A
        c = p.coeffs
        y = c[-1] * self.v
        for ck in c[-2::-1]:
            y = self.A @ y + ck * self.v
        return complex(np.vdot(self.w, y))

    def __repr__(self):
        return f"TripletFunctional(N={self.dimension})"


def as_functional(obj) -> Functional:
    """Coerce a moment list, :class:`MomentSequence` or functional to a :class:`Functional`."""
    if isinstance(obj, Functional):
        return obj
    return MomentFunctional(obj)


def moment(functional: Functional, j: int) -> complex:
    """Return the moment ``m_j = L(lambda^j)``."""
    return as_functional(functional).moment(j)


def apply(functional: Functional, p: Polynomial) -> complex:
    """Apply the functional to a polynomial (linear in ``p``)."""
    return as_functional(functional).apply(p)


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical thresholds used wherever exact-arithmetic decisions are emulated.

    Attributes
    ----------
    zero_det_tol : float
        Relative threshold for declaring a Hankel determinant (or a Gram
        matrix) singular.
    cluster_tol : float
        Relative radius, in units of ``||T_n||``, within which eigenvalues are
        merged into one node.
    residual_tol : float
        Relative tolerance for verification residuals.
    """

    zero_det_tol: float = 1e-10
    cluster_tol: float = 1e-8
    residual_tol: float = 1e-9
    _names: ClassVar[tuple[str, ...]] = ("zero_det_tol", "cluster_tol", "residual_tol")

    def __post_init__(self):
        for name in self._names:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and 0 < value < 1):
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in self._names}


DEFAULT_TOLERANCES = TolerancePolicy()
