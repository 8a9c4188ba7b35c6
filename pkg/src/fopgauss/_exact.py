"""Exact Gaussian-rational arithmetic and fraction-free determinants."""
from __future__ import annotations

from fractions import Fraction

from .core import TripletFunctional


class GaussianRational:
    """Complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def from_complex(cls, z) -> GaussianRational:
        if isinstance(z, GaussianRational):
            return z
        z = complex(z)
        # Fraction(float) is exact, so every finite double converts losslessly
        return cls(Fraction(z.real), Fraction(z.imag))

    def _coerce(self, other):
        return other if isinstance(other, GaussianRational) else GaussianRational.from_complex(other)

    def __add__(self, other):
        other = self._coerce(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        other = self._coerce(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        den = other.re * other.re + other.im * other.im
        if den == 0:
            raise ZeroDivisionError("division by exact zero")
        return GaussianRational(
            (self.re * other.re + self.im * other.im) / den,
            (self.im * other.re - self.re * other.im) / den,
        )

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __eq__(self, other):
        if isinstance(other, (int, float, complex, Fraction, GaussianRational)):
            other = self._coerce(other)
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


def bareiss_determinant(matrix) -> GaussianRational:
    """Determinant by fraction-free (Bareiss) elimination with row pivoting.

    Every intermediate division is exact, so the result is exact for
    Gaussian-rational entries.
    """
    M = [[GaussianRational.from_complex(x) for x in row] for row in matrix]
    n = len(M)
    if n == 0:
        return GaussianRational(1)
    sign = 1
    prev = GaussianRational(1)
    for k in range(n - 1):
        if M[k][k].is_zero():
            for i in range(k + 1, n):
                if not M[i][k].is_zero():
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return GaussianRational(0)
        pivot = M[k][k]
        for i in range(k + 1, n):
            row_i, row_k = M[i], M[k]
            lead = row_i[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * pivot - lead * row_k[j]) / prev
            row_i[k] = GaussianRational(0)
        prev = pivot
    det = M[n - 1][n - 1]
    return det if sign > 0 else -det


def exact_triplet_moments(w, A, v, count: int) -> list[GaussianRational]:
    """Markov parameters ``w* A^j v`` computed exactly from the binary values of the inputs."""
    Ae = [[GaussianRational.from_complex(x) for x in row] for row in A]
    ve = [GaussianRational.from_complex(x) for x in v]
    we = [GaussianRational.from_complex(x).conjugate() for x in w]
    out = []
    y = ve
    for j in range(count):
        if j:
            y = [sum((a * b for a, b in zip(row, y)), GaussianRational(0)) for row in Ae]
        out.append(sum((a * b for a, b in zip(we, y)), GaussianRational(0)))
    return out


def exact_moments(functional, count: int) -> list[GaussianRational]:
    """Moments ``m_0 .. m_{count-1}`` as exact values of the binary inputs."""
    if isinstance(functional, TripletFunctional):
        return exact_triplet_moments(functional.w, functional.A, functional.v, count)
    return [GaussianRational.from_complex(x) for x in functional.moments(count)]


def poly_mul(p: list, q: list) -> list:
    out = [GaussianRational(0) for _ in range(len(p) + len(q) - 1)]
    for i, a in enumerate(p):
        if a.is_zero():
            continue
        for j, b in enumerate(q):
            out[i + j] = out[i + j] + a * b
    return out


def apply_moments(m: list, p: list) -> GaussianRational:
    """``L(p) = sum_j p_j m_j`` for a coefficient list ``p`` (lowest degree first)."""
    return sum((c * m[j] for j, c in enumerate(p)), GaussianRational(0))


def solve(matrix, rhs) -> list[GaussianRational] | None:
    """Exact solution of a square system by Gaussian elimination; ``None`` if singular."""
    n = len(matrix)
    M = [list(row) + [b] for row, b in zip(matrix, rhs)]
    for k in range(n):
        piv = next((i for i in range(k, n) if not M[i][k].is_zero()), None)
        if piv is None:
            return None
        M[k], M[piv] = M[piv], M[k]
        for i in range(k + 1, n):
            f = M[i][k] / M[k][k]
            if not f.is_zero():
                M[i] = [a - f * b for a, b in zip(M[i], M[k])]
    x = [GaussianRational(0)] * n
    for i in reversed(range(n)):
        s = M[i][n] - sum((M[i][j] * x[j] for j in range(i + 1, n)), GaussianRational(0))
        x[i] = s / M[i][i]
    return x
