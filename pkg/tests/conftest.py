from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import confluent_rows, measure_moments  # noqa: E402

# named moment fixtures
M_A = [1.0] * 12
M_B = [1.0, 0.0, 0.0, 1.0, 0.0]
M_B_EXT = [1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0]
M_C = [1.0, 2.0, 5.0, 14.0, 41.0, 122.0]
M_E = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
NU1_TWO = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]

# integer streams whose determinant sequences contain gaps at various places
GAP_FIXTURES = {
    "M_B": M_B,
    "M_B_ext": M_B_EXT,
    "gap_after_1": [1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0],
    "gap_after_5": [1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1],
    "leading_zeros": [0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0],
}


def m_c_stream(count: int) -> list[int]:
    """Moments of (delta_1 + delta_3) / 2, scaled to stay integer: (1 + 3^k) / 2."""
    return [(1 + 3**k) // 2 for k in range(count)]


def fibonacci(count: int) -> list[int]:
    out = [1, 1]
    while len(out) < count:
        out.append(out[-1] + out[-2])
    return out[:count]


def integer_measure(count: int) -> list[int]:
    """Moments of 2 delta_{-2} - delta_{-1} + 3 delta_0 + delta_1 - delta_2."""
    nodes, weights = [-2, -1, 0, 1, 2], [2, -1, 3, 1, -1]
    return [sum(w * x**k for x, w in zip(nodes, weights)) for k in range(count)]


def periodic(count: int) -> list[int]:
    base = [2, -1, 0, 3, 1]
    return [base[k % len(base)] for k in range(count)]


def random_ternary(seed: int, count: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return [int(x) for x in rng.integers(-1, 2, size=count)]


def integer_fixtures(count: int) -> dict[str, list[int]]:
    fx = {
        "m_c": m_c_stream(count),
        "fibonacci": fibonacci(count),
        "integer_measure": integer_measure(count),
        "periodic": periodic(count),
        "constant": [1] * count,
        "roots_of_unity_4": [1 if k % 4 == 0 else 0 for k in range(count)],
    }
    for seed in range(8):
        fx[f"ternary_{seed}"] = random_ternary(seed, count)
    return fx


@dataclass
class DiscreteMeasure:
    nodes: list[complex]
    weights: list[list[complex]]
    nu1: int

    @property
    def mults(self) -> list[int]:
        return [len(w) for w in self.weights]

    @property
    def n(self) -> int:
        return sum(self.mults)

    def moments(self, count: int) -> np.ndarray:
        m = measure_moments(self.nodes, self.weights, count)
        # the projection leaves O(eps) residue; the intended leading moments are exactly zero
        m[: self.nu1 - 1] = 0.0
        return m


def _separated(rng, count, complex_nodes, radius=1.5, sep=0.35):
    # greedy placement can jam on the real line, so restart after a while
    while True:
        pts: list[complex] = []
        for _ in range(200 * count):
            z = complex(rng.uniform(-radius, radius), rng.uniform(-radius, radius) if complex_nodes else 0.0)
            if all(abs(z - p) >= sep for p in pts):
                pts.append(z)
                if len(pts) == count:
                    return pts


def pivot_growth(m, n: int, start: int = 1) -> float:
    """Largest ``|Delta_{k+1} Delta_{k-1}| / |Delta_k|^2`` for ``start <= k < n``.

    This is the size of the monic recurrence coefficient gamma_{k+1}; a large
    value flags a near-breakdown where floating point recurrences lose digits.
    """
    m = np.asarray(m, dtype=complex)
    d = [1.0] + [abs(np.linalg.det(np.array([[m[i + j] for j in range(k)] for i in range(k)])))
                 for k in range(1, n + 1)]
    return max((d[k + 1] * d[k - 1] / d[k] ** 2 for k in range(start, n)), default=0.0)


def random_measure(
    rng: np.random.Generator,
    n_nodes: int,
    complex_nodes: bool = False,
    max_mult: int = 1,
    nu1: int = 1,
    max_total: int = 6,
    max_growth: float = 1e3,
) -> DiscreteMeasure:
    """Random derivative-weighted discrete measure with ``m_0 = .. = m_{nu1-2} = 0``.

    Leading zero moments are imposed by projecting the weight vector onto the
    null space of the first ``nu1 - 1`` confluent Vandermonde rows. The total
    weight count is capped at ``max_total``: beyond about six terms with
    derivative weights, ``Delta_{n-1}`` drops below ``1e-10`` of its Hadamard
    bound and the functional is numerically rank deficient. Near-breakdowns,
    where ``pivot_growth`` past the leading zeros exceeds ``max_growth``, are
    rejected as well.
    """
    for _ in range(1000):
        nodes = _separated(rng, n_nodes, complex_nodes)
        mults = [int(rng.integers(1, max_mult + 1)) for _ in nodes]
        total = sum(mults)
        if total < nu1 or total > max_total:
            continue
        mag = rng.uniform(0.5, 1.5, size=total)
        if complex_nodes:
            wv = mag * np.exp(2j * np.pi * rng.random(total))
        else:
            wv = mag * rng.choice([-1.0, 1.0], size=total) + 0j
        if nu1 > 1:
            R = confluent_rows(nodes, mults, nu1 - 1)
            wv = wv - np.linalg.pinv(R) @ (R @ wv)
        if not complex_nodes:
            wv = wv.real + 0j
        weights, pos = [], 0
        for s in mults:
            weights.append([complex(x) for x in wv[pos:pos + s]])
            pos += s
        m = measure_moments(nodes, weights, 2 * total)
        m[: nu1 - 1] = 0.0
        # generic position: trailing weights, the first nonzero moment and
        # Delta_{n-1} (against its Hadamard bound) stay well away from zero
        wmax = float(np.max(np.abs(wv)))
        H = np.array([[m[i + j] for j in range(total)] for i in range(total)])
        _, logdet = np.linalg.slogdet(H)
        log_hadamard = float(np.sum(np.log(np.linalg.norm(H, axis=1))))
        if (
            all(abs(w[-1]) > 0.1 * wmax for w in weights)
            and abs(m[nu1 - 1]) > 0.05 * np.max(np.abs(m[: total + 1]))
            and logdet - log_hadamard > np.log(1e-8)
            and pivot_growth(m, total, 1 if nu1 == 1 else nu1 + 1) <= max_growth
        ):
            return DiscreteMeasure(nodes, weights, nu1)
    raise RuntimeError("no admissible measure found")


def measure_family(seed: int, count: int) -> list[DiscreteMeasure]:
    """Mixed batch: real/complex nodes, simple/multiple nodes, nu(1) in {1, 2, 3}."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        complex_nodes = i % 2 == 1
        max_mult = 1 if i % 4 < 2 else 3
        nu1 = 1 + (i // 4) % 3
        n_nodes = int(rng.integers(nu1, 5))
        out.append(random_measure(rng, n_nodes, complex_nodes, max_mult, nu1))
    return out


def _min_coupling_cosine(A, v, w) -> float:
    from fopgauss import lanczos

    state, _ = lanczos(A, v, w)
    V, W = state.V, state.W
    return min(
        abs(np.vdot(W[:, i], V[:, i])) / (np.linalg.norm(W[:, i]) * np.linalg.norm(V[:, i]))
        for i in range(state.step)
    )


def measure_triplet(seed, complex_nodes, min_cosine=1e-2):
    """Quasi-definite triplet: a generic simple-node measure behind an orthogonal similarity.

    Generic position also excludes near-breakdowns: every Lanczos pair keeps
    ``|w_i* v_i| >= min_cosine |w_i| |v_i|``. Below about ``1e-3`` both the
    plain and the look-ahead recurrence lose digits in ``T``.
    """
    rng = np.random.default_rng(seed)
    while True:
        mu = random_measure(rng, int(rng.integers(1, 7)), complex_nodes, 1, 1)
        N = len(mu.nodes)
        Q, _ = np.linalg.qr(rng.normal(size=(N, N)))
        A = Q @ np.diag(mu.nodes) @ Q.T
        v = rng.uniform(0.5, 1.5, size=N) + 0j
        w = np.conj(np.array([x[0] for x in mu.weights]) / v)
        if _min_coupling_cosine(A, Q @ v, Q @ w) >= min_cosine:
            return A, Q @ v, Q @ w, mu


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)

