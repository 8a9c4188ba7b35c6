"""Non-Hermitian Lanczos process, plain and with look-ahead, with breakdown classification."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core import DEFAULT_TOLERANCES, TolerancePolicy, principal_sqrt
from .exceptions import ZeroInitialCoupling
from .fop import BlockTridiagonal
from .hankel import HankelAnalysis

__all__ = [
    "BreakdownKind",
    "StopReason",
    "LanczosState",
    "BreakdownReport",
    "lanczos",
    "look_ahead_lanczos",
    "classify_breakdown",
    "block_biorthogonality_residual",
    "krylov_residuals",
]


class BreakdownKind(enum.Enum):
    NONE = "none"
    LUCKY = "lucky"
    SERIOUS = "serious"
    INCURABLE = "incurable_within_bound"


class StopReason(enum.Enum):
    N_MAX = "n_max"
    V_VANISHED = "v_vanished"
    W_VANISHED = "w_vanished"
    BOTH_VANISHED = "both_vanished"
    COUPLING = "coupling_vanished"
    INCURABLE_BOUND = "incurable_bound"
    EXHAUSTED = "space_exhausted"


@dataclass(frozen=True)
class BreakdownReport:
    """Outcome of a Lanczos run: kind, step at which it occurred, and a human-readable detail."""

    kind: BreakdownKind
    step: int
    detail: str = ""


@dataclass(frozen=True)
class LanczosState:
    """Snapshot of a stopped Lanczos run.

    Attributes
    ----------
    V, W : ndarray
        Basis vectors ``v_0 .. v_{n-1}`` and ``w_0 .. w_{n-1}`` as columns.
    T : BlockTridiagonal
        ``n x n`` matrix with ``A V = V T^T + v_hat e_n^T``.
    nu : tuple of int
        Block starts (regular indices) found so far, including the block
        closed at the last step.
    block_start : int
        ``nu(t)`` of the block that is current when the run stops.
    omega : ndarray
        Gram matrix ``W^(t)* V^(t)`` of the current block.
    eta : tuple of complex
        Cross-block couplings ``eta_0 = 1, eta_1, ...``.
    step : int
        Number of completed iterations (size of ``T``).
    v_hat, w_hat : ndarray
        Unnormalized residual vectors of the last iteration.
    stop : StopReason
    truncated : bool
        True when the run ended with an open (singular) block.
    """

    V: np.ndarray
    W: np.ndarray
    T: BlockTridiagonal
    nu: tuple[int, ...]
    block_start: int
    omega: np.ndarray
    eta: tuple[complex, ...]
    step: int
    v_hat: np.ndarray
    w_hat: np.ndarray
    stop: StopReason
    truncated: bool = False
    v_hat_norm: float = 0.0
    w_hat_norm: float = 0.0
    coupling: complex = 0j
    look_ahead: bool = False
    A: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.step

    def blocks(self) -> list[tuple[int, int]]:
        """Half-open index ranges of the blocks covering ``0 .. step-1``."""
        starts = [s for s in self.nu if s < self.step]
        ends = starts[1:] + [self.step]
        return list(zip(starts, ends))

    def regular_T(self) -> np.ndarray:
        """Leading block ``T_{nu(t)}`` for the last regular index ``nu(t)``."""
        k = self.block_start
        return np.array(self.T.matrix[:k, :k])


def _prepare(A, v, w):
    A = np.array(A, dtype=complex)
    v = np.array(v, dtype=complex).ravel()
    w = np.array(w, dtype=complex).ravel()
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if v.shape[0] != A.shape[0] or w.shape[0] != A.shape[0]:
        raise ValueError("v and w must match the dimension of A")
    return A, v, w


def _vanished(x: np.ndarray, ref: float, tol: TolerancePolicy) -> bool:
    return float(np.linalg.norm(x)) <= tol.residual_tol * ref


def lanczos(
    A, v, w, n_max: int | None = None, tol: TolerancePolicy = DEFAULT_TOLERANCES
) -> tuple[LanczosState, BreakdownReport]:
    """Plain non-Hermitian Lanczos biorthogonalization with ``w_i* v_i = 1``.

    The run stops at ``n_max`` iterations (default: the dimension), when the
    Krylov space is exhausted (no breakdown), when ``v_hat`` or ``w_hat``
    vanishes earlier (lucky), or when ``w_hat* v_hat``
    vanishes relative to ``|w_hat| |v_hat|`` (serious).

    Raises
    ------
    ZeroInitialCoupling
        If ``|w* v| <= residual_tol |v| |w|``.
    """
    A, v, w = _prepare(A, v, w)
    N = A.shape[0]
    n_max = N if n_max is None else min(n_max, N)
    if n_max < 1:
        raise ValueError("n_max must be positive")
    c0 = np.vdot(w, v)
    if abs(c0) <= tol.residual_tol * np.linalg.norm(v) * np.linalg.norm(w):
        raise ZeroInitialCoupling(f"|w* v| = {abs(c0):.3e} is zero relative to |v| |w|")
    normA = float(np.linalg.norm(A, 2))
    b0 = principal_sqrt(c0)
    Vs = [v / b0]
    Ws = [w / np.conj(b0)]
    alphas: list[complex] = []
    betas: list[complex] = []
    v_prev = np.zeros(N, dtype=complex)
    w_prev = np.zeros(N, dtype=complex)
    b_prev = 0j
    stop = StopReason.N_MAX
    coupling = 0j
    n = 0
    while True:
        n += 1
        vk, wk = Vs[-1], Ws[-1]
        Av = A @ vk
        a = complex(np.vdot(wk, Av))
        alphas.append(a)
        v_hat = Av - a * vk - b_prev * v_prev
        w_hat = A.conj().T @ wk - np.conj(a) * wk - np.conj(b_prev) * w_prev
        vz = _vanished(v_hat, normA * np.linalg.norm(vk), tol)
        wz = _vanished(w_hat, normA * np.linalg.norm(wk), tol)
        coupling = complex(np.vdot(w_hat, v_hat))
        if n >= N:
            # the residuals vanish in exact arithmetic; what is left is roundoff
            stop = StopReason.EXHAUSTED
            break
        if vz and wz:
            stop = StopReason.BOTH_VANISHED
            break
        if vz:
            stop = StopReason.V_VANISHED
            break
        if wz:
            stop = StopReason.W_VANISHED
            break
        if abs(coupling) <= tol.zero_det_tol * np.linalg.norm(v_hat) * np.linalg.norm(w_hat):
            stop = StopReason.COUPLING
            break
        if n >= n_max:
            stop = StopReason.N_MAX
            break
        b = principal_sqrt(coupling)
        betas.append(b)
        v_prev, w_prev, b_prev = vk, wk, b
        Vs.append(v_hat / b)
        Ws.append(w_hat / np.conj(b))

    J = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
    T = BlockTridiagonal(J, tuple(range(n + 1)), tuple(betas))
    state = LanczosState(
        V=np.column_stack(Vs),
        W=np.column_stack(Ws),
        T=T,
        nu=tuple(range(n + 1)),
        block_start=n,
        omega=np.array([[np.vdot(Ws[-1], Vs[-1])]]),
        eta=(),
        step=n,
        v_hat=v_hat,
        w_hat=w_hat,
        stop=stop,
        v_hat_norm=float(np.linalg.norm(v_hat)),
        w_hat_norm=float(np.linalg.norm(w_hat)),
        coupling=coupling,
        A=A,
    )
    return state, _raw_report(state)


def _omega_regular(omega: np.ndarray, Wb: np.ndarray, Vb: np.ndarray, tol: TolerancePolicy) -> bool:
    s = sla.svdvals(omega)
    scale = sla.svdvals(Wb)[0] * sla.svdvals(Vb)[0]
    return bool(s[-1] >= tol.zero_det_tol * scale) and s[-1] > 0


def look_ahead_lanczos(
    A, v, w, n_max: int | None = None, tol: TolerancePolicy = DEFAULT_TOLERANCES
) -> tuple[LanczosState, BreakdownReport]:
    """Look-ahead Lanczos with block biorthogonality ``W^(t)* V^(k) = 0`` for ``t != k``.

    At step ``n`` the block Gram matrix ``Omega = W^(t)* V^(t)`` is tested for
    regularity (``sigma_min >= zero_det_tol |W^(t)| |V^(t)|``). A regular block is
    closed with

        v_hat = A v_{n-1} - V^(t) a - gamma v_{nu(t-1)},
        a = Omega^{-1} W^(t)* A v_{n-1},  gamma = w_{nu(t)-1}* A v_{n-1} / eta_t,

    where ``w_{nu(t)-1}* A v_{n-1}`` is evaluated as ``beta_{nu(t)} w_{nu(t)}* v_{n-1}``;
    the two agree under block biorthogonality and the second form does not
    pick up the drift in ``A v_{n-1}``. Otherwise the block grows with ``a = 0``. ``beta_n = |v_hat|``.
    The run stops when ``v_hat`` or ``w_hat`` vanishes, at ``n_max``
    (default ``2 N``), or when a block is still open at step ``n >= N``; then
    every later Hankel determinant vanishes by the rank bound. A regular
    step reaching ``n = N`` exhausts the space and ends the run.
    """
    A, v, w = _prepare(A, v, w)
    N = A.shape[0]
    if not np.any(v) or not np.any(w):
        raise ValueError("v and w must be nonzero")
    n_max = 2 * N if n_max is None else n_max
    if n_max < 1:
        raise ValueError("n_max must be positive")
    normA = float(np.linalg.norm(A, 2))
    AH = A.conj().T
    b0 = float(np.linalg.norm(v))
    Vs = [v / b0]
    Ws = [w / b0]
    T = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    betas: list[complex] = []
    nu = [0]
    eta = [1.0 + 0j]
    t = 0
    stop = StopReason.N_MAX
    truncated = False
    omega = np.zeros((0, 0), dtype=complex)
    n = 0
    coupling = 0j
    while True:
        n += 1
        lo = nu[t]
        Vb = np.column_stack(Vs[lo:n])
        Wb = np.column_stack(Ws[lo:n])
        omega = Wb.conj().T @ Vb
        Av = A @ Vs[n - 1]
        AHw = AH @ Ws[n - 1]
        if _omega_regular(omega, Wb, Vb, tol):
            if t > 0:
                gamma = betas[lo - 1] * complex(np.vdot(Ws[lo], Vs[n - 1])) / eta[t]
                prev = nu[t - 1]
            else:
                gamma, prev = 0j, None
            a = sla.solve(omega, Wb.conj().T @ Av)
            v_hat = Av - Vb @ a
            w_hat = AHw - Wb @ np.conj(a)
            T[n - 1, lo:n] = a
            if prev is not None:
                v_hat = v_hat - gamma * Vs[prev]
                w_hat = w_hat - np.conj(gamma) * Ws[prev]
                T[n - 1, prev] += gamma
            eta.append(complex(np.vdot(Ws[n - 1], Vs[lo])))
            t += 1
            nu.append(n)
            truncated = False
        else:
            v_hat = Av
            w_hat = AHw
            truncated = True
        vz = _vanished(v_hat, normA * np.linalg.norm(Vs[n - 1]), tol)
        wz = _vanished(w_hat, normA * np.linalg.norm(Ws[n - 1]), tol)
        coupling = complex(np.vdot(w_hat, v_hat))
        if n >= N and not truncated:
            stop = StopReason.EXHAUSTED
            break
        if vz or wz:
            stop = {
                (True, True): StopReason.BOTH_VANISHED,
                (True, False): StopReason.V_VANISHED,
                (False, True): StopReason.W_VANISHED,
            }[(vz, wz)]
            break
        if truncated and n >= N:
            stop = StopReason.INCURABLE_BOUND
            break
        if n >= n_max:
            stop = StopReason.N_MAX
            break
        b = float(np.linalg.norm(v_hat))
        betas.append(b + 0j)
        T[n - 1, n] = b
        Vs.append(v_hat / b)
        Ws.append(w_hat / b)

    Tn = T[:n, :n]
    gpos = tuple(
        (nu[j] - 1, nu[j - 2]) for j in range(2, len(nu)) if nu[j] <= n
    )
    state = LanczosState(
        V=np.column_stack(Vs[:n]),
        W=np.column_stack(Ws[:n]),
        T=BlockTridiagonal(Tn, tuple(nu), tuple(betas[: n - 1]), gpos),
        nu=tuple(nu),
        block_start=nu[-1],
        omega=omega,
        eta=tuple(eta),
        step=n,
        v_hat=v_hat,
        w_hat=w_hat,
        stop=stop,
        truncated=truncated,
        v_hat_norm=float(np.linalg.norm(v_hat)),
        w_hat_norm=float(np.linalg.norm(w_hat)),
        coupling=coupling,
        look_ahead=True,
        A=A,
    )
    return state, _raw_report(state)


_RAW_KIND = {
    StopReason.N_MAX: BreakdownKind.NONE,
    StopReason.EXHAUSTED: BreakdownKind.NONE,
    StopReason.V_VANISHED: BreakdownKind.LUCKY,
    StopReason.W_VANISHED: BreakdownKind.LUCKY,
    StopReason.BOTH_VANISHED: BreakdownKind.LUCKY,
    StopReason.COUPLING: BreakdownKind.SERIOUS,
    StopReason.INCURABLE_BOUND: BreakdownKind.INCURABLE,
}


def _detail(state: LanczosState) -> str:
    s = state.stop
    if s is StopReason.EXHAUSTED:
        return f"Krylov space exhausted at step {state.step}"
    if s is StopReason.N_MAX:
        return f"iteration limit reached at step {state.step}" + (" with an open block" if state.truncated else "")
    if s is StopReason.COUPLING:
        return f"w_hat* v_hat = {abs(state.coupling):.3e} with |v_hat| = {state.v_hat_norm:.3e}, |w_hat| = {state.w_hat_norm:.3e}"
    if s is StopReason.INCURABLE_BOUND:
        return f"block starting at {state.block_start} still singular at step {state.step}"
    which = {StopReason.V_VANISHED: "v_hat", StopReason.W_VANISHED: "w_hat", StopReason.BOTH_VANISHED: "v_hat and w_hat"}[s]
    return f"{which} vanished at step {state.step}"


def _raw_report(state: LanczosState) -> BreakdownReport:
    return BreakdownReport(_RAW_KIND[state.stop], state.step, _detail(state))


def classify_breakdown(state: LanczosState, analysis: HankelAnalysis) -> BreakdownReport:
    """Map the stop condition and the determinant tail onto a breakdown kind.

    Exhausting the whole space is no breakdown. Both residuals vanishing
    earlier is lucky (an invariant subspace pair). A single vanishing
    residual right after a regular step certifies an incurable breakdown by
    itself: one Krylov space is invariant, so the moments have rank ``n`` and
    every later determinant vanishes, while ``Delta_{n-1} != 0``. This
    certificate is preferred over the floating determinant pattern, which
    can lose ``Delta_{n-1}`` for ill-conditioned Hankel matrices. Otherwise a
    stop whose last regular index is where the determinant tail becomes
    identically zero (certified by the rank bound) is incurable. A vanishing
    coupling with nonvanishing vectors is serious.
    """
    s = state.stop
    if s is StopReason.BOTH_VANISHED:
        return BreakdownReport(BreakdownKind.LUCKY, state.step, _detail(state))
    inc = analysis.incurable_from
    if s in (StopReason.V_VANISHED, StopReason.W_VANISHED) and not state.truncated:
        n = state.step
        note = "" if inc == n else f" (determinant pattern reports rank {inc})"
        return BreakdownReport(
            BreakdownKind.INCURABLE, n,
            f"Krylov space invariant after the regular step {n}; " + _detail(state) + note,
        )
    if s not in (StopReason.N_MAX, StopReason.EXHAUSTED) and inc is not None and inc == state.block_start and (
        analysis.tail_certified or s is StopReason.INCURABLE_BOUND
    ):
        return BreakdownReport(
            BreakdownKind.INCURABLE, inc,
            f"Delta_{inc - 1} nonzero and all later determinants vanish; " + _detail(state),
        )
    return BreakdownReport(_RAW_KIND[s], state.step, _detail(state))


def block_biorthogonality_residual(state: LanczosState) -> float:
    """Largest ``|w_i* v_j| / (|w_i| |v_j|)`` over pairs in different blocks."""
    V, W = state.V, state.W
    G = W.conj().T @ V
    scale = np.outer(np.linalg.norm(W, axis=0), np.linalg.norm(V, axis=0))
    n = state.step
    label = np.zeros(n, dtype=int)
    for b, (lo, hi) in enumerate(state.blocks()):
        label[lo:hi] = b
    off = label[:, None] != label[None, :]
    if not np.any(off):
        return 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, np.abs(G) / scale, 0.0)
    return float(np.max(rel[off]))


def krylov_residuals(state: LanczosState) -> tuple[float, float]:
    """Relative residuals of ``A V = V T^T + v_hat e_n^T`` and ``A* W = W T^* + w_hat e_n^T``.

    Each is divided by ``|A| |V|`` (respectively ``|A| |W|``) in the 2-norm.
    """
    A, V, W = state.A, state.V, state.W
    T = state.T.matrix
    n = state.step
    en = np.zeros(n)
    en[-1] = 1.0
    rv = A @ V - V @ T.T - np.outer(state.v_hat, en)
    rw = A.conj().T @ W - W @ T.conj().T - np.outer(state.w_hat, en)
    normA = np.linalg.norm(A, 2)
    sv = normA * np.linalg.norm(V, 2)
    sw = normA * np.linalg.norm(W, 2)
    return (
        float(np.linalg.norm(rv, 2) / sv) if sv > 0 else 0.0,
        float(np.linalg.norm(rw, 2) / sw) if sw > 0 else 0.0,
    )
