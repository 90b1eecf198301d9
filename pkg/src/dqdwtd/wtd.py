"""Waiting-time statistics from a split Lindblad generator.

Every function takes the no-jump generator ``L0``, monitored jump
superoperators and an initial state. ``L0`` is singular whenever the model
has a dark state, so formal inverses are realized as minimum-norm solves
with a consistency check (see :func:`dqdwtd.operators.solve_min_norm`).
"""
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import InconsistentSystemError, QuadratureError
from .liouvillian import Superoperator, vec_trace, vectorize
from .operators import expm, solve_min_norm

PROB_TOL = 1e-9
IMAG_TOL = 1e-10


def _data(op):
    return op.data if isinstance(op, Superoperator) else np.asarray(op, dtype=np.complex128)


def _vec(rho):
    rho = np.asarray(rho, dtype=np.complex128)
    return vectorize(rho) if rho.ndim == 2 else rho


def _real(value, what, scale=1.0):
    if abs(value.imag) > IMAG_TOL * max(1.0, scale):
        raise ArithmeticError(f"{what} has imaginary part {value.imag:.3e}")
    return float(value.real)


def _probability(value, what):
    p = _real(value, what)
    if p < -PROB_TOL or p > 1.0 + PROB_TOL:
        raise ArithmeticError(f"{what} = {p!r} lies outside [0, 1] beyond tolerance")
    return min(max(p, 0.0), 1.0)


def resolvent_apply(L0, v):
    """``-L0^{-1} v``: the state integrated over the no-jump evolution."""
    return solve_min_norm(_data(L0), -np.asarray(v, dtype=np.complex128))


def first_jump_probability(L0, Lj, rho):
    """Probability that the first monitored click is in channel ``j``.

    ``-Tr{Lj L0^{-1} rho}``.

    Raises
    ------
    InconsistentSystemError
        If ``rho`` can avoid clicking forever.
    """
    x = resolvent_apply(L0, _vec(rho))
    return _probability(vec_trace(_data(Lj) @ x), "first-jump probability")


def two_jump_probability(L0, Li, Lj, rho):
    """Probability that the first click is in ``i`` and the second in ``j``.

    ``Tr{Lj L0^{-1} Li L0^{-1} rho}``.
    """
    x = resolvent_apply(L0, _vec(rho))
    y = _data(Li) @ x
    if np.linalg.norm(y) == 0.0:
        return 0.0
    try:
        x2 = resolvent_apply(L0, y)
    except InconsistentSystemError as exc:
        raise InconsistentSystemError(
            "state after the first click can avoid a second click forever: " + str(exc),
            residual=exc.residual,
        ) from exc
    return _probability(vec_trace(_data(Lj) @ x2), "two-jump probability")


def mean_first_jump_time(L0, rho):
    """Mean time to the first monitored click, ``-Tr{L0^{-1} rho}``."""
    x = resolvent_apply(L0, _vec(rho))
    t = _real(vec_trace(x), "mean first-jump time", scale=abs(vec_trace(x)))
    if not t > 0:
        raise ArithmeticError(f"mean first-jump time is not positive: {t!r}")
    return t


def evolve_no_jump(L0, rho, t):
    return expm(_data(L0), t) @ _vec(rho)


def survival_probability(L0, rho, t):
    """Probability of no monitored click in ``[0, t]``."""
    return float(vec_trace(evolve_no_jump(L0, rho, t)).real)


def wtd_time_density(L0, Lj, rho, t):
    """Density of the first click happening in channel ``j`` at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    w = vec_trace(_data(Lj) @ evolve_no_jump(L0, rho, t))
    w = _real(w, "waiting-time density", scale=abs(w))
    if w < -1e-10:
        raise ArithmeticError(f"negative waiting-time density {w!r}")
    return w


def first_jump_time_density(L0, rho, t, jumps=None):
    """Density of the first click at time ``t`` in any monitored channel.

    With ``jumps`` the density is the explicit channel sum, cross-checked
    against ``-Tr{L0 exp(L0 t) rho}``; without it only the latter is
    available. The two agree when every unmonitored channel left in ``L0``
    preserves the trace, which holds for any generator built by
    :func:`dqdwtd.liouvillian.split_monitored`.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    l0 = _data(L0)
    v = evolve_no_jump(l0, rho, t)
    trace_loss = -vec_trace(l0 @ v)
    if jumps is None:
        return _real(trace_loss, "first-jump density", scale=abs(trace_loss))
    total = sum(vec_trace(_data(j) @ v) for j in _jump_list(jumps))
    scale = max(abs(total), np.linalg.norm(l0, 1) * np.linalg.norm(v, 1))
    if abs(total - trace_loss) > 1e-10 * scale:
        raise ArithmeticError(
            "channel-sum and trace-loss densities disagree; L0 contains "
            "trace-changing unmonitored terms"
        )
    return _real(total, "first-jump density", scale=abs(total))


def _jump_list(jumps):
    return list(jumps.values()) if isinstance(jumps, dict) else list(jumps)


@dataclass
class JumpProbabilityTable:
    """Probabilities of every ordered click sequence of a fixed length."""

    entries: dict = field(default_factory=dict)
    residual: float = 0.0

    def __getitem__(self, key):
        return self.entries[tuple(key) if not isinstance(key, str) else (key,)]

    def marginal(self, position, label):
        """Probability that click number ``position`` (0-based) is ``label``."""
        return sum(p for seq, p in self.entries.items() if seq[position] == label)


def jump_probability_table(L0, jumps, rho, length=1):
    """Probabilities of all monitored click sequences of ``length`` 1 or 2.

    For length 2 the last sequence is also obtained by complement, and the
    two evaluations must agree to 1e-9.
    """
    if length not in (1, 2):
        raise ValueError("length must be 1 or 2")
    labels = list(jumps)
    table = JumpProbabilityTable()
    if length == 1:
        for lab in labels:
            table.entries[(lab,)] = first_jump_probability(L0, jumps[lab], rho)
    else:
        x = resolvent_apply(L0, _vec(rho))
        for first in labels:
            y = _data(jumps[first]) @ x
            x2 = resolvent_apply(L0, y) if np.linalg.norm(y) > 0 else np.zeros_like(y)
            for second in labels:
                p = vec_trace(_data(jumps[second]) @ x2)
                table.entries[(first, second)] = _probability(p, "two-jump probability")
        last = tuple([labels[-1]] * 2)
        by_complement = 1.0 - sum(p for k, p in table.entries.items() if k != last)
        if abs(by_complement - table.entries[last]) > PROB_TOL:
            raise ArithmeticError(
                f"direct {table.entries[last]!r} and complement {by_complement!r} "
                f"evaluations of {last} disagree"
            )
    table.residual = 1.0 - sum(table.entries.values())
    return table


# --- jump-number (Dyson) decomposition --------------------------------------

_ROW_BUDGET = 1 << 16


def _invariant_subspace(v, generators, tol=1e-13):
    """Orthonormal basis of the smallest subspace holding ``v`` and closed under ``generators``."""
    basis = np.zeros((v.size, 0), dtype=np.complex128)
    frontier = v[:, None]
    while frontier.shape[1]:
        frontier = frontier - basis @ (basis.conj().T @ frontier)
        frontier = frontier - basis @ (basis.conj().T @ frontier)
        if not frontier.size:
            break
        u, s, _ = np.linalg.svd(frontier, full_matrices=False)
        keep = s > tol * max(1.0, s[0]) if s.size else np.zeros(0, bool)
        new = u[:, keep]
        if not new.shape[1]:
            break
        basis = np.hstack([basis, new])
        frontier = np.hstack([g @ new for g in generators])
    return basis


class _EigenPropagator:
    """exp(L0 tau) in the eigenbasis of a (reduced) diagonalizable generator."""

    def __init__(self, l0, jump, c, r):
        lam, vecs = np.linalg.eig(l0)
        self.lam = lam
        inv = np.linalg.inv(vecs)
        self.jump_t = (inv @ jump @ vecs).T
        self.c = inv @ c
        self.r = r @ vecs

    def start(self, s):
        return np.exp(np.outer(s, self.lam)) * self.c

    def step(self, rows, tau):
        return np.exp(np.outer(tau, self.lam)) * rows

    def jump(self, rows):
        return rows @ self.jump_t

    def read(self, rows):
        return rows @ self.r


class _ExpmPropagator:
    """Fallback for defective generators: one matrix exponential per time."""

    def __init__(self, l0, jump, c, r):
        self.l0, self.jump_t, self.c, self.r = l0, jump.T, c, r

    def start(self, s):
        return np.array([expm(self.l0, si) @ self.c for si in s])

    def step(self, rows, tau):
        return np.array([expm(self.l0, ti) @ row for row, ti in zip(rows, tau)])

    def jump(self, rows):
        return rows @ self.jump_t

    def read(self, rows):
        return rows @ self.r


def _k_jump_states(prop, k, s, x, w):
    """States after exactly ``k`` clicks in ``[0, s_i]`` for each endpoint ``s_i``."""
    if k == 0:
        return prop.start(s)
    n = x.size
    per = n**k
    chunk = max(1, _ROW_BUDGET // per)
    out = []
    for lo in range(0, s.size, chunk):
        sc = s[lo:lo + chunk]
        tau = np.outer(sc, x)
        inner = prop.jump(_k_jump_states(prop, k - 1, tau.ravel(), x, w))
        inner = prop.step(inner, (sc[:, None] - tau).ravel())
        inner = inner.reshape(sc.size, n, -1) * (np.outer(sc, w))[:, :, None]
        out.append(inner.sum(axis=1))
    return np.vstack(out)


def _gauss_legendre_unit(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _dyson(prop, t, K, nodes):
    x, w = _gauss_legendre_unit(nodes)
    s = np.array([float(t)])
    return np.array([prop.read(_k_jump_states(prop, k, s, x, w))[0] for k in range(K + 1)])


def jump_number_decomposition(L, L0, jumps, rho, t, K, nodes=64, tol=1e-6, cond_limit=1e8):
    """Probabilities ``P_0..P_K`` of exactly ``k`` monitored clicks in ``[0, t]``.

    Each ``k``-fold time-ordered integral is evaluated with iterated
    Gauss-Legendre quadrature (``nodes`` per layer) over the simplex
    ``0 <= t_1 <= ... <= t_k <= t``, summing over all channel sequences.
    The computation runs on the subspace generated from ``rho`` by ``L0``
    and the jumps, which is exact and keeps ``K = 2`` cheap.

    ``L`` is used only to check that ``L0`` plus the jumps rebuild it.

    Raises
    ------
    QuadratureError
        If doubling the node count moves any ``P_k`` by more than ``tol``.
    """
    if K < 0 or t < 0:
        raise ValueError("K and t must be non-negative")
    l0 = _data(L0)
    jump = sum((_data(j) for j in _jump_list(jumps)), np.zeros_like(l0))
    if L is not None:
        mismatch = np.max(np.abs(_data(L) - l0 - jump))
        if mismatch > 1e-12 * max(1.0, np.max(np.abs(_data(L)))):
            raise ValueError("L0 + jumps does not reproduce L")
    v = _vec(rho)
    q = _invariant_subspace(v, [l0, jump])
    l0r, jr = q.conj().T @ l0 @ q, q.conj().T @ jump @ q
    cr = q.conj().T @ v
    dim = int(round(np.sqrt(v.size)))
    rr = vectorize(np.eye(dim)) @ q

    if t == 0:
        return np.array([1.0] + [0.0] * K) * float(vec_trace(v).real)

    cond = np.linalg.cond(np.linalg.eig(l0r)[1])
    prop_cls = _EigenPropagator if cond < cond_limit else _ExpmPropagator
    prop = prop_cls(l0r, jr, cr, rr)
    coarse = _dyson(prop, t, K, nodes)
    fine = _dyson(prop, t, K, 2 * nodes)
    shift = np.max(np.abs(fine - coarse))
    if shift > tol:
        raise QuadratureError(
            f"Dyson quadrature not converged at t={t}: doubling {nodes} nodes shifted P_k by {shift:.2e}"
        )
    return fine.real
