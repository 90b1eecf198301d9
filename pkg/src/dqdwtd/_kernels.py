"""Quantum-jump trajectory kernels.

Both backends consume the same pre-drawn uniforms, two per jump: the first
sets the squared-norm threshold that fixes the jump time, the second picks
the channel. Given identical uniforms they produce the same records up to
floating-point rounding.

Arguments shared by the kernels:

``gen``      ``-i H_eff`` with ``H_eff = H - (i/2) sum_k c_k^+ c_k``
``prop``     ``expm(gen * dt)``, the exact marching step
``ops``      jump operators scaled by ``sqrt(rate)``, shape ``(K, D, D)``
``record``   which channels produce a click record

Status codes: 0 dark state reached, 1 ``t_max`` reached, 2 ran out of
uniforms (caller retries with a longer stream), 3 click buffer full.
"""
import numpy as np

from ._accel import njit

DARK, TIMEOUT, NEED_RANDOM, CLICKS_FULL = 0, 1, 2, 3
DARK_TOL = 1e-14
TIME_RTOL = 1e-10


@njit(cache=True)
def _matvec(m, v, out):
    n = v.shape[0]
    for i in range(n):
        acc = 0j
        for j in range(n):
            acc += m[i, j] * v[j]
        out[i] = acc


@njit(cache=True)
def _norm2(v):
    acc = 0.0
    for i in range(v.shape[0]):
        acc += v[i].real * v[i].real + v[i].imag * v[i].imag
    return acc


@njit(cache=True)
def _taylor_apply(gen, v, s, out):
    # exp(gen * s) v; callers keep ||gen * s||_1 <= 1
    n = v.shape[0]
    term = v.copy()
    tmp = np.empty(n, dtype=np.complex128)
    for i in range(n):
        out[i] = v[i]
    for k in range(1, 60):
        _matvec(gen, term, tmp)
        for i in range(n):
            term[i] = tmp[i] * (s / k)
            out[i] += term[i]
        if _norm2(term) <= 1e-36 * _norm2(out):
            break


@njit(cache=True)
def _jump_weights(ops, v, weights, scratch):
    total = 0.0
    for k in range(ops.shape[0]):
        _matvec(ops[k], v, scratch)
        weights[k] = _norm2(scratch)
        total += weights[k]
    return total


@njit(cache=True)
def run_one(gen, prop, ops, record, psi0, uniforms, dt, t_max, labels, times, norms):
    """Single trajectory; returns ``(status, n_clicks, n_uniforms_used)``.

    ``norms`` (may be empty) receives the squared norm after every marching
    step, with a NaN after each jump.
    """
    d = psi0.shape[0]
    n_ops = ops.shape[0]
    psi = psi0 / np.sqrt(_norm2(psi0))
    phi = np.empty(d, dtype=np.complex128)
    nxt = np.empty(d, dtype=np.complex128)
    scratch = np.empty(d, dtype=np.complex128)
    weights = np.empty(n_ops, dtype=np.float64)
    t = 0.0
    used = 0
    n_clicks = 0
    n_norms = 0
    max_clicks = labels.shape[0]
    max_norms = norms.shape[0]
    while True:
        if _jump_weights(ops, psi, weights, scratch) <= DARK_TOL:
            return DARK, n_clicks, used
        if used + 2 > uniforms.shape[0]:
            return NEED_RANDOM, n_clicks, used
        u = uniforms[used]
        r = uniforms[used + 1]
        used += 2

        for i in range(d):
            phi[i] = psi[i]
        tau = 0.0
        crossed = False
        while t + tau < t_max:
            _matvec(prop, phi, nxt)
            nn = _norm2(nxt)
            if n_norms < max_norms:
                norms[n_norms] = nn
                n_norms += 1
            if nn <= u:
                crossed = True
                break
            for i in range(d):
                phi[i] = nxt[i]
            tau += dt
        if not crossed:
            return TIMEOUT, n_clicks, used

        # safeguarded Newton on ||psi(s)||^2 = u; d/ds ||psi||^2 = -(total jump weight)
        lo = 0.0
        hi = dt
        s = 0.5 * dt
        for _ in range(200):
            _taylor_apply(gen, phi, s, nxt)
            f = _norm2(nxt) - u
            if f > 0.0:
                lo = s
            else:
                hi = s
            slope = _jump_weights(ops, nxt, weights, scratch)
            s_new = 0.5 * (lo + hi)
            if slope > 0.0:
                cand = s + f / slope
                if lo < cand < hi:
                    s_new = cand
            done = abs(s_new - s) <= TIME_RTOL * (t + tau + s) or hi - lo <= TIME_RTOL * (t + tau + hi)
            s = s_new
            if done:
                break
        _taylor_apply(gen, phi, s, nxt)
        t_jump = t + tau + s
        if t_jump >= t_max:
            return TIMEOUT, n_clicks, used

        total = _jump_weights(ops, nxt, weights, scratch)
        target = r * total
        k = n_ops - 1
        acc = 0.0
        for kk in range(n_ops):
            acc += weights[kk]
            if weights[kk] > 0.0 and target < acc:
                k = kk
                break
        while weights[k] <= 0.0 and k > 0:
            k -= 1
        _matvec(ops[k], nxt, psi)
        nrm = np.sqrt(_norm2(psi))
        for i in range(d):
            psi[i] = psi[i] / nrm
        t = t_jump
        if n_norms < max_norms:
            norms[n_norms] = np.nan
            n_norms += 1
        if record[k]:
            if n_clicks >= max_clicks:
                return CLICKS_FULL, n_clicks, used
            labels[n_clicks] = k
            times[n_clicks] = t
            n_clicks += 1


@njit(cache=True)
def run_batch_numba(gen, prop, ops, record, psi0, uniforms, dt, t_max, labels, times, n_clicks, status):
    empty = np.empty(0, dtype=np.float64)
    for i in range(uniforms.shape[0]):
        st, nc, _ = run_one(gen, prop, ops, record, psi0, uniforms[i], dt, t_max,
                            labels[i], times[i], empty)
        status[i] = st
        n_clicks[i] = nc


def _taylor_rows(gen, rows, s):
    """Row-wise ``exp(gen * s_i) rows[i]`` for ``||gen s_i||_1 <= 1``."""
    out = rows.copy()
    term = rows.copy()
    gt = gen.T
    for k in range(1, 60):
        term = (term @ gt) * (s / k)[:, None]
        out += term
        if np.all(np.sum(np.abs(term) ** 2, axis=1) <= 1e-36 * np.sum(np.abs(out) ** 2, axis=1)):
            break
    return out


def run_batch_numpy(gen, prop, ops, record, psi0, uniforms, dt, t_max, labels, times, n_clicks, status):
    """Vectorized counterpart of :func:`run_batch_numba`; all trajectories advance together."""
    n_traj, n_uni = uniforms.shape
    max_clicks = labels.shape[1]
    propt = prop.T
    psi = np.tile(psi0 / np.linalg.norm(psi0), (n_traj, 1))
    t = np.zeros(n_traj)
    used = np.zeros(n_traj, dtype=np.int64)
    n_clicks[:] = 0
    status[:] = -1
    active = np.arange(n_traj)

    while active.size:
        w = np.sum(np.abs(np.einsum("kij,nj->nki", ops, psi[active])) ** 2, axis=2)
        dark = w.sum(axis=1) <= DARK_TOL
        status[active[dark]] = DARK
        active = active[~dark]
        short = used[active] + 2 > n_uni
        status[active[short]] = NEED_RANDOM
        active = active[~short]
        if not active.size:
            break
        u = uniforms[active, used[active]]
        r = uniforms[active, used[active] + 1]
        used[active] += 2

        phi = psi[active].copy()
        tau = np.zeros(active.size)
        crossed = np.zeros(active.size, dtype=bool)
        pending = t[active] + tau < t_max
        while pending.any():
            idx = np.nonzero(pending)[0]
            nxt = phi[idx] @ propt
            hit = np.sum(np.abs(nxt) ** 2, axis=1) <= u[idx]
            crossed[idx[hit]] = True
            pending[idx[hit]] = False
            adv = idx[~hit]
            phi[adv] = nxt[~hit]
            tau[adv] += dt
            pending[adv] = t[active[adv]] + tau[adv] < t_max

        status[active[~crossed]] = TIMEOUT
        keep = crossed
        active, phi, tau, u, r = active[keep], phi[keep], tau[keep], u[keep], r[keep]
        if not active.size:
            break

        lo = np.zeros(active.size)
        hi = np.full(active.size, dt)
        base = t[active] + tau
        s = 0.5 * hi
        open_ = np.ones(active.size, dtype=bool)
        for _ in range(200):
            idx = np.nonzero(open_)[0]
            if not idx.size:
                break
            v = _taylor_rows(gen, phi[idx], s[idx])
            f = np.sum(np.abs(v) ** 2, axis=1) - u[idx]
            pos = f > 0.0
            lo[idx[pos]] = s[idx[pos]]
            hi[idx[~pos]] = s[idx[~pos]]
            slope = np.sum(np.abs(np.einsum("kij,nj->nki", ops, v)) ** 2, axis=(1, 2))
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = s[idx] + f / slope
            ok = (slope > 0.0) & (cand > lo[idx]) & (cand < hi[idx])
            s_new = np.where(ok, cand, 0.5 * (lo[idx] + hi[idx]))
            done = (np.abs(s_new - s[idx]) <= TIME_RTOL * (base[idx] + s[idx])) | (
                hi[idx] - lo[idx] <= TIME_RTOL * (base[idx] + hi[idx]))
            s[idx] = s_new
            open_[idx[done]] = False
        phi = _taylor_rows(gen, phi, s)
        t_jump = base + s
        late = t_jump >= t_max
        status[active[late]] = TIMEOUT
        keep = ~late
        active, phi, t_jump, r = active[keep], phi[keep], t_jump[keep], r[keep]

        cand = np.einsum("kij,nj->nki", ops, phi)
        w = np.sum(np.abs(cand) ** 2, axis=2)
        cum = np.cumsum(w, axis=1)
        target = r * cum[:, -1]
        eligible = (w > 0.0) & (target[:, None] < cum)
        last_positive = w.shape[1] - 1 - np.argmax((w > 0.0)[:, ::-1], axis=1)
        k = np.where(eligible.any(axis=1), np.argmax(eligible, axis=1), last_positive)
        new = cand[np.arange(active.size), k]
        psi[active] = new / np.linalg.norm(new, axis=1)[:, None]
        t[active] = t_jump

        rec = record[k]
        full = rec & (n_clicks[active] >= max_clicks)
        status[active[full]] = CLICKS_FULL
        write = rec & ~full
        ia = active[write]
        pos = n_clicks[ia]
        labels[ia, pos] = k[write]
        times[ia, pos] = t_jump[write]
        n_clicks[ia] += 1
        active = active[~full]
