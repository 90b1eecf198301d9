"""Quantum-jump unraveling of the detector dynamics.

Pure states evolve under ``H_eff = H - (i/2) sum_k rate_k L_k^+ L_k``. A
jump happens when the squared norm falls to a uniform random threshold;
the time is refined by safeguarded Newton steps inside a bisection
bracket and the channel is drawn with weights
``rate_k ||L_k psi||**2``. Unmonitored channels (electron injection) jump
but leave no click, exactly as in the no-jump generator of the
waiting-time engine, so ensemble frequencies estimate the same
probabilities.

Randomness is counter-based (see :func:`trajectory_uniforms`): each
trajectory owns a fixed region of a Philox stream keyed by the master
seed, so results depend neither on run order nor on the backend.
"""
import warnings
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from . import _kernels
from ._accel import HAVE_NUMBA, default_backend
from .errors import DQDWTDError
from .liouvillian import ELECTRON_OUT, PHOTON_LEAK
from .model import build_model, initial_ket
from .operators import dag, expm

DEFAULT_T_MAX_KAPPA = 200.0
BLOCK = 16


@dataclass
class ClickRecord:
    """Clicks of one trajectory as ``(label, time)`` pairs in time order.

    ``terminated`` is true when the trajectory reached a dark state;
    ``t_max_exceeded`` flags a trajectory cut off by the time limit.
    """

    clicks: list = field(default_factory=list)
    terminated: bool = False
    t_max_exceeded: bool = False
    norms: np.ndarray = field(default=None, repr=False)

    @property
    def labels(self):
        return [lab for lab, _ in self.clicks]

    @property
    def times(self):
        return [t for _, t in self.clicks]


@dataclass
class EnsembleStats:
    """Click statistics of an ensemble; each estimate is ``(value, stderr)``.

    Frequencies are over all ``n_traj`` trajectories. Times are in the
    model's frequency unit (multiply by kappa for units of ``1/kappa``).
    """

    n_traj: int
    seed: int
    first_click_freq: dict
    sequence_freq: dict
    mean_first_click_time: tuple
    n_unterminated: int = 0
    click_count_hist: dict = field(default_factory=dict)

    def position_freq(self, position, label):
        """Frequency with which click ``position`` (0-based) is ``label``."""
        if position == 0:
            return self.first_click_freq[label]
        count = sum(round(p * self.n_traj) for seq, (p, _) in self.sequence_freq.items()
                    if seq[position] == label)
        return _frequency(count, self.n_traj)


def _frequency(count, n):
    p = count / n
    return p, sqrt(p * (1.0 - p) / n)


def _resolve_backend(backend):
    backend = backend or default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise DQDWTDError("numba backend requested but numba is unavailable or disabled")
    return backend


class _Unraveling:
    """Arrays shared by every trajectory of one model."""

    def __init__(self, H, channels):
        h = np.asarray(H, dtype=np.complex128)
        self.labels = [ch.label for ch in channels]
        self.ops = np.array([sqrt(ch.rate) * ch.op for ch in channels], dtype=np.complex128)
        decay = sum((dag(c) @ c for c in self.ops), np.zeros_like(h))
        self.gen = np.ascontiguousarray(-1j * (h - 0.5j * decay))
        self.dt = 1.0 / max(np.linalg.norm(self.gen, 1), 1e-300)
        self.prop = np.ascontiguousarray(expm(self.gen, self.dt))
        self.monitored = np.array([ch.monitored for ch in channels])

    def record_mask(self, record):
        if record is None:
            return self.monitored.copy()
        unknown = set(record) - set(self.labels)
        if unknown:
            raise ValueError(f"unknown channel labels {sorted(unknown)}")
        return np.array([lab in record for lab in self.labels])


def trajectory_uniforms(seed, index, size):
    """Uniform stream of trajectory ``index`` under master ``seed``.

    The first ``BLOCK`` draws come from the shared stream
    ``Philox(key=seed)`` at offset ``index * BLOCK``; further draws come
    from the same key with the counter's top word set to ``index + 1``,
    a region the shared stream never reaches.
    """
    if not 0 <= seed < 2**64 or index < 0:
        raise ValueError("seed must be in [0, 2**64) and index >= 0")
    # advance() counts 4-word Philox blocks
    head = np.random.Philox(key=seed).advance(index * BLOCK // 4)
    out = np.random.Generator(head).random(min(size, BLOCK))
    if size > BLOCK:
        ext = np.random.Philox(key=seed, counter=[0, 0, 0, index + 1])
        out = np.concatenate([out, np.random.Generator(ext).random(size - BLOCK)])
    return out


def ensemble_uniforms(seed, n_traj):
    """First ``BLOCK`` uniforms of trajectories ``0..n_traj-1``, one row each."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be in [0, 2**64)")
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.random(n_traj * BLOCK).reshape(n_traj, BLOCK)


def run_trajectory(H, channels, psi0, rng_seed, t_max, record=None, max_clicks=64,
                   keep_norms=0, traj_index=0):
    """Simulate one quantum-jump trajectory.

    Parameters
    ----------
    H, channels
        Hamiltonian and :class:`~dqdwtd.liouvillian.JumpChannel` list.
    psi0 : array
        Initial pure state (normalized on entry).
    rng_seed : int
        Master seed. With ``traj_index=i`` this replays member ``i`` of
        an ensemble run with the same seed.
    t_max : float
        Time limit; the record is flagged, not rejected, when reached.
    record : iterable of str, optional
        Channel labels that leave a click. Defaults to the monitored ones.
    keep_norms : int
        Store up to this many squared norms sampled along the no-jump
        segments (NaN marks a jump).
    """
    unr = _Unraveling(H, channels)
    mask = unr.record_mask(record)
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    n_uni = BLOCK
    while True:
        uni = trajectory_uniforms(rng_seed, traj_index, n_uni)
        labels = np.zeros(max_clicks, dtype=np.int64)
        times = np.zeros(max_clicks)
        norms = np.full(keep_norms, np.nan)
        status, n, _ = _kernels.run_one(unr.gen, unr.prop, unr.ops, mask, psi0, uni,
                                        unr.dt, float(t_max), labels, times, norms)
        if status != _kernels.NEED_RANDOM:
            break
        n_uni *= 2
    if status == _kernels.CLICKS_FULL:
        raise DQDWTDError(f"more than {max_clicks} clicks; raise max_clicks")
    rec = ClickRecord(
        clicks=[(unr.labels[k], float(tt)) for k, tt in zip(labels[:n], times[:n])],
        terminated=status == _kernels.DARK,
        t_max_exceeded=status == _kernels.TIMEOUT,
    )
    if keep_norms:
        rec.norms = norms
    return rec


def simulate_records(H, channels, psi0, n_traj, seed, t_max, record=None, max_clicks=64,
                     backend=None):
    """Run ``n_traj`` trajectories; returns label indices, times, click counts, status."""
    backend = _resolve_backend(backend)
    unr = _Unraveling(H, channels)
    mask = unr.record_mask(record)
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    labels = np.zeros((n_traj, max_clicks), dtype=np.int64)
    times = np.zeros((n_traj, max_clicks))
    n_clicks = np.zeros(n_traj, dtype=np.int64)
    status = np.zeros(n_traj, dtype=np.int64)
    uni = ensemble_uniforms(seed, n_traj)
    run = _kernels.run_batch_numba if backend == "numba" else _kernels.run_batch_numpy
    run(unr.gen, unr.prop, unr.ops, mask, psi0, uni, unr.dt, float(t_max),
        labels, times, n_clicks, status)

    retry = np.nonzero(status == _kernels.NEED_RANDOM)[0]
    n_uni = BLOCK
    while retry.size:
        n_uni *= 2
        uni = np.array([trajectory_uniforms(seed, i, n_uni) for i in retry])
        sub = [labels[retry], times[retry], n_clicks[retry], status[retry]]
        run(unr.gen, unr.prop, unr.ops, mask, psi0, uni, unr.dt, float(t_max), *sub)
        labels[retry], times[retry], n_clicks[retry], status[retry] = sub
        retry = retry[sub[3] == _kernels.NEED_RANDOM]

    full = np.nonzero(status == _kernels.CLICKS_FULL)[0]
    if full.size:
        raise DQDWTDError(f"trajectory {full[0]}: more than {max_clicks} clicks")
    return unr.labels, labels, times, n_clicks, status


def run_ensemble(params, n, n_traj, seed, t_max=None, backend=None, record=None):
    """Ensemble statistics for ``n`` initial photons under ``params``.

    The cutoff is raised to ``n`` if needed. ``t_max`` defaults to
    ``200 / kappa``; trajectories cut off by it are counted in
    ``n_unterminated`` and still enter the frequencies' denominator.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if params.n_max < n:
        params = params.replace(n_max=n)
    if t_max is None:
        t_max = DEFAULT_T_MAX_KAPPA / params.kappa
    model = build_model(params)
    psi0 = initial_ket(n, params.n_max)
    names, labels, times, n_clicks, status = simulate_records(
        model.H, model.channels, psi0, n_traj, seed, t_max, record=record, backend=backend
    )
    stats = summarize(names, labels, times, n_clicks, status, seed)
    if stats.n_unterminated:
        warnings.warn(f"{stats.n_unterminated}/{n_traj} trajectories reached t_max={t_max}",
                      RuntimeWarning, stacklevel=2)
    return stats


def summarize(names, labels, times, n_clicks, status, seed):
    n_traj = labels.shape[0]
    monitored = [ELECTRON_OUT, PHOTON_LEAK]
    idx = {lab: names.index(lab) for lab in monitored if lab in names}
    has1 = n_clicks >= 1
    has2 = n_clicks >= 2
    first = {lab: _frequency(int(np.sum(has1 & (labels[:, 0] == k))), n_traj)
             for lab, k in idx.items()}
    seq = {}
    for la, ka in idx.items():
        for lb, kb in idx.items():
            c = int(np.sum(has2 & (labels[:, 0] == ka) & (labels[:, 1] == kb)))
            seq[(la, lb)] = _frequency(c, n_traj)
    t1 = times[has1, 0]
    if t1.size > 1:
        mean_t = (float(t1.mean()), float(t1.std(ddof=1) / sqrt(t1.size)))
    else:
        mean_t = (float(t1.mean()) if t1.size else float("nan"), float("nan"))
    counts, freq = np.unique(n_clicks, return_counts=True)
    return EnsembleStats(
        n_traj=n_traj,
        seed=seed,
        first_click_freq=first,
        sequence_freq=seq,
        mean_first_click_time=mean_t,
        n_unterminated=int(np.sum(status != _kernels.DARK)),
        click_count_hist={int(c): int(f) for c, f in zip(counts, freq)},
    )


def write_click_dump(stream, names, labels, times, n_clicks, time_unit=1.0):
    """Write ``traj_id,channel,time`` lines; times are divided by ``time_unit``."""
    stream.write("traj_id,channel,time\n")
    for i in range(labels.shape[0]):
        for c in range(n_clicks[i]):
            stream.write(f"{i},{names[labels[i, c]]},{times[i, c] / time_unit:.15g}\n")
