"""Lindblad superoperators on column-stacked density matrices.

Convention: ``vec(|i><j|)`` sits at index ``j*D + i`` so that
``vec(A rho B) = kron(B.T, A) @ vec(rho)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .operators import as_operator, dag, is_hermitian

ELECTRON_IN = "electron_in"
ELECTRON_OUT = "electron_out"
PHOTON_LEAK = "photon_leak"
CHANNEL_LABELS = (ELECTRON_IN, ELECTRON_OUT, PHOTON_LEAK)

FULL, NO_JUMP, JUMP = "full", "no_jump", "jump"


@dataclass(frozen=True)
class JumpChannel:
    """A Lindblad channel ``rate * D[op]``; ``monitored`` channels produce clicks."""

    label: str
    op: np.ndarray = field(repr=False)
    rate: float
    monitored: bool = True

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"channel {self.label!r}: rate must be >= 0, got {self.rate}")
        object.__setattr__(self, "op", as_operator(self.op))


@dataclass(frozen=True)
class Superoperator:
    data: np.ndarray = field(repr=False)
    kind: str = FULL

    @property
    def hilbert_dim(self):
        return int(round(np.sqrt(self.data.shape[0])))

    def __matmul__(self, other):
        if isinstance(other, Superoperator):
            return Superoperator(self.data @ other.data, self.kind)
        return self.data @ other

    def __add__(self, other):
        return Superoperator(self.data + other.data, self.kind)

    def __sub__(self, other):
        return Superoperator(self.data - other.data, self.kind)

    def apply(self, rho):
        """Act on a density matrix and return a matrix."""
        rho = as_operator(rho)
        return devectorize(self.data @ vectorize(rho))


def vectorize(rho):
    """Column-stack a square matrix."""
    rho = as_operator(rho)
    return rho.reshape(-1, order="F")


def devectorize(v, dim=None):
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=np.complex128)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if v.ndim != 1 or dim * dim != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized {dim}x{dim} matrix")
    return v.reshape(dim, dim, order="F")


def trace_vector(dim):
    """Row vector ``vec(I)`` such that ``trace_vector(D) @ vec(rho) = Tr rho``."""
    return vectorize(np.eye(dim))


def vec_trace(v):
    """Trace of the matrix whose column-stacked form is ``v``."""
    v = np.asarray(v)
    dim = int(round(np.sqrt(v.shape[-1])))
    return v[..., :: dim + 1].sum(axis=-1)


def spre(a):
    """Superoperator of ``rho -> a rho``."""
    a = as_operator(a)
    return np.kron(np.eye(a.shape[0]), a)


def spost(b):
    """Superoperator of ``rho -> rho b``."""
    b = as_operator(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a, b):
    """Superoperator of ``rho -> a rho b``."""
    return np.kron(as_operator(b).T, as_operator(a))


def jump_superop(op, rate):
    """``rho -> rate * op rho op^dagger``."""
    op = as_operator(op)
    return Superoperator(rate * np.kron(op.conj(), op), JUMP)


def dissipator(op, rate):
    """``rate * (L rho L^+ - {L^+ L, rho}/2)`` as a superoperator."""
    if rate < 0:
        raise ValueError(f"dissipation rate must be >= 0, got {rate}")
    op = as_operator(op)
    ident = np.eye(op.shape[0])
    ldl = dag(op) @ op
    data = np.kron(op.conj(), op) - 0.5 * np.kron(ident, ldl) - 0.5 * np.kron(ldl.T, ident)
    return Superoperator(rate * data, FULL)


def hamiltonian_superop(h):
    """``rho -> -i [H, rho]``."""
    h = as_operator(h)
    if not is_hermitian(h, rtol=1e-10):
        raise ValueError("Hamiltonian is not Hermitian")
    ident = np.eye(h.shape[0])
    return Superoperator(-1j * (np.kron(ident, h) - np.kron(h.T, ident)), FULL)


def _check_dims(h, channels):
    dim = as_operator(h).shape[0]
    for ch in channels:
        if ch.op.shape != (dim, dim):
            raise DimensionError(
                f"channel {ch.label!r} acts on dimension {ch.op.shape[0]}, Hamiltonian on {dim}"
            )
    return dim


def build_liouvillian(h, channels):
    """Full Lindblad generator of ``H`` and ``channels``."""
    _check_dims(h, channels)
    total = hamiltonian_superop(h).data.copy()
    for ch in channels:
        total += dissipator(ch.op, ch.rate).data
    return Superoperator(total, FULL)


@dataclass(frozen=True)
class SplitLiouvillian:
    L: Superoperator
    L0: Superoperator
    jumps: dict  # label -> Superoperator, monitored channels only

    @property
    def total_jump(self):
        return sum((j.data for j in self.jumps.values()), np.zeros_like(self.L0.data))


def split_monitored(h, channels):
    """Split the generator into monitored jumps and the no-jump remainder.

    Unmonitored channels stay entirely inside ``L0``.
    """
    monitored = [ch for ch in channels if ch.monitored]
    if not monitored:
        raise ValueError("at least one channel must be monitored")
    full = build_liouvillian(h, channels)
    jumps = {ch.label: jump_superop(ch.op, ch.rate) for ch in monitored}
    l0 = full.data.copy()
    for j in jumps.values():
        l0 -= j.data
    return SplitLiouvillian(full, Superoperator(l0, NO_JUMP), jumps)


def check_density_matrix(rho, tol=1e-12, psd_tol=1e-10):
    """Validate trace, hermiticity and positivity; returns the complex array."""
    rho = as_operator(rho)
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"trace of density matrix is {np.trace(rho)!r}")
    if np.max(np.abs(rho - dag(rho)), initial=0.0) > tol:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + dag(rho))).min() < -psd_tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho
