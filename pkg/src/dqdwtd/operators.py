"""Dense complex operator kernel.

Operators are plain square ``numpy.ndarray`` objects of dtype complex128.
Everything here is a pure function of its inputs.
"""
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import (
    DegenerateParametersError,
    DimensionError,
    InconsistentSystemError,
    NumericalRangeError,
)

# Basis ordering of the three-state dot: |0>, |g>, |e>.
EMPTY, GROUND, EXCITED = 0, 1, 2

# Backward-error thresholds for the [m/m] Pade approximants (double precision).
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_coefficients(m):
    return [
        factorial(2 * m - j) * factorial(m)
        / (factorial(2 * m) * factorial(j) * factorial(m - j))
        for j in range(m + 1)
    ]


_PADE_COEFFS = {m: _pade_coefficients(m) for m in _PADE_THETA}


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of a square matrix.

    ``condition_estimate`` is the 2-norm condition number of the
    eigenvector matrix; it blows up near non-diagonalizable points.
    """

    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray
    condition_estimate: float


def as_operator(m):
    """Return ``m`` as a square complex128 array, raising on bad shapes."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"operator must be square, got shape {a.shape}")
    return a


def is_hermitian(m, rtol=1e-12):
    m = as_operator(m)
    scale = np.max(np.abs(m)) if m.size else 0.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= rtol * scale)


def dag(m):
    return np.conj(m).T


def identity(dim):
    return np.eye(dim, dtype=np.complex128)


def kron(a, b):
    """Kronecker product; element ``(i*dimB + k, j*dimB + l)`` is ``a[i,j]*b[k,l]``."""
    return np.kron(as_operator(a), as_operator(b))


def annihilation(n_max):
    """Bosonic lowering operator truncated to Fock states ``0..n_max``."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(np.complex128)


def number(n_max):
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(np.complex128)


def _ket_bra(i, j, dim=3):
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[i, j] = 1.0
    return m


def dqd_operators():
    """Elementary operators of the dot in the eigenbasis, ordering |0>, |g>, |e>.

    Returns
    -------
    dict
        ``s_g = |0><g|``, ``s_e = |0><e|``, ``sigma3 = |e><e| - |g><g|``,
        ``sigma_plus = |e><g|`` and ``sigma_minus`` (its adjoint).
    """
    sigma_plus = _ket_bra(EXCITED, GROUND)
    return {
        "s_g": _ket_bra(EMPTY, GROUND),
        "s_e": _ket_bra(EMPTY, EXCITED),
        "sigma3": _ket_bra(EXCITED, EXCITED) - _ket_bra(GROUND, GROUND),
        "sigma_plus": sigma_plus,
        "sigma_minus": dag(sigma_plus),
    }


def expm(m, t=1.0):
    """Matrix exponential ``exp(m * t)`` by Pade scaling and squaring.

    Uses the degree selection of Higham (2005): the lowest Pade degree whose
    backward-error bound covers ``||m t||_1``, falling back to degree 13 with
    ``s`` squarings.

    Raises
    ------
    NumericalRangeError
        If the input or the result is not finite.
    """
    a = as_operator(m)
    if not (np.all(np.isfinite(a)) and np.isfinite(t)):
        raise NumericalRangeError("non-finite generator passed to expm")
    a = a * t
    n = a.shape[0]
    if n == 0:
        return a.copy()
    norm = np.linalg.norm(a, 1)
    if not np.isfinite(norm):
        raise NumericalRangeError("non-finite generator passed to expm")
    ident = np.eye(n, dtype=np.complex128)
    if norm == 0.0:
        return ident

    for m_deg in (3, 5, 7, 9):
        if norm <= _PADE_THETA[m_deg]:
            f = _pade(a, m_deg, ident)
            break
    else:
        s = max(0, int(np.ceil(np.log2(norm / _PADE_THETA[13]))))
        if s > 1000:
            raise NumericalRangeError(f"||M t||_1 = {norm:.3g} is out of range")
        f = _pade(a / 2.0**s, 13, ident)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(s):
                f = f @ f
    if not np.all(np.isfinite(f)):
        raise NumericalRangeError(f"expm overflowed (||M t||_1 = {norm:.3g})")
    return f


def _pade(a, m, ident):
    c = _PADE_COEFFS[m]
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a2 @ a4
        u = a @ (a6 @ (c[13] * a6 + c[11] * a4 + c[9] * a2)
                 + c[7] * a6 + c[5] * a4 + c[3] * a2 + c[1] * ident)
        v = (a6 @ (c[12] * a6 + c[10] * a4 + c[8] * a2)
             + c[6] * a6 + c[4] * a4 + c[2] * a2 + c[0] * ident)
    else:
        powers = [ident, a2]
        for _ in range(2, (m + 1) // 2 + 1):
            powers.append(powers[-1] @ a2)
        u = a @ sum(c[j] * powers[j // 2] for j in range(m, 0, -2))
        v = sum(c[j] * powers[j // 2] for j in range(m - 1, -1, -2))
    return np.linalg.solve(v - u, v + u)


def _equilibration(m):
    """Power-of-two row and column scalings that balance the entries of ``m``."""
    def scale(mx):
        out = np.ones_like(mx)
        nz = mx > 0
        out[nz] = 2.0 ** np.round(-0.5 * np.log2(mx[nz]))
        return out

    r = scale(np.max(np.abs(m), axis=1))
    c = scale(np.max(np.abs(m * r[:, None]), axis=0))
    return r, c


def solve_min_norm(m, b, rcond=1e-12, rtol=1e-10):
    """Minimum-norm solution of the consistent system ``m x = b``.

    The rank is fixed by discarding singular values of ``m`` below
    ``rcond * sigma_max``. The solve itself runs on the row/column
    equilibrated matrix followed by one step of iterative refinement, and
    the result is projected onto the orthogonal complement of the null
    space, so rates spread over many decades (fast electron tunnelling
    against slow photon loss) do not inflate the residual.

    Raises
    ------
    InconsistentSystemError
        If ``||m x - b|| > rtol * ||b||``, i.e. ``b`` is not in the range
        of ``m``.
    """
    m = np.asarray(m, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if m.ndim != 2 or b.shape != (m.shape[0],):
        raise DimensionError(f"cannot solve {m.shape} system with rhs {b.shape}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(m.shape[1], dtype=np.complex128)
    sv = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(sv > rcond * sv[0])) if sv.size and sv[0] > 0 else 0

    r, c = _equilibration(m)
    u, s, vh = np.linalg.svd(m * r[:, None] * c[None, :])
    u, s, v = u[:, :rank], s[:rank], vh[:rank].conj().T

    def apply_pinv(rhs):
        return c * (v @ ((u.conj().T @ (r * rhs)) / s))

    x = apply_pinv(b)
    x = x + apply_pinv(b - m @ x)
    if rank < m.shape[1]:
        null, _ = np.linalg.qr(c[:, None] * vh[rank:].conj().T)
        x = x - null @ (null.conj().T @ x)

    residual = np.linalg.norm(m @ x - b)
    if residual > rtol * bnorm:
        raise InconsistentSystemError(
            f"right-hand side outside the range of the operator "
            f"(relative residual {residual / bnorm:.3e}, rank {rank}/{m.shape[0]})",
            residual=residual / bnorm,
        )
    return x


def spectrum(m):
    """Eigenvalues and right eigenvectors of ``m`` with a conditioning estimate."""
    m = as_operator(m)
    w, v = np.linalg.eig(m)
    return Spectrum(w, v, float(np.linalg.cond(v)))


def dqd_eigenbasis(epsilon, t_c):
    """Energy splitting and eigenbasis of the two-dot Hamiltonian.

    ``H = eps/2 (|R><R| - |L><L|) + t_c (|R><L| + |L><R|)``.

    Returns
    -------
    dict
        ``Omega = sqrt(4 t_c**2 + eps**2)`` and the real orthogonal ``U``
        whose columns are |g>, |e>, |0> written in the (|L>, |R>, |0>)
        basis, so that ``U.T @ H_LR @ U = diag(-Omega/2, Omega/2, 0)``.
    """
    omega = float(np.hypot(2.0 * t_c, epsilon))
    if omega == 0.0:
        raise DegenerateParametersError("epsilon = t_c = 0: dot eigenbasis undefined")
    half = 0.5 * np.arctan2(2.0 * t_c, epsilon)
    c, s = np.cos(half), np.sin(half)
    u = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    return {"Omega": omega, "U": u}


def dqd_hamiltonian_lr(epsilon, t_c):
    """Two-dot Hamiltonian in the (|L>, |R>, |0>) basis."""
    return np.array(
        [[-epsilon / 2, t_c, 0.0], [t_c, epsilon / 2, 0.0], [0.0, 0.0, 0.0]],
        dtype=np.complex128,
    )
