"""Double quantum dot coupled to a single cavity mode.

Hilbert space is ``dot (3) x Fock (n_max + 1)`` with the dot factor first,
so the basis state ``|z, n>`` has index ``z * (n_max + 1) + n`` with
``z = 0, g, e -> 0, 1, 2``.
"""
import warnings
from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

from .errors import DegenerateParametersError
from .liouvillian import (
    ELECTRON_IN,
    ELECTRON_OUT,
    PHOTON_LEAK,
    JumpChannel,
    SplitLiouvillian,
    split_monitored,
    vectorize,
)
from .operators import EMPTY, annihilation, dag, dqd_eigenbasis, dqd_operators, kron


class TruncationWarning(UserWarning):
    """Fock cutoff is no longer exact because the cavity is driven."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters in the frame rotating at the pump frequency.

    All rates share one (arbitrary) frequency unit; the dimensionless
    combinations ``cooperativity = 4 g**2 / (gamma kappa)`` and
    ``alpha = gamma / kappa`` fully determine the click statistics at
    resonance.
    """

    gamma: float = 1.0
    kappa: float = 1.0
    g: float = 0.0
    delta_d: float = 0.0
    delta_r: float = 0.0
    xi: float = 0.0
    epsilon: float = 1.0
    t_c: float = 0.0
    n_max: int = 1

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.g < 0 or self.xi < 0:
            raise ValueError("g and xi must be >= 0")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max}")

    @classmethod
    def from_dimensionless(cls, alpha, cooperativity, n_max=1, kappa=1.0, **kwargs):
        """Build parameters from ``alpha = gamma/kappa`` and the cooperativity."""
        if not alpha > 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        if cooperativity < 0:
            raise ValueError(f"cooperativity must be >= 0, got {cooperativity}")
        gamma = alpha * kappa
        g = sqrt(cooperativity * gamma * kappa / 4.0)
        return cls(gamma=gamma, kappa=kappa, g=g, n_max=n_max, **kwargs)

    @property
    def cooperativity(self):
        return 4.0 * self.g**2 / (self.gamma * self.kappa)

    @property
    def alpha(self):
        return self.gamma / self.kappa

    @property
    def omega(self):
        return float(np.hypot(2.0 * self.t_c, self.epsilon))

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class Model:
    params: ModelParams
    H: np.ndarray = field(repr=False)
    channels: tuple

    @property
    def dim(self):
        return self.H.shape[0]


def build_model(params):
    """Hamiltonian and Lindblad channels for ``params``.

    Channels: unmonitored electron injection ``s_g^+`` (rate gamma),
    monitored electron extraction ``s_e`` (gamma) and monitored photon
    leakage ``a`` (kappa).
    """
    if params.xi > 0:
        warnings.warn(
            f"driven cavity (xi={params.xi}): Fock cutoff n_max={params.n_max} truncates "
            "the dynamics; check convergence in n_max",
            TruncationWarning,
            stacklevel=2,
        )
    d = dqd_operators()
    a = annihilation(params.n_max)
    i_dot = np.eye(3)
    i_cav = np.eye(params.n_max + 1)

    h = 0.5 * params.delta_d * kron(d["sigma3"], i_cav)
    h = h + params.delta_r * kron(i_dot, dag(a) @ a)
    h = h + params.g * (kron(d["sigma_minus"], dag(a)) + kron(d["sigma_plus"], a))
    h = h + params.xi * kron(i_dot, a + dag(a))

    channels = (
        JumpChannel(ELECTRON_IN, kron(dag(d["s_g"]), i_cav), params.gamma, monitored=False),
        JumpChannel(ELECTRON_OUT, kron(d["s_e"], i_cav), params.gamma, monitored=True),
        JumpChannel(PHOTON_LEAK, kron(i_dot, a), params.kappa, monitored=True),
    )
    return Model(params, h, channels)


def basis_index(z, n, n_max):
    return z * (n_max + 1) + n


def initial_ket(n, n_max):
    """``|0> (x) |n>``: empty dot, ``n`` photons."""
    if not 0 <= n <= n_max:
        raise ValueError(f"photon number n={n} outside 0..n_max={n_max}")
    psi = np.zeros(3 * (n_max + 1), dtype=np.complex128)
    psi[basis_index(EMPTY, n, n_max)] = 1.0
    return psi


def initial_state(n, n_max):
    """Density matrix ``|0,n><0,n|``."""
    psi = initial_ket(n, n_max)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class Scenario:
    """Undriven n-photon detection problem, ready for the WTD engine."""

    model: Model
    split: SplitLiouvillian
    n: int
    psi0: np.ndarray = field(repr=False)
    rho0: np.ndarray = field(repr=False)

    @property
    def params(self):
        return self.model.params

    @property
    def L0(self):
        return self.split.L0

    @property
    def jumps(self):
        return self.split.jumps

    @property
    def vec_rho0(self):
        return vectorize(self.rho0)


def photon_scenario(alpha, cooperativity, n, kappa=1.0, delta_d=0.0, delta_r=0.0):
    """``n`` photons in an undriven cavity with an empty dot.

    The pump is switched off (``xi = 0``), so the excitation number never
    grows and the cutoff ``n_max = n`` is exact.
    """
    params = ModelParams.from_dimensionless(
        alpha, cooperativity, n_max=n, kappa=kappa, delta_d=delta_d, delta_r=delta_r
    )
    return scenario_from_params(params, n)


def scenario_from_params(params, n):
    if params.xi != 0:
        params = params.replace(xi=0.0)
    if params.n_max < n:
        params = params.replace(n_max=n)
    model = build_model(params)
    split = split_monitored(model.H, model.channels)
    psi0 = initial_ket(n, params.n_max)
    return Scenario(model, split, n, psi0, np.outer(psi0, psi0.conj()))


def efficiency_detuned(params):
    """Steady-state detection efficiency without phonon losses, any detuning."""
    omega = dqd_eigenbasis(params.epsilon, params.t_c)["Omega"]
    g2, gam, kap = params.g**2, params.gamma, params.kappa
    lor = 4.0 * params.delta_d**2 + gam**2
    shift = params.delta_r - 4.0 * g2 * params.delta_d / lor
    width = 0.5 * kap + 2.0 * g2 * gam / lor
    return 4.0 * kap * g2 * gam * params.epsilon / (omega * lor * (shift**2 + width**2))


def efficiency_resonant(epsilon, t_c, cooperativity):
    """Efficiency at ``delta_d = delta_r = 0``: ``(4 eps/Omega) C/(1+C)**2``."""
    omega = dqd_eigenbasis(epsilon, t_c)["Omega"]
    if omega <= 0:
        raise DegenerateParametersError("Omega must be positive")
    c = cooperativity
    return 4.0 * epsilon / omega * c / (1.0 + c) ** 2
