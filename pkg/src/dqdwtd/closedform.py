"""Analytic click statistics of the resonant, undriven detector.

All functions take ``alpha = gamma/kappa`` and the cooperativity
``C = 4 g**2/(gamma kappa)``, and accept numpy arrays.

The two-photon sequence probabilities below are written so that
``p_egamma = p_e1 - p_ee`` and ``p_gammae = p_e2 - p_ee`` hold
identically; both carry the common denominator factor
``(2 + alpha)(3 + alpha)``.
"""
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ClosedFormTable:
    p_e: float
    p_gamma: float
    kappa_t1: float
    p_ee: float
    p_egamma: float
    p_gammae: float
    p_gammagamma: float
    p_e1: float
    p_e2: float

    def as_dict(self):
        return asdict(self)


def closed_form_pe(alpha, C):
    """Probability that a single photon is converted into a photocurrent."""
    return C / (C + 1.0) * alpha**2 / (alpha + 1.0) ** 2


def closed_form_mean_time(alpha, C):
    """Mean time to the first click for one photon, in units of ``1/kappa``."""
    a1 = (alpha + 1.0) ** 2
    return (a1 + C * (3.0 * alpha + 1.0)) / (a1 * (C + 1.0))


def _two_photon_den(alpha, C):
    return (1.0 + C) * (1.0 + alpha) ** 2 * (2.0 + alpha) * (3.0 + alpha) * (1.0 + alpha + C * alpha)


def p_ee(alpha, C):
    return C**2 * alpha**5 / _two_photon_den(alpha, C)


def p_egamma(alpha, C):
    num = C * alpha**3 * (C + 2.0 * C * alpha + (1.0 + alpha) ** 2)
    return num / _two_photon_den(alpha, C)


def p_gammae(alpha, C):
    num = C * alpha**2 * (12.0 + alpha * (3.0 + alpha) * (7.0 + alpha) + C * alpha * (9.0 + 5.0 * alpha))
    return num / _two_photon_den(alpha, C)


def p_e1(alpha, C):
    """Probability that the first of two clicks is a photocurrent."""
    return C * alpha**3 / ((2.0 + alpha) * (3.0 + alpha) * (1.0 + alpha + C * alpha))


def p_e2(alpha, C):
    """Probability that the second of two clicks is a photocurrent."""
    num = C * alpha**2 * (
        12.0 + 3.0 * (7.0 + 3.0 * C) * alpha + 5.0 * (2.0 + C) * alpha**2 + (1.0 + C) * alpha**3
    )
    return num / _two_photon_den(alpha, C)


def closed_form_two_photon(alpha, C):
    """Two-photon sequence probabilities; ``p_gammagamma`` by complement."""
    ee, eg, ge = p_ee(alpha, C), p_egamma(alpha, C), p_gammae(alpha, C)
    return {
        "p_ee": ee,
        "p_egamma": eg,
        "p_gammae": ge,
        "p_gammagamma": 1.0 - ee - eg - ge,
        "p_e1": p_e1(alpha, C),
        "p_e2": p_e2(alpha, C),
    }


def closed_form_table(alpha, C):
    pe = closed_form_pe(alpha, C)
    return ClosedFormTable(
        p_e=pe,
        p_gamma=1.0 - pe,
        kappa_t1=closed_form_mean_time(alpha, C),
        **closed_form_two_photon(alpha, C),
    )


# Asymptotes, used by the tests and the CLI for reference columns.

def limit_alpha_inf_pee(C):
    return C**2 / (1.0 + C) ** 2


def limit_alpha_inf_single(C):
    """Common large-alpha limit of p_e, p_egamma and p_gammae."""
    return C / (1.0 + C) ** 2


def limit_coop_inf(alpha):
    """Large-cooperativity limits of ``(p_ee, p_egamma, p_gammae)``."""
    den = (1.0 + alpha) ** 2 * (6.0 + 5.0 * alpha + alpha**2)
    return (
        alpha**4 / den,
        alpha**2 * (1.0 + 2.0 * alpha) / den,
        alpha**2 * (9.0 + 5.0 * alpha) / den,
    )


def mean_time_upper_bound(alpha):
    """``C -> inf`` value of the one-photon mean time (units of ``1/kappa``)."""
    return (3.0 * alpha + 1.0) / (alpha + 1.0) ** 2

