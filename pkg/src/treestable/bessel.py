"""Modified Bessel function of the first kind in log space.

The kernel computations need log I_nu(z) for orders up to ~1e3 and arguments
up to ~1e8 with uniform relative accuracy; scipy's ``iv``/``ive`` overflow or
lose the exponential scale in parts of that range. Two classical expansions
cover it:

* the ascending power series

      I_nu(z) = sum_k (z/2)**(nu + 2k) / (k! Gamma(nu + k + 1)),

  summed entirely in log space with logsumexp. All terms are positive, so
  the sum is cancellation-free; the term peak sits near
  k* = (sqrt(nu**2 + z**2) - nu) / 2 and the truncation adds a safety strip
  of ~14 sqrt(k*) terms past the peak;

* the Hankel large-argument expansion

      I_nu(z) ~ e**z / sqrt(2 pi z) * sum_k (-1)**k a_k(nu) / z**k,

  truncated at its smallest term, which bounds the error for an asymptotic
  series of this type.

The seam sits at z = max(30, nu**2 / 2): below it the series is short enough
to be cheap, above it the Hankel error term (nu**2 / z scale) is far below
1e-13. Agreement across the seam is tested, not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf, log, pi, sqrt

import numpy as np
from scipy.special import gammaln, logsumexp

from .bands import EnvelopeBand, band_from_ratios

__all__ = [
    "BesselEval",
    "log_bessel_i",
    "bessel_i",
    "global_bound_margin",
    "check_global_bound",
    "uniform_envelope_ratio",
    "flat_envelope_ratio",
    "check_envelopes",
    "UNIFORM_RATIO_BAND",
    "FLAT_RATIO_BANDS",
]

# Extra log-space series terms past the peak; e^-y with y ~ strip^2 / (4 k*)
# makes 14 sqrt(k*) + 40 conservative at double precision.
_SERIES_TAIL_STRIP = 14.0
_SERIES_TAIL_PAD = 40

# Calibrated ratio bands for the two-sided envelopes below, measured over
# orders in [1, 1000] and arguments in [1e-3, 1e8] (uniform) and over the
# admissible argument range per flatness parameter (flat). Regression
# constants: recomputed values must stay inside.
UNIFORM_RATIO_BAND = (0.30, 0.45)
FLAT_RATIO_BANDS = {
    0.5: (0.05, 0.45),
    0.9: (0.08, 0.45),
}


@dataclass(frozen=True)
class BesselEval:
    """One evaluation of I_nu(z), carried in log space.

    ``scaled_value`` is e**(-z) I_nu(z), which is always in (0, 1] for
    nu >= 0 and finite in double precision throughout the supported range.
    """

    order: float
    argument: float
    log_value: float

    @property
    def scaled_value(self) -> float:
        return float(np.exp(self.log_value - self.argument))

    @property
    def value(self) -> float:
        # may overflow to inf for large arguments; the log is the contract
        return float(np.exp(self.log_value))


def _log_series(nu: float, z: float) -> float:
    half = log(z / 2.0)
    peak = (sqrt(nu * nu + z * z) - nu) / 2.0
    kmax = int(peak + _SERIES_TAIL_STRIP * sqrt(peak + 8.0)) + _SERIES_TAIL_PAD
    k = np.arange(kmax + 1, dtype=float)
    terms = (nu + 2.0 * k) * half - gammaln(k + 1.0) - gammaln(nu + k + 1.0)
    return float(logsumexp(terms))


def _log_hankel(nu: float, z: float) -> float:
    mu = 4.0 * nu * nu
    total = 1.0
    term = 1.0
    k = 1
    while True:
        term *= -(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * z)
        if abs(term) >= 1.0:
            raise RuntimeError(
                f"Hankel expansion diverges at order {nu}, argument {z}"
            )
        total += term
        if abs(term) < 1e-18 * total or k > 200:
            break
        k += 1
    if total <= 0.0:
        raise RuntimeError("Hankel expansion lost positivity; argument too small")
    return z - 0.5 * log(2.0 * pi * z) + log(total)


def log_bessel_i(order: float, argument: float) -> float:
    """log I_nu(z) for nu >= 0, z >= 0.

    Relative accuracy is ~1e-13 over orders up to 1e3 and arguments up to
    1e8. Returns -inf at z = 0 for positive orders.
    """
    if order < 0.0:
        raise ValueError("order must be >= 0")
    if argument < 0.0:
        raise ValueError("argument must be >= 0")
    if argument == 0.0:
        return 0.0 if order == 0.0 else -inf
    if argument <= max(30.0, 0.5 * order * order):
        return _log_series(order, argument)
    return _log_hankel(order, argument)


def bessel_i(order: float, argument: float) -> BesselEval:
    return BesselEval(order, argument, log_bessel_i(order, argument))


def global_bound_margin(order: float, argument: float) -> float:
    """Margin of the global bound sqrt(z) e**(-z) I_nu(z) <= 1, in log space.

    Returns -log of the left side; the bound holds iff the margin is >= 0.
    """
    if argument <= 0.0:
        raise ValueError("argument must be > 0")
    return -(log_bessel_i(order, argument) - argument + 0.5 * log(argument))


def check_global_bound(order: float, argument: float) -> tuple[bool, float]:
    """Whether the global upper bound holds, with its log-space margin."""
    margin = global_bound_margin(order, argument)
    return margin >= -1e-12, margin


def _log_uniform_envelope(nu: float, z: float) -> float:
    s = sqrt(nu * nu + z * z)
    return s + nu * log(z / (nu + s)) - 0.25 * log(nu * nu + z * z)


def uniform_envelope_ratio(order: float, argument: float) -> float:
    """Ratio of I_nu(z) to its uniform two-sided envelope.

    The envelope e**s (z / (nu + s))**nu / sqrt(s), s = sqrt(nu**2 + z**2),
    matches I_nu up to a constant for every nu >= 1, z > 0; the ratio stays
    inside UNIFORM_RATIO_BAND.
    """
    if order < 1.0:
        raise ValueError("uniform envelope needs order >= 1")
    if argument <= 0.0:
        raise ValueError("argument must be > 0")
    return float(
        np.exp(log_bessel_i(order, argument) - _log_uniform_envelope(order, argument))
    )


def flat_envelope_ratio(order: float, argument: float, flatness: float) -> float:
    """Ratio of I_nu(z) to e**z / sqrt(z) in the regime z > max(1, a nu**2).

    ``flatness`` is the regime parameter a > 0; the admissible band of the
    ratio depends on a (smaller a lets the order bite harder) and is frozen
    in FLAT_RATIO_BANDS for the calibrated values.
    """
    if flatness <= 0.0:
        raise ValueError("flatness parameter must be > 0")
    if order < 1.0:
        raise ValueError("flat envelope needs order >= 1")
    if argument <= max(1.0, flatness * order * order):
        raise ValueError(
            f"argument {argument} not in the flat regime for order {order}, "
            f"flatness {flatness}"
        )
    return float(
        np.exp(log_bessel_i(order, argument) - argument + 0.5 * log(argument))
    )


def check_envelopes(
    orders=None, arguments_per_order: int = 25
) -> list[EnvelopeBand]:
    """Measure both envelope ratios on a standard grid against frozen bands."""
    if orders is None:
        orders = np.geomspace(1.0, 1000.0, 13)
    bands = []
    ratios = []
    for nu in orders:
        for z in np.geomspace(1e-3, 1e8, arguments_per_order):
            ratios.append(uniform_envelope_ratio(float(nu), float(z)))
    bands.append(band_from_ratios("uniform envelope", ratios, *UNIFORM_RATIO_BAND))
    for a, limits in FLAT_RATIO_BANDS.items():
        ratios = []
        for nu in orders:
            lo = max(1.0, a * float(nu) ** 2) * 1.0001
            for z in np.geomspace(lo, max(1e7, 10.0 * lo), arguments_per_order):
                ratios.append(flat_envelope_ratio(float(nu), float(z), a))
        bands.append(band_from_ratios(f"flat envelope a={a}", ratios, *limits))
    return bands
