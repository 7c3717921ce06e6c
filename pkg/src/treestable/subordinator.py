"""One-sided stable subordination densities, samplers, and envelopes.

For 0 < alpha < 2 write beta = alpha / 2. The subordinator S_t considered
here is the positive process with Laplace transform

    E exp(-lam S_t) = exp(-t lam**beta),

whose density eta_t concentrates around u ~ t**(1/beta) and scales exactly:
eta_t(u) = t**(-1/beta) eta_1(t**(-1/beta) u). Three evaluation routes are
implemented, with disjoint failure modes:

* ``branch_cut``: the Laplace inversion contour wrapped around the negative
  real axis,

      eta_t(u) = (1/pi) int_0^inf e**(-u r) e**(-t r**beta cos(pi beta))
                 sin(t r**beta sin(pi beta)) dr,

  accurate in the bulk and the right tail (scaled variable w >= 1). For
  beta > 1/2 the integrand grows before it decays and the left tail
  (w << 1) cancels catastrophically, so the automatic switch avoids it
  there.

* ``zolotarev``: the integral form of the density on (0, pi),

      eta_t(u) = t**(-1/beta) g(w),  w = t**(-1/beta) u,
      g(w) = b/(1-b) w**(-1/(1-b)) (1/pi) int_0^pi A(phi)
             exp(-A(phi) w**(-b/(1-b))) dphi,

  with A the Kanter function. Every factor is positive, the peak value
  A(0) is factored out in log space, and the route stays accurate however
  small w is; it degrades only in the far right tail, which is exactly
  where ``branch_cut`` is at its best.

* ``closed_form``: alpha = 1 only,

      eta_t(u) = t u**(-3/2) e**(-t**2 / (4u)) / (2 sqrt(pi)).

``auto`` picks between the two integral routes at w = 1 and never selects
the closed form, so comparing ``auto`` against ``closed_form`` at alpha = 1
is a genuine cross-check of independent code paths.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import cos, exp, expm1, gamma, log, pi, sin, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.special import erfc, roots_legendre

from .bands import EnvelopeBand, band_from_ratios

__all__ = [
    "StableParams",
    "DensityEval",
    "kanter_a",
    "density",
    "cdf",
    "cdf_interpolator",
    "sample_increment",
    "levy_density",
    "laplace_transform_residual",
    "left_envelope_ratio",
    "tail_envelope_ratio",
    "check_density_envelopes",
]

_METHODS = ("auto", "branch_cut", "zolotarev", "closed_form")

# Calibrated envelope-ratio bands per stability index; keys are alpha.
# Other alphas fall back to the union of these limits.
LEFT_RATIO_BANDS = {
    0.5: (0.06, 0.45),
    1.0: (0.26, 0.31),
    1.5: (0.18, 1.30),
}
TAIL_RATIO_BANDS = {
    0.5: (0.04, 0.50),
    1.0: (0.09, 0.70),
    1.5: (0.08, 1.20),
}


@dataclass(frozen=True)
class StableParams:
    """Stability index of the subordinated process, 0 < alpha < 2."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")

    @property
    def beta(self) -> float:
        """Subordinator index, alpha / 2."""
        return self.alpha / 2.0

    @property
    def left_tail_rate(self) -> float:
        """Constant in the stretched-exponential left tail of the density.

        Equals (1 - b) b**(b / (1 - b)) for b = beta, which is also the
        value A(0) of the Kanter function.
        """
        b = self.beta
        return (1.0 - b) * b ** (b / (1.0 - b))

    @property
    def tail_constant(self) -> float:
        """Coefficient of the power tail: eta_t(u) ~ t * tail_constant * u**(-1-beta)."""
        b = self.beta
        return b / gamma(1.0 - b)


@dataclass(frozen=True)
class DensityEval:
    """One subordination density value, carried in log space."""

    t: float
    u: float
    method: str
    log_value: float

    @property
    def value(self) -> float:
        return exp(self.log_value)


def kanter_a(beta: float, phi):
    """Kanter's function A on [0, pi), vectorized over phi.

    A(phi) = sin(b phi)**(b/(1-b)) sin((1-b) phi) / sin(phi)**(1/(1-b)),
    continuous at 0 with A(0) = (1-b) b**(b/(1-b)), increasing to +inf
    at pi.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0.0) or np.any(phi >= pi):
        raise ValueError("phi must lie in [0, pi)")
    out = np.empty_like(phi)
    small = phi < 1e-8
    out[small] = (1.0 - beta) * beta ** (beta / (1.0 - beta))
    p = phi[~small]
    ratio = beta / (1.0 - beta)
    out[~small] = np.exp(
        ratio * np.log(np.sin(beta * p))
        + np.log(np.sin((1.0 - beta) * p))
        - np.log(np.sin(p)) / (1.0 - beta)
    )
    return out if out.ndim else float(out)


def _quad_checked(f, lo, hi, rel_need, points=None, limit=1500):
    """scipy quad with the roundoff warning silenced but the error checked."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value, err = quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=limit,
                          points=points)
    if not value > 0.0 or err > rel_need * value:
        raise RuntimeError(
            f"quadrature failed: value {value:.3e}, error estimate {err:.3e}"
        )
    return value


def _log_branch_cut(s: StableParams, t: float, u: float) -> float:
    b = s.beta
    cb, sb = cos(pi * b), sin(pi * b)
    scale = t * u ** (-b)

    # substitution x = u r; for w >= 1 the domain [0, 900] always covers the
    # decay and the growth term t r**b cos(pi b) never wins by more than e**1
    def f(x):
        xb = x**b
        return exp(-x - scale * cb * xb) * sin(scale * sb * xb)

    value = _quad_checked(f, 0.0, 900.0, rel_need=1e-8)
    return log(value) - log(pi * u)


def _log_zolotarev(s: StableParams, t: float, u: float) -> float:
    b = s.beta
    w = u * t ** (-1.0 / b)
    a0 = s.left_tail_rate
    log_x = -b / (1.0 - b) * log(w)
    if log_x > 700.0:
        # the leading exponent alone already exceeds double range; return
        # its representable saturation (value underflows to zero anyway)
        return -a0 * exp(min(log_x, 709.0))
    x_big = exp(log_x)
    log_a0 = log(a0)
    # log A(phi) - log A(0) = (b/2) phi^2 + c4 phi^4 + c6 phi^6 + ...,
    # needed in series form: the naive difference A(phi) - A(0) cancels
    # catastrophically exactly where the stiff exponent amplifies it
    c4 = b * (1.0 - b + b * b) / 36.0
    c6 = (1.0 - b**7 - (1.0 - b) ** 7) / (2835.0 * (1.0 - b))

    def log_excess(phi):
        if phi < 0.05:
            p2 = phi * phi
            return p2 * (0.5 * b + p2 * (c4 + p2 * c6))
        return (
            b / (1.0 - b) * log(sin(b * phi))
            + log(sin((1.0 - b) * phi))
            - log(sin(phi)) / (1.0 - b)
            - log_a0
        )

    def f(phi):
        if phi >= pi:
            return 0.0
        ls = log_excess(phi)
        return a0 * exp(ls - a0 * expm1(ls) * x_big)

    # Laplace peak width; beyond 8 widths the peak contributes ~e-28
    width = sqrt(2.0 / (a0 * b * x_big + 1e-300))
    delta = min(pi * (1.0 - 1e-9), 8.0 * width)
    value = _quad_checked(f, 0.0, delta, rel_need=1e-8, limit=400)
    if delta < pi * 0.5:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tail, tail_err = quad(f, delta, pi, epsabs=1e-10 * value,
                                  epsrel=1e-9, limit=400)
        if tail_err > 1e-7 * (value + max(tail, 0.0)):
            raise RuntimeError("Zolotarev tail piece failed to converge")
        value += max(tail, 0.0)
    return (
        log(b / (1.0 - b))
        - log(pi)
        - log(w) / (1.0 - b)
        - a0 * x_big
        + log(value)
        - log(t) / b
    )


def _log_closed_form(s: StableParams, t: float, u: float) -> float:
    if s.alpha != 1.0:
        raise ValueError("closed form is available only for alpha = 1")
    return log(t) - 1.5 * log(u) - t * t / (4.0 * u) - log(2.0 * sqrt(pi))


def density(s: StableParams, t: float, u: float, method: str = "auto") -> DensityEval:
    """Subordination density eta_t(u).

    ``auto`` evaluates by the branch-cut integral when the scaled variable
    w = t**(-2/alpha) u is >= 1 and by the Zolotarev integral otherwise.
    Raises RuntimeError when the requested representation cannot reach
    ~1e-8 relative accuracy at the given point.
    """
    if t <= 0.0:
        raise ValueError("t must be > 0")
    if u <= 0.0:
        raise ValueError("u must be > 0")
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {_METHODS}")
    if method == "auto":
        w = u * t ** (-1.0 / s.beta)
        method = "branch_cut" if w >= 1.0 else "zolotarev"
        log_value = (
            _log_branch_cut(s, t, u) if method == "branch_cut"
            else _log_zolotarev(s, t, u)
        )
    elif method == "branch_cut":
        log_value = _log_branch_cut(s, t, u)
    elif method == "zolotarev":
        log_value = _log_zolotarev(s, t, u)
    else:
        log_value = _log_closed_form(s, t, u)
    return DensityEval(t, u, method, log_value)


def cdf(s: StableParams, t: float, u: float) -> float:
    """P(S_t <= u). Closed form for alpha = 1, quadrature otherwise."""
    if t <= 0.0:
        raise ValueError("t must be > 0")
    if u <= 0.0:
        return 0.0
    if s.alpha == 1.0:
        return float(erfc(t / (2.0 * sqrt(u))))
    scale = t ** (1.0 / s.beta)
    lo = scale * 1e-4
    if u <= lo:
        lo = u * 1e-3
    def f(x):
        return density(s, t, x).value
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value, _ = quad(f, lo, u, points=[min(scale, u)], limit=200,
                        epsabs=1e-13, epsrel=1e-10)
    return float(value)


def cdf_interpolator(s: StableParams, t: float, u_lo: float, u_hi: float,
                     grid_size: int = 160):
    """Monotone interpolant of the cdf on [u_lo, u_hi], for KS-style tests.

    Left mass below u_lo must already be negligible at the caller's
    tolerance; this is checked against the stretched-exponential envelope
    and enforced with RuntimeError in the clearly unsafe case.
    """
    if not 0.0 < u_lo < u_hi:
        raise ValueError("need 0 < u_lo < u_hi")
    grid = np.geomspace(u_lo, u_hi, grid_size)
    nodes, weights = roots_legendre(16)
    cums = np.zeros(grid_size)
    left_edge = density(s, t, u_lo).value * u_lo
    if left_edge > 1e-12:
        raise RuntimeError(
            f"cdf grid starts too late: density mass scale {left_edge:.2e} at u_lo"
        )
    for i in range(grid_size - 1):
        a, b = grid[i], grid[i + 1]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        vals = [density(s, t, float(mid + half * x)).value for x in nodes]
        cums[i + 1] = cums[i] + half * float(np.dot(weights, vals))
    interp = PchipInterpolator(grid, cums, extrapolate=False)
    tail = t * s.tail_constant / s.beta * u_hi ** (-s.beta)

    def F(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape)
        below = u <= u_lo
        above = u >= u_hi
        mid_mask = ~(below | above)
        out[below] = 0.0
        out[above] = np.minimum(1.0, cums[-1] + tail * (1.0 - (u[above] / u_hi) ** (-s.beta)))
        out[mid_mask] = interp(u[mid_mask])
        return out

    return F


def sample_increment(s: StableParams, t: float, rng: np.random.Generator,
                     size=None):
    """Draw S_t by Kanter's method.

    S = t**(1/beta) (A(U) / W)**((1-beta)/beta) with U uniform on (0, pi)
    and W unit exponential.
    """
    if t <= 0.0:
        raise ValueError("t must be > 0")
    b = s.beta
    u = rng.uniform(0.0, pi, size)
    w = rng.standard_exponential(size)
    a = kanter_a(b, u)
    return t ** (1.0 / b) * (a / w) ** ((1.0 - b) / b)


def levy_density(s: StableParams, u):
    """Levy (jump) density of the subordinator, beta/Gamma(1-beta) u**(-1-beta)."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0):
        raise ValueError("u must be > 0")
    out = s.tail_constant * u ** (-1.0 - s.beta)
    return out if out.ndim else float(out)


def laplace_transform_residual(s: StableParams, t: float, lam: float) -> float:
    """|int e**(-lam u) eta_t(u) du - e**(-t lam**beta)|, by direct quadrature.

    A round-trip consistency check tying the density back to its defining
    transform; uses the automatic method selection.
    """
    if lam <= 0.0:
        raise ValueError("lam must be > 0")
    scale = t ** (1.0 / s.beta)

    def f(u):
        return density(s, t, u).value * exp(-lam * u)

    pieces = [0.0, 1e-3 * scale, 0.1 * scale, scale, 10.0 * scale,
              100.0 * scale, max(2000.0 * scale, 50.0 / lam)]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for a, b in zip(pieces[:-1], pieces[1:]):
            val, _ = quad(f, a, b, limit=300, epsabs=1e-14, epsrel=1e-11)
            total += val
        tail, _ = quad(f, pieces[-1], np.inf, limit=300, epsabs=1e-14)
        total += tail
    return abs(total - exp(-t * lam ** s.beta))


def _log_left_envelope(s: StableParams, t: float, u: float) -> float:
    b = s.beta
    # stretched exponent evaluated through the same float path as the
    # density so the two cancel exactly in log-space ratios
    w = u * t ** (-1.0 / b)
    log_x = -b / (1.0 - b) * log(w)
    return (
        log(t) / (2.0 * (1.0 - b))
        - (2.0 - b) / (2.0 * (1.0 - b)) * log(u)
        - s.left_tail_rate * exp(min(log_x, 709.0))
    )


def left_envelope_ratio(s: StableParams, t: float, u: float) -> float:
    """Ratio of the density to its small-scale (stretched-exponential) envelope.

    Defined on the left regime w = t**(-2/alpha) u <= 2.
    """
    w = u * t ** (-1.0 / s.beta)
    if w > 2.0:
        raise ValueError("left envelope applies for w <= 2")
    ev = density(s, t, u)
    return exp(ev.log_value - _log_left_envelope(s, t, u))


def tail_envelope_ratio(s: StableParams, t: float, u: float) -> float:
    """Ratio of the density to the power-tail envelope t u**(-1-beta), w >= 1."""
    w = u * t ** (-1.0 / s.beta)
    if w < 1.0:
        raise ValueError("tail envelope applies for w >= 1")
    ev = density(s, t, u)
    return exp(ev.log_value - log(t) + (1.0 + s.beta) * log(u))


def _band_limits(table: dict, alpha: float) -> tuple[float, float]:
    if alpha in table:
        return table[alpha]
    lows, highs = zip(*table.values())
    return min(lows), max(highs)


def check_density_envelopes(s: StableParams,
                            t_values=(0.5, 1.0, 2.0, 5.0)) -> list[EnvelopeBand]:
    """Measure both envelope ratios on a standard grid against frozen bands."""
    left, tail = [], []
    b = s.beta
    # keep the stretched exponent below ~1e10 so the log-space ratio is
    # not drowned by rounding of the leading term at beta close to 1
    w_lo = max(3e-3, (s.left_tail_rate * 1e-10) ** ((1.0 - b) / b))
    for t in t_values:
        scale = t ** (1.0 / s.beta)
        # grid endpoints nudged off w = 1 so rounding in the reconstructed
        # w = u t**(-1/beta) cannot trip the domain guards
        for w in np.geomspace(w_lo, 0.999999, 10):
            left.append(left_envelope_ratio(s, t, float(w * scale)))
        for w in np.geomspace(1.000001, 1e5, 10):
            tail.append(tail_envelope_ratio(s, t, float(w * scale)))
    return [
        band_from_ratios("density left envelope", left,
                         *_band_limits(LEFT_RATIO_BANDS, s.alpha)),
        band_from_ratios("density tail envelope", tail,
                         *_band_limits(TAIL_RATIO_BANDS, s.alpha)),
    ]
