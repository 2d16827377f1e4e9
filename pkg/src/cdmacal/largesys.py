"""Large-system analysis of the randomly spread LMMSE uplink.

In the many-user limit (K users, spreading factor M, load alpha = K/M held
fixed) the LMMSE multiuser channel decouples: the tagged user sees a
single-user channel whose post-detection SNR is gamma = p / beta, where p
is the user's exponentially distributed received power and beta solves the
fixed point

    beta = sigma^2 + alpha * integral_0^inf  p beta / (p + beta) e^-p dp.

gamma_bar = 1/beta is then the average post-detection SNR of a unit-mean
user, and the SNR density is exponential: f(gamma) = exp(-gamma/gamma_bar)
/ gamma_bar.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .amc import ModeTable, default_mode_table
from .units import db_to_linear

# Truncation for the interference integral: contributions outside
# [min(beta,1)*e^-21, 45] are below 1e-13 of the integral's value.
_LOG_SPAN_LO = 21.0
_P_MAX = 45.0


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters of one operating point.

    snr_avg_db is the average received SNR per user (sigma^2 = 10^(-snr/10)
    with unit-mean channel power), alpha the user load K/M, f_m_hz the
    maximum Doppler shift, t_b_s the slot duration, w_hz the system
    bandwidth, and n_b_bits the block size used for queueing.
    """

    snr_avg_db: float
    alpha: float
    f_m_hz: float
    t_b_s: float = 2e-3
    w_hz: float = 20e6
    n_b_bits: int = 10_000
    modes: ModeTable = field(default_factory=default_mode_table)

    def __post_init__(self):
        if not math.isfinite(self.snr_avg_db):
            raise ValueError("snr_avg_db must be finite")
        if not 0 < self.alpha < math.inf:
            raise ValueError("alpha must be positive and finite")
        if self.f_m_hz < 0:
            raise ValueError("f_m_hz must be nonnegative")
        if not 0 < self.t_b_s < math.inf:
            raise ValueError("t_b_s must be positive")
        if not 0 < self.w_hz < math.inf:
            raise ValueError("w_hz must be positive")
        if int(self.n_b_bits) != self.n_b_bits or self.n_b_bits <= 0:
            raise ValueError("n_b_bits must be a positive integer")

    @property
    def sigma2(self):
        """Noise variance for unit average received power."""
        return db_to_linear(-self.snr_avg_db)


@dataclass(frozen=True)
class DecoupledChannel:
    """Solution of the large-system fixed point."""

    beta: float
    gamma_bar: float
    sigma2: float
    alpha: float
    residual: float
    iterations: int


@lru_cache(maxsize=32)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def interference_integral(beta, rtol=1e-12):
    """integral_0^inf p*beta/(p+beta) e^-p dp by quadrature.

    Evaluated on the log axis (p = e^x) with Gauss-Legendre so the pole at
    p = -beta never sits close to the integration nodes; a plain
    exponential-weight rule loses most of its digits once beta << 1.  The
    node count is doubled until the result moves by less than rtol.
    """
    beta = float(beta)
    if not beta > 0 or not math.isfinite(beta):
        raise ValueError("beta must be positive and finite")
    x_min = min(math.log(beta), 0.0) - _LOG_SPAN_LO
    x_max = math.log(_P_MAX)
    half = 0.5 * (x_max - x_min)
    mid = 0.5 * (x_max + x_min)
    prev = None
    n = 64
    while n <= 2048:
        x, w = _leggauss(n)
        p = np.exp(half * x + mid)
        f = beta * p * p / (p + beta) * np.exp(-p)
        val = half * float(np.sum(w * f))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        n *= 2
    raise RuntimeError(f"interference integral did not converge for beta={beta}")


def interference_integral_closed_form(beta, dps=40):
    """Closed form beta * (1 - beta e^beta E1(beta)), via arbitrary precision.

    E1 underflows and e^beta overflows in double precision for large beta,
    so this path is kept as a cross-check rather than the default.
    """
    import mpmath as mp

    if not beta > 0 or not math.isfinite(beta):
        raise ValueError("beta must be positive and finite")
    with mp.workdps(dps):
        b = mp.mpf(beta)
        return float(b * (1 - b * mp.exp(b) * mp.e1(b)))


def _bisect_fixed_point(sigma2, alpha, iters=200):
    """Bracketing fallback: beta* lies in [sigma^2, sigma^2 + alpha]."""
    g = lambda b: b - sigma2 - alpha * interference_integral(b)
    lo, hi = sigma2, sigma2 + alpha
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_fixed_point(cfg, alpha=None, rtol=1e-13, max_iter=100_000):
    """Solve the large-system fixed point for beta and gamma_bar = 1/beta.

    Plain iteration from beta_0 = sigma^2 increases monotonically to the
    unique fixed point; if it fails to meet a 1e-10 relative residual within
    max_iter steps the bracketing bisection takes over.
    """
    if alpha is None:
        alpha = cfg.alpha
    if not 0 <= alpha < math.inf:
        raise ValueError("alpha must be nonnegative and finite")
    sigma2 = cfg.sigma2
    beta = sigma2
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = sigma2 + alpha * interference_integral(beta)
        done = abs(nxt - beta) <= rtol * abs(nxt)
        beta = nxt
        if done:
            break
    residual = abs(beta - sigma2 - alpha * interference_integral(beta)) / beta
    if residual >= 1e-10:
        beta = _bisect_fixed_point(sigma2, alpha)
        residual = abs(beta - sigma2 - alpha * interference_integral(beta)) / beta
    return DecoupledChannel(beta=beta, gamma_bar=1.0 / beta, sigma2=sigma2,
                            alpha=alpha, residual=residual, iterations=iterations)


def post_detection_snr_pdf(gamma_bar):
    """Density of the post-detection SNR: exponential with mean gamma_bar."""
    if not gamma_bar > 0:
        raise ValueError("gamma_bar must be positive")

    def pdf(gamma):
        g = np.asarray(gamma, dtype=float)
        out = np.where(g < 0, 0.0, np.exp(-g / gamma_bar) / gamma_bar)
        return out if out.ndim else float(out)

    return pdf
