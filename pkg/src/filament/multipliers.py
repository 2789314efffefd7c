"""Tangential and normal slender-body multipliers and their RFT limits.

For wavenumber k != 0 and x = 2*pi*eps*|k|,

    mt = [2 K0 K1 + x (K0^2 - K1^2)] / (4 pi x K1^2)
    mn = [2 K0 K1 K2 + x (K1^2 (K0 + K2) - 2 K0^2 K2)]
         / (2 pi x [4 K1^2 K2 + x K1 (K1^2 - K0 K2)])

with K_j = K_j(x).  The zero modes are |log eps|/(2 pi) and
|log eps|/(4 pi).  Both ratios are homogeneous in the K's (degree 2
over degree 2, and 3 over 3), so evaluating with the exponentially
scaled functions e^x K_j(x) cancels the e^{-x} decay exactly and the
formulas remain well conditioned arbitrarily far past the underflow
threshold of the raw Bessel values; no separate asymptotic branch is
needed.
"""

from dataclasses import dataclass

import numpy as np

from .bessel import bessel_k_scaled

EULER_GAMMA = 0.5772156649015329


def _validate_epsilon(epsilon):
    if not (np.isfinite(epsilon) and 0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return float(epsilon)


def _mt_nonzero(x):
    k0 = bessel_k_scaled(0, x)
    k1 = bessel_k_scaled(1, x)
    num = 2.0 * k0 * k1 + x * (k0 * k0 - k1 * k1)
    return num / (4.0 * np.pi * x * k1 * k1)


def _mn_nonzero(x):
    k0 = bessel_k_scaled(0, x)
    k1 = bessel_k_scaled(1, x)
    k2 = bessel_k_scaled(2, x)
    num = 2.0 * k0 * k1 * k2 + x * (k1 * k1 * (k0 + k2) - 2.0 * k0 * k0 * k2)
    den = 2.0 * np.pi * x * (4.0 * k1 * k1 * k2 + x * k1 * (k1 * k1 - k0 * k2))
    return num / den


def _eval(epsilon, k, nonzero, zero_mode):
    epsilon = _validate_epsilon(epsilon)
    ka = np.abs(np.asarray(k, dtype=float))
    out = np.empty_like(ka)
    nz = ka > 0
    out[nz] = nonzero(2.0 * np.pi * epsilon * ka[nz])
    out[~nz] = zero_mode * np.abs(np.log(epsilon))
    return out if np.ndim(k) else float(out)


def eval_mt(epsilon, k):
    """Tangential multiplier m_t(k); depends on |k| only."""
    return _eval(epsilon, k, _mt_nonzero, 1.0 / (2.0 * np.pi))


def eval_mn(epsilon, k):
    """Normal multiplier m_n(k); depends on |k| only."""
    return _eval(epsilon, k, _mn_nonzero, 1.0 / (4.0 * np.pi))


def lowk_reference_mt(epsilon, k):
    """Leading low-wavenumber expansion of m_t.

    (-1 - 2*gamma - 2*log(pi) - 2*log(eps*|k|)) / (4*pi), accurate to
    O((eps k log(eps k))^2) for 2*pi*eps*|k| << 1.
    """
    x = epsilon * np.abs(np.asarray(k, dtype=float))
    return (-1.0 - 2.0 * EULER_GAMMA - 2.0 * np.log(np.pi) - 2.0 * np.log(x)) / (4.0 * np.pi)


def lowk_reference_mn(epsilon, k):
    """Leading low-wavenumber expansion of m_n.

    (1 - 2*gamma - 2*log(pi) - 2*log(eps*|k|)) / (8*pi).
    """
    x = epsilon * np.abs(np.asarray(k, dtype=float))
    return (1.0 - 2.0 * EULER_GAMMA - 2.0 * np.log(np.pi) - 2.0 * np.log(x)) / (8.0 * np.pi)


def lowk_rft_difference(epsilon, k, direction):
    """m(k) minus the matching RFT drag coefficient, low wavenumbers only.

    Valid for |k| < 1/(2*pi*eps); the difference grows only like
    log|k|, uniformly in eps.  k = 0 gives exactly 0.
    """
    epsilon = _validate_epsilon(epsilon)
    if direction not in ("tangential", "normal"):
        raise ValueError(f"direction must be 'tangential' or 'normal', got {direction!r}")
    ka = np.abs(np.asarray(k, dtype=float))
    if np.any(ka >= 1.0 / (2.0 * np.pi * epsilon)):
        raise ValueError("lowk_rft_difference requires |k| < 1/(2*pi*eps)")
    log_eps = np.abs(np.log(epsilon))
    if direction == "tangential":
        out = eval_mt(epsilon, k) - log_eps / (2.0 * np.pi)
    else:
        out = eval_mn(epsilon, k) - log_eps / (4.0 * np.pi)
    return out


@dataclass(frozen=True)
class RftConstants:
    """Resistive-force-theory drag coefficients at fixed eps."""

    epsilon: float
    tangential: float
    normal: float


def rft_constants(epsilon):
    epsilon = _validate_epsilon(epsilon)
    log_eps = abs(np.log(epsilon))
    return RftConstants(epsilon, log_eps / (2.0 * np.pi), log_eps / (4.0 * np.pi))


@dataclass(frozen=True)
class MultiplierTable:
    """m_t(|k|), m_n(|k|) for |k| = 0..kmax at fixed eps."""

    epsilon: float
    kmax: int
    mt: np.ndarray
    mn: np.ndarray


def build_table(epsilon, kmax):
    epsilon = _validate_epsilon(epsilon)
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax!r}")
    k = np.arange(kmax + 1)
    table = MultiplierTable(epsilon, int(kmax), eval_mt(epsilon, k), eval_mn(epsilon, k))
    table.mt.setflags(write=False)
    table.mn.setflags(write=False)
    return table
