"""First and second moments of interval-truncated Gaussians.

The mean of N(mu, sigma^2) truncated to [lo, up) is
mu - sigma * (phi(beta) - phi(alpha)) / (Phi(beta) - Phi(alpha)) with
alpha = (lo - mu)/sigma and beta = (up - mu)/sigma; the variance follows
from the standard second-moment identity. Evaluating phi/Phi differences
naively underflows once the interval sits a handful of sigmas into a tail,
which silently poisons downstream posterior means, so same-sign intervals
are evaluated with scaled-complementary-error-function arithmetic:

    Phi(b) - Phi(a) = exp(-a^2/2)/2 * (erfcx(a/s2) - erfcx(b/s2) e^-d),
    phi(b) - phi(a) = exp(-a^2/2)/s2pi * (e^-d - 1),  d = (b^2 - a^2)/2,

for 0 <= a < b, in which the common exp(-a^2/2) cancels from every ratio.
Left-tail intervals are mirrored onto this branch; intervals that straddle
the mean are safe to evaluate directly. If a ratio still degenerates (an
extreme sliver), the mean falls back to the nearer interval boundary and
the case is flagged.
"""

import numpy as np
from scipy.special import erfcx, ndtr

_SQRT2 = np.sqrt(2.0)
_SQRT_2_PI = np.sqrt(2.0 / np.pi)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _phi(x):
    out = np.zeros_like(x)
    finite = np.isfinite(x)
    out[finite] = _INV_SQRT_2PI * np.exp(-0.5 * x[finite] ** 2)
    return out


def _xphi(x):
    out = np.zeros_like(x)
    finite = np.isfinite(x)
    out[finite] = x[finite] * _INV_SQRT_2PI * np.exp(-0.5 * x[finite] ** 2)
    return out


def _tail_core(a, b):
    """ratio1, ratio2, log Z and a degeneracy mask for 0 <= a < b (b may be inf)."""
    with np.errstate(invalid="ignore", over="ignore"):
        d = np.where(np.isinf(b), np.inf, 0.5 * (b - a) * (b + a))
        e = np.exp(-d)
        be = np.where(np.isinf(b), 0.0, b * e)
        tail_term = np.where(np.isinf(b), 0.0, erfcx(np.where(np.isinf(b), 0.0, b) / _SQRT2) * e)
    denom = erfcx(a / _SQRT2) - tail_term
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio1 = _SQRT_2_PI * (e - 1.0) / denom
        ratio2 = _SQRT_2_PI * (be - a) / denom
        log_z = -0.5 * a ** 2 + np.log(0.5 * denom)
    bad = ~np.isfinite(ratio1) | ~np.isfinite(ratio2) | (denom <= 0)
    return ratio1, ratio2, log_z, bad


def _ratios(alpha, beta):
    """Stable (ratio1, ratio2, log Z, degenerate mask) over broadcast arrays.

    ratio1 = (phi(b) - phi(a))/Z, ratio2 = (b phi(b) - a phi(a))/Z,
    Z = Phi(b) - Phi(a); under the mirror (a, b) -> (-b, -a) ratio1 flips
    sign while ratio2 and Z are invariant.
    """
    ratio1 = np.zeros_like(alpha)
    ratio2 = np.zeros_like(alpha)
    log_z = np.zeros_like(alpha)
    bad = np.zeros(alpha.shape, dtype=bool)

    right = alpha >= 0
    left = beta <= 0
    middle = ~(right | left)

    if np.any(middle):
        a, b = alpha[middle], beta[middle]
        z = ndtr(b) - ndtr(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = (_phi(b) - _phi(a)) / z
            r2 = (_xphi(b) - _xphi(a)) / z
            lz = np.log(z)
        ratio1[middle], ratio2[middle], log_z[middle] = r1, r2, lz
        bad[middle] = ~np.isfinite(r1) | ~np.isfinite(r2) | (z <= 0)

    if np.any(right):
        r1, r2, lz, b_ = _tail_core(alpha[right], beta[right])
        ratio1[right], ratio2[right], log_z[right] = r1, r2, lz
        bad[right] = b_

    if np.any(left):
        r1, r2, lz, b_ = _tail_core(-beta[left], -alpha[left])
        ratio1[left], ratio2[left], log_z[left] = -r1, r2, lz
        bad[left] = b_

    return ratio1, ratio2, log_z, bad


def _standardize(mu, sigma, lo, up):
    mu, sigma, lo, up = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (mu, sigma, lo, up)))
    if np.any(sigma <= 0):
        raise ValueError("sigma must be > 0")
    if np.any(~(lo < up)):
        raise ValueError("lo < up is required")
    alpha = np.where(np.isinf(lo), -np.inf, (lo - mu) / sigma)
    beta = np.where(np.isinf(up), np.inf, (up - mu) / sigma)
    return mu, sigma, lo, up, alpha, beta


def trunc_gauss_moments(mu, sigma, lo, up, return_fallback: bool = False):
    """Mean and variance of N(mu, sigma^2) truncated to [lo, up).

    All arguments broadcast; lo may be -inf and up may be +inf. Returns
    (mean, var), plus a boolean fallback mask when return_fallback is set
    marking components where the stable ratios degenerated and the mean was
    pinned to the nearer boundary.
    """
    mu, sigma, lo, up, alpha, beta = _standardize(mu, sigma, lo, up)
    ratio1, ratio2, _, fallback = _ratios(alpha, beta)

    mean = mu - sigma * ratio1
    var = sigma ** 2 * (1.0 - ratio2 - ratio1 ** 2)

    if np.any(fallback):
        # pin to the boundary nearer the mode; crude variance, flagged
        near_lo = fallback & (np.abs(alpha) <= np.abs(beta))
        near_up = fallback & ~near_lo
        mean[near_lo] = lo[near_lo]
        mean[near_up] = np.nextafter(up[near_up], lo[near_up])
        both = fallback & np.isfinite(lo) & np.isfinite(up)
        var[both] = (up[both] - lo[both]) ** 2 / 12.0
        one_sided = fallback & ~both
        amin = np.minimum(np.abs(alpha[one_sided]), np.abs(beta[one_sided]))
        var[one_sided] = sigma[one_sided] ** 2 / (1.0 + amin ** 2)

    # float round-off can push the analytic mean onto/past a boundary
    finite_lo = np.isfinite(lo)
    mean[finite_lo] = np.maximum(mean[finite_lo], lo[finite_lo])
    finite_up = np.isfinite(up)
    mean[finite_up] = np.minimum(mean[finite_up], np.nextafter(up[finite_up], -np.inf))
    var = np.maximum(var, np.finfo(float).tiny)

    if return_fallback:
        return mean, var, fallback
    return mean, var


def trunc_gauss_entropy(mu, sigma, lo, up):
    """Differential entropy (nats) of N(mu, sigma^2) truncated to [lo, up).

    H = log(sqrt(2 pi e) sigma Z) + (alpha phi(alpha) - beta phi(beta))/(2Z);
    the pinch term equals -ratio2/2, so the stable ratio machinery is reused.
    Only the free-energy diagnostic consumes this.
    """
    mu, sigma, lo, up, alpha, beta = _standardize(mu, sigma, lo, up)
    _, ratio2, log_z, bad = _ratios(alpha, beta)
    h = 0.5 * np.log(2.0 * np.pi * np.e) + np.log(sigma) + log_z - 0.5 * ratio2
    if np.any(bad):
        both = bad & np.isfinite(lo) & np.isfinite(up)
        h[both] = np.log(np.maximum(up[both] - lo[both], np.finfo(float).tiny))
        h[bad & ~both] = np.log(sigma[bad & ~both])
    return h
