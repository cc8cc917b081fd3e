"""Log-gamma family functions on the positive reals.

The beta likelihood needs ``log Gamma``, ``psi`` (digamma) and ``psi'``
(trigamma) and nothing else, so they are implemented here directly on top
of numpy: a Lanczos approximation for the log-gamma and recurrence shifts
into the Bernoulli asymptotic regime for the two derivatives.  Target
accuracy is 1e-12 relative over [1e-3, 1e6]; the tests check that window
against high-precision references.

All three functions accept scalars or arrays and require strictly
positive arguments.
"""

from __future__ import annotations

import numpy as np

__all__ = ["log_gamma", "digamma", "trigamma"]

# Lanczos coefficients for g = 607/128, n = 15 (Pugh's thesis); relative
# error of the rational part is a few ulps across the right half-plane.
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEF = np.array(
    [
        0.99999999999999709182,
        57.156235665862923517,
        -59.597960355475491248,
        14.136097974741747174,
        -0.49191381609762019978,
        0.33994649984811888699e-4,
        0.46523628927048575665e-4,
        -0.98374475304879564677e-4,
        0.15808870322491248884e-3,
        -0.21026444172410488319e-3,
        0.21743961811521264320e-3,
        -0.16431810653676389022e-3,
        0.84418223983852743293e-4,
        -0.26190838401581408670e-4,
        0.36899182659531622704e-5,
    ]
)

_HALF_LOG_TWO_PI = 0.91893853320467274178  # log(sqrt(2*pi))

# asymptotic tail coefficients B_{2n}/(2n) for digamma, n = 1..7
_DIGAMMA_TAIL = np.array(
    [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ]
)

# asymptotic tail coefficients B_{2n} for trigamma, n = 1..7
_TRIGAMMA_TAIL = np.array(
    [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ]
)

_ASYMPTOTIC_CUTOFF = 12.0


def _as_positive_array(x, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    if not np.all(arr > 0.0):
        raise ValueError(f"{name} requires strictly positive arguments")
    return np.atleast_1d(arr).copy(), scalar


def _lanczos_log_gamma(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    series = np.full_like(x, _LANCZOS_COEF[0])
    for k in range(1, len(_LANCZOS_COEF)):
        series += _LANCZOS_COEF[k] / (x + (k - 1))
    t = x + _LANCZOS_G - 0.5
    return _HALF_LOG_TWO_PI + (x - 0.5) * np.log(t) - t + np.log(series)


def log_gamma(x):
    """Natural log of the Gamma function for x > 0."""
    arr, scalar = _as_positive_array(x, "log_gamma")
    out = np.empty_like(arr)
    small = arr < 0.5
    if np.any(small):
        xs = arr[small]
        # reflection keeps the Lanczos evaluation away from the pole at 0
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - _lanczos_log_gamma(1.0 - xs)
    if np.any(~small):
        out[~small] = _lanczos_log_gamma(arr[~small])
    return float(out[0]) if scalar else out


def digamma(x):
    """Logarithmic derivative of Gamma, psi(x), for x > 0."""
    arr, scalar = _as_positive_array(x, "digamma")
    acc = np.zeros_like(arr)
    # recurrence psi(x) = psi(x + 1) - 1/x until the asymptotic region
    while True:
        mask = arr < _ASYMPTOTIC_CUTOFF
        if not np.any(mask):
            break
        acc[mask] -= 1.0 / arr[mask]
        arr[mask] += 1.0
    inv2 = 1.0 / (arr * arr)
    tail = np.zeros_like(arr)
    for c in _DIGAMMA_TAIL[::-1]:
        tail = (tail + c) * inv2
    out = acc + np.log(arr) - 0.5 / arr - tail
    return float(out[0]) if scalar else out


def trigamma(x):
    """Derivative of digamma, psi'(x), for x > 0."""
    arr, scalar = _as_positive_array(x, "trigamma")
    acc = np.zeros_like(arr)
    # recurrence psi'(x) = psi'(x + 1) + 1/x^2
    while True:
        mask = arr < _ASYMPTOTIC_CUTOFF
        if not np.any(mask):
            break
        acc[mask] += 1.0 / arr[mask] ** 2
        arr[mask] += 1.0
    inv = 1.0 / arr
    inv2 = inv * inv
    tail = np.zeros_like(arr)
    for c in _TRIGAMMA_TAIL[::-1]:
        tail = (tail + c) * inv2
    out = acc + inv + 0.5 * inv2 + tail * inv
    return float(out[0]) if scalar else out
