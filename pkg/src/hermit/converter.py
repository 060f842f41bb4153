"""Low-resolution ADC model: gain control, uniform midrise quantizer, Bussgang statistics.

All Gaussian expectations are evaluated exactly cell by cell with the partial
moments of the standard normal density, so no sampling or quadrature error
enters the step size, the Bussgang gain or the distortion variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from hermit.errors import ConfigurationError, NumericalError
from hermit.transform import AnalogTransform

MIN_BITS, MAX_BITS = 1, 16
STEP_SEARCH_INTERVAL = (1e-3, 4.0)

_SQRT_2PI = np.sqrt(2 * np.pi)


def _pdf(x):
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _x_pdf(x):
    """``x phi(x)``, zero at +-inf."""
    finite = np.isfinite(x)
    out = np.zeros_like(x)
    out[finite] = x[finite] * _pdf(x[finite])
    return out


def _check_bits(q: int) -> None:
    if not MIN_BITS <= q <= MAX_BITS or int(q) != q:
        raise ConfigurationError(f"ADC resolution must be an integer in [{MIN_BITS}, {MAX_BITS}], got {q}")


def _cells(q: int, step: float):
    """Reconstruction levels and the lower/upper edges of their decision cells."""
    n = 2**q
    k = np.arange(n)
    levels = (k - n / 2 + 0.5) * step
    lower = (k - n / 2) * step
    upper = lower + step
    lower[0], upper[-1] = -np.inf, np.inf
    return levels, lower, upper


def quantizer_mse(step: float, q: int) -> float:
    """``E[(Q(x) - x)^2]`` for standard normal ``x``."""
    c, lo, hi = _cells(q, step)
    prob = ndtr(hi) - ndtr(lo)
    second = prob - (_x_pdf(hi) - _x_pdf(lo))
    first = _pdf(lo) - _pdf(hi)
    return float(np.sum(second - 2 * c * first + c**2 * prob))


@lru_cache(maxsize=None)
def optimal_step_size(q: int) -> float:
    """MSE-optimal step of a ``q``-bit midrise quantizer for a standard normal input."""
    _check_bits(q)
    lo, hi = STEP_SEARCH_INTERVAL
    grid = np.geomspace(lo, hi, 400)
    mse = np.array([quantizer_mse(s, q) for s in grid])
    i = int(np.argmin(mse))
    bracket = (grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)])
    res = minimize_scalar(
        quantizer_mse, bounds=bracket, args=(q,), method="bounded", options={"xatol": 1e-12}
    )
    return float(res.x)


def midrise(x, q: int, step: float):
    """``q``-bit uniform midrise quantizer with saturation at ``(step/2)(2^q - 1)``."""
    top = 0.5 * step * (2**q - 1)
    return np.clip(step * np.floor(np.asarray(x, dtype=float) / step) + 0.5 * step, -top, top)


def bussgang_characterize(q: int, step: float) -> tuple[float, float]:
    """Bussgang gain and distortion variance ``(gamma, D)`` for a standard normal input."""
    c, lo, hi = _cells(q, step)
    prob = ndtr(hi) - ndtr(lo)
    gamma = float(np.sum(c * (_pdf(lo) - _pdf(hi))))
    D = float(np.sum(c**2 * prob) - gamma**2)
    return gamma, max(D, 0.0)


@dataclass(frozen=True)
class AdcModel:
    resolution: int
    step: float
    bussgang_gain: float
    distortion_var: float
    gains: np.ndarray

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigurationError("step must be positive")
        if np.any(np.asarray(self.gains) <= 0):
            raise ConfigurationError("gain-control entries must be positive")

    @classmethod
    def for_resolution(cls, q: int, gains: np.ndarray) -> "AdcModel":
        step = optimal_step_size(q)
        gamma, D = bussgang_characterize(q, step)
        return cls(q, step, gamma, D, np.asarray(gains, dtype=float))

    def quantize(self, x):
        return midrise(x, self.resolution, self.step)


def transformed_variances(T: AnalogTransform, Cy: np.ndarray) -> np.ndarray:
    """Diagonal of ``P Cy P^H`` computed clusterwise, without forming the product."""
    out = np.empty(T.num_antennas)
    for sl, blk in zip(T.slices(), T.blocks):
        C = Cy[sl, sl]
        Ca = C @ blk.a
        aCa = np.vdot(blk.a, Ca).real
        out[sl] = (
            np.diag(C).real
            - 2 * np.real(blk.beta * blk.b * Ca.conj())
            + abs(blk.beta) ** 2 * np.abs(blk.b) ** 2 * aCa
        )
    return out


def gain_control(T: AnalogTransform, Cy: np.ndarray) -> np.ndarray:
    """Per-ADC gains that give each real quantizer input unit variance."""
    var = transformed_variances(T, Cy)
    if np.any(var <= 0):
        raise NumericalError("transformed signal has zero variance on some antenna")
    return np.sqrt(2.0 / var)


def convert(y_P: np.ndarray, adc: AdcModel) -> np.ndarray:
    """Gain-controlled I/Q quantization ``G^{-1} (Q(Re G y) + i Q(Im G y))``.

    ``y_P`` may be a vector or a ``B x N`` matrix of column vectors.
    """
    g = adc.gains if np.ndim(y_P) == 1 else adc.gains[:, None]
    z = g * y_P
    return (adc.quantize(z.real) + 1j * adc.quantize(z.imag)) / g
