"""Bussgang-aware LMMSE equalization and Gray-mapped QAM hard decisions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hermit.errors import ConfigurationError, NumericalError
from hermit.transform import AnalogTransform


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """Square Gray-mapped QAM with average symbol energy ``energy``.

    ``points[k]`` is the symbol carrying label ``k``; the label's most
    significant half encodes the in-phase level, the rest the quadrature level.
    """

    order: int = 16
    energy: float = 1.0

    def __post_init__(self):
        m = int(round(np.sqrt(self.order)))
        if m * m != self.order or m < 2 or m & (m - 1):
            raise ConfigurationError(f"QAM order must be an even power of two, got {self.order}")

    @property
    def side(self) -> int:
        return int(round(np.sqrt(self.order)))

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def unit(self) -> float:
        """Half the distance between neighbouring levels."""
        return float(np.sqrt(1.5 * self.energy / (self.order - 1)))

    @property
    def points(self) -> np.ndarray:
        m = self.side
        levels = self.unit * (2.0 * np.arange(m) - (m - 1))
        half = self.bits_per_symbol // 2
        pts = np.empty(self.order, dtype=complex)
        for i_re in range(m):
            for i_im in range(m):
                pts[(_gray(i_re) << half) | _gray(i_im)] = levels[i_re] + 1j * levels[i_im]
        return pts

    @property
    def bit_table(self) -> np.ndarray:
        """``order x bits_per_symbol`` array of label bits, MSB first."""
        k = self.bits_per_symbol
        labels = np.arange(self.order)
        return ((labels[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)

    def _axis_level(self, x):
        m = self.side
        u = (np.asarray(x) / self.unit + (m - 1)) / 2
        lo = np.floor(u)
        frac = u - lo
        lo = lo.astype(int)
        hi = lo + 1
        # exact ties go to the level with the smaller Gray code
        tie_up = _gray(np.clip(hi, 0, m - 1)) < _gray(np.clip(lo, 0, m - 1))
        pick = np.where((frac > 0.5) | ((frac == 0.5) & tie_up), hi, lo)
        return np.clip(pick, 0, m - 1)

    def detect_labels(self, s: np.ndarray) -> np.ndarray:
        half = self.bits_per_symbol // 2
        return (_gray(self._axis_level(s.real)) << half) | _gray(self._axis_level(s.imag))


def lmmse_matrix(
    H: np.ndarray,
    h_J: np.ndarray,
    T: AnalogTransform | np.ndarray,
    Es: float,
    Ej: float,
    N0: float,
    gamma: float,
    D: float,
    gains: np.ndarray,
) -> np.ndarray:
    """LMMSE equalizer ``W`` (U x B) for ``r = gamma P (H s + h_J s_J + n) + G^{-1} d``.

    ``T`` may be an :class:`AnalogTransform` or an already materialized matrix.
    The bracketed covariance is factored by Cholesky; a failure raises
    :class:`NumericalError` with a condition-number estimate.
    """
    if gamma <= 0:
        raise ConfigurationError("Bussgang gain must be positive")
    P = T.dense() if isinstance(T, AnalogTransform) else np.asarray(T)
    PH = P @ H
    Ph = P @ h_J
    M = (
        PH @ PH.conj().T
        + (Ej / Es) * np.outer(Ph, Ph.conj())
        + (N0 / Es) * (P @ P.conj().T)
        + np.diag(2 * D / (gamma**2 * Es) / np.asarray(gains, dtype=float) ** 2)
    )
    M = 0.5 * (M + M.conj().T)
    try:
        factor = scipy.linalg.cho_factor(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"equalizer covariance is not positive definite (cond ~ {np.linalg.cond(M):.3e})"
        ) from exc
    return scipy.linalg.cho_solve(factor, PH).conj().T / gamma


def estimate(W: np.ndarray, r: np.ndarray) -> np.ndarray:
    return W @ r


def hard_detect(s_star: np.ndarray, constellation: Constellation | None = None):
    """Nearest-point decisions; returns ``(symbols, bits)`` with bits along a new last axis."""
    constellation = constellation or Constellation()
    labels = constellation.detect_labels(np.asarray(s_star))
    return constellation.points[labels], constellation.bit_table[labels]
