"""Adaptive rank-one analog transform ``P = I - beta b a^H`` and its clustered form.

The transform is chosen to minimize ``E||beta b a^H y - h_J s_J||^2``, i.e. the
mean squared error between ``P y`` and the jammer-free signal. For fixed
``(b, a)`` the optimal scale ``beta`` is available in closed form, and the
remaining objective factors into two Rayleigh quotients, one in ``b`` and one
in ``a``. Without alphabet constraints these are maximized by ``b = h_J`` and
``a = Ej Cy^{-1} h_J``; with finite alphabets the unconstrained vectors are
quantized entrywise and ``beta`` is recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg

from hermit.channel import ChannelRealization
from hermit.errors import ConfigurationError, NumericalError

AlphabetKind = Literal["phase", "quadrature", "unconstrained"]

QUADRATURE_CARDINALITIES = (4, 16, 64)


@dataclass(frozen=True)
class Alphabet:
    """Finite (or absent) alphabet for the entries of ``b`` and ``a``.

    Phase points are ``scale * exp(2 pi i k / AC)``. Quadrature points form a
    ``sqrt(AC) x sqrt(AC)`` grid with odd-integer coordinates times ``scale``,
    indexed as ``k = re_index * sqrt(AC) + im_index`` with level indices in
    ascending order.
    """

    kind: AlphabetKind = "unconstrained"
    cardinality: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("phase", "quadrature", "unconstrained"):
            raise ConfigurationError(f"unknown alphabet kind {self.kind!r}")
        if self.kind == "phase" and self.cardinality < 2:
            raise ConfigurationError("phase alphabet needs cardinality >= 2")
        if self.kind == "quadrature" and self.cardinality not in QUADRATURE_CARDINALITIES:
            raise ConfigurationError(
                f"quadrature alphabet cardinality must be one of {QUADRATURE_CARDINALITIES}, "
                f"got {self.cardinality}"
            )
        if self.scale <= 0:
            raise ConfigurationError("alphabet scale must be positive")

    @classmethod
    def phase(cls, cardinality: int) -> "Alphabet":
        return cls("phase", cardinality)

    @classmethod
    def quadrature(cls, cardinality: int) -> "Alphabet":
        return cls("quadrature", cardinality)

    @classmethod
    def unconstrained(cls) -> "Alphabet":
        return cls("unconstrained", 0)

    @property
    def is_finite(self) -> bool:
        return self.kind != "unconstrained"

    @property
    def side(self) -> int:
        return int(round(np.sqrt(self.cardinality)))

    def levels(self) -> np.ndarray:
        """Per-axis coordinates of the quadrature grid (ascending)."""
        m = self.side
        return self.scale * (2.0 * np.arange(m) - (m - 1))

    def points(self) -> np.ndarray:
        if self.kind == "phase":
            return self.scale * np.exp(2j * np.pi * np.arange(self.cardinality) / self.cardinality)
        if self.kind == "quadrature":
            lev = self.levels()
            return (lev[:, None] + 1j * lev[None, :]).ravel()
        raise ConfigurationError("unconstrained alphabet has no point set")

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.points()) ** 2)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cardinality": self.cardinality, "scale": self.scale}


@dataclass
class TransformBlock:
    beta: complex
    b: np.ndarray
    a: np.ndarray
    alphabet: Alphabet = field(default_factory=Alphabet.unconstrained)

    @property
    def size(self) -> int:
        return self.b.shape[0]

    def dense(self) -> np.ndarray:
        return np.eye(self.size, dtype=complex) - self.beta * np.outer(self.b, self.a.conj())

    def apply(self, y: np.ndarray) -> np.ndarray:
        """``y - beta (a^H y) b`` for a vector or a matrix of column vectors."""
        inner = self.a.conj() @ y
        return y - self.beta * np.multiply.outer(self.b, inner)


@dataclass
class AnalogTransform:
    blocks: list[TransformBlock]
    cluster_size: int

    @classmethod
    def identity(cls, num_antennas: int, cluster_size: int | None = None) -> "AnalogTransform":
        S = cluster_size or num_antennas
        if num_antennas % S:
            raise ConfigurationError(f"cluster size {S} does not divide B={num_antennas}")
        zeros = np.zeros(S, dtype=complex)
        return cls([TransformBlock(0j, zeros, zeros) for _ in range(num_antennas // S)], S)

    @property
    def num_clusters(self) -> int:
        return len(self.blocks)

    @property
    def num_antennas(self) -> int:
        return self.num_clusters * self.cluster_size

    def slices(self):
        S = self.cluster_size
        return [slice(c * S, (c + 1) * S) for c in range(self.num_clusters)]

    def dense(self) -> np.ndarray:
        return scipy.linalg.block_diag(*(blk.dense() for blk in self.blocks))

    def apply(self, y: np.ndarray) -> np.ndarray:
        out = np.empty(np.shape(y), dtype=complex)
        for sl, blk in zip(self.slices(), self.blocks):
            out[sl] = blk.apply(y[sl])
        return out

    def to_dict(self) -> dict:
        return {
            "cluster_size": self.cluster_size,
            "blocks": [
                {
                    "beta_re": float(np.real(blk.beta)),
                    "beta_im": float(np.imag(blk.beta)),
                    "b_re": blk.b.real.tolist(),
                    "b_im": blk.b.imag.tolist(),
                    "a_re": blk.a.real.tolist(),
                    "a_im": blk.a.imag.tolist(),
                    "alphabet": blk.alphabet.to_dict(),
                }
                for blk in self.blocks
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AnalogTransform":
        blocks = []
        for d in doc["blocks"]:
            blocks.append(
                TransformBlock(
                    beta=complex(d["beta_re"], d["beta_im"]),
                    b=np.asarray(d["b_re"]) + 1j * np.asarray(d["b_im"]),
                    a=np.asarray(d["a_re"]) + 1j * np.asarray(d["a_im"]),
                    alphabet=Alphabet(**d["alphabet"]),
                )
            )
        return cls(blocks, doc["cluster_size"])


def covariance(H: np.ndarray, h_J: np.ndarray, Es: float, Ej: float, N0: float) -> np.ndarray:
    """Receive covariance ``Es H H^H + Ej h_J h_J^H + N0 I``."""
    B = H.shape[0]
    Cy = Es * (H @ H.conj().T) + Ej * np.outer(h_J, h_J.conj()) + N0 * np.eye(B)
    return 0.5 * (Cy + Cy.conj().T)


def check_covariance(Cy: np.ndarray, rtol: float = 1e-12) -> None:
    """Raise :class:`NumericalError` unless ``Cy`` is Hermitian positive definite."""
    scale = np.linalg.norm(Cy)
    if np.linalg.norm(Cy - Cy.conj().T) > rtol * scale:
        raise NumericalError("covariance is not Hermitian")
    try:
        np.linalg.cholesky(Cy)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc


def _cho(Cy: np.ndarray):
    try:
        return scipy.linalg.cho_factor(Cy, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"covariance is not positive definite (cond ~ {np.linalg.cond(Cy):.3e})"
        ) from exc


def unconstrained_solution(Cy: np.ndarray, h_J: np.ndarray, Ej: float):
    """Return ``(b, a, beta) = (h_J, Ej Cy^{-1} h_J, 1)``."""
    a = Ej * scipy.linalg.cho_solve(_cho(Cy), h_J)
    return h_J.astype(complex, copy=True), a, 1.0


def quantize_vector(v: np.ndarray, alphabet: Alphabet) -> np.ndarray:
    """Map every entry of ``v`` to its nearest alphabet point.

    ``v`` is first rescaled so that its RMS matches the alphabet's RMS; the
    scale is irrelevant for the transform because ``beta`` absorbs it. Exact
    ties go to the point with the lowest index.
    """
    if not alphabet.is_finite:
        return np.asarray(v, dtype=complex).copy()
    v = np.asarray(v, dtype=complex)
    points = alphabet.points()
    if alphabet.kind == "phase":
        AC = alphabet.cardinality
        t = np.mod(np.angle(v) / (2 * np.pi / AC), AC)
        t[t >= AC] -= AC
        k = np.floor(t).astype(int)
        frac = t - k
        up = (frac > 0.5) | ((frac == 0.5) & (k == AC - 1))
        idx = np.where(up, k + 1, k) % AC
        return points[idx]

    v_rms = np.sqrt(np.mean(np.abs(v) ** 2))
    x = v * (alphabet.rms() / v_rms) if v_rms > 0 else v
    m = alphabet.side

    def axis_index(w):
        u = (w / alphabet.scale + (m - 1)) / 2
        return np.clip(np.ceil(u - 0.5), 0, m - 1).astype(int)

    idx = axis_index(x.real) * m + axis_index(x.imag)
    return points[idx]


def optimal_beta(b: np.ndarray, a: np.ndarray, Cy: np.ndarray, h_J: np.ndarray, Ej: float) -> complex:
    """MSE-optimal scale for fixed ``(b, a)``; zero for a degenerate pair."""
    bb = np.vdot(b, b).real
    aCa = np.vdot(a, Cy @ a).real
    if bb == 0 or aCa == 0:
        return 0j
    return complex(Ej * np.vdot(h_J, a) * np.vdot(b, h_J) / (bb * aCa))


def jammer_mse(beta: complex, b: np.ndarray, a: np.ndarray, Cy: np.ndarray, h_J: np.ndarray, Ej: float) -> float:
    """``E||beta b a^H y - h_J s_J||^2`` in closed form for any ``beta``."""
    quad = abs(beta) ** 2 * np.vdot(b, b).real * np.vdot(a, Cy @ a).real
    cross = 2 * np.real(beta * Ej * np.vdot(h_J, b) * np.vdot(a, h_J))
    return float(quad + Ej * np.vdot(h_J, h_J).real - cross)


def optimized_jammer_mse(b: np.ndarray, a: np.ndarray, Cy: np.ndarray, h_J: np.ndarray, Ej: float) -> float:
    """Objective after substituting the optimal ``beta``: a product of two Rayleigh quotients."""
    const = Ej * np.vdot(h_J, h_J).real
    bb = np.vdot(b, b).real
    aCa = np.vdot(a, Cy @ a).real
    if bb == 0 or aCa == 0:
        return float(const)
    rq_b = abs(np.vdot(h_J, b)) ** 2 / bb
    rq_a = abs(np.vdot(h_J, a)) ** 2 / aCa
    return float(const - Ej**2 * rq_b * rq_a)


def _cluster_slices(B: int, S: int):
    if S < 1 or B % S:
        raise ConfigurationError(f"cluster size {S} does not divide B={B}")
    return [slice(c * S, (c + 1) * S) for c in range(B // S)]


def build_transform(channel: ChannelRealization, cluster_size: int, alphabet: Alphabet) -> AnalogTransform:
    """Clusterwise transform from the diagonal covariance blocks.

    For every cluster the unconstrained optimum is computed from that cluster's
    covariance block and jammer-channel slice, quantized to ``alphabet`` and
    paired with the optimal ``beta`` of the quantized vectors.
    """
    blocks = []
    for sl in _cluster_slices(channel.B, cluster_size):
        h_c = channel.h_J[sl]
        Cy_c = covariance(channel.H[sl], h_c, channel.Es, channel.Ej, channel.N0)
        b, a, _ = unconstrained_solution(Cy_c, h_c, channel.Ej)
        if alphabet.is_finite:
            b = quantize_vector(b, alphabet)
            a = quantize_vector(a, alphabet)
        beta = optimal_beta(b, a, Cy_c, h_c, channel.Ej)
        blocks.append(TransformBlock(beta, b, a, alphabet))
    return AnalogTransform(blocks, cluster_size)


def apply_transform(T: AnalogTransform, y: np.ndarray) -> np.ndarray:
    return T.apply(y)


def residual_jammer_mse(T: AnalogTransform, channel: ChannelRealization) -> float:
    """Jammer-suppression objective summed over clusters at the stored ``beta`` values."""
    total = 0.0
    for sl, blk in zip(T.slices(), T.blocks):
        h_c = channel.h_J[sl]
        Cy_c = covariance(channel.H[sl], h_c, channel.Es, channel.Ej, channel.N0)
        total += jammer_mse(blk.beta, blk.b, blk.a, Cy_c, h_c, channel.Ej)
    return total
