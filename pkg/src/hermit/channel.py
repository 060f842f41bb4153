"""Synthetic mmWave uplink channels for a uniform linear array.

LoS channels are a single steering vector with free-space ``1/d`` amplitude.
Non-LoS channels superimpose ``L`` Rayleigh-weighted paths whose angles are
Laplacian-spread around the geometric azimuth. Both stand in for a ray-tracing
or stochastic-geometry generator; they reproduce the qualitative LoS/non-LoS
distinction (rank-one-like vs. spread spatial signatures) and nothing more.

Complex Gaussian convention used throughout the package: variance ``v`` means
independent real and imaginary parts of variance ``v/2`` each.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from hermit.errors import ConfigurationError

MAX_PLACEMENT_DRAWS = 10_000

Propagation = Literal["los", "nlos"]


@dataclass(frozen=True)
class ArrayGeometry:
    num_antennas: int
    element_spacing: float = 0.5  # wavelengths
    sector_halfwidth: float = 60.0  # degrees

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ConfigurationError("num_antennas must be >= 1")
        if self.element_spacing <= 0:
            raise ConfigurationError("element_spacing must be positive")


@dataclass(frozen=True)
class PlacementSpec:
    num_users: int
    min_angular_sep: float = 1.0  # degrees
    distance_range: tuple[float, float] = (10.0, 100.0)  # meters
    sector: tuple[float, float] = (-60.0, 60.0)  # degrees

    def __post_init__(self):
        if self.num_users < 1:
            raise ConfigurationError("num_users must be >= 1")
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            raise ConfigurationError("distance_range must satisfy 0 < min <= max")
        if self.sector[0] >= self.sector[1]:
            raise ConfigurationError("sector must be a nonempty interval")
        if self.min_angular_sep < 0:
            raise ConfigurationError("min_angular_sep must be nonnegative")

    @property
    def max_entities(self) -> int:
        """Largest number of entities that fit in the sector at the minimum separation."""
        if self.min_angular_sep == 0:
            return np.iinfo(np.int64).max
        width = self.sector[1] - self.sector[0]
        return int(np.floor(width / self.min_angular_sep + 1e-12)) + 1


@dataclass
class ChannelRealization:
    """UE channels ``H`` (B x U), jammer channel ``h_J`` (B,) and calibrated powers."""

    H: np.ndarray
    h_J: np.ndarray
    Es: float = 1.0
    Ej: float = 0.0
    N0: float = 1.0
    azimuths: np.ndarray | None = field(default=None, repr=False)

    @property
    def B(self) -> int:
        return self.H.shape[0]

    @property
    def U(self) -> int:
        return self.H.shape[1]

    def jammerless(self) -> "ChannelRealization":
        return replace(self, Ej=0.0)

    def snr_db(self) -> float:
        return 10 * np.log10(self.Es * np.linalg.norm(self.H, "fro") ** 2 / (self.B * self.N0))

    def rho_db(self) -> float:
        num = self.U * self.Ej * np.linalg.norm(self.h_J) ** 2
        return 10 * np.log10(num / (self.Es * np.linalg.norm(self.H, "fro") ** 2))

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "U": self.U,
            "H_re": self.H.real.tolist(),
            "H_im": self.H.imag.tolist(),
            "hJ_re": self.h_J.real.tolist(),
            "hJ_im": self.h_J.imag.tolist(),
            "Es": float(self.Es),
            "Ej": float(self.Ej),
            "N0": float(self.N0),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChannelRealization":
        H = np.asarray(doc["H_re"], dtype=float) + 1j * np.asarray(doc["H_im"], dtype=float)
        h_J = np.asarray(doc["hJ_re"], dtype=float) + 1j * np.asarray(doc["hJ_im"], dtype=float)
        H = H.reshape(doc["B"], doc["U"])
        if h_J.shape != (doc["B"],):
            raise ConfigurationError("jammer channel length does not match B")
        return cls(H=H, h_J=h_J, Es=doc["Es"], Ej=doc["Ej"], N0=doc["N0"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        return cls.from_dict(json.loads(text))


def place_entities(spec: PlacementSpec, rng_seed) -> list[tuple[float, float]]:
    """Place ``U`` UEs and one jammer (last entry) uniformly in the sector.

    Entities are drawn one at a time; a draw that violates the minimum angular
    separation against an already placed entity is redrawn. Raises
    :class:`ConfigurationError` when the constraint is infeasible or the draw
    budget is exhausted.
    """
    n = spec.num_users + 1
    if n > spec.max_entities:
        raise ConfigurationError(
            f"cannot place {n} entities {spec.min_angular_sep} deg apart "
            f"in a {spec.sector[1] - spec.sector[0]} deg sector"
        )
    rng = np.random.default_rng(rng_seed)
    lo, hi = spec.sector
    azimuths: list[float] = []
    draws = 0
    while len(azimuths) < n:
        if draws >= MAX_PLACEMENT_DRAWS:
            raise ConfigurationError(
                f"placement of {n} entities did not succeed within {MAX_PLACEMENT_DRAWS} draws"
            )
        draws += 1
        theta = rng.uniform(lo, hi)
        if all(abs(theta - other) >= spec.min_angular_sep for other in azimuths):
            azimuths.append(theta)
    distances = rng.uniform(*spec.distance_range, size=n)
    return [(float(a), float(d)) for a, d in zip(azimuths, distances)]


def steering_vector(geom: ArrayGeometry, azimuth) -> np.ndarray:
    """ULA response ``exp(i 2 pi spacing b sin(theta))``; ``azimuth`` in degrees.

    A 1-D array of azimuths yields a ``B x len(azimuth)`` matrix.
    """
    b = np.arange(geom.num_antennas)
    theta = np.deg2rad(np.asarray(azimuth, dtype=float))
    phase = 2 * np.pi * geom.element_spacing * np.multiply.outer(b, np.sin(theta))
    return np.exp(1j * phase)


def pathloss_amplitude(distance: float) -> float:
    return 1.0 / distance


def los_channel(geom: ArrayGeometry, azimuth: float, distance: float) -> np.ndarray:
    return pathloss_amplitude(distance) * steering_vector(geom, azimuth)


def nlos_channel(
    geom: ArrayGeometry,
    azimuth: float,
    distance: float,
    num_paths: int = 20,
    angular_spread: float = 5.0,
    rng_seed=None,
) -> np.ndarray:
    if num_paths < 1:
        raise ConfigurationError("num_paths must be >= 1")
    rng = np.random.default_rng(rng_seed)
    gains = np.sqrt(0.5 / num_paths) * (
        rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths)
    )
    offsets = rng.laplace(0.0, angular_spread, size=num_paths) if angular_spread > 0 else np.zeros(num_paths)
    paths = steering_vector(geom, azimuth + offsets)
    return pathloss_amplitude(distance) * (paths @ gains)


def apply_power_control(H: np.ndarray, rng=None, offsets_db=None, spread_db: float = 3.0) -> np.ndarray:
    """Rescale columns to ``mean power * 10**(x_u/10)`` with ``x_u ~ U[-3, 3]`` dB.

    ``offsets_db`` fixes the per-UE offsets instead of drawing them.
    """
    H = np.asarray(H)
    powers = np.sum(np.abs(H) ** 2, axis=0)
    if np.any(powers == 0):
        raise ConfigurationError("channel matrix has an all-zero column")
    if offsets_db is None:
        offsets_db = np.random.default_rng(rng).uniform(-spread_db, spread_db, size=H.shape[1])
    offsets_db = np.asarray(offsets_db, dtype=float)
    target = powers.mean() * 10 ** (offsets_db / 10)
    return H * np.sqrt(target / powers)


def calibrate_powers(H: np.ndarray, h_J: np.ndarray, snr_db: float, rho_db: float) -> tuple[float, float, float]:
    """Return ``(Es, N0, Ej)`` meeting the requested SNR and relative jammer power.

    ``rho_db = -inf`` yields a jammerless system (``Ej = 0``).
    """
    B, U = H.shape
    h_fro2 = np.linalg.norm(H, "fro") ** 2
    hj2 = np.linalg.norm(h_J) ** 2
    if h_fro2 == 0 or hj2 == 0:
        raise ConfigurationError("channel norms must be positive")
    Es = 1.0
    N0 = Es * h_fro2 / (B * 10 ** (snr_db / 10))
    Ej = 0.0 if np.isneginf(rho_db) else 10 ** (rho_db / 10) * Es * h_fro2 / (U * hj2)
    return Es, float(N0), float(Ej)


def generate_geometry(
    geom: ArrayGeometry,
    spec: PlacementSpec,
    propagation: Propagation = "los",
    rng=None,
    num_paths: int = 20,
    angular_spread: float = 5.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw placements and channels; returns power-controlled ``H``, ``h_J`` and azimuths."""
    if propagation not in ("los", "nlos"):
        raise ConfigurationError(f"unknown propagation {propagation!r}")
    rng = np.random.default_rng(rng)
    placements = place_entities(spec, rng)
    columns = []
    for azimuth, distance in placements:
        if propagation == "los":
            columns.append(los_channel(geom, azimuth, distance))
        else:
            columns.append(nlos_channel(geom, azimuth, distance, num_paths, angular_spread, rng))
    G = np.stack(columns, axis=1)
    H = apply_power_control(G[:, :-1], rng)
    azimuths = np.array([p[0] for p in placements])
    return H, G[:, -1], azimuths


def realize(H: np.ndarray, h_J: np.ndarray, snr_db: float, rho_db: float, azimuths=None) -> ChannelRealization:
    Es, N0, Ej = calibrate_powers(H, h_J, snr_db, rho_db)
    return ChannelRealization(H=H, h_J=h_J, Es=Es, Ej=Ej, N0=N0, azimuths=azimuths)
