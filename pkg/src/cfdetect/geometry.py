"""Deployment geometry on a wrap-around square.

Positions are plain ``(2,)`` float arrays in meters, centred on the origin so
the square spans ``[-side/2, side/2]`` on each axis. Uniform linear arrays
are placed around each AP centre with half-wavelength spacing along the AP's
orientation vector.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GeometryError(ValueError):
    pass


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise GeometryError("non-finite coordinate")


def wrap_displacement(p, q, side):
    """Minimal-image displacement ``q - p`` on the torus of the given side."""
    if side <= 0:
        raise GeometryError("side must be positive")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_finite(p, q)
    delta = q - p
    return delta - side * np.round(delta / side)


def wrap_distance(p, q, side):
    """Torus distance between two points (vectorised over leading axes)."""
    delta = np.abs(wrap_displacement(p, q, side))
    delta = np.minimum(delta, side - delta)
    return np.sqrt(np.sum(delta**2, axis=-1))


def rayleigh_distance(K, lambda_c):
    """``2 D^2 / lambda_c`` for a half-wavelength ULA of aperture ``(K-1) lambda_c / 2``."""
    if K < 2:
        raise GeometryError("Rayleigh distance needs at least two antennas")
    if lambda_c <= 0:
        raise GeometryError("wavelength must be positive")
    aperture = (K - 1) * lambda_c / 2
    return 2 * aperture**2 / lambda_c


@dataclass(frozen=True)
class Deployment:
    side: float
    lambda_c: float
    K: int
    ap_centers: np.ndarray      # (M, 2)
    ap_orientations: np.ndarray  # (M, 2), unit vectors
    devices: np.ndarray         # (N, 2)
    scatterers: np.ndarray      # (M, L_m, 2)

    def __post_init__(self):
        for name in ("ap_centers", "ap_orientations", "devices", "scatterers"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.scatterers.ndim != 3 or self.scatterers.shape[0] != self.M:
            raise GeometryError("scatterers must have shape (M, L_m, 2)")

    @property
    def M(self):
        return self.ap_centers.shape[0]

    @property
    def N(self):
        return self.devices.shape[0]

    @property
    def L_m(self):
        return self.scatterers.shape[1]

    def antenna_offsets(self, m):
        """Antenna positions of AP ``m`` relative to its centre, shape (K, 2)."""
        k = np.arange(1, self.K + 1)
        spacing = (k - (self.K + 1) / 2) * (self.lambda_c / 2)
        return spacing[:, None] * self.ap_orientations[m][None, :]

    def to_dict(self):
        return {
            "side": self.side,
            "lambda_c": self.lambda_c,
            "K": self.K,
            "ap_centers": self.ap_centers.tolist(),
            "ap_orientations": self.ap_orientations.tolist(),
            "devices": self.devices.tolist(),
            "scatterers": self.scatterers.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        M = len(d["ap_centers"])
        scatterers = np.asarray(d["scatterers"], dtype=float).reshape(M, -1, 2)
        return cls(
            side=float(d["side"]),
            lambda_c=float(d["lambda_c"]),
            K=int(d["K"]),
            ap_centers=np.asarray(d["ap_centers"], dtype=float).reshape(M, 2),
            ap_orientations=np.asarray(d["ap_orientations"], dtype=float).reshape(M, 2),
            devices=np.asarray(d["devices"], dtype=float).reshape(-1, 2),
            scatterers=scatterers,
        )

    def save(self, path):
        # repr-roundtrip floats keep the file exactly replayable
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def antenna_distances(m, point, deployment):
    """Distances from ``point`` to the K antennas of AP ``m``.

    The point is first replaced by its minimal wrap-around image relative to
    the AP centre, so the array geometry itself stays Euclidean.
    """
    dep = deployment
    if not 0 <= m < dep.M:
        raise IndexError(f"AP index {m} out of range")
    rel = wrap_displacement(dep.ap_centers[m], point, dep.side)
    diff = rel[None, :] - dep.antenna_offsets(m)
    return np.sqrt(np.sum(diff**2, axis=1))


def center_distances(deployment):
    """Wrap-around AP-centre to device distances, shape (M, N)."""
    dep = deployment
    return wrap_distance(dep.ap_centers[:, None, :], dep.devices[None, :, :], dep.side)


def classify_near_field(deployment):
    """Boolean (M, N) mask, True where the device is inside the AP's Rayleigh distance."""
    dep = deployment
    if dep.K < 2:
        return np.zeros((dep.M, dep.N), dtype=bool)
    return center_distances(dep) < rayleigh_distance(dep.K, dep.lambda_c)


@dataclass
class DeploymentConfig:
    M: int = 3
    N: int = 100
    K: int = 24
    L_m: int = 8
    side: float = 200.0
    lambda_c: float = 0.2
    # None -> uniform random orientation per AP
    orientation: tuple | None = None
    # None -> scatterers uniform over the whole square
    scatter_radius: float | None = None

    def validate(self):
        for name in ("M", "N", "K", "L_m"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1")
        if self.side <= 0 or self.lambda_c <= 0:
            raise GeometryError("side and lambda_c must be positive")
        if self.scatter_radius is not None and self.scatter_radius <= 0:
            raise GeometryError("scatter_radius must be positive")


def _uniform_square(rng, size, side):
    return rng.uniform(-side / 2, side / 2, size=size + (2,))


def sample_deployment(config, rng):
    """Draw AP, device and scatterer positions i.i.d. uniform on the square."""
    config.validate()
    side = config.side
    ap_centers = _uniform_square(rng, (config.M,), side)
    devices = _uniform_square(rng, (config.N,), side)
    if config.orientation is None:
        phi = rng.uniform(0, 2 * np.pi, size=config.M)
        orient = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    else:
        o = np.asarray(config.orientation, dtype=float)
        o = o / np.linalg.norm(o)
        orient = np.tile(o, (config.M, 1))
    if config.scatter_radius is None:
        scatterers = _uniform_square(rng, (config.M, config.L_m), side)
    else:
        # uniform on a disc around each AP, folded back into the square
        r = config.scatter_radius * np.sqrt(rng.uniform(size=(config.M, config.L_m)))
        phi = rng.uniform(0, 2 * np.pi, size=(config.M, config.L_m))
        offs = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
        scatterers = ap_centers[:, None, :] + offs
        scatterers = (scatterers + side / 2) % side - side / 2
    return Deployment(
        side=side,
        lambda_c=config.lambda_c,
        K=config.K,
        ap_centers=ap_centers,
        ap_orientations=orient,
        devices=devices,
        scatterers=scatterers,
    )
