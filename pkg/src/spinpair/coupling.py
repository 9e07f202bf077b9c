"""Radiative pair coupling: field dyadic, coupling tensors, geometry sampling.

The dimensionless separation is xi = k0*r.  Both tensors have the form
a*I + b*(n (x) n) with n the interatomic unit vector, so their eigenbasis
always contains n (one longitudinal and two degenerate transverse
eigenvalues).  The coherent tensor zeta scales as 1/xi^3 in the near field;
the dissipative tensor gamma tends to (gamma0/2)*I at contact and both
vanish at infinite separation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# below this separation the imaginary parts suffer 1/xi^2 cancellation,
# switch to series
_SERIES_XI = 1e-3


@dataclass(frozen=True)
class Conformation:
    """Relative geometry of the pair: spherical coordinates of atom 2
    with atom 1 at the origin (z = light propagation, x = magnetic field)."""

    r: float          # m
    theta: float      # rad, polar angle from z
    phi: float        # rad, azimuth from x
    k0: float         # rad/m

    def __post_init__(self):
        if not (self.r > 0):
            raise ValueError(f"r must be positive, got {self.r}")
        if not (0.0 <= self.theta <= np.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not (0.0 <= self.phi < 2.0 * np.pi):
            raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")
        if self.k0 <= 0:
            raise ValueError("k0 must be positive")

    @property
    def xi(self) -> float:
        return self.k0 * self.r

    @property
    def n_hat(self) -> np.ndarray:
        st, ct = np.sin(self.theta), np.cos(self.theta)
        sp, cp = np.sin(self.phi), np.cos(self.phi)
        return np.array([st * cp, st * sp, ct])


@dataclass(frozen=True)
class CouplingTensors:
    """Coherent (zeta) and dissipative (gamma) 3x3 tensors, lab frame, rad/s."""

    zeta: np.ndarray
    gamma: np.ndarray


def greens_dyadic(c: Conformation) -> np.ndarray:
    """Field dyadic of an oscillating point dipole at separation xi."""
    xi = c.xi
    if xi <= 0:
        raise ValueError("xi must be positive")
    n = c.n_hat
    nn = np.outer(n, n)
    iso = 1.0 + 1j / xi - 1.0 / xi**2
    lon = -1.0 - 3j / xi + 3.0 / xi**2
    return (iso * np.eye(3) + lon * nn) * np.exp(1j * xi) / xi


def _zeta_coeffs(xi: float) -> tuple[float, float]:
    # returns (isotropic, n(x)n) factors, in units of 3*gamma0/4
    if xi < _SERIES_XI:
        iso = 1.0 / xi**3 - 0.5 / xi + 0.375 * xi
        lon = -3.0 / xi**3 - 0.5 / xi - 0.125 * xi
        return iso, lon
    cx, sx = np.cos(xi), np.sin(xi)
    iso = cx / xi**3 + sx / xi**2 - cx / xi
    lon = cx / xi - 3.0 * cx / xi**3 - 3.0 * sx / xi**2
    return iso, lon


def _gamma_coeffs(xi: float) -> tuple[float, float]:
    # same decomposition for the imaginary part; the direct expressions
    # lose all precision below xi ~ 1e-3 (1/xi^2 cancellation)
    if xi < _SERIES_XI:
        iso = 2.0 / 3.0 - 2.0 * xi**2 / 15.0 + xi**4 / 140.0
        lon = xi**2 / 15.0 - xi**4 / 210.0
        return iso, lon
    cx, sx = np.cos(xi), np.sin(xi)
    iso = sx / xi + cx / xi**2 - sx / xi**3
    lon = -sx / xi - 3.0 * cx / xi**2 + 3.0 * sx / xi**3
    return iso, lon


def zeta_tensor(c: Conformation, gamma0: float) -> np.ndarray:
    """Coherent coupling tensor, equal to -(3*gamma0/4)*Re(G)."""
    xi = c.xi
    if xi <= 0:
        raise ValueError("xi must be positive")
    iso, lon = _zeta_coeffs(xi)
    n = c.n_hat
    pref = 0.75 * gamma0
    return pref * (iso * np.eye(3) + lon * np.outer(n, n))


def gamma_tensor(c: Conformation, gamma0: float) -> np.ndarray:
    """Dissipative coupling tensor, equal to (3*gamma0/4)*Im(G)."""
    xi = c.xi
    if xi <= 0:
        raise ValueError("xi must be positive")
    iso, lon = _gamma_coeffs(xi)
    n = c.n_hat
    pref = 0.75 * gamma0
    return pref * (iso * np.eye(3) + lon * np.outer(n, n))


def coupling_tensors(c: Conformation, gamma0: float) -> CouplingTensors:
    return CouplingTensors(zeta=zeta_tensor(c, gamma0),
                           gamma=gamma_tensor(c, gamma0))


# -- thermal-vapor geometry statistics ------------------------------------

R_MIN = 1e-9  # m; floor on sampled separations, far below any probed scale


def nn_distance_cdf(r, density_cm3: float):
    """Nearest-neighbor CDF 1 - exp(-(4/3) pi N r^3) (r in meters)."""
    n_m3 = density_cm3 * 1e6
    return 1.0 - np.exp(-(4.0 / 3.0) * np.pi * n_m3 * np.asarray(r) ** 3)


def sample_nn_distance(density_cm3: float, rng: np.random.Generator,
                       size=None):
    """Draw nearest-neighbor separations by inverse transform (meters)."""
    n_m3 = density_cm3 * 1e6
    u = rng.random(size)
    r = (3.0 * np.log1p(-u) / (-4.0 * np.pi * n_m3)) ** (1.0 / 3.0)
    return np.maximum(r, R_MIN)


def sample_conformation(density_cm3: float, rng: np.random.Generator,
                        k0: float, isotropic: bool = False) -> Conformation:
    """Draw a random pair geometry at the given density.

    Angles are uniform in theta and phi by default; ``isotropic=True``
    switches to solid-angle-uniform (cos(theta) uniform) sampling instead.
    """
    if density_cm3 <= 0:
        raise ValueError("density must be positive")
    r = float(sample_nn_distance(density_cm3, rng))
    if isotropic:
        theta = float(np.arccos(1.0 - 2.0 * rng.random()))
    else:
        theta = float(np.pi * rng.random())
    phi = float(2.0 * np.pi * rng.random())
    if phi >= 2.0 * np.pi:
        phi = 0.0
    return Conformation(r=r, theta=theta, phi=phi, k0=k0)


def mean_nn_distance(density_cm3: float) -> float:
    """Typical nearest-neighbor distance 0.55 * N^(-1/3) (meters)."""
    if density_cm3 <= 0:
        raise ValueError("density must be positive")
    n_m3 = density_cm3 * 1e6
    return 0.55 * n_m3 ** (-1.0 / 3.0)
