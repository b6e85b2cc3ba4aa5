"""Directions, local frames and the bilinear forms behind the factorization conditions.

A site direction ``n`` is completed to a right-handed triad ``(nx, ny, n)`` using the
z-then-y Euler convention ``R = exp(-i phi Sz) exp(-i theta Sy)``.  For a bond with
coupling matrix ``J`` the product state is not connected to two-spin excitations iff

    nx_i . J nx_j = ny_i . J ny_j   and   nx_i . J ny_j = -ny_i . J nx_j,

which for diagonal ``J = diag(Jx, Jy, Jz)`` reads ``J . U = J . V = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EPS_DEP",
    "Angles",
    "Triad",
    "UVPair",
    "triad_from_angles",
    "triad_from_direction",
    "angles_from_direction",
    "direction",
    "hadamard",
    "uv_vectors",
    "condition_residual",
    "pair_amplitude",
    "angular_distance",
    "random_directions",
    "AXES",
]

TWO_PI = 2.0 * np.pi
EPS_DEP = 1e-10
AXES = "xyz"


@dataclass(frozen=True)
class Angles:
    """Polar/azimuthal angles of a site direction, folded into theta in [0, pi], phi in [0, 2pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta) % TWO_PI
        phi = float(self.phi)
        if theta > np.pi:
            theta = TWO_PI - theta
            phi += np.pi
        phi %= TWO_PI
        if phi >= TWO_PI:
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_direction(cls, n) -> "Angles":
        return angles_from_direction(n)

    def direction(self) -> np.ndarray:
        return direction(self.theta, self.phi)


@dataclass(frozen=True)
class Triad:
    """Right-handed orthonormal frame ``(nx, ny, n)`` attached to a site."""

    n: np.ndarray
    nx: np.ndarray
    ny: np.ndarray

    def matrix(self) -> np.ndarray:
        """Columns ``(nx, ny, n)``; the rotation taking the lab frame to the site frame."""
        return np.column_stack([self.nx, self.ny, self.n])

    def rotated(self, angle: float) -> "Triad":
        """Same direction, companions rotated by ``angle`` about ``n``."""
        c, s = np.cos(angle), np.sin(angle)
        return Triad(self.n, c * self.nx + s * self.ny, -s * self.nx + c * self.ny)

    @property
    def complex_frame(self) -> np.ndarray:
        return self.nx + 1j * self.ny


@dataclass(frozen=True)
class UVPair:
    u: np.ndarray
    v: np.ndarray
    dependent: bool


def direction(theta: float, phi: float) -> np.ndarray:
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def triad_from_angles(a: Angles) -> Triad:
    if not isinstance(a, Angles):
        a = Angles(*a)
    ct, st = np.cos(a.theta), np.sin(a.theta)
    cp, sp = np.cos(a.phi), np.sin(a.phi)
    n = np.array([st * cp, st * sp, ct])
    nx = np.array([ct * cp, ct * sp, -st])
    ny = np.array([-sp, cp, 0.0])
    return Triad(n, nx, ny)


def angles_from_direction(n) -> Angles:
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValueError("zero vector has no direction")
    n = n / norm
    return Angles(float(np.arctan2(np.hypot(n[0], n[1]), n[2])), float(np.arctan2(n[1], n[0])))


def triad_from_direction(n) -> Triad:
    """Canonical triad for a bare direction: theta = atan2(|n_perp|, n_z), phi = atan2(n_y, n_x)."""
    return triad_from_angles(angles_from_direction(n))


def hadamard(n, m) -> np.ndarray:
    return np.asarray(n, dtype=float) * np.asarray(m, dtype=float)


def uv_vectors(ti: Triad, tj: Triad) -> UVPair:
    """U = nx_i*nx_j - ny_i*ny_j and V = nx_i*ny_j + ny_i*nx_j (componentwise products).

    ``dependent`` flags the plane case: V negligible against U, or U and V parallel
    (the latter happens when both directions sit on the same pole with different
    azimuthal gauges).
    """
    u = hadamard(ti.nx, tj.nx) - hadamard(ti.ny, tj.ny)
    v = hadamard(ti.nx, tj.ny) + hadamard(ti.ny, tj.nx)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    dependent = bool(
        nv < EPS_DEP * max(1.0, nu)
        or np.linalg.norm(np.cross(u, v)) < EPS_DEP * max(1.0, nu) * max(1.0, nv)
    )
    return UVPair(u, v, dependent)


def pair_amplitude(J, ti: Triad, tj: Triad) -> complex:
    """``e_i^T J e_j`` with ``e = nx + i ny``; vanishes iff the pair conditions hold.

    Its modulus is invariant under independent gauge rotations of either frame.
    """
    J = np.asarray(J, dtype=float)
    return complex(ti.complex_frame @ J @ tj.complex_frame)


def condition_residual(J, ti: Triad, tj: Triad) -> float:
    """Max violation of the two field-independent pair conditions for coupling matrix ``J``."""
    J = np.asarray(J, dtype=float)
    if J.ndim == 1:
        J = np.diag(J)
    r1 = ti.nx @ J @ tj.nx - ti.ny @ J @ tj.ny
    r2 = ti.nx @ J @ tj.ny + ti.ny @ J @ tj.nx
    return float(max(abs(r1), abs(r2)))


def angular_distance(n, m) -> float:
    """Great-circle angle between two directions, in radians."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    n = n / np.linalg.norm(n)
    m = m / np.linalg.norm(m)
    return float(np.arctan2(np.linalg.norm(np.cross(n, m)), n @ m))


def random_directions(count: int, rng: np.random.Generator) -> list[Angles]:
    """Directions drawn uniformly on the unit sphere."""
    v = rng.normal(size=(count, 3))
    return [angles_from_direction(row) for row in v]
