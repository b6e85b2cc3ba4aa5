"""Couplings and fields for prescribed alignment directions.

Given directions ``n_i``, ``n_j`` every XYZ exchange vector orthogonal to both ``U`` and
``V`` makes the product state free of two-spin excitations.  When ``U`` and ``V`` are
independent the compatible couplings form a line along ``U x V``; otherwise they form
the plane orthogonal to ``U``.  The perpendicular field

    h_perp^{ij} = -S_j [J n_j - n_i (n_i . J n_j)]

removes one-spin excitations, and any field along ``n_i`` only shifts the energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .exceptions import DegenerateComponent, NoUniformField, ValidationError
from .geometry import (
    Angles,
    Triad,
    condition_residual,
    triad_from_angles,
    triad_from_direction,
    uv_vectors,
)
from .quantum import Bond, SiteSpec, SystemSpec, theta_energy

__all__ = [
    "FamilyKind",
    "CaseTag",
    "CouplingFamily",
    "FieldAssignment",
    "DesignReport",
    "coupling_family",
    "coupling_line_explicit",
    "perpendicular_field",
    "site_perpendicular_fields",
    "factorized_energy",
    "energy_parts",
    "uniform_pair_field",
    "pair_parallel_fields",
    "kurmann_form",
    "design_system",
    "orient_coupling",
]

_DIR_TOL = 1e-12
_SEEDS = np.eye(3)


class FamilyKind(Enum):
    LINE = "line"
    PLANE = "plane"


class CaseTag(Enum):
    GENERIC = "generic"
    COPLANAR = "coplanar"
    REFLECTION = "reflection"
    ANTIPARALLEL = "antiparallel"


def orient_coupling(J: np.ndarray) -> np.ndarray:
    """Fix the free overall sign: first nonzero of (z, y, x) made nonnegative."""
    J = np.asarray(J, dtype=float)
    for mu in (2, 1, 0):
        if abs(J[mu]) > 1e-14 * max(1.0, np.abs(J).max()):
            return J if J[mu] > 0 else -J
    return J


@dataclass(frozen=True)
class CouplingFamily:
    """Set of XYZ exchange vectors compatible with a pair of directions.

    ``generator`` is a unit vector (line) or a 2x3 orthonormal basis (plane).
    ``axis`` is the principal axis sigma singled out by the plane case, if any.
    """

    kind: FamilyKind
    generator: np.ndarray
    case_tag: CaseTag
    axis: int | None
    ni: np.ndarray
    nj: np.ndarray

    def member(self, c1: float, c2: float = 0.0) -> np.ndarray:
        if self.kind is FamilyKind.LINE:
            return c1 * self.generator
        return c1 * self.generator[0] + c2 * self.generator[1]

    def default_member(self, norm: float = 1.0) -> np.ndarray:
        """Deterministic member of Euclidean norm ``norm``, sign fixed by :func:`orient_coupling`."""
        g = self.generator if self.kind is FamilyKind.LINE else self.generator[0]
        return norm * orient_coupling(g)

    def explicit_member(self, j_mu: float, j_nu: float) -> np.ndarray:
        """Plane member from its two free couplings, using the closed forms per case.

        The free axes are the two principal axes other than ``axis``, in cyclic order.
        """
        if self.kind is FamilyKind.LINE or self.axis is None:
            raise ValidationError("explicit two-coupling parametrization only exists for the plane case")
        s = self.axis
        mu, nu = (s + 1) % 3, (s + 2) % 3
        ni, nj = self.ni, self.nj
        J = np.zeros(3)
        J[mu], J[nu] = j_mu, j_nu
        if self.case_tag is CaseTag.COPLANAR:
            J[s] = j_mu * ni[nu] * nj[nu] + j_nu * ni[mu] * nj[mu]
        else:
            J[s] = (j_mu * (1 - ni[mu] ** 2) + j_nu * (1 - ni[nu] ** 2)) / (1 - ni[s] ** 2)
            if self.case_tag is CaseTag.ANTIPARALLEL:
                J[s] = -J[s]
        return J

    def contains(self, J, tol: float = 1e-12) -> bool:
        return condition_residual(np.diag(J), triad_from_direction(self.ni), triad_from_direction(self.nj)) < tol


@dataclass
class FieldAssignment:
    h_perp: np.ndarray
    h_par: np.ndarray
    total: np.ndarray


@dataclass
class DesignReport:
    system: SystemSpec
    angles: list[Angles]
    couplings: list[np.ndarray]
    families: list[CouplingFamily]
    fields: FieldAssignment
    energy: float
    residual: float
    triads: list[Triad] = field(repr=False, default_factory=list)

    @property
    def directions(self) -> np.ndarray:
        return np.array([t.n for t in self.triads])


def _as_triad(t) -> Triad:
    if isinstance(t, Triad):
        return t
    if isinstance(t, Angles):
        return triad_from_angles(t)
    return triad_from_direction(t)


def _as_matrix(J) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    return np.diag(J) if J.ndim == 1 else J


def _classify(ni: np.ndarray, nj: np.ndarray) -> tuple[CaseTag, int | None]:
    if np.linalg.norm(ni + nj) < _DIR_TOL:
        return CaseTag.ANTIPARALLEL, int(np.argmax(1.0 - ni ** 2))
    for s in range(3):
        if abs(ni[s]) < _DIR_TOL and abs(nj[s]) < _DIR_TOL:
            return CaseTag.COPLANAR, s
    if np.all(np.abs(np.abs(ni) - np.abs(nj)) < _DIR_TOL):
        flipped = [s for s in range(3) if ni[s] * nj[s] < 0]
        if len(flipped) == 1:
            return CaseTag.REFLECTION, flipped[0]
    return CaseTag.GENERIC, None


def coupling_family(ti, tj) -> CouplingFamily:
    ti, tj = _as_triad(ti), _as_triad(tj)
    uv = uv_vectors(ti, tj)
    if not uv.dependent:
        w = np.cross(uv.u, uv.v)
        w = orient_coupling(w / np.linalg.norm(w))
        return CouplingFamily(FamilyKind.LINE, w, CaseTag.GENERIC, None, ti.n, tj.n)

    normal = uv.u if np.linalg.norm(uv.u) >= np.linalg.norm(uv.v) else uv.v
    normal = normal / np.linalg.norm(normal)
    for seed in _SEEDS:
        b1 = seed - (seed @ normal) * normal
        if np.linalg.norm(b1) > 1e-8:
            break
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(normal, b1)
    tag, axis = _classify(ti.n, tj.n)
    return CouplingFamily(FamilyKind.PLANE, np.vstack([b1, b2]), tag, axis, ti.n, tj.n)


def coupling_line_explicit(ti, tj, j_scale: float = 1.0) -> np.ndarray:
    """Line member written directly in terms of the directions.

    ``J_mu = -j (n_jmu D_i / n_imu + n_imu D_j / n_jmu)`` with ``D = n_x n_y n_z``.
    Symmetric under exchanging the two sites.
    """
    ni, nj = _as_triad(ti).n, _as_triad(tj).n
    if np.any(np.abs(ni) < _DIR_TOL) or np.any(np.abs(nj) < _DIR_TOL):
        raise DegenerateComponent("direction has a zero Cartesian component; use coupling_family")
    di, dj = np.prod(ni), np.prod(nj)
    return -j_scale * (nj * di / ni + ni * dj / nj)


def perpendicular_field(J, ti, tj, spin_j: float) -> np.ndarray:
    """Field at site i cancelling the one-spin excitations produced by the bond to j."""
    J = _as_matrix(J)
    ni, nj = _as_triad(ti).n, _as_triad(tj).n
    Jn = J @ nj
    return -spin_j * (Jn - ni * (ni @ Jn))


def site_perpendicular_fields(system: SystemSpec, directions) -> np.ndarray:
    """Total perpendicular factorizing field at every site, summed over its bonds."""
    n = np.array([_as_triad(d).n for d in directions])
    spins = system.spins
    out = np.zeros((system.n_sites, 3))
    for b in system.bonds:
        out[b.i] += perpendicular_field(b.matrix, n[b.i], n[b.j], spins[b.j])
        out[b.j] += perpendicular_field(b.matrix.T, n[b.j], n[b.i], spins[b.i])
    return out


def energy_parts(system: SystemSpec, directions) -> tuple[float, float]:
    """(parallel-field part, coupling part) of the product-state energy."""
    n = np.array([_as_triad(d).n for d in directions])
    spins = system.spins
    h_par = np.einsum("ij,ij->i", system.fields, n)
    field_part = -float(np.sum(spins * h_par))
    return field_part, theta_energy(system, n) - field_part


def factorized_energy(system: SystemSpec, directions) -> float:
    return float(sum(energy_parts(system, directions)))


def _check_pair_conditions(J, ti, tj):
    J = _as_matrix(J)
    scale = max(1.0, np.abs(J).max())
    r = condition_residual(J, ti, tj)
    if r > 1e-10 * scale:
        raise ValidationError(f"coupling does not satisfy the pair conditions (residual {r:.3e})")


def pair_parallel_fields(J, ti, tj, S: float) -> tuple[float, float, np.ndarray]:
    """Parallel strengths ``(h_par^{ij}, h_par^{ji})`` making the pair field uniform, and that field.

    Solves ``h_perp^{ij} + a n_i = h_perp^{ji} + b n_j`` for ``(a, b)`` by least squares;
    valid for non-collinear directions.
    """
    J = _as_matrix(J)
    ti, tj = _as_triad(ti), _as_triad(tj)
    hij = perpendicular_field(J, ti, tj, S)
    hji = perpendicular_field(J.T, tj, ti, S)
    A = np.column_stack([ti.n, -tj.n])
    (a, b), *_ = np.linalg.lstsq(A, hji - hij, rcond=None)
    miss = np.linalg.norm(A @ np.array([a, b]) - (hji - hij))
    if miss > 1e-9 * max(1.0, np.abs(J).max() * S):
        raise NoUniformField(f"pair field equations inconsistent (miss {miss:.3e})")
    return float(a), float(b), hij + a * ti.n


def uniform_pair_field(J, ti, tj, S: float, h_par: float = 0.0) -> np.ndarray:
    """Uniform field factorizing a single XYZ pair of equal spins ``S``.

    For ``n_i = n_j`` the parallel strength is free and ``h_par`` is used.  For antiparallel
    directions a uniform field exists only if the perpendicular field vanishes, in which
    case ``h_par`` again sets the free strength.
    """
    Jv = np.asarray(J, dtype=float)
    if Jv.ndim == 2:
        if np.abs(Jv - np.diag(np.diag(Jv))).max() > 0:
            raise ValidationError("uniform pair field requires a diagonal (XYZ) coupling")
        Jv = np.diag(Jv)
    ti, tj = _as_triad(ti), _as_triad(tj)
    _check_pair_conditions(Jv, ti, tj)
    ni, nj = ti.n, tj.n
    hij = perpendicular_field(Jv, ti, tj, S)

    if np.linalg.norm(ni - nj) < _DIR_TOL:
        return hij + h_par * ni
    if np.linalg.norm(ni + nj) < _DIR_TOL:
        if np.linalg.norm(hij) > 1e-12 * max(1.0, np.abs(Jv).max() * S):
            raise NoUniformField("antiparallel directions with nonzero perpendicular field")
        return hij + h_par * ni

    tag, axis = _classify(ni, nj)
    if tag is CaseTag.REFLECTION:
        mu, nu = (axis + 1) % 3, (axis + 2) % 3
        hs = np.zeros(3)
        hs[mu] = -S * (Jv[mu] + Jv[axis]) * ni[mu]
        hs[nu] = -S * (Jv[nu] + Jv[axis]) * ni[nu]
        return hs
    if np.all(np.abs(ni) > _DIR_TOL) and np.all(np.abs(nj) > _DIR_TOL) and not uv_vectors(ti, tj).dependent:
        g = coupling_line_explicit(ti, tj, 1.0)
        j = float(Jv @ g / (g @ g))
        alpha = np.outer(ni, nj)
        alpha = alpha + alpha.T
        # sign follows the explicit line form above (its leading minus included in j)
        return np.array([j * S * alpha[m, (m + 1) % 3] * alpha[m, (m + 2) % 3] for m in range(3)])
    return pair_parallel_fields(Jv, ti, tj, S)[2]


def kurmann_form(h, J) -> float:
    """``sum_mu h_mu^2 / ((J_mu + J_nu)(J_mu + J_sigma))``; equals ``S^2`` on the uniform-field ellipsoid."""
    h = np.asarray(h, dtype=float)
    J = np.asarray(J, dtype=float)
    return float(sum(h[m] ** 2 / ((J[m] + J[(m + 1) % 3]) * (J[m] + J[(m + 2) % 3])) for m in range(3)))


def design_system(
    directions: Sequence[Angles],
    bonds: Sequence[tuple[int, int]],
    spins=0.5,
    j_norm: float = 1.0,
    h_par=0.0,
    *,
    overrides: dict | None = None,
) -> DesignReport:
    """Synthesize couplings and factorizing fields for arbitrary directions on any bond graph.

    Each bond gets the compatible coupling of norm ``j_norm``.  ``overrides`` maps a bond
    ``(i, j)`` to an explicit exchange vector (checked against the pair conditions), which
    is how the free plane-case couplings can be chosen.  ``h_par`` is a uniform scalar or
    a per-site sequence.
    """
    angles = [a if isinstance(a, Angles) else Angles(*a) for a in directions]
    n_sites = len(angles)
    spin_arr = np.broadcast_to(np.asarray(spins, dtype=float), (n_sites,))
    sites = [SiteSpec(s) for s in spin_arr]
    triads = [triad_from_angles(a) for a in angles]
    overrides = dict(overrides or {})

    couplings, families, bond_objs = [], [], []
    for i, j in bonds:
        fam = coupling_family(triads[i], triads[j])
        if (i, j) in overrides:
            J = np.asarray(overrides.pop((i, j)), dtype=float)
            _check_pair_conditions(J, triads[i], triads[j])
        else:
            J = fam.default_member(j_norm)
        couplings.append(J)
        families.append(fam)
        bond_objs.append(Bond(i, j, np.diag(J)))
    if overrides:
        raise ValidationError(f"overrides for unknown bonds: {sorted(overrides)}")

    base = SystemSpec(sites, bond_objs)
    h_perp = site_perpendicular_fields(base, triads)
    h_par_arr = np.broadcast_to(np.asarray(h_par, dtype=float), (n_sites,)).copy()
    n = np.array([t.n for t in triads])
    total = h_perp + h_par_arr[:, None] * n
    system = SystemSpec(sites, bond_objs, total)
    residual = max((condition_residual(b.matrix, triads[b.i], triads[b.j]) for b in bond_objs), default=0.0)
    return DesignReport(
        system=system,
        angles=angles,
        couplings=couplings,
        families=families,
        fields=FieldAssignment(h_perp, h_par_arr, total),
        energy=factorized_energy(system, triads),
        residual=float(residual),
        triads=triads,
    )
