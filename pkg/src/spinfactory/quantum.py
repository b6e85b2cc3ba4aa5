"""Exact Hilbert-space machinery: spin matrices, Hamiltonians, product states, spectra.

Basis convention: tensor product of local ``Sz`` eigenbases ordered ``m = S, S-1, ..., -S``,
site 0 slowest-varying.  The Hamiltonian is

    H = -sum_i h^i . S_i - sum_{bonds (i,j)} S_i . J^{ij} S_j

i.e. the symmetric double sum ``1/2 sum_{i != j}`` with each unordered bond stored once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .exceptions import DimensionCap, InvalidSpin, NotFactorized, ValidationError
from .geometry import Angles, Triad, condition_residual, triad_from_angles

__all__ = [
    "DEFAULT_DIM_CAP",
    "EPS_DEG",
    "SiteSpec",
    "Bond",
    "SystemSpec",
    "SpectrumReport",
    "CriticalField",
    "spin_operators",
    "ladder_operators",
    "local_rotation",
    "site_operator",
    "build_hamiltonian",
    "product_state",
    "expectation_spin",
    "verify_eigenstate",
    "spectrum",
    "theta_energy",
    "with_parallel_field",
    "critical_parallel_field",
]

DEFAULT_DIM_CAP = 4096
EPS_DEG = 1e-8


@dataclass(frozen=True)
class SiteSpec:
    spin: float

    def __post_init__(self):
        _check_spin(self.spin)
        object.__setattr__(self, "spin", float(self.spin))

    @property
    def dim(self) -> int:
        return int(round(2 * self.spin)) + 1


@dataclass(frozen=True)
class Bond:
    """Coupling ``S_i . J S_j`` between two distinct sites, stored once per unordered pair."""

    i: int
    j: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.i == self.j:
            raise ValidationError(f"bond connects site {self.i} to itself")
        m = np.asarray(self.matrix, dtype=float)
        if m.shape == (3,):
            m = np.diag(m)
        if m.shape != (3, 3):
            raise ValidationError(f"bond ({self.i},{self.j}) coupling must be 3x3 or a diagonal triple")
        if not np.all(np.isfinite(m)):
            raise ValidationError(f"bond ({self.i},{self.j}) coupling is not finite")
        object.__setattr__(self, "i", int(self.i))
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "matrix", m)

    def oriented(self, i: int, j: int) -> np.ndarray:
        """Coupling matrix seen from ``(i, j)``: ``J^{ji} = (J^{ij})^T``."""
        if (i, j) == (self.i, self.j):
            return self.matrix
        if (i, j) == (self.j, self.i):
            return self.matrix.T
        raise ValidationError(f"bond ({self.i},{self.j}) does not join sites {i} and {j}")


@dataclass
class SystemSpec:
    sites: list[SiteSpec]
    bonds: list[Bond] = field(default_factory=list)
    fields: np.ndarray | None = None

    def __post_init__(self):
        self.sites = [s if isinstance(s, SiteSpec) else SiteSpec(s) for s in self.sites]
        self.bonds = [b if isinstance(b, Bond) else Bond(*b) for b in self.bonds]
        n = len(self.sites)
        if n == 0:
            raise ValidationError("system has no sites")
        if self.fields is None:
            self.fields = np.zeros((n, 3))
        self.fields = np.array(self.fields, dtype=float).reshape(-1, 3)
        if self.fields.shape != (n, 3):
            raise ValidationError(f"expected {n} field vectors, got {self.fields.shape[0]}")
        if not np.all(np.isfinite(self.fields)):
            raise ValidationError("field vectors must be finite")
        seen = set()
        for b in self.bonds:
            if not (0 <= b.i < n and 0 <= b.j < n):
                raise ValidationError(f"bond ({b.i},{b.j}) references a site outside 0..{n - 1}")
            key = frozenset((b.i, b.j))
            if key in seen:
                raise ValidationError(f"duplicate bond between sites {b.i} and {b.j}")
            seen.add(key)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def spins(self) -> np.ndarray:
        return np.array([s.spin for s in self.sites])

    @property
    def dims(self) -> list[int]:
        return [s.dim for s in self.sites]

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    def neighbors(self, i: int) -> list[tuple[int, np.ndarray]]:
        """``(j, J^{ij})`` for every bond touching site ``i``."""
        out = []
        for b in self.bonds:
            if b.i == i:
                out.append((b.j, b.matrix))
            elif b.j == i:
                out.append((b.i, b.matrix.T))
        return out

    def coordination(self) -> int:
        if not self.bonds:
            return 0
        return max(len(self.neighbors(i)) for i in range(self.n_sites))

    def replace(self, *, bonds=None, fields=None) -> "SystemSpec":
        return SystemSpec(
            list(self.sites),
            list(self.bonds) if bonds is None else bonds,
            self.fields.copy() if fields is None else fields,
        )


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    ground_degeneracy: int
    gap: float
    overlap: float | None = None
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])


@dataclass
class CriticalField:
    h_c: float
    g_value: float
    coupling_scale: float
    coordination: int
    ratio: float
    iterations: int


def _check_spin(spin) -> None:
    two_s = 2.0 * float(spin)
    if not np.isfinite(two_s) or two_s < 1 or abs(two_s - round(two_s)) > 1e-12:
        raise InvalidSpin(f"spin must be a positive multiple of 1/2, got {spin!r}")


@lru_cache(maxsize=None)
def _spin_matrices(two_s: int):
    s = two_s / 2.0
    m = s - np.arange(two_s + 1)
    # <m+1|S+|m> sits one row above the diagonal because m decreases down the basis
    sp_ = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    sm = sp_.conj().T
    sx = 0.5 * (sp_ + sm)
    sy = -0.5j * (sp_ - sm)
    sz = np.diag(m).astype(complex)
    for mat in (sx, sy, sz, sp_, sm):
        mat.setflags(write=False)
    return sx, sy, sz, sp_, sm


def spin_operators(S: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-S matrices ``(Sx, Sy, Sz)`` in the basis ``m = S, ..., -S``."""
    _check_spin(S)
    sx, sy, sz, _, _ = _spin_matrices(int(round(2 * S)))
    return sx, sy, sz


def ladder_operators(S: float) -> tuple[np.ndarray, np.ndarray]:
    _check_spin(S)
    _, _, _, sp_, sm = _spin_matrices(int(round(2 * S)))
    return sp_, sm


def local_rotation(S: float, angles: Angles) -> np.ndarray:
    """``exp(-i phi Sz) exp(-i theta Sy)`` evaluated exactly through the eigenbasis of ``Sy``."""
    _, sy, sz = spin_operators(S)
    w, v = np.linalg.eigh(sy)
    ry = (v * np.exp(-1j * angles.theta * w)) @ v.conj().T
    rz = np.diag(np.exp(-1j * angles.phi * np.diag(sz).real))
    return rz @ ry


def site_operator(op, k: int, dims: Sequence[int]):
    """Embed a local operator at site ``k`` as a sparse matrix on the full space."""
    left = math.prod(dims[:k])
    right = math.prod(dims[k + 1:])
    out = sp.csr_matrix(op)
    if left > 1:
        out = sp.kron(sp.identity(left, format="csr"), out, format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, format="csr"), format="csr")
    return out


def _pair_operator(a, i: int, b, j: int, dims: Sequence[int]):
    if i > j:
        a, i, b, j = b, j, a, i
    factors = [
        sp.identity(math.prod(dims[:i]), format="csr"),
        sp.csr_matrix(a),
        sp.identity(math.prod(dims[i + 1:j]), format="csr"),
        sp.csr_matrix(b),
        sp.identity(math.prod(dims[j + 1:]), format="csr"),
    ]
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)


def _check_dim(system: SystemSpec, cap: int) -> None:
    if system.dimension > cap:
        raise DimensionCap(f"Hilbert-space dimension {system.dimension} exceeds cap {cap}")


def build_hamiltonian(system: SystemSpec, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """Dense Hermitian matrix of the system Hamiltonian."""
    _check_dim(system, dim_cap)
    dims = system.dims
    ops = [spin_operators(s.spin) for s in system.sites]
    D = system.dimension
    H = sp.csr_matrix((D, D), dtype=complex)
    for k, h in enumerate(system.fields):
        for mu in range(3):
            if h[mu] != 0.0:
                H = H - h[mu] * site_operator(ops[k][mu], k, dims)
    for b in system.bonds:
        for mu in range(3):
            for nu in range(3):
                c = b.matrix[mu, nu]
                if c != 0.0:
                    H = H - c * _pair_operator(ops[b.i][mu], b.i, ops[b.j][nu], b.j, dims)
    H = H.toarray()
    return 0.5 * (H + H.conj().T)


def product_state(angles: Sequence[Angles], sites: Sequence[SiteSpec]) -> np.ndarray:
    """``(x)_i R_i |S_i, m=S_i>``, site 0 slowest."""
    if len(angles) != len(sites):
        raise ValidationError(f"{len(angles)} directions for {len(sites)} sites")
    psi = np.ones(1, dtype=complex)
    for a, s in zip(angles, sites):
        s = s if isinstance(s, SiteSpec) else SiteSpec(s)
        a = a if isinstance(a, Angles) else Angles(*a)
        psi = np.kron(psi, local_rotation(s.spin, a)[:, 0])
    return psi / np.linalg.norm(psi)


def expectation_spin(psi: np.ndarray, k: int, sites: Sequence[SiteSpec]) -> np.ndarray:
    """``<psi| S_k |psi>`` as a real 3-vector."""
    sites = [s if isinstance(s, SiteSpec) else SiteSpec(s) for s in sites]
    dims = [s.dim for s in sites]
    out = np.empty(3)
    for mu, op in enumerate(spin_operators(sites[k].spin)):
        out[mu] = np.real(np.vdot(psi, site_operator(op, k, dims) @ psi))
    return out


def verify_eigenstate(H: np.ndarray, psi: np.ndarray, E: float) -> float:
    if H.shape[0] != psi.shape[0]:
        raise ValidationError(f"Hamiltonian dimension {H.shape[0]} does not match state length {psi.shape[0]}")
    return float(np.linalg.norm(H @ psi - E * psi))


def spectrum(
    system: SystemSpec,
    theta: np.ndarray | None = None,
    *,
    dim_cap: int = DEFAULT_DIM_CAP,
    keep_vectors: bool = False,
) -> SpectrumReport:
    """Full dense diagonalization with ground-space bookkeeping."""
    H = build_hamiltonian(system, dim_cap)
    w, v = np.linalg.eigh(H)
    e0 = w[0]
    deg = int(np.count_nonzero(w - e0 <= EPS_DEG * (1.0 + abs(e0))))
    gap = float(w[deg] - e0) if deg < len(w) else 0.0
    overlap = None
    if theta is not None:
        overlap = float(np.sum(np.abs(v[:, :deg].conj().T @ theta) ** 2))
    return SpectrumReport(w, deg, gap, overlap, v if keep_vectors else None)


def theta_energy(system: SystemSpec, directions: Sequence[np.ndarray]) -> float:
    """``<Theta|H|Theta>`` from the mean-field expression ``<S_i> = S_i n_i``."""
    spins = system.spins
    n = np.asarray(directions, dtype=float)
    e = -float(np.sum(spins * np.einsum("ij,ij->i", system.fields, n)))
    for b in system.bonds:
        e -= spins[b.i] * spins[b.j] * float(n[b.i] @ b.matrix @ n[b.j])
    return e


def with_parallel_field(system: SystemSpec, directions, h_par) -> SystemSpec:
    """Copy of ``system`` with ``h_par * n_i`` added to each site field (scalar or per-site)."""
    n = np.asarray(directions, dtype=float)
    h = np.broadcast_to(np.asarray(h_par, dtype=float), (system.n_sites,))
    return system.replace(fields=system.fields + h[:, None] * n)


def _directions_of(angles: Sequence[Angles]) -> np.ndarray:
    return np.array([triad_from_angles(a).n for a in angles])


def critical_parallel_field(
    system: SystemSpec,
    angles: Sequence[Angles],
    *,
    tol: float = 1e-8,
    residual_tol: float = 1e-10,
    dim_cap: int = DEFAULT_DIM_CAP,
    max_iter: int = 200,
) -> CriticalField:
    """Smallest uniform parallel field making the product state the ground state.

    ``system`` must be at the factorizing point with zero parallel field.  The lowest
    energy in the orthogonal complement of ``|Theta>`` is obtained by shifting
    ``|Theta>`` out of the way (it is an exact eigenvector, so the complement is
    invariant) and ``g(h) = E_perp(h) - E_Theta(h)`` is bracketed and bisected.
    ``g`` is nondecreasing because ``E_Theta`` falls with the maximal slope ``-sum S_i``.
    """
    _check_dim(system, dim_cap)
    angles = [a if isinstance(a, Angles) else Angles(*a) for a in angles]
    n = _directions_of(angles)
    theta = product_state(angles, system.sites)
    H0 = build_hamiltonian(system, dim_cap)
    e0 = theta_energy(system, n)
    res = verify_eigenstate(H0, theta, e0)
    if res > residual_tol:
        raise NotFactorized(f"product state residual {res:.3e} exceeds {residual_tol:.1e}")

    V = np.zeros_like(H0)
    for k, (s, nk) in enumerate(zip(system.sites, n)):
        sx, sy, sz = spin_operators(s.spin)
        V -= site_operator(nk[0] * sx + nk[1] * sy + nk[2] * sz, k, system.dims).toarray()
    total_spin = float(np.sum(system.spins))
    proj = np.outer(theta, theta.conj())
    scale = np.abs(H0).sum() + 1.0

    def g(h: float) -> float:
        H = H0 + h * V + (4.0 * scale + 4.0 * abs(h) * total_spin) * proj
        e_perp = np.linalg.eigvalsh(H)[0]
        return float(e_perp - (e0 - h * total_spin))

    bonds_scale = max((np.linalg.svd(b.matrix, compute_uv=False)[0] for b in system.bonds), default=0.0)
    smax = float(np.max(system.spins))
    coord = system.coordination()

    g0 = g(0.0)
    if g0 >= -tol:
        return CriticalField(0.0, g0, bonds_scale, coord, 0.0, 0)
    hi = max(1.0, bonds_scale * smax * max(coord, 1))
    g_hi = g(hi)
    while g_hi <= 0.0:
        hi *= 2.0
        g_hi = g(hi)
    iterations = 0

    def counted(h):
        nonlocal iterations
        iterations += 1
        return g(h)

    h_c = brentq(counted, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    gv = g(h_c)
    ref = bonds_scale * smax * max(coord, 1)
    return CriticalField(float(h_c), gv, bonds_scale, coord, float(h_c / ref) if ref > 0 else 0.0, iterations)
