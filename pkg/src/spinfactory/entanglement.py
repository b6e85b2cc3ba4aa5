"""Pair entanglement near a factorized ground state.

Reduced two-site states, Wootters concurrence, partial-transpose negativity,
first-order excitation amplitudes ``alpha_i`` / ``beta_ij`` and parameter sweeps.
"""

from __future__ import annotations

import itertools
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .design import site_perpendicular_fields
from .exceptions import (
    DegenerateGS,
    IndexOutOfRange,
    LevelCrossing,
    NumericalConsistencyError,
    UnsupportedSpin,
    ValidationError,
)
from .geometry import Angles, triad_from_angles
from .quantum import (
    EPS_DEG,
    Bond,
    SystemSpec,
    build_hamiltonian,
    ladder_operators,
    local_rotation,
    product_state,
    site_operator,
    spin_operators,
)

__all__ = [
    "PairState",
    "PerturbationCoefficients",
    "SweepMode",
    "SweepRow",
    "reduce_pair",
    "concurrence",
    "negativity",
    "purity",
    "first_order_coefficients",
    "red_model",
    "sweep",
    "thread_cap",
]

_CLAMP = 1e-12
_PSD_FLOOR = 1e-10

_SY2 = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)


@dataclass
class PairState:
    rho: np.ndarray
    sites: tuple[int, int]
    dims: tuple[int, int]


@dataclass
class PerturbationCoefficients:
    alpha: np.ndarray  # (N,) complex
    beta: np.ndarray  # (N, N) complex, symmetric, zero diagonal
    delta_psi: np.ndarray | None = None


class SweepMode(Enum):
    FIELD_PERP = "field"
    COUPLING_SHIFT = "coupling"
    PARALLEL_FIELD = "parallel"


@dataclass(frozen=True)
class SweepRow:
    param: float
    i: int
    j: int
    concurrence: float
    gs_energy: float
    gap: float


def _state_tensor(psi, dims):
    return np.asarray(psi, dtype=complex).reshape(dims)


def reduce_pair(psi: np.ndarray, dims: Sequence[int], sites: tuple[int, int]) -> PairState:
    """Partial trace of ``|psi><psi|`` (or of a mixed ``psi`` given as a matrix) onto two sites."""
    dims = list(dims)
    n = len(dims)
    i, j = sites
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexOutOfRange(f"pair {sites} invalid for {n} sites")
    psi = np.asarray(psi, dtype=complex)
    rest = [k for k in range(n) if k not in (i, j)]
    d = dims[i] * dims[j]
    if psi.ndim == 1:
        t = np.transpose(_state_tensor(psi, dims), [i, j] + rest).reshape(d, -1)
        rho = t @ t.conj().T
    else:
        t = psi.reshape(dims + dims)
        perm = [i, j] + rest
        t = np.transpose(t, perm + [n + k for k in perm])
        m = int(np.prod([dims[k] for k in rest])) if rest else 1
        rho = np.einsum("akbk->ab", t.reshape(d, m, d, m))
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return PairState(rho, (i, j), (dims[i], dims[j]))


def purity(state: PairState) -> float:
    return float(np.real(np.trace(state.rho @ state.rho)))


def _as_rho(state) -> tuple[np.ndarray, tuple[int, int]]:
    if isinstance(state, PairState):
        return state.rho, state.dims
    rho = np.asarray(state, dtype=complex)
    return rho, (2, 2)


def concurrence(state) -> float:
    """Wootters concurrence ``max(0, 2 lam_max - sum lam)`` of a two-qubit state.

    ``lam`` are the square roots of the eigenvalues of ``sqrt(rho) rho~ sqrt(rho)``.
    With ``rho = W W^dag`` they equal the singular values of ``W^T (sy x sy) W``,
    which avoids square roots of near-zero eigenvalues.
    """
    rho, dims = _as_rho(state)
    if tuple(dims) != (2, 2) or rho.shape != (4, 4):
        raise UnsupportedSpin("concurrence is defined here for two spin-1/2 sites only")
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if w[0] < -_PSD_FLOOR:
        raise NumericalConsistencyError(f"pair state not positive semidefinite (eigenvalue {w[0]:.3e})")
    W = v * np.sqrt(np.clip(w, 0.0, None))
    lam = np.linalg.svd(W.T @ _SY2 @ W, compute_uv=False)
    c = 2.0 * lam[0] - lam.sum()
    return float(min(max(c, 0.0), 1.0))


def partial_transpose(rho: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Partial transpose on the second site."""
    di, dj = dims
    return np.asarray(rho).reshape(di, dj, di, dj).transpose(0, 3, 2, 1).reshape(di * dj, di * dj)


def negativity(state) -> float:
    """Sum of the moduli of the negative eigenvalues of ``rho^{T_j}``."""
    rho, dims = _as_rho(state)
    if rho.shape[0] != dims[0] * dims[1]:
        raise ValidationError(f"matrix of size {rho.shape[0]} does not match local dimensions {dims}")
    ev = np.linalg.eigvalsh(partial_transpose(rho, dims))
    return float(-ev[ev < 0].sum())


def red_model(beta: complex, alpha_i: complex = 0.0, alpha_j: complex = 0.0, *, completed: bool = False) -> np.ndarray:
    """Lowest-order pair state near a factorized state, in the rotated basis ``|0'0'>, |0'1'>, |1'0'>, |1'1'>``.

    The literal first-order matrix is indefinite at second order; ``completed=True`` returns
    the pure state whose density matrix agrees with it to first order.
    """
    if completed:
        psi = np.array([1.0, np.conj(alpha_j), np.conj(alpha_i), np.conj(beta)], dtype=complex)
        psi /= np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    return np.array(
        [
            [1.0, alpha_j, alpha_i, beta],
            [np.conj(alpha_j), 0, 0, 0],
            [np.conj(alpha_i), 0, 0, 0],
            [np.conj(beta), 0, 0, 0],
        ],
        dtype=complex,
    )


def _rotated_lowering(system: SystemSpec, angles: Sequence[Angles]) -> list:
    ops = []
    for k, (s, a) in enumerate(zip(system.sites, angles)):
        R = local_rotation(s.spin, a)
        _, sm = ladder_operators(s.spin)
        ops.append(site_operator(R @ sm @ R.conj().T, k, system.dims))
    return ops


def _perturbation_operator(system: SystemSpec, directions, delta_h, delta_J) -> np.ndarray:
    dims = system.dims
    D = system.dimension
    dH = np.zeros((D, D), dtype=complex)
    if delta_h is not None:
        dh = np.asarray(delta_h, dtype=float).reshape(system.n_sites, 3)
        for k, (s, h, n) in enumerate(zip(system.sites, dh, directions)):
            h = h - n * (n @ h)  # parallel part only shifts the energy
            ops = spin_operators(s.spin)
            for mu in range(3):
                if h[mu] != 0.0:
                    dH -= h[mu] * site_operator(ops[mu], k, dims).toarray()
    if delta_J is not None:
        if len(delta_J) != len(system.bonds):
            raise ValidationError(f"{len(delta_J)} coupling perturbations for {len(system.bonds)} bonds")
        pert = system.replace(
            bonds=[Bond(b.i, b.j, dj) for b, dj in zip(system.bonds, delta_J)],
            fields=np.zeros((system.n_sites, 3)),
        )
        dH += build_hamiltonian(pert)
    return dH


def first_order_coefficients(
    system: SystemSpec,
    angles: Sequence[Angles],
    delta_h=None,
    delta_J=None,
    *,
    keep_state: bool = False,
) -> PerturbationCoefficients:
    """First-order amplitudes of one- and two-spin excitations in the perturbed ground state.

    ``delta_psi = sum_nu |nu><nu|dH|Theta> / (E_Theta - E_nu)`` over the full excited
    spectrum, with ``dH = -(sum_i dh_i . S_i + sum_bonds S_i . dJ S_j)``.  Then
    ``alpha_i = <Theta|S+'_i delta_psi> / |S-'_i Theta|`` and
    ``beta_ij = <Theta|S+'_i S+'_j delta_psi> / |S-'_i S-'_j Theta|``, so for spin 1/2
    they are the amplitudes of the normalized flipped configurations.
    """
    angles = [a if isinstance(a, Angles) else Angles(*a) for a in angles]
    directions = np.array([triad_from_angles(a).n for a in angles])
    theta = product_state(angles, system.sites)
    H = build_hamiltonian(system)
    w, v = np.linalg.eigh(H)
    e_theta = float(np.real(np.vdot(theta, H @ theta)))
    scale = 1.0 + abs(w[0])
    if abs(e_theta - w[0]) > EPS_DEG * scale:
        raise DegenerateGS(f"product state energy {e_theta:.12g} is not the ground energy {w[0]:.12g}")
    deg = int(np.count_nonzero(w - w[0] <= EPS_DEG * scale))
    if deg > 1:
        raise DegenerateGS(f"ground level is {deg}-fold degenerate")

    dH = _perturbation_operator(system, directions, delta_h, delta_J)
    amp = v[:, 1:].conj().T @ (dH @ theta)
    delta_psi = v[:, 1:] @ (amp / (e_theta - w[1:]))

    lower = _rotated_lowering(system, angles)
    n = system.n_sites
    alpha = np.zeros(n, dtype=complex)
    beta = np.zeros((n, n), dtype=complex)
    flipped = [op @ theta for op in lower]
    for i in range(n):
        nrm = np.linalg.norm(flipped[i])
        alpha[i] = np.vdot(flipped[i], delta_psi) / nrm
    for i, j in itertools.combinations(range(n), 2):
        f = lower[i] @ flipped[j]
        beta[i, j] = beta[j, i] = np.vdot(f, delta_psi) / np.linalg.norm(f)
    return PerturbationCoefficients(alpha, beta, delta_psi if keep_state else None)


def thread_cap(requested: int | None = None) -> int:
    """Worker count: ``requested`` or the CPU count, capped by ``SPINFACTORY_THREADS``."""
    n = requested or os.cpu_count() or 1
    env = os.environ.get("SPINFACTORY_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ValidationError(f"SPINFACTORY_THREADS must be an integer, got {env!r}") from None
    return max(1, n)


def _swept_system(system: SystemSpec, directions, mode: SweepMode, value: float, base) -> SystemSpec:
    if mode is SweepMode.FIELD_PERP:
        h_perp = base
        norms = np.linalg.norm(h_perp, axis=1)
        unit = np.zeros_like(h_perp)
        ok = norms >= 1e-12
        unit[ok] = h_perp[ok] / norms[ok, None]
        return system.replace(fields=system.fields + value * unit)
    if mode is SweepMode.COUPLING_SHIFT:
        bonds = [Bond(b.i, b.j, b.matrix + value * np.eye(3)) for b in system.bonds]
        return system.replace(bonds=bonds)
    return system.replace(fields=base + value * directions)


def _ground(system: SystemSpec):
    H = build_hamiltonian(system)
    w, v = np.linalg.eigh(H)
    deg = int(np.count_nonzero(w - w[0] <= EPS_DEG * (1.0 + abs(w[0]))))
    gap = float(w[deg] - w[0]) if deg < len(w) else 0.0
    return float(w[0]), gap, v[:, :deg]


def _parse_pairs(pairs, n: int) -> list[tuple[int, int]]:
    if pairs is None or pairs == "all":
        return list(itertools.combinations(range(n), 2))
    out = []
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise IndexOutOfRange(f"pair ({i},{j}) invalid for {n} sites")
        out.append((min(i, j), max(i, j)))
    return sorted(set(out))


def sweep(
    system: SystemSpec,
    angles: Sequence[Angles],
    mode: SweepMode | str,
    values: Iterable[float],
    pairs=None,
    *,
    max_workers: int | None = None,
) -> list[SweepRow]:
    """Ground-state pair concurrences along a one-parameter family around a factorized design.

    ``FIELD_PERP`` adds ``value * h_perp_i / |h_perp_i|`` to each site field (zero where the
    perpendicular field vanishes), ``COUPLING_SHIFT`` adds ``value`` to every diagonal
    coupling entry, and ``PARALLEL_FIELD`` sets the fields to ``h_perp_i + value * n_i``.
    A degenerate ground level is represented by the equal mixture of its states.
    Rows are ordered by ``(param, i, j)``.
    """
    mode = SweepMode(mode) if not isinstance(mode, SweepMode) else mode
    angles = [a if isinstance(a, Angles) else Angles(*a) for a in angles]
    directions = np.array([triad_from_angles(a).n for a in angles])
    values = sorted(float(x) for x in values)
    pair_list = _parse_pairs(pairs, system.n_sites)
    for i, j in pair_list:
        if system.dims[i] != 2 or system.dims[j] != 2:
            raise UnsupportedSpin(f"pair ({i},{j}) is not a pair of spin-1/2 sites")
    base = site_perpendicular_fields(system, directions)
    dims = system.dims

    def point(value: float):
        e0, gap, gs = _ground(_swept_system(system, directions, mode, value, base))
        if gs.shape[1] == 1:
            state = gs[:, 0]
        else:
            state = gs @ gs.conj().T / gs.shape[1]
        cs = [concurrence(reduce_pair(state, dims, p)) for p in pair_list]
        return e0, gap, gs, cs

    workers = min(thread_cap(max_workers), max(1, len(values)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, values))
    else:
        results = [point(x) for x in values]

    rows = []
    prev = None
    for value, (e0, gap, gs, cs) in zip(values, results):
        if prev is not None:
            ov = np.sum(np.abs(prev.conj().T @ gs) ** 2) / max(prev.shape[1], gs.shape[1])
            if ov < 0.5:
                warnings.warn(f"ground state changed character at param={value:.6g} (overlap {ov:.3f})", LevelCrossing)
        prev = gs
        rows.extend(SweepRow(value, i, j, c, e0, gap) for (i, j), c in zip(pair_list, cs))
    return rows
