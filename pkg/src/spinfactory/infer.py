"""Partner directions for a fixed coupling, chain enumeration and a brute-force oracle.

With ``a = J nx_j`` and ``b = J ny_j`` the compatible directions of the partner spin are

    n_i = alpha [a x b +/- (eta lam_+ a + lam_- b)]
    lam_pm^2 = (sqrt((|a|^2 - |b|^2)^2 + 4 (a.b)^2) +/- (|a|^2 - |b|^2)) / 2

with ``eta = sign(a.b)``.  The solution set does not depend on the gauge of
``(nx_j, ny_j)``: rotating the frame multiplies ``a + i b`` by a phase.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .exceptions import NumericalConsistencyError, ValidationError
from .geometry import (
    Angles,
    Triad,
    angles_from_direction,
    angular_distance,
    condition_residual,
    direction,
    triad_from_angles,
    triad_from_direction,
)

__all__ = [
    "SolutionKind",
    "DirectionSolution",
    "ChainConfiguration",
    "BranchPolicy",
    "partner_directions",
    "enumerate_chain",
    "oracle_scan",
    "ScanZero",
]


class SolutionKind(Enum):
    TWO_BRANCH = "two_branch"
    SINGLE_COLLINEAR = "single_collinear"
    UNIFORM = "uniform"
    FREE = "free"


@dataclass
class DirectionSolution:
    solutions: list[np.ndarray]
    kind: SolutionKind
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    lam_plus: float = 0.0
    lam_minus: float = 0.0
    eta: int = 1

    @property
    def free(self) -> bool:
        return self.kind is SolutionKind.FREE


@dataclass
class ChainConfiguration:
    directions: list[np.ndarray]
    branch_word: str
    free_sites: list[int] = field(default_factory=list)

    @property
    def angles(self) -> list[Angles]:
        return [angles_from_direction(n) for n in self.directions]


class BranchPolicy(Enum):
    ALL = "all"
    FIRST = "first"
    WORD = "word"


def _as_triad(t) -> Triad:
    if isinstance(t, Triad):
        return t
    if isinstance(t, Angles):
        return triad_from_angles(t)
    return triad_from_direction(t)


def partner_directions(J, tj) -> DirectionSolution:
    """Directions ``n_i`` satisfying the pair conditions for ``S_i . J S_j`` given site j."""
    J = np.asarray(J, dtype=float)
    if J.ndim == 1:
        J = np.diag(J)
    tj = _as_triad(tj)
    a, b = J @ tj.nx, J @ tj.ny
    eps_zero = 1e-12 * (np.abs(J).max() + 1.0)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < eps_zero and nb < eps_zero:
        return DirectionSolution([], SolutionKind.FREE, a, b)

    axb = np.cross(a, b)
    if np.linalg.norm(axb) < eps_zero * max(na, nb):
        # b parallel to a (or one of them vanishes): both orientations of that axis solve
        axis = a if na >= nb else b
        axis = axis / np.linalg.norm(axis)
        return DirectionSolution([axis, -axis], SolutionKind.SINGLE_COLLINEAR, a, b)

    ab = float(a @ b)
    d = na * na - nb * nb
    r = np.hypot(d, 2.0 * ab)
    lam_p = np.sqrt(max(0.5 * (r + d), 0.0))
    lam_m = np.sqrt(max(0.5 * (r - d), 0.0))
    eta = 1 if ab >= 0 else -1
    if r < 1e-12 * (na * na + nb * nb):
        # |a| = |b| and a . b = 0: isotropic-like coupling, single solution
        n = axb / np.linalg.norm(axb)
        return DirectionSolution([n], SolutionKind.UNIFORM, a, b, lam_p, lam_m, eta)
    shift = eta * lam_p * a + lam_m * b
    sols = []
    for sign in (1.0, -1.0):
        v = axb + sign * shift
        sols.append(v / np.linalg.norm(v))
    return DirectionSolution(sols, SolutionKind.TWO_BRANCH, a, b, lam_p, lam_m, eta)


def _chain_order(n_sites: int, seed_site: int) -> list[tuple[int, int]]:
    """Propagation steps ``(known, new)``: rightwards from the seed, then leftwards."""
    steps = [(k, k + 1) for k in range(seed_site, n_sites - 1)]
    steps += [(k, k - 1) for k in range(seed_site, 0, -1)]
    return steps


def enumerate_chain(
    couplings: Sequence[np.ndarray],
    seed: Angles,
    branch_policy: BranchPolicy | str = BranchPolicy.ALL,
    *,
    word: str | None = None,
    seed_site: int = 0,
    default_direction=None,
    check_tol: float = 1e-10,
    max_workers: int = 1,
) -> list[ChainConfiguration]:
    """Separable configurations of an open chain with fixed couplings.

    ``couplings[k]`` is ``J^{k,k+1}`` in ``S_k . J S_{k+1}``.  Directions propagate from
    ``seed_site`` to the right end, then to the left end; bit ``t`` of a branch word
    picks the ``+`` (0) or ``-`` (1) solution on the ``t``-th propagation step, and is 0
    on single-solution steps.  A free partner takes ``default_direction`` (the seed
    direction unless given) and is recorded in ``free_sites``.
    """
    policy = BranchPolicy(branch_policy) if not isinstance(branch_policy, BranchPolicy) else branch_policy
    mats = [np.diag(c) if np.ndim(c) == 1 else np.asarray(c, dtype=float) for c in couplings]
    n_sites = len(mats) + 1
    if not 0 <= seed_site < n_sites:
        raise ValidationError(f"seed site {seed_site} outside chain of {n_sites}")
    seed = seed if isinstance(seed, Angles) else Angles(*seed)
    seed_n = triad_from_angles(seed).n
    fallback = seed_n if default_direction is None else np.asarray(default_direction, dtype=float)
    steps = _chain_order(n_sites, seed_site)
    if policy is BranchPolicy.WORD:
        if word is None or len(word) != len(steps) or set(word) - {"0", "1"}:
            raise ValidationError(f"branch word must be a bit string of length {len(steps)}")

    def bond(known: int, new: int) -> np.ndarray:
        # coupling seen from the new site: J^{new,known}
        return mats[known].T if new == known + 1 else mats[new]

    def expand(prefix_dirs, prefix_word, free, depth):
        if depth == len(steps):
            yield ChainConfiguration([prefix_dirs[k] for k in range(n_sites)], prefix_word, list(free))
            return
        known, new = steps[depth]
        sol = partner_directions(bond(known, new), prefix_dirs[known])
        if sol.free:
            options = [(fallback / np.linalg.norm(fallback), True)]
        else:
            options = [(n, False) for n in sol.solutions]
        if policy is BranchPolicy.FIRST:
            picks = [0]
        elif policy is BranchPolicy.WORD:
            bit = int(word[depth])
            picks = [bit if bit < len(options) else 0]
        else:
            picks = range(len(options))
        for p in picks:
            n, is_free = options[p]
            dirs = dict(prefix_dirs)
            dirs[new] = n
            bit = str(p) if len(options) > 1 else "0"
            yield from expand(dirs, prefix_word + bit, free + ([new] if is_free else []), depth + 1)

    if max_workers > 1 and steps and policy is BranchPolicy.ALL:
        first_known, first_new = steps[0]
        sol = partner_directions(bond(first_known, first_new), seed_n)
        if sol.free:
            heads = [({seed_site: seed_n, first_new: fallback / np.linalg.norm(fallback)}, "0", [first_new])]
        else:
            heads = [
                ({seed_site: seed_n, first_new: n}, str(p) if len(sol.solutions) > 1 else "0", [])
                for p, n in enumerate(sol.solutions)
            ]
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(lambda h: list(expand(h[0], h[1], h[2], 1)), heads))
        configs = list(itertools.chain.from_iterable(parts))
    else:
        configs = list(expand({seed_site: seed_n}, "", [], 0))
    configs.sort(key=lambda c: c.branch_word)

    for cfg in configs:
        for k, J in enumerate(mats):
            if k + 1 in cfg.free_sites or k in cfg.free_sites:
                continue
            r = condition_residual(J, triad_from_direction(cfg.directions[k]), triad_from_direction(cfg.directions[k + 1]))
            if r > check_tol * max(1.0, np.abs(J).max()):
                raise NumericalConsistencyError(f"configuration {cfg.branch_word} violates bond {k} (residual {r:.3e})")
    return configs


@dataclass
class ScanZero:
    theta: float
    phi: float
    direction: np.ndarray
    grid_residual: float
    refined: np.ndarray
    refined_residual: float


def _gauge_free_residual(n: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """``|e_i^T (a + i b)|^2`` written through ``n`` alone (smooth on the whole sphere)."""
    return float(a @ a + b @ b - (n @ a) ** 2 - (n @ b) ** 2 - 2.0 * n @ np.cross(a, b))


def _polish(n0: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Refine a zero of ``e(n)^T (a + i b)`` in a tangent chart around ``n0``.

    The chart carries a smooth local frame (``e1`` projected onto the tangent plane),
    so the two real residual components are smooth functions of the chart coordinates.
    """
    seed = np.eye(3)[int(np.argmin(np.abs(n0)))]
    t1 = seed - n0 * (n0 @ seed)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n0, t1)

    def frame(u):
        n = n0 + u[0] * t1 + u[1] * t2
        n /= np.linalg.norm(n)
        ex = t1 - n * (n @ t1)
        ex /= np.linalg.norm(ex)
        return n, ex, np.cross(n, ex)

    def resid(u):
        _, ex, ey = frame(u)
        return np.array([ex @ a - ey @ b, ex @ b + ey @ a])

    sol = least_squares(resid, np.zeros(2), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return frame(sol.x)[0]


def oracle_scan(
    J,
    tj,
    grid: tuple[int, int] = (180, 360),
    *,
    threshold: float | None = None,
    merge_deg: float = 3.0,
    accept: float = 1e-7,
) -> list[ScanZero]:
    """Brute-force zeros of the pair-condition residual over a (theta, phi) grid.

    Every grid point's residual is evaluated with the canonical triad; discrete local
    minima (periodic in phi) under ``threshold`` are polished by Levenberg-Marquardt in a
    tangent chart, kept if the polished residual is below ``accept``
    (relative to the coupling scale), and merged when closer than ``merge_deg``.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim == 1:
        J = np.diag(J)
    n_theta, n_phi = grid
    if n_theta < 90 or n_phi < 180:
        raise ValidationError("grid must be at least (90, 180)")
    tj = _as_triad(tj)
    scale = max(np.abs(J).max(), 1e-300)
    a, b = J @ tj.nx, J @ tj.ny

    thetas = np.linspace(0.0, np.pi, n_theta + 1)
    phis = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    T, P = np.meshgrid(thetas, phis, indexing="ij")
    ct, st, cp, sp_ = np.cos(T), np.sin(T), np.cos(P), np.sin(P)
    nx = np.stack([ct * cp, ct * sp_, -st], axis=-1)
    ny = np.stack([-sp_, cp, np.zeros_like(T)], axis=-1)
    r1 = nx @ a - ny @ b
    r2 = nx @ b + ny @ a
    R = np.maximum(np.abs(r1), np.abs(r2))

    if threshold is None:
        step = max(np.pi / n_theta, 2 * np.pi / n_phi)
        threshold = 4.0 * step * (np.linalg.norm(a) + np.linalg.norm(b))
    padded = np.pad(R, ((1, 1), (0, 0)), mode="edge")
    padded = np.concatenate([padded[:, -1:], padded, padded[:, :1]], axis=1)
    center = padded[1:-1, 1:-1]
    is_min = np.ones_like(R, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
            is_min &= center <= nb
    cand = np.argwhere(is_min & (R < threshold))

    zeros: list[ScanZero] = []
    order = np.argsort(R[cand[:, 0], cand[:, 1]]) if len(cand) else []
    for idx in order:
        it, ip = cand[idx]
        t0, p0 = thetas[it], phis[ip]
        n0 = direction(t0, p0)
        if any(angular_distance(n0, z.direction) < np.radians(merge_deg) for z in zeros):
            continue
        n_ref = _polish(n0, a, b)
        ref_res = condition_residual(J, triad_from_direction(n_ref), tj)
        if ref_res > accept * scale:
            continue
        if any(angular_distance(n_ref, z.refined) < np.radians(merge_deg) for z in zeros):
            continue
        zeros.append(ScanZero(float(t0), float(p0), n0, float(R[it, ip]), n_ref, float(ref_res)))
    return zeros
