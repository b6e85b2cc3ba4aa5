"""Named separable-eigenstate constructions and the control-complexity table."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .design import DesignReport, design_system
from .exceptions import InvalidCyclicIncrement, SingularMeanAngle, UnknownScenario, ValidationError
from .geometry import AXES, Angles, angles_from_direction

__all__ = [
    "SpiralSpec",
    "spiral_system",
    "spiral_energy",
    "neel_constant_phi",
    "neel_eta",
    "uniform_plane_state",
    "plane_sigma_coupling",
    "Scenario",
    "ComplexityRating",
    "complexity_rating",
]

_TOPOLOGIES = ("open", "cyclic")


def _chain_bonds(n: int, cyclic: bool) -> list[tuple[int, int]]:
    if cyclic and n < 3:
        raise ValidationError("a cyclic chain needs at least 3 sites")
    if n < 2:
        raise ValidationError("a chain needs at least 2 sites")
    bonds = [(k, k + 1) for k in range(n - 1)]
    if cyclic:
        bonds.append((n - 1, 0))
    return bonds


@dataclass(frozen=True)
class SpiralSpec:
    N: int
    theta: float
    dphi: float
    cyclic: bool = True
    J: float = 1.0
    h_par: float = 0.0
    spin: float = 0.5
    phi0: float = 0.0

    def __post_init__(self):
        if self.cyclic:
            k = self.dphi * self.N / (2 * np.pi)
            kr = round(k)
            if abs(k - kr) > 1e-9 or not 1 <= kr % self.N <= self.N - 1:
                raise InvalidCyclicIncrement(
                    f"cyclic spiral needs dphi = 2*pi*k/N with 1 <= k <= N-1; got dphi*N/(2pi) = {k:.6g}"
                )

    @classmethod
    def cyclic_k(cls, N: int, k: int, **kw) -> "SpiralSpec":
        if not 1 <= k <= N - 1:
            raise InvalidCyclicIncrement(f"k must lie in 1..{N - 1}, got {k}")
        return cls(N=N, dphi=2 * np.pi * k / N, cyclic=True, **kw)


def spiral_energy(spec: SpiralSpec) -> float:
    """Product-state energy of the uniform cyclic spiral: ``-N S (h_par + J S cos dphi)``."""
    S = spec.spin
    return -spec.N * S * (spec.h_par + spec.J * S * np.cos(spec.dphi))


def spiral_system(spec: SpiralSpec) -> DesignReport:
    """Spin spiral ``phi_i = phi0 + i dphi`` at constant polar angle on an XXZ chain.

    Every bond carries ``(J, J, J cos dphi)``; the perpendicular fields cancel in the
    bulk and survive only at the ends of an open chain.
    """
    angles = [Angles(spec.theta, spec.phi0 + k * spec.dphi) for k in range(spec.N)]
    bonds = _chain_bonds(spec.N, spec.cyclic)
    J = np.array([spec.J, spec.J, spec.J * np.cos(spec.dphi)])
    return design_system(angles, bonds, spins=spec.spin, h_par=spec.h_par, overrides={b: J for b in bonds})


def neel_eta(theta1: float, theta2: float) -> float:
    """``sin((theta2 - theta1)/2) / sin(mean theta)`` for a constant-phi pair."""
    mean = 0.5 * (theta1 + theta2)
    s = np.sin(mean)
    if abs(s) < 1e-12:
        raise SingularMeanAngle(f"sin of mean polar angle {mean:.6g} vanishes")
    return float(np.sin(0.5 * (theta2 - theta1)) / s)


def neel_constant_phi(
    theta1: float,
    theta2: float,
    phi: float,
    N: int,
    J_scale: float = 1.0,
    *,
    spin: float = 0.5,
    h_par=0.0,
    topology: str = "open",
) -> DesignReport:
    """Alternating polar angles ``theta1 theta2 theta1 ...`` at common azimuth ``phi``.

    Uniform coupling ``(J(1 - eta^2), J(1 - eta^2), J(1 + eta^2))``.
    """
    if topology not in _TOPOLOGIES:
        raise ValidationError(f"topology must be one of {_TOPOLOGIES}")
    cyclic = topology == "cyclic"
    if cyclic and N % 2:
        raise ValidationError("an alternating cyclic chain needs an even number of sites")
    eta2 = neel_eta(theta1, theta2) ** 2
    J = J_scale * np.array([1.0 - eta2, 1.0 - eta2, 1.0 + eta2])
    angles = [Angles(theta1 if k % 2 == 0 else theta2, phi) for k in range(N)]
    bonds = _chain_bonds(N, cyclic)
    return design_system(angles, bonds, spins=spin, h_par=h_par, overrides={b: J for b in bonds})


def _plane_axes(plane: str) -> tuple[int, int, np.ndarray]:
    if len(plane) != 2 or plane[0] == plane[1] or set(plane) - set(AXES):
        raise ValidationError(f"plane must name two distinct axes from 'xyz', got {plane!r}")
    mu, nu = AXES.index(plane[0]), AXES.index(plane[1])
    e = np.eye(3)
    return mu, nu, np.cross(e[mu], e[nu])


def plane_sigma_coupling(gamma: float, J_mu: float, J_nu: float) -> float:
    """Out-of-plane coupling allowing the uniform in-plane state at angle ``gamma`` from the nu axis."""
    return J_nu + (J_mu - J_nu) * np.cos(gamma) ** 2


def uniform_plane_state(
    gamma: float,
    J_mu: float,
    J_nu: float,
    N: int,
    topology: str = "cyclic",
    *,
    plane: str = "xz",
    spin: float = 0.5,
    h_par=0.0,
) -> DesignReport:
    """All spins along ``n = sin(gamma) e_mu + cos(gamma) e_nu`` on a chain with fixed anisotropic coupling.

    ``plane`` names ``(mu, nu)``; the third coupling is ``J_nu + (J_mu - J_nu) cos^2 gamma``
    and the perpendicular field is ``sin(gamma) cos(gamma) (J_mu - J_nu) S z_i (e_sigma x n)``
    with ``e_sigma = e_mu x e_nu`` and ``z_i`` the number of neighbours.
    """
    if topology not in _TOPOLOGIES:
        raise ValidationError(f"topology must be one of {_TOPOLOGIES}")
    mu, nu, e_sigma = _plane_axes(plane)
    sigma = int(np.argmax(np.abs(e_sigma)))
    e = np.eye(3)
    n = np.sin(gamma) * e[mu] + np.cos(gamma) * e[nu]
    J = np.zeros(3)
    J[mu], J[nu], J[sigma] = J_mu, J_nu, plane_sigma_coupling(gamma, J_mu, J_nu)
    bonds = _chain_bonds(N, topology == "cyclic")
    angles = [angles_from_direction(n)] * N
    return design_system(angles, bonds, spins=spin, h_par=h_par, overrides={b: J for b in bonds})


class Scenario(Enum):
    TUNABLE_PAIR = "tunable-pair"
    TUNABLE_OPEN_CHAIN = "tunable-open-chain"
    TUNABLE_CYCLIC_CHAIN = "tunable-cyclic-chain"
    UNIFORM_PAIR = "uniform-pair"
    UNIFORM_CYCLIC_CHAIN = "uniform-cyclic-chain"
    UNIFORM_OPEN_CHAIN = "uniform-open-chain"
    FIXED_PAIR = "fixed-pair"
    FIXED_OPEN_CHAIN = "fixed-open-chain"
    FIXED_CYCLIC_CHAIN = "fixed-cyclic-chain"
    FIXED_UNIFORM_CYCLIC_CHAIN = "fixed-uniform-cyclic-chain"
    FIXED_UNIFORM_OPEN_CHAIN = "fixed-uniform-open-chain"


@dataclass(frozen=True)
class ComplexityRating:
    """Number of local fields ``m`` and exchange couplings ``k`` that must be controlled."""

    m: int
    k: int
    scenario: Scenario

    def as_tuple(self) -> tuple[int, int]:
        return (self.m, self.k)


# (m, k) as functions of N; pairs have N = 2
_TABLE = {
    Scenario.TUNABLE_PAIR: lambda N: (1, 1),
    Scenario.TUNABLE_OPEN_CHAIN: lambda N: (N - 1, N - 1),
    Scenario.TUNABLE_CYCLIC_CHAIN: lambda N: (N - 1, N),
    Scenario.UNIFORM_PAIR: lambda N: (0, 1),
    Scenario.UNIFORM_CYCLIC_CHAIN: lambda N: (0, N),
    Scenario.UNIFORM_OPEN_CHAIN: lambda N: (2, N - 1),
    Scenario.FIXED_PAIR: lambda N: (1, 0),
    Scenario.FIXED_OPEN_CHAIN: lambda N: (N - 1, 0),
    Scenario.FIXED_CYCLIC_CHAIN: lambda N: (N - 1, 1),
    Scenario.FIXED_UNIFORM_CYCLIC_CHAIN: lambda N: (0, 0),
    Scenario.FIXED_UNIFORM_OPEN_CHAIN: lambda N: (2, 0),
}


def complexity_rating(scenario, N: int = 2) -> ComplexityRating:
    """Tabulated control complexity for the enumerated scenarios (nearest-neighbour chains)."""
    if not isinstance(scenario, Scenario):
        try:
            scenario = Scenario(str(scenario).strip().lower().replace("_", "-"))
        except ValueError:
            names = ", ".join(s.value for s in Scenario)
            raise UnknownScenario(f"unknown scenario {scenario!r}; expected one of: {names}") from None
    pair = scenario.value.endswith("pair")
    if pair and N != 2:
        raise ValidationError(f"scenario {scenario.value} describes a pair (N = 2), got N = {N}")
    if "cyclic" in scenario.value and N < 3:
        raise ValidationError("cyclic chains need N >= 3")
    if "open" in scenario.value and N < 3:
        raise ValidationError("open-chain scenarios need N >= 3; use the pair scenario for N = 2")
    m, k = _TABLE[scenario](N)
    return ComplexityRating(m, k, scenario)
