"""Engineering and verification of exactly separable eigenstates in spin arrays."""

__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .geometry import Angles, Triad, triad_from_angles, uv_vectors, condition_residual  # noqa: E402
from .quantum import SiteSpec, Bond, SystemSpec, build_hamiltonian, spectrum, critical_parallel_field  # noqa: E402
from .design import design_system, coupling_family, uniform_pair_field  # noqa: E402
from .infer import partner_directions, enumerate_chain, oracle_scan  # noqa: E402
from .entanglement import reduce_pair, concurrence, negativity, first_order_coefficients, sweep  # noqa: E402
from .recipes import SpiralSpec, spiral_system, neel_constant_phi, uniform_plane_state, complexity_rating  # noqa: E402
