import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinfactory.exceptions import DimensionCap, InvalidSpin, NotFactorized, ValidationError
from spinfactory.geometry import Angles
from spinfactory.quantum import (
    Bond,
    SiteSpec,
    SystemSpec,
    build_hamiltonian,
    critical_parallel_field,
    expectation_spin,
    ladder_operators,
    local_rotation,
    product_state,
    spectrum,
    spin_operators,
    theta_energy,
    verify_eigenstate,
)

spins = st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5])


@given(spins)
def test_spin_algebra(S):
    sx, sy, sz = spin_operators(S)
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.allclose(casimir, S * (S + 1) * np.eye(int(2 * S + 1)), atol=1e-12)
    sp_, sm = ladder_operators(S)
    assert np.allclose(sp_, sx + 1j * sy)
    assert np.allclose(sm, sp_.conj().T)


@pytest.mark.parametrize("bad", [0, -0.5, 0.3, 1.25])
def test_invalid_spin(bad):
    with pytest.raises(InvalidSpin):
        SiteSpec(bad)


@settings(max_examples=30)
@given(spins, st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_rotated_highest_weight_points_along_n(S, theta, phi):
    a = Angles(theta, phi)
    psi = product_state([a], [SiteSpec(S)])
    assert np.allclose(expectation_spin(psi, 0, [SiteSpec(S)]), S * a.direction(), atol=1e-10)
    R = local_rotation(S, a)
    assert np.allclose(R.conj().T @ R, np.eye(R.shape[0]), atol=1e-12)


def test_zeeman_and_heisenberg_baselines():
    h = 0.8
    w = np.linalg.eigvalsh(build_hamiltonian(SystemSpec([0.5], [], [[0, 0, h]])))
    assert np.allclose(w, [-h / 2, h / 2], atol=1e-12)
    J = 1.3
    w = np.linalg.eigvalsh(build_hamiltonian(SystemSpec([0.5, 0.5], [Bond(0, 1, [-J, -J, -J])])))
    assert np.allclose(w, [-3 * J / 4, J / 4, J / 4, J / 4], atol=1e-12)


def test_bond_orientation_and_validation():
    m = np.arange(9.0).reshape(3, 3)
    b = Bond(0, 1, m)
    assert np.array_equal(b.oriented(1, 0), m.T)
    with pytest.raises(ValidationError):
        Bond(1, 1, [1, 1, 1])
    with pytest.raises(ValidationError):
        SystemSpec([0.5, 0.5], [Bond(0, 1, [1, 1, 1]), Bond(1, 0, [1, 1, 1])])
    with pytest.raises(ValidationError):
        SystemSpec([0.5], [Bond(0, 3, [1, 1, 1])])


def test_asymmetric_coupling_matches_transposed_bond(rng):
    m = rng.normal(size=(3, 3))
    H1 = build_hamiltonian(SystemSpec([0.5, 1.0], [Bond(0, 1, m)]))
    s = SystemSpec([1.0, 0.5], [Bond(0, 1, m.T)])
    # relabelled sites: permute tensor factors
    H2 = build_hamiltonian(s).reshape(3, 2, 3, 2).transpose(1, 0, 3, 2).reshape(6, 6)
    assert np.allclose(H1, H2, atol=1e-12)


def test_dimension_cap():
    with pytest.raises(DimensionCap):
        build_hamiltonian(SystemSpec([0.5] * 13), dim_cap=4096)


def test_theta_energy_is_expectation(rng):
    n = 4
    angles = [Angles.from_direction(v) for v in rng.normal(size=(n, 3))]
    bonds = [Bond(k, k + 1, rng.normal(size=(3, 3))) for k in range(n - 1)]
    sys_ = SystemSpec([0.5, 1.0, 0.5, 1.5], bonds, rng.normal(size=(n, 3)))
    psi = product_state(angles, sys_.sites)
    H = build_hamiltonian(sys_)
    e = theta_energy(sys_, [a.direction() for a in angles])
    assert np.vdot(psi, H @ psi).real == pytest.approx(e, abs=1e-12)


def test_spectrum_bookkeeping():
    J = 1.0
    rep = spectrum(SystemSpec([0.5, 0.5], [Bond(0, 1, [-J, -J, -J])]))
    assert rep.ground_degeneracy == 1 and rep.gap == pytest.approx(J)
    rep = spectrum(SystemSpec([0.5, 0.5], [Bond(0, 1, [J, J, J])]))
    assert rep.ground_degeneracy == 3


def test_verify_eigenstate_dimension_mismatch():
    with pytest.raises(ValidationError):
        verify_eigenstate(np.eye(4), np.ones(2), 1.0)


def test_critical_field_rejects_non_eigenstate():
    sys_ = SystemSpec([0.5, 0.5], [Bond(0, 1, [1.0, 0.2, -0.3])])
    with pytest.raises(NotFactorized):
        critical_parallel_field(sys_, [Angles(0.4, 0.2), Angles(1.0, 2.0)])


def test_critical_field_zero_for_ferromagnet():
    sys_ = SystemSpec([0.5, 0.5, 0.5], [Bond(0, 1, [1, 1, 1]), Bond(1, 2, [1, 1, 1])])
    cf = critical_parallel_field(sys_, [Angles(0.3, 0.2)] * 3)
    assert cf.h_c == 0.0
