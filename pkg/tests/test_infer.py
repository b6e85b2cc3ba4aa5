import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinfactory.design import coupling_family
from spinfactory.exceptions import ValidationError
from spinfactory.geometry import Angles, angular_distance, condition_residual, triad_from_angles, triad_from_direction
from spinfactory.infer import BranchPolicy, SolutionKind, enumerate_chain, oracle_scan, partner_directions

FIG_J = np.diag([1.0, 0.75, -0.2])
FIG_SEED = Angles(np.pi / 3, np.pi / 5)

vec = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.05)
mat = st.lists(st.floats(-2, 2, allow_nan=False), min_size=9, max_size=9).map(lambda v: np.reshape(v, (3, 3)))


def test_reference_partner_directions():
    sol = partner_directions(FIG_J, triad_from_angles(FIG_SEED))
    assert sol.kind is SolutionKind.TWO_BRANCH
    plus, minus = sol.solutions
    assert np.allclose(plus, [-0.78558, 0.39661, 0.47493], atol=1e-5)
    assert np.allclose(minus, [0.49984, -0.67342, 0.54467], atol=1e-5)
    assert np.degrees(Angles.from_direction(plus).theta) == pytest.approx(61.645, abs=1e-3)
    assert np.degrees(Angles.from_direction(minus).phi) == pytest.approx(306.584, abs=1e-3)


@settings(max_examples=80, deadline=None)
@given(mat, vec, st.floats(0, 2 * np.pi))
def test_partner_solutions_satisfy_conditions_in_any_gauge(J, v, gauge):
    tj = triad_from_direction(v)
    sol = partner_directions(J, tj)
    rotated = partner_directions(J, tj.rotated(gauge))
    scale = max(1.0, np.abs(J).max())
    for n in sol.solutions:
        assert condition_residual(J, triad_from_direction(n), tj) < 1e-9 * scale
        assert min(angular_distance(n, m) for m in rotated.solutions) < 1e-7


def test_degenerate_kinds():
    tj = triad_from_direction([0.2, -0.5, 0.7])
    assert partner_directions(np.zeros((3, 3)), tj).kind is SolutionKind.FREE
    u = np.array([1.0, 2.0, -0.5])
    sol = partner_directions(np.outer(u, u), tj)
    assert sol.kind is SolutionKind.SINGLE_COLLINEAR
    for n in sol.solutions:
        assert abs(abs(n @ u) / np.linalg.norm(u) - 1) < 1e-12
        assert condition_residual(np.outer(u, u), triad_from_direction(n), tj) < 1e-12
    for c in (1.0, -2.0):
        sol = partner_directions(c * np.eye(3), tj)
        assert sol.kind is SolutionKind.UNIFORM
        assert np.allclose(sol.solutions[0], tj.n)


def test_round_trip_with_design(rng):
    for _ in range(100):
        ti, tj = (triad_from_direction(rng.normal(size=3)) for _ in range(2))
        J = coupling_family(ti, tj).default_member()
        sol = partner_directions(np.diag(J), tj)
        assert min(angular_distance(n, ti.n) for n in sol.solutions) < 1e-8


@pytest.mark.parametrize("seed_site", [0, 2, 4])
def test_chain_enumeration(rng, seed_site):
    couplings = [np.diag(rng.normal(size=3)) for _ in range(4)]
    configs = enumerate_chain(couplings, FIG_SEED, seed_site=seed_site)
    assert len(configs) == 16
    assert len({c.branch_word for c in configs}) == 16
    for c in configs:
        assert np.allclose(c.directions[seed_site], FIG_SEED.direction())
        for k, J in enumerate(couplings):
            assert condition_residual(J, triad_from_direction(c.directions[k]), triad_from_direction(c.directions[k + 1])) < 1e-10
    first = enumerate_chain(couplings, FIG_SEED, "first", seed_site=seed_site)
    assert len(first) == 1 and first[0].branch_word == "0000"
    word = enumerate_chain(couplings, FIG_SEED, "word", word="0110", seed_site=seed_site)
    match = next(c for c in configs if c.branch_word == "0110")
    assert np.allclose(np.array(word[0].directions), np.array(match.directions))
    parallel = enumerate_chain(couplings, FIG_SEED, seed_site=seed_site, max_workers=2)
    assert [c.branch_word for c in parallel] == [c.branch_word for c in configs]


def test_chain_asymmetric_couplings_use_orientation(rng):
    couplings = [rng.normal(size=(3, 3)) for _ in range(3)]
    for c in enumerate_chain(couplings, FIG_SEED, seed_site=1):
        for k, J in enumerate(couplings):
            assert condition_residual(J, triad_from_direction(c.directions[k]), triad_from_direction(c.directions[k + 1])) < 1e-10


def test_chain_free_partner_uses_default():
    couplings = [np.diag([1.0, 0.5, 0.2]), np.zeros((3, 3))]
    configs = enumerate_chain(couplings, FIG_SEED, default_direction=[0, 0, 1])
    assert all(c.free_sites == [2] for c in configs)
    assert all(np.allclose(c.directions[2], [0, 0, 1]) for c in configs)


def test_chain_word_validation():
    with pytest.raises(ValidationError):
        enumerate_chain([FIG_J, FIG_J], FIG_SEED, BranchPolicy.WORD, word="012")
    with pytest.raises(ValidationError):
        enumerate_chain([FIG_J], FIG_SEED, "word", word="00")
    with pytest.raises(ValidationError):
        enumerate_chain([FIG_J], FIG_SEED, seed_site=5)


def test_oracle_scan_agrees_with_closed_form(rng):
    cases = [(FIG_J, triad_from_angles(FIG_SEED))]
    cases += [(rng.normal(size=(3, 3)), triad_from_direction(rng.normal(size=3))) for _ in range(5)]
    for J, tj in cases:
        zeros = oracle_scan(J, tj)
        sols = partner_directions(J, tj).solutions
        assert len(zeros) == 2
        for n in sols:
            assert min(angular_distance(n, z.refined) for z in zeros) < 1e-7
            assert np.degrees(min(angular_distance(n, z.direction) for z in zeros)) < 2.0


def test_oracle_grid_validation():
    with pytest.raises(ValidationError):
        oracle_scan(FIG_J, triad_from_angles(FIG_SEED), grid=(10, 20))
