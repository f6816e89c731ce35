import math

import numpy as np
import pytest

from quickwake import (
    DiscreteInstance,
    brute_force_value,
    likelihood_atoms,
)

INSTANCE = DiscreteInstance(
    horizon=3, n=2, g0=(0.7, 0.3), g1=(0.2, 0.8),
    rho=0.1, p=0.2, lambda_s=0.3, lambda_f=5.0,
)


def test_zero_horizon_is_stopping_cost():
    inst = DiscreteInstance(
        horizon=0, n=1, g0=(0.7, 0.3), g1=(0.2, 0.8),
        rho=0.0, p=0.5, lambda_s=0.1, lambda_f=5.0,
    )
    assert brute_force_value(inst, 0.3) == 5.0 * 0.7
    assert brute_force_value(inst, 1.0) == 0.0


def test_one_slot_value_matches_hand_expansion():
    """Horizon 1, one sensor: every branch written out explicitly."""
    inst = DiscreteInstance(
        horizon=1, n=1, g0=(0.7, 0.3), g1=(0.2, 0.8),
        rho=0.0, p=0.2, lambda_s=0.3, lambda_f=5.0,
    )
    pi = 0.25
    pred = pi + (1 - pi) * 0.2
    stop_now = 5.0 * (1 - pi)
    sleep = pi + 5.0 * (1 - pred)  # next slot stopping is forced
    watch = pi + 0.3
    for x in (0, 1):
        mass = pred * inst.g1[x] + (1 - pred) * inst.g0[x]
        posterior = pred * inst.g1[x] / mass
        watch += mass * 5.0 * (1 - posterior)
    expected = min(stop_now, sleep, watch)
    assert brute_force_value(inst, pi) == pytest.approx(expected, abs=1e-14)


def test_value_nonincreasing_in_horizon():
    values = [
        brute_force_value(
            DiscreteInstance(
                horizon=k, n=2, g0=(0.7, 0.3), g1=(0.2, 0.8),
                rho=0.0, p=0.2, lambda_s=0.3, lambda_f=5.0,
            ),
            0.2,
        )
        for k in range(5)
    ]
    assert values[0] == 4.0
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-14


def test_value_bounds_and_monotone_interpolation_points():
    for pi0 in np.linspace(0.0, 1.0, 9):
        v = brute_force_value(INSTANCE, float(pi0))
        assert 0.0 <= v <= INSTANCE.lambda_f * (1.0 - pi0) + 1e-14


def test_enumeration_bounds_enforced():
    with pytest.raises(ValueError, match="enumeration bound"):
        DiscreteInstance(
            horizon=5, n=1, g0=(0.7, 0.3), g1=(0.2, 0.8),
            rho=0.0, p=0.2, lambda_s=0.3, lambda_f=5.0,
        )
    with pytest.raises(ValueError, match="enumeration bound"):
        DiscreteInstance(
            horizon=2, n=3, g0=(0.7, 0.3), g1=(0.2, 0.8),
            rho=0.0, p=0.2, lambda_s=0.3, lambda_f=5.0,
        )
    with pytest.raises(ValueError, match="sum to 1"):
        DiscreteInstance(
            horizon=2, n=1, g0=(0.7, 0.4), g1=(0.2, 0.8),
            rho=0.0, p=0.2, lambda_s=0.3, lambda_f=5.0,
        )
    with pytest.raises(ValueError, match="identical"):
        DiscreteInstance(
            horizon=2, n=1, g0=(0.7, 0.3), g1=(0.7, 0.3),
            rho=0.0, p=0.2, lambda_s=0.3, lambda_f=5.0,
        )


def test_likelihood_atoms_weights_and_ratios():
    atoms = likelihood_atoms(INSTANCE)
    assert atoms.n == 2
    for m in (1, 2):
        assert math.isclose(float(np.sum(atoms.w0[m])), 1.0, abs_tol=1e-14)
        assert math.isclose(float(np.sum(atoms.w1[m])), 1.0, abs_tol=1e-14)
        # Atom k is "k of m sensors reported 1".
        for k in range(m + 1):
            expected_llr = k * math.log(0.8 / 0.3) + (m - k) * math.log(0.2 / 0.7)
            assert atoms.llr0[m][k] == pytest.approx(expected_llr, abs=1e-12)
            assert atoms.llr1[m][k] == pytest.approx(expected_llr, abs=1e-12)
            comb = math.comb(m, k)
            assert atoms.w0[m][k] == pytest.approx(comb * 0.3**k * 0.7 ** (m - k))
            assert atoms.w1[m][k] == pytest.approx(comb * 0.8**k * 0.2 ** (m - k))


def test_atoms_drive_grid_solver_to_oracle_value():
    """End-to-end coupling on one instance; the acceptance suite widens
    this to randomized draws."""
    from quickwake import BeliefGrid, Problem, operator_from_atoms, solve_finite_horizon
    from quickwake.model import ChangePrior, Costs, SensorModel

    grid = BeliefGrid.uniform(2001)
    op = operator_from_atoms(likelihood_atoms(INSTANCE), grid, INSTANCE.p)
    problem = Problem(
        model=SensorModel(0.0, 1.0, 1.0, 1.0),  # densities unused: atoms supplied
        prior=ChangePrior(INSTANCE.rho, INSTANCE.p),
        costs=Costs(INSTANCE.lambda_s, INSTANCE.lambda_f),
        n=INSTANCE.n,
    )
    J = solve_finite_horizon(problem, INSTANCE.horizon, "control_m", grid, operator=op)
    got = float(J(0.35))
    want = brute_force_value(INSTANCE, 0.35)
    assert got == pytest.approx(want, abs=1e-6)
