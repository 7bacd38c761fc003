import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdiode import diode as dd
from qdiode import slh
from qdiode.errors import NumericalInvariantError, RegimeError, UndefinedEfficiencyError


def optimal(d, **kw):
    return slh.DiodeParams.optimal(d, **kw)


# --- scattering matrices --------------------------------------------------------------

def test_weak_detuning_transmittance_matrix():
    sm = dd.scattering(optimal(1e-3, alpha=0.01, beta=0.01))
    assert abs(sm.t_alpha - 400 / 601) <= 1e-3
    assert sm.t_beta <= 1e-3
    assert np.allclose(sm.t, [[1 / 3, 0], [2 / 3, 1]], atol=2e-3)
    assert abs(sm.s[1, 0] - sm.s[0, 1]) >= 0.5
    sm.check_low_power()


def test_adiabatic_closed_forms():
    a, d = 0.01, 1e-3
    sm = dd.scattering(optimal(d, alpha=a, beta=a), mode=dd.ADIABATIC)
    assert sm.regime_tag == dd.ADIABATIC
    den = 6 * a**2 + d**2
    assert math.isclose(sm.t_alpha, 4 * a**2 / den, rel_tol=1e-6)
    assert math.isclose(abs(sm.s[0, 0]), (2 * a**2 - d**2) / den, rel_tol=1e-6)
    assert math.isclose(sm.r_beta, 1, rel_tol=1e-9)


def test_reciprocity_at_zero_detuning():
    sm = dd.scattering(slh.DiodeParams(alpha=0.01, beta=0.01))
    assert abs(sm.t_alpha - sm.t_beta) <= 1e-6


def test_missing_drive_side_borrows_amplitude():
    one = dd.scattering(optimal(1e-3, alpha=0.01))
    both = dd.scattering(optimal(1e-3, alpha=0.01, beta=0.01))
    assert np.allclose(one.t, both.t, atol=1e-14)
    with pytest.raises(ValueError):
        dd.scattering(optimal(1e-3))


def test_scattering_mode_validation():
    with pytest.raises(ValueError):
        dd.scattering(optimal(1e-3, alpha=0.01), mode="guess")
    with pytest.raises(RegimeError):
        dd.scattering(optimal(1e-3, alpha=0.3), mode=dd.ADIABATIC)
    with pytest.raises(RegimeError):
        dd.scattering(slh.DiodeParams(domega1=0.01, dphi=0.02, alpha=0.01), mode=dd.ADIABATIC)


def test_flux_bound_violation_is_reported():
    bad = dd.ScatteringMatrices(s=np.zeros((2, 2)), t=np.array([[0.6, 0], [0.6, 1]]),
                                regime_tag=dd.FULL_NUMERIC)
    with pytest.raises(NumericalInvariantError):
        bad.check_low_power()
    with pytest.raises(ValueError):
        dd.ScatteringMatrices(s=np.zeros((2, 2)), t=np.zeros((2, 2)), regime_tag="other")


@pytest.mark.parametrize("a,b,d", [(0.01, 0.01, 1e-3), (0.05, 0.05, 0.05),
                                   (0.03, 0.01, 0.01), (0.05, 0.02, 1e-3)])
def test_adiabatic_matches_full(a, b, d):
    p = optimal(d, alpha=a, beta=b)
    gap = np.max(np.abs(dd.scattering(p, dd.ADIABATIC).t - dd.scattering(p).t))
    assert gap <= min(0.05, 3 * (a**2 + b**2 + d**2))


drive = st.floats(0.005, 0.3)
detune = st.floats(-0.1, 0.1)


@settings(max_examples=20, deadline=None)
@given(detune, detune, st.floats(-1, 1), drive)
def test_atom_swap_symmetry(w1, w2, dphi, a):
    t = dd.scattering(slh.DiodeParams(domega1=w1, domega2=w2, dphi=dphi, alpha=a, beta=a))
    u = dd.scattering(slh.DiodeParams(domega1=w2, domega2=w1, dphi=dphi, alpha=a, beta=a))
    assert abs(t.t_alpha - u.t_beta) <= 1e-8
    assert abs(t.t_beta - u.t_alpha) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(detune, st.floats(-1, 1), st.floats(0.005, 0.05))
def test_low_power_flux_bounds(w1, dphi, a):
    dd.scattering(slh.DiodeParams(domega1=w1, dphi=dphi, alpha=a, beta=a)).check_low_power()


# --- efficiency -----------------------------------------------------------------------

def test_efficiency_examples():
    assert dd.efficiency_from(0.4, 0.4) == 0
    e = dd.efficiency_from(0.0, 1.0)
    assert e == 0 and math.copysign(1, e) == 1
    assert math.isclose(dd.efficiency_from(2 / 3, 0), 2 / 3)
    with pytest.raises(UndefinedEfficiencyError):
        dd.efficiency_from(0, 0)


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1))
def test_efficiency_bounded_by_forward_transmittance(ta, tb):
    if ta + tb > 0:
        assert dd.efficiency_from(ta, tb) <= ta + 1e-15


def test_optimal_efficiency_near_two_thirds():
    assert abs(dd.efficiency(optimal(1e-3, alpha=0.01, beta=0.01)) - 2 / 3) <= 0.05


# --- transmittance curve ---------------------------------------------------------------

def test_transmittance_curve_examples():
    tab = dd.transmittance_curve(1e-3, [1e-8, 1e-4, 10.0])
    assert tab.t_alpha[0] <= 0.1
    assert 0.63 <= tab.t_alpha[1] <= 0.67
    assert tab.t_beta[1] <= 0.05
    assert tab.t_alpha[2] >= 0.9


def test_plateau_flatness():
    d = 1e-3
    tab = dd.transmittance_curve(d, np.geomspace(10 * d**2, 1e-2, 15))
    assert np.ptp(tab.t_alpha) <= 0.05


def test_backward_transmittance_independent_of_detuning():
    powers = [1e-4]
    tb = [dd.transmittance_curve(d, powers).t_beta[0] for d in (1e-3, 1e-2)]
    assert max(tb) <= 0.05


def test_transmittance_curve_validation():
    for bad in ([], [0.0], [-1e-3], [[1e-3]]):
        with pytest.raises(ValueError):
            dd.transmittance_curve(1e-3, bad)


def test_curve_independent_of_workers():
    grid = np.geomspace(1e-6, 1, 6)
    one = dd.transmittance_curve(1e-3, grid)
    two = dd.transmittance_curve(1e-3, grid, workers=2)
    assert np.array_equal(one.t_alpha, two.t_alpha) and np.array_equal(one.t_beta, two.t_beta)


# --- efficiency map ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_map():
    return dd.efficiency_map((-0.02, 0.02), (-0.02, 0.02), alpha=0.01, resolution=9)


def test_map_ridge_and_resonant_row(small_map):
    step = small_map.dphi_grid[1] - small_map.dphi_grid[0]
    x, y, e = small_map.argmax
    # with the axis measured as pi - phi the optimal slice is x = -domega1
    assert abs(x + y) <= step + 1e-15
    assert 0.6 <= e <= 0.7
    zero = int(np.argmin(np.abs(small_map.domega1_grid)))
    assert small_map.domega1_grid[zero] == 0
    assert np.max(small_map.eff[:, zero]) <= 0.05


def test_map_independent_of_workers(small_map):
    again = dd.efficiency_map((-0.02, 0.02), (-0.02, 0.02), alpha=0.01, resolution=9, workers=3)
    assert np.array_equal(again.eff, small_map.eff)
    assert again.argmax == small_map.argmax


def test_map_validation():
    with pytest.raises(ValueError):
        dd.efficiency_map(resolution=7)
    with pytest.raises(ValueError):
        dd.efficiency_map(resolution=(8, 4))
    with pytest.raises(ValueError):
        dd.efficiency_map(alpha=0, resolution=8)
    with pytest.raises(ValueError):
        dd.efficiency_map(dphi_range=(0.1, -0.1), resolution=8)
    with pytest.raises(NumericalInvariantError):
        dd.EfficiencyMap(np.zeros(1), np.zeros(1), np.array([[1.5]]), (0, 0, 1.5), 0.01)
