import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdiode import correlations as corr
from qdiode import liouville as lv
from qdiode import slh
from qdiode.errors import UndefinedCorrelationError

SM = np.array([[0, 1], [0, 0]], dtype=complex)


def delays(d, n=60):
    return np.concatenate([[0.0], np.geomspace(1e-2, 20 / d**2, n)])


@pytest.fixture(scope="module")
def weak_left():
    a, d = 0.01, 1e-5
    p = slh.DiodeParams.optimal(d, alpha=a)
    taus = delays(d)
    return a, d, taus, {m: corr.driven_correlators(p, taus, m) for m in ("full", "eliminated")}


# --- output fields ----------------------------------------------------------------

def test_output_fields_of_single_excitations():
    at_pi = slh.build_cascade(slh.DiodeParams())
    bright = corr.output_fields(at_pi, lv.DensityMatrix.pure(slh.KET_B))
    # the bright state radiates at the full rate in both directions
    assert math.isclose(bright.flux_left, 1, rel_tol=1e-12)
    assert math.isclose(bright.flux_right, 1, rel_tol=1e-12)
    dark = corr.output_fields(at_pi, lv.dark_state())
    assert dark.total <= 1e-24
    assert corr.output_fields(at_pi, lv.ground_state()).total == 0


def test_output_fields_coherent_drive_offset():
    p = slh.DiodeParams.optimal(1e-3, alpha=0.2)
    rec = corr.output_fields(slh.build_cascade(p), lv.ground_state())
    assert math.isclose(abs(rec.amp_right), 0.2, rel_tol=1e-12)
    assert math.isclose(rec.flux_right, 0.04, rel_tol=1e-12)
    assert rec.amp_left == 0


def test_output_fields_rejects_mismatched_state():
    with pytest.raises(ValueError):
        corr.output_fields(slh.build_cascade(slh.DiodeParams()), np.eye(2) / 2)


def test_flux_record_validation():
    with pytest.raises(ValueError):
        corr.FluxRecord(amp_left=1.0, amp_right=0, flux_left=0.5, flux_right=0)


# --- single-atom oracles ------------------------------------------------------------

def driven_atom(omega):
    h = 0.5 * omega * (SM + SM.T)
    return lv.assemble_from(h, [SM])


def test_resonance_fluorescence_antibunching():
    l = driven_atom(0.4)
    ss = lv.steady_state(l)
    s = corr.correlation_series(l, SM, ss, [0.0, 0.5, 40.0])
    assert abs(s.g2[0]) <= 1e-12
    assert abs(s.g2[-1] - 1) <= 1e-10
    assert abs(s.g1[0] - 1) <= 1e-12


def test_coherent_field_statistics():
    # pure coherent offset: L = amp * identity plus nothing to scatter
    amp = 0.3 + 0.1j
    l = lv.assemble_from(np.zeros((2, 2)), [SM])
    ss = lv.steady_state(l)
    s = corr.correlation_series(l, amp * np.eye(2), ss, [0.0, 1.0, 5.0])
    assert np.allclose(s.g1, 1, atol=1e-12)
    assert np.allclose(s.g2, 1, atol=1e-12)


def test_zero_flux_is_undefined():
    l = lv.assemble_from(np.zeros((2, 2)), [SM])
    with pytest.raises(UndefinedCorrelationError):
        corr.correlation_series(l, SM, lv.steady_state(l), [0.0])


def test_negative_delay_rejected():
    l = driven_atom(0.4)
    with pytest.raises(ValueError):
        corr.correlation_series(l, SM, lv.steady_state(l), [-1.0])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0, 30))
def test_g1_bounded_and_g2_nonnegative(omega, tau):
    l = driven_atom(omega)
    s = corr.correlation_series(l, SM, lv.steady_state(l), [0.0, tau])
    assert np.all(np.abs(s.g1) <= 1 + 1e-9)
    assert np.all(s.g2 >= -1e-9)


# --- driven diode -------------------------------------------------------------------

@pytest.mark.parametrize("model", ["full", "eliminated"])
def test_zero_delay_closed_forms(weak_left, model):
    a, d, _, res = weak_left
    cf = corr.closed_form_limits(a, d)
    r = res[model]
    assert abs(r["ref"].g2_zero - cf["g2_ref_zero"]) <= 1e-3
    assert abs(r["trans"].g2_zero - cf["g2_trans_zero"]) <= 1e-3
    assert abs(r["ref"].g1_infinity - cf["g1_ref_inf"]) <= 1e-3
    assert abs(r["trans"].g1_infinity - cf["g1_trans_inf"]) <= 1e-3


@pytest.mark.parametrize("model", ["full", "eliminated"])
def test_series_endpoints(weak_left, model):
    _, _, taus, res = weak_left
    for s in res[model].values():
        assert abs(s.g1[0] - 1) <= 1e-10
        assert abs(s.g2[0] - s.g2_zero) <= 1e-9
        assert abs(s.g2[-1] - 1) <= 1e-6
        assert abs(s.g1[-1] - s.g1_infinity) <= 1e-6


def test_transmitted_g2_decays_at_switching_rate(weak_left):
    # slow tail relaxes exponentially at roughly 3 delta^2
    _, d, taus, res = weak_left
    g2 = res["eliminated"]["trans"].g2
    mask = (taus > 0.05 / d**2) & (taus < 2 / d**2)
    slope = np.polyfit(taus[mask], np.log(np.abs(g2[mask] - 1)), 1)[0]
    assert abs(-slope / d**2 - 3) <= 0.03 * 3


def test_right_driving_reflection_is_coherent():
    b = 0.03
    p = slh.DiodeParams.optimal(1e-3, beta=b)
    t = slh.build_cascade(p)
    l = lv.assemble(t)
    s = corr.correlation_series(l, t.l_right, lv.steady_state(l), [0.0, 1.0, 1e3])
    assert np.all(np.abs(s.g2 - 1) <= 4 * b**2)


def test_driven_correlators_preconditions():
    with pytest.raises(ValueError):
        corr.driven_correlators(slh.DiodeParams.optimal(1e-3, beta=0.01), [0.0])
    with pytest.raises(ValueError):
        corr.driven_correlators(slh.DiodeParams.optimal(1e-3, alpha=0.01), [0.0], model="other")


def test_default_tau_grid():
    g = corr.default_tau_grid(0.5, points=10)
    assert g[0] == 0 and math.isclose(g[-1], 40) and g.size == 11
    assert np.all(np.diff(g) > 0)
    assert corr.default_tau_grid(1.0, include_zero=False)[0] == 1e-2


# --- free-decay emission -------------------------------------------------------------

def test_dark_state_emits_mostly_to_the_left():
    left, right = corr.integrated_emission(slh.DiodeParams.optimal(0.1), lv.dark_state(), 5000)
    assert left / (left + right) >= 0.9
    assert abs(left + right - 1) <= 0.02


def test_bright_state_at_resonance_emits_symmetrically():
    left, right = corr.integrated_emission(slh.DiodeParams(), lv.DensityMatrix.pure(slh.KET_B), 100)
    assert math.isclose(left, 0.5, rel_tol=1e-9) and math.isclose(right, 0.5, rel_tol=1e-9)


def test_emission_profile_matches_integral():
    p = slh.DiodeParams.optimal(0.1)
    ts = np.linspace(0, 2000, 4001)
    recs = corr.emission_profile(p, lv.dark_state(), ts)
    left = np.array([r.flux_left for r in recs])
    right = np.array([r.flux_right for r in recs])
    want = corr.integrated_emission(p, lv.dark_state(), 2000)
    dt = ts[1] - ts[0]
    trap = lambda y: dt * (y.sum() - 0.5 * (y[0] + y[-1]))
    assert abs(trap(left) - want[0]) <= 1e-3
    assert abs(trap(right) - want[1]) <= 1e-3
    assert min(left.min(), right.min()) >= 0


def test_emission_requires_free_decay():
    with pytest.raises(ValueError):
        corr.emission_profile(slh.DiodeParams.optimal(0.1, alpha=0.1), lv.dark_state(), [0.0])
    with pytest.raises(ValueError):
        corr.integrated_emission(slh.DiodeParams.optimal(0.1, beta=0.1), lv.dark_state(), 1.0)
