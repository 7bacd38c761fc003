import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdiode import liouville, slh
from qdiode.errors import ValidityConditionError

small = st.floats(-0.5, 0.5, allow_nan=False)
amp = st.complex_numbers(max_magnitude=0.5, allow_nan=False, allow_infinity=False)
params = st.builds(slh.DiodeParams, gamma1=st.floats(0.2, 2), gamma2=st.floats(0.2, 2),
                   domega1=small, domega2=small, dphi=st.floats(-3, 3), alpha=amp, beta=amp)


def test_params_validation_and_optimal_slice():
    with pytest.raises(ValueError):
        slh.DiodeParams(gamma1=0)
    with pytest.raises(ValueError):
        slh.DiodeParams(alpha=complex("nan"))
    p = slh.DiodeParams.optimal(0.01, alpha=0.2)
    assert (p.domega1, p.domega2, p.dphi) == (-0.01, 0.0, -0.01)
    assert math.isclose(p.phi, math.pi - 0.01)
    assert p.input_fluxes == pytest.approx((0.04, 0.0))


@settings(max_examples=40, deadline=None)
@given(params)
def test_cascade_hamiltonian_hermitian(p):
    t = slh.build_cascade(p)
    assert np.max(np.abs(t.h - t.h.conj().T)) <= 1e-12
    assert all(op.shape == (4, 4) for op in t.l)
    assert np.array_equal(t.s, np.eye(2))


@settings(max_examples=30, deadline=None)
@given(params)
def test_drive_offset_in_right_output(p):
    t = slh.build_cascade(p)
    assert cmath.isclose(t.l_right[0, 0], cmath.exp(1j * p.phi) * p.alpha, abs_tol=1e-14)


def test_bare_plus_exchange_in_symmetric_basis():
    # Hamiltonian matrix of the undriven optimal slice, G, D, B, E order
    for d in (1e-2, 1e-3):
        t = slh.build_cascade(slh.DiodeParams.optimal(d))
        got = slh.to_symmetric_basis(t.h)
        want = 0.5 * np.array([[d, 0, 0, 0], [0, d, d, 0], [0, d, -d, 0], [0, 0, 0, -d]])
        assert np.max(np.abs(got - want)) <= 2 * d**2


def test_resonant_pi_output_is_bright_coupling():
    t = slh.build_cascade(slh.DiodeParams())
    _, _, l1, l2 = slh.atom_operators(slh.DiodeParams())
    assert np.allclose(t.l_right, l2 - l1, atol=1e-15)
    # pure bright coupling: the dark state is annihilated
    assert np.allclose(t.l_right @ slh.KET_D, 0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(params)
def test_refactor_gives_same_liouvillian(p):
    t = slh.build_cascade(p)
    parts = slh.refactor(t, p)
    l_ref = liouville.assemble_from(parts.h, parts.lbar)
    assert np.max(np.abs(l_ref.mat - liouville.assemble(t).mat)) <= 1e-10


def test_refactor_coupling_and_drive_terms():
    p = slh.DiodeParams(gamma1=0.7, gamma2=1.3, dphi=0.4)
    parts = slh.refactor(slh.build_cascade(p), p)
    coeff = parts.hc[1, 2]  # <ge| H_C |eg>
    assert math.isclose(coeff.real, 0.5 * math.sqrt(0.7 * 1.3) * math.sin(p.phi), abs_tol=1e-15)
    assert np.allclose(parts.hd, 0)
    at_pi = slh.refactor(slh.build_cascade(slh.DiodeParams()), slh.DiodeParams())
    assert np.allclose(at_pi.hc, 0, atol=1e-16)


def test_symmetric_basis_round_trip_and_examples():
    assert np.allclose(slh.to_symmetric_basis(np.eye(4)), np.eye(4))
    m = np.arange(16).reshape(4, 4) * (1 + 1j)
    assert np.allclose(slh.from_symmetric_basis(slh.to_symmetric_basis(m)), m)
    s = slh.to_symmetric_basis(slh.SM1 + slh.SM2)
    # <G|.|D> = sqrt2 and <D|.|E> = sqrt2, nothing touches B
    assert math.isclose(s[0, 1].real, math.sqrt(2))
    assert math.isclose(s[1, 3].real, math.sqrt(2))
    assert np.allclose(s[:, 2], 0) and np.allclose(s[2, :], 0)
    with pytest.raises(ValueError):
        slh.to_symmetric_basis(np.eye(2))


def test_bright_dark_rates_small_delta():
    d = 1e-3
    g_b, g_d = slh.bright_dark_rates(slh.DiodeParams.optimal(d))
    eps = 1j * d / 2
    assert math.isclose(g_b, 2 * abs(1 - eps) ** 2, rel_tol=1e-6)
    assert math.isclose(g_d, 2 * abs(eps) ** 2, rel_tol=1e-6)


def test_validity_conditions_hold_on_diode():
    for p in (slh.DiodeParams.optimal(0.02, alpha=0.03), slh.DiodeParams.optimal(0.05, beta=0.04)):
        parts = slh.elimination_parts(slh.build_cascade(p))
        assert max(slh.validity_residuals(parts).values()) <= 1e-8


def _compare_reduced(a, b, d):
    red = slh.adiabatic_eliminate(slh.build_cascade(slh.DiodeParams.optimal(d, alpha=a, beta=b)))
    ref = slh.eliminated_closed_form(a, b, d)
    dev_h = np.max(np.abs(slh.traceless(red.h) - slh.traceless(ref.h)))
    dev_l = max(np.max(np.abs(x - y)) for x, y in zip(red.l, ref.l))
    return red, max(dev_h, dev_l)


@pytest.mark.parametrize("a,b,d", [(0.01, 0, 1e-3), (0.05, 0, 0.05), (0, 0.05, 0.02),
                                   (0.03, 0.02, 0.01), (0.05, 0.05, 0.05)])
def test_elimination_matches_closed_forms(a, b, d):
    red, dev = _compare_reduced(a, b, d)
    assert dev <= 5 * (d + abs(a) + abs(b)) ** 2
    assert red.meta["antihermitian_residue"] <= 1e-12
    # slow-to-fast part of the full eliminated operators is a next-order effect
    assert red.meta["fast_leakage"] <= (d + abs(a) + abs(b)) ** 2


def test_elimination_exchange_hamiltonian_scale():
    a, d = 0.01, 1e-3
    red = slh.adiabatic_eliminate(slh.build_cascade(slh.DiodeParams.optimal(d, alpha=a)))
    off = red.h[0, 1]
    assert abs(off - a * d / 2) <= (a * d / 2) * (d + a**2) * 10


def test_elimination_at_zero_decouples_dark_state():
    red = slh.adiabatic_eliminate(slh.build_cascade(slh.DiodeParams()))
    assert np.allclose(red.h, 0, atol=1e-15)
    for op in red.l:
        assert abs(op[0, 1]) <= 1e-15


def test_elimination_rejects_non_projector():
    t = slh.build_cascade(slh.DiodeParams.optimal(0.01, alpha=0.01))
    with pytest.raises(ValueError):
        slh.adiabatic_eliminate(t, np.diag([1.0, 1.0, 0.3, 0.0]))


def test_validity_conditions_hold_for_any_projector():
    # the block split makes the three conditions automatic for a genuine projector
    t = slh.build_cascade(slh.DiodeParams.optimal(0.01, alpha=0.01))
    local = np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)
    parts = slh.elimination_parts(t, local)
    assert max(slh.validity_residuals(parts, local).values()) <= 1e-15


def test_elimination_reports_violated_conditions(monkeypatch):
    t = slh.build_cascade(slh.DiodeParams.optimal(0.01, alpha=0.01))
    monkeypatch.setattr(slh, "validity_residuals", lambda parts, p0=None: {"Y P0": 1e-3})
    with pytest.raises(ValidityConditionError):
        slh.adiabatic_eliminate(t)
