import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_router import model
from photon_router.params import FIG1_PARAMS, SystemParams, angular


def test_cooperativity_and_enhanced_decay_at_operating_point():
    assert model.cooperativity(FIG1_PARAMS) == pytest.approx(3.0, abs=0.01)
    assert model.enhanced_decay(FIG1_PARAMS) == pytest.approx(36.4, abs=0.1)


def test_calibrate_drive_inverts_nbar():
    p = FIG1_PARAMS
    for target in (1e-6, 1e-3, 0.093, 0.7):
        ep = model.calibrate_drive(p, target)
        assert model.empty_cavity_nbar(p.with_(drive_ep=ep)) == pytest.approx(target)


def test_input_flux():
    p = FIG1_PARAMS.with_(drive_ep=10.0)
    assert model.input_flux(p) == pytest.approx(
        angular(10.0) ** 2 / (2 * angular(300.0)))


def test_linear_response_empty_cavity_transmission():
    # resonant empty cavity: <a> = ep kappa / (kappa^2 + h^2)
    p = FIG1_PARAMS.with_(drive_ep=1.0)
    lr = model.linear_response(p, atom_present=False)
    kappa, h = angular(p.kappa), angular(p.h)
    a_expect = angular(1.0) * kappa / (kappa**2 + h**2)
    assert lr.a_amp == pytest.approx(a_expect, rel=1e-12)
    assert lr.t0 == pytest.approx(0.7625, abs=2e-4)
    assert lr.r0 == pytest.approx(0.00343, abs=1e-4)


def test_linear_response_with_atom_routing():
    p = FIG1_PARAMS.with_(drive_ep=1.0)
    lr = model.linear_response(p, atom_present=True)
    assert lr.t0 == pytest.approx(0.00577, abs=2e-4)
    assert lr.r0 == pytest.approx(0.645, abs=2e-3)


def test_full_solver_matches_linear_oracle_weak_drive():
    p = FIG1_PARAMS.with_(drive_ep=model.calibrate_drive(FIG1_PARAMS, 1e-6))
    for atom in (True, False):
        lr = model.linear_response(p, atom_present=atom)
        rho, space = model.solve_steady(p, atom_present=atom)
        i_t, i_r = model.output_fluxes(p, space, rho)
        p_in = model.input_flux(p)
        assert i_t / p_in == pytest.approx(lr.t0, rel=1e-2)
        assert i_r / p_in == pytest.approx(lr.r0, rel=1e-2)


@settings(max_examples=25, deadline=None)
@given(
    g=st.floats(5.0, 80.0),
    kex=st.floats(50.0, 400.0),
    ki=st.floats(0.0, 50.0),
    h=st.floats(0.0, 40.0),
    kx=st.floats(0.0, 2.0 * math.pi),
    dap=st.floats(-150.0, 150.0),
)
def test_flux_balance_random_params(g, kex, ki, h, kx, dap):
    p = SystemParams(g_tw=g, kappa_ex=kex, kappa_i=ki, h=h, delta_ap=dap, kx=kx)
    p = p.with_(drive_ep=model.calibrate_drive(p, 2e-4))
    rho, space = model.solve_steady(p)
    assert model.flux_balance_residual(p, space, rho) < 1e-8


def test_analytic_overcoupled_closed_forms():
    t0, r0, g2t, g2r = model.analytic_overcoupled(3.0)
    assert t0 == pytest.approx(1.0 / 49.0)
    assert r0 == pytest.approx(36.0 / 49.0)
    assert g2t == pytest.approx(35.0**2)
    assert g2r == 0.0


def test_spectra_shapes():
    p = FIG1_PARAMS.with_(drive_ep=model.calibrate_drive(FIG1_PARAMS, 1e-6))
    grid = np.array([-600.0, 0.0, 600.0])
    with_atom = model.spectra(p, grid, atom_present=True)
    empty = model.spectra(p, grid, atom_present=False)
    # atom: deep dip at resonance; empty: moderate dip; both recover off line
    assert with_atom.transmission[1] < 0.02
    assert with_atom.reflection[1] > 0.5
    assert empty.transmission[1] == pytest.approx(0.762, abs=0.005)
    assert with_atom.transmission[0] > 0.9
    assert empty.reflection[0] < 1e-3


def test_effective_model_resonant_decay():
    em = model.effective_model(FIG1_PARAMS.with_(drive_ep=1.0))
    assert em.gamma_enhanced == pytest.approx(model.enhanced_decay(FIG1_PARAMS),
                                              rel=2e-3)
    assert em.cooperativity == pytest.approx(3.0, abs=0.01)


def test_effective_g2_closed_form_limits():
    taus = np.array([0.0, 1e9])
    vals = model.effective_g2_closed_form(taus, 36.4)
    assert vals[0] == 0.0
    assert vals[1] == pytest.approx(1.0)


def test_with_background_direction():
    assert model.with_background(0.0, 0.04) > 0.0
    assert model.with_background(1.0, 0.04) == pytest.approx(1.0)
    assert model.with_background(5.0, 0.04) < 5.0


def test_saturation_monotone_transmission():
    rows = model.saturation_curve(FIG1_PARAMS, [1e-3, 0.05, 0.5],
                                  kx_samples=8, g_samples=8)
    t0s = [r.t0 for r in rows]
    assert t0s == sorted(t0s)
    assert all(r.g2_r0 < 1.0 for r in rows)


def test_routing_efficiency_weak_drive():
    xi = model.routing_efficiency(FIG1_PARAMS, 1e-6, kx_samples=8, g_samples=8)
    assert 0.6 <= xi <= 0.75
