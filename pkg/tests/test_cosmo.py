"""Tests for background profiles, per-mode data, transport, and spectra."""

import math
import os
import tempfile

import numpy as np
import pytest

from wicklab.chaos import ChaosState
from wicklab.cosmo import (
    FLRWBackground,
    ModeRun,
    connection_antiholomorphic,
    connection_blocks,
    connection_holomorphic,
    connection_momentum,
    connection_physical,
    connection_schrodinger,
    constant_background,
    covariant_rate_matrix,
    de_sitter_background,
    dual_path_report,
    evolve_mode_heisenberg,
    evolve_mode_schrodinger,
    heisenberg_chain_matrix,
    heisenberg_printed_matrix,
    lambda_grid_flat,
    mode_observables,
    mode_parameters,
    mode_rates,
    mode_rates_fd,
    mode_vacuum_state,
    particle_spectrum,
    power_law_background,
    read_spectrum_csv,
    static_propagator_phases,
    tabulated_background,
    tanh_background,
    transport_residuals,
    write_mode_json,
    write_spectrum_csv,
)
from wicklab.gaussian import Covariance
from wicklab.symtensor import SymTensor


def gram(cutoff, delta_q):
    return np.diag([math.factorial(n) * delta_q**n for n in range(cutoff + 1)])


def metric_adjoint(mat, cutoff, delta_q):
    g = gram(cutoff, delta_q)
    return np.linalg.inv(g) @ mat.conj().T @ g


def mixed_state(background, lam, t0, cutoff, amplitudes):
    """Normalized single-mode state with the given low-degree amplitudes."""
    dq = mode_parameters(background, lam, t0).delta_q
    raw = np.zeros(cutoff + 1, dtype=complex)
    raw[: len(amplitudes)] = amplitudes
    weights = np.array([math.factorial(n) * dq**n for n in range(cutoff + 1)])
    raw /= math.sqrt(float(np.sum(weights * np.abs(raw) ** 2)))
    coeffs = {
        n: SymTensor(n, 1, {(0,) * n: raw[n]})
        for n in range(cutoff + 1)
        if raw[n] != 0
    }
    state = ChaosState("holomorphic", Covariance(np.array([[dq]])), cutoff, coeffs)
    return state, raw


# ---------------------------------------------------------------------------
# backgrounds


def test_constant_background_is_static():
    bg = constant_background(a0=2.0, mass=0.5, comoving_volume=3.0)
    for t in (-5.0, 0.0, 7.3):
        assert bg.scale(t) == 2.0
        assert bg.rate(t) == 0.0
        assert bg.hubble(t) == 0.0
        assert bg.weight(t) == 8.0 * 3.0


def test_de_sitter_rate_is_hubble_times_scale():
    bg = de_sitter_background(a0=1.3, hubble=0.21)
    for t in (-1.0, 0.0, 2.5):
        assert bg.rate(t) == pytest.approx(0.21 * bg.scale(t), rel=1e-14)
        assert bg.hubble(t) == pytest.approx(0.21, rel=1e-14)


def test_power_law_background_domain_and_rates():
    bg = power_law_background(a0=1.0, exponent=0.5, t0=2.0)
    assert bg.scale(2.0) == pytest.approx(1.0)
    assert bg.rate(2.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        bg.scale(-1.0)  # outside the domain
    with pytest.raises(ValueError):
        bg.scale(0.0)  # scale factor vanishes


def test_tanh_background_asymptotically_static():
    bg = tanh_background(1.0, 1.4, t0=0.5, width=0.7)
    assert bg.scale(-40.0) == pytest.approx(1.0, abs=1e-12)
    assert bg.scale(40.0) == pytest.approx(1.4, abs=1e-12)
    assert abs(bg.rate(-40.0)) < 1e-12
    assert abs(bg.rate(40.0)) < 1e-12
    assert bg.rate(0.5) == pytest.approx(0.4 * 0.5 / 0.7, rel=1e-12)


def test_background_validation():
    with pytest.raises(ValueError):
        constant_background(a0=-1.0)
    with pytest.raises(ValueError):
        constant_background(a0=1.0, curvature=2)
    with pytest.raises(ValueError):
        constant_background(a0=1.0, mass=-0.1)
    with pytest.raises(ValueError):
        constant_background(a0=1.0, comoving_volume=0.0)
    shrinking = FLRWBackground(scale_factor=lambda t: 1.0 - t, scale_rate=lambda t: -1.0)
    with pytest.raises(ValueError):
        shrinking.scale(2.0)


def test_tabulated_background_matches_analytic_profile():
    analytic = de_sitter_background(a0=1.0, hubble=0.15)
    ts = np.linspace(-2.0, 2.0, 201)
    bg = tabulated_background(ts, [analytic.scale(t) for t in ts])
    for t in (-1.3, 0.0, 0.77, 1.9):
        assert bg.scale(t) == pytest.approx(analytic.scale(t), rel=1e-8)
        assert bg.rate(t) == pytest.approx(analytic.rate(t), rel=1e-6)


def test_tabulated_background_validation():
    with pytest.raises(ValueError):
        tabulated_background([0.0, 1.0, 0.5, 2.0], [1.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        tabulated_background([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        tabulated_background([0.0, 1.0, 2.0, 3.0], [1.0, -1.0, 1.0, 1.0])


# ---------------------------------------------------------------------------
# per-mode parameters and rates


def test_mode_parameter_reference_values():
    bg = constant_background(a0=1.0, mass=1.0)
    p = mode_parameters(bg, 0.0, 0.0)
    assert (p.theta, p.delta, p.kappa) == (1.0, 1.0, 1.0)
    bg2 = constant_background(a0=2.0, mass=0.0, comoving_volume=1.0)
    q = mode_parameters(bg2, 4.0, 0.0)
    assert (q.theta, q.delta, q.kappa) == (1.0, 1.0, 1.0)
    assert q.weight == 8.0
    assert q.mass_fraction == 0.0
    assert q.omega2 == math.inf


def test_kappa_and_delta_are_exact_inverses():
    rng = np.random.default_rng(7)
    bg = de_sitter_background(a0=1.1, hubble=0.3, mass=0.7)
    for _ in range(20):
        lam = float(rng.uniform(0.0, 9.0))
        t = float(rng.uniform(-1.0, 1.0))
        p = mode_parameters(bg, lam, t)
        assert p.kappa * p.delta == pytest.approx(1.0, rel=1e-14)
        assert p.kappa_q * p.delta_q == pytest.approx(1.0, rel=1e-14)
        assert p.energy == p.kappa


def test_mode_rates_vanish_on_static_background():
    bg = constant_background(a0=1.7, mass=0.9)
    r = mode_rates(bg, 2.3, 1.0)
    assert r.hubble == 0.0
    assert r.rate == 0.0
    assert r.delta_dot == 0.0 and r.kappa_dot == 0.0
    assert r.delta_q_dot == 0.0 and r.kappa_q_dot == 0.0
    assert r.weight_rate == 0.0


def test_mode_rates_product_rule():
    bg = de_sitter_background(a0=1.0, hubble=0.25, mass=1.2)
    p = mode_parameters(bg, 3.0, 0.4)
    r = mode_rates(bg, 3.0, 0.4)
    scale = abs(r.delta_dot * p.kappa)
    assert abs(r.delta_dot * p.kappa + p.delta * r.kappa_dot) < 1e-15 * scale
    assert abs(r.delta_q_dot * p.kappa_q + p.delta_q * r.kappa_q_dot) < 1e-15 * scale


def test_mode_rate_approaches_four_hubble_at_large_eigenvalue():
    bg = de_sitter_background(a0=1.0, hubble=0.1, mass=1.0)
    r = mode_rates(bg, 1e12, 0.0)
    assert r.rate / r.hubble == pytest.approx(4.0, abs=1e-10)
    # and the mass-dominated limit: eigenvalue zero gives rate 3 * hubble
    r0 = mode_rates(bg, 0.0, 0.0)
    assert r0.rate / r0.hubble == pytest.approx(3.0, abs=1e-14)


def test_mode_rates_match_finite_differences():
    for bg in (
        de_sitter_background(a0=1.0, hubble=0.2, mass=0.8),
        tanh_background(1.0, 1.3, t0=0.0, width=1.1, mass=1.0),
    ):
        for lam, t in ((0.5, 0.2), (4.0, -0.4)):
            analytic = mode_rates(bg, lam, t)
            fd = mode_rates_fd(bg, lam, t)
            assert fd["delta_q_dot"] == pytest.approx(analytic.delta_q_dot, rel=1e-6)
            assert fd["kappa_q_dot"] == pytest.approx(analytic.kappa_q_dot, rel=1e-6)
            assert fd["delta_mixed_dot"] == pytest.approx(
                analytic.delta_mixed_dot, rel=1e-6
            )
            assert fd["energy_dot"] == pytest.approx(analytic.energy_dot, rel=1e-6)
            assert fd["weight_dot"] == pytest.approx(
                analytic.weight_rate * mode_parameters(bg, lam, t).weight, rel=1e-6
            )


def test_mode_parameters_rejects_bad_eigenvalues():
    bg = constant_background(a0=1.0, mass=1.0)
    with pytest.raises(ValueError):
        mode_parameters(bg, -0.5, 0.0)
    massless = constant_background(a0=1.0, mass=0.0)
    with pytest.raises(ValueError):
        mode_parameters(massless, 0.0, 0.0)


# ---------------------------------------------------------------------------
# connections and transport


def test_connection_vanishes_exactly_when_static():
    bg = constant_background(a0=1.4, mass=1.0)
    word = connection_blocks(bg, 2.0, 0.7)
    assert word.number == 0.0
    assert word.lower2 == 0.0
    assert word.raise2 == 0.0
    assert word.constant == 0.0


def test_connection_coefficients_linear_in_expansion_rate():
    slow = de_sitter_background(a0=1.0, hubble=0.05, mass=1.0)
    fast = de_sitter_background(a0=1.0, hubble=0.10, mass=1.0)
    w1 = connection_blocks(slow, 1.5, 0.0)
    w2 = connection_blocks(fast, 1.5, 0.0)
    assert w2.number == 2.0 * w1.number
    assert w2.lower2 == 2.0 * w1.lower2
    assert w2.raise2 == 2.0 * w1.raise2


def test_connection_number_word_is_shared():
    bg = tanh_background(1.0, 1.3, width=0.9, mass=0.8)
    p = mode_parameters(bg, 2.0, 0.3)
    r = mode_rates(bg, 2.0, 0.3)
    words = [
        connection_holomorphic(p, r),
        connection_antiholomorphic(p, r),
        connection_schrodinger(p, r),
        connection_momentum(p, r),
    ]
    for w in words:
        assert w.number == pytest.approx(0.5 * r.rate, rel=1e-14)
        assert w.number_part().number == w.number
        assert w.gamma_part().number == 0.0


def test_connection_remainder_is_antiadjoint():
    bg = de_sitter_background(a0=1.0, hubble=0.17, mass=1.1)
    p = mode_parameters(bg, 1.2, 0.5)
    r = mode_rates(bg, 1.2, 0.5)
    cutoff = 9
    for build in (connection_schrodinger, connection_momentum, connection_physical):
        gamma = build(p, r).gamma_part().matrix(cutoff)
        adj = metric_adjoint(gamma, cutoff, p.delta_q)
        # degree-shifting words lose their top entries to truncation, so
        # compare on columns the shift cannot reach
        keep = cutoff - 1
        assert np.max(np.abs((adj + gamma)[:keep, :keep])) < 1e-12


def test_connection_ladder_coefficients():
    bg = de_sitter_background(a0=1.0, hubble=0.2, mass=1.0)
    p = mode_parameters(bg, 2.0, 0.0)
    r = mode_rates(bg, 2.0, 0.0)
    word = connection_momentum(p, r)
    ladder = word.ladder_coefficients(p)
    assert ladder["adag_a"] == pytest.approx(0.5 * r.rate * p.kappa_q, rel=1e-14)
    # the mixing pair is skew: equal magnitudes, opposite signs
    assert ladder["aa"] == pytest.approx(-ladder["adag_adag"], rel=1e-14)
    h, c = r.hubble, r.mass_fraction
    assert ladder["adag_adag"] == pytest.approx(-0.25 * h * (c + 2.0) * p.kappa_q, rel=1e-14)
    assert ladder["const"] == 0.0


def cell_residual(observable, connection, factor, cutoff):
    nabla = covariant_rate_matrix(observable, connection, cutoff)
    expected = factor * observable.matrix(cutoff)
    keep = cutoff + 1 - 3
    return float(np.max(np.abs((nabla - expected)[:, :keep])))


def test_transported_pair_cells_holomorphic():
    bg = tanh_background(1.0, 1.25, width=0.8, mass=1.0)
    for lam, t in ((0.7, -0.5), (3.0, 0.4)):
        p = mode_parameters(bg, lam, t)
        r = mode_rates(bg, lam, t)
        conn = connection_holomorphic(p, r)
        obs = mode_observables(p, r)
        assert cell_residual(obs["phi_up"], conn, 0.5 * r.rate, 10) < 1e-12
        assert cell_residual(obs["pi_down"], conn, -0.5 * r.rate, 10) < 1e-12


def test_transported_pair_cells_antiholomorphic():
    # the weighted pair picks up the pairing-weight drift: both cells scale by
    # hubble*(c+2)/2, field down, momentum up
    bg = de_sitter_background(a0=1.0, hubble=0.14, mass=0.9)
    for lam, t in ((0.5, 0.0), (2.5, 0.8)):
        p = mode_parameters(bg, lam, t)
        r = mode_rates(bg, lam, t)
        conn = connection_antiholomorphic(p, r)
        obs = mode_observables(p, r)
        factor = 0.5 * r.hubble * (r.mass_fraction + 2.0)
        assert cell_residual(obs["phi_down"], conn, -factor, 10) < 1e-12
        assert cell_residual(obs["pi_up"], conn, factor, 10) < 1e-12


def test_transported_pair_cells_schrodinger():
    bg = tanh_background(1.0, 1.25, width=0.8, mass=1.0)
    for lam, t in ((0.7, -0.5), (3.0, 0.4)):
        p = mode_parameters(bg, lam, t)
        r = mode_rates(bg, lam, t)
        conn = connection_schrodinger(p, r)
        obs = mode_observables(p, r)
        assert cell_residual(obs["phi_up"], conn, 0.0, 10) < 1e-12
        assert cell_residual(obs["pi_down"], conn, 0.0, 10) < 1e-12


def test_transported_pair_cells_momentum():
    bg = tanh_background(1.0, 1.25, width=0.8, mass=1.0)
    for lam, t in ((0.7, -0.5), (3.0, 0.4)):
        p = mode_parameters(bg, lam, t)
        r = mode_rates(bg, lam, t)
        conn = connection_momentum(p, r)
        obs = mode_observables(p, r)
        assert cell_residual(obs["phi_down"], conn, 0.0, 10) < 1e-12
        assert cell_residual(obs["pi_up"], conn, 0.0, 10) < 1e-12


def test_physical_transport_residuals_vanish():
    backgrounds = [
        de_sitter_background(a0=1.0, hubble=0.12, mass=0.8),
        tanh_background(1.0, 1.3, t0=0.0, width=1.0, mass=1.0),
        power_law_background(a0=1.0, exponent=0.6, t0=1.0, mass=1.0),
    ]
    for bg in backgrounds:
        for lam in (0.4, 1.5, 6.0):
            res = transport_residuals(bg, lam, 1.1, cutoff=10)
            assert res["phi_down"] < 1e-10
            assert res["pi_up"] < 1e-10


def test_observable_pairs_are_canonical():
    bg = de_sitter_background(a0=1.2, hubble=0.2, mass=1.0)
    p = mode_parameters(bg, 1.7, 0.3)
    r = mode_rates(bg, 1.7, 0.3)
    obs = mode_observables(p, r)
    cutoff = 10
    eye = np.eye(cutoff + 1)
    for phi_name, pi_name in (("phi_up", "pi_down"), ("phi_down", "pi_up")):
        phi = obs[phi_name].matrix(cutoff)
        pi = obs[pi_name].matrix(cutoff)
        comm = phi @ pi - pi @ phi
        keep = cutoff - 1
        assert np.max(np.abs((comm - 1j * eye)[:keep, :keep])) < 1e-12


def test_connection_blocks_is_the_physical_word():
    bg = tanh_background(1.0, 1.2, width=0.9, mass=1.0)
    p = mode_parameters(bg, 2.2, 0.1)
    r = mode_rates(bg, 2.2, 0.1)
    assert connection_blocks(bg, 2.2, 0.1) == connection_physical(p, r)


# ---------------------------------------------------------------------------
# ladder transport runs


def test_static_run_produces_no_mixing():
    bg = constant_background(a0=1.0, mass=1.0)
    run = evolve_mode_heisenberg(bg, 2.0, (0.0, 5.0), n_out=11)
    assert np.max(np.abs(run.v)) < 1e-12
    assert np.max(np.abs(run.u - 1.0)) < 1e-12
    assert np.max(np.abs(run.ccr_residual)) < 1e-12
    assert np.max(np.abs(run.norm - 1.0)) < 1e-12


def test_heisenberg_run_reverses_to_start():
    bg = tanh_background(1.0, 1.2, t0=0.0, width=0.8, mass=1.0)
    lam = 1.3
    forward = evolve_mode_heisenberg(bg, lam, (-8.0, 8.0))
    assert abs(forward.v[-1]) > 1e-2  # the transition genuinely mixes

    from wicklab.cosmo.flows import _integrate
    from wicklab.cosmo import heisenberg_flow_rhs

    def rhs(t, y):
        du, dv = heisenberg_flow_rhs(bg, lam, t, (y[0], y[1]))
        return np.array([du, dv], dtype=complex)

    grid = np.linspace(8.0, -8.0, 65)
    back, _ = _integrate(
        rhs, grid, np.array([forward.u[-1], forward.v[-1]]), "rk45", 1e-8, 1e-10, 16
    )
    assert abs(back[-1][0] - 1.0) < 1e-6
    assert abs(back[-1][1]) < 1e-6


def test_heisenberg_norm_functional_follows_closed_form():
    bg = de_sitter_background(a0=1.0, hubble=0.15, mass=1.0)
    run = evolve_mode_heisenberg(bg, 2.0, (0.0, 4.0))
    assert run.diagnostics["max_norm_drift"] < 1e-6
    # the functional drifts away from one on purpose; make sure the
    # diagnostic is not trivially comparing against a constant
    assert abs(run.norm[-1] - 1.0) > 1e-3


def test_heisenberg_commutator_tracks_initial_weight():
    # the transported commutator equals the weightless covariance times the
    # *initial* pairing weight; the recorded residual against the full
    # instantaneous covariance is the weight drift
    bg = de_sitter_background(a0=1.0, hubble=0.15, mass=1.0)
    lam = 2.0
    run = evolve_mode_heisenberg(bg, lam, (0.0, 4.0))
    w0 = mode_parameters(bg, lam, 0.0).weight
    dq0 = mode_parameters(bg, lam, 0.0).delta_q
    for i, t in enumerate(run.t):
        p = mode_parameters(bg, lam, float(t))
        assert run.norm[i] * dq0 == pytest.approx(w0 * p.delta, rel=1e-6)
        assert run.ccr_residual[i] == pytest.approx(
            run.norm[i] * dq0 - p.delta_q, rel=1e-12, abs=1e-14
        )


def test_rk4_matches_adaptive_solver():
    bg = tanh_background(1.0, 1.2, t0=0.0, width=0.8, mass=1.0)
    adaptive = evolve_mode_heisenberg(bg, 1.3, (-8.0, 8.0))
    fixed = evolve_mode_heisenberg(bg, 1.3, (-8.0, 8.0), method="rk4", substeps=64)
    assert np.max(np.abs(adaptive.u - fixed.u)) < 1e-6
    assert np.max(np.abs(adaptive.v - fixed.v)) < 1e-6


def test_rk4_runs_are_bit_reproducible():
    bg = tanh_background(1.0, 1.2, t0=0.0, width=0.8, mass=1.0)
    one = evolve_mode_heisenberg(bg, 1.3, (-4.0, 4.0), method="rk4", substeps=16)
    two = evolve_mode_heisenberg(bg, 1.3, (-4.0, 4.0), method="rk4", substeps=16)
    assert np.array_equal(one.u, two.u)
    assert np.array_equal(one.v, two.v)


def test_printed_path_differs_from_chain():
    bg = de_sitter_background(a0=1.0, hubble=0.1, mass=1.0)
    chain = evolve_mode_heisenberg(bg, 1.0, (0.0, 3.0))
    printed = evolve_mode_heisenberg(bg, 1.0, (0.0, 3.0), path="printed")
    assert abs(chain.u[-1] - printed.u[-1]) > 1e-3


def test_dual_path_report_structure():
    bg = de_sitter_background(a0=1.0, hubble=0.12, mass=0.9)
    report = dual_path_report(bg, [0.5, 2.0, 8.0], [0.0, 0.7, 1.4])
    assert report["primary_path"] == "chain"
    assert not report["agrees"]
    assert report["max_abs_difference"] > 0.1
    # the whole difference is the pairing-weight-rate term
    assert report["difference_matches_structure"]
    assert report["max_structure_residual"] < 1e-12
    assert len(report["samples"]) == 9

    static = dual_path_report(constant_background(a0=1.0, mass=1.0), [1.0], [0.0])
    assert static["agrees"]
    assert static["max_abs_difference"] == 0.0


def test_chain_and_printed_matrices_are_symmetric():
    bg = de_sitter_background(a0=1.0, hubble=0.2, mass=1.0)
    for builder in (heisenberg_chain_matrix, heisenberg_printed_matrix):
        m = builder(bg, 1.5, 0.3)
        assert m.shape == (2, 2)
        assert m[0, 1] == m[1, 0]
        assert m[0, 0] == m[1, 1]


def test_mode_run_validation():
    t = np.linspace(0.0, 1.0, 3)
    with pytest.raises(ValueError):
        ModeRun(
            lam=1.0, kind="heisenberg", t=t, norm=np.ones(3),
            ccr_residual=np.zeros(3), u=np.full(3, 0.5 + 0j), v=np.zeros(3, complex),
        )
    with pytest.raises(ValueError):
        ModeRun(lam=1.0, kind="nonsense", t=t, norm=np.ones(3), ccr_residual=np.zeros(3))
    with pytest.raises(ValueError):
        ModeRun(lam=1.0, kind="schrodinger", t=t, norm=np.ones(3), ccr_residual=np.zeros(2))


# ---------------------------------------------------------------------------
# modified wave flow


def test_static_wave_flow_matches_propagator_phases():
    bg = constant_background(a0=1.0, mass=1.0)
    lam, cutoff = 2.0, 8
    state, raw = mixed_state(bg, lam, 0.0, cutoff, [0.6, 0.4, 0.25j, 0.0, 0.1])
    run = evolve_mode_schrodinger(
        bg, lam, state, (0.0, 2.0), n_out=5, rtol=1e-11, atol=1e-13
    )
    phases = static_propagator_phases(bg, lam, 0.0, 2.0, cutoff)
    assert np.max(np.abs(run.psi[-1] - phases * raw)) < 1e-8
    assert run.diagnostics["max_norm_drift"] < 1e-8


def test_static_vacuum_evolves_by_phase_only():
    bg = constant_background(a0=1.0, mass=1.0)
    vac = mode_vacuum_state(bg, 2.0, 0.0, cutoff=6)
    run = evolve_mode_schrodinger(bg, 2.0, vac, (0.0, 3.0), n_out=7)
    assert np.max(np.abs(np.abs(run.psi[:, 0]) - 1.0)) < 1e-10
    assert np.max(np.abs(run.psi[:, 1:])) < 1e-12


def test_wave_norm_conserved_only_with_connection():
    bg = tanh_background(1.0, 1.15, t0=0.0, width=1.0, mass=1.0)
    lam, cutoff = 1.3, 10
    state, _ = mixed_state(bg, lam, -8.0, cutoff, [0.8, 0.35, 0.15j])
    run = evolve_mode_schrodinger(bg, lam, state, (-8.0, 8.0), n_out=17)
    assert run.diagnostics["max_norm_drift"] < 1e-6
    assert not run.diagnostics["leak_flag"]
    control = evolve_mode_schrodinger(
        bg, lam, state, (-8.0, 8.0), n_out=17, connection="none"
    )
    assert control.diagnostics["max_norm_drift"] > 1e-5


def test_wave_flow_populates_even_degrees_from_vacuum():
    # the mixing terms create quanta in pairs
    bg = tanh_background(1.0, 1.2, t0=0.0, width=0.8, mass=1.0)
    vac = mode_vacuum_state(bg, 1.0, -6.0, cutoff=8)
    run = evolve_mode_schrodinger(bg, 1.0, vac, (-6.0, 6.0), n_out=9)
    final = run.psi[-1]
    assert abs(final[2]) > 1e-3
    assert abs(final[4]) > 1e-6
    assert np.max(np.abs(final[1::2])) < 1e-12


def test_truncation_leak_flag_and_error():
    bg = tanh_background(1.0, 1.5, t0=0.0, width=0.6, mass=1.0)
    vac3 = mode_vacuum_state(bg, 0.3, -6.0, cutoff=3)
    flagged = evolve_mode_schrodinger(bg, 0.3, vac3, (-6.0, 6.0), n_out=5)
    assert flagged.diagnostics["leak_flag"]
    with pytest.raises(RuntimeError):
        evolve_mode_schrodinger(bg, 0.3, vac3, (-6.0, 6.0), n_out=5, on_leak="error")


def test_wave_flow_input_validation():
    bg = constant_background(a0=1.0, mass=1.0)
    vac = mode_vacuum_state(bg, 2.0, 0.0, cutoff=5)
    # covariance belongs to a different eigenvalue
    with pytest.raises(ValueError):
        evolve_mode_schrodinger(bg, 3.0, vac, (0.0, 1.0))
    # unnormalized state
    dq = mode_parameters(bg, 2.0, 0.0).delta_q
    bad = ChaosState(
        "holomorphic",
        Covariance(np.array([[dq]])),
        5,
        {0: SymTensor(0, 1, {(): 2.0})},
    )
    with pytest.raises(ValueError):
        evolve_mode_schrodinger(bg, 2.0, bad, (0.0, 1.0))
    with pytest.raises(ValueError):
        evolve_mode_schrodinger(bg, 2.0, vac, (0.0, 1.0), connection="half")
    with pytest.raises(ValueError):
        evolve_mode_schrodinger(bg, 2.0, vac, (0.0, 1.0), method="euler")


# ---------------------------------------------------------------------------
# spectra and serialization


def test_spectrum_static_background_is_empty():
    bg = constant_background(a0=1.0, mass=1.0)
    table = particle_spectrum(bg, [0.5, 1.0, 2.0], (0.0, 4.0))
    assert np.max(table.column("absv2")) < 1e-12
    assert np.max(table.column("n_expect")) < 1e-12
    assert not table.metadata["partial"]


def test_spectrum_rows_are_sorted_and_self_consistent():
    bg = tanh_background(1.0, 1.2, t0=0.0, width=0.8, mass=1.0)
    lams = [2.0, 0.5, 1.0]
    table = particle_spectrum(bg, lams, (-6.0, 6.0))
    got = table.column("lambda")
    assert np.all(np.diff(got) > 0)
    run = evolve_mode_heisenberg(bg, 1.0, (-6.0, 6.0))
    absu2 = abs(run.u[-1]) ** 2
    absv2 = abs(run.v[-1]) ** 2
    row = table.rows[[i for i, r in enumerate(table.rows) if r["lambda"] == 1.0][0]]
    assert row["absv2"] == pytest.approx(absv2, rel=1e-12)
    assert row["n_expect"] == pytest.approx(absv2 / (absu2 - absv2), rel=1e-12)


def test_spectrum_stable_under_tolerance_refinement():
    bg = tanh_background(1.0, 1.2, t0=0.0, width=0.8, mass=1.0)
    lams = [0.5, 1.5]
    coarse = particle_spectrum(bg, lams, (-6.0, 6.0), rtol=1e-8, atol=1e-10)
    fine = particle_spectrum(bg, lams, (-6.0, 6.0), rtol=1e-9, atol=1e-11)
    for a, b in zip(coarse.rows, fine.rows):
        assert abs(a["absv2"] - b["absv2"]) / b["absv2"] < 1e-5


def test_spectrum_isolates_failing_modes():
    bg = constant_background(a0=1.0, mass=1.0)
    table = particle_spectrum(bg, [-1.0, 1.0, 2.0], (0.0, 1.0))
    assert table.metadata["partial"]
    assert len(table.metadata["failures"]) == 1
    assert table.metadata["failures"][0]["lambda"] == -1.0
    assert len(table.rows) == 2


def test_spectrum_workers_agree_with_serial():
    bg = tanh_background(1.0, 1.15, t0=0.0, width=1.0, mass=1.0)
    lams = lambda_grid_flat(2.0, 4)
    serial = particle_spectrum(bg, lams, (-5.0, 5.0))
    threaded = particle_spectrum(bg, lams, (-5.0, 5.0), workers=3)
    for a, b in zip(serial.rows, threaded.rows):
        assert a == b


def test_lambda_grid_flat():
    grid = lambda_grid_flat(2.0, 4)
    assert len(grid) == 4
    assert grid[-1] == pytest.approx(4.0)
    assert np.all(grid > 0)
    roots = np.sqrt(grid)
    assert np.allclose(np.diff(roots), roots[1] - roots[0])
    with pytest.raises(ValueError):
        lambda_grid_flat(-1.0, 4)
    with pytest.raises(ValueError):
        lambda_grid_flat(1.0, 0)


def test_spectrum_csv_roundtrip_and_metadata():
    bg = tanh_background(1.0, 1.1, t0=0.0, width=1.0, mass=1.0)
    table = particle_spectrum(bg, [0.5, 2.0], (-4.0, 4.0))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "spectrum.csv")
        write_spectrum_csv(table, path)
        with open(path) as fh:
            text = fh.read()
        assert "# conventions:" in text
        assert "# tool_version:" in text
        header = [l for l in text.splitlines() if not l.startswith("#")][0]
        assert header == "lambda,absv2,n_expect,norm_drift,ccr_residual"
        back = read_spectrum_csv(path)
        assert back.metadata["conventions"] == table.metadata["conventions"]
        for a, b in zip(table.rows, back.rows):
            for col in ("lambda", "absv2", "n_expect", "norm_drift", "ccr_residual"):
                assert b[col] == pytest.approx(a[col], rel=0, abs=0) or b[col] == a[col]


def test_mode_json_writer():
    import json

    bg = tanh_background(1.0, 1.1, t0=0.0, width=1.0, mass=1.0)
    run = evolve_mode_heisenberg(bg, 1.0, (-4.0, 4.0), n_out=9)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "mode.json")
        write_mode_json(run, path, extra_metadata={"note": "check"})
        payload = json.loads(open(path).read())
    assert payload["lambda"] == 1.0
    assert payload["tool_version"]
    assert payload["conventions"]["n_expect"].startswith("abs(v)**2")
    assert payload["metadata"] == {"note": "check"}
    assert len(payload["u"]) == 9
    # complex series are stored as [re, im] pairs
    assert len(payload["u"][0]) == 2
    assert payload["u"][0][0] == pytest.approx(1.0)


def test_static_spectrum_matches_tabulated_equivalent():
    analytic = constant_background(a0=1.2, mass=1.0)
    ts = np.linspace(-1.0, 5.0, 50)
    tab = tabulated_background(ts, np.full(50, 1.2), mass=1.0)
    sa = particle_spectrum(analytic, [1.0, 3.0], (0.0, 4.0))
    sb = particle_spectrum(tab, [1.0, 3.0], (0.0, 4.0))
    for a, b in zip(sa.rows, sb.rows):
        assert abs(a["absv2"] - b["absv2"]) < 1e-6
        assert abs(a["n_expect"] - b["n_expect"]) < 1e-6
