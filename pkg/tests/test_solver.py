import warnings

import numpy as np
import pytest

from koitershell.config import parse_config
from koitershell.elasticity import ShellParams
from koitershell.errors import NonFiniteState, StabilityWarning
from koitershell.fields import periodized_gaussian, smooth_random_field
from koitershell.solver import (KinematicIntegrator, ShellIntegrator, ShellState, dispersion,
                                linear_propagator, modal_invariants, run_simulation,
                                simulate_path, step_kinematic_sde, step_shell_spde)
from koitershell.spectral import build_grid
from koitershell.stochastic import make_noise_model


def test_dispersion_regimes():
    d = dispersion(ShellParams(nu_e=1.0, alpha=1.0, beta=1.0), (1, 1))
    # 1 + 2 + 4
    assert d.kind == "oscillatory" and d.symbol == 7.0 and d.rate == pytest.approx(np.sqrt(7))
    d = dispersion(ShellParams(nu_e=-2.0, alpha=1.0), (1, 0))
    assert d.kind == "unstable" and d.rate == pytest.approx(1.0)
    d = dispersion(ShellParams(nu_e=0.0, beta=0.0), (0, 0))
    assert d.kind == "neutral" and d.rate == 0.0


def test_dispersion_mass_scaling():
    d = dispersion(ShellParams(eps0=0.5, rho_s=8.0, nu_e=1.0, alpha=1.0), (1, 0))
    assert d.rate == pytest.approx(np.sqrt(2 / 4))


def test_neutral_propagator():
    dt = 0.37
    np.testing.assert_array_equal(linear_propagator(ShellParams(), (0, 0), dt),
                                  [[1.0, dt], [0.0, 1.0]])


def test_half_period_propagator():
    # symbol 1 + 1 + 1 = 3 at |k| = 1
    p = ShellParams(nu_e=1.0, alpha=1.0, beta=1.0)
    w = np.sqrt(3)
    np.testing.assert_allclose(linear_propagator(p, (1, 0), np.pi / w), -np.eye(2), atol=1e-15)


@pytest.mark.parametrize("nu", [2.0, -2.0, -1.0, 0.0])
def test_propagator_determinant(nu):
    M = linear_propagator(ShellParams(nu_e=nu, alpha=1.0), (1, 0), 0.3)
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-14)


def test_propagator_rejects_bad_dt():
    with pytest.raises(ValueError):
        linear_propagator(ShellParams(), (1, 0), 0.0)


def test_sde_zero_increments_is_identity():
    g = build_grid(32, 32, (4 * np.pi,) * 2)
    m = make_noise_model("figure3", g)
    eta = smooth_random_field(g, 1)
    out = step_kinematic_sde(eta, None, m, 0, 0, 1e-3, g, dw=np.zeros(2))
    np.testing.assert_allclose(out, eta, atol=1e-15)


def test_sde_without_noise_is_a_drift():
    g = build_grid(16, 16)
    eta = smooth_random_field(g, 2)
    f = np.full(g.shape, 0.3)
    out = step_kinematic_sde(eta, f, make_noise_model("none", g), 0, 0, 0.01, g)
    np.testing.assert_array_equal(out, eta + 0.01 * f)


def test_sde_step_matches_integrator():
    g = build_grid(32, 32, (4 * np.pi,) * 2)
    m = make_noise_model("figure3", g)
    eta = periodized_gaussian(g, (np.pi, np.pi))
    a = step_kinematic_sde(eta, None, m, 3, 5, 1e-3, g)
    b = g.ifft_full(KinematicIntegrator(m, g, 1e-3, 3).step_spectral(g.fft_full(eta), 5))
    np.testing.assert_array_equal(a, b)


def test_sde_rejects_non_finite():
    g = build_grid(16, 16)
    eta = np.full(g.shape, np.nan)
    with pytest.raises(NonFiniteState):
        step_kinematic_sde(eta, None, make_noise_model("none", g), 0, 0, 1e-3, g)


def _spectral_run(integ, xh, n):
    for s in range(n):
        xh = integ.step_spectral(xh, s)
    return xh


def test_deterministic_oscillation():
    g = build_grid(32, 32)
    p = ShellParams(nu_e=1.0, alpha=1.0, beta=1.0)
    y1 = g.mesh[0]
    state = ShellState(np.sin(y1), np.zeros(g.shape))
    integ = ShellIntegrator(p, make_noise_model("none", g), g, 1e-3)
    out = integ.to_state(_spectral_run(integ, integ.to_spectral(state), 1000), 1.0)
    np.testing.assert_allclose(out.eta, np.cos(np.sqrt(3)) * np.sin(y1), atol=1e-10)
    np.testing.assert_allclose(out.eta_dot, -np.sqrt(3) * np.sin(np.sqrt(3)) * np.sin(y1),
                               atol=1e-10)


def test_unstable_mode_growth_rate():
    # symbol -2 + |k|^4 = -1 at |k| = 1, so lambda = 1; eta_dot0 = eta0 seeds
    # the pure growing branch
    g = build_grid(16, 16)
    p = ShellParams(nu_e=-2.0, alpha=1.0)
    eta0 = 1e-3 * np.sin(g.mesh[0])
    dt = 1e-2
    integ = ShellIntegrator(p, make_noise_model("none", g), g, dt)
    xh = integ.to_spectral(ShellState(eta0, eta0.copy()))
    ts, logs = [], []
    for s in range(500):
        xh = integ.step_spectral(xh, s)
        t = (s + 1) * dt
        if 1.0 - 1e-9 <= t <= 5.0 + 1e-9:
            ts.append(t)
            logs.append(np.log(g.norm(g.ifft_full(xh[0]))))
    slope = np.polyfit(ts, logs, 1)[0]
    assert slope == pytest.approx(1.0, abs=1e-6)


def _forced_run(c, nu, dt, t_end):
    return simulate_path(parse_config(f"""
        params.nu_e = {nu}
        params.g_scal = const:{c}
        initial.eta = zero
        grid.n1 = 8
        grid.n2 = 8
        time.dt = {dt}
        time.t_end = {t_end}
        time.diag_every = 1
        time.snapshots = 0
    """))


def test_constant_forcing_equilibrium():
    # the zero mode solves m eta'' + nu eta = c from rest:
    # eta = (c / nu) (1 - cos(sqrt(nu / m) t)), oscillating about c / nu
    c, nu = 0.6, 4.0
    res = _forced_run(c, nu, 0.01, 20 * np.pi)
    level = res.column("eta_max")
    np.testing.assert_allclose(res.column("eta_min"), level, atol=1e-12)
    assert level.mean() == pytest.approx(c / nu, rel=2e-3)


def test_forcing_kicks_are_second_order():
    c, nu = 0.6, 4.0
    errs = []
    for dt in (0.02, 0.01):
        res = _forced_run(c, nu, dt, 2.0)
        exact = c / nu * (1 - np.cos(np.sqrt(nu) * res.column("t")))
        errs.append(np.abs(res.column("eta_max") - exact).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def test_deterministic_energy_conservation():
    cfg = parse_config("""
        params.nu_e = 0.5
        params.beta = 0.3
        initial.eta = gaussian:pi,pi
        initial.eta_dot = sin:1,2,0.2
        grid.n1 = 32
        grid.n2 = 32
        time.dt = 0.002
        time.t_end = 10
        time.diag_every = 50
    """)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = simulate_path(cfg).column("E_total")
    assert np.abs(e - e[0]).max() <= 1e-10 * abs(e[0])


def test_modal_invariants_conserved_in_every_regime():
    g = build_grid(16, 16)
    p = ShellParams(nu_e=-3.0, alpha=0.2, beta=0.5)
    x0 = g.fft_full(np.stack([smooth_random_field(g, 1, kmax=4),
                              smooth_random_field(g, 2, kmax=4)]))
    integ = ShellIntegrator(p, make_noise_model("none", g), g, 0.05)
    x1 = _spectral_run(integ, x0, 40)
    a, scale = modal_invariants(x0, p, g)
    b, _ = modal_invariants(x1, p, g)
    assert np.all(np.abs(a - b) <= 1e-9 * (scale + 1e-300) + 1e-20)


def test_shell_zero_noise_increments():
    g = build_grid(32, 32, (4 * np.pi,) * 2)
    p = ShellParams(nu_e=1.0)
    state = ShellState(smooth_random_field(g, 3), smooth_random_field(g, 4))
    a = step_shell_spde(state, p, make_noise_model("figure3", g), 0, 0, 1e-3, g,
                        dw_halves=(np.zeros(2), np.zeros(2)))
    b = step_shell_spde(state, p, make_noise_model("none", g), 0, 0, 1e-3, g)
    np.testing.assert_allclose(a.eta, b.eta, atol=1e-15)
    np.testing.assert_allclose(a.eta_dot, b.eta_dot, atol=1e-15)
    assert a.t == pytest.approx(1e-3)


def test_stability_warning():
    g = build_grid(8, 8)
    with pytest.warns(StabilityWarning):
        ShellIntegrator(ShellParams(nu_e=-100.0), make_noise_model("none", g), g, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", StabilityWarning)
        ShellIntegrator(ShellParams(nu_e=-100.0), make_noise_model("none", g), g, 0.01)


@pytest.mark.filterwarnings("ignore::koitershell.errors.SmallDisplacementViolated")
def test_noisy_shell_run_is_bitwise_reproducible(tmp_path):
    text = """
        params.nu_e = 1
        noise.fields = figure3
        grid.n1 = 32
        grid.n2 = 32
        grid.ly1 = 4pi
        grid.ly2 = 4pi
        initial.eta = gaussian:pi,pi
        time.dt = 0.002
        time.t_end = 0.1
        time.snapshots = 0.05,0.1
        master_seed = 9
    """
    runs = []
    for name in ("a", "b"):
        run_simulation(parse_config(text), tmp_path / name, figures=False)
        runs.append([(tmp_path / name / f"snapshot_{i:02d}.ksh").read_bytes() for i in (0, 1)]
                    + [(tmp_path / name / "diagnostics.csv").read_bytes()])
    assert runs[0] == runs[1]


def test_noise_changes_with_path():
    cfg = parse_config("""
        equation = sde
        noise.fields = figure3
        grid.n1 = 32
        grid.n2 = 32
        grid.ly1 = 4pi
        grid.ly2 = 4pi
        initial.eta = gaussian:pi,pi
        time.dt = 0.002
        time.t_end = 0.02
        time.snapshots = 0.02
    """)
    a, b = simulate_path(cfg, 0).final.eta, simulate_path(cfg, 1).final.eta
    assert not np.array_equal(a, b)
