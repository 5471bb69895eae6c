import json

import numpy as np
import pytest

from koitershell.config import parse_config, with_overrides
from koitershell.errors import DegenerateWindow
from koitershell.ensemble import (_reduce, drift_estimate, ensemble_report, estimate_growth_rate,
                                  exceedance_probability, merge, run_ensemble, wilson_interval,
                                  write_ensemble_outputs)
from koitershell.gridio import read_grid_dump
from koitershell.solver import simulate_path
from koitershell.spectral import build_grid

# the coarse figure-3 flow steepens past the small-slope bound within t = 0.1
pytestmark = pytest.mark.filterwarnings("ignore::koitershell.errors.SmallDisplacementViolated")

SMALL = """
    equation = sde
    noise.fields = figure3
    grid.n1 = 16
    grid.n2 = 16
    grid.ly1 = 4pi
    grid.ly2 = 4pi
    grid.origin1 = -2pi
    grid.origin2 = -2pi
    initial.eta = gaussian:pi,pi
    time.dt = 0.01
    time.t_end = 0.1
    time.snapshots = 0.05,0.1
    ensemble.thresholds = 0.5,0.99
    master_seed = 3
"""


@pytest.fixture(scope="module")
def cfg():
    return parse_config(SMALL)


@pytest.fixture(scope="module")
def eight(cfg):
    return run_ensemble(cfg, 8)


def test_single_path_has_zero_variance(cfg):
    st = run_ensemble(cfg, 1)
    assert st.n_paths == 1
    assert np.all(st.var_field == 0)
    res = simulate_path(cfg, 0)
    np.testing.assert_array_equal(st.mean_field[-1], res.snapshots[-1][1])


def test_mean_and_variance_match_direct_computation(cfg, eight):
    fields = np.array([[eta for _, eta in simulate_path(cfg, p).snapshots] for p in range(8)])
    np.testing.assert_allclose(eight.mean_field, fields.mean(axis=0), atol=1e-14)
    np.testing.assert_allclose(eight.var_field, fields.var(axis=0, ddof=1), atol=1e-14)


def test_without_noise_paths_are_identical(cfg):
    st = run_ensemble(with_overrides(cfg, noise="none"), 4)
    assert np.all(st.var_field == 0)
    assert len({s.max_abs_eta for s in st.per_path_summaries}) == 1


def test_halves_merge_bitwise(cfg, eight):
    both = merge(run_ensemble(cfg, 4, 0), run_ensemble(cfg, 4, 4))
    assert both.mean_field.tobytes() == eight.mean_field.tobytes()
    assert both.m2_field.tobytes() == eight.m2_field.tobytes()
    assert both.per_path_summaries == eight.per_path_summaries


def test_worker_count_does_not_change_results(cfg, eight):
    par = run_ensemble(cfg, 8, workers=2)
    assert par.mean_field.tobytes() == eight.mean_field.tobytes()
    assert par.m2_field.tobytes() == eight.m2_field.tobytes()
    np.testing.assert_array_equal(par.snapshot_energies, eight.snapshot_energies)


def test_uneven_tree_matches_direct(cfg):
    st = run_ensemble(cfg, 5)
    fields = np.array([[eta for _, eta in simulate_path(cfg, p).snapshots] for p in range(5)])
    np.testing.assert_allclose(st.var_field, fields.var(axis=0, ddof=1), atol=1e-14)


def test_merge_rejects_mismatched(cfg, eight):
    other = run_ensemble(with_overrides(cfg, **{"time.snapshots": (0.1,)}), 1)
    with pytest.raises(ValueError):
        merge(eight, other)


def test_reduce_single_item_is_identity(eight):
    assert _reduce([eight]) is eight


def test_energy_quantiles_shape(eight):
    q = eight.energy_quantiles
    assert q.shape == (2, 5)
    assert np.all(np.diff(q, axis=1) >= 0)


def test_wilson_zero_successes():
    lo, hi = wilson_interval(0, 100)
    z2 = 1.959963984540054**2
    # closed form for zero successes: z^2 / (n + z^2)
    assert lo == pytest.approx(0.0, abs=1e-15)
    assert hi == pytest.approx(z2 / (100 + z2), rel=1e-14)
    assert hi == pytest.approx(0.036, abs=1.5e-3)


def test_wilson_symmetric_at_half():
    lo, hi = wilson_interval(50, 100)
    assert lo + hi == pytest.approx(1.0, abs=1e-15)
    assert lo < 0.5 < hi


def test_wilson_textbook_value():
    # 81 of 263, the standard worked example: (0.2553, 0.3662)
    lo, hi = wilson_interval(81, 263)
    assert (lo, hi) == pytest.approx((0.2553, 0.3662), abs=1e-4)


def test_wilson_rejects_empty():
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_exceedance_probability(eight):
    for x in eight.thresholds:
        p, lo, hi = exceedance_probability(eight, x)
        assert lo <= p <= hi
        assert p == eight.count_exceeding(x) / 8
    # transport keeps the range [0, 1] up to discretisation error
    assert exceedance_probability(eight, 2.0)[0] == 0.0
    assert exceedance_probability(eight, 0.5)[0] == 1.0


def test_growth_rate_of_exponential():
    t = np.linspace(0, 3, 301)
    slope, r2 = estimate_growth_rate(np.stack([t, 5 * np.exp(2 * t)], axis=1), (1.0, 3.0))
    assert slope == pytest.approx(2.0, abs=1e-10)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_growth_rate_of_unstable_run():
    cfg = parse_config("""
        params.nu_e = -2
        initial.eta = sin:1,0,0.001
        initial.eta_dot = sin:1,0,0.001
        grid.n1 = 16
        grid.n2 = 16
        time.dt = 0.01
        time.t_end = 5
        time.diag_every = 5
    """)
    res = simulate_path(cfg)
    slope, _ = estimate_growth_rate(np.stack([res.column("t"), res.column("eta_l2")], 1),
                                    (1.0, 5.0))
    assert slope == pytest.approx(1.0, abs=1e-3)


def test_growth_rate_of_traveling_wave():
    # eta = sin(y1 - w t) with w = sqrt(3): the norm is constant
    cfg = parse_config("""
        params.nu_e = 1
        params.beta = 1
        initial.eta = sin:1,0,0.1
        initial.eta_dot = cos:1,0,-0.17320508075688773
        grid.n1 = 16
        grid.n2 = 16
        time.dt = 0.01
        time.t_end = 5
        time.diag_every = 5
    """)
    res = simulate_path(cfg)
    slope, _ = estimate_growth_rate(np.stack([res.column("t"), res.column("eta_l2")], 1),
                                    (1.0, 5.0))
    assert abs(slope) <= 1e-2


@pytest.mark.parametrize("window", [(0.0, 5.0), (2.0, 1.0), (1.0, 1.05)])
def test_degenerate_windows(window):
    t = np.linspace(0.5, 3, 251)
    with pytest.raises(DegenerateWindow):
        estimate_growth_rate(np.stack([t, np.exp(t)], 1), window)


def test_growth_rate_rejects_zero_norm():
    t = np.linspace(0, 1, 20)
    with pytest.raises(DegenerateWindow):
        estimate_growth_rate(np.stack([t, np.zeros_like(t)], 1), (0.0, 1.0))


def test_drift_of_shifted_mode():
    g = build_grid(32, 32, (4 * np.pi,) * 2)
    y1, y2 = g.mesh
    eta0 = np.cos(0.5 * y1) + np.cos(0.5 * y2)
    d1, d2 = drift_estimate(eta0, np.cos(0.5 * (y1 - 0.3)) + np.cos(0.5 * (y2 + 0.2)), g)
    assert (d1, d2) == pytest.approx((0.3, -0.2), abs=1e-12)


def test_report_and_outputs(cfg, eight, tmp_path):
    rep = ensemble_report(eight, cfg)
    assert rep["n_paths"] == 8 and len(rep["exceedance"]) == 2
    assert "stand-in" in rep["buckling_criterion"]
    files = write_ensemble_outputs(eight, cfg, tmp_path, figures=False)
    assert json.loads((tmp_path / "ensemble_report.json").read_text()) == json.loads(
        json.dumps(rep))
    var, meta = read_grid_dump(tmp_path / "ensemble_var_01.ksh")
    np.testing.assert_array_equal(var, eight.var_field[1])
    assert meta.t == pytest.approx(0.1)
    lines = (tmp_path / "ensemble_summary.csv").read_text().splitlines()
    assert len(lines) == 9 and len(files) == 2 + 4
