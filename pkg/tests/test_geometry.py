import numpy as np
import pytest

from koitershell import geometry as geo
from koitershell.charts import REGISTERED_CHARTS, flat_chart, get_chart
from koitershell.errors import DegenerateChart
from koitershell.geometry import Chart, SymTensor2, jet_from_function


def smooth_jet(y, amp=1.0):
    f = lambda a, b: amp * (0.5 * np.sin(a) * np.cos(2 * b) + 0.3 * np.cos(a + b))  # noqa: E731
    df = lambda a, b: (amp * (0.5 * np.cos(a) * np.cos(2 * b) - 0.3 * np.sin(a + b)),  # noqa: E731
                       amp * (-np.sin(a) * np.sin(2 * b) - 0.3 * np.sin(a + b)))
    d2f = lambda a, b: (amp * (-0.5 * np.sin(a) * np.cos(2 * b) - 0.3 * np.cos(a + b)),  # noqa: E731
                        amp * (-np.cos(a) * np.sin(2 * b) - 0.3 * np.cos(a + b)),
                        amp * (-2 * np.sin(a) * np.cos(2 * b) - 0.3 * np.cos(a + b)))
    return jet_from_function(f, df, d2f, y)


def const_jet(c, y):
    z = np.zeros(np.shape(y[0]))
    return geo.DisplacementJet(c + z, (z, z), SymTensor2(z, z, z))


# points away from the sphere poles
Y = np.meshgrid(np.linspace(0.6, 2.5, 5), np.linspace(0.0, 6.0, 7), indexing="ij")


def test_flat_frame_is_identity():
    fr = geo.evaluate_frame(flat_chart(), (0.3, 1.7))
    np.testing.assert_array_equal(fr.t1, [1, 0, 0])
    np.testing.assert_array_equal(fr.t2, [0, 1, 0])
    np.testing.assert_array_equal(fr.n, [0, 0, 1])
    assert fr.w == 1.0
    np.testing.assert_array_equal(fr.t1_star, fr.t1)
    np.testing.assert_array_equal(fr.t2_star, fr.t2)


def test_sphere_area_weight_and_unit_normal():
    fr = geo.evaluate_frame(get_chart("sphere:2"), (np.pi / 2, 0.0))
    assert fr.w == pytest.approx(4.0, abs=1e-14)
    assert np.linalg.norm(fr.n) == pytest.approx(1.0, abs=1e-15)


def test_sphere_area_weight_by_finite_differences():
    chart = get_chart("sphere:2")
    y = (1.1, 0.4)
    h = 1e-5
    t1 = (chart.phi(y[0] + h, y[1]) - chart.phi(y[0] - h, y[1])) / (2 * h)
    t2 = (chart.phi(y[0], y[1] + h) - chart.phi(y[0], y[1] - h)) / (2 * h)
    w_fd = np.linalg.norm(np.cross(t1, t2))
    assert geo.evaluate_frame(chart, y).w == pytest.approx(w_fd, rel=1e-9)
    assert w_fd == pytest.approx(4 * np.sin(1.1), rel=1e-9)


@pytest.mark.parametrize("cid", REGISTERED_CHARTS)
def test_dual_basis(cid):
    fr = geo.evaluate_frame(get_chart(cid), Y)
    dot = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
    np.testing.assert_allclose(dot(fr.t1_star, fr.t1), 1.0, atol=1e-13)
    np.testing.assert_allclose(dot(fr.t2_star, fr.t2), 1.0, atol=1e-13)
    np.testing.assert_allclose(dot(fr.t1_star, fr.t2), 0.0, atol=1e-13)
    np.testing.assert_allclose(dot(fr.t2_star, fr.t1), 0.0, atol=1e-13)


def test_flat_forms():
    A, B = geo.fundamental_forms(flat_chart(), Y)
    np.testing.assert_array_equal(A.matrix(), np.broadcast_to(np.eye(2), Y[0].shape + (2, 2)))
    assert B.max_abs() == 0.0


def test_sphere_forms_closed_form():
    A, B = geo.fundamental_forms(get_chart("sphere:2"), (np.pi / 2, 0.0))
    np.testing.assert_allclose(A.matrix(), np.diag([4.0, 4.0]), atol=1e-14)
    # outward normal t1 x t2 / w: B = -diag(R, R sin^2 y1)
    np.testing.assert_allclose(B.matrix(), np.diag([-2.0, -2.0]), atol=1e-14)
    a_up = np.linalg.inv(A.matrix())
    b_up = a_up @ B.matrix() @ a_up
    np.testing.assert_allclose(np.abs(b_up), a_up / 2, atol=1e-15)


def test_cylinder_forms_closed_form():
    A, B = geo.fundamental_forms(get_chart("cylinder:1"), Y)
    np.testing.assert_allclose(A.matrix(), np.broadcast_to(np.eye(2), Y[0].shape + (2, 2)), atol=1e-14)
    b = B.matrix()
    np.testing.assert_allclose(np.abs(b[..., 0, 0]), 1.0, atol=1e-14)
    np.testing.assert_allclose(b[..., 0, 1], 0.0, atol=1e-14)
    np.testing.assert_allclose(b[..., 1, 1], 0.0, atol=1e-14)


def test_change_of_metric_zero_for_zero_jet():
    for cid in REGISTERED_CHARTS:
        G = geo.change_of_metric(get_chart(cid), Y, const_jet(0.0, Y))
        assert G.max_abs() == 0.0


def test_flat_change_of_metric_is_gradient_outer_product():
    jet = smooth_jet(Y)
    G = geo.change_of_metric(flat_chart(), Y, jet)
    p, q = jet.grad_eta
    np.testing.assert_allclose(G.a11, 0.5 * p * p, atol=1e-15)
    np.testing.assert_allclose(G.a12, 0.5 * p * q, atol=1e-15)
    np.testing.assert_allclose(G.a22, 0.5 * q * q, atol=1e-15)


def test_sphere_constant_displacement_is_concentric_sphere():
    R, c = 2.0, 0.3
    chart = get_chart("sphere:2")
    G = geo.change_of_metric(chart, Y, const_jet(c, Y))
    A, _ = geo.fundamental_forms(chart, Y)
    expect = A * (0.5 * ((R + c) ** 2 - R**2) / R**2)
    assert (G - expect).max_abs() < 1e-13


def test_modified_curvature_zero_for_zero_jet():
    for cid in REGISTERED_CHARTS:
        R = geo.modified_change_of_curvature(get_chart(cid), Y, const_jet(0.0, Y))
        assert R.max_abs() < 1e-14


def test_flat_modified_curvature_equals_hessian_at_critical_point():
    # eta = cos y1 cos y2 has zero gradient at (0, 0)
    y = (0.0, 0.0)
    jet = jet_from_function(lambda a, b: np.cos(a) * np.cos(b),
                            lambda a, b: (-np.sin(a) * np.cos(b), -np.cos(a) * np.sin(b)),
                            lambda a, b: (-np.cos(a) * np.cos(b), np.sin(a) * np.sin(b),
                                          -np.cos(a) * np.cos(b)), y)
    R = geo.modified_change_of_curvature(flat_chart(), y, jet)
    assert (R - jet.hess_eta).max_abs() == 0.0


@pytest.mark.parametrize("cid", REGISTERED_CHARTS)
def test_modified_curvature_matches_direct_evaluation(cid):
    chart = get_chart(cid)
    jet = smooth_jet(Y, 0.2)
    a = geo.modified_change_of_curvature(chart, Y, jet)
    b = geo._direct_modified_change_of_curvature(chart, Y, jet)
    assert (a - b).max_abs() < 1e-12


@pytest.mark.parametrize("cid", ["sphere:2", "cylinder:1", "torus:2,0.5", "graph:wave"])
def test_modified_curvature_linearization_is_second_order(cid):
    chart = get_chart(cid)
    jet = smooth_jet(Y)
    lin = geo.linearized_change_of_curvature(chart, Y, jet)
    errs = [(geo.modified_change_of_curvature(chart, Y, jet.scaled(t)) - lin * t).max_abs()
            for t in (1e-2, 5e-3, 2.5e-3)]
    for e0, e1 in zip(errs, errs[1:]):
        assert e0 / e1 == pytest.approx(4.0, abs=0.5)
    # |R(t eta) - t R_lin(eta)| / t^2 stays bounded
    scaled = [e / t**2 for e, t in zip(errs, (1e-2, 5e-3, 2.5e-3))]
    assert max(scaled) / min(scaled) < 1.1


def test_flat_modified_curvature_is_linear():
    jet = smooth_jet(Y)
    chart = flat_chart()
    lin = geo.linearized_change_of_curvature(chart, Y, jet)
    for t in (1e-2, 0.5, 1.0):
        assert (geo.modified_change_of_curvature(chart, Y, jet.scaled(t)) - lin * t).max_abs() < 1e-15


def test_flat_linearized_curvature_is_hessian():
    jet = smooth_jet(Y)
    assert (geo.linearized_change_of_curvature(flat_chart(), Y, jet) - jet.hess_eta).max_abs() == 0.0
    zero = geo.linearized_change_of_curvature(get_chart("sphere:2"), Y, const_jet(0.0, Y))
    assert zero.max_abs() == 0.0


def test_linearized_metric_flat_is_zero():
    eta = np.sin(Y[0]) * np.cos(Y[1])
    assert geo.linearized_change_of_metric(flat_chart(), Y, eta).max_abs() == 0.0


@pytest.mark.parametrize("cid", REGISTERED_CHARTS)
def test_linearized_metric_is_minus_eta_B(cid):
    chart = get_chart(cid)
    eta = np.sin(Y[0]) ** 2 * np.cos(Y[1] + 0.3)
    _, B = geo.fundamental_forms(chart, Y)
    assert (geo.linearized_change_of_metric(chart, Y, eta) + B * eta).max_abs() < 1e-10


def test_linearized_metric_sphere_point():
    chart = get_chart("sphere:2")
    y = (np.pi / 2, 0.0)
    _, B = geo.fundamental_forms(chart, y)
    G = geo.linearized_change_of_metric(chart, y, 0.1)
    assert (G - B * (-0.1)).max_abs() < 1e-15
    np.testing.assert_allclose(G.matrix(), np.diag([0.2, 0.2]), atol=1e-15)


def test_validate_chart_flat_ok():
    rep = geo.validate_chart(flat_chart(), 64)
    assert rep.ok and rep.min_w == 1.0


@pytest.mark.parametrize("cid", REGISTERED_CHARTS[1:])
def test_validate_registered_charts(cid):
    chart = get_chart(cid)
    if cid.startswith("sphere"):
        # the sphere chart is singular at the poles; probe a band away from them
        chart = Chart(chart.phi, chart.d_phi, chart.d2_phi, chart.d3_phi,
                      (2.0, 2 * np.pi), (0.5, 0.0))
        # the band is not a period of the chart, so only derivatives are checked
        rep = geo.validate_chart(chart, 32, period_tol=np.inf)
    else:
        rep = geo.validate_chart(chart, 32)
    assert rep.ok, rep.failures


def test_validate_chart_flags_wrong_derivative():
    good = flat_chart()
    bad = Chart(good.phi,
                lambda a, b: (good.d_phi(a, b)[0] * (1 + 1e-3), good.d_phi(a, b)[1]),
                good.d2_phi, good.d3_phi, good.extents)
    rep = geo.validate_chart(bad, 32)
    assert not rep.ok
    assert any("derivative" in f for f in rep.failures)


def test_validate_chart_flags_degenerate_tangents():
    zero = lambda a: 0.0 * np.asarray(a)  # noqa: E731
    vec = lambda x, y, z: np.stack(np.broadcast_arrays(x, y, z), -1).astype(float)  # noqa: E731
    chart = Chart(lambda a, b: vec(a, a, zero(a)),
                  lambda a, b: (vec(1 + zero(a), 1 + zero(a), zero(a)), vec(zero(a), zero(a), zero(a))),
                  lambda a, b: (vec(zero(a), zero(a), zero(a)),) * 3)
    rep = geo.validate_chart(chart, 16)
    assert not rep.ok and rep.min_w < geo.EPS_W
    with pytest.raises(DegenerateChart):
        geo.evaluate_frame(chart, (0.1, 0.2))


def test_validate_chart_rejects_tiny_probe():
    with pytest.raises(ValueError):
        geo.validate_chart(flat_chart(), 4)


def test_unknown_chart_id():
    with pytest.raises(ValueError):
        get_chart("cone:1")
