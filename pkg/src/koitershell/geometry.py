"""Reference and deformed mid-surface geometry.

Every function is vectorised: the point ``y = (y1, y2)`` may hold scalars
or equally shaped arrays, and 3-vectors carry a trailing axis of length 3.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateChart

EPS_W = 1e-10


@dataclass(frozen=True)
class Chart:
    """Parametrisation ``phi`` of the mid-surface and its partial derivatives.

    ``d_phi`` returns ``(phi_1, phi_2)``, ``d2_phi`` returns
    ``(phi_11, phi_12, phi_22)`` and the optional ``d3_phi`` returns
    ``(phi_111, phi_112, phi_122, phi_222)``.  All derivatives must be
    periodic over ``extents``; ``phi`` itself only up to a constant lattice
    translation (graph charts such as the flat one are not periodic in R^3).
    """

    phi: Callable
    d_phi: Callable
    d2_phi: Callable
    d3_phi: Optional[Callable] = None
    extents: tuple = (2 * np.pi, 2 * np.pi)
    origin: tuple = (0.0, 0.0)
    name: str = "chart"


@dataclass(frozen=True)
class SymTensor2:
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray

    def matrix(self):
        a11, a12, a22 = np.broadcast_arrays(self.a11, self.a12, self.a22)
        return np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)

    def __add__(self, other):
        return SymTensor2(self.a11 + other.a11, self.a12 + other.a12, self.a22 + other.a22)

    def __sub__(self, other):
        return SymTensor2(self.a11 - other.a11, self.a12 - other.a12, self.a22 - other.a22)

    def __mul__(self, s):
        return SymTensor2(s * self.a11, s * self.a12, s * self.a22)

    __rmul__ = __mul__

    def components(self):
        return (self.a11, self.a12, self.a22)

    def max_abs(self):
        return float(max(np.max(np.abs(c)) for c in self.components()))


@dataclass(frozen=True)
class Frame:
    t1: np.ndarray
    t2: np.ndarray
    n: np.ndarray
    w: np.ndarray
    t1_star: np.ndarray
    t2_star: np.ndarray


@dataclass(frozen=True)
class DisplacementJet:
    eta: np.ndarray
    grad_eta: tuple
    hess_eta: SymTensor2

    def __post_init__(self):
        vals = [self.eta, *self.grad_eta, *self.hess_eta.components()]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ValueError("displacement jet has non-finite entries")

    def scaled(self, tau):
        return DisplacementJet(
            tau * np.asarray(self.eta),
            (tau * np.asarray(self.grad_eta[0]), tau * np.asarray(self.grad_eta[1])),
            self.hess_eta * tau,
        )


def jet_from_function(f, df, d2f, y):
    """Jet of an analytic scalar ``f`` with gradient ``df`` and Hessian ``d2f``."""
    h11, h12, h22 = d2f(*y)
    return DisplacementJet(f(*y), tuple(df(*y)), SymTensor2(h11, h12, h22))


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _point(chart, y):
    y1, y2 = y
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    o1, o2 = chart.origin
    l1, l2 = chart.extents
    y1 = o1 + np.mod(y1 - o1, l1)
    y2 = o2 + np.mod(y2 - o2, l2)
    return y1, y2


def _check_w(w):
    wmin = np.min(w)
    if not wmin >= EPS_W:
        raise DegenerateChart(f"area weight {wmin:.3e} below {EPS_W:g}: tangents are dependent")


def evaluate_frame(chart, y):
    y = _point(chart, y)
    t1, t2 = chart.d_phi(*y)
    c = np.cross(t1, t2)
    w = np.linalg.norm(c, axis=-1)
    _check_w(w)
    n = c / w[..., None]
    t1s = np.cross(t2, n) / w[..., None]
    t2s = -np.cross(t1, n) / w[..., None]
    return Frame(t1, t2, n, w, t1s, t2s)


def fundamental_forms(chart, y):
    """First and second fundamental forms ``(A, B)``."""
    frame = evaluate_frame(chart, y)
    p11, p12, p22 = chart.d2_phi(*_point(chart, y))
    t1, t2, n = frame.t1, frame.t2, frame.n
    A = SymTensor2(_dot(t1, t1), _dot(t1, t2), _dot(t2, t2))
    B = SymTensor2(_dot(n, p11), _dot(n, p12), _dot(n, p22))
    return A, B


@dataclass
class _NormalJet:
    """Unit normal with first and second partials and the chart data used."""

    frame: Frame
    d2: tuple
    dn: tuple
    d2n: tuple = field(default=None)


def _normal_first(t1, t2, d2):
    p11, p12, p22 = d2
    c = np.cross(t1, t2)
    w = np.linalg.norm(c, axis=-1)[..., None]
    n = c / w
    # d_i t1 = phi_1i, d_i t2 = phi_2i
    dc = (np.cross(p11, t2) + np.cross(t1, p12), np.cross(p12, t2) + np.cross(t1, p22))
    dn = tuple((d - n * _dot(n, d)[..., None]) / w for d in dc)
    return c, w, n, dc, dn


def _normal_second_analytic(t1, t2, d2, d3):
    p11, p12, p22 = d2
    p111, p112, p122, p222 = d3
    c, w, n, dc, dn = _normal_first(t1, t2, d2)
    # d_j d_i c for (i, j) in (1,1), (1,2), (2,2)
    d2c = (
        np.cross(p111, t2) + 2 * np.cross(p11, p12) + np.cross(t1, p112),
        np.cross(p112, t2) + np.cross(p11, p22) + np.cross(p12, p12) + np.cross(t1, p122),
        np.cross(p122, t2) + 2 * np.cross(p12, p22) + np.cross(t1, p222),
    )
    a = [_dot(n, d)[..., None] for d in dc]
    out = []
    for (i, j), dij in zip(((0, 0), (0, 1), (1, 1)), d2c):
        da_ij = _dot(dn[j], dc[i])[..., None] + _dot(n, dij)[..., None]
        out.append(
            dij / w
            - dc[i] * a[j] / w**2
            - dn[j] * a[i] / w
            - n * da_ij / w
            + n * a[i] * a[j] / w**2
        )
    return tuple(out)


def _fd4(f, y, axis, h):
    y1, y2 = y
    if axis == 0:
        at = lambda s: f(y1 + s * h, y2)  # noqa: E731
    else:
        at = lambda s: f(y1, y2 + s * h)  # noqa: E731
    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h)


def normal_jet(chart, y, need_second=True):
    y = _point(chart, y)
    frame = evaluate_frame(chart, y)
    d2 = chart.d2_phi(*y)
    _, _, _, _, dn = _normal_first(frame.t1, frame.t2, d2)
    jet = _NormalJet(frame, d2, dn)
    if not need_second:
        return jet
    if chart.d3_phi is not None:
        jet.d2n = _normal_second_analytic(frame.t1, frame.t2, d2, chart.d3_phi(*y))
    else:
        def dn_at(i):
            def f(a, b):
                t1, t2 = chart.d_phi(a, b)
                return _normal_first(t1, t2, chart.d2_phi(a, b))[4][i]
            return f

        h1 = chart.extents[0] / 4096
        h2 = chart.extents[1] / 4096
        d11 = _fd4(dn_at(0), y, 0, h1)
        d12 = 0.5 * (_fd4(dn_at(0), y, 1, h2) + _fd4(dn_at(1), y, 0, h1))
        d22 = _fd4(dn_at(1), y, 1, h2)
        jet.d2n = (d11, d12, d22)
    return jet


def _eta_n_derivatives(nj, jet):
    """First and second partials of the displacement vector ``eta * n``."""
    n = nj.frame.n
    eta = np.asarray(jet.eta)[..., None]
    g1 = np.asarray(jet.grad_eta[0])[..., None]
    g2 = np.asarray(jet.grad_eta[1])[..., None]
    e1 = g1 * n + eta * nj.dn[0]
    e2 = g2 * n + eta * nj.dn[1]
    h = [np.asarray(c)[..., None] for c in jet.hess_eta.components()]
    q11 = h[0] * n + 2 * g1 * nj.dn[0] + eta * nj.d2n[0]
    q12 = h[1] * n + g1 * nj.dn[1] + g2 * nj.dn[0] + eta * nj.d2n[1]
    q22 = h[2] * n + 2 * g2 * nj.dn[1] + eta * nj.d2n[2]
    return (e1, e2), (q11, q12, q22)


def hess_of_eta_n(chart, y, jet):
    """The three second partials of ``eta * n``."""
    nj = normal_jet(chart, y)
    return _eta_n_derivatives(nj, jet)[1]


def change_of_metric(chart, y, jet):
    """Nonlinear change of metric ``G = (A_eta - A) / 2``."""
    nj = normal_jet(chart, y, need_second=False)
    fr = nj.frame
    n = fr.n
    eta = np.asarray(jet.eta)[..., None]
    T1 = fr.t1 + eta * nj.dn[0] + np.asarray(jet.grad_eta[0])[..., None] * n
    T2 = fr.t2 + eta * nj.dn[1] + np.asarray(jet.grad_eta[1])[..., None] * n
    return SymTensor2(
        0.5 * (_dot(T1, T1) - _dot(fr.t1, fr.t1)),
        0.5 * (_dot(T1, T2) - _dot(fr.t1, fr.t2)),
        0.5 * (_dot(T2, T2) - _dot(fr.t2, fr.t2)),
    )


def _b_vectors(fr, d2):
    w = fr.w[..., None]
    b1 = tuple(np.cross(fr.t1, p) / w for p in d2)
    b2 = tuple(np.cross(p, fr.t2) / w for p in d2)
    return b1, b2


def modified_change_of_curvature(chart, y, jet, hess_of_eta_n=None):
    """``B_eta / w - B`` via the linear part plus the explicit nonlinear terms."""
    nj = normal_jet(chart, y)
    fr = nj.frame
    (e1, e2), Q = _eta_n_derivatives(nj, jet)
    if hess_of_eta_n is not None:
        Q = tuple(hess_of_eta_n)
    b1, b2 = _b_vectors(fr, nj.d2)
    w = fr.w
    cross_lin = np.cross(e1, fr.t2) + np.cross(fr.t1, e2)
    cross_quad = np.cross(e1, e2)
    comps = []
    for q, p, b1ij, b2ij in zip(Q, nj.d2, b1, b2):
        linear = _dot(fr.n, q) - _dot(e1, b2ij) - _dot(e2, b1ij)
        nonlinear = _dot(cross_lin + cross_quad, q) + _dot(cross_quad, p)
        comps.append(linear + nonlinear / w)
    return SymTensor2(*comps)


def _direct_modified_change_of_curvature(chart, y, jet):
    """Cross-check: ``(T1 x T2) . d2(phi + eta n) / w - B`` evaluated directly."""
    nj = normal_jet(chart, y)
    fr = nj.frame
    (e1, e2), Q = _eta_n_derivatives(nj, jet)
    c_eta = np.cross(fr.t1 + e1, fr.t2 + e2)
    comps = []
    for q, p in zip(Q, nj.d2):
        comps.append(_dot(c_eta, p + q) / fr.w - _dot(fr.n, p))
    return SymTensor2(*comps)


def linearized_change_of_metric(chart, y, eta):
    fr = evaluate_frame(chart, y)
    p11, p12, p22 = chart.d2_phi(*_point(chart, y))
    s = np.asarray(eta) / fr.w

    def m(p):
        return _dot(fr.t1, np.cross(p, fr.t2))

    return SymTensor2(s * m(p11), s * m(p12), s * m(p22))


def linearized_change_of_curvature(chart, y, jet):
    nj = normal_jet(chart, y)
    fr = nj.frame
    (e1, e2), Q = _eta_n_derivatives(nj, jet)
    b1, b2 = _b_vectors(fr, nj.d2)
    return SymTensor2(
        *(_dot(fr.n, q) - _dot(e1, b2ij) - _dot(e2, b1ij) for q, b1ij, b2ij in zip(Q, b1, b2))
    )


@dataclass
class ValidationReport:
    min_w: float
    derivative_defect: float
    periodicity_defect: float
    ok: bool
    failures: list


def validate_chart(chart, probe_resolution=64, deriv_tol=1e-6, period_tol=1e-12):
    if probe_resolution < 8:
        raise ValueError("probe_resolution must be >= 8")
    l1, l2 = chart.extents
    o1, o2 = chart.origin
    s1 = o1 + l1 * (np.arange(probe_resolution) + 0.5) / probe_resolution
    s2 = o2 + l2 * (np.arange(probe_resolution) + 0.5) / probe_resolution
    y = np.meshgrid(s1, s2, indexing="ij")
    failures = []

    t1, t2 = chart.d_phi(*y)
    w = np.linalg.norm(np.cross(t1, t2), axis=-1)
    min_w = float(np.min(w))
    if not min_w >= EPS_W:
        failures.append(f"min area weight {min_w:.3e} < {EPS_W:g}")

    h = (l1 / 4096, l2 / 4096)
    defect = 0.0
    for axis, t in enumerate((t1, t2)):
        defect = max(defect, float(np.max(np.abs(_fd4(chart.phi, y, axis, h[axis]) - t))))
    d2 = chart.d2_phi(*y)
    pairs = (((0, 0), 0), ((0, 1), 1), ((1, 1), 2))
    for (first, axis), k in pairs:
        fd = _fd4(lambda a, b: chart.d_phi(a, b)[first], y, axis, h[axis])
        defect = max(defect, float(np.max(np.abs(fd - d2[k]))))
    if chart.d3_phi is not None:
        d3 = chart.d3_phi(*y)
        for src, axis, k in ((0, 0, 0), (0, 1, 1), (1, 1, 2), (2, 1, 3)):
            fd = _fd4(lambda a, b: chart.d2_phi(a, b)[src], y, axis, h[axis])
            defect = max(defect, float(np.max(np.abs(fd - d3[k]))))
    if not defect <= deriv_tol:
        failures.append(f"derivative inconsistency {defect:.3e} > {deriv_tol:g}")

    period = 0.0
    for shift in ((l1, 0.0), (0.0, l2)):
        ys = (y[0] + shift[0], y[1] + shift[1])
        jump = chart.phi(*ys) - chart.phi(*y)
        period = max(period, float(np.max(np.abs(jump - jump.reshape(-1, 3)[0]))))
        for a, b in zip(chart.d_phi(*ys), chart.d_phi(*y)):
            period = max(period, float(np.max(np.abs(a - b))))
        for a, b in zip(chart.d2_phi(*ys), d2):
            period = max(period, float(np.max(np.abs(a - b))))
    scale = max(1.0, float(np.max(np.abs(chart.phi(*y)))))
    if not period <= period_tol * scale:
        failures.append(f"periodicity defect {period:.3e}")
    return ValidationReport(min_w, defect, period, not failures, failures)
