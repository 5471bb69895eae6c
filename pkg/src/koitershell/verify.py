"""Self-test oracle suites behind ``koitershell verify``.

Each check compares two independent routes to the same quantity at a small
problem size and reports the discrepancy against its tolerance.
"""
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .charts import REGISTERED_CHARTS, flat_chart, get_chart
from .elasticity import ShellParams, gateaux_derivative, simplified_force
from .fields import periodized_gaussian, smooth_random_field
from .solver import (KinematicIntegrator, _heun, ShellIntegrator, ShellState, dispersion,
                     linear_propagator)
from .spectral import build_grid
from .stochastic import characteristics_oracle, make_noise_model, transport_operator


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def _cell_center_grid(n):
    h = 2 * np.pi / n
    return build_grid(n, n, origin=(0.5 * h, 0.5 * h))


def geometry_suite():
    out = []
    y = (np.pi / 2 + 0.3, 0.7)
    A, B = geo.fundamental_forms(get_chart("sphere:2"), y)
    err = max(np.max(np.abs(A.matrix() - np.diag([4.0, 4.0 * np.sin(y[0]) ** 2]))),
              np.max(np.abs(B.matrix() - np.diag([-2.0, -2.0 * np.sin(y[0]) ** 2]))))
    out.append(CheckResult("geometry", "sphere:2 A, B closed form", float(err), 1e-8))
    A, B = geo.fundamental_forms(get_chart("cylinder:1"), y)
    err = max(np.max(np.abs(A.matrix() - np.eye(2))),
              np.max(np.abs(B.matrix() - np.diag([-1.0, 0.0]))))
    out.append(CheckResult("geometry", "cylinder:1 A, B closed form", float(err), 1e-8))
    grid = _cell_center_grid(16)
    eta = np.sin(grid.mesh[0]) ** 4 * np.cos(grid.mesh[1] + 0.3)
    worst = 0.0
    for cid in REGISTERED_CHARTS:
        chart = get_chart(cid)
        _, B = geo.fundamental_forms(chart, grid.mesh)
        G = geo.linearized_change_of_metric(chart, grid.mesh, eta)
        worst = max(worst, (G + B * eta).max_abs())
    out.append(CheckResult("geometry", "G_lin = -eta B on registered charts", worst, 1e-10))
    return out


def gateaux_suite(n_pairs=4):
    grid = build_grid(32, 32)
    chart = flat_chart()
    params = ShellParams(nu_e=0.7, alpha=1.3, beta=0.4, g_vec=(0.0, 0.0, 0.5), g_scal="sin:1,1")
    worst = 0.0
    worst_load = 0.0
    for s in range(n_pairs):
        eta = smooth_random_field(grid, 2 * s, kmax=3, amplitude=0.1)
        d = smooth_random_field(grid, 2 * s + 1, kmax=3)
        num = gateaux_derivative(("K_m_s", "K_f_s"), chart, eta, d, params, grid)
        ref = grid.integrate(simplified_force(eta, params, grid) * d)
        worst = max(worst, abs(num - ref) / max(abs(ref), 1e-300))
        # the load is linear, so any step is exact; a large one avoids cancellation
        num = gateaux_derivative("load", chart, eta, d, params, grid, taus=(1.0, 0.5))
        f = params.g_vec[2] + np.sin(grid.mesh[0] + grid.mesh[1])
        ref = grid.integrate(f * d)
        worst_load = max(worst_load, abs(num - ref) / max(abs(ref), 1e-300))
    return [CheckResult("gateaux", "K_m,s + K_f,s derivative vs force", worst, 1e-6),
            CheckResult("gateaux", "load derivative vs forcing", worst_load, 1e-12)]


def _momentum_substep(grid, model, dt, seed=2):
    integ = ShellIntegrator(ShellParams(), model, grid, dt)
    v = smooth_random_field(grid, seed, kmax=2)
    dw = integ.half_increments(0)[0]
    xh = integ.to_spectral(ShellState(np.zeros(grid.shape), v))
    return integ, v, dw, xh, integ.to_state(integ.stochastic_substep(xh, dw), dt / 2)


def momentum_norm_change(grid, model, dt):
    """Relative change of ``|eta_dot|`` over one noise-only half substep."""
    *_, v, _, _, after = _momentum_substep(grid, model, dt)
    return abs(grid.norm(after.eta_dot) - grid.norm(v)) / grid.norm(v)


def heun_identity_defect(grid, model, dt):
    """For skew ``A``, one Heun step gives ``|x'|^2 - |x|^2 = |A^2 x|^2 / 4`` exactly."""
    _, v, dw, xh, _ = _momentum_substep(grid, model, dt)
    op = model.kernel.operator(dw, (True, False))
    after = grid.ifft_full(_heun(op, xh))
    a2 = grid.ifft_full(op(op(xh)))
    x0 = grid.ifft_full(xh)
    change = sum(grid.norm(after[i]) ** 2 - grid.norm(x0[i]) ** 2 for i in range(2))
    return abs(change - 0.25 * sum(grid.inner(a, a) for a in a2)) / grid.norm(v) ** 2


def skew_suite():
    grid = build_grid(32, 32)
    model = make_noise_model("figure3", grid)
    sigma, _ = model.combined([0.7, -0.4])
    u = smooth_random_field(grid, 1, kmax=5)
    v = smooth_random_field(grid, 2, kmax=5)
    lhs = grid.inner(u, transport_operator(sigma, v, grid))
    rhs = grid.inner(transport_operator(sigma, u, grid), v)
    scale = grid.norm(u) * grid.norm(transport_operator(sigma, v, grid))
    out = [CheckResult("skew", "<u, T v> + <T u, v>", abs(lhs + rhs) / scale, 1e-10)]
    out.append(CheckResult("skew", "momentum substep |eta_dot| change, dt=1e-4",
                           momentum_norm_change(grid, model, 1e-4), 1e-8))
    out.append(CheckResult("skew", "Heun defect = |A^2 x|^2 / 4, dt=1e-3",
                           heun_identity_defect(grid, model, 1e-3), 1e-12))
    return out


def characteristics_suite(n_steps=100):
    grid = build_grid(64, 64, (4 * np.pi, 4 * np.pi), (-2 * np.pi, -2 * np.pi))
    model = make_noise_model("figure3", grid, master_seed=11)
    eta0 = periodized_gaussian(grid, (np.pi, np.pi))
    integ = KinematicIntegrator(model, grid, 1e-3)
    xh = grid.fft_full(eta0)
    for n in range(n_steps):
        xh = integ.step_spectral(xh, n)
    ref = characteristics_oracle(eta0, model, 0, 1e-3, n_steps, grid)
    err = np.max(np.abs(grid.ifft_full(xh) - ref)) / np.max(np.abs(ref))
    return [CheckResult("characteristics", "spectral SDE vs characteristics", float(err), 1e-2)]


def dispersion_suite():
    out = []
    mc = dispersion(ShellParams(nu_e=1, alpha=1, beta=1), (1, 0))
    out.append(CheckResult("dispersion", "omega(1,0) = sqrt(3)", abs(mc.rate - np.sqrt(3)), 1e-14))
    mc = dispersion(ShellParams(nu_e=0, alpha=1, beta=-2), (1, 0))
    out.append(CheckResult("dispersion", "growth(1,0) = 1", abs(mc.rate - 1.0), 1e-14))
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        p = ShellParams(nu_e=rng.uniform(-2, 2), alpha=rng.uniform(0.1, 2),
                        beta=rng.uniform(-2, 2), eps0=rng.uniform(0.5, 2))
        m = linear_propagator(p, rng.uniform(-3, 3, 2), rng.uniform(1e-4, 0.5))
        worst = max(worst, abs(np.linalg.det(m) - 1.0))
    out.append(CheckResult("dispersion", "propagator det = 1", worst, 1e-12))
    return out


SUITES = {
    "geometry": geometry_suite,
    "gateaux": gateaux_suite,
    "skew": skew_suite,
    "characteristics": characteristics_suite,
    "dispersion": dispersion_suite,
}


def run_all(suites=None):
    results = []
    for name in suites or SUITES:
        results.extend(SUITES[name]())
    return results


def format_table(results):
    lines = [f"{'suite':<16}{'check':<46}{'value':>12}{'tol':>10}  status"]
    for r in results:
        lines.append(f"{r.suite:<16}{r.name:<46}{r.value:>12.3e}{r.tolerance:>10.0e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
