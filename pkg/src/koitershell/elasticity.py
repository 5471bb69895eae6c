"""Shell elasticity tensor, Koiter energies and their first variations."""
import warnings
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .fields import resolve_scalar_field, smooth_random_field
from .errors import NonFiniteEnergy, SmallDisplacementViolated, ValidationError
from .spectral import grad, hessian, laplacian, biharmonic


@dataclass(frozen=True)
class ShellParams:
    eps0: float = 1.0
    rho_s: float = 1.0
    lambda_e: float = 1.0
    mu_e: float = 1.0
    nu_e: float = 0.0
    alpha: float = 1.0
    beta: float = 0.0
    g_vec: tuple = (0.0, 0.0, 0.0)
    g_scal: object = "zero"
    disp_bound_L: float = 1.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValidationError("; ".join(problems))

    def violations(self):
        out = []
        if not self.eps0 > 0:
            out.append(f"eps0 must be > 0 (got {self.eps0})")
        if not self.rho_s > 0:
            out.append(f"rho_s must be > 0 (got {self.rho_s})")
        if not self.alpha > 0:
            out.append(f"alpha must be > 0 (got {self.alpha})")
        if not self.mu_e > 0:
            out.append(f"Lame constraint mu_e > 0 violated (mu_e = {self.mu_e})")
        if not 3 * self.lambda_e + 2 * self.mu_e > 0:
            out.append(
                f"Lame constraint 3*lambda_e + 2*mu_e > 0 violated "
                f"(3*{self.lambda_e} + 2*{self.mu_e} = {3 * self.lambda_e + 2 * self.mu_e})"
            )
        if len(self.g_vec) != 3:
            out.append("g_vec must have three components")
        if not self.disp_bound_L > 0:
            out.append("disp_bound_L must be > 0")
        return out

    @property
    def mass(self):
        """Areal mass ``eps0 * rho_s``."""
        return self.eps0 * self.rho_s


@dataclass(frozen=True)
class ElasticityTensor:
    """Contravariant components ``c[..., i, j, k, l]``."""

    c: np.ndarray

    def contract(self, G, H=None):
        """``C : G (x) H`` for symmetric tensors given as :class:`SymTensor2`."""
        g = G.matrix()
        h = g if H is None else H.matrix()
        return np.einsum("...ijkl,...ij,...kl->...", self.c, g, h)


@dataclass(frozen=True)
class EnergyBreakdown:
    k_m: float
    k_f: float
    load: float
    kinetic: float

    @property
    def total(self):
        """Potential energy ``k_m + k_f - load``."""
        return self.k_m + self.k_f - self.load

    @property
    def hamiltonian(self):
        return self.kinetic + self.total


def elasticity_tensor(frame, params):
    lam, mu = params.lambda_e, params.mu_e
    ts = (frame.t1_star, frame.t2_star)
    a = np.empty(np.shape(frame.w) + (2, 2))
    for i in range(2):
        for j in range(2):
            a[..., i, j] = np.sum(ts[i] * ts[j], axis=-1)
    c = (4 * lam * mu / (lam + 2 * mu)) * np.einsum("...ij,...kl->...ijkl", a, a)
    c += 2 * mu * (np.einsum("...ik,...jl->...ijkl", a, a) + np.einsum("...il,...jk->...ijkl", a, a))
    return ElasticityTensor(c)


def grid_jet(eta, grid):
    g1, g2 = grad(eta, grid)
    h11, h12, h22 = hessian(eta, grid)
    return geo.DisplacementJet(eta, (g1, g2), geo.SymTensor2(h11, h12, h22))


def _check_small(jet, params):
    gmax = float(np.max(np.hypot(*jet.grad_eta)))
    if gmax > params.disp_bound_L:
        warnings.warn(
            f"max |grad eta| = {gmax:.3g} exceeds the small-displacement bound "
            f"L = {params.disp_bound_L:g}",
            SmallDisplacementViolated,
            stacklevel=3,
        )
    return gmax


def _forcing_density(frame, params, grid):
    """``g . n + g`` sampled on the grid."""
    g_vec = np.asarray(params.g_vec, dtype=float)
    return np.sum(frame.n * g_vec, axis=-1) + resolve_scalar_field(params.g_scal, grid)


def load_functional(chart, eta, params, grid, frame=None):
    if frame is None:
        frame = geo.evaluate_frame(chart, grid.mesh)
    return grid.integrate(_forcing_density(frame, params, grid) * eta * frame.w)


def kinetic_energy(eta_dot, params, grid, weight=1.0):
    return 0.5 * params.mass * grid.integrate(eta_dot**2 * weight)


def _koiter_energy(chart, eta, eta_dot, params, grid, membrane, flexural):
    y = grid.mesh
    frame = geo.evaluate_frame(chart, y)
    C = elasticity_tensor(frame, params)
    jet = grid_jet(np.asarray(eta, dtype=float), grid)
    _check_small(jet, params)
    G = membrane(chart, y, jet)
    R = flexural(chart, y, jet)
    w = frame.w
    k_m = grid.integrate(0.5 * params.eps0 * C.contract(G) * w)
    k_f = grid.integrate(params.eps0**3 / 6 * C.contract(R) * w)
    load = load_functional(chart, jet.eta, params, grid, frame)
    kin = kinetic_energy(eta_dot, params, grid, w) if eta_dot is not None else 0.0
    return EnergyBreakdown(k_m, k_f, load, kin)


def nonlinear_energy(chart, eta, eta_dot, params, grid):
    return _koiter_energy(chart, eta, eta_dot, params, grid,
                          geo.change_of_metric, geo.modified_change_of_curvature)


def linear_energy(chart, eta, eta_dot, params, grid):
    return _koiter_energy(
        chart, eta, eta_dot, params, grid,
        lambda ch, y, jet: geo.linearized_change_of_metric(ch, y, jet.eta),
        geo.linearized_change_of_curvature,
    )


def simplified_energy(eta, eta_dot, params, grid):
    """Simplified model on the flat torus (area weight 1, normal e3)."""
    eta = np.asarray(eta, dtype=float)
    g1, g2 = grad(eta, grid)
    h11, h12, h22 = hessian(eta, grid)
    k_m = 0.5 * params.nu_e * grid.integrate(eta**2)
    k_f = 0.5 * grid.integrate(params.alpha * (h11**2 + 2 * h12**2 + h22**2)
                               + params.beta * (g1**2 + g2**2))
    load = grid.integrate(flat_forcing(params, grid) * eta)
    kin = kinetic_energy(eta_dot, params, grid) if eta_dot is not None else 0.0
    return EnergyBreakdown(k_m, k_f, load, kin)


def flat_forcing(params, grid):
    return params.g_vec[2] + resolve_scalar_field(params.g_scal, grid)


def simplified_force(eta, params, grid):
    """``nu_e eta + alpha lap^2 eta - beta lap eta``."""
    eta = np.asarray(eta, dtype=float)
    return (params.nu_e * eta + params.alpha * biharmonic(eta, grid)
            - params.beta * laplacian(eta, grid))


FUNCTIONALS = ("K_m", "K_f", "K_m_lin", "K_f_lin", "K_m_s", "K_f_s", "load")


def evaluate_functional(functional_id, chart, eta, params, grid):
    if functional_id in ("K_m", "K_f"):
        e = nonlinear_energy(chart, eta, None, params, grid)
        return e.k_m if functional_id == "K_m" else e.k_f
    if functional_id in ("K_m_lin", "K_f_lin"):
        e = linear_energy(chart, eta, None, params, grid)
        return e.k_m if functional_id == "K_m_lin" else e.k_f
    if functional_id in ("K_m_s", "K_f_s"):
        e = simplified_energy(eta, None, params, grid)
        return e.k_m if functional_id == "K_m_s" else e.k_f
    if functional_id == "load":
        return load_functional(chart, eta, params, grid)
    raise ValueError(f"unknown functional {functional_id!r}; choose from {FUNCTIONALS}")


def gateaux_derivative(functional_id, chart, eta, direction, params, grid,
                       taus=(1e-4, 5e-5)):
    """Directional derivative by central differences with one Richardson step.

    ``functional_id`` may also be a tuple of ids, whose values are summed.
    """
    ids = (functional_id,) if isinstance(functional_id, str) else tuple(functional_id)

    def F(v):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SmallDisplacementViolated)
            val = sum(evaluate_functional(f, chart, v, params, grid) for f in ids)
        if not np.isfinite(val):
            raise NonFiniteEnergy(f"{ids} evaluated to {val}")
        return val

    eta = np.asarray(eta, dtype=float)
    direction = np.asarray(direction, dtype=float)
    big, small = taus
    d_big = (F(eta + big * direction) - F(eta - big * direction)) / (2 * big)
    d_small = (F(eta + small * direction) - F(eta - small * direction)) / (2 * small)
    r = (big / small) ** 2
    return (r * d_small - d_big) / (r - 1)


def estimate_membrane_coercivity(chart, params, grid, n_samples=32, seed=0, kmax=4):
    """Smallest observed ``2 K_m^lin(eta) / int eta^2 dy_n`` over random fields.

    An upper estimate of the coercivity constant; reported only, never used
    to set ``nu_e``.
    """
    frame = geo.evaluate_frame(chart, grid.mesh)
    best = np.inf
    for s in range(n_samples):
        eta = smooth_random_field(grid, seed * 100003 + s, kmax)
        k_m = linear_energy(chart, eta, None, params, grid).k_m
        best = min(best, 2 * k_m / grid.integrate(eta**2 * frame.w))
    return best
