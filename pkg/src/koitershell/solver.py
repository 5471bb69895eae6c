"""Time integration of the kinematic SDE and the simplified shell SPDE.

The shell equation on the flat torus is

    eps0 rho_s d(eta_dot) = -(nu_e eta + alpha lap^2 eta - beta lap eta - f) dt
                            + eps0 rho_s sum_i transport(sigma_i, eta_dot) o dW_i
    d eta = eta_dot dt + 1/2 sum_i advect(sigma_i, eta) o dW_i

with ``f = g . n + g``.  Each step is a Strang splitting: a half stochastic
Heun substep, the exact per-mode linear flow, and a second half substep.
"""
import csv
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .elasticity import flat_forcing, simplified_energy
from .errors import NonFiniteState, SmallDisplacementViolated, StabilityWarning
from .fields import resolve_scalar_field
from .gridio import DumpMeta, write_grid_dump
from .spectral import grad
from .stochastic import make_noise_model, sample_increments

NEUTRAL_TOL = 1e-14
STABILITY_LIMIT = 0.5
DIAG_HEADER = ("t", "E_kin", "E_mem", "E_flex", "E_total", "eta_min", "eta_max",
               "eta_l2", "etadot_l2", "grad_inf")

# cap on the per-substep CFL number theta: Heun amplifies an eigenmode i*theta of
# a skew operator by sqrt(1 + theta^4 / 4), so larger increments are sub-stepped
THETA_MAX = 0.5

# increment blocks: 0 drives the kinematic SDE, 1 and 2 the two shell half steps
SDE_BLOCK = 0
HALF_BLOCKS = (1, 2)


@dataclass
class ShellState:
    eta: np.ndarray
    eta_dot: np.ndarray
    t: float = 0.0

    def copy(self):
        return ShellState(self.eta.copy(), self.eta_dot.copy(), self.t)


@dataclass(frozen=True)
class ModeClassification:
    k: tuple
    symbol: float
    kind: str
    rate: float


def mode_symbol(params, ksq):
    """``nu_e + beta |k|^2 + alpha |k|^4``."""
    return params.nu_e + params.beta * ksq + params.alpha * ksq**2


def dispersion(params, k):
    k = tuple(float(c) for c in k)
    symbol = float(mode_symbol(params, k[0] ** 2 + k[1] ** 2))
    if symbol > NEUTRAL_TOL:
        return ModeClassification(k, symbol, "oscillatory", np.sqrt(symbol / params.mass))
    if symbol < -NEUTRAL_TOL:
        return ModeClassification(k, symbol, "unstable", np.sqrt(-symbol / params.mass))
    return ModeClassification(k, symbol, "neutral", 0.0)


def _propagator_entries(symbol, mass, dt):
    """Entries ``(m11, m12, m21, m22)`` of the exact modal flow, elementwise."""
    symbol = np.asarray(symbol, dtype=float)
    osc = symbol > NEUTRAL_TOL
    uns = symbol < -NEUTRAL_TOL
    rate = np.sqrt(np.abs(symbol) / mass)
    safe = np.where(osc | uns, rate, 1.0)
    th = safe * dt
    m11 = np.where(osc, np.cos(th), np.where(uns, np.cosh(th), 1.0))
    m12 = np.where(osc, np.sin(th) / safe, np.where(uns, np.sinh(th) / safe, dt))
    m21 = np.where(osc, -safe * np.sin(th), np.where(uns, safe * np.sinh(th), 0.0))
    return m11, m12, m21, m11.copy()


def linear_propagator(params, k, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    symbol = mode_symbol(params, k[0] ** 2 + k[1] ** 2)
    return np.array(_propagator_entries(symbol, params.mass, dt), dtype=float).reshape(2, 2)


def modal_invariants(xh, params, grid):
    """Per-mode ``m |eta_dot_k|^2 + s_k |eta_k|^2`` and its unsigned scale.

    ``xh`` holds the full spectra of ``(eta, eta_dot)``; ``s_k`` is the mode
    symbol.  Without noise and forcing the first array is conserved by the
    exact modal flow in every regime; the second (with ``|s_k|``) normalises it.
    """
    symbol = mode_symbol(params, grid.full_ksq)
    kin = params.mass * np.abs(xh[1]) ** 2
    pot = np.abs(xh[0]) ** 2
    return kin + symbol * pot, kin + np.abs(symbol) * pot


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteState("state contains non-finite values")


def n_substeps(kernel, dw, factor):
    """Number of equal Heun substeps keeping ``factor * cfl(dw) / n <= THETA_MAX``."""
    return max(1, int(np.ceil(factor * kernel.cfl(dw) / THETA_MAX)))


def _heun(op, x):
    """Trapezoidal predictor-corrector for ``dx = op(x)`` with frozen increments."""
    k1 = op(x)
    k2 = op(x + k1)
    k2 += k1
    k2 *= 0.5
    k2 += x
    return k2


class KinematicIntegrator:
    """Heun stepper for the kinematic SDE on full complex spectra."""

    def __init__(self, model, grid, dt, path=0, eta_dot_source=None):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.model = model
        self.grid = grid
        self.dt = float(dt)
        self.path = int(path)
        src = 0.0 if eta_dot_source is None else np.asarray(eta_dot_source, dtype=float)
        self.drift_hat = grid.fft_full(np.broadcast_to(src * self.dt, grid.shape))

    def increments(self, step):
        return sample_increments(self.model, self.path, step, self.dt, SDE_BLOCK).dw

    def step_spectral(self, xh, step, dw=None):
        if dw is None:
            dw = self.increments(step)
        if self.model.n_fields == 0 or not np.any(dw):
            out = xh + self.drift_hat
        else:
            kernel = self.model.kernel
            n = n_substeps(kernel, dw, 0.5)
            op = kernel.operator(np.asarray(dw) / n, (True,))
            drift = self.drift_hat / n if n > 1 else self.drift_hat
            out = xh
            for _ in range(n):
                k1 = op(out[None])[0]
                out = out + drift + 0.5 * (k1 + op((out + drift + k1)[None])[0])
        _check_finite(out)
        return out


def step_kinematic_sde(eta, eta_dot_source, model, path, step, dt, grid, dw=None):
    """One Heun step of ``d eta = eta_dot dt + 1/2 sum advect(sigma_i, eta) dw_i``.

    ``dw`` overrides the sampled increments (block 0 of ``(path, step)``).
    """
    integ = KinematicIntegrator(model, grid, dt, path, eta_dot_source)
    eta = np.asarray(eta, dtype=float)
    if model.n_fields == 0:
        out = eta + integ.dt * (0.0 if eta_dot_source is None else eta_dot_source)
        _check_finite(out)
        return out
    return grid.ifft_full(integ.step_spectral(grid.fft_full(eta), step, dw))


class ShellIntegrator:
    """Cached Strang stepper for the shell SPDE on a fixed grid and time step.

    The state is advanced as a pair of full complex spectra ``(2, n1, n2)``;
    :meth:`step` wraps this for grid-valued :class:`ShellState` objects.
    """

    def __init__(self, params, model, grid, dt, path=0):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.params = params
        self.model = model
        self.grid = grid
        self.dt = float(dt)
        self.path = int(path)
        self.symbol = mode_symbol(params, grid.full_ksq)
        self.prop = _propagator_entries(self.symbol, params.mass, self.dt)
        kick = flat_forcing(params, grid) / params.mass * (0.5 * self.dt)
        self.kick_hat = grid.fft_full(np.broadcast_to(kick, grid.shape))
        unstable = self.symbol < -NEUTRAL_TOL
        if np.any(unstable):
            lam = float(np.sqrt(-self.symbol[unstable].min() / params.mass))
            if lam * self.dt > STABILITY_LIMIT:
                warnings.warn(f"unstable mode with lambda*dt = {lam * self.dt:.3g} "
                              f"> {STABILITY_LIMIT}", StabilityWarning, stacklevel=2)

    def half_increments(self, step):
        return tuple(sample_increments(self.model, self.path, step, 0.5 * self.dt, b).dw
                     for b in HALF_BLOCKS)

    def to_spectral(self, state):
        return self.grid.fft_full(np.stack([state.eta, state.eta_dot]))

    def to_state(self, xh, t):
        x = self.grid.ifft_full(xh)
        return ShellState(x[0], x[1], t)

    def stochastic_substep(self, xh, dw):
        """Heun substep for the noise terms plus the half-step forcing kick."""
        if self.model.n_fields and np.any(dw):
            kernel = self.model.kernel
            n = n_substeps(kernel, dw, 1.0)
            op = kernel.operator(np.asarray(dw) / n, (True, False))
            for _ in range(n):
                xh = _heun(op, xh)
        else:
            xh = xh.copy()
        xh[1] += self.kick_hat
        return xh

    def deterministic_substep(self, xh):
        m11, m12, m21, m22 = self.prop
        return np.stack([m11 * xh[0] + m12 * xh[1], m21 * xh[0] + m22 * xh[1]])

    def step_spectral(self, xh, step, dw_halves=None):
        if dw_halves is None:
            dw_halves = self.half_increments(step)
        xh = self.stochastic_substep(xh, dw_halves[0])
        xh = self.deterministic_substep(xh)
        xh = self.stochastic_substep(xh, dw_halves[1])
        _check_finite(xh)
        return xh

    def step(self, state, step, dw_halves=None):
        xh = self.step_spectral(self.to_spectral(state), step, dw_halves)
        return self.to_state(xh, state.t + self.dt)


def step_shell_spde(state, params, model, path, step, dt, grid, dw_halves=None):
    """One Strang step; ``dw_halves`` overrides the two half-variance blocks."""
    return ShellIntegrator(params, model, grid, dt, path).step(state, step, dw_halves)


# ---------------------------------------------------------------- simulation


def diagnostics_row(state, params, grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallDisplacementViolated)
        e = simplified_energy(state.eta, state.eta_dot, params, grid)
    g1, g2 = grad(state.eta, grid)
    return (state.t, e.kinetic, e.k_m, e.k_f, e.hamiltonian,
            float(state.eta.min()), float(state.eta.max()),
            grid.norm(state.eta), grid.norm(state.eta_dot),
            float(np.max(np.hypot(g1, g2))))


@dataclass
class SimulationResult:
    diagnostics: list
    snapshots: list  # (t, eta) pairs
    final: ShellState
    files: list = field(default_factory=list)

    def column(self, name):
        i = DIAG_HEADER.index(name)
        return np.array([row[i] for row in self.diagnostics])


def snapshot_steps(config):
    dt = config.time.dt
    return sorted({int(round(t / dt)) for t in config.time.snapshots})


def initial_state(config, grid):
    eta = resolve_scalar_field(config.initial.eta, grid).astype(float)
    eta_dot = resolve_scalar_field(config.initial.eta_dot, grid).astype(float)
    return ShellState(eta, eta_dot, 0.0)


def simulate_path(config, path=0, on_row=None, on_snapshot=None):
    """Advance one noise path; callbacks receive rows and ``(index, t, eta)``."""
    from .config import validate_config

    validate_config(config)
    grid = config.grid.build()
    model = make_noise_model(config.noise, grid, config.master_seed)
    params = config.params
    dt = config.time.dt
    n_steps = config.time.n_steps
    every = config.time.diag_every
    snaps = set(snapshot_steps(config))
    state = initial_state(config, grid)
    if config.equation == "shell":
        integ = ShellIntegrator(params, model, grid, dt, path)
        xh = integ.to_spectral(state)
    else:
        integ = KinematicIntegrator(model, grid, dt, path, state.eta_dot)
        xh = grid.fft_full(state.eta)
    rows, shots = [], []
    warned = False

    def record(s, n):
        nonlocal warned
        if n % every == 0 or n == n_steps or n in snaps:
            row = diagnostics_row(s, params, grid)
            rows.append(row)
            if on_row:
                on_row(row)
            if row[-1] > params.disp_bound_L and not warned:
                warned = True
                warnings.warn(f"max |grad eta| = {row[-1]:.3g} exceeds L = "
                              f"{params.disp_bound_L:g} at t = {s.t:.4g}",
                              SmallDisplacementViolated, stacklevel=3)
        if n in snaps:
            shots.append((s.t, s.eta.copy()))
            if on_snapshot:
                on_snapshot(len(shots) - 1, s.t, s.eta)

    record(state, 0)
    for n in range(n_steps):
        xh = integ.step_spectral(xh, n)
        m = n + 1
        if m % every == 0 or m == n_steps or m in snaps:
            if config.equation == "shell":
                state = integ.to_state(xh, m * dt)
            else:
                state = ShellState(grid.ifft_full(xh), state.eta_dot, m * dt)
            record(state, m)
    if config.equation == "shell":
        state = integ.to_state(xh, n_steps * dt)
    else:
        state = ShellState(grid.ifft_full(xh), state.eta_dot, n_steps * dt)
    return SimulationResult(rows, shots, state)


def run_simulation(config, output_dir=None, path=0, figures=True):
    """Run one path; with ``output_dir`` also write CSV, dumps, figures and manifest.

    Files already written are flushed and listed in the manifest when a step
    fails; the error is then re-raised.
    """
    from .report import write_manifest

    if output_dir is None:
        return simulate_path(config, path)
    os.makedirs(output_dir, exist_ok=True)
    files = []
    csv_path = os.path.join(output_dir, "diagnostics.csv")
    grid = config.grid.build()
    with open(csv_path, "w", newline="") as fh:
        files.append(csv_path)
        writer = csv.writer(fh)
        writer.writerow(DIAG_HEADER)

        def on_row(row):
            writer.writerow([repr(float(v)) for v in row])
            fh.flush()

        def on_snapshot(i, t, eta):
            p = os.path.join(output_dir, f"snapshot_{i:02d}.ksh")
            write_grid_dump(eta, DumpMeta(grid.extents[0], grid.extents[1], t), p)
            files.append(p)

        try:
            result = simulate_path(config, path, on_row, on_snapshot)
        except BaseException:
            fh.flush()
            write_manifest(output_dir, files, config, status="aborted")
            raise
    if figures:
        from . import plotting

        files += plotting.simulation_figures(result, grid, output_dir)
    result.files = files
    write_manifest(output_dir, files, config)
    return result
