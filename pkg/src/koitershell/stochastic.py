"""Transport noise: prescribed vector fields, Brownian increments and operators.

Noise field ids (join several with ``+``)::

    none              no noise (N = 0)
    figure3           sigma_1 = 2 (sin y1, -cos y2), sigma_2 = 2 (-cos y1, sin y2)
    divfree:kK        sigma = (d2 psi, -d1 psi), psi = cos(K y1) cos(K y2)
    const:cx,cy       constant field (cx, cy)
    grid:<p1>,<p2>    components read from two KSH1 grid dumps
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import BadFieldSpec
from .fields import parse_number
from .gridio import read_grid_dump
from .spectral import div, grad

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z):
    # splitmix64 finaliser, a bijection on 64-bit integers
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_path_seed(master_seed, path_index):
    """64-bit per-path key; injective in ``path_index`` for a fixed master seed."""
    base = _mix64(int(master_seed) & _MASK64)
    return _mix64((base + (int(path_index) + 1) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class NoiseModel:
    """``sigmas[i] = (s1, s2)`` sampled on ``grid``; ``divs[i]`` its divergence."""

    sigmas: tuple
    divs: tuple
    grid: object
    master_seed: int = 0
    spec: str = "none"

    @property
    def n_fields(self):
        return len(self.sigmas)

    def combined(self, dw):
        """``(sum_i dw_i sigma_i, sum_i dw_i div sigma_i)``."""
        s1 = np.zeros(self.grid.shape)
        s2 = np.zeros(self.grid.shape)
        d = np.zeros(self.grid.shape)
        for c, (a, b), dv in zip(dw, self.sigmas, self.divs):
            s1 += c * a
            s2 += c * b
            d += c * dv
        return (s1, s2), d

    @cached_property
    def kernel(self):
        return TransportKernel(self)


@dataclass(frozen=True)
class IncrementBlock:
    dw: np.ndarray
    step_index: int
    path_index: int


def _analytic_field(name, body):
    if name == "figure3":
        return [
            lambda a, b: (2 * np.sin(a), -2 * np.cos(b)),
            lambda a, b: (-2 * np.cos(a), 2 * np.sin(b)),
        ]
    if name == "divfree":
        if not body.startswith("k"):
            raise BadFieldSpec(f"divfree field needs a wavenumber like 'k1', got {body!r}")
        k = parse_number(body[1:])
        # psi = cos(k y1) cos(k y2)
        return [lambda a, b: (-k * np.cos(k * a) * np.sin(k * b), k * np.sin(k * a) * np.cos(k * b))]
    if name == "const":
        parts = body.split(",")
        if len(parts) != 2:
            raise BadFieldSpec(f"const field needs two components, got {body!r}")
        cx, cy = (parse_number(p) for p in parts)
        return [lambda a, b: (cx + 0.0 * a, cy + 0.0 * b)]
    raise BadFieldSpec(f"unknown noise field {name!r}")


def make_noise_model(spec, grid, master_seed=0):
    spec = str(spec).strip() or "none"
    sigmas = []
    for term in spec.split("+"):
        name, _, body = term.strip().partition(":")
        name = name.lower()
        if name == "none":
            continue
        if name == "grid":
            paths = body.split(",")
            if len(paths) != 2:
                raise BadFieldSpec("grid noise field needs two dump paths")
            comps = []
            for p in paths:
                try:
                    f, _ = read_grid_dump(p.strip())
                except OSError as exc:
                    raise BadFieldSpec(f"cannot read {p!r}: {exc}") from None
                if f.shape != grid.shape:
                    raise BadFieldSpec(f"{p!r} has shape {f.shape}, grid is {grid.shape}")
                comps.append(f)
            sigmas.append(tuple(comps))
            continue
        y1, y2 = grid.mesh
        l1, l2 = grid.extents
        for fn in _analytic_field(name, body):
            s = fn(y1, y2)
            for shifted in (fn(y1 + l1, y2), fn(y1, y2 + l2)):
                defect = max(np.max(np.abs(a - b)) for a, b in zip(shifted, s))
                scale = max(1.0, max(np.max(np.abs(c)) for c in s))
                if defect > 1e-10 * scale:
                    raise BadFieldSpec(f"noise field {term!r} is not periodic on the grid "
                                       f"(defect {defect:.2e})")
            sigmas.append(tuple(np.asarray(c, dtype=float) for c in s))
    for s1, s2 in sigmas:
        if not (np.all(np.isfinite(s1)) and np.all(np.isfinite(s2))):
            raise BadFieldSpec(f"noise field in {spec!r} is not finite")
    divs = tuple(div(s1, s2, grid) for s1, s2 in sigmas)
    return NoiseModel(tuple(sigmas), divs, grid, int(master_seed), spec)


def increment_generator(master_seed, path, step, block=0):
    """Counter-based generator for one (path, step, block) key.

    Field ``i`` draws the ``i``-th normal of this stream, so increments
    depend only on the key and not on scheduling.
    """
    key = np.array([derive_path_seed(master_seed, path), int(step) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, int(block), 0, 0]))


def sample_increments(model, path, step, dt, block=0):
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = model.n_fields
    if n == 0:
        return IncrementBlock(np.zeros(0), int(step), int(path))
    z = increment_generator(model.master_seed, path, step, block).standard_normal(n)
    return IncrementBlock(np.sqrt(dt) * z, int(step), int(path))


def advect(sigma, v, grid, div_sigma=None):
    """``sigma . grad v`` in the skew-symmetric form ``(s.grad v + div(s v) - v div s) / 2``."""
    s1, s2 = sigma
    if div_sigma is None:
        div_sigma = div(s1, s2, grid)
    g1, g2 = grad(v, grid)
    return 0.5 * (s1 * g1 + s2 * g2 + div(s1 * v, s2 * v, grid) - v * div_sigma)


def transport_operator(sigma, v, grid):
    """``sigma . grad v + v div(sigma) / 2`` as ``(s.grad v + div(s v)) / 2``."""
    s1, s2 = sigma
    g1, g2 = grad(v, grid)
    return 0.5 * (s1 * g1 + s2 * g2 + div(s1 * v, s2 * v, grid))


def skew_transport_batch(sigma, x, grid):
    """``(s.grad x + div(s x)) / 2`` for each field of a batch ``x`` ``(m, n1, n2)``."""
    s1, s2 = sigma
    ik1, ik2 = grid._odd_symbols
    xh = grid.fft(x)
    g = grid.ifft(np.stack([ik1 * xh, ik2 * xh]))
    ph = grid.fft(np.stack([s1 * x, s2 * x]))
    d = grid.ifft(ik1 * ph[0] + ik2 * ph[1])
    return 0.5 * (s1 * g[0] + s2 * g[1] + d)


def dealias_mask(grid):
    """2/3-rule mask on the full spectrum: keeps ``|m_i| <= n_i // 3``."""
    m1 = np.abs(np.fft.fftfreq(grid.n1, 1.0 / grid.n1))
    m2 = np.abs(np.fft.fftfreq(grid.n2, 1.0 / grid.n2))
    return ((m1[:, None] <= grid.n1 // 3) & (m2[None, :] <= grid.n2 // 3)).astype(float)


DEALIAS_MODES = ("linear", "2/3", "none")


def _signed(index, n):
    return np.where(index < n - n // 2, index, index - n)


def _unwrapped(grid, shift):
    """Mask of output modes ``k`` whose source ``k - shift`` does not wrap around.

    The unpaired Nyquist index is excluded on both ends so that real fields
    keep a Hermitian spectrum.
    """
    out = np.ones(grid.shape)
    for axis, (n, m) in enumerate(zip(grid.shape, shift)):
        k = _signed(np.arange(n), n)
        src = k - _signed(np.array(m), n)
        ok = (np.abs(src) < n / 2) & (np.abs(k) < n / 2)
        out *= ok.reshape((-1, 1) if axis == 0 else (1, -1))
    return out


class TransportKernel:
    """Noise operators acting on full complex spectra ``(m, n1, n2)``.

    Row ``r`` of a batch gets ``advect(S, x_r) / 2`` when ``halved[r]`` is
    true and ``transport_operator(S, x_r)`` otherwise, with
    ``S = sum_i dw_i sigma_i``.  When the noise fields have few Fourier
    modes, products with ``S`` are evaluated as convolutions (one
    coefficient shift per mode).  ``dealias="linear"`` drops the terms that
    wrap around the spectrum, which removes aliasing exactly while keeping
    every resolved mode; ``"2/3"`` additionally projects input and output
    onto ``|m_i| <= n_i // 3``; ``"none"`` keeps the grid product.  All three
    keep the operators skew-adjoint.  Noise fields with many modes use the
    transform route of :func:`skew_transport_batch`, where ``"linear"``
    falls back to the grid product.
    """

    def __init__(self, model, max_support=24, tol=1e-13, dealias="linear"):
        if dealias not in DEALIAS_MODES:
            raise ValueError(f"dealias must be one of {DEALIAS_MODES}, got {dealias!r}")
        self.model = model
        self.dealias = dealias
        self.grid = grid = model.grid
        if dealias == "2/3":
            mask = dealias_mask(grid)
        else:
            mask = np.ones(grid.shape)
        self.mask = mask
        k1, k2 = grid.full_wavenumbers
        self.k_max = float(np.sqrt(np.max(np.where(mask > 0, k1**2 + k2**2, 0.0))))
        if model.n_fields:
            self._s = np.array([[a, b] for a, b in model.sigmas])  # (N, 2, n1, n2)
            self._d = np.array(model.divs)
        n = grid.n1 * grid.n2
        hats = [np.stack([grid.fft_full(a) / n, grid.fft_full(b) / n, grid.fft_full(d) / n])
                for (a, b), d in zip(model.sigmas, model.divs)]
        self.sparse = False
        if hats:
            mag = np.max(np.abs(np.stack(hats)), axis=(0, 1))
            support = np.argwhere(mag > tol * max(mag.max(), 1e-300))
            if len(support) <= max_support:
                self.sparse = True
                self.shifts = [tuple(int(v) for v in m) for m in support]
                # coef[i, c, j]: field i, component (s1, s2, div), support mode j
                self.coef = np.stack([h[:, support[:, 0], support[:, 1]] for h in hats])
                ik1, ik2 = grid.full_odd_symbols
                flat = np.arange(n).reshape(grid.shape)
                # gather indices equivalent to np.roll(x, m) on the flattened spectrum
                self.gather = [np.roll(flat, m, axis=(0, 1)).ravel() for m in self.shifts]
                # input and output projections folded into the per-mode weights
                self.pm = [mask * np.roll(mask, m, axis=(0, 1)) for m in self.shifts]
                if dealias == "linear":
                    self.pm = [pm * _unwrapped(grid, m) for pm, m in zip(self.pm, self.shifts)]
                self.w1 = [pm * (np.roll(ik1, m, axis=(0, 1)) + ik1)
                           for pm, m in zip(self.pm, self.shifts)]
                self.w2 = [pm * (np.roll(ik2, m, axis=(0, 1)) + ik2)
                           for pm, m in zip(self.pm, self.shifts)]

    def cfl(self, dw):
        """Bound on the spectral radius of ``P transport_operator(S, P .)``."""
        dw = np.asarray(dw, dtype=float)
        s = np.tensordot(dw, self._s, axes=1)
        d = np.tensordot(dw, self._d, axes=1)
        return float(np.sqrt(np.max(s[0] ** 2 + s[1] ** 2)) * self.k_max
                     + 0.5 * np.max(np.abs(d)))

    def operator(self, dw, halved):
        halved = np.asarray(halved, dtype=bool)
        if self.sparse:
            c = np.tensordot(np.asarray(dw, dtype=float), self.coef, axes=1)
            # per-mode weights: halved rows get (A - d) / 4, the others A / 2
            weights = []
            for j in range(len(self.shifts)):
                a = c[0, j] * self.w1[j] + c[1, j] * self.w2[j]
                weights.append(np.stack([0.25 * (a - c[2, j] * self.pm[j]) if h else 0.5 * a
                                         for h in halved]))

            def op(xh):
                flat = xh.reshape(xh.shape[0], -1)
                t = np.take(flat, self.gather[0], axis=1).reshape(xh.shape) * weights[0]
                for idx, wj in zip(self.gather[1:], weights[1:]):
                    t += np.take(flat, idx, axis=1).reshape(xh.shape) * wj
                return t

            return op
        sigma, div_s = self.model.combined(dw)
        grid = self.grid
        mask = self.mask

        def op_transform(xh):
            x = grid.ifft_full(mask * xh)
            t = skew_transport_batch(sigma, x, grid)
            t[halved] = 0.5 * (t[halved] - 0.5 * x[halved] * div_s)
            return mask * grid.fft_full(t)

        return op_transform


class _Periodic:
    """Periodic cubic B-spline interpolation of grid fields."""

    def __init__(self, grid):
        self.grid = grid

    def coeffs(self, f):
        return ndimage.spline_filter(f, order=3, mode="grid-wrap")

    def __call__(self, coeffs, x1, x2):
        h1, h2 = self.grid.spacing
        o1, o2 = self.grid.origin
        coords = np.stack([((x1 - o1) / h1).ravel(), ((x2 - o2) / h2).ravel()])
        out = ndimage.map_coordinates(coeffs, coords, order=3, mode="grid-wrap", prefilter=False)
        return out.reshape(np.shape(x1))


def characteristics_oracle(eta0, model, path, dt, n_steps, grid, n_sub=4, increments=None):
    """Pure-transport solution by backward stochastic characteristics.

    Each node is traced backwards through the same increments the grid
    stepper uses (block 0), applying ``dX = -sigma(X) dw / 2`` with negated
    increments in reverse step order, ``n_sub`` Heun substeps per step.
    ``increments`` (shape ``(n_steps, N)``) overrides the sampled ones.
    """
    eta0 = np.asarray(eta0, dtype=float)
    if model.n_fields == 0 or n_steps == 0:
        return eta0.copy()
    if increments is None:
        increments = np.array([sample_increments(model, path, s, dt).dw for s in range(n_steps)])
    interp = _Periodic(grid)
    sig_c = [(interp.coeffs(a), interp.coeffs(b)) for a, b in model.sigmas]
    x1, x2 = (m.copy() for m in grid.mesh)
    moved = False
    for step in range(n_steps - 1, -1, -1):
        dw = -np.asarray(increments[step])
        if not np.any(dw):
            continue
        moved = True
        c1 = sum(d * c[0] for d, c in zip(dw, sig_c))
        c2 = sum(d * c[1] for d, c in zip(dw, sig_c))
        h = 1.0 / n_sub

        def vel(a, b):
            return -0.5 * h * interp(c1, a, b), -0.5 * h * interp(c2, a, b)

        for _ in range(n_sub):
            k1a, k1b = vel(x1, x2)
            k2a, k2b = vel(x1 + k1a, x2 + k1b)
            x1 = x1 + 0.5 * (k1a + k2a)
            x2 = x2 + 0.5 * (k1b + k2b)
    if not moved:
        return eta0.copy()
    return interp(interp.coeffs(eta0), x1, x2)
