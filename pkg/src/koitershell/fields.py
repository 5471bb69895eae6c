"""Scalar field specifications resolved onto a grid.

Recognised ids::

    zero                     identically 0
    const:c                  constant c
    sin:m1,m2[,amp]          amp * sin(k . y), k the wavevector of integer mode (m1, m2)
    cos:m1,m2[,amp]          amp * cos(k . y)
    gaussian:a,b[,width]     exp(-((y1-a)^2 + (y2-b)^2) / width^2), periodized
    random:seed[,kmax]       smooth random field, modes with |m| <= kmax (default 4)
    grid:<path>              a KSH1 grid dump of matching shape

Numbers accept ``pi`` multiples such as ``pi``, ``-2pi`` or ``0.5pi``.
"""
import numpy as np

from .errors import BadFieldSpec
from .gridio import read_grid_dump


def parse_number(token):
    token = token.strip().lower().replace(" ", "")
    try:
        if token.endswith("pi"):
            head = token[:-2].rstrip("*")
            if head in ("", "+"):
                coeff = 1.0
            elif head == "-":
                coeff = -1.0
            else:
                coeff = float(head)
            return coeff * np.pi
        return float(token)
    except ValueError:
        raise BadFieldSpec(f"cannot parse number {token!r}") from None


def _args(body, n_min, n_max):
    parts = [p for p in body.split(",") if p.strip()] if body else []
    if not n_min <= len(parts) <= n_max:
        raise BadFieldSpec(f"expected {n_min}..{n_max} arguments, got {body!r}")
    return [parse_number(p) for p in parts]


def periodized_gaussian(grid, center, width=1.0, images=1):
    """Sum of the Gaussian over the nearest ``(2*images+1)^2`` lattice translates."""
    y1, y2 = grid.mesh
    ly1, ly2 = grid.extents
    out = np.zeros(grid.shape)
    for p in range(-images, images + 1):
        for q in range(-images, images + 1):
            r2 = (y1 - center[0] - p * ly1) ** 2 + (y2 - center[1] - q * ly2) ** 2
            out += np.exp(-r2 / width**2)
    return out


def smooth_random_field(grid, seed, kmax=4, amplitude=1.0):
    """Band-limited random field, unit RMS times ``amplitude``."""
    rng = np.random.default_rng(seed)
    vh = np.zeros(grid.spectral_shape, dtype=complex)
    for m1 in range(-kmax, kmax + 1):
        for m2 in range(0, kmax + 1):
            if m1 * m1 + m2 * m2 > kmax * kmax or (m1, m2) == (0, 0):
                continue
            if m2 == 0 and m1 < 0:
                continue
            vh[grid.mode_index(m1, m2)] = rng.normal() + 1j * rng.normal()
    v = grid.ifft(vh)
    rms = np.sqrt(np.mean(v**2))
    return amplitude * v / rms


def resolve_scalar_field(spec, grid):
    if isinstance(spec, (int, float)):
        return np.full(grid.shape, float(spec))
    if isinstance(spec, np.ndarray):
        if spec.shape != grid.shape:
            raise BadFieldSpec(f"array shape {spec.shape} does not match grid {grid.shape}")
        return np.array(spec, dtype=float)
    spec = str(spec).strip()
    name, _, body = spec.partition(":")
    name = name.lower()
    y1, y2 = grid.mesh
    if name == "zero":
        return np.zeros(grid.shape)
    if name == "const":
        (c,) = _args(body, 1, 1)
        return np.full(grid.shape, c)
    if name in ("sin", "cos"):
        vals = _args(body, 2, 3)
        k1, k2 = grid.wavevector(vals[0], vals[1])
        amp = vals[2] if len(vals) == 3 else 1.0
        fn = np.sin if name == "sin" else np.cos
        return amp * fn(k1 * y1 + k2 * y2)
    if name == "gaussian":
        vals = _args(body, 2, 3)
        width = vals[2] if len(vals) == 3 else 1.0
        return periodized_gaussian(grid, (vals[0], vals[1]), width)
    if name == "random":
        vals = _args(body, 1, 2)
        kmax = int(vals[1]) if len(vals) == 2 else 4
        return smooth_random_field(grid, int(vals[0]), kmax)
    if name == "grid":
        try:
            field, _ = read_grid_dump(body)
        except OSError as exc:
            raise BadFieldSpec(f"cannot read grid dump {body!r}: {exc}") from None
        if field.shape != grid.shape:
            raise BadFieldSpec(f"dump {body!r} has shape {field.shape}, grid is {grid.shape}")
        return field
    raise BadFieldSpec(f"unknown field spec {spec!r}")
