"""Built-in charts, selectable by string id.

=================  ==========================================================
id                 surface
=================  ==========================================================
``flat``           the plane ``(y1, y2, 0)`` over the 2*pi torus
``sphere:R``       ``R (sin y1 cos y2, sin y1 sin y2, cos y1)``; degenerate at
                   the poles ``y1 = 0, pi`` so only valid away from them
``cylinder:R``     ``(R cos y1, R sin y1, y2)``
``torus:R,r``      the ring torus with radii ``R > r > 0``
``graph:<id>``     the graph ``(y1, y2, h(y))`` of a trigonometric height
                   ``h``; ids ``wave``, ``ripple`` and ``random<seed>``
=================  ==========================================================

All charts provide analytic derivatives up to third order.
"""
import numpy as np

from .errors import BadFieldSpec
from .fields import parse_number
from .geometry import Chart

TWO_PI = 2 * np.pi


def _vec(x, y, z):
    x, y, z = np.broadcast_arrays(x, y, z)
    return np.stack([x, y, z], axis=-1).astype(float)


def flat_chart(extents=(TWO_PI, TWO_PI)):
    zero = lambda a: 0.0 * np.asarray(a)  # noqa: E731
    return Chart(
        phi=lambda a, b: _vec(a, b, zero(a)),
        d_phi=lambda a, b: (_vec(1.0 + zero(a), zero(a), zero(b)), _vec(zero(a), 1.0 + zero(b), zero(b))),
        d2_phi=lambda a, b: (_vec(zero(a), zero(a), zero(b)),) * 3,
        d3_phi=lambda a, b: (_vec(zero(a), zero(a), zero(b)),) * 4,
        extents=tuple(extents),
        name="flat",
    )


def sphere_chart(R):
    def phi(a, b):
        return R * _vec(np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a))

    def d_phi(a, b):
        t1 = R * _vec(np.cos(a) * np.cos(b), np.cos(a) * np.sin(b), -np.sin(a))
        t2 = R * _vec(-np.sin(a) * np.sin(b), np.sin(a) * np.cos(b), 0.0 * a)
        return t1, t2

    def d2_phi(a, b):
        p12 = R * _vec(-np.cos(a) * np.sin(b), np.cos(a) * np.cos(b), 0.0 * a)
        p22 = R * _vec(-np.sin(a) * np.cos(b), -np.sin(a) * np.sin(b), 0.0 * a)
        return -phi(a, b), p12, p22

    def d3_phi(a, b):
        t1, t2 = d_phi(a, b)
        p122 = R * _vec(-np.cos(a) * np.cos(b), -np.cos(a) * np.sin(b), 0.0 * a)
        return -t1, -t2, p122, -t2

    return Chart(phi, d_phi, d2_phi, d3_phi, (TWO_PI, TWO_PI), name=f"sphere:{R:g}")


def cylinder_chart(R):
    def phi(a, b):
        return _vec(R * np.cos(a), R * np.sin(a), b + 0.0 * a)

    def d_phi(a, b):
        z = 0.0 * (a + b)
        return _vec(-R * np.sin(a), R * np.cos(a), z), _vec(z, z, 1.0 + z)

    def d2_phi(a, b):
        z = 0.0 * (a + b)
        return _vec(-R * np.cos(a), -R * np.sin(a), z), _vec(z, z, z), _vec(z, z, z)

    def d3_phi(a, b):
        z = 0.0 * (a + b)
        zero = _vec(z, z, z)
        return _vec(R * np.sin(a), -R * np.cos(a), z), zero, zero, zero

    return Chart(phi, d_phi, d2_phi, d3_phi, (TWO_PI, TWO_PI), name=f"cylinder:{R:g}")


def torus_chart(R, r):
    if not R > r > 0:
        raise BadFieldSpec(f"torus needs R > r > 0, got R={R}, r={r}")

    def phi(a, b):
        rho = R + r * np.cos(b)
        return _vec(rho * np.cos(a), rho * np.sin(a), r * np.sin(b))

    def d_phi(a, b):
        rho = R + r * np.cos(b)
        t1 = _vec(-rho * np.sin(a), rho * np.cos(a), 0.0 * a)
        t2 = _vec(-r * np.sin(b) * np.cos(a), -r * np.sin(b) * np.sin(a), r * np.cos(b) + 0.0 * a)
        return t1, t2

    def d2_phi(a, b):
        rho = R + r * np.cos(b)
        p11 = _vec(-rho * np.cos(a), -rho * np.sin(a), 0.0 * a)
        p12 = _vec(r * np.sin(b) * np.sin(a), -r * np.sin(b) * np.cos(a), 0.0 * a)
        p22 = _vec(-r * np.cos(b) * np.cos(a), -r * np.cos(b) * np.sin(a), -r * np.sin(b) + 0.0 * a)
        return p11, p12, p22

    def d3_phi(a, b):
        rho = R + r * np.cos(b)
        p111 = _vec(rho * np.sin(a), -rho * np.cos(a), 0.0 * a)
        p112 = _vec(r * np.sin(b) * np.cos(a), r * np.sin(b) * np.sin(a), 0.0 * a)
        p122 = _vec(r * np.cos(b) * np.sin(a), -r * np.cos(b) * np.cos(a), 0.0 * a)
        p222 = _vec(r * np.sin(b) * np.cos(a), r * np.sin(b) * np.sin(a), -r * np.cos(b) + 0.0 * a)
        return p111, p112, p122, p222

    return Chart(phi, d_phi, d2_phi, d3_phi, (TWO_PI, TWO_PI), name=f"torus:{R:g},{r:g}")


def graph_chart(terms, name="graph"):
    """Graph of ``h(y) = sum a * cos(k1 y1 + k2 y2 + phase)`` over the 2*pi torus.

    ``terms`` is a sequence of ``(a, k1, k2, phase)`` with integer ``k``.
    """
    terms = [tuple(float(x) for x in t) for t in terms]

    def h_parts(a, b, order):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = {}
        for amp, k1, k2, ph in terms:
            th = k1 * a + k2 * b + ph
            k = (k1, k2)
            if order == 0:
                vals = {(): amp * np.cos(th)}
            elif order == 1:
                s = -amp * np.sin(th)
                vals = {(0,): k[0] * s, (1,): k[1] * s}
            elif order == 2:
                c = -amp * np.cos(th)
                vals = {(0, 0): k[0] ** 2 * c, (0, 1): k[0] * k[1] * c, (1, 1): k[1] ** 2 * c}
            else:
                s = amp * np.sin(th)
                vals = {idx: np.prod([k[i] for i in idx]) * s
                        for idx in ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1))}
            for key, v in vals.items():
                out[key] = out.get(key, 0.0) + v
        return out

    def zero(a, b):
        return 0.0 * (np.asarray(a, dtype=float) + np.asarray(b, dtype=float))

    def phi(a, b):
        z = zero(a, b)
        h = h_parts(a, b, 0)[()] + z
        return _vec(a + z, b + z, h)

    def d_phi(a, b):
        z = zero(a, b)
        h = h_parts(a, b, 1)
        return _vec(1.0 + z, z, h[(0,)] + z), _vec(z, 1.0 + z, h[(1,)] + z)

    def d2_phi(a, b):
        z = zero(a, b)
        h = h_parts(a, b, 2)
        return tuple(_vec(z, z, h[key] + z) for key in ((0, 0), (0, 1), (1, 1)))

    def d3_phi(a, b):
        z = zero(a, b)
        h = h_parts(a, b, 3)
        return tuple(_vec(z, z, h[key] + z) for key in ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)))

    return Chart(phi, d_phi, d2_phi, d3_phi, (TWO_PI, TWO_PI), name=name)


GRAPH_HEIGHTS = {
    "wave": [(0.15, 1, 1, 0.0), (0.15, 1, -1, 0.0)],
    "ripple": [(0.2, 1, 0, 0.0), (0.1, 0, 2, -np.pi / 2)],
}


def random_graph_terms(seed, kmax=3, amplitude=0.08):
    rng = np.random.default_rng(seed)
    terms = []
    for k1 in range(0, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            if (k1, k2) == (0, 0) or (k1 == 0 and k2 < 0):
                continue
            amp = amplitude * rng.normal() / (1 + k1 * k1 + k2 * k2)
            terms.append((amp, k1, k2, rng.uniform(0, 2 * np.pi)))
    return terms


def get_chart(chart_id):
    name, _, body = str(chart_id).strip().partition(":")
    name = name.lower()
    args = [parse_number(x) for x in body.split(",") if x.strip()] if name != "graph" else []
    if name == "flat" and not args:
        return flat_chart()
    if name == "sphere" and len(args) == 1 and args[0] > 0:
        return sphere_chart(args[0])
    if name == "cylinder" and len(args) == 1 and args[0] > 0:
        return cylinder_chart(args[0])
    if name == "torus" and len(args) == 2:
        return torus_chart(*args)
    if name == "graph":
        if body in GRAPH_HEIGHTS:
            return graph_chart(GRAPH_HEIGHTS[body], name=f"graph:{body}")
        if body.startswith("random") and body[6:].isdigit():
            return graph_chart(random_graph_terms(int(body[6:])), name=f"graph:{body}")
    raise BadFieldSpec(f"unknown chart id {chart_id!r}")


REGISTERED_CHARTS = ("flat", "sphere:2", "cylinder:1", "torus:2,0.5", "graph:wave",
                     "graph:ripple", "graph:random7")
