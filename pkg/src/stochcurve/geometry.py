"""Periodic meshes on the parameter circle and the curves they carry.

Nodes follow the convention ``x_j = 2*pi*j/N`` for ``j = 1..N`` with
``x_0`` identified with ``x_N``; array slot ``i`` holds node ``j = i + 1``.
Element ``j`` is the segment ``[x_{j-1}, x_j]``, so ``edge_lengths[i]`` is the
chord ending at array node ``i``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi

# Gauss-Legendre rule on [0, 1], shared by the quadrature oracles and the
# Ritz projection.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
GAUSS_NODES = 0.5 * (_GL_X + 1.0)
GAUSS_WEIGHTS = 0.5 * _GL_W


@dataclass(frozen=True)
class Mesh:
    N: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"mesh needs at least 3 nodes, got N={self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "h", TWO_PI / self.N)
        nodes = TWO_PI * np.arange(1, self.N + 1) / self.N
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    def element_points(self, local):
        """Points at local coordinates ``local`` in [0,1] of every element.

        Returns shape (N, len(local)); row ``i`` is element ``i+1`` running from
        ``x_i`` (``x_0 = 0``) to ``x_{i+1}``.
        """
        left = TWO_PI * np.arange(self.N) / self.N
        return left[:, None] + self.h * np.asarray(local)[None, :]


def build_uniform_mesh(N):
    return Mesh(N)


@dataclass(frozen=True)
class CurvePath:
    """A time-dependent closed curve ``u(t, x)`` parametrised over the circle.

    ``evaluator(t, x)`` returns an array of shape ``x.shape + (2,)``.
    ``speed(t, x)`` is the length element ``|u_x(t, x)|``; it is only needed
    by the Ritz projection and may be omitted for custom curves.
    """

    kind: str
    evaluator: Callable
    speed: Optional[Callable] = None
    horizon: float = np.inf
    params: dict = field(default_factory=dict)

    def __call__(self, t, x):
        return self.evaluator(t, np.asarray(x, dtype=float))

    def length_element(self, t, x):
        if self.speed is None:
            raise ValueError(f"curve {self.kind!r} has no length element")
        return self.speed(t, np.asarray(x, dtype=float))


def _polar(radius, x):
    return np.stack([radius * np.cos(x), radius * np.sin(x)], axis=-1)


def stationary_circle(radius=1.0):
    return CurvePath(
        "StationaryCircle",
        lambda t, x: _polar(radius, x),
        lambda t, x: np.full_like(x, radius, dtype=float),
        params={"radius": radius},
    )


def shrinking_circle(rate=1.0 / 3.0):
    """Self-similarly shrinking unit circle, ``u = (1 - rate*t)(cos x, sin x)``."""

    return CurvePath(
        "ShrinkingCircle",
        lambda t, x: _polar(1.0 - rate * t, x),
        lambda t, x: np.full_like(x, 1.0 - rate * t, dtype=float),
        horizon=1.0 / rate,
        params={"rate": rate},
    )


def flower(petals=3, rate=1.0 / 3.0):
    """``u = (1 - rate*t) sin(petals*x) (cos x, sin x)``."""

    def evaluate(t, x):
        return _polar((1.0 - rate * t) * np.sin(petals * x), x)

    def speed(t, x):
        a = abs(1.0 - rate * t)
        return a * np.sqrt((petals * np.cos(petals * x)) ** 2 + np.sin(petals * x) ** 2)

    return CurvePath(
        "Flower", evaluate, speed, horizon=1.0 / rate, params={"petals": petals, "rate": rate}
    )


def custom_curve(evaluator, speed=None, horizon=np.inf):
    return CurvePath("Custom", evaluator, speed, horizon=horizon)


@dataclass(frozen=True)
class DiscreteCurve:
    t: float
    vertices: np.ndarray = field(repr=False)
    edge_lengths: np.ndarray = field(repr=False)

    @property
    def N(self):
        return len(self.edge_lengths)

    def length_element(self, h):
        """Piecewise-constant ``|u_hx|`` per element (``q_j / h``)."""
        return self.edge_lengths / h

    def regularity_ratio(self, h):
        """Observed (min, max) of ``q_j / h``."""
        ratio = self.edge_lengths / h
        return float(ratio.min()), float(ratio.max())


def discretize_curve(curve, t, mesh):
    vertices = np.asarray(curve(t, mesh.nodes), dtype=float)
    if vertices.shape != (mesh.N, 2):
        raise ValueError(f"curve evaluator returned shape {vertices.shape}, expected ({mesh.N}, 2)")
    if not np.all(np.isfinite(vertices)):
        raise ValueError(f"curve {curve.kind} is not finite at t={t}")
    # prepend the last vertex so slot 0 measures the chord from x_0 = x_N
    diff = np.diff(vertices, axis=0, prepend=vertices[-1:])
    q = np.hypot(diff[:, 0], diff[:, 1])
    vertices.flags.writeable = False
    q.flags.writeable = False
    return DiscreteCurve(float(t), vertices, q)


def interpolate_nodal(f, mesh):
    values = np.asarray(f(mesh.nodes), dtype=float)
    values = np.broadcast_to(values, (mesh.N,)).copy()
    if not np.all(np.isfinite(values)):
        raise ValueError("interpolant has non-finite nodal values")
    return values


def l2_norm(c, mesh):
    """Exact L2 norm over the circle of the piecewise-linear function ``c``."""
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != mesh.N:
        raise ValueError(f"expected {mesh.N} coefficients, got {c.shape[-1]}")
    nxt = np.concatenate((c[..., 1:], c[..., :1]), axis=-1)
    quad = (c * c + c * nxt + nxt * nxt) * (mesh.h / 3.0)
    return np.sqrt(np.maximum(quad.sum(axis=-1), 0.0))


def weighted_mass(c, dc):
    """``<c_h |u_hx|, 1>``, i.e. the sum of the weighted mass matrix applied to ``c``."""
    c = np.asarray(c, dtype=float)
    q = dc.edge_lengths
    if c.shape[-1] != len(q):
        raise ValueError(f"expected {len(q)} coefficients, got {c.shape[-1]}")
    # element j contributes q_j (c_{j-1} + c_j) / 2
    left = np.concatenate((c[..., -1:], c[..., :-1]), axis=-1)
    return ((left + c) * q).sum(axis=-1) / 2.0
