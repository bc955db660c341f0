"""Geometric Ritz projection onto piecewise-linear functions on a curve.

``R_h z`` matches ``z`` in the mean over the curve and in the arc-length
energy: ``<d_s R_h z, d_s phi> = <d_s z, d_s phi>`` in ``L2(ds)`` for every hat
``phi``. Integrals use the exact length element ``|u_x(t, .)|`` of the smooth
curve with 5-point Gauss-Legendre per element.
"""
from dataclasses import dataclass, field

import numpy as np

from .geometry import GAUSS_NODES, GAUSS_WEIGHTS, Mesh

_ERR_X, _ERR_W = np.polynomial.legendre.leggauss(10)
ERR_NODES = 0.5 * (_ERR_X + 1.0)
ERR_WEIGHTS = 0.5 * _ERR_W


def _element_nodes(N):
    """(left, right) array-node indices of every element row of ``Mesh.element_points``."""
    right = np.arange(N)
    return (right - 1) % N, right


@dataclass
class RitzSystem:
    stiffness: np.ndarray  # (N, N) dense, arc-length weighted
    load: np.ndarray  # <d_s z, d_s phi_i>
    mean_weights: np.ndarray  # int phi_i ds
    mean_target: float  # int z ds


def ritz_system(z, dz, curve, t, mesh):
    N, h = mesh.N, mesh.h
    x = mesh.element_points(GAUSS_NODES)
    wq = GAUSS_WEIGHTS * h
    speed = np.asarray(curve.length_element(t, x), dtype=float)
    if not np.all(np.isfinite(speed)) or np.any(speed <= 0):
        raise ValueError("length element must be positive and finite")
    zq = np.asarray(z(x), dtype=float)
    dzq = np.asarray(dz(x), dtype=float)
    if not (np.all(np.isfinite(zq)) and np.all(np.isfinite(dzq))):
        raise ValueError("z or its derivative is not finite at quadrature points")

    left, right = _element_nodes(N)
    omega = (wq / speed).sum(axis=1) / h**2  # int (1/h)^2 dx/|u_x| per element
    K = np.zeros((N, N))
    np.add.at(K, (left, left), omega)
    np.add.at(K, (right, right), omega)
    np.add.at(K, (left, right), -omega)
    np.add.at(K, (right, left), -omega)

    flux = (wq * dzq / speed).sum(axis=1) / h
    g = np.zeros(N)
    np.add.at(g, right, flux)
    np.add.at(g, left, -flux)

    m = np.zeros(N)
    np.add.at(m, left, (wq * (1.0 - GAUSS_NODES) * speed).sum(axis=1))
    np.add.at(m, right, (wq * GAUSS_NODES * speed).sum(axis=1))
    target = float((wq * zq * speed).sum())
    return RitzSystem(K, g, m, target)


@dataclass
class RitzResult:
    coeffs: np.ndarray
    condition: float
    system: RitzSystem = field(repr=False)


def ritz_project(z, dz, curve, t, mesh):
    """Ritz projection of ``z`` (derivative ``dz``) on the curve at time ``t``."""
    sys = ritz_system(z, dz, curve, t, mesh)
    N = mesh.N
    A = np.zeros((N + 1, N + 1))
    A[:N, :N] = sys.stiffness
    A[:N, N] = sys.mean_weights
    A[N, :N] = sys.mean_weights
    rhs = np.append(sys.load, sys.mean_target)
    sol = np.linalg.solve(A, rhs)
    return RitzResult(sol[:N], float(np.linalg.cond(A)), sys)


def galerkin_residual(result):
    """``<d_s(z - R_h z), d_s phi_i>`` for every hat."""
    return result.system.load - result.system.stiffness @ result.coeffs


def _fe_values(coeffs, local):
    """Values and slopes of the piecewise-linear function at local points of each element."""
    N = len(coeffs)
    left, right = _element_nodes(N)
    a, b = coeffs[left], coeffs[right]
    vals = a[:, None] * (1.0 - local) + b[:, None] * local
    return vals, (b - a) * N / (2.0 * np.pi)


def fe_errors(coeffs, z, dz, curve, t, mesh):
    """Errors of a piecewise-linear ``coeffs`` against ``z``.

    Returns ``(L2, H1-seminorm, arc-length energy seminorm)``; the first two
    are over the parameter circle.
    """
    x = mesh.element_points(ERR_NODES)
    wq = ERR_WEIGHTS * mesh.h
    vals, slope = _fe_values(np.asarray(coeffs, dtype=float), ERR_NODES)
    e = np.asarray(z(x)) - vals
    de = np.asarray(dz(x)) - slope[:, None]
    l2 = np.sqrt((wq * e**2).sum())
    h1 = np.sqrt((wq * de**2).sum())
    energy = None
    if curve is not None and curve.speed is not None:
        energy = np.sqrt((wq * de**2 / curve.length_element(t, x)).sum())
    return float(l2), float(h1), None if energy is None else float(energy)


def loglog_slope(h, err, floor=1e-12):
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if np.any(err <= floor):
        return None
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class RitzReport:
    rows: list  # (N, h, L2 error, H1 error, condition)
    l2_slope: object
    h1_slope: object

    def csv_rows(self):
        return [("N", "h", "l2_error", "h1_error", "condition")] + self.rows


def ritz_convergence_report(z, dz, curve, t, N_list):
    N_list = list(N_list)
    if len(N_list) < 3 or sorted(N_list) != N_list:
        raise ValueError("need at least three ascending mesh sizes")
    rows = []
    for N in N_list:
        mesh = Mesh(N)
        res = ritz_project(z, dz, curve, t, mesh)
        l2, h1, _ = fe_errors(res.coeffs, z, dz, curve, t, mesh)
        rows.append((N, mesh.h, l2, h1, res.condition))
    h = [r[1] for r in rows]
    return RitzReport(rows, loglog_slope(h, [r[2] for r in rows]),
                      loglog_slope(h, [r[3] for r in rows]))
