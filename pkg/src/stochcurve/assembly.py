"""Mass, stiffness and explicit load vectors for one time level."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CyclicTridiagonal:
    """Symmetric cyclic tridiagonal matrix.

    ``off[i]`` is the entry coupling ``i`` and ``i+1`` (mod n); ``off[-1]``
    is the corner coupling ``n-1`` and ``0``.
    """

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        off = np.asarray(self.off, dtype=float)
        if diag.ndim != 1 or diag.shape != off.shape:
            raise ValueError("diag and off must be 1-d arrays of equal length")
        if len(diag) < 3:
            raise ValueError("cyclic tridiagonal needs n >= 3")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", off)

    @property
    def n(self):
        return len(self.diag)

    def __add__(self, other):
        return CyclicTridiagonal(self.diag + other.diag, self.off + other.off)

    def scaled(self, alpha):
        return CyclicTridiagonal(alpha * self.diag, alpha * self.off)

    def matvec(self, v):
        """``A @ v`` along the last axis (works row-wise on a batch)."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n:
            raise ValueError(f"dimension mismatch: {v.shape[-1]} vs {self.n}")
        off = self.off
        out = self.diag * v
        out[..., :-1] += off[:-1] * v[..., 1:]
        out[..., -1] += off[-1] * v[..., 0]
        out[..., 1:] += off[:-1] * v[..., :-1]
        out[..., 0] += off[-1] * v[..., -1]
        return out

    def to_dense(self):
        n = self.n
        A = np.diag(self.diag)
        idx = np.arange(n)
        A[idx, (idx + 1) % n] += self.off
        A[(idx + 1) % n, idx] += self.off
        return A


def shift_left(v):
    """``v[i+1]`` at slot ``i`` (cyclic, last axis)."""
    return np.concatenate((v[..., 1:], v[..., :1]), axis=-1)


def shift_right(v):
    """``v[i-1]`` at slot ``i`` (cyclic, last axis)."""
    return np.concatenate((v[..., -1:], v[..., :-1]), axis=-1)


def _check_lengths(q):
    if not np.all(q > 0):
        raise ValueError("edge lengths must be positive")


def assemble_mass(dc):
    q = dc.edge_lengths
    _check_lengths(q)
    q_next = shift_left(q)
    return CyclicTridiagonal((q + q_next) / 3.0, q_next / 6.0)


def assemble_stiffness(dc, D=1.0):
    """``D`` times the curve-weighted stiffness matrix."""
    if D < 0:
        raise ValueError("diffusivity must be non-negative")
    q = dc.edge_lengths
    _check_lengths(q)
    inv = 1.0 / q
    inv_next = shift_left(inv)
    return CyclicTridiagonal(D * (inv + inv_next), -D * inv_next)


def advection_load(c_prev, w_nodal, mesh):
    """``a_i = <c_h w_h, d/dx phi_i>`` integrated exactly (no time-step factor).

    Works row-wise when ``c_prev`` is a batch of shape (S, N).
    """
    c = np.asarray(c_prev, dtype=float)
    w = np.asarray(w_nodal, dtype=float)
    if c.shape[-1] != mesh.N or w.shape[-1] != mesh.N:
        raise ValueError("advection load: dimension mismatch")
    c_left = shift_right(c)
    w_left = shift_right(w)
    # integral of c*w over element ending at node i, divided by h
    elem = (2.0 * c_left * w_left + c_left * w + c * w_left + 2.0 * c * w) / 6.0
    # phi_i has slope +1/h on its left element and -1/h on its right one
    return elem - shift_left(elem)


def reaction_load(c_prev, r, M_prev):
    """``M^{k-1} I_h(r(c^{k-1}))`` (no time-step factor)."""
    values = np.asarray(r(np.asarray(c_prev, dtype=float)), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("reaction term is not finite")
    return M_prev.matvec(values)
