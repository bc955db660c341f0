"""Direct O(n) solver for symmetric positive-definite cyclic tridiagonal systems.

The corner coupling ``a`` is split off as a symmetric rank-one term
``s w w^T`` with ``w = e_0 + theta e_{n-1}``, ``s = -|a|`` and
``theta = -sign(a)``. The remainder ``T = A - s w w^T`` adds ``|a|`` to the
first and last diagonal entries, so it stays SPD whenever ``A`` is, and the
Sherman-Morrison formula recovers ``A^{-1} b`` from two solves with ``T``.
"""
import numpy as np

from ._backend import BACKEND, get_kernels


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A nonpositive pivot appeared while factoring."""


class CyclicFactor:
    """Reusable factorization of a :class:`CyclicTridiagonal` matrix."""

    def __init__(self, A, backend=None):
        self.backend = backend or BACKEND
        self._k = get_kernels(self.backend)
        self.n = A.n
        a = float(A.off[-1])
        self.s = -abs(a)
        self.theta = -1.0 if a > 0 else 1.0
        diag = A.diag.copy()
        diag[0] -= self.s
        diag[-1] -= self.s * self.theta**2
        sub = np.ascontiguousarray(A.off, dtype=float)
        d, l, pivot = self._k.tridiag_ldl(np.ascontiguousarray(diag), sub)
        if d is None:
            raise NotPositiveDefiniteError(f"nonpositive pivot at row {pivot}")
        self._d, self._l = d, l
        if self.s == 0.0:
            self._z = None
            self.scale = 0.0
            return
        w = np.zeros((1, self.n))
        w[0, 0] = 1.0
        w[0, -1] = self.theta
        z = self._k.ldl_solve_rows(self._d, self._l, w)[0]
        denom = 1.0 + self.s * (z[0] + self.theta * z[-1])
        if not denom > 0.0:
            raise NotPositiveDefiniteError("rank-one correction is not positive")
        self._z = np.ascontiguousarray(z)
        self.scale = self.s / denom

    def solve_rows(self, B):
        """Solve ``A x = b`` for every row ``b`` of the 2-d array ``B`` (copied)."""
        rows = np.array(B, dtype=float, order="C", copy=True)
        if rows.ndim != 2 or rows.shape[1] != self.n:
            raise ValueError(f"expected (m, {self.n}) right-hand sides, got {rows.shape}")
        self._k.ldl_solve_rows(self._d, self._l, rows)
        if self._z is not None:
            self._k.cyclic_correct_rows(rows, self._z, self.scale, self.theta)
        return rows

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return self.solve_rows(b[None, :])[0]
        return self.solve_rows(b)


def solve_spd_cyclic(A, b, backend=None):
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != A.n:
        raise ValueError(f"dimension mismatch: {b.shape[-1]} vs {A.n}")
    return CyclicFactor(A, backend).solve(b)
