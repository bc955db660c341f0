"""Q-Wiener noise: Fourier eigenbasis, spectrum, sigma maps and the Brownian lattice.

Lattice contract
----------------
Every fine increment is addressed by ``(master_seed, path, mode, fine_step)``.
With ``fmix`` the (bijective) splitmix64 finaliser on 64-bit words::

    key     = fmix(fmix(master_seed) ^ (path * 0x9E3779B97F4A7C15 + 1))
    counter = (mode << 40) | fine_step
    bits    = fmix(key ^ fmix(counter + 0x632BE59BD9B4E019))
    u       = ((bits >> 11) + 0.5) * 2**-53          # in (0, 1)
    z       = rint(ndtri(u) * 2**32) * 2**-32        # standard normal on a 2**-32 grid

and the fine increment is ``sqrt(dt_ref) * z``. Because every ``z`` lies on the
same dyadic grid, sums of up to ~2**20 of them are exact in float64, so a
coarse increment (the sum over its ``p`` fine steps) is an exact function of the
fine lattice whatever the summation order.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import zeta

from ._backend import BACKEND, get_kernels

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
MAX_MODE = 1 << 24
MAX_STEP = 1 << 40


def _fmix_int(z):
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def path_key(master_seed, path):
    return _fmix_int(_fmix_int(master_seed) ^ ((path * GOLDEN + 1) & MASK64))


def mode_frequency(l):
    """Frequency ``n`` of mode ``l`` (0 for the constant mode)."""
    return np.asarray(l) // 2


def basis_eval(l, x):
    if l < 1:
        raise ValueError("mode index starts at 1")
    x = np.asarray(x, dtype=float)
    if l == 1:
        return np.full_like(x, 1.0 / np.sqrt(2.0 * np.pi))
    n = l // 2
    trig = np.sin if l % 2 == 0 else np.cos
    return trig(n * x) / np.sqrt(np.pi)


@dataclass(frozen=True)
class NoiseSpectrum:
    b1: float = 1.0
    rbar: float = 1.0
    L: int = 1

    def __post_init__(self):
        if self.b1 < 0 or self.rbar <= 0 or self.L < 1:
            raise ValueError(f"invalid spectrum {self}")

    def coefficients(self, L=None):
        """``b_l`` for ``l = 1..L``."""
        L = self.L if L is None else L
        l = np.arange(1, L + 1)
        n = np.maximum(l // 2, 1).astype(float)
        b = n ** (-2.0 * self.rbar - 1.0)
        b[0] = self.b1
        return b

    def trace(self, L=None):
        return float(self.coefficients(L).sum())


def spectrum_coeff(l, spec):
    if l < 1:
        raise ValueError("mode index starts at 1")
    if l == 1:
        return spec.b1
    return float((l // 2) ** (-2.0 * spec.rbar - 1.0))


def truncation_tail(spec, L):
    """Neglected trace ``sum_{l > L} b_l`` and its integral upper bound.

    Diagnostic only: returns ``(tail, bound)``.
    """
    alpha = 2.0 * spec.rbar + 1.0
    n0 = L // 2
    tail = 2.0 * float(zeta(alpha, n0 + 1))
    bound = 2.0 * n0 ** (1.0 - alpha) / (alpha - 1.0) if n0 > 0 else np.inf
    if L % 2 == 0 and n0 >= 1:
        # cos mode of frequency n0 is also dropped
        extra = n0 ** (-alpha)
        tail += extra
        bound += extra
    return tail, bound


@dataclass(frozen=True)
class SigmaSpec:
    """Noise amplitude ``sigma(c)``; kinds Constant, LogisticClip, LinearClamp, Custom."""

    kind: str
    sigma_bar: float = 0.0
    func: Optional[Callable] = None
    cap: float = 100.0

    def __post_init__(self):
        if self.kind not in ("Constant", "LogisticClip", "LinearClamp", "Custom"):
            raise ValueError(f"unknown sigma kind {self.kind!r}")
        if self.sigma_bar < 0:
            raise ValueError("sigma_bar must be non-negative")
        if self.kind == "Custom" and self.func is None:
            raise ValueError("Custom sigma needs func")

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        if self.kind == "Constant":
            return np.full_like(c, self.sigma_bar)
        if self.kind == "LogisticClip":
            return np.maximum(self.sigma_bar * c * (1.0 - c), 0.0)
        if self.kind == "LinearClamp":
            return np.minimum(np.maximum(self.sigma_bar * c, 0.0), self.cap)
        return np.asarray(self.func(c), dtype=float)

    @property
    def is_zero(self):
        return self.kind != "Custom" and self.sigma_bar == 0.0


@dataclass(frozen=True)
class BrownianLattice:
    master_seed: int
    S: int
    L_max: int
    M_ref: int
    dt_ref: float
    backend: str = field(default=BACKEND, compare=False)

    def __post_init__(self):
        if not (0 <= self.master_seed <= MASK64):
            raise ValueError("master_seed must fit in 64 bits")
        if not (1 <= self.L_max < MAX_MODE) or not (1 <= self.M_ref < MAX_STEP):
            raise ValueError("lattice dimensions out of range")
        if self.S < 1 or not self.dt_ref > 0:
            raise ValueError("need S >= 1 and dt_ref > 0")

    def keys(self, paths):
        paths = np.atleast_1d(paths)
        if np.any(paths < 0) or np.any(paths >= self.S):
            raise IndexError(f"path index out of range [0, {self.S})")
        return np.array([path_key(self.master_seed, int(s)) for s in paths], dtype=np.uint64)

    def _check(self, L, coarse_step, p):
        if not (1 <= L <= self.L_max):
            raise IndexError(f"mode count {L} exceeds L_max={self.L_max}")
        if p < 1 or coarse_step < 0 or (coarse_step + 1) * p > self.M_ref:
            raise IndexError(f"step {coarse_step} with p={p} outside {self.M_ref} fine steps")

    def standard_sums(self, paths, L, coarse_step, p, keys=None):
        """Sums of the ``p`` grid-quantised standard normals, shape (len(paths), L)."""
        self._check(L, coarse_step, p)
        if keys is None:
            keys = self.keys(paths)
        out = np.empty((len(keys), L))
        modes = np.arange(1, L + 1, dtype=np.int64)
        get_kernels(self.backend).lattice_sums(keys, modes, coarse_step * p, p, out)
        return out

    def increments(self, paths, L, coarse_step, p, keys=None):
        """Coarse Brownian increments for modes ``1..L``, shape (len(paths), L)."""
        return np.sqrt(self.dt_ref) * self.standard_sums(paths, L, coarse_step, p, keys)


def brownian_increment(lat, path, mode, coarse_step, p):
    if mode < 1:
        raise IndexError("mode index starts at 1")
    lat._check(mode, coarse_step, p)
    keys = lat.keys([path])
    out = np.empty((1, 1))
    get_kernels(lat.backend).lattice_sums(
        keys, np.array([mode], dtype=np.int64), coarse_step * p, p, out
    )
    return float(np.sqrt(lat.dt_ref) * out[0, 0])


def basis_hat_table(mesh, L):
    """``G[l-1, i] = <g_l, phi_i>`` over the circle, shape (L, N)."""
    l = np.arange(2, L + 1)
    n = (l // 2).astype(float)
    h = mesh.h
    # -f(x-h) + 2 f(x) - f(x+h) = 4 sin^2(nh/2) f(x) for f = sin(n.), cos(n.)
    factor = 4.0 * np.sin(0.5 * n * h) ** 2 / (n * n * h * np.sqrt(np.pi))
    phase = n[:, None] * mesh.nodes[None, :]
    trig = np.where((l % 2 == 0)[:, None], np.sin(phase), np.cos(phase))
    G = np.empty((L, mesh.N))
    G[0] = h / np.sqrt(2.0 * np.pi)
    G[1:] = factor[:, None] * trig
    return G


def basis_hat_inner(l, i, mesh):
    """``<g_l, phi_i>`` for mode ``l >= 1`` and array node ``i`` (0-based)."""
    if l < 1:
        raise ValueError("mode index starts at 1")
    return float(basis_hat_table(mesh, l)[l - 1, i % mesh.N])


class NoiseContext:
    """Everything the stepper needs to form noise loads on one mesh.

    Holds the precomputed ``sqrt(b_l) <g_l, phi_i>`` table.
    """

    def __init__(self, lattice, spectrum, sigma, mesh, L=None):
        self.lattice = lattice
        self.spectrum = spectrum
        self.sigma = sigma
        self.mesh = mesh
        self.L = spectrum.L if L is None else L
        if self.L > lattice.L_max:
            raise ValueError(f"L={self.L} exceeds lattice L_max={lattice.L_max}")
        sqrt_b = np.sqrt(spectrum.coefficients(self.L))
        self.active = not sigma.is_zero and np.any(sqrt_b > 0)
        self.table = sqrt_b[:, None] * basis_hat_table(mesh, self.L)

    def load(self, c_prev, keys, coarse_step, p):
        """Noise load rows for a batch ``c_prev`` of shape (S, N)."""
        c_prev = np.atleast_2d(c_prev)
        if not self.active:
            return np.zeros_like(c_prev)
        dbeta = self.lattice.increments(None, self.L, coarse_step, p, keys=keys)
        return self.sigma(c_prev) * (dbeta @ self.table)


def noise_load(c_prev, lat, spec, sigma, k, p, mesh, path=0):
    """Noise load of one path for coarse step ``k`` (0-based, covering fine steps kp..kp+p-1)."""
    ctx = NoiseContext(lat, spec, sigma, mesh)
    return ctx.load(np.asarray(c_prev, dtype=float)[None, :], lat.keys([path]), k, p)[0]
