"""Semi-implicit Euler-Maruyama time stepping.

Each step solves

    (M^k + dt D S^k) c^k = M^{k-1} c^{k-1} - dt a(c^{k-1}, w^k)
                           + dt M^{k-1} r(c^{k-1}) + xi_k(c^{k-1})

with ``a`` the advection load, ``xi_k`` the noise load and the matrices taken
from the interpolated curve at ``t_k`` and ``t_{k-1}``. Coefficient vectors
are plain numpy arrays of length N; a batch of sample paths is an (S, N)
array advanced together, since the geometry is shared by all paths.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import advection_load, assemble_mass, assemble_stiffness
from .geometry import discretize_curve, interpolate_nodal, l2_norm, weighted_mass
from .linalg import CyclicFactor


class BlowUpError(RuntimeError):
    """A sample path produced non-finite coefficients."""

    def __init__(self, path, step):
        super().__init__(f"path {path} blew up at step {step}")
        self.path = path
        self.step = step


def _zero(x):
    return np.zeros_like(x)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    T: float
    D: float = 0.0
    advection: Optional[Callable] = None  # w_T(t, x)
    reaction: Optional[Callable] = None  # r(c), applied nodewise
    initial: Callable = _zero  # c_0(x)

    def __post_init__(self):
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if self.D < 0:
            raise ValueError("diffusivity must be non-negative")
        M = round(self.T / self.dt)
        if M < 1 or abs(M * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not a multiple of dt={self.dt}")

    @property
    def M(self):
        return int(round(self.T / self.dt))

    def step_of(self, t):
        k = int(round(t / self.dt))
        if k < 0 or k > self.M or abs(k * self.dt - t) > 1e-9 * max(self.T, 1.0):
            raise ValueError(f"time {t} is not on the time grid")
        return k


class _Level:
    """Matrices of one time level."""

    __slots__ = ("dc", "mass", "stiff")

    def __init__(self, curve, t, mesh, D):
        self.dc = discretize_curve(curve, t, mesh)
        self.mass = assemble_mass(self.dc)
        self.stiff = assemble_stiffness(self.dc, D) if D > 0 else None


@dataclass
class PathBatch:
    """Results of advancing a batch of sample paths to the final time."""

    paths: np.ndarray
    final: np.ndarray
    snapshots: dict = field(default_factory=dict)  # step -> (S, N)
    times: np.ndarray = None
    weighted_mass: np.ndarray = None  # (S, M+1)
    l2: np.ndarray = None  # (S, M+1)
    max_norm: np.ndarray = None  # running max of ||c^k||_H at the end
    blowup_step: np.ndarray = None  # -1 when finite throughout
    sup_energy: np.ndarray = None  # sup_k ||c^k sqrt|u_hx^k|||^2
    increment_energy: np.ndarray = None  # sum_k ||(c^k - c^{k-1}) sqrt|u_hx^{k-1}|||^2
    gradient_energy: np.ndarray = None  # dt sum_k ||c_hx^k / sqrt|u_hx^k|||^2

    @property
    def blown_up(self):
        return self.blowup_step >= 0


def simulate(cfg, curve, mesh, noise=None, paths=(0,), p=1, snapshot_times=(),
             track=True, energies=False, c0=None):
    """Advance the sample paths ``paths`` from 0 to ``cfg.T``.

    ``noise`` is a :class:`~stochcurve.noise.NoiseContext` on ``mesh`` or None;
    step ``k`` draws the lattice's coarse increment ``k-1`` aggregated over
    ``p`` fine steps, so ``cfg.dt`` must equal ``p * dt_ref``. Blown-up paths
    are flagged in ``blowup_step`` and carried as NaN; nothing is raised.
    ``track`` records the weighted-mass and L2 series, ``energies`` the three
    a-priori quantities.
    """
    paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    S, N, M, dt = len(paths), mesh.N, cfg.M, cfg.dt
    keys = None
    if noise is not None:
        if noise.mesh.N != N:
            raise ValueError("noise context built for a different mesh")
        lat = noise.lattice
        if abs(p * lat.dt_ref - dt) > 1e-9 * dt:
            raise ValueError(f"dt={dt} does not match p*dt_ref={p * lat.dt_ref}")
        if M * p > lat.M_ref:
            raise ValueError("lattice has too few fine steps for this run")
        keys = lat.keys(paths)
        if not noise.active:
            noise = None

    snap_steps = {cfg.step_of(t) for t in snapshot_times}
    if c0 is None:
        c0 = interpolate_nodal(cfg.initial, mesh)
    c = np.array(np.broadcast_to(np.asarray(c0, dtype=float), (S, N)))
    out = PathBatch(paths=paths, final=None, times=dt * np.arange(M + 1))
    blowup = np.full(S, -1, dtype=np.int64)
    if 0 in snap_steps:
        out.snapshots[0] = c.copy()

    prev = _Level(curve, 0.0, mesh, cfg.D)
    if track:
        wm = np.empty((S, M + 1))
        l2 = np.empty((S, M + 1))
        wm[:, 0] = weighted_mass(c, prev.dc)
        l2[:, 0] = l2_norm(c, mesh)
    if energies:
        sup_e = np.sum(c * prev.mass.matvec(c), axis=1)
        inc_e = np.zeros(S)
        grad_e = np.zeros(S)

    factor, factor_q = None, None
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(1, M + 1):
            t = k * dt
            cur = _Level(curve, t, mesh, cfg.D)
            if factor is None or not np.array_equal(cur.dc.edge_lengths, factor_q):
                A = cur.mass if cur.stiff is None else cur.mass + cur.stiff.scaled(dt)
                factor, factor_q = CyclicFactor(A), cur.dc.edge_lengths

            rhs = prev.mass.matvec(c)
            if cfg.advection is not None:
                w = interpolate_nodal(lambda x: cfg.advection(t, x), mesh)
                rhs -= dt * advection_load(c, w, mesh)
            if cfg.reaction is not None:
                rhs += dt * prev.mass.matvec(np.asarray(cfg.reaction(c), dtype=float))
            if noise is not None:
                rhs += noise.load(c, keys, k - 1, p)
            c_new = factor.solve_rows(rhs)

            bad = ~np.all(np.isfinite(c_new), axis=1) & (blowup < 0)
            if bad.any():
                blowup[bad] = k
                c_new[bad] = np.nan

            if energies:
                d = c_new - c
                inc_e += np.sum(d * prev.mass.matvec(d), axis=1)
                unit_stiff = assemble_stiffness(cur.dc, 1.0)
                grad_e += dt * np.sum(c_new * unit_stiff.matvec(c_new), axis=1)
                sup_e = np.fmax(sup_e, np.sum(c_new * cur.mass.matvec(c_new), axis=1))
            if track:
                wm[:, k] = weighted_mass(c_new, cur.dc)
                l2[:, k] = l2_norm(c_new, mesh)
            c = c_new
            prev = cur
            if k in snap_steps:
                out.snapshots[k] = c.copy()

    out.final = c
    out.blowup_step = blowup
    if track:
        out.weighted_mass = wm
        out.l2 = l2
        out.max_norm = np.max(l2, axis=1)
    if energies:
        out.sup_energy = sup_e
        out.increment_energy = inc_e
        out.gradient_energy = grad_e
    return out


def step(c_prev, curve, cfg, mesh, k, noise=None, path=0, p=1):
    """One step of the scheme: return ``c^k`` from ``c^{k-1}`` for a single path."""
    if k < 1 or k > cfg.M:
        raise ValueError(f"step index {k} outside 1..{cfg.M}")
    c_prev = np.asarray(c_prev, dtype=float)
    if c_prev.shape != (mesh.N,):
        raise ValueError(f"expected {mesh.N} coefficients")
    dt = cfg.dt
    prev = _Level(curve, (k - 1) * dt, mesh, cfg.D)
    cur = _Level(curve, k * dt, mesh, cfg.D)
    A = cur.mass if cur.stiff is None else cur.mass + cur.stiff.scaled(dt)
    rhs = prev.mass.matvec(c_prev)
    if cfg.advection is not None:
        w = interpolate_nodal(lambda x: cfg.advection(k * dt, x), mesh)
        rhs = rhs - dt * advection_load(c_prev, w, mesh)
    if cfg.reaction is not None:
        rhs = rhs + dt * prev.mass.matvec(np.asarray(cfg.reaction(c_prev), dtype=float))
    if noise is not None and noise.active:
        keys = noise.lattice.keys([path])
        rhs = rhs + noise.load(c_prev[None, :], keys, k - 1, p)[0]
    c = CyclicFactor(A).solve(rhs)
    if not np.all(np.isfinite(c)):
        raise BlowUpError(path, k)
    return c


@dataclass
class Trajectory:
    path: int
    snapshots: dict  # time -> coefficients
    times: np.ndarray
    weighted_mass: np.ndarray
    l2: np.ndarray
    max_norm: float
    final: np.ndarray


def run_path(cfg, curve, mesh, noise=None, path=0, snapshot_times=(), p=1):
    """Run one sample path; raises :class:`BlowUpError` naming the failing step."""
    batch = simulate(cfg, curve, mesh, noise, [path], p, snapshot_times)
    if batch.blown_up[0]:
        raise BlowUpError(path, int(batch.blowup_step[0]))
    snaps = {k * cfg.dt: v[0] for k, v in sorted(batch.snapshots.items())}
    return Trajectory(
        path=path,
        snapshots=snaps,
        times=batch.times,
        weighted_mass=batch.weighted_mass[0],
        l2=batch.l2[0],
        max_norm=float(batch.max_norm[0]),
        final=batch.final[0],
    )
