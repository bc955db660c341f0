"""Strong-convergence studies, extinction probability and the a-priori monitor.

Sample path ``s`` always draws lattice key ``path=s``; that is what makes a
coarse run and the reference "the same sample path". Paths are advanced in
fixed chunks of ``chunk`` consecutive indices, so results do not depend on
how many worker threads process the chunks.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .geometry import Mesh, l2_norm
from .noise import BrownianLattice, NoiseContext, NoiseSpectrum, SigmaSpec
from .stepper import StepperConfig, simulate

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 0.10


@dataclass(frozen=True)
class Physics:
    """Deterministic data of a problem plus its noise model."""

    curve: object
    D: float
    reaction: Optional[Callable] = None
    advection: Optional[Callable] = None
    initial: Optional[Callable] = None
    b1: float = 1.0
    rbar: float = 1.0
    sigma: SigmaSpec = field(default_factory=lambda: SigmaSpec("Constant", 0.0))

    def stepper_config(self, dt, T):
        kw = {} if self.initial is None else {"initial": self.initial}
        return StepperConfig(dt=dt, T=T, D=self.D, advection=self.advection,
                             reaction=self.reaction, **kw)

    @property
    def deterministic(self):
        return self.sigma.is_zero


@dataclass(frozen=True)
class ConvergenceStudy:
    physics: Physics
    N_ref: int
    dt_ref: float
    T: float
    S: int
    ladder: tuple
    mode: str = "Temporal"
    master_seed: int = 0
    L: Optional[int] = None  # default 2*N_ref + 1
    workers: int = 1
    chunk: int = 8

    def __post_init__(self):
        if self.mode not in ("Temporal", "SpaceTime"):
            raise ValueError(f"unknown study mode {self.mode!r}")
        M_ref = round(self.T / self.dt_ref)
        if abs(M_ref * self.dt_ref - self.T) > 1e-9 * self.T:
            raise ValueError("T must be a multiple of dt_ref")
        for p in self.ladder:
            if M_ref % p:
                raise ValueError(f"p={p}: coarse step does not divide T")
            if self.mode == "SpaceTime" and self.N_ref % p:
                raise ValueError(f"p={p} does not divide N_ref={self.N_ref}")

    @property
    def modes(self):
        return 2 * self.N_ref + 1 if self.L is None else self.L

    @property
    def M_ref(self):
        return int(round(self.T / self.dt_ref))

    def lattice(self):
        return BrownianLattice(self.master_seed, self.S, self.modes, self.M_ref, self.dt_ref)


@dataclass
class ErrorTable:
    mode: str
    h: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    E_S: list = field(default_factory=list)
    eoc: list = field(default_factory=list)
    blowups: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, h, dt, err, blowups=0):
        self.h.append(h)
        self.dt.append(dt)
        self.E_S.append(err)
        self.blowups.append(blowups)
        self.eoc.append(None)
        self.eoc[:] = recompute_eoc(self)

    def rows(self):
        return list(zip(self.h, self.dt, self.E_S, self.eoc))

    def mean_eoc(self):
        vals = [e for e in self.eoc if e is not None and np.isfinite(e)]
        return float(np.mean(vals)) if vals else float("nan")

    def fitted_order(self):
        """Least-squares slope of log E_S against log dt."""
        x = np.log(np.asarray(self.dt, dtype=float))
        y = np.log(np.asarray(self.E_S, dtype=float))
        ok = np.isfinite(y)
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(x[ok], y[ok], 1)[0])


def eoc(e_prev, e_cur, step_prev, step_cur):
    return math.log(e_prev / e_cur) / math.log(step_prev / step_cur)


def recompute_eoc(table):
    steps = table.dt if table.mode == "Temporal" else table.h
    out = [None]
    for j in range(1, len(table.E_S)):
        a, b = table.E_S[j - 1], table.E_S[j]
        if a is None or b is None or not (a > 0 and b > 0):
            out.append(None)
        else:
            out.append(eoc(a, b, steps[j - 1], steps[j]))
    return out


def error_ES(coarse_finals, ref_finals, ref_mesh):
    """Mean over paths of the L2 distance between matched final states."""
    coarse = np.atleast_2d(coarse_finals)
    ref = np.atleast_2d(ref_finals)
    if coarse.shape != ref.shape:
        raise ValueError(f"mismatched sample sets {coarse.shape} vs {ref.shape}")
    return float(np.mean(l2_norm(coarse - ref, ref_mesh)))


def prolongate(coarse, p, ref_mesh):
    """Linear interpolation of coarse nodal values onto the nested reference mesh."""
    coarse = np.asarray(coarse, dtype=float)
    N = coarse.shape[-1]
    if N * p != ref_mesh.N:
        raise ValueError(f"mesh of {N} nodes is not nested in {ref_mesh.N} with p={p}")
    if p == 1:
        return coarse.copy()
    left = np.concatenate((coarse[..., -1:], coarse[..., :-1]), axis=-1)
    # coarse node i sits on reference node (i+1)p - 1; fill the p-1 nodes before it
    frac = np.arange(1, p + 1) / p
    fine = left[..., :, None] * (1.0 - frac) + coarse[..., :, None] * frac
    fine[..., -1] = coarse
    return fine.reshape(coarse.shape[:-1] + (ref_mesh.N,))


def run_ensemble(cfg, curve, mesh, noise, S, p=1, chunk=8, workers=1, **kw):
    """Run paths ``0..S-1`` in fixed chunks; returns a list of PathBatch in path order."""
    chunks = [np.arange(a, min(a + chunk, S)) for a in range(0, S, chunk)]

    def job(paths):
        return simulate(cfg, curve, mesh, noise, paths, p, **kw)

    if workers <= 1:
        return [job(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, chunks))


def _stack(batches, attr):
    return np.concatenate([getattr(b, attr) for b in batches])


def _finals(study, mesh, dt, p, lattice, spectrum):
    ph = study.physics
    cfg = ph.stepper_config(dt, study.T)
    if ph.deterministic:
        # every path coincides; run one and replicate
        b = simulate(cfg, ph.curve, mesh, None, [0], track=False)
        return np.repeat(b.final, study.S, axis=0), np.repeat(b.blowup_step, study.S)
    ctx = NoiseContext(lattice, spectrum, ph.sigma, mesh, L=study.modes)
    batches = run_ensemble(cfg, ph.curve, mesh, ctx, study.S, p, study.chunk,
                           study.workers, track=False)
    return _stack(batches, "final"), _stack(batches, "blowup_step")


def _convergence(study, spatial):
    t0 = time.perf_counter()
    ph = study.physics
    lattice = study.lattice()
    spectrum = NoiseSpectrum(ph.b1, ph.rbar, study.modes)
    ref_mesh = Mesh(study.N_ref)
    ref, ref_blow = _finals(study, ref_mesh, study.dt_ref, 1, lattice, spectrum)
    table = ErrorTable(study.mode, meta={
        "master_seed": study.master_seed, "S": study.S, "L": study.modes,
        "N_ref": study.N_ref, "dt_ref": study.dt_ref, "T": study.T,
        "reference_blowups": int((ref_blow >= 0).sum()),
    })
    for p in study.ladder:
        mesh = Mesh(study.N_ref // p) if spatial else ref_mesh
        dt = p * study.dt_ref
        finals, blow = _finals(study, mesh, dt, p, lattice, spectrum)
        if spatial:
            finals = prolongate(finals, p, ref_mesh)
        bad = (blow >= 0) | (ref_blow >= 0)
        nbad = int(bad.sum())
        if nbad > BLOWUP_LIMIT * study.S:
            log.warning("rung p=%d excluded: %d of %d paths blew up", p, nbad, study.S)
            err = None
        else:
            err = error_ES(finals[~bad], ref[~bad], ref_mesh)
        table.add(mesh.h, dt, err, nbad)
        log.info("p=%d h=%.4g dt=%.4g E_S=%s", p, mesh.h, dt, err)
    table.meta["runtime_s"] = time.perf_counter() - t0
    return table


def temporal_convergence(study):
    if study.mode != "Temporal":
        raise ValueError("study mode must be Temporal")
    return _convergence(study, spatial=False)


def spacetime_convergence(study):
    if study.mode != "SpaceTime":
        raise ValueError("study mode must be SpaceTime")
    return _convergence(study, spatial=True)


@dataclass
class VanishResult:
    fraction: float
    norms: np.ndarray
    blowups: int
    S: int
    threshold: float


def vanish_probability(physics, N, dt, T, S, threshold=0.1, L=None, master_seed=0,
                       workers=1, chunk=8):
    """Fraction of paths whose final L2 norm is at most ``threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    mesh = Mesh(N)
    L = 2 * N + 1 if L is None else L
    cfg = physics.stepper_config(dt, T)
    lattice = BrownianLattice(master_seed, S, L, cfg.M, dt)
    ctx = NoiseContext(lattice, NoiseSpectrum(physics.b1, physics.rbar, L), physics.sigma, mesh)
    batches = run_ensemble(cfg, physics.curve, mesh, ctx, S, 1, chunk, workers, track=False)
    finals = _stack(batches, "final")
    blown = _stack(batches, "blowup_step") >= 0
    norms = l2_norm(finals, mesh)
    ok = ~blown
    fraction = float(np.mean(norms[ok] <= threshold)) if ok.any() else float("nan")
    return VanishResult(fraction, norms, int(blown.sum()), S, threshold)


@dataclass
class AprioriReport:
    dts: list
    sup_energy: list
    increment_energy: list
    gradient_energy: list
    ratios: list  # per level transition: (sup, increment, gradient)
    limit: float = 1.5

    @property
    def bounded(self):
        return all(r <= self.limit for triple in self.ratios for r in triple)


def apriori_monitor(physics, N, dts, T, S, L=None, master_seed=0, workers=1, chunk=8):
    """Sample means of the three discrete a-priori quantities at each time step."""
    if len(dts) < 2:
        raise ValueError("need at least two refinement levels")
    dt_fine = min(dts)
    mesh = Mesh(N)
    L = 2 * N + 1 if L is None else L
    M_fine = int(round(T / dt_fine))
    lattice = BrownianLattice(master_seed, S, L, M_fine, dt_fine)
    ctx = NoiseContext(lattice, NoiseSpectrum(physics.b1, physics.rbar, L), physics.sigma, mesh)
    rep = AprioriReport(list(dts), [], [], [], [])
    for dt in dts:
        p = int(round(dt / dt_fine))
        if abs(p * dt_fine - dt) > 1e-9 * dt:
            raise ValueError(f"dt={dt} is not a multiple of {dt_fine}")
        cfg = physics.stepper_config(dt, T)
        batches = run_ensemble(cfg, physics.curve, mesh, ctx, S, p, chunk, workers,
                               track=False, energies=True)
        rep.sup_energy.append(float(np.mean(_stack(batches, "sup_energy"))))
        rep.increment_energy.append(float(np.mean(_stack(batches, "increment_energy"))))
        rep.gradient_energy.append(float(np.mean(_stack(batches, "gradient_energy"))))
    for j in range(1, len(dts)):
        rep.ratios.append(tuple(
            _ratio(series[j], series[j - 1])
            for series in (rep.sup_energy, rep.increment_energy, rep.gradient_energy)
        ))
    return rep


def _ratio(a, b):
    if b == 0.0:
        return 0.0 if a == 0.0 else float("inf")
    return a / b


def with_sigma(physics, sigma_bar):
    return replace(physics, sigma=replace(physics.sigma, sigma_bar=sigma_bar))
