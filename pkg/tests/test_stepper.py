import numpy as np
import pytest

from stochcurve.assembly import assemble_mass
from stochcurve.geometry import Mesh, discretize_curve, flower, stationary_circle
from stochcurve.noise import BrownianLattice, NoiseContext, NoiseSpectrum, SigmaSpec
from stochcurve.stepper import BlowUpError, StepperConfig, run_path, simulate, step


def ctx_for(mesh, sigma, b1=1.0, rbar=1.0, S=4, M=100, dt=1e-3, seed=1):
    L = 2 * mesh.N + 1
    lat = BrownianLattice(seed, S, L, M, dt)
    return NoiseContext(lat, NoiseSpectrum(b1, rbar, L), sigma, mesh)


def test_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(dt=0.3, T=1.0)
    with pytest.raises(ValueError):
        StepperConfig(dt=0.1, T=1.0, D=-1)
    cfg = StepperConfig(dt=0.1, T=1.0)
    assert cfg.M == 10 and cfg.step_of(0.3) == 3
    with pytest.raises(ValueError):
        cfg.step_of(0.35)


def test_identity_step():
    mesh = Mesh(16)
    cfg = StepperConfig(dt=0.01, T=0.1)
    c = np.random.default_rng(0).standard_normal(16)
    np.testing.assert_allclose(step(c, stationary_circle(), cfg, mesh, 1), c, rtol=1e-13)


def test_zero_fixed_point():
    mesh = Mesh(16)
    cfg = StepperConfig(dt=0.01, T=0.1, D=0.5, reaction=lambda c: c * (1 - c),
                        advection=lambda t, x: np.sin(x))
    noise = ctx_for(mesh, SigmaSpec("LogisticClip", 0.5))
    c = step(np.zeros(16), flower(), cfg, mesh, 3, noise)
    assert not c.any()


def test_heat_oracle():
    mesh = Mesh(128)
    cfg = StepperConfig(dt=1e-4, T=1.0, D=0.1, initial=np.cos)
    b = simulate(cfg, stationary_circle(), mesh, track=False)
    err = np.max(np.abs(b.final[0] - np.exp(-0.1) * np.cos(mesh.nodes)))
    assert err <= 5e-3


def test_step_matches_simulate():
    mesh = Mesh(24)
    cfg = StepperConfig(dt=1e-3, T=5e-3, D=0.2, reaction=lambda c: c * (1 - c),
                        advection=lambda t, x: np.cos(x), initial=np.sin)
    noise = ctx_for(mesh, SigmaSpec("Constant", 0.3), S=3, M=10)
    b = simulate(cfg, flower(), mesh, noise, [2], track=False)
    c = np.sin(mesh.nodes)
    for k in range(1, cfg.M + 1):
        c = step(c, flower(), cfg, mesh, k, noise, path=2)
    np.testing.assert_allclose(b.final[0], c, rtol=1e-12, atol=1e-14)


def test_mass_conservation_advection():
    mesh = Mesh(64)
    cfg = StepperConfig(dt=1e-3, T=0.5, D=0.01, advection=lambda t, x: np.sin(x) + 0.5,
                        initial=lambda x: np.exp(np.cos(x)))
    b = simulate(cfg, flower(), mesh)
    wm = b.weighted_mass[0]
    assert np.max(np.abs(wm - wm[0])) / abs(wm[0]) <= 1e-10


def test_mass_conservation_constant_noise():
    mesh = Mesh(32)
    cfg = StepperConfig(dt=1e-3, T=0.1, D=0.05, initial=lambda x: 1 + np.cos(x))
    noise = ctx_for(mesh, SigmaSpec("Constant", 0.4), b1=0.0, S=10)
    b = simulate(cfg, flower(), mesh, noise, np.arange(10))
    wm = b.weighted_mass
    drift = np.max(np.abs(wm - wm[:, :1]), axis=1) / np.max(np.abs(wm), axis=1)
    assert np.all(drift <= 1e-10)
    # noise did move the paths
    assert np.ptp(b.final[:, 0]) > 1e-3


def test_m_norm_contraction():
    mesh = Mesh(40)
    cfg = StepperConfig(dt=1e-2, T=0.5, D=0.3, initial=lambda x: np.sign(np.sin(x)))
    b = simulate(cfg, stationary_circle(), mesh, snapshot_times=np.arange(0, 51) * 1e-2)
    M = assemble_mass(discretize_curve(stationary_circle(), 0.0, mesh))
    norms = [np.sqrt(c[0] @ M.matvec(c[0])) for _, c in sorted(b.snapshots.items())]
    assert np.all(np.diff(norms) <= 1e-14)


def test_linearity_without_reaction():
    mesh = Mesh(20)
    base = dict(dt=1e-2, T=0.2, D=0.1, advection=lambda t, x: np.cos(2 * x))
    a = simulate(StepperConfig(**base, initial=np.sin), flower(), mesh, track=False).final
    b = simulate(StepperConfig(**base, initial=np.cos), flower(), mesh, track=False).final
    ab = simulate(StepperConfig(**base, initial=lambda x: 2 * np.sin(x) - np.cos(x)),
                  flower(), mesh, track=False).final
    np.testing.assert_allclose(ab, 2 * a - b, atol=1e-12)


def test_deterministic_reruns():
    mesh = Mesh(32)
    cfg = StepperConfig(dt=1e-3, T=0.05, D=0.01, reaction=lambda c: c * (1 - c) * (c + 0.5),
                        initial=lambda x: np.exp(-(x - np.pi) ** 2))
    noise = ctx_for(mesh, SigmaSpec("LogisticClip", 0.5))
    a = simulate(cfg, flower(), mesh, noise, [0, 1, 2, 3])
    b = simulate(cfg, flower(), mesh, noise, [0, 1, 2, 3])
    assert a.final.tobytes() == b.final.tobytes()
    # batch composition only changes BLAS summation order
    c = simulate(cfg, flower(), mesh, noise, [2])
    np.testing.assert_allclose(c.final[0], a.final[2], rtol=1e-12, atol=1e-14)


def test_blowup_flagged_and_raised():
    mesh = Mesh(8)
    cfg = StepperConfig(dt=0.1, T=2.0, reaction=lambda c: c**3, initial=lambda x: 5 + 0 * x)
    b = simulate(cfg, stationary_circle(), mesh)
    assert b.blown_up[0] and b.blowup_step[0] > 0
    with pytest.raises(BlowUpError) as info:
        run_path(cfg, stationary_circle(), mesh)
    assert info.value.step == b.blowup_step[0]


def test_zero_data_snapshots():
    mesh = Mesh(12)
    cfg = StepperConfig(dt=0.1, T=0.5, D=0.1, reaction=lambda c: c * (1 - c))
    noise = ctx_for(mesh, SigmaSpec("LinearClamp", 0.5), M=10, dt=0.1)
    tr = run_path(cfg, stationary_circle(), mesh, noise, snapshot_times=[0.0, 0.2, 0.5])
    assert sorted(tr.snapshots) == pytest.approx([0.0, 0.2, 0.5])
    for c in tr.snapshots.values():
        assert not c.any()


def test_apriori_energy_heat():
    mesh = Mesh(32)
    cfg = StepperConfig(dt=1e-2, T=0.3, D=0.2, initial=np.cos)
    b = simulate(cfg, stationary_circle(), mesh, energies=True)
    M = assemble_mass(discretize_curve(stationary_circle(), 0.0, mesh))
    c0 = np.cos(mesh.nodes)
    assert b.sup_energy[0] == pytest.approx(c0 @ M.matvec(c0))
    assert b.increment_energy[0] > 0 and b.gradient_energy[0] > 0


def test_noise_lattice_mismatch_rejected():
    mesh = Mesh(8)
    cfg = StepperConfig(dt=2e-3, T=0.01)
    noise = ctx_for(mesh, SigmaSpec("Constant", 1.0), dt=1e-3, M=10)
    with pytest.raises(ValueError):
        simulate(cfg, stationary_circle(), mesh, noise, p=1)
    simulate(cfg, stationary_circle(), mesh, noise, p=2)
