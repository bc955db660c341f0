import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import cho_factor, cho_solve

from stochcurve._backend import get_kernels
from stochcurve.assembly import CyclicTridiagonal, assemble_mass, assemble_stiffness
from stochcurve.geometry import Mesh, discretize_curve, flower
from stochcurve.linalg import CyclicFactor, NotPositiveDefiniteError, solve_spd_cyclic


def _backends():
    out = ["python"]
    try:
        get_kernels("compiled")
        out.append("compiled")
    except ImportError:
        pass
    return out


BACKENDS = _backends()


def random_spd(n, rng):
    # diagonally dominant with random off-diagonal signs
    off = rng.uniform(-1, 1, n)
    diag = np.abs(off) + np.abs(np.roll(off, 1)) + rng.uniform(0.01, 2.0, n)
    return CyclicTridiagonal(diag, off)


def dense_oracle(A, b):
    return cho_solve(cho_factor(A.to_dense()), b)


@pytest.mark.parametrize("backend", BACKENDS)
def test_identity(backend):
    A = CyclicTridiagonal(np.ones(6), np.zeros(6))
    b = np.arange(6.0)
    np.testing.assert_array_equal(solve_spd_cyclic(A, b, backend), b)


@pytest.mark.parametrize("backend", BACKENDS)
def test_constants_in_kernel(backend):
    dc = discretize_curve(flower(), 0.4, Mesh(64))
    M = assemble_mass(dc)
    A = M + assemble_stiffness(dc, 0.5).scaled(1e-2)
    x = solve_spd_cyclic(A, M.matvec(np.ones(64)), backend)
    np.testing.assert_allclose(x, 1.0, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("n", [3, 8, 64, 512])
def test_random_against_dense(backend, n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        A = random_spd(n, rng)
        b = rng.standard_normal(n)
        x = solve_spd_cyclic(A, b, backend)
        assert np.max(np.abs(x - dense_oracle(A, b))) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 200), st.integers(0, 2**32 - 1), st.sampled_from(BACKENDS))
def test_property_residual(n, seed, backend):
    rng = np.random.default_rng(seed)
    A = random_spd(n, rng)
    b = rng.standard_normal(n)
    x = solve_spd_cyclic(A, b, backend)
    assert np.max(np.abs(A.matvec(x) - b)) <= 1e-10 * (1 + np.max(np.abs(b)))


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(5)
    A = random_spd(300, rng)
    B = rng.standard_normal((4, 300))
    xc = CyclicFactor(A, "compiled").solve_rows(B)
    xp = CyclicFactor(A, "python").solve_rows(B)
    np.testing.assert_allclose(xc, xp, rtol=1e-13, atol=1e-14)


def test_batch_solve_matches_single():
    rng = np.random.default_rng(6)
    A = random_spd(40, rng)
    B = rng.standard_normal((5, 40))
    f = CyclicFactor(A)
    np.testing.assert_array_equal(f.solve(B), np.array([f.solve(b) for b in B]))


def test_bit_identical_reruns():
    rng = np.random.default_rng(7)
    A = random_spd(1000, rng)
    b = rng.standard_normal(1000)
    x1 = solve_spd_cyclic(A, b)
    x2 = solve_spd_cyclic(A, b)
    assert x1.tobytes() == x2.tobytes()


@pytest.mark.parametrize("backend", BACKENDS)
def test_indefinite_rejected(backend):
    A = CyclicTridiagonal(np.array([1.0, -1.0, 1.0, 1.0]), np.zeros(4))
    with pytest.raises(NotPositiveDefiniteError):
        CyclicFactor(A, backend)


def test_dimension_mismatch():
    A = CyclicTridiagonal(np.ones(5), np.zeros(5))
    with pytest.raises(ValueError):
        solve_spd_cyclic(A, np.ones(4))


def test_linear_scaling():
    rng = np.random.default_rng(8)

    def best(n):
        A = random_spd(n, rng)
        b = rng.standard_normal(n)
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            solve_spd_cyclic(A, b)
            times.append(time.perf_counter() - t0)
        return min(times)

    assert best(100_000) / best(10_000) <= 15


@pytest.mark.parametrize("name", ["python", "auto"])
def test_backend_env_selection(name):
    import os
    import subprocess
    import sys

    env = dict(os.environ, STOCHCURVE_BACKEND=name)
    out = subprocess.run([sys.executable, "-c", "import stochcurve; print(stochcurve.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    expected = "python" if name == "python" else BACKENDS[-1]
    assert out == expected
