"""Pure-Python (numpy/scipy) versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.linalg import lapack
from scipy.special import ndtri

MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
COUNTER_SALT = np.uint64(0x632BE59BD9B4E019)
QUANT = 2.0**32


def fmix(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * MIX1
        z = z ^ (z >> np.uint64(27))
        z = z * MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def lattice_sums(path_keys, modes, step0, p, out):
    steps = np.arange(step0, step0 + p, dtype=np.uint64)
    counters = (modes.astype(np.uint64)[:, None] << np.uint64(40)) | steps[None, :]
    with np.errstate(over="ignore"):
        hashed = fmix(counters + COUNTER_SALT)
    for s, key in enumerate(path_keys):
        bits = fmix(np.uint64(key) ^ hashed)
        u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        out[s] = np.rint(ndtri(u) * QUANT).sum(axis=1) / QUANT
    return out


def tridiag_ldl(diag, sub):
    d, e, info = lapack.dpttrf(diag, sub[: len(diag) - 1])
    if info != 0:
        return None, None, info - 1 if info > 0 else 0
    return d, e, -1


def ldl_solve_rows(d, e, rows):
    x, info = lapack.dpttrs(d, e, rows.T)
    if info != 0:
        raise ValueError(f"dpttrs failed with info={info}")
    rows[...] = x.T
    return rows


def cyclic_correct_rows(rows, z, scale, theta):
    coef = scale * (rows[:, 0] + theta * rows[:, -1])
    rows -= coef[:, None] * z[None, :]
    return rows
