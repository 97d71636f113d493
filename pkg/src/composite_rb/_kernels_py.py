"""Pure NumPy implementations of the hot kernels.

Same signatures as the compiled ``_kernels`` extension. Products are
reduced pairwise with batched matmul, so rounding differs from the
compiled sequential loop at the 1e-15 level.
"""
import numpy as np

from .su2 import REUNITARIZE_THRESHOLD, reunitarize


def _tree_product(mats):
    # mats[k] acts at time step k; result is mats[-1] @ ... @ mats[0]
    if len(mats) == 0:
        return np.eye(2, dtype=np.complex128)
    while len(mats) > 1:
        if len(mats) % 2:
            mats = np.concatenate([mats, np.eye(2, dtype=np.complex128)[None]], axis=0)
        mats = mats[1::2] @ mats[0::2]
    return mats[0].copy()


def chain_product(table, order):
    """Ordered product ``table[order[-1]] @ ... @ table[order[0]]``."""
    table = np.asarray(table, dtype=np.complex128)
    order = np.asarray(order, dtype=np.intp)
    return reunitarize(_tree_product(table[order]), REUNITARIZE_THRESHOLD)


def step_unitaries(vx, vy, vz):
    """Batched ``exp(-i v.sigma)`` for arrays of rotation vectors."""
    n = np.sqrt(vx * vx + vy * vy + vz * vz)
    c = np.cos(n)
    s = np.divide(np.sin(n), n, out=np.ones_like(n), where=n > 0)
    out = np.empty(n.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = c - 1j * s * vz
    out[..., 1, 1] = c + 1j * s * vz
    out[..., 0, 1] = -s * vy - 1j * s * vx
    out[..., 1, 0] = s * vy - 1j * s * vx
    return out


def drive_product(amps, freqs, phases, hz, duration, steps):
    """Midpoint time-ordered product for ``H(t) = sum_j a_j (X cos(w_j t + p_j) + Y sin(w_j t + p_j)) + hz Z``."""
    amps = np.asarray(amps, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    phases = np.asarray(phases, dtype=float)
    dt = duration / steps
    t = (np.arange(steps) + 0.5) * dt
    arg = np.outer(t, freqs) + phases
    hx = (np.cos(arg) * amps).sum(axis=1)
    hy = (np.sin(arg) * amps).sum(axis=1)
    mats = step_unitaries(hx * dt, hy * dt, np.full(steps, hz * dt))
    return reunitarize(_tree_product(mats), REUNITARIZE_THRESHOLD)
