"""Hot loops of the explicit scheme, compiled with numba or run as numpy.

The backend is chosen once at import from ``HJFLUX_NUMBA`` (see
``hjflux._jit``); both backends take the same flat arrays bundled in
:class:`KernelData`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._jit import HAVE_NUMBA, USE_NUMBA
from . import _vectorized

if USE_NUMBA:
    from . import _loops as _backend
else:
    _backend = _vectorized

BACKEND = "numba" if USE_NUMBA else "numpy"
AVAILABLE = ("numpy", "numba") if HAVE_NUMBA else ("numpy",)
SONER, FLUX = 0, 1


@dataclass(eq=False)
class KernelData:
    icfg: np.ndarray  # [kind, dim, mode, limiter_kind, radial]
    fcfg: np.ndarray  # [c, limiter_value, bracket_radius]
    shift: np.ndarray
    weight: np.ndarray
    tab_p: np.ndarray
    tab_h: np.ndarray
    label: np.ndarray
    slot_idx: np.ndarray  # (M, dim, 2, 2)
    slot_w: np.ndarray
    slot_inv: np.ndarray  # (M, dim, 2)
    b_of_node: np.ndarray  # (M,)
    bn_idx: np.ndarray  # (B, 4)
    bn_w: np.ndarray
    bn_inv: np.ndarray  # (B,)
    bt_idx: np.ndarray  # (B, 2, 2)
    bt_w: np.ndarray
    bt_inv: np.ndarray  # (B, 2)
    bN: np.ndarray  # (B, 2)
    bT: np.ndarray  # (B, 2)

    def args(self):
        return (self.icfg, self.fcfg, self.shift, self.weight, self.tab_p, self.tab_h, self.label,
                self.slot_idx, self.slot_w, self.slot_inv, self.b_of_node, self.bn_idx, self.bn_w,
                self.bn_inv, self.bt_idx, self.bt_w, self.bt_inv, self.bN, self.bT)


def _pick(backend):
    if backend is None:
        return _backend
    if backend not in AVAILABLE:
        raise ValueError(f"unknown or unavailable backend {backend!r}; choose from {AVAILABLE}")
    return _vectorized if backend == "numpy" else __import__("hjflux.kernels._loops", fromlist=["_"])


def operator_values(data: KernelData, u: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Discrete Hamiltonian (interior) or boundary operator value at every node."""
    out = np.empty_like(u)
    _pick(backend).operator_values(np.ascontiguousarray(u, dtype=float), out, *data.args())
    return out


def stationary_loop(data: KernelData, u: np.ndarray, tau: float, tol_base: float, max_iter: int,
                    backend: str | None = None):
    hist = np.zeros(max(int(max_iter), 1))
    it, res, status = _pick(backend).stationary_loop(u, float(tau), float(tol_base), int(max_iter), hist,
                                                     *data.args())
    return int(it), float(res), int(status), hist[: int(it)].copy()


def evolution_loop(data: KernelData, u: np.ndarray, dt: float, nsteps: int, backend: str | None = None) -> bool:
    return bool(_pick(backend).evolution_loop(u, float(dt), int(nsteps), *data.args()))
