"""Named Hamiltonians and problems used by the verification suites."""

from __future__ import annotations

import numpy as np

from .geometry import BoundaryFrame, Domain
from .hamiltonian import Hamiltonian
from .solver import BCMode, ProblemSpec

RES_1D = (50, 100, 200, 400)
RES_2D = (32, 64, 128)

_HAMILTONIANS = {
    "square": ("quadratic", {"p0": [0.0], "c": 0.0}, 1),
    "shifted_quadratic": ("quadratic", {"p0": [1.0], "c": 0.0}, 1),
    "abs": ("norm", {"p0": [0.0], "c": 0.0}, 1),
    "eikonal": ("norm", {"p0": [0.0], "c": 1.0}, 1),
    "sqrt_norm_1d": ("sqrt_norm", {"p0": [1.0], "c": 1.0}, 1),
    "anisotropic_1d": ("anisotropic", {"a": [2.0], "q": [0.5], "c": 0.3}, 1),
    "plateau_table": ("table1d", {"knots": [[-2.0, 3.0], [-1.0, 0.0], [1.0, 0.0], [2.0, 2.0]]}, 1),
    "quadratic_2d": ("quadratic", {"p0": [1.0, 0.5], "c": 0.0}, 2),
    "eikonal_2d": ("norm", {"p0": [0.3, -0.2], "c": 1.0}, 2),
    "sqrt_norm_2d": ("sqrt_norm", {"p0": [1.0, 0.0], "c": 1.0}, 2),
    "anisotropic_2d": ("anisotropic", {"a": [2.0, 1.0], "q": [0.5, 0.0], "c": 0.0}, 2),
}


def hamiltonian(name: str) -> Hamiltonian:
    fam, params, dim = _HAMILTONIANS[name]
    return Hamiltonian.from_config(fam, params, dim)


def hamiltonians() -> dict[str, Hamiltonian]:
    return {name: hamiltonian(name) for name in _HAMILTONIANS}


def frames(dim: int, count: int = 8) -> list[BoundaryFrame]:
    """Abstract boundary frames: both ends of an interval, or rotated normals."""
    if dim == 1:
        return [BoundaryFrame(np.zeros(1), np.array([-1.0]), np.array([1.0]), np.zeros((0, 1))),
                BoundaryFrame(np.ones(1), np.array([1.0]), np.array([-1.0]), np.zeros((0, 1)))]
    out = []
    for k in range(count):
        th = 2 * np.pi * k / count + 0.3
        n_out = np.array([np.cos(th), np.sin(th)])
        out.append(BoundaryFrame(n_out.copy(), n_out, -n_out, np.array([[-n_out[1], n_out[0]]])))
    return out


UNIT = Domain.from_config("interval", {"a": 0.0, "b": 1.0})
DISK = Domain.from_config("disk", {"center": [0.0, 0.0], "r": 1.0})
ELLIPSE = Domain.from_config("ellipse", {"center": [0.0, 0.0], "ax": 1.0, "ay": 0.6})


def _spec(name, eq, ham, domain, n, init, T=None, outputs=()):
    return ProblemSpec(eq, hamiltonian(ham), domain, BCMode("flux"), n=n, T=T, outputs=tuple(outputs),
                       init=init, name=name)


def problems() -> dict[str, ProblemSpec]:
    """Problems for the equivalence experiment, at their coarsest resolution."""
    zero = {"kind": "constant", "params": {"value": 0.0}}
    return {
        "eikonal_interval": _spec("eikonal_interval", "stationary", "eikonal", UNIT, RES_1D[0], zero),
        "shifted_quadratic": _spec("shifted_quadratic", "stationary", "shifted_quadratic", UNIT, RES_1D[0], zero),
        "sqrt_norm_interval": _spec("sqrt_norm_interval", "stationary", "sqrt_norm_1d", UNIT, RES_1D[0], zero),
        "tent_evolution": _spec("tent_evolution", "evolution", "abs", UNIT, RES_1D[0],
                                {"kind": "tent", "params": {"scale": 1.0}}, T=0.25, outputs=(0.1, 0.25)),
        "linear_evolution": _spec("linear_evolution", "evolution", "abs", UNIT, RES_1D[0],
                                  {"kind": "linear", "params": {"slope": [1.0], "offset": 0.0}}, T=0.5, outputs=(0.5,)),
        "disk_quadratic": _spec("disk_quadratic", "stationary", "quadratic_2d", DISK, RES_2D[0], zero),
        "disk_norm_evolution": _spec("disk_norm_evolution", "evolution", "eikonal_2d", DISK, RES_2D[0],
                                     {"kind": "linear", "params": {"slope": [1.0, 0.5], "offset": 0.0}},
                                     T=0.25, outputs=(0.25,)),
        "ellipse_sqrt_norm": _spec("ellipse_sqrt_norm", "stationary", "sqrt_norm_2d", ELLIPSE, RES_2D[0], zero),
    }


def resolutions(spec: ProblemSpec) -> tuple[int, ...]:
    return RES_1D if spec.domain.dim == 1 else RES_2D
