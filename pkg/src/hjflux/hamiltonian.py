"""Quasi-convex coercive Hamiltonians and their scalar-direction envelopes.

Every boundary quantity used by the solvers is built on top of a
:class:`DirectionalSlice`: the scalar map ``s -> H(p' . T + s N)`` along the
inward normal ``N`` with the tangential part ``p'`` frozen.  The valley of the
slice gives the minimal limiter ``A0(p')`` and splits it into a nonincreasing
branch ``H-`` and a nondecreasing branch ``H+``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BracketTooSmall,
    ConfigError,
    DivergentSearch,
    LevelBelowMinimum,
    NotQuasiConvex,
)

FAMILIES = ("quadratic", "norm", "sqrt_norm", "anisotropic", "table1d")
KIND_CODES = {name: i for i, name in enumerate(FAMILIES)}
RADIAL = ("quadratic", "norm", "sqrt_norm")

TOL_ROOT = 1e-10
TOL_MIN = 1e-9
ORDER_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """A catalog Hamiltonian ``H: R^dim -> R``.

    The radial families are increasing functions of ``|p - shift|``; the
    anisotropic family is ``max_i weights_i |p_i - shift_i| - c``; ``table1d``
    interpolates knots linearly and extends the two end segments.
    """

    family: str
    dim: int
    shift: np.ndarray
    c: float = 0.0
    weights: np.ndarray = field(default=None)
    knots_p: np.ndarray = field(default=None)
    knots_h: np.ndarray = field(default=None)
    valley_index: int = -1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"hamiltonian.family: unknown family {self.family!r}")
        if self.weights is None:
            object.__setattr__(self, "weights", np.ones(self.dim))
        if self.knots_p is None:
            object.__setattr__(self, "knots_p", np.zeros(0))
            object.__setattr__(self, "knots_h", np.zeros(0))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_config(cls, family: str, params: dict | None = None, dim: int | None = None):
        params = dict(params or {})
        allowed = {"table1d": {"knots", "valley"}, "anisotropic": {"a", "q", "c"}}.get(family, {"p0", "c"})
        extra = set(params) - allowed
        if extra:
            raise ConfigError(f"hamiltonian.params: unknown key(s) {sorted(extra)} for {family!r}")
        if family == "table1d":
            knots = np.asarray(params.get("knots", []), dtype=float)
            if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 2:
                raise ConfigError("hamiltonian.params.knots: need >= 2 [p, H(p)] pairs")
            kp, kh = knots[:, 0].copy(), knots[:, 1].copy()
            if np.any(np.diff(kp) <= 0):
                raise ConfigError("hamiltonian.params.knots: p values must be strictly increasing")
            vi = int(params.get("valley", int(np.argmin(kh))))
            if not 0 <= vi < len(kp):
                raise ConfigError("hamiltonian.params.valley: index out of range")
            if np.any(np.diff(kh[: vi + 1]) > 0) or np.any(np.diff(kh[vi:]) < 0):
                raise ConfigError("hamiltonian.params: table is not quasi-convex around the valley")
            if vi == 0 or vi == len(kp) - 1:
                raise ConfigError("hamiltonian.params.valley: valley must be an inner knot")
            if kh[1] >= kh[0] or kh[-1] <= kh[-2]:
                raise ConfigError("hamiltonian.params.knots: end segments must grow outward (coercivity)")
            lo, hi = vi, vi
            while lo > 0 and kh[lo - 1] == kh[vi]:
                lo -= 1
            while hi < len(kh) - 1 and kh[hi + 1] == kh[vi]:
                hi += 1
            valley = 0.5 * (kp[lo] + kp[hi])
            return cls("table1d", 1, np.array([valley]), 0.0, np.ones(1), kp, kh, vi)

        if family == "anisotropic":
            a = np.atleast_1d(np.asarray(params.get("a", [1.0] * (dim or 1)), dtype=float))
            q = np.atleast_1d(np.asarray(params.get("q", np.zeros(len(a))), dtype=float))
            if len(a) != len(q):
                raise ConfigError("hamiltonian.params: a and q must have equal length")
            if np.any(a <= 0):
                raise ConfigError("hamiltonian.params.a: weights must be positive")
            return cls("anisotropic", len(a), q, float(params.get("c", 0.0)), a)

        if family in RADIAL:
            p0 = params.get("p0")
            if p0 is None:
                p0 = np.zeros(dim or 1)
            p0 = np.atleast_1d(np.asarray(p0, dtype=float))
            return cls(family, len(p0), p0, float(params.get("c", 0.0)))
        raise ConfigError(f"hamiltonian.family: unknown family {family!r}")

    def to_config(self) -> dict:
        if self.family == "table1d":
            knots = [[float(a), float(b)] for a, b in zip(self.knots_p, self.knots_h)]
            return {"family": "table1d", "params": {"knots": knots, "valley": int(self.valley_index)}}
        if self.family == "anisotropic":
            return {
                "family": "anisotropic",
                "params": {"a": self.weights.tolist(), "q": self.shift.tolist(), "c": self.c},
            }
        return {"family": self.family, "params": {"p0": self.shift.tolist(), "c": self.c}}

    # -- evaluation -------------------------------------------------------
    def __call__(self, p):
        return self.eval(p)

    def eval(self, p):
        """Evaluate on an array whose last axis has length ``dim``."""
        p = np.asarray(p, dtype=float)
        if self.dim == 1 and (p.ndim == 0 or p.shape[-1] != 1):
            p = p[..., None]
        x = p - self.shift
        if self.family == "table1d":
            return self._table(x[..., 0] + self.shift[0])
        if self.family == "anisotropic":
            return np.max(self.weights * np.abs(x), axis=-1) - self.c
        r2 = np.sum(x * x, axis=-1)
        if self.family == "quadratic":
            return r2 - self.c
        if self.family == "norm":
            return np.sqrt(r2) - self.c
        return np.sqrt(np.sqrt(r2)) - self.c

    def _table(self, s):
        kp, kh = self.knots_p, self.knots_h
        out = np.interp(s, kp, kh)
        sl = (kh[1] - kh[0]) / (kp[1] - kp[0])
        sr = (kh[-1] - kh[-2]) / (kp[-1] - kp[-2])
        out = np.where(s < kp[0], kh[0] + sl * (s - kp[0]), out)
        return np.where(s > kp[-1], kh[-1] + sr * (s - kp[-1]), out)

    # -- derived data -----------------------------------------------------
    @property
    def minimizer(self) -> np.ndarray:
        return self.shift.copy()

    @property
    def min_value(self) -> float:
        return float(self.eval(self.shift))

    @property
    def is_convex(self) -> bool:
        if self.family == "sqrt_norm":
            return False
        if self.family == "table1d":
            slopes = np.diff(self.knots_h) / np.diff(self.knots_p)
            return bool(np.all(np.diff(slopes) >= -1e-12))
        return True

    @property
    def kind(self) -> int:
        return KIND_CODES[self.family]

    def coercivity_witness(self, M: float) -> float:
        """Radius ``R(M)`` with ``|p| > R(M) => H(p) > M`` (closed form)."""
        lift = max(M + self.c, 0.0)
        base = float(np.linalg.norm(self.shift))
        if self.family == "quadratic":
            return base + np.sqrt(lift)
        if self.family == "norm":
            return base + lift
        if self.family == "sqrt_norm":
            return base + lift**2
        if self.family == "anisotropic":
            return base + np.sqrt(self.dim) * lift / float(np.min(self.weights))
        kp, kh = self.knots_p, self.knots_h
        sl = (kh[1] - kh[0]) / (kp[1] - kp[0])
        sr = (kh[-1] - kh[-2]) / (kp[-1] - kp[-2])
        # past the outermost knot above level M the table is monotone
        left = kp[0] + min(0.0, (M - kh[0]) / sl)
        right = kp[-1] + max(0.0, (M - kh[-1]) / sr)
        return float(max(abs(left), abs(right)))

    def lipschitz(self, R: float, resolution: float = 0.0) -> float:
        """Lipschitz bound of ``H`` on the ball ``|p| <= R``.

        ``sqrt_norm`` is only Holder-1/2 at its valley; for it the bound is the
        largest secant slope over slope increments of at least ``resolution``.
        """
        if self.family == "quadratic":
            return 2.0 * (R + float(np.linalg.norm(self.shift)))
        if self.family == "norm":
            return 1.0
        if self.family == "sqrt_norm":
            if resolution <= 0:
                raise ValueError("sqrt_norm needs a positive slope resolution")
            return 1.0 / np.sqrt(resolution)
        if self.family == "anisotropic":
            return float(np.max(self.weights))
        return float(np.max(np.abs(np.diff(self.knots_h) / np.diff(self.knots_p))))


@dataclass(frozen=True, eq=False)
class DirectionalSlice:
    """``s -> H(p' . tangents + s * normal)`` for a fixed tangential part ``p'``."""

    base: Hamiltonian
    normal: np.ndarray
    tangents: np.ndarray
    p_tangential: np.ndarray

    @classmethod
    def from_frame(cls, base: Hamiltonian, frame, p_tangential=()):
        """Build from any object carrying ``n_in`` and ``tangent_basis``."""
        tb = np.asarray(frame.tangent_basis, dtype=float).reshape(-1, base.dim)
        pt = np.asarray(p_tangential, dtype=float).reshape(len(tb))
        return cls(base, np.asarray(frame.n_in, dtype=float), tb, pt)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return (self.p_tangential @ self.tangents) + s[..., None] * self.normal

    def __call__(self, s):
        return self.base.eval(self.point(s))


def axis_slice(H: Hamiltonian, p_tangential: Sequence[float] = ()) -> DirectionalSlice:
    """Slice along the last coordinate axis; the others are tangential."""
    eye = np.eye(H.dim)
    return DirectionalSlice(H, eye[-1], eye[:-1], np.asarray(p_tangential, dtype=float).reshape(H.dim - 1))


@dataclass(frozen=True)
class EnvelopeDecomposition:
    pi0: float
    min_value: float
    valley_interval: tuple[float, float]
    bracket: tuple[float, float]


@dataclass(frozen=True, eq=False)
class FluxLimiter:
    """A continuous quasi-convex limiter ``A(p')``."""

    func: Callable
    kind: str = "custom"
    value: float | None = None

    def __call__(self, p_tangential):
        return self.func(p_tangential)

    @classmethod
    def constant(cls, value: float) -> "FluxLimiter":
        return cls(lambda pt, v=float(value): v, "constant", float(value))

    @classmethod
    def minimal(cls, H: Hamiltonian, frame) -> "FluxLimiter":
        """``A0(p') = min_s H(p', s)`` at the given boundary frame."""

        def a0(pt):
            return valley(DirectionalSlice.from_frame(H, frame, pt)).min_value

        return cls(a0, "A0")

    def check_admissible(self, H: Hamiltonian, frame, samples) -> bool:
        for pt in samples:
            env = valley(DirectionalSlice.from_frame(H, frame, pt))
            if self(pt) < env.min_value - TOL_MIN:
                return False
        return True


# -- searches ---------------------------------------------------------------

def coercivity_bound(H: Hamiltonian, M: float, cap: float = 2.0**40, n_dirs: int = 1024) -> float:
    """First ``R = 2^k`` (k >= 0) with ``H > M`` beyond radius ``R``.

    The sublevel set ``{H <= M}`` is convex and contains the minimizer, so it
    stays inside the ball once the minimizer is inside and ``H > M`` on the
    sphere.
    """
    if H.dim == 1:
        dirs = np.array([[-1.0], [1.0]])
    else:
        theta = np.linspace(0.0, 2 * np.pi, n_dirs, endpoint=False)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        if H.dim > 2:
            rng = np.random.default_rng(0)
            dirs = rng.normal(size=(n_dirs, H.dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    zmin = float(np.linalg.norm(H.minimizer))
    R = 1.0
    while R <= cap:
        if zmin < R and np.all(H.eval(R * (1 + 1e-9) * dirs) > M):
            return R
        R *= 2.0
    raise DivergentSearch(f"no coercivity radius below {cap} for level {M}")


def _default_bracket(sl: DirectionalSlice) -> tuple[float, float]:
    level = float(sl(0.0))
    R = coercivity_bound(sl.base, level)
    return (-(R + 1.0), R + 1.0)


def _ulp_sweep(f, lo, hi, max_points=129):
    pts = [lo]
    x = lo
    while x < hi and len(pts) < max_points:
        x = np.nextafter(x, np.inf)
        pts.append(x)
    pts = np.array(pts)
    vals = f(pts)
    k = int(np.argmin(vals))
    return float(pts[k]), float(vals[k])


def _first_true(pred, lo, hi, iters=200):
    """Smallest x in [lo, hi] with pred(x) true, pred monotone false->true."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def valley(sl: DirectionalSlice, search_bracket: tuple[float, float] | None = None) -> EnvelopeDecomposition:
    """Locate the valley of a quasi-convex coercive slice by ternary search.

    Ties between the two probes (flat stretches) fall back to a dense scan of
    the current bracket, which shrinks toward the lowest plateau.
    """
    if search_bracket is None:
        search_bracket = _default_bracket(sl)
    b_lo, b_hi = float(search_bracket[0]), float(search_bracket[1])
    lo, hi = b_lo, b_hi
    for _ in range(400):
        # relative stop: a cusp at 0 (sqrt_norm through p0) needs the bracket far below eps
        if hi - lo <= 64 * _EPS * max(abs(lo), abs(hi), 1e-30):
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1, f2 = sl(np.array([m1, m2]))
        if f1 < f2 - ORDER_TOL:
            hi = m2
        elif f1 > f2 + ORDER_TOL:
            lo = m1
        else:
            xs = np.linspace(lo, hi, 257)
            fs = sl(xs)
            fmin = fs.min()
            ties = np.flatnonzero(fs <= fmin + ORDER_TOL)
            new_lo = xs[max(ties[0] - 1, 0)]
            new_hi = xs[min(ties[-1] + 1, len(xs) - 1)]
            if new_hi - new_lo >= 0.99 * (hi - lo):
                # the minimum level fills the bracket: resolved by the endpoint search below
                lo = hi = xs[ties[len(ties) // 2]]
                break
            lo, hi = new_lo, new_hi
    s_star, a0 = _ulp_sweep(sl, lo, hi) if hi > lo else (lo, float(sl(lo)))

    plateau = 8 * _EPS * max(1.0, abs(a0))
    v_lo = _first_true(lambda s: sl(s) <= a0 + plateau, b_lo, s_star) if s_star > b_lo else b_lo
    v_hi = -_first_true(lambda s: sl(-s) <= a0 + plateau, -b_hi, -s_star) if s_star < b_hi else b_hi
    width = b_hi - b_lo
    if v_lo <= b_lo + 1e-9 * width or v_hi >= b_hi - 1e-9 * width:
        raise BracketTooSmall(f"minimum touches the search bracket [{b_lo}, {b_hi}]")

    xs = np.linspace(b_lo, b_hi, 129)
    fs = sl(xs)
    slack = 1e-9 * (1.0 + np.abs(fs))
    left, right = xs <= v_lo, xs >= v_hi
    if (
        np.any(np.diff(fs[left]) > slack[left][1:])
        or np.any(np.diff(fs[right]) < -slack[right][1:])
        or fs.min() < a0 - TOL_MIN * (1 + abs(a0))
    ):
        raise NotQuasiConvex("slice is not nonincreasing-then-nondecreasing on the bracket")
    pi0 = 0.5 * (v_lo + v_hi)
    return EnvelopeDecomposition(float(pi0), float(a0), (float(v_lo), float(v_hi)), (b_lo, b_hi))


# -- envelopes --------------------------------------------------------------

def h_minus(sl: DirectionalSlice, env: EnvelopeDecomposition, p_n):
    """Nonincreasing part: ``H`` left of the valley, ``A0`` from the valley on.

    On the valley interval ``H`` equals ``A0`` up to rounding; pinning it to
    ``A0`` there keeps the envelope exactly monotone.
    """
    p_n = np.asarray(p_n, dtype=float)
    v_lo = env.valley_interval[0]
    out = np.where(p_n < v_lo, sl(np.minimum(p_n, v_lo)), env.min_value)
    return out if out.ndim else float(out)


def h_plus(sl: DirectionalSlice, env: EnvelopeDecomposition, p_n):
    p_n = np.asarray(p_n, dtype=float)
    v_hi = env.valley_interval[1]
    out = np.where(p_n > v_hi, sl(np.maximum(p_n, v_hi)), env.min_value)
    return out if out.ndim else float(out)


def flux_limited_operator(sl: DirectionalSlice, env: EnvelopeDecomposition, A: FluxLimiter, p_n):
    """``F_A(p', p_N) = max(A(p'), H-(p', p_N))`` with ``p'`` taken from the slice."""
    out = np.maximum(A(sl.p_tangential), h_minus(sl, env, p_n))
    return out if np.ndim(out) else float(out)


def godunov_flux(sl: DirectionalSlice, env: EnvelopeDecomposition, p_left, p_right):
    out = np.maximum(h_plus(sl, env, p_left), h_minus(sl, env, p_right))
    return out if np.ndim(out) else float(out)


def _bisect_level(sl, lam, inside, outside, iters=80):
    """Vectorized bisection of ``sl(x) = lam`` between a point where sl <= lam
    (``inside``) and one where sl >= lam (``outside``)."""
    a = np.broadcast_to(np.asarray(inside, dtype=float), lam.shape).copy()
    b = np.broadcast_to(np.asarray(outside, dtype=float), lam.shape).copy()
    for _ in range(iters):
        m = 0.5 * (a + b)
        below = sl(m) < lam
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    fa, fb = sl(a), sl(b)
    return np.where(np.abs(fa - lam) < np.abs(fb - lam), a, b)


def _level_inversion(sl, env, lam, side):
    lam = np.asarray(lam, dtype=float)
    scalar = lam.ndim == 0
    lam = np.atleast_1d(lam)
    if np.any(lam < env.min_value - TOL_MIN * (1 + abs(env.min_value))):
        raise LevelBelowMinimum(f"level below the slice minimum {env.min_value}")
    v_lo, v_hi = env.valley_interval
    edge = v_hi if side > 0 else v_lo
    far = env.bracket[1] if side > 0 else env.bracket[0]
    span = abs(far - edge) or 1.0
    for _ in range(60):
        if np.all(sl(np.array([far])) >= lam.max()):
            break
        far = edge + side * 2.0 * max(span, abs(far - edge))
        span = abs(far - edge)
    else:
        raise BracketTooSmall("level not reached inside the coercivity bracket")
    out = _bisect_level(sl, lam, edge, far)
    out = np.where(lam <= env.min_value, edge, out)
    return float(out[0]) if scalar else out


def pi_plus(sl: DirectionalSlice, env: EnvelopeDecomposition, lam):
    """Smallest slope on the nondecreasing branch where the slice equals ``lam``."""
    return _level_inversion(sl, env, lam, +1)


def pi_minus(sl: DirectionalSlice, env: EnvelopeDecomposition, lam):
    """Largest slope on the nonincreasing branch where the slice equals ``lam``."""
    return _level_inversion(sl, env, lam, -1)
