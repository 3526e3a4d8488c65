"""Level-set domains, boundary frames and local boundary graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GraphFold, ProjectionDiverged, ThinDomain

INTERIOR, BOUNDARY, EXTERIOR = 0, 1, 2
LABEL_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary", EXTERIOR: "exterior"}

PROJ_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class Domain:
    """Bounded open set ``{phi < 0}`` with a C^1 boundary ``{phi = 0}``."""

    family: str
    params: dict
    dim: int
    center: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray

    @classmethod
    def from_config(cls, family: str, params: dict | None = None) -> "Domain":
        p = dict(params or {})
        try:
            if family == "interval":
                a, b = float(p["a"]), float(p["b"])
                if not a < b:
                    raise ConfigError("domain.params: need a < b")
                return cls("interval", {"a": a, "b": b}, 1, np.array([0.5 * (a + b)]), np.array([a]), np.array([b]))
            c = np.asarray(p.get("center", [0.0, 0.0]), dtype=float)
            if c.shape != (2,):
                raise ConfigError("domain.params.center: need two coordinates")
            if family == "disk":
                r = float(p["r"])
                ax = ay = r
                clean = {"center": c.tolist(), "r": r}
            elif family == "ellipse":
                ax, ay = float(p["ax"]), float(p["ay"])
                clean = {"center": c.tolist(), "ax": ax, "ay": ay}
            elif family == "superellipse":
                ax, ay = float(p["ax"]), float(p["ay"])
                power = float(p.get("power", 4.0))
                if power < 2:
                    raise ConfigError("domain.params.power: need power >= 2 for a C^1 boundary")
                clean = {"center": c.tolist(), "ax": ax, "ay": ay, "power": power}
            else:
                raise ConfigError(f"domain.family: unknown family {family!r}")
        except KeyError as exc:
            raise ConfigError(f"domain.params: missing {exc.args[0]!r}") from None
        if ax <= 0 or ay <= 0:
            raise ConfigError("domain.params: radii must be positive")
        half = np.array([ax, ay])
        return cls(family, clean, 2, c, c - half, c + half)

    def to_config(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    # -- level set ----------------------------------------------------------
    def _scaled(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "disk":
            return (x - self.center) / self.params["r"]
        return (x - self.center) / np.array([self.params["ax"], self.params["ay"]])

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "interval":
            a, b = self.params["a"], self.params["b"]
            x = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
            return (x - a) * (x - b) / (b - a)
        if self.family == "disk":
            return np.sum((x - self.center) ** 2, axis=-1) - self.params["r"] ** 2
        u = self._scaled(x)
        if self.family == "ellipse":
            return np.sum(u * u, axis=-1) - 1.0
        return np.sum(np.abs(u) ** self.params["power"], axis=-1) - 1.0

    def grad_phi(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "interval":
            a, b = self.params["a"], self.params["b"]
            return (2.0 * x - a - b) / (b - a)
        if self.family == "disk":
            return 2.0 * (x - self.center)
        u = self._scaled(x)
        scale = np.array([self.params["ax"], self.params["ay"]])
        if self.family == "ellipse":
            return 2.0 * u / scale
        q = self.params["power"]
        return q * np.sign(u) * np.abs(u) ** (q - 1) / scale

    def signed_distance(self, x):
        """First-order signed distance ``phi / |grad phi|``."""
        g = np.linalg.norm(np.atleast_1d(self.grad_phi(x)).reshape(np.shape(self.phi(x)) + (self.dim,)), axis=-1)
        return self.phi(x) / np.maximum(g, 1e-300)

    def boundary_point(self, theta):
        """Boundary point in direction ``theta`` from the center (2D, star-shaped)."""
        theta = np.asarray(theta, dtype=float)
        e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        lo = np.zeros(theta.shape)
        hi = np.full(theta.shape, 1.01 * float(np.linalg.norm(self.box_hi - self.center)))
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            inside = self.phi(self.center + mid[..., None] * e) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return self.center + (0.5 * (lo + hi))[..., None] * e

    def validate(self, n_samples: int = 512, g_min: float = 1e-3) -> None:
        """Sample the C^1 and boundedness invariants."""
        if self.dim == 1:
            pts = np.array([[self.box_lo[0]], [self.box_hi[0]]])
        else:
            pts = self.boundary_point(np.linspace(0, 2 * np.pi, n_samples, endpoint=False))
        g = np.linalg.norm(np.asarray(self.grad_phi(pts)).reshape(len(pts), self.dim), axis=-1)
        if np.any(g < g_min):
            raise ConfigError("domain: |grad phi| vanishes on the boundary")
        pad = 0.05 * (self.box_hi - self.box_lo)
        if self.dim == 1:
            outside = np.array([[self.box_lo[0] - pad[0]], [self.box_hi[0] + pad[0]]])
        else:
            t = np.linspace(0, 1, n_samples // 4)
            lo, hi = self.box_lo - pad, self.box_hi + pad
            outside = np.concatenate([
                np.stack([lo[0] + t * (hi[0] - lo[0]), np.full_like(t, lo[1])], -1),
                np.stack([lo[0] + t * (hi[0] - lo[0]), np.full_like(t, hi[1])], -1),
                np.stack([np.full_like(t, lo[0]), lo[1] + t * (hi[1] - lo[1])], -1),
                np.stack([np.full_like(t, hi[0]), lo[1] + t * (hi[1] - lo[1])], -1),
            ])
        if np.any(self.phi(outside) <= 0):
            raise ConfigError("domain: not contained in its bounding box")


@dataclass(frozen=True, eq=False)
class BoundaryFrame:
    x: np.ndarray
    n_out: np.ndarray
    n_in: np.ndarray
    tangent_basis: np.ndarray  # shape (dim - 1, dim)


def _frame_from_point(domain: Domain, x) -> BoundaryFrame:
    g = np.atleast_1d(np.asarray(domain.grad_phi(x), dtype=float))
    n_out = g / np.linalg.norm(g)
    if domain.dim == 1:
        tb = np.zeros((0, 1))
    else:
        tb = np.array([[-n_out[1], n_out[0]]])
    return BoundaryFrame(np.atleast_1d(np.asarray(x, dtype=float)), n_out, -n_out, tb)


def project(domain: Domain, x, proj_tol: float = PROJ_TOL, max_iter: int = 50) -> np.ndarray:
    """Newton projection onto ``{phi = 0}`` along ``grad phi``."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    for _ in range(max_iter):
        val = float(domain.phi(x))
        if abs(val) <= proj_tol:
            return x
        g = np.atleast_1d(np.asarray(domain.grad_phi(x), dtype=float))
        gg = float(g @ g)
        if gg == 0.0 or not np.isfinite(gg):
            break
        x = x - val * g / gg
    raise ProjectionDiverged(f"projection of {x} did not reach |phi| <= {proj_tol}")


def frame_at(domain: Domain, x, delta: float | None = None) -> BoundaryFrame:
    """Project a point near the boundary and build its frame."""
    if delta is not None and abs(float(domain.phi(x))) > delta:
        raise ProjectionDiverged("point is outside the boundary tube")
    return _frame_from_point(domain, project(domain, x))


def decompose(p, frame: BoundaryFrame):
    """Split ``p`` into tangential coordinates and the inward normal component."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return frame.tangent_basis @ p, float(p @ frame.n_in)


def reconstruct(p_tangential, p_n: float, frame: BoundaryFrame) -> np.ndarray:
    return np.asarray(p_tangential, dtype=float) @ frame.tangent_basis + p_n * frame.n_in


@dataclass(frozen=True, eq=False)
class LocalGraph:
    """Boundary near ``center.x`` written as ``x^N = psiN(X')`` in frame coordinates."""

    domain: Domain
    center: BoundaryFrame
    radius: float
    n_scan: int = 65

    def coords(self, X):
        """Tangential coordinates ``X'`` and normal coordinate ``x^N`` of points."""
        d = np.asarray(X, dtype=float).reshape(-1, self.domain.dim) - self.center.x
        return d @ self.center.tangent_basis.T, d @ self.center.n_in

    def psiN(self, Xt):
        Xt = np.asarray(Xt, dtype=float)
        d = self.domain.dim - 1
        if d == 0:
            return np.zeros(Xt.shape[:-1] if Xt.ndim else ())
        scalar = Xt.ndim == 0
        Xt = Xt.reshape(-1, d)
        base = self.center.x + Xt @ self.center.tangent_basis
        s = np.linspace(-self.radius, self.radius, self.n_scan)
        vals = self.domain.phi(base[:, None, :] + s[None, :, None] * self.center.n_in)
        outside = vals >= 0.0
        change = outside[:, :-1] != outside[:, 1:]
        count = change.sum(axis=1)
        if np.any(count > 1):
            raise GraphFold("boundary crosses a normal line twice inside the graph radius")
        if np.any(count == 0):
            raise ProjectionDiverged("normal line misses the boundary; graph radius too large")
        k = np.argmax(change, axis=1)
        lo, hi = s[k], s[k + 1]
        flo = np.take_along_axis(vals, k[:, None], 1)[:, 0]
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            fm = self.domain.phi(base + mid[:, None] * self.center.n_in)
            same = (fm >= 0.0) == (flo >= 0.0)
            lo = np.where(same, mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out

    def normal_distance(self, X):
        """``x^N - psiN(X')`` for each point; positive inside the domain."""
        Xt, xn = self.coords(X)
        return xn - self.psiN(Xt)


def local_graph(domain: Domain, X0: BoundaryFrame, r0: float) -> LocalGraph:
    g = LocalGraph(domain, X0, float(r0))
    if domain.dim > 1:
        g.psiN(np.linspace(-r0, r0, 9)[:, None])  # raises GraphFold early
    return g


# -- Cartesian grids ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CartesianGrid:
    domain: Domain
    n: int
    axes: tuple  # node coordinates per axis
    h: np.ndarray

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    def coords(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def cartesian_grid(domain: Domain, n: int) -> CartesianGrid:
    if n < 4:
        raise ThinDomain("need at least 4 cells per axis")
    axes = tuple(np.linspace(domain.box_lo[i], domain.box_hi[i], n + 1) for i in range(domain.dim))
    h = (domain.box_hi - domain.box_lo) / n
    return CartesianGrid(domain, n, axes, h)


def classify_grid(grid: CartesianGrid) -> np.ndarray:
    """Label every node; an inside node with an outside axis neighbor is boundary."""
    X = grid.coords()
    d = grid.domain.signed_distance(X).reshape(grid.shape)
    inside = d <= 1e-9 * float(np.min(grid.h))
    padded = np.pad(inside, 1, constant_values=False)
    all_nbrs = np.ones_like(inside)
    for ax in range(grid.domain.dim):
        for shift in (-1, 1):
            sl = [slice(1, -1)] * grid.domain.dim
            sl[ax] = slice(1 + shift, padded.shape[ax] - 1 + shift)
            all_nbrs &= padded[tuple(sl)]
    labels = np.full(grid.shape, EXTERIOR, dtype=np.int8)
    labels[inside & all_nbrs] = INTERIOR
    labels[inside & ~all_nbrs] = BOUNDARY
    if not np.any(labels == INTERIOR):
        raise ThinDomain("no interior nodes at this resolution")
    return labels.ravel()


def classify(grid: CartesianGrid, index) -> str:
    """Label of one node given by its multi-index (or flat index)."""
    labels = classify_grid(grid)
    flat = int(np.ravel_multi_index(tuple(np.atleast_1d(index)), grid.shape)) if np.ndim(index) else int(index)
    return LABEL_NAMES[int(labels[flat])]
