"""Checks built on the solver: boundary probes, equivalence runs, envelope identities."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import catalog
from ._jit import worker_count
from .errors import DegenerateDistance, NotTouching
from .geometry import BOUNDARY, LocalGraph, _frame_from_point, local_graph, project
from .hamiltonian import (
    DirectionalSlice,
    FluxLimiter,
    Hamiltonian,
    flux_limited_operator,
    h_minus,
    h_plus,
    pi_minus,
    pi_plus,
    valley,
)
from .solver import BCMode, ProblemSpec, SolveReport, solve

CSV_COLUMNS = ("problem", "n", "h", "gap_sup", "oracle_gap_soner", "oracle_gap_flux",
               "pbar_max_sub", "pbar_min_super", "pass")
TOUCH_TOL = 1e-12
PROBE_SLACK = 2.0
EQUIV_FACTOR = 5.0
MONOTONE_SLACK = 0.10


# -- critical-slope probes ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class Jet:
    """``phi(X) = value + grad (X - X0) + sign K/2 |X - X0|^2`` and ``lam = -phi_t``."""

    X0: np.ndarray
    value: float
    grad: np.ndarray
    K: float = 0.0
    sign: float = 1.0
    lam: float = 0.0

    def __call__(self, X) -> np.ndarray:
        d = np.asarray(X, dtype=float).reshape(-1, len(self.X0)) - self.X0
        return self.value + d @ self.grad + self.sign * 0.5 * self.K * np.sum(d * d, axis=1)


@dataclass(frozen=True, eq=False)
class CriticalSlopeProbe:
    node: int
    graph: LocalGraph
    jet: Jet
    radius: float
    side: str  # "sub" (jet above the field) or "super" (below)


def _ball(positions, X0, r):
    d = np.linalg.norm(positions - X0, axis=1)
    return d <= r * (1 + 1e-12)


def touching_jet(report: SolveReport, node: int, side: str, radius: float, grad=None,
                 field_index: int = -1, lam: float = 0.0) -> Jet:
    """Quadratic jet touching the field at ``node`` with the least curvature that works.

    The gradient defaults to a least-squares fit over the ball.
    """
    X = report.positions
    u = report.fields[field_index]
    X0 = X[node]
    mask = _ball(X, X0, radius)
    mask[node] = False
    d = X[mask] - X0
    du = u[mask] - u[node]
    if grad is None:
        grad = np.linalg.lstsq(d, du, rcond=None)[0] if len(d) >= X.shape[1] else np.zeros(X.shape[1])
    grad = np.asarray(grad, dtype=float)
    r2 = np.sum(d * d, axis=1)
    lin = du - d @ grad
    sign = 1.0 if side == "sub" else -1.0
    K = float(np.max(np.maximum(sign * 2.0 * lin / r2, 0.0))) if len(d) else 0.0
    return Jet(X0.copy(), float(u[node]), grad, K * (1 + 1e-9), sign, lam)


def make_probe(report: SolveReport, node: int, side: str, radius: float | None = None, jet: Jet | None = None,
               field_index: int = -1, r0: float | None = None) -> CriticalSlopeProbe:
    if report.labels[node] != BOUNDARY:
        raise ValueError("probes sit at boundary nodes")
    dom = report.spec.domain
    h = report.h
    radius = 4.0 * h if radius is None else float(radius)
    r0 = max(radius, 8.0 * h) if r0 is None else float(r0)
    if radius > r0:
        raise ValueError("probe radius exceeds the graph radius")
    frame = _frame_from_point(dom, project(dom, report.positions[node]))
    graph = local_graph(dom, frame, r0)
    if jet is None:
        jet = touching_jet(report, node, side, radius, field_index=field_index)
    probe = CriticalSlopeProbe(node, graph, jet, radius, side)
    verify_touching(report.fields[field_index], report.positions, probe)
    return probe


def verify_touching(u, positions, probe: CriticalSlopeProbe) -> None:
    mask = _ball(positions, probe.jet.X0, probe.radius)
    gap = probe.jet(positions[mask]) - u[mask]
    scale = TOUCH_TOL * (1.0 + float(np.max(np.abs(u[mask]))))
    if abs(probe.jet.value - u[probe.node]) > scale:
        raise NotTouching("jet does not pass through the field at the probe node")
    if probe.side == "sub" and np.any(gap < -scale):
        raise NotTouching("jet dips below the field inside the ball")
    if probe.side == "super" and np.any(gap > scale):
        raise NotTouching("jet rises above the field inside the ball")


def critical_slope(u, positions, probe: CriticalSlopeProbe, h: float) -> float:
    """Extremal normal-slope correction ``(u - phi) / (x^N - psiN(X'))`` over the ball.

    Sub side: the least ``p`` with ``phi + p (x^N - psiN) >= u``; super side: the
    mirrored greatest ``p``.  Nodes closer than ``h/10`` to the boundary are skipped.
    """
    mask = _ball(positions, probe.jet.X0, probe.radius)
    mask[probe.node] = False
    X = positions[mask]
    dist = probe.graph.normal_distance(X)
    ok = dist >= 0.1 * h
    if not np.any(ok):
        raise DegenerateDistance("no sampled node is at least h/10 away from the boundary")
    quot = (np.asarray(u)[mask][ok] - probe.jet(X[ok])) / dist[ok]
    return float(np.max(quot) if probe.side == "sub" else np.min(quot))


def probe_threshold(probe: CriticalSlopeProbe, h: float) -> float:
    return PROBE_SLACK * h * (1.0 + float(np.linalg.norm(probe.jet.grad)))


def boundary_inequality(report: SolveReport, probe: CriticalSlopeProbe, pbar: float) -> float:
    """``u + F_A0(grad phi + pbar N)`` at the probe node (a diagnostic, not asserted)."""
    fr = probe.graph.center
    p = probe.jet.grad + pbar * fr.n_in
    sl = DirectionalSlice.from_frame(report.spec.hamiltonian, fr, fr.tangent_basis @ p)
    env = valley(sl)
    lead = -probe.jet.lam if report.spec.equation == "evolution" else probe.jet.value
    return float(lead + flux_limited_operator(sl, env, FluxLimiter.minimal(report.spec.hamiltonian, fr),
                                              float(p @ fr.n_in)))


def slope_survey(report: SolveReport, radius: float | None = None, field_index: int = -1) -> dict:
    """Sub and super probes at every boundary node of a converged field."""
    h = report.h
    u = report.fields[field_index]
    rows = []
    for node in np.flatnonzero(report.labels == BOUNDARY):
        for side in ("sub", "super"):
            probe = make_probe(report, int(node), side, radius, field_index=field_index)
            pbar = critical_slope(u, report.positions, probe, h)
            thr = probe_threshold(probe, h)
            ok = pbar <= thr if side == "sub" else pbar >= -thr
            rows.append({"node": int(node), "side": side, "pbar": pbar, "threshold": thr, "pass": bool(ok),
                         "radius": probe.radius, "curvature": probe.jet.K})
    subs = [r["pbar"] for r in rows if r["side"] == "sub"]
    sups = [r["pbar"] for r in rows if r["side"] == "super"]
    return {"rows": rows, "pbar_max_sub": max(subs), "pbar_min_super": min(sups),
            "pass": all(r["pass"] for r in rows)}


# -- equivalence experiment --------------------------------------------------

@dataclass
class ResolutionRow:
    problem: str
    n: int
    h: float
    gap_sup: float
    oracle_gap_soner: float | None
    oracle_gap_flux: float | None
    pbar_max_sub: float | None
    pbar_min_super: float | None
    norm_u: float
    zero_floor: float
    passed: bool = True


@dataclass
class EquivalenceReport:
    problem: str
    resolutions: list
    rows: list
    checks: dict = field(default_factory=dict)
    tolerance_rule: str = (
        "gap(n_next) <= 1.1 gap(n) (gaps below the solver stop tolerance count as 0); "
        "gap(n_max) <= 5 h (1 + |u|_inf); oracle gaps <= 2 sqrt(h); "
        "sub probes <= 2h(1+|grad phi|), super probes >= -2h(1+|grad phi|)"
    )

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"problem": self.problem, "resolutions": list(self.resolutions),
                "rows": [asdict(r) for r in self.rows], "checks": dict(self.checks),
                "tolerance_rule": self.tolerance_rule, "pass": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable) + "\n"

    def csv_rows(self) -> list[list]:
        return [[r.problem, r.n, _fmt(r.h), _fmt(r.gap_sup), _fmt(r.oracle_gap_soner), _fmt(r.oracle_gap_flux),
                 _fmt(r.pbar_max_sub), _fmt(r.pbar_min_super), str(r.passed).lower()] for r in self.rows]

    def to_csv(self) -> str:
        return rows_to_csv(CSV_COLUMNS, self.csv_rows())


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def field_gap(a: SolveReport, b: SolveReport) -> float:
    """Sup-norm gap over all non-exterior nodes and all output times."""
    return float(max(np.max(np.abs(fa - fb)) for fa, fb in zip(a.fields, b.fields)))


def _oracle_gaps(spec: ProblemSpec, reports: dict):
    from .oracle import oracle_for_spec

    if spec.domain.dim != 1 or not spec.hamiltonian.is_convex:
        return None, None
    dt = min(r.dt for r in reports.values())
    orc = oracle_for_spec(spec, dt)
    gaps = {}
    for mode, rep in reports.items():
        x = rep.positions[:, 0]
        gaps[mode] = float(max(np.max(np.abs(f - orc.at(x, k))) for k, f in enumerate(rep.fields)))
    return gaps["soner"], gaps["flux"]


def equivalence_experiment(spec_base: ProblemSpec, resolutions, with_oracle: bool = True,
                           with_probes: bool = True) -> EquivalenceReport:
    """Run both boundary closures at each resolution and compare."""
    res = [int(n) for n in resolutions]
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ValueError("resolutions must be strictly increasing")
    jobs = [(n, mode) for n in res for mode in ("soner", "flux")]
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(jobs))) as pool:
        solved = dict(zip(jobs, pool.map(lambda job: solve(spec_base.replace(n=job[0], bc=BCMode(job[1], "A0"))),
                                         jobs)))
    rows = []
    for n in res:
        reports = {mode: solved[n, mode] for mode in ("soner", "flux")}
        gap = field_gap(reports["soner"], reports["flux"])
        norm_u = float(max(np.max(np.abs(f)) for f in reports["flux"].fields))
        zero_floor = 10.0 * spec_base.stop_tol * (1.0 + norm_u)
        og_s = og_f = None
        if with_oracle:
            og_s, og_f = _oracle_gaps(spec_base.replace(n=n), reports)
        pmax = pmin = None
        probes_ok = True
        if with_probes:
            survey = slope_survey(reports["flux"])
            pmax, pmin, probes_ok = survey["pbar_max_sub"], survey["pbar_min_super"], survey["pass"]
        h = reports["flux"].h
        ok = probes_ok
        if og_s is not None:
            ok = ok and og_s <= 2 * math.sqrt(h) and og_f <= 2 * math.sqrt(h)
        rows.append(ResolutionRow(spec_base.name, n, h, gap, og_s, og_f, pmax, pmin, norm_u, zero_floor, ok))
    checks = _equivalence_checks(rows)
    for r in rows:
        r.passed = r.passed and checks["final_gap"] if r is rows[-1] else r.passed
    return EquivalenceReport(spec_base.name, res, rows, checks)


def _equivalence_checks(rows) -> dict:
    eff = [0.0 if r.gap_sup <= r.zero_floor else r.gap_sup for r in rows]
    decreasing = all(b <= (1 + MONOTONE_SLACK) * a for a, b in zip(eff, eff[1:]))
    last = rows[-1]
    final = last.gap_sup <= EQUIV_FACTOR * last.h * (1.0 + last.norm_u)
    return {"decreasing": bool(decreasing), "final_gap": bool(final),
            "per_resolution": all(r.passed for r in rows)}


# -- operator identities -----------------------------------------------------

@dataclass
class IdentityEntry:
    hamiltonian: str
    check: str
    max_error: float
    tolerance: float
    violations: int
    samples: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.max_error <= self.tolerance


@dataclass
class IdentityReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def by_check(self, check: str) -> list:
        return [e for e in self.entries if e.check == check]

    def to_dict(self) -> dict:
        return {"entries": [{**asdict(e), "pass": e.passed} for e in self.entries], "pass": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable) + "\n"

    def to_csv(self) -> str:
        rows = [[e.hamiltonian, e.check, _fmt(e.max_error), _fmt(e.tolerance), e.violations, e.samples,
                 str(e.passed).lower()] for e in self.entries]
        return rows_to_csv(("hamiltonian", "check", "max_error", "tolerance", "violations", "samples", "pass"), rows)


def _slices(H: Hamiltonian, rng, n_tangential: int):
    """Directional slices over the catalog frames and random tangential slopes."""
    out = []
    for fr in catalog.frames(H.dim):
        if H.dim == 1:
            out.append(DirectionalSlice.from_frame(H, fr, np.zeros(0)))
        else:
            for pt in rng.uniform(-3, 3, n_tangential):
                out.append(DirectionalSlice.from_frame(H, fr, [pt]))
    return out


def operator_identity_suite(hams: dict | None = None, n_samples: int = 10_000, seed: int = 0,
                            n_levels: int = 64) -> IdentityReport:
    """Envelope algebra, level inversion and limiter identities on dense samples.

    Each slice gets ``n_samples / #slices`` normal slopes (at least 64), so every
    Hamiltonian sees at least ``n_samples`` pairs ``(p', p_N)``.
    """
    hams = catalog.hamiltonians() if hams is None else hams
    rng = np.random.default_rng(seed)
    entries = []
    for name, H in hams.items():
        slices = _slices(H, rng, 4)
        per = max(64, -(-n_samples // len(slices)))
        acc = {k: [0.0, 0, 0] for k in ("envelope_max", "envelope_min", "monotone_minus", "monotone_plus",
                                         "flux_A0", "limiter_identity", "level_inversion", "pi_order")}

        def record(key, err, viol, count):
            a = acc[key]
            a[0] = max(a[0], float(err))
            a[1] += int(viol)
            a[2] += int(count)

        for sl in slices:
            env = valley(sl)
            A0 = env.min_value
            width = max(4.0, 2.0 * abs(env.pi0) + 4.0)
            s = np.sort(np.concatenate([rng.uniform(env.pi0 - width, env.pi0 + width, per - 3),
                                        [env.pi0, *env.valley_interval]]))
            Hs = np.asarray(sl(s))
            hm, hp = np.asarray(h_minus(sl, env, s)), np.asarray(h_plus(sl, env, s))
            record("envelope_max", np.max(np.abs(np.maximum(hm, hp) - Hs)), 0, len(s))
            record("envelope_min", np.max(np.abs(np.minimum(hm, hp) - A0)), 0, len(s))
            record("monotone_minus", 0.0, np.sum(np.diff(hm) > 0), len(s))
            record("monotone_plus", 0.0, np.sum(np.diff(hp) < 0), len(s))
            fa = np.asarray(flux_limited_operator(sl, env, FluxLimiter(lambda pt, v=A0: v, "A0"), s))
            record("flux_A0", np.max(np.abs(fa - hm)), 0, len(s))
            for A in (A0, A0 + 1.0):
                pp = pi_plus(sl, env, A)
                record("limiter_identity", abs(float(h_minus(sl, env, pp)) - A0), 0, 1)
            lam = np.concatenate([[A0], A0 + np.sort(rng.uniform(0, 10, n_levels - 2)), [A0 + 10.0]])
            pp, pm = np.asarray(pi_plus(sl, env, lam)), np.asarray(pi_minus(sl, env, lam))
            err = np.max(np.abs(np.concatenate([sl(pp), sl(pm)]) - np.concatenate([lam, lam])))
            record("level_inversion", err, 0, 2 * len(lam))
            viol = (np.sum(pm > env.valley_interval[0] + 1e-12) + np.sum(pp < env.valley_interval[1] - 1e-12)
                    + np.sum(np.diff(pp) < 0) + np.sum(np.diff(pm) > 0))
            record("pi_order", 0.0, viol, len(lam))
        tol = {"envelope_max": 1e-9, "envelope_min": 1e-9, "monotone_minus": 0.0, "monotone_plus": 0.0,
               "flux_A0": 1e-12, "limiter_identity": 1e-7, "level_inversion": 1e-7, "pi_order": 0.0}
        for key, (err, viol, count) in acc.items():
            entries.append(IdentityEntry(name, key, err, tol[key], viol, count))
    return IdentityReport(entries)


__all__ = [
    "CSV_COLUMNS",
    "CriticalSlopeProbe",
    "EquivalenceReport",
    "IdentityReport",
    "Jet",
    "critical_slope",
    "equivalence_experiment",
    "field_gap",
    "make_probe",
    "operator_identity_suite",
    "slope_survey",
    "touching_jet",
]
