"""JSON problem files <-> :class:`~hjflux.solver.ProblemSpec`."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError
from .geometry import Domain
from .hamiltonian import Hamiltonian
from .solver import BCMode, ProblemSpec

TOP_KEYS = ("equation", "hamiltonian", "domain", "bc", "grid", "time", "init", "solver")
OPTIONAL_TOP = ("name",)
DEFAULT_SOLVER = {"cfl": 0.45, "stop_tol": 1e-8, "max_iter": 10**6}


def _section(cfg: dict, key: str, required: bool = True) -> dict:
    val = cfg.get(key)
    if val is None:
        if required:
            raise ConfigError(f"{key}: missing section")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"{key}: expected an object, got {type(val).__name__}")
    return val


def _check_keys(section: dict, allowed, where: str):
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {extra}")


def parse_spec(cfg: dict) -> ProblemSpec:
    if not isinstance(cfg, dict):
        raise ConfigError("top level: expected an object")
    _check_keys(cfg, TOP_KEYS + OPTIONAL_TOP, "top level")
    dom_cfg = _section(cfg, "domain")
    _check_keys(dom_cfg, ("family", "params"), "domain")
    domain = Domain.from_config(dom_cfg.get("family"), dom_cfg.get("params"))

    ham_cfg = _section(cfg, "hamiltonian")
    _check_keys(ham_cfg, ("family", "params"), "hamiltonian")
    H = Hamiltonian.from_config(ham_cfg.get("family"), ham_cfg.get("params"), domain.dim)
    if H.dim != domain.dim:
        raise ConfigError(f"hamiltonian.params: {H.dim}-dimensional Hamiltonian on a {domain.dim}-dimensional domain")

    bc_cfg = _section(cfg, "bc", required=False)
    _check_keys(bc_cfg, ("mode", "limiter"), "bc")
    lim = bc_cfg.get("limiter") or {}
    if not isinstance(lim, dict):
        raise ConfigError("bc.limiter: expected an object")
    _check_keys(lim, ("kind", "value"), "bc.limiter")
    value = lim.get("value")
    bc = BCMode(bc_cfg.get("mode", "flux"), lim.get("kind", "A0"), None if value is None else _num(value, "bc.limiter.value"))

    grid = _section(cfg, "grid")
    _check_keys(grid, ("n",), "grid")
    n = grid.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"grid.n: expected a positive integer, got {n!r}")

    time = _section(cfg, "time", required=False)
    _check_keys(time, ("T", "outputs"), "time")
    T = time.get("T")
    T = None if T is None else _num(T, "time.T")
    outputs = time.get("outputs") or []
    if not isinstance(outputs, list):
        raise ConfigError("time.outputs: expected a list of times")
    outputs = tuple(_num(t, f"time.outputs[{k}]") for k, t in enumerate(outputs))
    if T is not None and any(t <= 0 or t > T for t in outputs):
        raise ConfigError("time.outputs: every output time must lie in (0, T]")

    init = _section(cfg, "init", required=False) or {"kind": "constant", "params": {"value": 0.0}}
    _check_keys(init, ("kind", "params"), "init")
    if init.get("kind") not in ("linear", "tent", "constant", "table"):
        raise ConfigError(f"init.kind: expected linear|tent|constant|table, got {init.get('kind')!r}")

    solver = {**DEFAULT_SOLVER, **_section(cfg, "solver", required=False)}
    _check_keys(solver, DEFAULT_SOLVER, "solver")
    max_iter = solver["max_iter"]
    if not isinstance(max_iter, int) or max_iter < 1:
        raise ConfigError(f"solver.max_iter: expected a positive integer, got {max_iter!r}")
    stop_tol = _num(solver["stop_tol"], "solver.stop_tol")
    if stop_tol <= 0:
        raise ConfigError("solver.stop_tol: must be positive")

    return ProblemSpec(
        equation=cfg.get("equation"),
        hamiltonian=H,
        domain=domain,
        bc=bc,
        n=n,
        T=T,
        outputs=outputs,
        init={"kind": init["kind"], "params": dict(init.get("params") or {})},
        cfl=_num(solver["cfl"], "solver.cfl"),
        stop_tol=stop_tol,
        max_iter=max_iter,
        name=str(cfg.get("name", "")),
    )


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    return float(x)


def spec_to_dict(spec: ProblemSpec) -> dict:
    limiter = {"kind": spec.bc.limiter}
    if spec.bc.value is not None:
        limiter["value"] = float(spec.bc.value)
    out = {
        "equation": spec.equation,
        "hamiltonian": spec.hamiltonian.to_config(),
        "domain": spec.domain.to_config(),
        "bc": {"mode": spec.bc.mode, "limiter": limiter},
        "grid": {"n": int(spec.n)},
        "time": {"T": spec.T, "outputs": [float(t) for t in spec.outputs]},
        "init": {"kind": spec.init["kind"], "params": spec.init.get("params", {})},
        "solver": {"cfl": float(spec.cfl), "stop_tol": float(spec.stop_tol), "max_iter": int(spec.max_iter)},
    }
    if spec.name:
        out = {"name": spec.name, **out}
    return out


def dumps(spec: ProblemSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=False) + "\n"


def loads(text: str, source: str = "<string>") -> ProblemSpec:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_spec(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    spec = loads(text, str(path))
    if not spec.name:
        spec = spec.replace(name=path.stem)
    return spec
