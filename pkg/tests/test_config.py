import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjflux import catalog, config
from hjflux.errors import ConfigError

PROBLEMS = sorted((Path(__file__).resolve().parents[1] / "problems").glob("*.json"))
BASE = json.loads((Path(__file__).resolve().parents[1] / "problems" / "eikonal_interval.json").read_text())


def _with(path: str, value):
    cfg = json.loads(json.dumps(BASE))
    *head, last = path.split(".")
    node = cfg
    for key in head:
        node = node[key]
    if value is KeyError:
        del node[last]
    else:
        node[last] = value
    return json.dumps(cfg)


@pytest.mark.parametrize("path", PROBLEMS, ids=lambda p: p.stem)
def test_problem_files_load_and_round_trip(path):
    spec = config.load(path)
    assert spec.name == path.stem
    assert config.dumps(spec) == path.read_text()
    assert config.dumps(config.loads(config.dumps(spec))) == config.dumps(spec)


def test_problem_files_match_catalog():
    cat = catalog.problems()
    assert {p.stem for p in PROBLEMS} == set(cat)
    for p in PROBLEMS:
        assert config.dumps(config.load(p)) == config.dumps(cat[p.stem])


def test_name_defaults_to_file_stem(tmp_path):
    cfg = dict(BASE)
    del cfg["name"]
    path = tmp_path / "unnamed_case.json"
    path.write_text(json.dumps(cfg))
    assert config.load(path).name == "unnamed_case"


def test_optional_sections_take_defaults():
    cfg = {k: v for k, v in BASE.items() if k not in ("bc", "time", "init", "solver")}
    spec = config.parse_spec(cfg)
    assert spec.bc.mode == "flux" and spec.init["kind"] == "constant"


def test_json_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigError, match=r"^case\.json:3:\d+: "):
        config.loads('{\n  "name": "x",\n  oops\n}', "case.json")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        config.load("/nonexistent/problem.json")


@pytest.mark.parametrize("path,value,match", [
    ("grid.n", 0, r"grid\.n"),
    ("grid.n", 2.5, r"grid\.n"),
    ("grid.n", True, r"grid\.n"),
    ("grid", KeyError, r"grid: missing section"),
    ("grid.extra", 1, r"grid: unknown key"),
    ("surprise", 1, r"top level: unknown key"),
    ("init.kind", "spline", r"init\.kind"),
    ("solver.stop_tol", -1.0, r"solver\.stop_tol"),
    ("solver.max_iter", 0, r"solver\.max_iter"),
    ("solver.cfl", "fast", r"solver\.cfl"),
    ("bc.limiter", 3, r"bc\.limiter"),
    ("bc.limiter.value", "x", r"bc\.limiter\.value"),
    ("time.outputs", 0.5, r"time\.outputs"),
    ("domain", [], r"domain: expected an object"),
])
def test_field_errors_name_the_field(path, value, match):
    with pytest.raises(ConfigError, match=match):
        config.loads(_with(path, value), "case.json")


def test_output_times_inside_horizon():
    cfg = json.loads(config.dumps(catalog.problems()["tent_evolution"]))
    cfg["time"]["outputs"] = [cfg["time"]["T"] * 2]
    with pytest.raises(ConfigError, match=r"time\.outputs"):
        config.parse_spec(cfg)


def test_dimension_mismatch():
    cfg = json.loads(config.dumps(catalog.problems()["disk_quadratic"]))
    cfg["hamiltonian"] = BASE["hamiltonian"]
    with pytest.raises(ConfigError):
        config.parse_spec(cfg)


def test_top_level_must_be_object():
    with pytest.raises(ConfigError, match="top level"):
        config.loads("[1, 2]")


@given(st.sampled_from(sorted(catalog.problems())), st.integers(1, 500), st.sampled_from(["flux", "soner"]))
def test_round_trip_is_idempotent(name, n, mode):
    spec = catalog.problems()[name]
    cfg = json.loads(config.dumps(spec))
    cfg["grid"]["n"] = n
    cfg["bc"]["mode"] = mode
    once = config.dumps(config.parse_spec(cfg))
    assert config.dumps(config.loads(once)) == once
    assert json.loads(once)["grid"]["n"] == n
