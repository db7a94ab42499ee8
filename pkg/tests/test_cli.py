import csv
import io
import math
from pathlib import Path

import orjson
import pytest

import batch_eval
from cli import main, parse_flags
from imcflab import __version__
from imcflab.errors import ConfigError
from imcflab.export import write_csv
from imcflab.scenario import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, load_scenario, parse_scenario, run
from imcflab.verify import verify

SCHWARZSCHILD = {"kind": "schwarzschild", "params": {"m": 1.0}}


def _scenario(tmp_path: Path, name: str, body: dict) -> Path:
    path = tmp_path / name
    path.write_bytes(orjson.dumps(body))
    return path


def _read_rows(path: Path) -> list[dict]:
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_usage_errors_exit_with_one() -> None:
    assert main([]) == EXIT_FAILED
    assert main(["bake"]) == EXIT_FAILED
    assert main(["flow"]) == EXIT_FAILED
    assert main(["verify", "nope"]) == EXIT_FAILED
    assert main(["flow", "--config"]) == EXIT_FAILED


def test_parse_flags() -> None:
    flags, rest = parse_flags(["grid", "--out", "o", "--threads", "2", "--tolerance-scale", "0.5"])
    assert rest == ["grid"]
    assert flags == {"out": "o", "threads": 2, "tolerance_scale": 0.5}
    with pytest.raises(ConfigError):
        parse_flags(["--verbose"])
    with pytest.raises(ConfigError):
        parse_flags(["--threads", "0"])
    with pytest.raises(ConfigError):
        parse_flags(["--tolerance-scale", "-1"])


def test_config_errors_exit_with_two(tmp_path: Path) -> None:
    bad_p = _scenario(tmp_path, "green.json", {"experiment": "green", "metric": {"kind": "euclidean"}, "p": 3.5})
    assert main(["green", "--config", str(bad_p)]) == EXIT_CONFIG
    missing = _scenario(tmp_path, "flow.json", {"experiment": "flow", "metric": "nowhere.json"})
    assert main(["flow", "--config", str(missing)]) == EXIT_CONFIG
    mass = _scenario(tmp_path, "mass.json", {"experiment": "mass", "metric": SCHWARZSCHILD})
    assert main(["flow", "--config", str(mass)]) == EXIT_CONFIG
    assert main(["flow", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_scenario_json_errors_carry_a_position(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text('{\n  "experiment": "flow",\n  "metric": ,\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_scenario(path)
    assert info.value.line == 3


def test_parse_scenario_validation() -> None:
    with pytest.raises(ConfigError, match="needs a metric"):
        parse_scenario({"experiment": "mass"})
    with pytest.raises(ConfigError, match="R must be positive"):
        parse_scenario({"experiment": "flow", "metric": SCHWARZSCHILD, "R": 0})
    with pytest.raises(ConfigError, match="unknown suite"):
        parse_scenario({"experiment": "verify", "suite": "huge"})
    a = parse_scenario({"experiment": "mass", "metric": SCHWARZSCHILD, "seed": 3})
    b = parse_scenario({"seed": 3, "metric": SCHWARZSCHILD, "experiment": "mass"})
    assert a.scenario_hash == b.scenario_hash


@pytest.mark.parametrize("metric", [
    {"kind": "grid", "shape": [4, 4, 4], "box": {"lo": [0, 0, 0], "h": 0.1}},
    {"kind": "space_form", "params": {"a": "x"}},
])
def test_malformed_metrics_exit_with_two_and_leave_a_summary(tmp_path: Path, metric: dict) -> None:
    sc = parse_scenario({"experiment": "metric", "metric": metric})
    code, summary = run(sc, tmp_path)
    assert code == EXIT_CONFIG
    assert summary["error"]
    assert orjson.loads((tmp_path / "summary.json").read_bytes())["exit_code"] == EXIT_CONFIG


def test_non_numeric_scenario_values_are_config_errors() -> None:
    with pytest.raises(ConfigError, match="R must be a number"):
        parse_scenario({"experiment": "flow", "metric": SCHWARZSCHILD, "R": "big"})
    with pytest.raises(ConfigError, match="p must be a number"):
        parse_scenario({"experiment": "green", "metric": SCHWARZSCHILD, "p": "two"})
    with pytest.raises(ConfigError, match="o must be"):
        parse_scenario({"experiment": "metric", "metric": SCHWARZSCHILD, "o": [1, 2]})


def test_schwarzschild_flow_end_to_end(tmp_path: Path) -> None:
    config = _scenario(tmp_path, "flow.json", {"experiment": "flow", "metric": SCHWARZSCHILD,
                                               "flow": {"t_max": 6.0, "spacing": 0.05}})
    out = tmp_path / "out"
    assert main(["flow", "--config", str(config), "--out", str(out)]) == EXIT_OK

    rows = _read_rows(out / "flow.csv")
    assert len(rows) > 10
    assert max(abs(float(r["hawking"]) - 1.0) for r in rows) < 1e-6
    assert float(rows[-1]["t"]) <= 6.0 + 1e-9

    summary = orjson.loads((out / "summary.json").read_bytes())
    assert summary["version"] == __version__
    assert summary["scenario_hash"] == load_scenario(config).scenario_hash
    assert summary["exit_code"] == EXIT_OK
    assert summary["hard_failures"] == []
    assert not summary["partial"]

    first = (out / "flow.csv").read_bytes()
    assert main(["flow", "--config", str(config), "--out", str(out)]) == EXIT_OK
    assert (out / "flow.csv").read_bytes() == first


def test_mass_scenario_writes_the_sweep(tmp_path: Path) -> None:
    sc = parse_scenario({"experiment": "mass", "metric": SCHWARZSCHILD,
                         "mass": {"r_min": 2.5, "r_max": 1000.0, "n": 40, "by": "area"}})
    code, summary = run(sc, tmp_path)
    assert code == EXIT_OK
    assert 0.98 <= summary["result"]["m_iso_estimate"] <= 1.02
    rows = _read_rows(tmp_path / "mass.csv")
    assert len(rows) == 40
    assert rows[-1]["tail"] == "1"


def test_radial_only_experiments_reject_grids(tmp_path: Path) -> None:
    sc = parse_scenario({"experiment": "profile", "metric": {"kind": "flat_grid", "half_width": 1.0, "n": 9},
                         "profile": {"v_max": 1.0}})
    code, summary = run(sc, tmp_path)
    assert code == EXIT_CONFIG
    assert "radial metric" in summary["error"]
    assert orjson.loads((tmp_path / "summary.json").read_bytes())["exit_code"] == EXIT_CONFIG


def test_batch_eval_records_each_scale(tmp_path: Path) -> None:
    config = _scenario(tmp_path, "mass.json", {"experiment": "mass", "metric": SCHWARZSCHILD,
                                               "mass": {"r_min": 2.5, "r_max": 100.0, "n": 12, "by": "area"}})
    broken = _scenario(tmp_path, "broken.json", {"experiment": "mass"})
    inp = tmp_path / "batch.csv"
    inp.write_text(f"config,out\n{config},{tmp_path / 'runs'}\n{broken},\n,\n", encoding="utf-8")
    result = tmp_path / "results.csv"
    assert batch_eval.run_batch(str(inp), str(result)) == 0

    rows = list(csv.DictReader(result.open(encoding="utf-8")))
    assert len(rows) == 2
    ok, bad = rows
    assert ok["experiment"] == "mass"
    assert all(ok[f"exit_{s}"] == "0" for s in batch_eval.SCALES)
    assert bad[f"hard_failures_{batch_eval.SCALES[0]}"].startswith("[ERROR:")
    assert (tmp_path / "runs" / "scale_1.0" / "summary.json").exists()
    assert batch_eval.run_batch(str(tmp_path / "none.csv"), str(result)) == 1


def test_write_csv_documents_columns(tmp_path: Path) -> None:
    path = write_csv(tmp_path / "t.csv", [{"t": 0.1, "components": 1, "passed": True, "detail": None}],
                     ["t", "components", "passed", "detail"], {"scenario_hash": "abc"})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# scenario_hash: abc"
    assert lines[1].startswith("# column t: flow time")
    assert lines[-2] == "t,components,passed,detail"
    assert lines[-1] == "0.10000000000000001,1,1,"
    assert float(lines[-1].split(",")[0]) == 0.1
    assert math.isnan(float(write_csv(tmp_path / "n.csv", [{"x": math.nan}]).read_text().splitlines()[-1]))


def test_radial_suite_passes(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        verify("nightly")
    summary = verify("radial")
    failed = [r["check"] for r in summary["rows"] if not r["passed"]]
    assert failed == []
    assert summary["passed"]
    assert main(["verify", "radial", "--out", str(tmp_path)]) == EXIT_OK
    assert _read_rows(tmp_path / "verify.csv")


@pytest.mark.slow
def test_grid_suite_passes() -> None:
    assert verify("grid")["passed"]
