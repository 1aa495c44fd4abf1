import json
import os
import pathlib
import subprocess

import jsonschema
import pytest

EXE = os.environ.get("COLLAPSE_LAB", "build/tools/collapse-lab")
SCENARIOS = pathlib.Path(os.environ.get("COLLAPSE_LAB_SCENARIOS", "scenarios"))


def cli(*args, cwd=None):
    return subprocess.run([EXE, *map(str, args)], capture_output=True, text=True, cwd=cwd, timeout=600)


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


@pytest.fixture(scope="module")
def schema():
    r = cli("schema")
    assert r.returncode == 0
    s = json.loads(r.stdout)
    jsonschema.Draft202012Validator.check_schema(s)
    return s


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_sample_scenarios_validate_and_run(path, schema, tmp_path):
    jsonschema.validate(json.loads(path.read_text()), schema)
    r = cli("run", path, "--out", tmp_path / "out", "-q")
    assert r.returncode == 0, r.stderr
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["outputs"]
    for o in manifest["outputs"]:
        assert (tmp_path / "out" / o["file"]).stat().st_size == o["bytes"] > 0


def test_every_kind_has_a_sample():
    kinds = {json.loads(p.read_text())["kind"] for p in SCENARIOS.glob("*.json")}
    assert kinds == {"exact", "front", "wigner", "collapse", "born", "fokker-planck", "timescale", "full-pipeline"}


def test_schema_rejects_unknown_keys(schema):
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"kind": "front", "front": {"dxx": 1}}, schema)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"kind": "born", "ensemble": {}}, schema)


def test_validation_error_exits_1_and_lists_every_problem(tmp_path):
    cfg = write(tmp_path, {"kind": "born", "born": {"trials": 10, "extra": 1},
                           "ensemble": {"probabilities": [0.3, 0.6]}})
    r = cli("run", cfg, "--out", tmp_path / "o")
    assert r.returncode == 1
    assert "born.extra" in r.stderr
    assert "born.trials" in r.stderr
    assert "0.9" in r.stderr
    assert not (tmp_path / "o").exists()


def test_missing_file_exits_1(tmp_path):
    assert cli("run", tmp_path / "nope.json").returncode == 1


def test_runtime_error_exits_2_with_context(tmp_path):
    cfg = write(tmp_path, {"kind": "front", "name": "bad-channels",
                           "front": {"domain_length": 10, "dx": 0.1, "t_final": 1,
                                     "channel_probs": [0.5, 0.5], "sources": [{"lo": 0, "hi": 1, "channel": 0}]}})
    r = cli("run", cfg, "--out", tmp_path / "o")
    assert r.returncode == 2, r.stderr
    assert "scenario 'bad-channels' (front)" in r.stderr


def test_acceptance_failure_exits_3(tmp_path):
    r = cli("accept", "--only", "front-profile", "--out", tmp_path / "acc")
    assert r.returncode == 3
    assert r.stdout.count("[3] front-profile") == 1


def test_acceptance_pass_exits_0(tmp_path):
    r = cli("accept", "--only", "timescale", "--out", tmp_path / "acc")
    assert r.returncode == 0, r.stdout + r.stderr
    lines = [l for l in r.stdout.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert lines == [l for l in lines if l.startswith("PASS [12] timescale")] and len(lines) == 1


def test_seed_override_changes_output_and_manifest(tmp_path):
    cfg = SCENARIOS / "collapse.json"
    a, b, c = (tmp_path / n for n in "abc")
    assert cli("run", cfg, "--out", a, "-q").returncode == 0
    assert cli("run", cfg, "--out", b, "-q").returncode == 0
    assert cli("run", cfg, "--out", c, "--seed", 12345, "-q").returncode == 0
    assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()
    assert (a / "runs.csv").read_bytes() != (c / "runs.csv").read_bytes()
    mc = json.loads((c / "manifest.json").read_text())
    assert mc["config"]["master_seed"] == 12345
    ma = json.loads((a / "manifest.json").read_text())
    assert ma["config_hash"] != mc["config_hash"]


def test_kind_subcommand_runs_defaults(tmp_path):
    r = cli("timescale", "--out", tmp_path / "t")
    assert r.returncode == 0
    assert "1e-14" in r.stdout
    assert (tmp_path / "t" / "timescale.csv").exists()


def test_kind_subcommand_rejects_other_kind(tmp_path):
    r = cli("wigner", SCENARIOS / "front.json", "--out", tmp_path / "w")
    assert r.returncode == 1


def test_bad_flag_exits_1():
    assert cli("run", "--no-such-flag").returncode == 1
