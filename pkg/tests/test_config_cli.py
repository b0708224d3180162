import hashlib
import json
from pathlib import Path

import pytest

from tstsim import fixtures
from tstsim.cli import main, replica_seeds
from tstsim.config import SCHEMA_VERSION, model_document, parse_config
from tstsim.errors import SchemaError, ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_canonical_config_roundtrip():
    model, run = parse_config((CONFIGS / "canonical.json").read_text(), env={})
    ref = fixtures.canonical()
    assert model.ids == ref.ids
    assert (model.b == ref.b).all() and (model.alpha == ref.alpha).all()
    assert run.command == "check" and run.eps == (1e-4, 1e-6)


def test_parametric_config_roundtrip():
    model, run = parse_config((CONFIGS / "parametric.json").read_text(), env={})
    assert model.families is not None
    assert run.seed == 42


def test_a2_violation_reported():
    doc = model_document(fixtures.canonical())
    doc["rates"]["b"] = list(doc["rates"]["d"])
    with pytest.raises(ValidationError, match=r"\(A2\)"):
        parse_config(doc, env={})


def test_unknown_field_named():
    doc = model_document(fixtures.canonical())
    doc["scales"]["epsilonn"] = 1.0
    with pytest.raises(SchemaError, match="unknown field 'epsilonn'"):
        parse_config(doc, env={})


def test_schema_version_checked():
    doc = model_document(fixtures.canonical())
    doc["schema_version"] = SCHEMA_VERSION + 1
    with pytest.raises(SchemaError):
        parse_config(doc, env={})


def test_override_precedence():
    doc = model_document(fixtures.parametric(), {"command": "simulate-tst", "seed": 1})
    _, run = parse_config(doc, env={})
    assert run.seed == 1
    _, run = parse_config(doc, env={"TSTSIM_SEED": "2"})
    assert run.seed == 2
    _, run = parse_config(doc, overrides={"seed": 3}, env={"TSTSIM_SEED": "2"})
    assert run.seed == 3


def test_stochastic_command_needs_seed():
    doc = model_document(fixtures.parametric(), {"command": "simulate-tst"})
    with pytest.raises(ValidationError, match="seed"):
        parse_config(doc, env={})


def test_replica_seeds_distinct_and_stable():
    a = replica_seeds(5, 4)
    assert a == replica_seeds(5, 4) and len(set(a)) == 4
    assert replica_seeds(5, 1) == [5]


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.delenv("TSTSIM_SEED", raising=False)
    out = tmp_path / "ov"
    assert main(["check", "--config", str(CONFIGS / "order_violation.json"), "--out", str(out)]) == 4
    assert (out / "assumptions.json").exists() and (out / "error.txt").exists()
    assert (out / "manifest.json").exists()

    doc = model_document(fixtures.canonical())
    doc["rates"]["b"] = list(doc["rates"]["d"])
    assert main(["check", "--config", write(tmp_path, doc), "--out", str(tmp_path / "a2")]) == 3

    doc = model_document(fixtures.canonical())
    doc["bogus"] = 1
    assert main(["check", "--config", write(tmp_path, doc), "--out", str(tmp_path / "sch")]) == 2

    assert main(["check", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_limit_profile_and_manifest(tmp_path):
    out = tmp_path / "lp"
    assert main(["limit-profile", "--config", str(CONFIGS / "canonical.json"), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 0
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    profile = json.loads((out / "profile.json").read_text())
    assert profile["ordered_ids"] == [0, 1, 2]


def test_cli_assumption_failure_on_profile(tmp_path):
    cfg = write(tmp_path, model_document(fixtures.chain_four()))
    assert main(["limit-profile", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_cli_two_scale_replicas(tmp_path):
    out = tmp_path / "ts"
    args = ["simulate-two-scale", "--config", str(CONFIGS / "parametric.json"), "--out", str(out),
            "--seed", "7", "--replicas", "2", "--t-end", "0.2"]
    assert main(args) == 0
    for k in range(2):
        assert (out / f"replica_{k:04d}" / "trajectory.csv").exists()
        assert (out / f"replica_{k:04d}" / "mutations.jsonl").exists()


def test_cli_verify_writes_csv(tmp_path):
    out = tmp_path / "v"
    assert main(["verify-convergence", "--config", str(CONFIGS / "canonical.json"), "--out", str(out)]) == 0
    assert (out / "convergence.csv").read_text().startswith("epsilon,eta,trait,event")
    assert (out / "slopes.csv").exists()


def test_cli_stability(tmp_path):
    out = tmp_path / "s"
    assert main(["stability", "--config", str(CONFIGS / "canonical.json"), "--out", str(out)]) == 0
    pairs = json.loads((out / "stability.json").read_text())
    assert [(p["x"], p["y"]) for p in pairs] == [(0, 1), (1, 2)]
    assert all(p["basin_ratio"] == 1.0 for p in pairs)
