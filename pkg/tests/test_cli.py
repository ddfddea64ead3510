import json
import subprocess
import sys

import pytest
import yaml

from qfock.cli import main, run
from qfock.config import ConfigError, DEFAULT_TOLERANCES, load_config, parse_config


def write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def invoke(tmp_path, command, cfg, *extra):
    out = tmp_path / f"{command}.json"
    rc = main([command, "--config", write(tmp_path, cfg), "--out", str(out), *extra])
    return rc, json.loads(out.read_text())


def checks(report):
    return {c["name"]: c for c in report["checks"]}


# -- config ---------------------------------------------------------------------------


def test_parse_mixed_with_matrix():
    cfg = parse_config({"kind": "mixed", "N": 4, "Q": [[0.1, "1/3"], ["1/3", -0.2]], "seed": 3})
    assert cfg.d == 2 and cfg.seed == 3 and cfg.q is None
    assert cfg.tolerances == DEFAULT_TOLERANCES


def test_parse_constant_q():
    cfg = parse_config({"N": 3, "d": 2, "q": 0.5})
    assert cfg.Q.is_constant and cfg.q == 0.5


def test_parse_aw():
    cfg = parse_config({"kind": "araki-woods", "N": 4, "blocks": [{"pair": 4.0}, {"invariant": 1}], "q": 0.3})
    assert cfg.d == 3 and cfg.q == 0.3


def test_asymmetric_Q_error_names_field_and_pair():
    with pytest.raises(ConfigError, match=r"field 'Q'.*q\[0\]\[1\]"):
        parse_config({"N": 3, "Q": [[0.1, 0.2], [0.3, 0.1]]})


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"N": 3}, "Q"),
        ({"Q": [[0.1]]}, "N"),
        ({"N": 0, "Q": [[0.1]]}, "N"),
        ({"N": 3, "Q": [[0.1]], "colour": 1}, "colour"),
        ({"N": 3, "Q": [[0.1]], "tolerances": {"nope": 1}}, "tolerances.nope"),
        ({"N": 3, "Q": [[0.1]], "tolerances": {"identity": -1}}, "tolerances.identity"),
        ({"N": 3, "Q": [[0.1]], "precision": "double"}, "precision"),
        ({"N": 3, "Q": [[0.1]], "seed": -2}, "seed"),
        ({"N": 3, "Q": [[1.5]]}, "Q"),
        ({"N": 3, "d": 3, "Q": [[0.1]]}, "d"),
        ({"kind": "araki-woods", "N": 3, "q": 0.1}, "blocks"),
        ({"kind": "araki-woods", "N": 3, "blocks": [{"pair": 0}]}, "blocks"),
        ({"kind": "araki-woods", "N": 3, "blocks": [{"pair": 2}], "q": 1.2}, "q"),
        ({"kind": "other", "N": 3}, "kind"),
    ],
)
def test_config_errors(raw, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert exc.value.field == field


def test_tolerance_override_and_echo(tmp_path):
    path = write(tmp_path, {"N": 3, "d": 1, "q": 0.2, "tolerances": {"identity": 1e-6}})
    cfg = load_config(path, {"seed": 9})
    assert cfg.tolerances["identity"] == 1e-6 and cfg.seed == 9
    assert cfg.echo()["Q"] == [[0.2]]


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("N: [1,\n")
    with pytest.raises(ConfigError):
        load_config(bad)


# -- commands -------------------------------------------------------------------------


def test_moments_free_single_letter(tmp_path):
    rc, rep = invoke(tmp_path, "moments", {"N": 4, "d": 1, "q": 0.0, "params": {"order": 4}})
    assert rc == 0 and rep["pass"]
    c = checks(rep)["moment/s0^4"]
    assert c["lhs"] == pytest.approx(2) and c["rhs"] == 2


def test_commutator_decay_constant_q(tmp_path):
    rc, rep = invoke(tmp_path, "commutator-decay", {"N": 5, "d": 2, "q": 0.5})
    assert rc == 0
    assert rep["data"]["norms"]["0,0"] == pytest.approx([1, 0.5, 0.25, 0.125, 0.0625], abs=1e-12)
    assert max(rep["data"]["norms"]["0,1"]) < 1e-12


def test_asymmetric_Q_is_a_usage_error(tmp_path, capsys):
    rc = main(["gram", "--config", write(tmp_path, {"N": 3, "Q": [[0.1, 0.2], [0.3, 0.1]]})])
    assert rc == 2
    err = capsys.readouterr().err
    assert "Q" in err and "q[0][1]" in err


def test_report_fields(tmp_path):
    rc, rep = invoke(tmp_path, "gram", {"N": 4, "Q": [[0.3, -0.2], [-0.2, 0.6]], "seed": 5})
    assert rc == 0
    for key in ("command", "config", "seed", "tolerances", "checks", "pass", "timings", "versions", "cache_hits"):
        assert key in rep
    assert set(rep["checks"][0]) >= {"name", "lhs", "rhs", "tolerance", "pass"}
    assert rep["config"]["seed"] == 5


def test_exact_precision_gram_only(tmp_path, capsys):
    cfg = {"N": 3, "Q": [["1/3", "-1/4"], ["-1/4", "1/2"]]}
    rc, rep = invoke(tmp_path, "gram", cfg, "--precision", "exact")
    assert rc == 0 and any("exact" in c["name"] for c in rep["checks"])
    rc = main(["moments", "--config", write(tmp_path, cfg), "--precision", "exact"])
    assert rc == 2 and "precision" in capsys.readouterr().err


def test_determinism(tmp_path):
    cfg = {"N": 6, "Q": [[0.3, -0.2], [-0.2, 0.6]], "seed": 11}
    _, a = invoke(tmp_path, "trace-check", cfg)
    _, b = invoke(tmp_path, "trace-check", cfg)
    assert a["checks"] == b["checks"] and a["data"] == b["data"]


def test_cache_roundtrip_through_cli(tmp_path, capsys):
    cache = tmp_path / "cache"
    cfg = {"N": 4, "Q": [[0.3, -0.2], [-0.2, 0.6]]}
    assert main(["cache", "list", "--cache", str(cache)]) == 0
    assert json.loads(capsys.readouterr().out)["entries"] == []
    rc, rep = invoke(tmp_path, "gram", cfg, "--cache", str(cache))
    assert rc == 0
    capsys.readouterr()
    main(["cache", "list", "--cache", str(cache)])
    listed = json.loads(capsys.readouterr().out)["entries"]
    assert sorted(e["n"] for e in listed) == [0, 1, 2, 3, 4]
    _, again = invoke(tmp_path, "gram", cfg, "--cache", str(cache))
    assert again["cache_hits"] == 5
    capsys.readouterr()
    path = cache / listed[-1]["file"]
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 1
    path.write_bytes(bytes(raw))
    assert main(["cache", "verify", "--cache", str(cache)]) == 1
    assert json.loads(capsys.readouterr().out)["problems"]
    assert main(["cache", "purge", "--cache", str(cache)]) == 0


def test_budget_failure_is_structured(tmp_path):
    rc, rep = invoke(tmp_path, "gram", {"N": 6, "d": 3, "q": 0.1, "budget": 100})
    assert rc == 1 and not rep["pass"]
    assert rep["checks"][0]["name"] == "gram/error" and "SizeError" in rep["checks"][0]["note"]


def test_wrong_kind_is_reported(tmp_path):
    rc, rep = invoke(tmp_path, "aw-modular", {"N": 4, "d": 2, "q": 0.1})
    assert rc == 1 and "UnsupportedModeError" in rep["checks"][0]["note"]


MIXED = {"N": 6, "Q": [[0.4, -0.3], [-0.3, 0.2]], "seed": 1, "params": {"trials": 5}}
AW = {"kind": "araki-woods", "N": 4, "blocks": [{"pair": 4.0}, {"invariant": 1}], "q": 0.3, "seed": 2, "params": {"trials": 5}}


@pytest.mark.parametrize("command", ["gram", "ops", "commutator-decay", "moments", "trace-check", "wick", "commutant"])
def test_mixed_commands_pass(command):
    rep = run(command, parse_config(MIXED))
    assert rep["pass"], [c for c in rep["checks"] if not c["pass"]]


@pytest.mark.parametrize(
    "command",
    ["gram", "ops", "commutator-decay", "moments", "trace-check", "wick", "commutant", "conv-check",
     "aw-inner", "aw-modular", "aw-centralizer", "aw-fixed"],
)
def test_aw_commands_pass(command):
    rep = run(command, parse_config(AW))
    assert rep["pass"], [c for c in rep["checks"] if not c["pass"]]


def test_aw_chain_reports_the_literal_order_failure():
    rep = run("aw-thm44", parse_config(AW))
    failed = [c["name"] for c in rep["checks"] if not c["pass"]]
    assert failed and all("(i)" in name for name in failed)


def test_conv_check_default_suite():
    rep = run("conv-check", parse_config({**MIXED, "params": {"suite": "default"}}))
    assert rep["pass"]


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "qfock.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "aw-thm44" in out.stdout
    bad = subprocess.run([sys.executable, "-m", "qfock.cli", "nope"], capture_output=True, text=True)
    assert bad.returncode == 2
