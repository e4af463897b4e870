import json
import shutil

import pytest
from conftest import FIXTURES

from chartstr.cli import main

CONVERT = FIXTURES / "convert"
EVAL = FIXTURES / "eval"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# -- convert ----------------------------------------------------------------


@pytest.mark.parametrize("fmt, golden", [("str-text", "sales.str"), ("str-jsonl", "sales.jsonl")])
def test_convert_golden(tmp_path, capsys, fmt, golden):
    code, _, _ = run(capsys, "convert", str(CONVERT / "sales.csv"), "--to", fmt, "--out", str(tmp_path))
    assert code == 0
    produced = tmp_path / golden
    assert produced.read_bytes() == (CONVERT / golden).read_bytes()


def test_convert_str_to_lct_round_trip(tmp_path, capsys):
    assert run(capsys, "convert", str(CONVERT / "sales.str"), "--to", "lct", "--out", str(tmp_path))[0] == 0
    back = (tmp_path / "sales.csv").read_text()
    assert back == 'none,Q1,Q2,"Q3, est."\nCost,$4,9,n/a\nSales,10,"1,200",12.5%\n'
    shutil.copy(tmp_path / "sales.csv", tmp_path / "again.lct")
    assert run(capsys, "convert", str(tmp_path / "again.lct"), "--to", "str-text", "--out", str(tmp_path / "o"))[0] == 0
    assert (tmp_path / "o" / "again.str").read_text() == (CONVERT / "sales.str").read_text()


def test_convert_malformed(tmp_path, capsys):
    code, _, err = run(capsys, "convert", str(CONVERT / "bad.csv"), "--to", "str-text", "--out", str(tmp_path))
    assert code == 1
    assert "bad.csv" in err and "line 3" in err


def test_convert_refuses_overwrite(tmp_path, capsys):
    shutil.copy(CONVERT / "sales.str", tmp_path / "x.str")
    code, _, err = run(capsys, "convert", str(tmp_path / "x.str"), "--to", "str-text")
    assert code == 1 and "overwrite" in err


# -- eval -------------------------------------------------------------------


def test_eval_identical(tmp_path, capsys):
    report = tmp_path / "r.json"
    gt = str(EVAL / "gt")
    code, out, _ = run(capsys, "eval", "--pred", gt, "--gt", gt, "--report", str(report))
    assert code == 0
    doc = json.loads(report.read_text())
    for name in ("strict", "slight", "high"):
        assert doc["m_precision"][name] == 1.0
        assert set(doc["precision_at"][name].values()) == {1.0}
    assert doc["em"] == 1.0
    assert out.splitlines()[0].split()[:2] == ["Tolerance", "mPrecision"]


def test_eval_empty_gt(tmp_path, capsys):
    (tmp_path / "gt").mkdir()
    code, _, err = run(capsys, "eval", "--pred", str(EVAL / "pred"), "--gt", str(tmp_path / "gt"))
    assert code == 1


def test_eval_pairing(tmp_path, capsys):
    lax = tmp_path / "lax.json"
    strict = tmp_path / "strict.json"
    args = ["eval", "--pred", str(EVAL / "pred"), "--gt", str(EVAL / "gt"), "--tol", "strict"]
    assert run(capsys, *args, "--report", str(lax))[0] == 0
    code, _, err = run(capsys, *args, "--report", str(strict), "--strict-pairing")
    assert code == 0 and "img11" in err
    lax, strict = json.loads(lax.read_text()), json.loads(strict.read_text())
    assert lax["L"] == 19 and strict["L"] == 20
    assert lax["unpaired"]["missing_pred"] == ["img11"]
    assert "img10" in lax["pred_errors"]
    row = next(r for r in strict["per_image"] if r["id"] == "img11")
    assert row["strict"]["iou"] == 0.0


def test_eval_bad_gt_is_data_error(tmp_path, capsys):
    (tmp_path / "gt").mkdir()
    (tmp_path / "pred").mkdir()
    shutil.copy(CONVERT / "bad.csv", tmp_path / "gt" / "a.csv")
    shutil.copy(CONVERT / "sales.csv", tmp_path / "pred" / "a.csv")
    assert run(capsys, "eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"))[0] == 1


def test_eval_bad_tolerance(capsys):
    gt = str(EVAL / "gt")
    assert run(capsys, "eval", "--pred", gt, "--gt", gt, "--tol", "lenient")[0] == 2


def test_eval_literal_mode(tmp_path, capsys):
    gt = str(EVAL / "gt")
    report = tmp_path / "r.json"
    assert run(capsys, "eval", "--pred", gt, "--gt", gt, "--mode", "paper-literal", "--report", str(report))[0] == 0
    assert json.loads(report.read_text())["mode"] == "paper_literal"


# -- qa ---------------------------------------------------------------------


def test_qa_fixture(tmp_path, capsys):
    report = tmp_path / "qa.json"
    code, out, _ = run(capsys, "qa", "--pred", str(FIXTURES / "qa_five.jsonl"), "--report", str(report))
    assert code == 0
    assert json.loads(out)["accuracy"] == 0.6
    assert json.loads(report.read_text())["correct"] == 3


def test_qa_empty(tmp_path, capsys):
    (tmp_path / "e.jsonl").write_text("")
    assert run(capsys, "qa", "--pred", str(tmp_path / "e.jsonl"))[0] == 1


def test_qa_bad_margin(capsys):
    assert run(capsys, "qa", "--pred", str(FIXTURES / "qa_five.jsonl"), "--margin", "-1")[0] == 2


# -- simulate ---------------------------------------------------------------


@pytest.fixture
def seeds(tmp_path):
    d = tmp_path / "seeds"
    d.mkdir()
    for i, text in enumerate(["none,A\nx,1\n", "none,A,B\nx,1,2\n", "none,Q1\nSales,9\ny,3\n"]):
        (d / f"s{i}.csv").write_text(text)
    return d


def test_simulate_mock_and_resume(tmp_path, capsys, seeds):
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "simulate", "--seeds", str(seeds), "--out", str(out), "--mock")
    assert code == 0
    summary = json.loads(stdout)
    assert summary["counts"]["verified"] == 3 and summary["llm_calls"] == 6
    assert sorted(p.name for p in (out / "images").iterdir()) == ["s0.png", "s1.png", "s2.png"]
    code, stdout, _ = run(capsys, "simulate", "--seeds", str(seeds), "--out", str(out), "--mock")
    assert code == 0 and json.loads(stdout)["llm_calls"] == 0


@pytest.mark.parametrize(
    "yaml_text",
    ["max_retries: 3\nbogus: 1\n", "llm:\n  api_key: sk-secret\n", "max_retries: many\n", "max_retries: [\n"],
)
def test_simulate_bad_config(tmp_path, capsys, seeds, yaml_text):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml_text)
    code, _, err = run(capsys, "--config", str(cfg), "simulate", "--seeds", str(seeds), "--out", str(tmp_path / "o"), "--mock")
    assert code == 2 and "config error" in err


def test_simulate_http_requires_endpoint(tmp_path, capsys, seeds, monkeypatch):
    monkeypatch.delenv("CHARTSTR_LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("CHARTSTR_LLM_MODEL", raising=False)
    assert run(capsys, "simulate", "--seeds", str(seeds), "--out", str(tmp_path / "o"))[0] == 2


def test_simulate_transport_total_failure(tmp_path, capsys, seeds, monkeypatch):
    # nothing listens on port 9 of localhost
    monkeypatch.setenv("CHARTSTR_LLM_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions")
    monkeypatch.setenv("CHARTSTR_LLM_MODEL", "m")
    code, _, err = run(capsys, "simulate", "--seeds", str(seeds), "--out", str(tmp_path / "o"))
    assert code == 1 and "transport" in err


def test_config_env_override(tmp_path, monkeypatch):
    from chartstr.config import load_config

    cfg = tmp_path / "c.yaml"
    cfg.write_text("llm:\n  endpoint: http://a\n  model: x\neval:\n  mode: paper-literal\n")
    c = load_config(cfg, environ={"CHARTSTR_LLM_MODEL": "y"})
    assert (c.llm.endpoint, c.llm.model) == ("http://a", "y")
    assert c.eval.mode == "paper-literal"
