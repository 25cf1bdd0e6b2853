import csv
import json
import subprocess
import sys
from fractions import Fraction as F

import pytest

from vmauction.cli import UsageError, main, parse_coins
from vmauction.model import Branch, Instance, dump_instance


@pytest.fixture
def single(tmp_path):
    p = tmp_path / "single.json"
    p.write_text(dump_instance(Instance.from_rows([(2, 8, 2), (1, 6, 2), (5, 4, 4)])))
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_gen_is_deterministic(capsys):
    a = run(capsys, "gen", "--n", 4, "--m", 2, "--seed", 9)[1].out
    b = run(capsys, "gen", "--n", 4, "--m", 2, "--seed", 9)[1].out
    assert a == b and json.loads(a)["n"] == 4


def test_run_replays_coins(capsys, single):
    code, io = run(capsys, "run", "single-alg1", single, "--coins", "sampling:S=1")
    assert code == 0 and json.loads(io.out)["revenue"] == "1/2"


def test_run_expectation(capsys, single):
    code, io = run(capsys, "run", "single-alg1", single, "--expect")
    assert code == 0
    assert json.loads(io.out)["expected_revenue"] == "931/624"


def test_missing_epsilon_is_usage_error(capsys, single):
    code, io = run(capsys, "run", "single-alg6", single)
    assert code == 2 and "--epsilon" in io.err


def test_unknown_mechanism_exits_two(single):
    with pytest.raises(SystemExit) as exc:
        main(["run", "nope", str(single)])
    assert exc.value.code == 2


def test_bad_instance_file(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"agents": [{"budget": "-1", "values": ["1"], "tau": "1"}]}')
    assert run(capsys, "run", "single-fp", p)[0] == 2


@pytest.mark.parametrize("text,branch,sample", [
    ("indivisible", Branch.INDIVISIBLE, ()),
    ("sampling:S=1,3", Branch.SAMPLING, (0, 2)),
    ("sampling:S=", Branch.SAMPLING, ()),
])
def test_parse_coins(text, branch, sample):
    c = parse_coins(text, 3)
    assert c.procedure_choice is branch and tuple(sorted(c.sample)) == sample


def test_parse_coins_rejects_out_of_range():
    with pytest.raises(UsageError):
        parse_coins("sampling:S=4", 3)


def test_audit_exit_codes(capsys, tmp_path, single):
    assert run(capsys, "audit", "single-fp", single)[0] == 0
    canary = tmp_path / "canary.json"
    canary.write_text(dump_instance(Instance.from_rows([(12, (20, 0), 1), (1, (10, 1), 1), (1, (0, 0), 1)])))
    code, io = run(capsys, "audit", "ud-alg4", canary)
    assert code == 0 and json.loads(io.out)["deviations"]


def test_report_writes_csv_and_audits(capsys, tmp_path, single):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "a.json").write_text(single.read_text())
    (corpus / "b.json").write_text(dump_instance(Instance.from_rows([(5, (10, 2), 1), (10, (6, 8), 2)])))
    out = tmp_path / "res" / "report.csv"
    code, io = run(capsys, "report", corpus, "--mechanisms", "single-alg1,ud-alg5", "--out", out)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["instance"] + r["mechanism"] for r in rows] == ["asingle-alg1", "aud-alg5", "bud-alg5"]
    for r in rows:
        assert (r["pass"] == "true") == (F(r["revenue"]) >= F(r["bound"]) * F(r["opt"]))
    assert "b single-alg1" in io.err
    summary = json.loads((out.parent / "audit-single-alg1.json").read_text())
    assert summary["passed"] and summary["instances"] == 1


def test_report_empty_corpus(capsys, tmp_path):
    (tmp_path / "c").mkdir()
    out = tmp_path / "r.csv"
    assert run(capsys, "report", tmp_path / "c", "--mechanisms", "single-fp", "--out", out, "--no-audit")[0] == 0
    assert out.read_text() == "instance,mechanism,revenue,opt,ratio,bound,pass,assumption_flags\n"


def test_check_lemmas(capsys, tmp_path):
    p = tmp_path / "i.json"
    p.write_text(dump_instance(Instance.from_rows([(3, (10, 4), 1), (100, (8, 6), 1)])))
    code, io = run(capsys, "check-lemmas", p, "--epsilon", "1")
    assert code == 0 and json.loads(io.out)["greedy_clip"]["passed"]


def test_concentration(capsys, tmp_path, single):
    code, io = run(capsys, "concentration", single)
    assert code == 0 and json.loads(io.out)["status"] == "precondition unmet"
    p = tmp_path / "many.json"
    p.write_text(dump_instance(Instance.from_rows([(1, 40, 1)] * 40)))
    code, io = run(capsys, "concentration", p)
    assert code == 0 and json.loads(io.out)["exact"]


def test_module_entry_point(single):
    res = subprocess.run([sys.executable, "-m", "vmauction", "run", "single-fp", str(single)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["revenue"] == "2"
