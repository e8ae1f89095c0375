from __future__ import annotations

import json
import shutil

import pytest

from cobabs.cli import EXIT_ERROR, EXIT_FAIL, EXIT_NOT_AFFINE, EXIT_OK, EXIT_TRIVIAL, main
from cobabs.report import dumps, without_timings

from conftest import CORPUS


def model(name):
    return str(CORPUS / f"{name}.cob")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_abstract_ex11(tmp_path, capsys):
    out = tmp_path / "ex11.json"
    code, text, _ = run(capsys, "abstract", model("ex11"), "-d", "1", "-k", "3", "--basis", "x; x*y; x*y^2", "-o", str(out))
    assert code == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["abstraction"]["affine"]["main"]["A"] == [["2", "1", "0"], ["1", "9", "1/2"], ["0", "2", "16"]]
    assert rep["abstraction"]["affine"]["main"]["b"] == ["0", "0", "0"]
    assert "dim 3" in text


def test_abstract_to_stdout_is_json(capsys):
    code, text, _ = run(capsys, "abstract", model("fig2"))
    assert code == EXIT_OK
    assert json.loads(text)["closure"]["spaces"]["head"]["dim"] == 6


def test_abstract_trivial_exit(tmp_path, capsys):
    code, _, err = run(capsys, "abstract", model("vanderpol"), "-d", "1", "-k", "8", "-o", str(tmp_path / "v.json"))
    assert code == EXIT_TRIVIAL and "trivial" in err


def test_abstract_fermat_dim(tmp_path, capsys):
    out = tmp_path / "f.json"
    assert run(capsys, "abstract", model("fermat"), "-o", str(out))[0] == EXIT_OK
    assert json.loads(out.read_text())["closure"]["spaces"]["l1"]["dim"] == 17


def test_errors_exit_1(tmp_path, capsys):
    assert run(capsys, "abstract", str(tmp_path / "missing.cob"))[0] == EXIT_ERROR
    bad = tmp_path / "bad.cob"
    bad.write_text("continuous a { vars: x; field { x' = y; } init { } }")
    code, _, err = run(capsys, "abstract", str(bad))
    assert code == EXIT_ERROR and "unknown variable" in err
    code, _, err = run(capsys, "abstract", model("ex11"), "--basis", "x; y")
    assert code == EXIT_ERROR and "not closed" in err


def test_invariants_fermat(tmp_path, capsys):
    rep = tmp_path / "f.json"
    run(capsys, "abstract", model("fermat"), "-o", str(rep))
    code, text, _ = run(capsys, "invariants", str(rep))
    assert code == EXIT_OK
    lines = [l for l in text.splitlines() if l.startswith(("l1:", "l2:", "l3:"))]
    assert len(lines) == 3
    assert all("-1/4*u^2 + 1/4*v^2 + N + 1/2*u - 1/2*v + r = 0" in l for l in lines)
    assert "invariants" in json.loads(rep.read_text())


def test_invariants_two_spring_from_model(capsys):
    code, text, _ = run(capsys, "invariants", model("two_spring"))
    assert code == EXIT_OK
    conserved = [l for l in text.splitlines() if l.startswith("conserved:") and ("v1" in l or "v2" in l)]
    assert len(conserved) == 2


def test_invariants_not_affine(capsys):
    code, _, err = run(capsys, "invariants", model("cubic_d2"))
    assert code == EXIT_NOT_AFFINE and "affine" in err


def test_validate_pass_and_tampered(tmp_path, capsys):
    rep = tmp_path / "e.json"
    run(capsys, "abstract", model("ex11"), "-k", "3", "-o", str(rep))
    code, text, _ = run(capsys, "validate", str(rep))
    assert code == EXIT_OK and text.strip().endswith("PASS")
    data = json.loads(rep.read_text())
    assert data["validation"]["passed"]
    aff = data["abstraction"]["affine"]["main"]["A"]
    aff[0][0] = str(int(aff[0][0]) + 1) if "/" not in aff[0][0] else "7"
    tampered = tmp_path / "t.json"
    tampered.write_text(json.dumps(data))
    code, text, _ = run(capsys, "validate", str(tampered))
    assert code == EXIT_FAIL and "FAIL" in text


def test_validate_toda(tmp_path, capsys):
    rep = tmp_path / "t.json"
    assert run(capsys, "abstract", model("toda2"), "-o", str(rep))[0] == EXIT_OK
    assert json.loads(rep.read_text())["config"]["with_time"]
    code, _, _ = run(capsys, "validate", str(rep))
    assert code == EXIT_OK
    val = json.loads(rep.read_text())["validation"]
    assert val["exp_conservation"]["passed"]
    assert max(val["exp_conservation"]["drift"][:6]) <= 1e-4


def test_validate_trivial_report(tmp_path, capsys):
    rep = tmp_path / "b.json"
    assert run(capsys, "abstract", model("brusselator"), "-o", str(rep))[0] == EXIT_TRIVIAL
    assert run(capsys, "validate", str(rep))[0] == EXIT_OK


def test_multilinearize(tmp_path, capsys):
    code, text, _ = run(capsys, "multilinearize", model("ex11"))
    assert code == EXIT_OK and "y_2" in text
    from cobabs.parser import parse

    assert parse(text).name == "ex11_ml"
    assert run(capsys, "multilinearize", model("fig2"))[0] == EXIT_ERROR


def test_corpus_empty_and_single(tmp_path, capsys):
    code, text, _ = run(capsys, "corpus", str(tmp_path))
    assert code == EXIT_OK
    assert len(text.strip().splitlines()) == 2  # header and rule only
    shutil.copy(CORPUS / "fig2.cob", tmp_path / "fig2.cob")
    code, text, _ = run(capsys, "corpus", str(tmp_path), "--table")
    assert code == EXIT_OK
    rows = text.strip().splitlines()[2:]
    assert len(rows) == 1 and rows[0].startswith("fig2")
    code, text, _ = run(capsys, "corpus", str(tmp_path), "--json")
    assert json.loads(text)[0]["basis"] == 6


def test_corpus_table_columns(capsys):
    code, text, _ = run(capsys, "corpus")
    head = text.splitlines()[0].split()
    assert head == ["ID", "#V", "Deg", "#B0", "Time", "#B*", "Ref", "Match"]
    ids = [l.split()[0] for l in text.splitlines()[2:]]
    assert "toda2" in ids and "toda3" in ids


@pytest.mark.parametrize("name", ["ex11", "fig3", "geo", "hybrid_spin"])
def test_reports_are_deterministic(tmp_path, capsys, name):
    texts = []
    for i in range(2):
        rep = tmp_path / f"{name}{i}.json"
        run(capsys, "abstract", model(name), "-o", str(rep))
        run(capsys, "invariants", str(rep))
        run(capsys, "validate", str(rep))
        texts.append(dumps(without_timings(json.loads(rep.read_text()))))
    assert texts[0] == texts[1]


def test_log_level_env(monkeypatch, capsys):
    monkeypatch.setenv("COB_LOG", "debug")
    assert run(capsys, "abstract", model("fig2"))[0] == EXIT_OK
