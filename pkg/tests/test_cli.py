import io
import json

import pytest

from sheetcert.cli import main, parse_report, render_json

CLEAN = ('!sheet Inputs\nA1: "Rates"\nB1: 0.05\n'
         '!sheet Calc\nA1: "Interest"\nB1: =Inputs!B1*Inputs!B1\n')
BAD = "!sheet S\nA1: =A2\nA2: 1\n"


def run(*argv):
    out = io.StringIO()
    code = main(list(map(str, argv)), out=out)
    return code, out.getvalue()


@pytest.fixture
def files(tmp_path):
    (tmp_path / "clean.sheet").write_text(CLEAN)
    (tmp_path / "bad.sheet").write_text(BAD)
    return tmp_path


def test_rules_listing():
    code, out = run("rules")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 21
    assert lines[0].startswith("R01  Required")
    assert lines[18].startswith("R19  Forbidden")


def test_check_exit_codes(files):
    assert run("check", files / "bad.sheet")[0] == 2
    code, out = run("check", files / "bad.sheet", "--disable", "R02,R03,R04,R05,R07,R09,R11")
    assert code == 1  # only encouraged/discouraged findings remain
    code, out = run("check", files / "clean.sheet", "--disable", "R05,R07,R09,R11,R13,R14")
    assert code == 0 and "No violations." in out


def test_check_text_output(files):
    code, out = run("check", files / "bad.sheet")
    assert "NonCompliant" in out
    assert "R04 [item 4] S!A1: reads A2, which comes later" in out
    assert "Not assessable" in out and "R10 [item 10]" in out


def test_json_deterministic_and_round_trips(files):
    a = run("check", files / "bad.sheet", "--format", "json")[1]
    b = run("check", files / "bad.sheet", "--format", "json")[1]
    assert a == b
    report = parse_report(a)
    assert render_json(report) == a
    doc = json.loads(a)
    assert list(doc) == ["workbook", "ruleset_version", "verdict", "region_summary", "violations", "not_assessable"]
    r04 = next(v for v in doc["violations"] if v["rule"] == "R04")
    assert r04["location"] == {"kind": "cell", "ref": "A1"} and r04["severity"] == "Required"


def test_load_error(files):
    assert run("check", files / "missing.sheet")[0] == 3
    (files / "broken.sheet").write_text("!sheet S\nA1: =SUM(\n")
    assert run("check", files / "broken.sheet")[0] == 3
    assert run("check", files / "bad.sheet", "--manifest", files / "none.manifest")[0] == 3


def test_usage_errors(files, capsys):
    assert run()[0] == 4
    assert run("frobnicate")[0] == 4
    assert run("check", files / "bad.sheet", "--region", "nonsense")[0] == 4
    assert run("check", files / "bad.sheet", "--disable", "R99")[0] == 4
    (files / "bad.cfg").write_text("complexity_node_limit = -1\n")
    assert run("check", files / "bad.sheet", "--config", files / "bad.cfg")[0] == 4
    assert run("check", files / "bad.sheet", "--region", "input=S!A1:B2",
               "--region", "output=S!B2:C3")[0] == 4


def test_config_from_environment(files, monkeypatch):
    (files / "off.cfg").write_text("disabled_rules = R04\n")
    monkeypatch.setenv("SHEETCERT_CONFIG", str(files / "off.cfg"))
    out = run("check", files / "bad.sheet", "--format", "json")[1]
    assert all(v["rule"] != "R04" for v in json.loads(out)["violations"])


def test_certify_and_verify(files):
    path = files / "clean.sheet"
    code, out = run("certify", path)
    assert code == 2 and "certificate written to" in out
    assert (files / "clean.sheet.cert").exists()
    assert run("verify", path)[0] == 0
    path.write_text(CLEAN.replace("B1: 0.05", "B1: 0.07"))
    code, out = run("verify", path)
    assert code == 0 and "Valid" in out
    path.write_text(CLEAN.replace("Inputs!B1*Inputs!B1", "Inputs!B1+Inputs!B1"))
    code, out = run("verify", path)
    assert code == 2 and "StructurallyChanged" in out


def test_verify_config_changed(files):
    path = files / "clean.sheet"
    run("certify", path, "--out", files / "c.cert")
    assert run("verify", path, files / "c.cert", "--disable", "R14")[0] == 6


def test_verify_malformed(files):
    path = files / "clean.sheet"
    run("certify", path)
    cert = files / "clean.sheet.cert"
    cert.write_text(cert.read_text().replace("verdict", "verdikt"))
    assert run("verify", path)[0] == 7
    assert run("verify", path, files / "nope.cert")[0] == 7


def test_certify_write_failure(files):
    assert run("certify", files / "clean.sheet", "--out", files / "no" / "dir" / "x.cert")[0] == 5


def test_certify_json(files):
    code, out = run("certify", files / "bad.sheet", "--format", "json")
    assert json.loads(out)["verdict"] == "NonCompliant"


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0


def test_corpus_examples():
    from conftest import CORPUS
    clean = CORPUS / "clean_compliant.sheet"
    code, out = run("check", clean, "--manifest", CORPUS / "clean_compliant.manifest")
    assert code == 0 and "Compliant" in out
    assert run("check", CORPUS / "r21_hidden_sheet.sheet")[0] == 2


def test_rules_listing_details():
    lines = run("rules")[1].splitlines()
    assert "Forbidden" in lines[17] and lines[17].startswith("R18")
    assert "NotCheckable" in lines[9] and lines[9].startswith("R10")


def test_certify_compliant(tmp_path):
    from conftest import CORPUS
    import shutil
    for name in ("clean_compliant.sheet", "clean_compliant.manifest", "spec.txt"):
        shutil.copy(CORPUS / name, tmp_path / name)
    code, _ = run("certify", tmp_path / "clean_compliant.sheet", "--manifest", tmp_path / "clean_compliant.manifest")
    assert code == 0
    assert "verdict = Compliant\n" in (tmp_path / "clean_compliant.sheet.cert").read_text()
    assert run("verify", tmp_path / "clean_compliant.sheet", "--manifest", tmp_path / "clean_compliant.manifest")[0] == 0
    assert run("verify", tmp_path / "clean_compliant.sheet")[0] == 0  # manifest declares no regions


def test_check_xlsx_matches_fixture(files):
    from sheetcert.ingest import load_fixture
    from xlsx_builder import write_workbook
    write_workbook(load_fixture(files / "bad.sheet"), files / "bad.xlsx")
    a = json.loads(run("check", files / "bad.sheet", "--format", "json")[1])
    b = json.loads(run("check", files / "bad.xlsx", "--format", "json")[1])
    assert a["violations"] == b["violations"] and a["verdict"] == b["verdict"]
