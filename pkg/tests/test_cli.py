import json

import pytest

from ostbc.cli import main
from ostbc.codes import builtin, code_to_json
from _golden import GOLDEN


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def usage_error(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    capsys.readouterr()
    return exc.value.code


def test_codes_list(capsys):
    code, out, _ = run(capsys, "codes-list")
    assert code == 0 and out == (GOLDEN / "codes_list.txt").read_text()


@pytest.mark.parametrize("name, c", [("G2", 1), ("G3", 2), ("G4", 2), ("H3", 1)])
def test_verify(capsys, name, c):
    code, out, _ = run(capsys, "verify", name)
    assert code == 0 and out.strip() == f"c = {c}"


def test_verify_broken_file(capsys, tmp_path):
    obj = code_to_json(builtin("G3"))
    obj["B"][1][2][0] = "-1" if obj["B"][1][2][0] == "1" else "1"
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(obj))
    code, out, _ = run(capsys, "verify", str(path))
    assert code == 1 and "FAILED" in out


def test_verify_bad_coefficient(capsys, tmp_path):
    obj = code_to_json(builtin("G2"))
    obj["A"][0][0][0] = "7"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    assert run(capsys, "verify", str(path))[0] == 1


@pytest.mark.parametrize("name, M", [("G2", 1), ("G3", 2), ("H3", 1)])
def test_lattice_matches_snapshot(capsys, name, M):
    code, out, _ = run(capsys, "lattice", name, "--m", str(M))
    assert code == 0 and out == (GOLDEN / f"lattice_{name}_M{M}.txt").read_text()


@pytest.mark.parametrize("argv, mul, add", [
    (["count", "G4", "--m", "1", "--level", "grouped"], 85, 127),
    (["count", "H3", "--m", "1", "--level", "full"], 54, 47),
    (["count", "G2", "--m", "1", "--level", "dense"], 28, 15),
])
def test_count_examples(capsys, argv, mul, add):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    row = next(line for line in out.splitlines() if line.startswith(argv[-1]))
    assert row.split()[1:] == ["0", str(mul), str(add)]
    code, out, _ = run(capsys, *argv, "--json")
    rep = json.loads(out)
    assert rep["levels"][argv[-1]] == {"R_D": 0, "R_M": mul, "R_A": add}


@pytest.mark.parametrize("name, M", [("G3", 2), ("H3", 1)])
def test_count_table_snapshot(capsys, name, M):
    code, out, _ = run(capsys, "count", name, "--m", str(M))
    assert code == 0 and out == (GOLDEN / f"count_{name}_M{M}.txt").read_text()


def test_count_flags(capsys):
    _, out, _ = run(capsys, "count", "G4", "--level", "grouped", "--div-policy", "division",
                    "--no-include-c-mult", "--json")
    rep = json.loads(out)
    assert rep["levels"]["grouped"] == {"R_D": 1, "R_M": 80, "R_A": 127}
    assert rep["formula_variants_differ"] is True
    _, out, _ = run(capsys, "count", "G2", "--json")
    assert json.loads(out)["formula_variants_differ"] is False


def test_formula(capsys):
    code, out, _ = run(capsys, "formula", "--k", "4", "--m", "2", "--t", "8", "--n", "3")
    assert code == 0
    assert "2MN: 0 R_D, 280 R_M, 259 R_A" in out and "2MT: 0 R_D, 300 R_M, 279 R_A" in out
    _, out, _ = run(capsys, "formula", "H3", "--json")
    assert json.loads(out)["variants"]["2MT"] == {"R_D": 0, "R_M": 66, "R_A": 49}
    assert usage_error(capsys, "formula", "--k", "2") == 2


@pytest.mark.parametrize("argv", [["compare", "G2", "--trials", "1000"],
                                  ["compare", "H3", "--l", "2", "--trials", "100"],
                                  ["compare", "G3", "--m", "2", "--l", "4", "--trials", "20"]])
def test_compare_agrees(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0 and "all decoders agree" in out


def test_compare_noiseless_prints_recovered_symbols(capsys):
    code, out, _ = run(capsys, "compare", "G4", "--l", "4", "--trials", "3", "--noiseless")
    assert code == 0
    lines = [line for line in out.splitlines() if line.startswith("trial")]
    assert len(lines) == 3
    for line in lines:
        sent, recovered = line.split(" sent ")[1].split(" recovered ")
        assert sent == recovered


def test_compare_reports_disagreement(capsys):
    code, out, _ = run(capsys, "compare", "G2", "--trials", "2", "--tol", "-1")
    assert code == 1 and "DISAGREEMENT at trial 0" in out and "oracle:" in out


def test_decode_seeded_is_reproducible(capsys):
    a = run(capsys, "decode", "H3", "--l", "4", "--seed", "3")
    b = run(capsys, "decode", "H3", "--l", "4", "--seed", "3")
    assert a == b and a[0] == 0 and a[1].startswith("sent: ")


def test_decode_json_input(capsys, tmp_path):
    doc = {"H": {"re": [[1.0], [0.5]], "im": [[0.0], [-0.5]]},
           "Y": {"re": [[1.5], [0.5]], "im": [[0.5], [-0.5]]}}
    path = tmp_path / "in.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "decode", "G2", "--input", str(path), "--json")
    res = json.loads(out)
    assert code == 0 and set(res) >= {"soft", "hard"}
    assert all(abs(v) in (1.0, 3.0) for v in res["hard"]["re"] + res["hard"]["im"])


def test_decode_zero_channel(capsys, tmp_path):
    doc = {"H": {"re": [[0.0], [0.0]], "im": [[0.0], [0.0]]}, "Y": {"re": [[1.0], [0.0]], "im": [[0.0], [0.0]]}}
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(doc))
    assert run(capsys, "decode", "G2", "--input", str(path))[0] == 1


def test_simulate_writes_identical_csv(capsys, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        code, _, _ = run(capsys, "simulate", "G2", "--trials", "1500", "--snr-db", "10", "20", "inf",
                         "--crosscheck", "0.02", "-o", str(p))
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    rows = paths[0].read_text().splitlines()
    assert rows[1] == "snr_db,trials,sym_errors,ser,crosschecks,disagreements"
    assert rows[-1].startswith("inf,1500,0,0,")


@pytest.mark.parametrize("argv", [
    [], ["nonsense"], ["count", "G7"], ["count", "G2", "--level", "best"], ["lattice", "G2", "--m", "0"],
    ["compare", "G2", "--bogus"], ["simulate", "G2", "--snr-db", "-inf"],
])
def test_usage_errors(capsys, argv):
    assert usage_error(capsys, *argv) == 2
