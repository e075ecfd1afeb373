"""Front-end behavior: exit codes, determinism, serialization."""

import json

import pytest

from qhcalc import cli
from qhcalc import op_calculus as oc
from qhcalc.a_spaces import Tower


@pytest.fixture()
def tower_file(tmp_path):
    p = tmp_path / "tower.json"
    p.write_text(json.dumps({"k": 2, "a": [1, 1, 1], "b": 1, "f": [1, 1]}))
    return str(p)


def run(args):
    return cli.main(args)


def test_tower_validate(tower_file, capsys):
    assert run(["tower", "validate", "-c", tower_file]) == 0
    out = capsys.readouterr().out
    assert "valid" in out


def test_missing_config_is_usage_error(tmp_path):
    assert run(["tower", "validate", "-c", str(tmp_path / "nope.json")]) == 2


def test_space_double_deterministic(tower_file, capsys):
    assert run(["space", "double", "-c", tower_file, "--format", "json"]) == 0
    first = capsys.readouterr().out
    assert run(["space", "double", "-c", tower_file, "--format", "json"]) == 0
    second = capsys.readouterr().out
    assert first == second
    data = json.loads(first)
    assert data["e_left"] == [0, 1, 1, 1, 1]
    assert data["e_right"] == [1, 0, 1, 1, 1]


def test_facemap_verify(tower_file, capsys):
    assert run(["facemap", "verify", "-c", tower_file]) == 0
    assert "9 tables, 0 mismatches" in capsys.readouterr().out


def test_weights_seeded_reports_identical(tower_file, capsys):
    assert run(["weights", "-c", tower_file, "--seed", "3",
                "--sweep", "4"]) == 0
    a = capsys.readouterr().out
    assert run(["weights", "-c", tower_file, "--seed", "3",
                "--sweep", "4"]) == 0
    b = capsys.readouterr().out
    assert a == b
    assert "usually displayed form" in a


def test_compose_roundtrip(tower_file, tmp_path, capsys):
    t = Tower(2, (1, 1, 1), 1, (1, 1))
    p = tmp_path / "p.json"
    q = tmp_path / "q.json"
    from qhcalc.index_algebra import make
    P = oc.op_class(t, 0, lf=make((1, 0)), ff_z=make((0, 0)))
    Q = oc.op_class(t, 0, rf=make((2, 0)), ff_z=make((0, 0)))
    p.write_text(json.dumps(oc.class_to_json(P)))
    q.write_text(json.dumps(oc.class_to_json(Q)))
    assert run(["compose", "-c", tower_file, "-P", str(p),
                "-Q", str(q)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["family"]["ff_z"] == [["0/1", "0/1", 0], ["8/1", "0/1", 1]]


def test_compose_nonintegrable_exit_code(tower_file, tmp_path, capsys):
    t = Tower(2, (1, 1, 1), 1, (1, 1))
    from qhcalc.index_algebra import make
    p = tmp_path / "p.json"
    q = tmp_path / "q.json"
    p.write_text(json.dumps(oc.class_to_json(
        oc.op_class(t, 0, rf=make((0, 0)), ff_z=make((0, 0))))))
    q.write_text(json.dumps(oc.class_to_json(
        oc.op_class(t, 0, lf=make((0, 0)), ff_z=make((0, 0))))))
    assert run(["compose", "-c", tower_file, "-P", str(p),
                "-Q", str(q)]) == 1
    assert "not integrable" in capsys.readouterr().err


def test_act(tower_file, tmp_path, capsys):
    t = Tower(2, (1, 1, 1), 1, (1, 1))
    from qhcalc.index_algebra import make
    p = tmp_path / "p.json"
    i = tmp_path / "i.json"
    p.write_text(json.dumps(oc.class_to_json(oc.small(t, 0, 0))))
    i.write_text(json.dumps({"set": [["0/1", "0/1", 0]]}))
    assert run(["act", "-c", tower_file, "-P", str(p), "-I", str(i)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["set"] == [["0/1", "0/1", 0]]


def test_parametrix(tower_file, capsys):
    assert run(["parametrix", "-c", tower_file, "-m", "2"]) == 0
    assert "verified" in capsys.readouterr().out


def test_resolvent_check(tower_file, capsys):
    assert run(["resolvent-check", "-c", tower_file, "--lambda=-1",
                "--N", "4", "--radius", "3"]) == 0
    assert "margin 1" in capsys.readouterr().out
    assert run(["resolvent-check", "-c", tower_file, "--lambda=4pi^2",
                "--N", "4", "--radius", "3"]) == 1
    assert "witness" in capsys.readouterr().out


def test_lambda_parser():
    from fractions import Fraction
    assert cli.parse_lambda("-1") == (-1, 0, 0)
    assert cli.parse_lambda("i") == (0, 0, 1)
    assert cli.parse_lambda("-3+2i") == (-3, 0, 2)
    assert cli.parse_lambda("4pi^2") == (0, 4, 0)
    assert cli.parse_lambda("1/2-3/4i") == (Fraction(1, 2), 0,
                                            Fraction(-3, 4))
    assert cli.parse_lambda("1+2pi^2") == (1, 2, 0)
    with pytest.raises(ValueError):
        cli.parse_lambda("")


def test_normal_family_output(tower_file, capsys):
    assert run(["normal-family", "-c", tower_file, "--N", "2",
                "--mu", "1,0,0"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["diagonal"] and data["exact"] and data["dim"] == 5


def test_export_dot(tower_file, tmp_path):
    out = tmp_path / "g.dot"
    assert run(["export-dot", "-c", tower_file, "--space", "double",
                "-o", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("graph") and '"ff_z"' in text


def test_no_command_is_usage_error(capsys):
    assert run([]) == 2


def test_normal_family_from_operator_spec(tower_file, tmp_path, capsys):
    spec = {"terms": [
        {"alpha": 2, "I": [0], "J": [0], "K": [0],
         "coeff": {"x_poly": [[0, "1", "0"]]}},
        {"alpha": 0, "I": [0], "J": [0], "K": [2],
         "coeff": {"x_poly": [[0, "1", "0"]]}},
        {"alpha": 0, "I": [0], "J": [0], "K": [0],
         "coeff": {"x_poly": [[0, "3", "0"]],
                   "trig": [{"modes": [0, 0, 1], "re": "1/2", "im": "0"}]}},
    ]}
    op = tmp_path / "op.json"
    op.write_text(json.dumps(spec))
    assert run(["normal-family", "-c", tower_file, "-O", str(op),
                "--N", "2", "--mu", "1,0,0"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["dim"] == 5 and data["exact"]
    assert not data["diagonal"]          # the trig factor shifts modes
