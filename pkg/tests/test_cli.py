import json
import math
import subprocess
import sys
import textwrap

import pytest

from mixedrates.cli import run
from mixedrates.config import load_config, parse_config
from mixedrates.errors import ConfigError
from mixedrates.oracles import optimal_coding_error
from mixedrates.rates import solve
from mixedrates.sources import MarkovSource, Mixture
from mixedrates.spectrum import exact_classes

TWO = textwrap.dedent("""
    [source]
    kind = "mixture"

    [[source.components]]
    weight = "0.5"
    kind = "iid"
    pmf = ["0.89", "0.11"]

    [[source.components]]
    weight = "0.5"
    kind = "iid"
    pmf = ["0.55", "0.45"]
""")


@pytest.fixture
def two(tmp_path):
    path = tmp_path / "two.toml"
    path.write_text(TWO)
    return str(path)


def test_config_parses_decimal_strings():
    cfg = parse_config(TWO.encode())
    assert isinstance(cfg.source, Mixture)
    assert cfg.source.sources[0].pmf.masses == (0.89, 0.11)


def test_config_markov_and_quadrature():
    cfg = parse_config(b'[source]\nkind = "markov"\ntransition = [["0.75", "0.25"], ["0.25", "0.75"]]\n')
    assert isinstance(cfg.source, MarkovSource)
    cfg = parse_config(b'[source]\nkind = "quadrature"\nlo = "0.1"\nhi = "0.3"\nnodes = 4\n')
    assert len(cfg.source.components) == 4


@pytest.mark.parametrize("text", [
    b'[source]\nkind = "iid"\npmf = [0.5, 0.5]\n',
    b'[source]\nkind = "iid"\npmf = ["0.5", "x"]\n',
    b'[source]\nkind = "zeta"\n',
    b'nothing = 1\n',
    b'[source\n',
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_rates_happy_path(two, capsys):
    assert run(["rates", "--source", two, "--problem", "resolvability", "--delta", "0.6"]) == 0
    out = capsys.readouterr().out
    assert "case     II" in out
    sol = solve(load_config(two).source, "resolvability", 0.6)
    assert repr(sol.b) in out and repr(sol.a / math.log(2)) in out


def test_rates_json(two, capsys):
    assert run(["rates", "--source", two, "--problem", "coding", "--epsilon", "0.3", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["b"] == solve(load_config(two).source, "coding", 0.3).b


@pytest.mark.parametrize("argv", [
    ["rates", "--problem", "resolvability", "--delta", "2.5"],
    ["rates", "--problem", "coding", "--epsilon", "1.0"],
    ["rates", "--problem", "nope", "--delta", "0.5"],
    ["rates", "--problem", "coding", "--delta", "0.5"],
    ["oracle", "--problem", "coding", "--n", "0", "--M", "3"],
    ["oracle", "--problem", "coding", "--n", "4"],
    ["oracle", "--problem", "coding", "--n", "4", "--budget", "1.5"],
    ["study", "--problem", "coding", "--target", "0.3", "--grid", "64,16"],
    ["bogus"],
])
def test_usage_errors_exit_2(two, argv, capsys):
    assert run(argv + ["--source", two]) == 2
    assert capsys.readouterr().out == ""


def test_domain_error_exit_1(two, capsys):
    code = run(["rates", "--source", two, "--problem", "coding", "--epsilon", "0.3", "--a", "0.5"])
    assert code == 1
    err = capsys.readouterr().err
    assert "InfeasibleA" in err


def test_oracle_golden(two, capsys):
    assert run(["oracle", "--source", two, "--problem", "coding", "--n", "12", "--M", "100"]) == 0
    doc = json.loads(capsys.readouterr().out)
    expected = optimal_coding_error(exact_classes(load_config(two).source, 12), 100)
    assert doc["objective"] == expected.objective
    assert [(a["class"], a["kept"]) for a in doc["allocation"]] == list(expected.allocation)


def test_oracle_budget_modes(two, capsys):
    assert run(["oracle", "--source", two, "--problem", "intrinsic", "--n", "8",
                "--budget", "0.6", "--brief"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["exactness"] == "heuristic-upper-bound" and "upper bound" in doc["note"]
    assert run(["oracle", "--source", two, "--problem", "intrinsic", "--n", "3",
                "--budget", "0.6", "--mode", "exhaustive"]) == 1


def test_spectrum_csv(two, tmp_path, capsys):
    assert run(["spectrum", "--source", two, "--n", "6"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "value_nats,mass" and len(lines) == 8
    out = tmp_path / "s.csv"
    assert run(["spectrum", "--source", two, "--n", "6", "--out", str(out)]) == 0
    assert out.read_text().splitlines() == lines


def test_spectrum_mc_deterministic(two, capsys):
    run(["spectrum", "--source", two, "--n", "10", "--samples", "500", "--seed", "3"])
    a = capsys.readouterr().out
    run(["spectrum", "--source", two, "--n", "10", "--samples", "500", "--seed", "3"])
    assert capsys.readouterr().out == a


@pytest.mark.parametrize("kind", ["mapping", "code", "code-to-mapping", "mapping-to-code"])
def test_construct_reports_margin(two, kind, tmp_path, capsys):
    table = tmp_path / "t.csv"
    assert run(["construct", kind, "--source", two, "--n", "10", "--M", "64",
                "--table", str(table)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["margin"] >= -1e-12
    assert table.read_text().startswith("class,value_nats")


def test_construct_converse_and_inequalities(two, capsys):
    assert run(["construct", "converse", "--source", two, "--n", "10", "--M", "64", "--z", "1.2"]) == 0
    assert json.loads(capsys.readouterr().out)["margin"] >= 0
    assert run(["construct", "spectrum-inequalities", "--source", two, "--n", "16", "--z", "2.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert all(c["holds"] for c in doc["components"])


def test_construct_precondition_exit_1(two, capsys):
    assert run(["construct", "mapping", "--source", two, "--n", "10", "--M", "4", "--z", "5"]) == 1


def test_study_csv_bytes_identical(two, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["study", "--source", two, "--problem", "intrinsic", "--target", "0.6",
                    "--grid", "16,64", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text().splitlines()
    assert text[0].startswith("#")
    assert text[1] == "n,a_nats,oracle_logM_nats,predicted_Rn,statistic,theory_b,gap,case_label"


def test_study_unwritable_exit_1(two, tmp_path, capsys):
    bad = tmp_path / "no" / "x.csv"
    assert run(["study", "--source", two, "--problem", "coding", "--target", "0.3",
                "--grid", "16", "--out", str(bad)]) == 1
    assert "no" in capsys.readouterr().err


def test_verify_default_config_passes(capsys):
    assert run(["verify"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and len(doc["checks"]) > 10


def test_verify_random_mixtures(capsys):
    assert run(["verify", "--random", "5", "--seed", "11", "--n", "4,8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert {c["source"] for c in doc["checks"]} >= {f"random-{k}" for k in range(5)}


def test_verify_corrupted_weight_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(TWO.replace('weight = "0.5"\nkind = "iid"\npmf = ["0.55"', 'weight = "0.6"\nkind = "iid"\npmf = ["0.55"'))
    assert run(["verify", "--source", str(bad)]) == 1
    assert "sum" in capsys.readouterr().err


def test_module_entry_point(two):
    proc = subprocess.run([sys.executable, "-m", "mixedrates", "rates", "--source", two,
                           "--problem", "resolvability", "--delta", "0.6"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "a_nats" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "mixedrates", "rates", "--source", two,
                           "--problem", "resolvability", "--delta", "2.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stdout == ""
