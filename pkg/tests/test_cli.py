import csv
import json

import pytest

from fraclab.cli import ConfigError, ExperimentConfig, main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_check_sp_example_gives_one_row(tmp_path):
    code = main(["check-sp", "--domain", "unit_square", "--delta", "0.5", "--p", "2", "--tau", "0.5",
                 "--h", "1/64", "--out", str(tmp_path)])
    assert code == 0
    r = rows(tmp_path / "results.csv")
    assert len(r) == 2 and r[1][0] == "sobolev_poincare"
    assert float(r[1][r[0].index("h")]) == 1 / 64
    doc = json.loads((tmp_path / "results.json").read_text())
    assert doc["command"] == "check-sp" and len(doc["reports"]) == 1


def test_empty_fixture_list_writes_header_only(tmp_path):
    assert main(["check-sp", "--fixtures", "", "--h", "1/16", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "results.csv")
    assert r == [["name", "domain", "delta", "p", "q", "tau", "h", "lhs", "rhs", "ratio"]]


def test_counterexample_exit_codes(tmp_path):
    assert main(["counterexample", "--m-max", "6", "--out", str(tmp_path / "a")]) == 0
    r = rows(tmp_path / "a" / "results.csv")
    trace = [float(x[-1]) for x in r[1:-1]]
    assert len(trace) == 6 and trace == sorted(trace)
    assert float(r[-1][-1]) >= 3
    # two terms cannot grow threefold: the assertion tier fails
    assert main(["counterexample", "--m-max", "2", "--out", str(tmp_path / "b")]) == 1
    doc = json.loads((tmp_path / "b" / "results.json").read_text())
    assert any(not a["passed"] for a in doc["assertions"])


def test_counterexample_off_critical_is_skipped(tmp_path):
    assert main(["counterexample", "--delta", "0.4", "--m-max", "2", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "results.json").read_text())
    assert doc["skipped"] and "delta = 1/p" in doc["skipped"][0]["reason"]


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 3\nh = ["1/16"]\nfixtures = ["random_smooth(2)"]\n'
                   '[domain]\nname = "ball"\n[params]\ndelta = [0.3, 0.5]\np = 2.0\n')
    c = ExperimentConfig.from_toml(cfg)
    assert c.domain == "ball" and c.delta == [0.3, 0.5] and c.p == [2.0] and c.seed == 3
    out = tmp_path / "o"
    assert main(["check-sp", "--config", str(cfg), "--delta", "0.5", "--out", str(out)]) == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["config"]["delta"] == [0.5] and doc["config"]["domain"] == "ball"
    assert len(doc["reports"]) == 1


@pytest.mark.parametrize("text", ['colour = "red"\n', 'h = ["1/0"]\n', 'fixtures = ["wavy"]\n', "[domain]\nr = 1\n",
                                  "not toml ["])
def test_bad_config_exits_two(tmp_path, text):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    assert main(["check-sp", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(cfg)


def test_unknown_domain_exits_two(tmp_path):
    assert main(["whitney", "--domain", "torus", "--out", str(tmp_path)]) == 2


def test_invalid_parameter_combination_skipped(tmp_path):
    # p = 4 >= n / delta: no critical exponent, so the combination is skipped with a reason
    assert main(["check-sp", "--p", "2,4", "--h", "1/16", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "results.json").read_text())
    assert len(doc["reports"]) == 1 and len(doc["skipped"]) == 1
    assert doc["skipped"][0]["reason"]


def test_same_config_gives_identical_csv(tmp_path):
    args = ["check-weak", "--domain", "l_shape", "--fixtures", "random_smooth(3)", "--fixture-count", "3",
            "--seed", "5", "--h", "1/16"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert len(a.splitlines()) == 4


@pytest.mark.parametrize("cmd,dump", [("whitney", "whitney.jsonl"), ("chains", "chains.jsonl")])
def test_decomposition_dumps(tmp_path, cmd, dump):
    assert main([cmd, "--domain", "ball", "--max-level", "5", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / dump).read_text().splitlines()
    assert lines and all(json.loads(x) for x in lines)


def test_assouad_and_exhaustion_commands(tmp_path):
    assert main(["assouad", "--domain", "half_space", "--out", str(tmp_path / "a")]) == 0
    names = [r[0] for r in rows(tmp_path / "a" / "results.csv")[1:]]
    assert names == ["assouad_upper", "assouad_lower"]
    assert rows(tmp_path / "a" / "assouad_profile.csv")[0] == ["center_id", "R", "r", "count"]
    assert main(["exhaustion", "--domain", "half_space", "--sizes", "2,4", "--h", "1/16",
                 "--out", str(tmp_path / "e")]) == 0
    names = [r[0] for r in rows(tmp_path / "e" / "results.csv")[1:]]
    assert names == ["exhaustion_mean", "exhaustion_mean", "exhaustion_zero_shift"]


def test_capacity_and_mazya_commands(tmp_path):
    assert main(["capacity", "--h", "1/16", "--out", str(tmp_path / "c")]) == 0
    assert len(rows(tmp_path / "c" / "results.csv")) == 2
    assert main(["check-mazya", "--domain", "ball", "--h", "1/16", "--fixtures", "radial_bump",
                 "--out", str(tmp_path / "m")]) == 0
    names = {r[0] for r in rows(tmp_path / "m" / "results.csv")[1:]}
    assert "mazya" in names
