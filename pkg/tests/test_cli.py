import dataclasses
import json
import math

import pytest

from gapcert.cli.commands import (
    SWEEP_COLUMNS,
    cmd_analyze,
    cmd_subsets,
    cmd_sweep,
    cmd_verify,
    problem_from_fixture,
    problem_from_spec,
)
from gapcert.cli.main import main
from gapcert.cli.report import to_json
from gapcert.cli.specfile import parse_chain_spec, serialize_chain_spec
from gapcert.errors import SpecSyntaxError, SpecValidationError, TooManyStates

BIRTH_DEATH = """\
[chain]
kind = "birth_death"
a = "i^$g"
b = "i^$g"
N = 200
b0 = 1.0

[chain.params]
g = 2.0

[analysis]
phi = "sqrt(i)"
A = "i<=0"
B = "i<=20"
alpha = [0, 0.5]
levels = [200, 2000]
"""

EXPLICIT = """\
[chain]
kind = "explicit"
n = 3
q = [[0, 1, 1.0], [1, 0, 2.0], [1, 2, 0.5], [2, 1, 0.25]]
"""

LATTICE = """\
[chain]
kind = "lattice"
d = 1
L = 5
R = 1

[[chain.rule]]
e = [1]
rate = "1"

[[chain.rule]]
e = [-1]
rate = "2"
"""

CONST = """\
[chain]
kind = "birth_death"
a = "$a"
b = "$b"
N = 400

[chain.params]
a = 4.0
b = 1.0

[analysis]
levels = [400]
"""


@pytest.fixture
def spec_path(tmp_path):
    def write(text, name="chain.toml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


class TestSpecFile:
    @pytest.mark.parametrize("text", [BIRTH_DEATH, EXPLICIT, LATTICE, CONST])
    def test_round_trip(self, text):
        spec = parse_chain_spec(text)
        again = parse_chain_spec(serialize_chain_spec(spec))
        assert serialize_chain_spec(again) == serialize_chain_spec(spec)

    @pytest.mark.parametrize("text", [BIRTH_DEATH, EXPLICIT, LATTICE])
    def test_round_trip_preserves_chain(self, text):
        a = problem_from_spec(parse_chain_spec(text))
        b = problem_from_spec(parse_chain_spec(serialize_chain_spec(parse_chain_spec(text))))
        assert a.n == b.n
        assert a.obj.pi.tolist() == b.obj.pi.tolist()

    def test_expression_error_position(self):
        text = BIRTH_DEATH.replace('a = "i^$g"', 'a = "i^^2"')
        with pytest.raises(SpecSyntaxError) as info:
            parse_chain_spec(text)
        assert (info.value.line, info.value.column) == (3, 8)

    def test_toml_error_position(self):
        with pytest.raises(SpecSyntaxError) as info:
            parse_chain_spec("x = [\n")
        assert info.value.line == 1

    @pytest.mark.parametrize(
        "old,new,line",
        [('kind = "birth_death"', 'kind = "foo"', 2), ("N = 200", "N = -3", 5)],
    )
    def test_validation_error_position(self, old, new, line):
        with pytest.raises(SpecValidationError) as info:
            parse_chain_spec(BIRTH_DEATH.replace(old, new))
        assert info.value.line == line


class TestAnalyze:
    def test_report_is_deterministic(self):
        a = to_json(cmd_analyze(problem_from_fixture("ConstBD", a=4.0, b=1.0, N=100)))
        b = to_json(cmd_analyze(problem_from_fixture("ConstBD", a=4.0, b=1.0, N=100)))
        assert a == b

    def test_cli_writes_identical_files(self, spec_path, tmp_path):
        path = spec_path(CONST)
        outs = [tmp_path / "one.json", tmp_path / "two.json"]
        for out in outs:
            assert main(["analyze", path, "--out", str(out)]) == 0
        assert outs[0].read_bytes() == outs[1].read_bytes()
        assert json.loads(outs[0].read_text())["chain"]["n"] == 401


class TestExitCodes:
    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["analyze", "--no-such-flag"])
        assert info.value.code == 1

    def test_missing_file(self, tmp_path):
        assert main(["analyze", str(tmp_path / "absent.toml")]) == 1

    def test_syntax_error_reports_position(self, spec_path, capsys):
        path = spec_path(BIRTH_DEATH.replace('a = "i^$g"', 'a = "i^^2"'))
        assert main(["analyze", path]) == 1
        assert "line 3, column 8" in capsys.readouterr().err

    def test_unknown_fixture(self):
        assert main(["analyze", "--fixture", "Nope"]) == 1

    def test_spec_and_fixture(self, spec_path):
        assert main(["analyze", spec_path(EXPLICIT), "--fixture", "Path"]) == 1

    @pytest.mark.parametrize(
        "fixture,params",
        [
            ("TwoState", []),
            ("Path", []),
            ("ConstBD", ["--set", "N=300"]),
            ("PolyBD", ["--set", "N=300"]),
            ("ParityBD", ["--set", "N=300"]),
            ("Star", ["--set", "q0=0.4", "--set", "m=40"]),
        ],
    )
    def test_verify_fixtures(self, fixture, params, capsys):
        assert main(["verify", "--fixture", fixture, *params]) == 0

    def test_verify_random(self, capsys):
        assert main(["verify", "--random", "50", "--seed", "3"]) == 0
        assert capsys.readouterr().out.count(": pass") == 50

    def test_verify_spec(self, spec_path):
        assert main(["verify", spec_path(EXPLICIT)]) == 0


class TestVerify:
    def test_tampered_certificate_fails(self):
        problem = problem_from_fixture("TwoState", p=0.3)

        def inflate(certs):
            c = next(c for c in certs if c.direction == "lower" and c.target == "lambda1")
            bad = dataclasses.replace(c, value=c.value * 10 + 1)
            return [*certs, bad]

        code, lines = cmd_verify(problem, tamper=inflate)
        assert code == 2
        assert any(line.startswith("FAIL") for line in lines)

    def test_untampered_passes(self):
        code, lines = cmd_verify(problem_from_fixture("TwoState", p=0.3))
        assert code == 0
        assert not any(line.startswith("FAIL") for line in lines)


class TestSweep:
    def test_constant_rates_follow_closed_form(self):
        problem = problem_from_spec(parse_chain_spec(CONST))
        rows = cmd_sweep(problem, "a", [2.0, 4.0, 9.0])
        for row in rows:
            expected = (math.sqrt(row["param"]) - 1) ** 2
            assert row["lambda1_exact"] == pytest.approx(expected, rel=0.05)
            assert row["small_side_cheeger"] <= row["lambda1_exact"] * (1 + 1e-9)

    def test_empty_grid_gives_header_only(self, spec_path, capsys):
        assert main(["sweep", spec_path(CONST), "--param", "a", "--grid", ""]) == 0
        assert capsys.readouterr().out.strip() == ",".join(SWEEP_COLUMNS)

    def test_range_grid(self, spec_path, capsys):
        assert main(["sweep", spec_path(CONST), "--param", "a", "--grid", "2:4:1"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 4

    def test_needs_birth_death(self):
        with pytest.raises(SpecValidationError):
            cmd_sweep(problem_from_spec(parse_chain_spec(EXPLICIT)), "a", [1.0])


class TestSubsets:
    def test_two_state_witness(self):
        out = cmd_subsets(problem_from_fixture("TwoState", p=0.3))
        assert out["witnesses"]["k_prime"] == [0]
        assert out["k_prime"] == pytest.approx(0.5 / 0.3, rel=1e-14)

    def test_path_witnesses_are_prefixes_or_suffixes(self):
        out = cmd_subsets(problem_from_fixture("Path", n=3))
        assert out["witnesses"]["k_prime"] in ([0], [2])

    def test_too_many_states(self):
        with pytest.raises(TooManyStates):
            cmd_subsets(problem_from_fixture("Path", n=25))

    def test_cli_exit_code_for_large_chain(self):
        assert main(["subsets", "--fixture", "Path", "--set", "n=25"]) == 1

    def test_alpha(self, capsys):
        assert main(["subsets", "--fixture", "TwoState", "--set", "p=0.5", "--alpha", "0.5"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["alpha"] == 0.5
