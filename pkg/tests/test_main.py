import json
from pathlib import Path
from unittest.mock import patch

import pytest

from wce_nuclear import config
from wce_nuclear.config import AnalysisConfig
from wce_nuclear.main import main
from wce_nuclear.report import STATS_COLUMNS

EXAMPLE_CONFIG = Path(__file__).resolve().parent.parent / "wce_config.example.json"


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    monkeypatch.setattr(config, "_config", AnalysisConfig())


def _analyze_json(capsys, *argv):
    code = main(["analyze", *argv, "--format", "json"])
    return code, json.loads(capsys.readouterr().out)


class TestExitCodes:
    def test_zero_operator_is_nuclear(self, base_config, write_config, capsys):
        base_config["weights"]["u"]["values"] = {"1": 0.0, "2": 0.0, "3": 0.0}
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)))
        assert code == 0
        assert report["nuclearity"]["status"] == "Nuclear"
        assert "ZeroOperator" in report["nuclearity"]["notes"]
        assert report["compactness"]["status"] == "Compact"

    def test_finite_space_is_nuclear(self, base_config, write_config, capsys):
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)))
        assert code == 0
        assert report["nuclearity"]["total"] == report["nuclearity"]["partial_sum"]
        assert "FiniteRank" in report["compactness"]["notes"]
        assert report["consistent"] is True

    def test_panel_carrying_both_weights(self, base_config, write_config, capsys):
        base_config["space"]["panels"] = [{"id": "d", "u_support": True, "w_support": True}]
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)))
        assert code == 1
        assert report["nuclearity"]["status"] == "NotNuclear"
        assert "NonAtomicSupport" in report["nuclearity"]["notes"]
        assert report["compactness"]["status"] == "NotCompact"

    def test_truncation_without_tail_bound(self, base_config, write_config, capsys):
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--terms", "1")
        assert code == 2
        assert report["nuclearity"]["status"] == "Inconclusive"
        assert report["header"]["terms"] == 1

    def test_close_exponents_overflow_is_flagged(self, base_config, write_config, capsys):
        base_config["weights"]["u"]["values"] = {"1": 10.0, "2": 20.0, "3": 30.0}
        base_config["weights"]["w"] = {"type": "expr", "formula": "5"}
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--p", "3.01", "--q", "3")
        assert code == 0
        assert report["compactness"]["status"] == "Compact"
        assert "NumericOverflow" in report["compactness"]["notes"]
        assert report["compactness"]["corrected_sum"] == "inf"

    def test_truncation_with_divergent_tail(self, base_config, write_config, capsys):
        base_config["analysis"].update(terms=1, tail_bound="divergent", compact_tail="fails")
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)))
        assert code == 1
        assert "DivergentTail" in report["nuclearity"]["notes"]

    def test_bad_config_names_the_field(self, base_config, write_config, capsys):
        base_config["space"]["cells"][1]["mass"] = -1.0
        code = main(["analyze", "--config", str(write_config(base_config))])
        assert code == 3
        assert "space.cells[1].mass" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["analyze", "--config", str(tmp_path / "nope.json")]) == 3
        assert "not found" in capsys.readouterr().err

    def test_missing_exponent(self, base_config, write_config, capsys):
        del base_config["analysis"]
        assert main(["analyze", "--config", str(write_config(base_config))]) == 3
        assert "analysis.p is required" in capsys.readouterr().err

    def test_equal_exponents_on_nonzero_operator(self, base_config, write_config, capsys):
        code = main(["analyze", "--config", str(write_config(base_config)), "--p", "2", "--q", "2"])
        assert code == 3
        assert "p = q" in capsys.readouterr().err

    def test_equal_exponents_on_zero_operator(self, base_config, write_config, capsys):
        base_config["weights"]["w"] = {"type": "expr", "formula": "0"}
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--p", "2", "--q", "2")
        assert code == 0
        assert report["nuclearity"]["status"] == "Zero"

    def test_unexpected_failure(self, base_config, write_config):
        with patch("wce_nuclear.main.atom_stats", side_effect=RuntimeError("boom")):
            assert main(["analyze", "--config", str(write_config(base_config))]) == 4

    def test_config_and_example_are_exclusive(self, base_config, write_config):
        with pytest.raises(SystemExit):
            main(["analyze", "--config", str(write_config(base_config)), "--example", "paper"])


class TestExampleFamily:
    @pytest.mark.parametrize("p, q, slope", [("2", "3", -(4 + 1 / 6)), ("3", "2", -(4 - 1 / 6))])
    def test_builtin_example_is_nuclear(self, p, q, slope, capsys):
        code, report = _analyze_json(capsys, "--example", "paper", "--p", p, "--q", q, "--terms", "100000")
        assert code == 0
        assert report["nuclearity"]["status"] == "Nuclear"
        assert report["header"]["kind"] == "family"
        assert report["header"]["terms"] == 100_000
        assert report["nuclearity"]["total"] - report["nuclearity"]["partial_sum"] < 1e-4
        assert report["nuclearity"]["decay_slope"] == pytest.approx(slope, abs=0.2)
        assert "HeuristicTail" not in report["nuclearity"]["notes"]

    def test_exponents_are_required(self, capsys):
        assert main(["analyze", "--example", "paper"]) == 3

    def test_odd_family_table(self, capsys):
        code = main(["analyze", "--example", "paper-odd", "--p", "2", "--q", "3", "--terms", "50"])
        out = capsys.readouterr().out
        assert code == 0
        assert "nuclearity: Nuclear" in out
        assert "..." in out

    def test_oracle_is_skipped_for_families(self, capsys):
        code, report = _analyze_json(capsys, "--example", "paper", "--p", "2", "--q", "3", "--terms", "100", "--oracle")
        assert code == 0
        assert report["oracle"] is None


class TestReports:
    def test_overrides_are_echoed(self, base_config, write_config, capsys):
        _, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--q", "1.5")
        assert report["header"]["overrides"] == {"q": 1.5}
        assert report["header"]["q"] == 1.5

    def test_json_carries_atoms_and_factors(self, base_config, write_config, capsys):
        _, report = _analyze_json(capsys, "--config", str(write_config(base_config)))
        assert [a["block_index"] for a in report["atoms"]] == [1, 2]
        assert len(report["factors"]) == 2
        assert report["nuclear_bound"] == pytest.approx(sum(a["term"] for a in report["atoms"]), rel=1e-12)

    def test_csv_format(self, base_config, write_config, capsys):
        main(["analyze", "--config", str(write_config(base_config)), "--format", "csv"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(STATS_COLUMNS)
        assert len(lines) == 3

    def test_table_format(self, base_config, write_config, capsys):
        main(["analyze", "--config", str(write_config(base_config))])
        out = capsys.readouterr().out
        assert "nuclearity: Nuclear" in out
        assert "compactness: Compact" in out

    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_report_file_is_deterministic(self, fmt, base_config, write_config, tmp_path, capsys):
        path = write_config(base_config)
        outputs = []
        for name in ("a", "b"):
            target = tmp_path / f"{name}.{fmt}"
            main(["analyze", "--config", str(path), "--format", fmt, "--report", str(target)])
            outputs.append(target.read_bytes())
        assert outputs[0] == outputs[1]
        assert outputs[0]

    def test_oracle_section(self, base_config, write_config, capsys):
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--oracle")
        oracle = report["oracle"]
        assert code == 0
        assert oracle["block_norm_residual"] <= 1e-9
        assert oracle["norm_ascent"] <= oracle["norm_formula"] + 1e-9
        assert oracle["norm_relative_gap"] <= 1e-3
        assert oracle["hilbert_residual"] <= 1e-9
        assert oracle["test_function_residual"] <= 1e-8

    def test_oracle_on_truncated_space(self, base_config, write_config, capsys):
        code, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--terms", "1", "--oracle")
        oracle = report["oracle"]
        assert code == 2
        assert oracle["blocks_checked"] == 1
        assert oracle["blocks_total"] == 2
        assert oracle["block_norm_residual"] <= 1e-9
        assert len(report["factors"]) == len(report["atoms"]) == 1
        assert report["nuclear_bound"] == pytest.approx(report["nuclearity"]["partial_sum"], rel=1e-12)

    def test_oracle_skipped_on_panel(self, base_config, write_config, capsys):
        base_config["space"]["panels"] = [{"id": "d", "u_support": True, "w_support": True}]
        _, report = _analyze_json(capsys, "--config", str(write_config(base_config)), "--oracle")
        assert "skipped" in report["oracle"]

    def test_example_config_file(self, capsys):
        code, report = _analyze_json(capsys, "--config", str(EXAMPLE_CONFIG))
        assert code == 0
        assert len(report["atoms"]) == 3


class TestCondExpCommand:
    def test_block_values(self, base_config, write_config, capsys):
        assert main(["condexp", "--config", str(write_config(base_config))]) == 0
        lines = capsys.readouterr().out.splitlines()
        first, second = lines[1].split(), lines[2].split()
        assert first[:3] == ["1", "3", "5"]
        assert second[:3] == ["2", "1", "1"]

    def test_requires_f(self, base_config, write_config, capsys):
        del base_config["weights"]["f"]
        assert main(["condexp", "--config", str(write_config(base_config))]) == 3
        assert "weights.f" in capsys.readouterr().err

    def test_requires_space(self, base_config, write_config, capsys):
        del base_config["space"]
        assert main(["condexp", "--config", str(write_config(base_config))]) == 3
        assert "space is required" in capsys.readouterr().err

    def test_analyze_requires_space(self, base_config, write_config, capsys):
        del base_config["space"]
        assert main(["analyze", "--config", str(write_config(base_config))]) == 3
        assert "space is required" in capsys.readouterr().err
