"""Command-line entry point: exit codes, formats, determinism, LP dumps."""

from __future__ import annotations

import json
from importlib import resources

import pytest

from artifact.cli import FIXTURE_NAMES, main
from artifact.model import parse_scenario, serialize_scenario, validate_scenario
from helpers import interval, table1_scenario
from artifact.model import Scenario, StorageSpec


def invoke(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def infeasible_file(tmp_path):
    # the end level needs 2.5 MWh but the only unit can supply 2 MW for 1 h
    iv = interval([12.0], [0.0], [[5.0]], [[2.0]], end_level=2.5,
                  penalty_price=1.0)
    scn = Scenario(StorageSpec(2.5, 0.0), (iv,), "split_end_level")
    path = tmp_path / "infeasible.json"
    path.write_text(serialize_scenario(scn))
    return str(path)


class TestExitCodes:
    def test_fixture_run_succeeds(self, capsys):
        code, out, err = invoke(capsys, "--scenario", "table1",
                                "--mode", "vlb")
        assert code == 0
        assert err == ""
        assert "vlb" in out

    def test_unknown_scenario_reference(self, capsys):
        code, _, err = invoke(capsys, "--scenario", "no-such-table")
        assert code == 2
        assert "no-such-table" in err

    def test_invalid_document_lists_diagnostics(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"storage": {"capacity": -1, "initial_energy": 0},'
                       ' "mode": "vlb", "intervals": []}')
        code, _, err = invoke(capsys, "--scenario", str(bad))
        assert code == 2
        assert "capacity" in err

    def test_infeasible_scenario(self, capsys, infeasible_file):
        code, _, err = invoke(capsys, "--scenario", infeasible_file)
        assert code == 3
        assert "infeasible" in err.lower() or "feasible" in err

    def test_range_selection_needs_ranges(self, capsys):
        code, _, err = invoke(capsys, "--scenario", "table1",
                              "--price-selection", "range_min",
                              "--no-price-ranges")
        assert code == 2
        assert "price" in err

    def test_unknown_flag_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--scenario", "table1", "--frobnicate"])
        assert exc.value.code == 2

    def test_unknown_compare_mode(self, capsys):
        code, _, err = invoke(capsys, "--scenario", "table1",
                              "--compare", "vlb,psychic")
        assert code == 2
        assert "psychic" in err


class TestStructuredFormat:
    def test_single_mode_document_shape(self, capsys):
        code, out, _ = invoke(capsys, "--scenario", "table1", "--mode", "vlb",
                              "--format", "structured")
        assert code == 0
        doc = json.loads(out)
        assert sorted(doc) == ["cycles", "intervals", "ledger_snapshots",
                               "mode", "price_selection", "surpluses",
                               "totals"]
        assert doc["mode"] == "vlb"
        assert len(doc["intervals"]) == 2
        assert doc["intervals"][0]["prices"] == [5.0]

    def test_reruns_are_byte_identical(self, capsys):
        _, first, _ = invoke(capsys, "--scenario", "table5",
                             "--compare", "ideal,split_end_level,vlb",
                             "--format", "structured")
        _, second, _ = invoke(capsys, "--scenario", "table5",
                              "--compare", "ideal,split_end_level,vlb",
                              "--format", "structured")
        assert first == second

    def test_single_mode_compare_collapses(self, capsys):
        _, single, _ = invoke(capsys, "--scenario", "table4",
                              "--mode", "vlb", "--format", "structured")
        _, multi, _ = invoke(capsys, "--scenario", "table4",
                             "--compare", "vlb", "--format", "structured")
        assert json.loads(multi) == json.loads(single)

    def test_compare_nests_single_mode_documents(self, capsys):
        _, single, _ = invoke(capsys, "--scenario", "table4",
                              "--mode", "vlb", "--format", "structured")
        _, multi, _ = invoke(capsys, "--scenario", "table4",
                             "--compare", "ideal,vlb", "--format",
                             "structured")
        doc = json.loads(multi)
        assert set(doc) == {"modes", "totals"}
        assert doc["modes"]["vlb"] == json.loads(single)
        assert doc["totals"]["ideal"]["social_welfare"] \
            == pytest.approx(21.0)

    def test_compare_captures_failing_mode(self, capsys, tmp_path):
        # no penalty price anywhere: split_penalty cannot run, vlb can
        iv = interval([12.0], [3.0], [[2.0]], [[2.0]], end_level=0.0)
        scn = Scenario(StorageSpec(2.5, 0.0), (iv,), "vlb")
        path = tmp_path / "no_penalty.json"
        path.write_text(serialize_scenario(scn))
        code, out, _ = invoke(capsys, "--scenario", str(path),
                              "--compare", "vlb,split_penalty",
                              "--format", "structured")
        assert code == 4
        doc = json.loads(out)
        assert "error" in doc["modes"]["split_penalty"]
        assert doc["modes"]["vlb"]["totals"]["social_welfare"] \
            == pytest.approx(20.0)
        assert doc["totals"]["split_penalty"] is None

    def test_no_price_ranges_suppresses_ranges(self, capsys):
        _, out, _ = invoke(capsys, "--scenario", "table1", "--mode", "vlb",
                           "--format", "structured", "--no-price-ranges")
        doc = json.loads(out)
        assert all(iv["price_ranges"] is None for iv in doc["intervals"])


class TestOutputTargets:
    def test_out_writes_file(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, out, _ = invoke(capsys, "--scenario", "table1", "--mode",
                              "vlb", "--format", "structured",
                              "--out", str(target))
        assert code == 0
        assert out == ""
        doc = json.loads(target.read_text())
        assert doc["mode"] == "vlb"

    def test_dump_lp_writes_models(self, capsys, tmp_path):
        lp_dir = tmp_path / "lps"
        code, _, _ = invoke(capsys, "--scenario", "table1",
                            "--compare", "ideal,vlb", "--dump-lp",
                            str(lp_dir))
        assert code == 0
        names = sorted(p.name for p in lp_dir.iterdir())
        # ideal is one whole-horizon model; its per-interval rows are views
        # without an LP of their own
        assert names == ["ideal-horizon.lp", "vlb-mi01.lp", "vlb-mi02.lp"]
        text = (lp_dir / "vlb-mi01.lp").read_text()
        assert "maximize" in text
        assert "balance" in text


class TestTableFormat:
    def test_dispatch_and_ledger_sections(self, capsys):
        _, out, _ = invoke(capsys, "--scenario", "table1", "--mode", "vlb")
        assert "l1" in out and "g1" in out
        assert "ledger" in out.lower()
        # second-interval bucket discharge shows up
        assert "5" in out

    def test_compare_renders_every_mode(self, capsys):
        _, out, _ = invoke(capsys, "--scenario", "table4",
                           "--compare", "ideal,split_end_level,vlb")
        for mode in ("ideal", "split_end_level", "vlb"):
            assert mode in out


class TestFixtures:
    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    def test_fixture_documents_are_valid(self, name):
        text = (resources.files("artifact") / "fixtures"
                / f"{name}.json").read_text()
        scn = parse_scenario(text)
        assert validate_scenario(scn) == []

    def test_fixture_matches_programmatic_scenario(self):
        text = (resources.files("artifact") / "fixtures"
                / "table1.json").read_text()
        assert parse_scenario(text) == table1_scenario("vlb")
