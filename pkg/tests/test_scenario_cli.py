"""Scenario validation and the command-line entry points."""

import json
import os

import pytest

from rowsim import cli
from rowsim.bus import read_waveform_csv
from rowsim.scenario import ScenarioError, load_scenario, parse_scenario

from conftest import all_scenario_paths, scenario_path


def load_doc(name):
    with open(scenario_path(name)) as f:
        return json.load(f)


class TestScenarioValidation:
    def test_corpus_loads_clean(self):
        for path in all_scenario_paths():
            scn = load_scenario(path)
            assert scn.horizon > 0

    def test_out_of_band_surge_names_the_bound(self):
        doc = load_doc("canonical_burst")
        doc["envelope"]["t_surge"] = "200 s"
        with pytest.raises(ScenarioError) as err:
            parse_scenario(doc)
        assert "t_surge" in str(err.value)
        assert "[10, 90]" in str(err.value)

    def test_missing_unit_annotation_rejected(self):
        doc = load_doc("canonical_burst")
        doc["bus"]["c_bus"] = 2.1
        with pytest.raises(ScenarioError, match="missing unit"):
            parse_scenario(doc)

    def test_every_violation_reported_not_just_first(self):
        doc = load_doc("canonical_burst")
        doc["envelope"]["t_surge"] = "200 s"
        doc["bus"]["c_bus"] = 2.1
        doc["events"][0]["t"] = "400 s"
        with pytest.raises(ScenarioError) as err:
            parse_scenario(doc)
        assert len(err.value.problems) >= 3

    def test_droop_hierarchy_enforced(self):
        doc = load_doc("canonical_burst")
        doc["sst"]["droop"] = "1 mV/A"  # stiffer than the bank: role inversion
        with pytest.raises(ScenarioError, match="hierarchy"):
            parse_scenario(doc)

    def test_event_beyond_horizon(self):
        doc = load_doc("canonical_burst")
        doc["events"].append({"kind": "comm_loss", "t": "200 s"})
        with pytest.raises(ScenarioError, match="horizon"):
            parse_scenario(doc)

    def test_electrical_step_cap(self):
        doc = load_doc("null_steady")
        doc["run"]["dt_electrical"] = "50 us"
        with pytest.raises(ScenarioError, match="dt_electrical"):
            parse_scenario(doc)


class TestCliRun:
    def test_canonical_run_writes_artifacts_exit_zero(self, tmp_path):
        out = tmp_path / "run"
        code = cli.main(["run", scenario_path("null_steady"), "-o", str(out)])
        assert code == 0
        assert (out / "waveform.csv").exists()
        assert (out / "events.json").exists()
        assert (out / "report.json").exists()
        assert (out / "report.txt").exists()

    def test_run_is_byte_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", scenario_path("branch_fault"), "-o", str(a)]) == 0
        assert cli.main(["run", scenario_path("branch_fault"), "-o", str(b)]) == 0
        for name in ("waveform.csv", "events.json", "report.json", "report.txt"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_ablated_run_exits_one(self, tmp_path):
        doc = load_doc("canonical_burst")
        doc["bank"]["n_shelves"] = 0
        p = tmp_path / "ablated.json"
        p.write_text(json.dumps(doc))
        code = cli.main(["run", str(p), "-o", str(tmp_path / "out")])
        assert code == 1

    def test_bad_path_exits_two(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "missing.json")]) == 2

    def test_invalid_scenario_exits_two(self, tmp_path):
        doc = load_doc("canonical_burst")
        doc["envelope"]["t_surge"] = "200 s"
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(doc))
        assert cli.main(["run", str(p), "-o", str(tmp_path / "out")]) == 2


class TestCliVerify:
    def test_roundtrip_verify_of_exported_log(self, tmp_path):
        out = tmp_path / "run"
        assert cli.main(["run", scenario_path("null_steady"), "-o", str(out)]) == 0
        code = cli.main([
            "verify", str(out / "waveform.csv"),
            "--scenario", scenario_path("null_steady"),
            "--meta", str(out / "events.json"),
        ])
        assert code == 0

    def test_verify_missing_file_exits_two(self):
        assert cli.main(["verify", "/nonexistent.csv"]) == 2

    def test_verify_garbage_exits_two(self, tmp_path):
        p = tmp_path / "junk.csv"
        p.write_text("not,a,waveform\n1,2,3\n")
        assert cli.main(["verify", str(p)]) == 2

    def test_csv_reader_roundtrip_preserves_channels(self, tmp_path):
        from rowsim.engine import simulate

        scn = load_scenario(scenario_path("null_steady"))
        log = simulate(scn)
        path = tmp_path / "wave.csv"
        log.write_csv(path)
        back = read_waveform_csv(path)
        assert len(back.main) == len(log.main)
        assert back.main.v_bus[0] == pytest.approx(log.main.v_bus[0], abs=1e-6)
        assert back.main.tier.dtype.kind in "iu"


class TestCliSize:
    def test_size_report(self, tmp_path, capsys):
        code = cli.main(["size", scenario_path("canonical_burst"),
                         "-o", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "bank count" in out
        assert "PASSES" in out
        data = json.loads((tmp_path / "sizing.json").read_text())
        assert data["passing"]


class TestCliSweep:
    def test_empty_grid(self, tmp_path, capsys):
        code = cli.main(["sweep", scenario_path("null_steady"), "-o", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "sweep.csv").read_text().count("\n") == 1  # header only

    def test_oversubscription_u_sweep_ratio_near_unity(self, tmp_path, capsys):
        code = cli.main([
            "sweep", scenario_path("null_steady"),
            "--param", "pod.u=0.7,0.85",
            "--param", "pod.n_rows=4",
            "-o", str(tmp_path),
        ])
        assert code == 0
        rows = (tmp_path / "sweep.csv").read_text().splitlines()
        assert rows[0].split(",")[0] == "pod.u"
        for line in rows[1:]:
            cells = line.split(",")
            assert cells[2] == "pass"
            assert 0.5 <= float(cells[-1]) <= 1.2

    def test_cell_error_does_not_stop_sweep(self, tmp_path):
        code = cli.main([
            "sweep", scenario_path("null_steady"),
            "--param", "envelope.t_surge=\"200 s\",\"60 s\"",
            "-o", str(tmp_path),
        ])
        assert code == 0
        text = (tmp_path / "sweep.csv").read_text()
        assert "error" in text and "pass" in text


class TestSweepNineCells:
    def test_alpha_by_surge_grid_all_pass(self, tmp_path):
        """3 overage levels x 3 plateau widths on the sized bank: every
        cell rides through."""
        doc = json.load(open(scenario_path("canonical_burst")))
        doc["run"]["horizon"] = "120 s"
        p = tmp_path / "template.json"
        p.write_text(json.dumps(doc))
        code = cli.main([
            "sweep", str(p),
            "--param", "envelope.alpha_max=0.10,0.175,0.25",
            "--param", 'envelope.t_surge="10 s","45 s","90 s"',
            "-o", str(tmp_path),
        ])
        assert code == 0
        rows = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(rows) == 10
        verdicts = [line.split(",")[2] for line in rows[1:]]
        assert verdicts == ["pass"] * 9
