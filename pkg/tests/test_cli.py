"""Command line behavior: exit codes, outputs and reproducibility."""

import json

import pytest

from slice_sentinel.cli import main
from slice_sentinel.scenarios import BenchReport, ScenarioReport


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestRunCommand:
    def test_attack1_with_bundled_configs_passes(self, tmp_path, capsys):
        code = main(["run", "attack1", "--seed", "7", "--out", str(tmp_path / "o"),
                     "--scenario-config", str(_fast_config(tmp_path))])
        assert code == 0
        report = ScenarioReport.from_json((tmp_path / "o" / "report.json").read_text())
        assert report.verdict is True
        assert report.details["unauthorized_drops"] == report.packets["dropped_at_entry"]
        assert "PASS" in capsys.readouterr().out

    def test_missing_topology_file_exits_2(self, tmp_path, capsys):
        code = main(["run", "attack1", "--topology", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")])
        assert code == 2
        assert "not found" in capsys.readouterr().err

    def test_attack2_without_blacklist_feedback_exits_1(self, tmp_path):
        knob = tmp_path / "knob.json"
        knob.write_text(json.dumps(
            {"blacklist_feedback": False, "attack_packets": 300, "benign_packets": 10}
        ))
        code = main(["run", "attack2", "--scenario-config", str(knob),
                     "--out", str(tmp_path / "o")])
        assert code == 1

    def test_manifest_and_events_written(self, tmp_path):
        out = tmp_path / "o"
        main(["run", "shellshock", "--out", str(out)])
        manifest = read_json(out / "manifest.json")
        assert manifest["command"] == "run"
        assert manifest["seed"] == 0
        assert (out / "events.jsonl").exists()
        for line in (out / "events.jsonl").read_text().splitlines():
            json.loads(line)

    def test_rerun_with_same_manifest_is_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        fast = _fast_config(tmp_path)
        for out in (out_a, out_b):
            assert main(["run", "attack2", "--seed", "13", "--out", str(out),
                         "--scenario-config", str(fast)]) == 0
        assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
        assert (out_a / "events.jsonl").read_bytes() == (out_b / "events.jsonl").read_bytes()

    def test_output_dir_env_override(self, tmp_path, monkeypatch):
        target = tmp_path / "from-env"
        monkeypatch.setenv("SLICE_SENTINEL_OUT", str(target))
        main(["run", "fsf_path", "--out", str(tmp_path / "ignored")])
        assert (target / "report.json").exists()
        assert not (tmp_path / "ignored").exists()


class TestBenchCommand:
    def test_flow_setup_outputs_parse(self, tmp_path):
        out = tmp_path / "b"
        code = main(["bench", "flow-setup", "--sizes", "10,20", "--runs", "2",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        report = BenchReport.from_json((out / "bench.json").read_text())
        assert {e["n"] for e in report.entries} == {10, 20}
        csv_lines = (out / "bench.csv").read_text().splitlines()
        assert csv_lines[0] == "n,security,mean_ms,stdev_ms"
        assert len(csv_lines) == 1 + len(report.entries)

    def test_signature_bench_outputs_parse(self, tmp_path):
        out = tmp_path / "b"
        code = main(["bench", "signatures", "--counts", "0,10", "--runs", "2",
                     "--packets", "10", "--out", str(out)])
        assert code == 0
        report = BenchReport.from_json((out / "bench.json").read_text())
        assert report.kind == "signatures"

    def test_bad_sizes_exit_2(self, tmp_path, capsys):
        code = main(["bench", "flow-setup", "--sizes", "ten,twenty", "--out", str(tmp_path)])
        assert code == 2


class TestMlCommand:
    def test_synthetic_nb_with_chi_selection(self, tmp_path):
        out = tmp_path / "m"
        code = main(["ml", "--synthetic", "--classifier", "nb", "--select", "chi:5",
                     "--rows", "600", "--out", str(out)])
        assert code == 0
        payload = read_json(out / "metrics.json")
        metrics = payload["metrics"]
        assert abs(metrics["tpr"] + metrics["fnr"] - 100.0) <= 1e-6
        assert abs(metrics["tnr"] + metrics["fpr"] - 100.0) <= 1e-6
        assert len(payload["selected_features"]) == 5
        roc_lines = (out / "roc.csv").read_text().splitlines()
        assert roc_lines[0] == "fpr,tpr"

    def test_decision_tree_classifier(self, tmp_path):
        code = main(["ml", "--synthetic", "--classifier", "dt", "--rows", "400",
                     "--out", str(tmp_path / "m")])
        assert code == 0
        payload = read_json(tmp_path / "m" / "metrics.json")
        assert payload["metrics"]["accuracy"] >= 95.0

    def test_unknown_classifier_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["ml", "--classifier", "unknownX", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_missing_dataset_file_exits_2(self, tmp_path):
        code = main(["ml", "--dataset", str(tmp_path / "absent.csv"), "--out", str(tmp_path)])
        assert code == 2

    def test_bad_selector_exits_2(self, tmp_path):
        code = main(["ml", "--synthetic", "--select", "pca-7", "--out", str(tmp_path)])
        assert code == 2


class TestAuditCommand:
    def test_clean_fabric_audits_clean(self, tmp_path, capsys):
        out = tmp_path / "a"
        code = main(["audit", "--node", "OVS1", "--out", str(out)])
        assert code == 0
        result = read_json(out / "audit.json")
        assert result["clean"] is True
        assert "clean" in capsys.readouterr().out
        assert (out / "audit_diff.txt").exists()

    def test_unknown_node_exits_2(self, tmp_path, capsys):
        code = main(["audit", "--node", "GHOST", "--out", str(tmp_path)])
        assert code == 2


def _fast_config(tmp_path):
    path = tmp_path / "fast.json"
    if not path.exists():
        path.write_text(json.dumps({"attack_packets": 300, "benign_packets": 10}))
    return path
