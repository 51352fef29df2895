import json

from shapbench import cli

FAST = ["--num-samples", "4", "--background-size", "10", "--seed", "1"]


def test_run_success_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(["run", "--explainers", "exact,kernelshap", "--datasets", "monks", "--metrics", "l1,l2,kendall",
                   "--ground-truth", "auto", "--no-sweeps", "--out", str(out), "--cache-dir", str(tmp_path / "c"), *FAST])
    assert rc == 0
    text = capsys.readouterr().out
    assert "report sha256" in text and "P(l2)" in text
    assert (out / "report.json").exists() and any((out / "plots").glob("bar_monks_*.svg"))
    rc = cli.main(["report", "--table", str(out), "--dataset", "monks"])
    assert rc == 0 and "kernelshap" in capsys.readouterr().out
    assert cli.main(["report", "--table", str(out), "--dataset", "wbc"]) == 2


def test_partial_failure_exit_code(tmp_path, capsys):
    rc = cli.main(["run", "--explainers", "exact,kernelshap:3", "--no-sweeps", "--out", str(tmp_path / "r"),
                   "--no-cache", *FAST])
    assert rc == 3
    assert "error in kernelshap" in capsys.readouterr().out


def test_config_errors(tmp_path, capsys):
    assert cli.main(["run", "--explainers", "bogus", "--no-cache"]) == 2
    assert cli.main(["run", "--num-samples", "100000", "--no-sweeps", "--no-cache", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["report", "--table", str(tmp_path / "none"), "--dataset", "monks"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_json_config_file(tmp_path, capsys):
    cfg = {"explainers": ["exact", "monte-carlo:8"], "num_samples": 3, "background_size": 10,
           "samples_sweep": {"max": 4, "interval": 2, "method": "first-k"}, "features_sweep": None}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert cli.main(["run", "--config", str(path), "--out", str(out), "--no-cache"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["explainers"] == ["exact", "monte-carlo:8"]
    assert report["sweeps"]["samples"]["counts"] == [2, 4]
    path.write_text(json.dumps({**cfg, "unknown_key": 1}))
    assert cli.main(["run", "--config", str(path), "--no-cache"]) == 2


def test_sweep_commands(tmp_path, capsys):
    rc = cli.main(["sweep-samples", "--max", "20", "--interval", "10", "--method", "random",
                   "--explainers", "exact,monte-carlo", "--out", str(tmp_path / "s"), "--no-cache", "--background-size", "10"])
    assert rc == 0
    assert (tmp_path / "s" / "plots" / "time_vs_samples_monks.svg").exists()
    rc = cli.main(["sweep-features", "--m", "3,5", "--n-instances", "1", "--explainers", "exact",
                   "--out", str(tmp_path / "f"), "--no-cache", "--background-size", "10"])
    assert rc == 0
    sw = json.loads((tmp_path / "f" / "report.json").read_text())["sweeps"]["features"]
    assert sw["series"]["exact"]["n_evaluations"] == [8, 32]
    assert "features sweep over [3, 5]" in capsys.readouterr().out
