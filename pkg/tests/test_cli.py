import subprocess
import sys

import numpy as np
import pytest

from multiplex_hawkes import io
from multiplex_hawkes.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

SMALL = ["--set", "simulation.n_nodes=3", "--set", "simulation.n_layers=2",
         "--set", "hyper.influence_rate=4", "--set", "hyper.background_rate=20"]


def test_missing_required_seed_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--network", str(tmp_path)])
    assert info.value.code == EXIT_USAGE


def test_bad_override_is_usage_error(tmp_path):
    assert main(["generate", "--output-dir", str(tmp_path), "--set", "chain.bogus=1"]) == EXIT_USAGE
    assert main(["generate", "--output-dir", str(tmp_path), "--set", "novalue"]) == EXIT_USAGE


def test_missing_network_is_data_error(tmp_path):
    code = main(["simulate", "--network", str(tmp_path / "none"), "--seed", "1",
                 "--output-dir", str(tmp_path)])
    assert code == EXIT_DATA


def test_malformed_events_is_data_error(tmp_path, capsys):
    ev = tmp_path / "ev.csv"
    ev.write_text("# n_nodes=2 n_layers=1 window=5.0\ntime,node,theta_0\n1.0,7,1.0\n")
    code = main(["infer", "--events", str(ev), "--seed", "0", "--output-dir", str(tmp_path)])
    assert code == EXIT_DATA
    assert ":3:" in capsys.readouterr().err


def test_supercritical_is_numeric_error(tmp_path):
    net = tmp_path / "net"
    assert main(["generate", "--output-dir", str(net), "--seed", "1", "--nodes", "5",
                 "--layers", "1", "--set", "hyper.influence_shape=30",
                 "--set", "hyper.influence_rate=1", "--set", "hyper.layer_prior=1"]) == EXIT_OK
    code = main(["simulate", "--network", str(net), "--seed", "1", "--output-dir",
                 str(tmp_path / "ev"), "--window", "500", "--set", "simulation.max_events=2000"])
    assert code == EXIT_NUMERIC


def test_generate_simulate_infer_evaluate(tmp_path):
    net, ev, post = tmp_path / "net", tmp_path / "ev", tmp_path / "post"
    assert main(["generate", "--output-dir", str(net), "--seed", "3"] + SMALL) == EXIT_OK
    assert main(["simulate", "--network", str(net), "--seed", "4", "--output-dir", str(ev),
                 "--window", "100", "200"] + SMALL) == EXIT_OK
    assert (ev / "events_T100.csv").exists() and (ev / "assignment_T200.csv").exists()
    assert main(["infer", "--events", str(ev / "events_T200.csv"), "--seed", "5",
                 "--output-dir", str(post), "--iterations", "30", "--burn-in", "10",
                 "--thin", "5"] + SMALL) == EXIT_OK
    assert main(["evaluate", "--network", str(net), "--summary", str(post),
                 "--assignment", str(ev / "assignment_T200.csv")]) == EXIT_OK
    report = io.read_report(post / "report.csv")
    assert 0 <= report["parent_channel_accuracy"] <= 1
    assert (post / "convergence.csv").exists()


def test_fit_kernel_needs_assignment(tmp_path):
    net, ev = tmp_path / "net", tmp_path / "ev"
    main(["generate", "--output-dir", str(net), "--seed", "3"] + SMALL)
    main(["simulate", "--network", str(net), "--seed", "4", "--output-dir", str(ev),
          "--window", "100"] + SMALL)
    code = main(["infer", "--events", str(ev / "events.csv"), "--seed", "1", "--fit-kernel",
                 "--output-dir", str(tmp_path / "p")] + SMALL)
    assert code == EXIT_USAGE


def test_pipeline_writes_every_replication_and_window(tmp_path):
    code = main(["pipeline", "--seed", "2", "--output-dir", str(tmp_path), "--replications", "2",
                 "--window", "80", "160", "--iterations", "20", "--burn-in", "5",
                 "--thin", "5"] + SMALL)
    assert code == EXIT_OK
    for r in range(2):
        for w in ("T80", "T160"):
            assert (tmp_path / f"rep{r}" / w / "report.csv").exists()
    lines = (tmp_path / "pipeline.csv").read_text().splitlines()
    assert len(lines) == 1 + 4


def test_pipeline_is_reproducible(tmp_path):
    args = ["pipeline", "--seed", "8", "--replications", "1", "--window", "100",
            "--iterations", "15", "--burn-in", "5", "--thin", "5"] + SMALL
    main(args + ["--output-dir", str(tmp_path / "a")])
    main(args + ["--output-dir", str(tmp_path / "b")])
    assert (tmp_path / "a/pipeline.csv").read_bytes() == (tmp_path / "b/pipeline.csv").read_bytes()


def test_self_evaluation_scores_perfectly(tmp_path):
    """A summary built from the truth itself scores zero error and AUC 1."""
    from multiplex_hawkes.inference import PosteriorSummary
    from multiplex_hawkes.generative import SimulationConfig, sample_params
    from multiplex_hawkes.model import Hyperparameters

    cfg = SimulationConfig(4, 2, 10.0, hyper=Hyperparameters(layer_prior=[3.0, 3.0]))
    params = sample_params(cfg, np.random.default_rng(12))
    io.write_network(params, tmp_path / "net")
    n = params.nodes
    summary = PosteriorSummary(influence=params.influence, background=n.background,
                               edge_probability=params.adjacency.astype(float),
                               layer_activity=params.layer_activity, authoritative=n.authoritative,
                               susceptible=n.susceptible, parent_frequencies=[], n_samples=1)
    io.write_summary(summary, tmp_path / "post")
    assert main(["evaluate", "--network", str(tmp_path / "net"),
                 "--summary", str(tmp_path / "post")]) == EXIT_OK
    report = io.read_report(tmp_path / "post" / "report.csv")
    assert report["mae_influence"] == 0.0 and report["tae_lambda"] == 0.0
    off = ~np.eye(4, dtype=bool)
    if 0 < params.adjacency[off].sum() < params.adjacency[off].size:
        assert report["edge_auc"] == 1.0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "multiplex_hawkes", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "pipeline" in out.stdout
