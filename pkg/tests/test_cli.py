import json
import os

import numpy as np
import pytest

from gaugelab import cli
from gaugelab.cli import ConfigError, config_fingerprint, main, render_line_svg


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj), encoding="utf-8")
    return str(p)


NS_FLAT = {"preset": "flat",
           "grid": {"dims": [6, 6], "spacing": [0.1667, 0.1667],
                    "blocks": ["Sigma", "Sigma"]},
           "twist": [[[0, 1], 1]],
           "seed": 0}


def test_missing_config_exits_2(tmp_path):
    assert main(["ns", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_json_exits_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json", encoding="utf-8")
    assert main(["ns", "--config", str(p)]) == 2


def test_bad_grid_exits_2(tmp_path):
    cfg = {"preset": "flat",
           "grid": {"dims": [6], "spacing": [0.1], "blocks": ["S"]}}
    p = _write(tmp_path, "c.json", cfg)
    assert main(["ns", "--config", p, "--out", str(tmp_path / "r")]) == 2


def test_ns_flat_run_artifacts(tmp_path):
    p = _write(tmp_path, "ns.json", NS_FLAT)
    out = tmp_path / "runs"
    assert main(["ns", "--config", p, "--out", str(out)]) == 0
    fp = config_fingerprint(dict(NS_FLAT))
    run = json.loads((out / f"run_{fp}.json").read_text())
    assert run["result"]["iterations"] == 0
    assert run["result"]["residual"] <= 1e-12
    assert run["config_fingerprint"] == fp
    assert "started_utc" in run and "finished_utc" in run
    # every artifact names the fingerprint
    for name in run["artifacts"]:
        assert fp in name
        assert (out / name).exists()


def test_csv_format(tmp_path):
    p = _write(tmp_path, "ns.json", NS_FLAT)
    out = tmp_path / "runs"
    main(["ns", "--config", p, "--out", str(out)])
    fp = config_fingerprint(dict(NS_FLAT))
    raw = (out / f"ns_{fp}.csv").read_bytes()
    assert b"\r" not in raw                     # LF only
    text = raw.decode()
    lines = text.strip().split("\n")
    assert lines[0] == "iteration,residual"     # header row
    assert "," in lines[1]


def test_rerun_byte_identical(tmp_path):
    p = _write(tmp_path, "ns.json", NS_FLAT)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["ns", "--config", p, "--out", str(out1)])
    main(["ns", "--config", p, "--out", str(out2)])
    fp = config_fingerprint(dict(NS_FLAT))
    for name in (f"ns_{fp}.csv", f"ns_{fp}.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_seed_flag_changes_fingerprint(tmp_path):
    cfg = {"preset": "random", "scale": 0.02, "seed": 1, "tau_end": 0.01,
           "grid": {"dims": [6, 6], "spacing": [0.1667, 0.1667],
                    "blocks": ["Sigma", "Sigma"]}}
    p = _write(tmp_path, "f.json", cfg)
    out = tmp_path / "runs"
    assert main(["flow", "--config", p, "--out", str(out), "--seed", "2"]) == 0
    cfg2 = dict(cfg)
    cfg2["seed"] = 2
    fp = config_fingerprint(cfg2)
    assert (out / f"flow_{fp}.csv").exists()
    assert (out / f"flow_{fp}.svg").exists()


def test_numerical_failure_exits_3_with_error_json(tmp_path):
    cfg = {"preset": "random", "scale": 5.0, "seed": 1,
           "grid": {"dims": [6, 6], "spacing": [0.1667, 0.1667],
                    "blocks": ["Sigma", "Sigma"]}}
    p = _write(tmp_path, "bad.json", cfg)
    out = tmp_path / "runs"
    assert main(["ns", "--config", p, "--out", str(out)]) == 3
    fp = config_fingerprint(cfg)
    err = json.loads((out / f"error_{fp}.json").read_text())
    assert err["error_type"] and err["message"]
    assert err["config_fingerprint"] == fp


def test_estimates_and_report_pipeline(tmp_path):
    cfg = {"suite": "bump", "core": 0.5, "support": 1.0, "samples": 128}
    p = _write(tmp_path, "b.json", cfg)
    out = tmp_path / "runs"
    assert main(["estimates", "--config", p, "--out", str(out)]) == 0
    rep = _write(tmp_path, "r.json", {})
    assert main(["report", "--config", rep, "--out", str(out)]) == 0
    svgs = list(out.glob("report_*.svg"))
    assert svgs
    assert svgs[0].read_text().startswith("<svg")


def test_charge_subcommand(tmp_path):
    cfg = {"preset": "winding", "n_cells": 4}
    p = _write(tmp_path, "q.json", cfg)
    out = tmp_path / "runs"
    assert main(["charge", "--config", p, "--out", str(out)]) == 0
    fp = config_fingerprint(cfg)
    res = json.loads((out / f"charge_{fp}.json").read_text())
    assert res["topological_charge"] == pytest.approx(-8.0, abs=1e-6)


def test_batch_with_workers(tmp_path):
    cfg = {"workers": 2, "batch": [
        {"subcommand": "estimates", "suite": "bump", "core": 0.4,
         "support": 1.0, "samples": 64},
        {"subcommand": "estimates", "suite": "bump", "core": 0.6,
         "support": 1.0, "samples": 64},
    ]}
    p = _write(tmp_path, "batch.json", cfg)
    out = tmp_path / "runs"
    assert main(["estimates", "--config", p, "--out", str(out),
                 "--workers", "2"]) == 0
    assert len(list(out.glob("estimates_bump_*.json"))) == 2


def test_render_line_svg_deterministic():
    s = {"a": ([0.0, 1.0, 2.0], [1.0, 0.5, 0.25])}
    one = render_line_svg(s, "t", "x", "y")
    two = render_line_svg(s, "t", "x", "y")
    assert one == two
    assert "<polyline" in one
