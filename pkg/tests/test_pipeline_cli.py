from __future__ import annotations

import json

import pytest

from protonpipe.circuit import Circuit, Gate
from protonpipe.cli import main
from protonpipe.errors import ConfigurationError
from protonpipe.pipeline import PipelineConfig, run_pipeline

TOY = {"n_electron": 2, "n_proton": 2, "seed": 1, "scale": 1.0}


def small_config(**kw):
    cfg = {"toy": TOY, "occupied_electron": [0], "occupied_proton": [0],
           "zne": {"replicates": 4, "bootstrap": 100, "lambdas": [1, 2, 3]}, "density_grid": "gaussian"}
    cfg.update(kw)
    return cfg


def read_tables(run_dir):
    return {p.name: p.read_bytes() for p in sorted((run_dir / "tables").iterdir())}


def test_pipeline_is_deterministic(tmp_path):
    a = run_pipeline(small_config(), tmp_path / "a")
    b = run_pipeline(small_config(), tmp_path / "b")
    assert a.ok and b.ok
    assert read_tables(tmp_path / "a") == read_tables(tmp_path / "b")
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    names = set(read_tables(tmp_path / "a"))
    assert {"path_points.csv", "table2.csv", "table3.csv", "rates.csv", "entropy.csv", "zne_bootstrap.csv",
            "zne_fits.json", "proton_position.csv"} <= names
    assert (tmp_path / "a" / "vqe-shallow" / "300" / "adapt.json").exists()
    assert (tmp_path / "a" / "aqc-low" / "030" / "circuit.txt").exists()
    assert a.manifest["checks"]["vqe_shallow_barrier_within_band"] is True


def test_pipeline_results_are_consistent(tmp_path):
    res = run_pipeline(small_config(stages=["casci", "hf", "vqe-deep"]), tmp_path)
    casci, deep, hf = res.results["casci"], res.results["vqe-deep"], res.results["hf"]
    for lab in casci:
        assert 0 <= deep[lab].energy - casci[lab].energy < 1e-3
        assert hf[lab].energy >= casci[lab].energy - 1e-12
    st = res.manifest["stages"]
    assert st["zne"]["status"] == "not requested"
    assert st["vqe-deep"]["status"] == "ok"


def test_failed_stage_skips_dependents(tmp_path):
    bad = tmp_path / "bad_cal.json"
    bad.write_text("{not json")
    cfg = small_config(stages=["casci", "vqe-shallow", "aqc-low", "zne"],
                       zne={"noise": str(bad), "replicates": 2})
    res = run_pipeline(cfg, tmp_path / "run")
    assert not res.ok
    assert res.manifest["stages"]["zne"]["status"] == "failed"
    assert "ParseError" in res.manifest["stages"]["zne"]["reason"]
    cfg = small_config(stages=["aqc-high"])
    res = run_pipeline(cfg, tmp_path / "run2")
    assert res.manifest["stages"]["aqc-high"]["status"] == "skipped"


def test_config_validation(tmp_path):
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"toy": TOY, "stages": ["casci", "magic"]})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"toy": TOY, "colour": "blue"})
    p = tmp_path / "c.json"
    p.write_text("{oops")
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(p)


def test_cli_end_to_end_with_integral_files(tmp_path, capsys):
    ints = tmp_path / "ints"
    assert main(["ham", "toy", "--n-electron", "2", "--n-proton", "2", "--seed", "1", "-o", str(ints)]) == 0
    cfg = {"integrals": {"left": "ints/left.txt", "middle": "ints/middle.txt", "right": "ints/right.txt"},
           "stages": ["casci", "hf", "vqe-shallow"], "labels": ["300", "030"]}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["pipeline", str(tmp_path / "cfg.json"), "--run-dir", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "tables" / "table2.csv").exists()

    # stage-level commands chained through files
    assert main(["ham", "assemble", str(ints / "left.txt"), "-o", str(tmp_path / "hl.txt")]) == 0
    assert main(["ham", "assemble", str(ints / "middle.txt"), "-o", str(tmp_path / "hm.txt")]) == 0
    assert main(["ham", "assemble", str(ints / "right.txt"), "-o", str(tmp_path / "hr.txt")]) == 0
    assert main(["ham", "interpolate", str(tmp_path / "hl.txt"), str(tmp_path / "hm.txt"), str(tmp_path / "hr.txt"),
                 "--label", "210", "-o", str(tmp_path / "h210.txt")]) == 0
    capsys.readouterr()
    assert main(["exact", str(tmp_path / "h210.txt"), "--layout", "2,2", "--sector", "1,1",
                 "--state-out", str(tmp_path / "gs.bin")]) == 0
    exact = json.loads(capsys.readouterr().out)["energy"]
    assert main(["adapt", str(tmp_path / "h210.txt"), "--layout", "2,2", "--occ-e", "0", "--occ-p", "0",
                 "--exact", "--threshold", "1e-3", "-o", str(tmp_path / "adapt")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["converged"] and out["energy"] - exact < 1e-3
    assert main(["aqc", str(tmp_path / "adapt" / "state.bin"), "--preset", "low", "-o", str(tmp_path / "aqc")]) == 0
    assert json.loads(capsys.readouterr().out)["fidelity"] >= 0.97
    circ = str(tmp_path / "aqc" / "circuit.txt")
    assert main(["circ", circ]) == 0
    assert main(["noise", circ, str(tmp_path / "h210.txt")]) == 0
    noise = json.loads(capsys.readouterr().out.split("\n}\n")[-2] + "\n}")
    assert noise["noisy_energy"] > noise["ideal_energy"] - 1e-3
    for lab, h in (("l", "hl.txt"), ("m", "hm.txt")):
        assert main(["zne", "collect", circ, str(tmp_path / h), "--replicates", "3", "--shots", "2000",
                     "-o", str(tmp_path / f"{lab}.csv")]) == 0
    assert main(["zne", "fit", str(tmp_path / "l.csv")]) == 0
    assert main(["zne", "barrier", str(tmp_path / "l.csv"), str(tmp_path / "m.csv")]) == 0
    assert main(["rate", "0.00008", "--temperatures", "120"]) == 0
    assert main(["density", str(tmp_path / "gs.bin"), "--layout", "2,2", "-o", str(tmp_path / "rho.csv")]) == 0


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("&NEO NELEC_MODES=2\nE1\n1.0 1\n")
    assert main(["ham", "assemble", str(bad), "-o", str(tmp_path / "h.txt")]) == 2
    assert main(["rate", "0.01", "--temperatures", "-5"]) == 2
    wide = Circuit(13, [Gate("CZ", (0, 12))])
    wide.save(tmp_path / "wide.txt")
    assert main(["circ", str(tmp_path / "wide.txt"), "--coupling", "heavyhex:1"]) == 3
    missing = tmp_path / "c.json"
    missing.write_text(json.dumps({**small_config(stages=["casci", "vqe-shallow", "aqc-low", "zne"]),
                                   "zne": {"noise": "missing.json"}}))
    # missing inputs are rejected before any stage runs
    assert main(["pipeline", str(missing), "--run-dir", str(tmp_path / "r")]) == 2
    assert not (tmp_path / "r" / "manifest.json").exists()
    assert main(["exact", str(tmp_path / "nope.txt"), "--layout", "1,1"]) == 2
