"""cli: config dispatch, reproducibility, exit codes, plot data."""

import json

import pytest

from alloymsa.cli import main, run_experiment

DELTA0_MODEL = {
    "d": 1,
    "u": {"d": 1, "values": [[[0], 1.0]], "C": 1.0, "alpha": 1.0,
          "truncation_radius": 0, "truncation_residual": 0.0},
    "rho": {"uniform": [0.0, 1.0]},
}


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


class TestGenfunKind:
    def test_reports_leading_index(self, tmp_path):
        cfg = write_config(tmp_path, "g.json", {
            "model": DELTA0_MODEL, "params": {"ls": [2.0, 4.0]}, "seed": 1,
        })
        rc = main(["analyze-potential", "--config", str(cfg),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        summary = json.loads((tmp_path / "out" / "genfun_summary.json").read_text())
        assert summary["constants"]["I0"] == [0]
        assert summary["constants"]["c_u"] == 1.0

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, "g.json", {
            "model": DELTA0_MODEL, "params": {"ls": [2.0]}, "seed": 7,
        })
        outs = []
        for sub in ("a", "b"):
            main(["analyze-potential", "--config", str(cfg),
                  "--out", str(tmp_path / sub)])
            outs.append((tmp_path / sub / "genfun_summary.json").read_bytes())
        assert outs[0] == outs[1]


class TestWegnerKind:
    def test_thread_count_invariance(self, tmp_path):
        cfg = write_config(tmp_path, "w.json", {
            "model": DELTA0_MODEL,
            "params": {"ls": [2, 3], "interval": [1.9, 2.1]},
            "seed": 5, "trials": 40,
        })
        blobs = []
        for sub, threads in (("t1", "1"), ("t8", "8")):
            rc = main(["wegner", "--config", str(cfg), "--threads", threads,
                       "--out", str(tmp_path / sub)])
            assert rc == 0
            blob = b"".join(
                (tmp_path / sub / n).read_bytes()
                for n in ("wegner.csv", "wegner_summary.json"))
            blobs.append(blob)
        assert blobs[0] == blobs[1]

    def test_csv_columns(self, tmp_path):
        cfg = write_config(tmp_path, "w.json", {
            "model": DELTA0_MODEL, "params": {"ls": [2]}, "seed": 5,
            "trials": 20,
        })
        main(["wegner", "--config", str(cfg), "--out", str(tmp_path / "o")])
        header = (tmp_path / "o" / "wegner.csv").read_text().splitlines()[0]
        assert header == ("d,l,R_l,interval_lo,interval_hi,trials,mean,"
                          "std_error,bound,chain,bv_norm")


class TestScheduleKind:
    def test_schedule_export(self, tmp_path):
        cfg = write_config(tmp_path, "s.json", {
            "model": DELTA0_MODEL,
            "params": {"msa": {"xi": 8.0, "kappa": 1.5, "beta": 0.6,
                                "q": 0.5, "m0": 0.5, "l0": 25000.0},
                       "k_max": 25},
        })
        rc = main(["msa-schedule", "--config", str(cfg),
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        data = json.loads((tmp_path / "o" / "schedule.json").read_text())
        assert len(data["m"]) == 26
        assert all(m >= data["m_inf"] for m in data["m"])
        plot = (tmp_path / "o" / "schedule_plot.csv").read_text().splitlines()
        assert plot[0] == "k,l_k,m_k"
        assert len(plot) == 27

    def test_invalid_parameters_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, "s.json", {
            "model": DELTA0_MODEL,
            "params": {"msa": {"xi": 8.0, "kappa": 1.5, "beta": 0.6,
                                "q": 0.5, "m0": 0.5, "l0": 10.0}},
        })
        assert main(["msa-schedule", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 2


class TestErrorPaths:
    def test_schema_violation_exit_3(self, tmp_path):
        cfg = write_config(tmp_path, "bad.json", {"model": {"d": 1}})
        assert main(["wegner", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 3

    def test_missing_config_exit_3(self, tmp_path):
        assert main(["wegner", "--config", str(tmp_path / "nope.json")]) == 3

    def test_capacity_exit_4(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ALLOYMSA_CAPACITY", "10")
        cfg = write_config(tmp_path, "d.json", {
            "model": DELTA0_MODEL, "params": {"l": 20.0}, "seed": 1,
            "trials": 1,
        })
        assert main(["decay", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 4


class TestDecayKind:
    def test_decay_run(self, tmp_path):
        cfg = write_config(tmp_path, "d.json", {
            "model": {**DELTA0_MODEL, "rho": {"uniform": [0.0, 50.0]}},
            "params": {"l": 8.0, "n_lowest": 2, "frac_min": 0.0},
            "seed": 2, "trials": 5,
        })
        rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 0
        plot = (tmp_path / "o" / "decay_plot.csv").read_text().splitlines()
        assert plot[0] == "dist_inf,log_abs_psi"
        assert len(plot) > 3


class TestRunExperimentAPI:
    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(Exception):
            run_experiment({"kind": "nope", "model": DELTA0_MODEL}, tmp_path)

    def test_config_hash_ignores_threads(self, tmp_path):
        from alloymsa.cli import config_hash
        a = config_hash({"kind": "wegner", "seed": 1, "threads": 1})
        b = config_hash({"kind": "wegner", "seed": 1, "threads": 8})
        c = config_hash({"kind": "wegner", "seed": 2, "threads": 1})
        assert a == b and a != c
