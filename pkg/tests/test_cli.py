"""
Command line — Test Suite.

Proves:
 Group 1 — Exit codes
   1.  --help and the help command exit 0
   2.  Configuration problems exit 2
   3.  A missing checkpoint exits 3 with a readable message

 Group 2 — End to end
   4.  gen-data then sweep-snr --dataset writes a CSV and its sidecar
   5.  Explicit flags win over the --config file
"""
import pytest

from db.results import Results
from main import main


def _dirs(tmp_path):
    return ["--out", str(tmp_path / "out"), "--checkpoint-dir", str(tmp_path / "ck")]


# ────────────────────────────────────────────────────────────────
# Group 1 — Exit codes
# ────────────────────────────────────────────────────────────────

def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["help"]) == 0
    out = capsys.readouterr().out
    for name in ("gen-data", "train", "eval", "sweep-snr", "sweep-phi", "scalability", "csgd-trace"):
        assert name in out
    assert main([]) == 0


def test_config_errors_exit_two(tmp_path, capsys):
    assert main(["sweep-phi", "--phi", "1.5", *_dirs(tmp_path)]) == 2
    assert "phi" in capsys.readouterr().err
    assert main(["sweep-snr", "--no-such-flag"]) == 2
    assert main(["sweep-snr", "--set", "novalue", *_dirs(tmp_path)]) == 2
    assert main(["train", "--method", "EQUAL", *_dirs(tmp_path)]) == 2


def test_missing_checkpoint_exits_three(tmp_path, capsys):
    code = main(["eval", "--method", "CL", "--samples", "5", *_dirs(tmp_path)])
    assert code == 3
    assert "not found" in capsys.readouterr().err


# ────────────────────────────────────────────────────────────────
# Group 2 — End to end
# ────────────────────────────────────────────────────────────────

def test_gen_data_then_sweep(tmp_path):
    common = ["--seed", "7", "--m-train", "3", "--k", "2", "--samples", "30", "--phi", "0.1",
              *_dirs(tmp_path)]
    assert main(["gen-data", "--to", str(tmp_path / "ds"), *common]) == 0
    assert (tmp_path / "ds" / "manifest.json").exists()

    code = main(["sweep-snr", "--method", "EQUAL", "--snr-db", "10,20",
                 "--dataset", str(tmp_path / "ds"), *common])
    assert code == 0
    csvs = list((tmp_path / "out").glob("*.csv"))
    assert len(csvs) == 1
    rows = Results.read_csv(csvs[0])
    assert [r["value"] for r in rows] == ["10.0", "20.0"]
    assert Results.read_sidecar(csvs[0])["seed"] == 7
    assert (tmp_path / "out" / "logs" / "runs.log").exists()


@pytest.mark.parametrize("flag_samples, expected", [(None, "12"), ("9", "9")])
def test_config_file_then_flags(tmp_path, flag_samples, expected):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("SAMPLES=12\nMETHODS=EQUAL\nK=2\nM_TRAIN=2\n")
    argv = ["sweep-snr", "--config", str(cfg), "--snr-db", "20", *_dirs(tmp_path)]
    if flag_samples:
        argv += ["--samples", flag_samples]
    assert main(argv) == 0
    rows = Results.read_csv(next((tmp_path / "out").glob("*.csv")))
    assert rows[0]["n_samples"] == expected
