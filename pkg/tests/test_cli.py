import csv
import json
import subprocess
import sys

import pytest

from dgmpde.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

CALL = """
problem = "european_call"
seed = 3
[network]
layers = 1
width = 6
[sampling]
interior = 32
terminal = 16
[training]
iterations = 12
lr_schedule = [[0, 1e-3], [6, 5e-4]]
[evaluation]
t = [0.0, 1.0, 3]
x = [0.0, 150.0, 4]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_missing_config_is_a_config_error(tmp_path):
    assert main(["train", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_verb_and_keys(tmp_path):
    assert main(["fit", "x.toml"]) == EXIT_CONFIG
    bad = write(tmp_path, 'problem = "merton"\nfoo = 1\n')
    assert main(["train", bad, "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = write(tmp_path, 'problem = "merton"\n[training]\nepochs = 3\n')
    assert main(["train", bad, "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = write(tmp_path, 'problem = "heat"\n')
    assert main(["train", bad, "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = write(tmp_path, 'problem = "merton"\n[coefficients]\nbeta = 3\n')
    assert main(["train", bad, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_train_writes_checkpoint_and_history(tmp_path):
    cfg = write(tmp_path, CALL)
    out = tmp_path / "run"
    assert main(["train", cfg, "--out", str(out)]) == EXIT_OK
    assert (out / "checkpoint.bin").is_file()
    hist = rows(out / "history.csv")
    assert hist[0] == ["iteration", "l1", "l2", "l3", "l4", "total", "wall_ms"]
    assert len(hist) == 13


def test_deterministic_reruns_are_byte_identical(tmp_path):
    cfg = write(tmp_path, CALL)
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        for verb in ("train", "evaluate", "compare"):
            assert main([verb, cfg, "--out", str(o), "--deterministic"]) == EXIT_OK
    for name in ("history.csv", "checkpoint.bin", "surface.csv", "errors.csv", "error_slices.csv", "summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_seed_flag_changes_training(tmp_path):
    cfg = write(tmp_path, CALL)
    main(["train", cfg, "--out", str(tmp_path / "a"), "--deterministic"])
    main(["train", cfg, "--out", str(tmp_path / "b"), "--deterministic", "--seed", "4"])
    assert (tmp_path / "a" / "history.csv").read_bytes() != (tmp_path / "b" / "history.csv").read_bytes()


def test_evaluate_surface_and_extrapolation_flag(tmp_path):
    cfg = write(tmp_path, CALL)
    out = str(tmp_path)
    main(["train", cfg, "--out", out])
    assert main(["evaluate", cfg, "--out", out]) == EXIT_OK
    table = rows(tmp_path / "surface.csv")
    assert table[0] == ["t", "x", "f", "extrapolated"]
    assert len(table) == 1 + 12
    flags = {float(r[1]): int(r[3]) for r in table[1:]}
    assert flags[150.0] == 1 and flags[0.0] == 0 and flags[100.0] == 0


def test_single_point_grid(tmp_path):
    cfg = write(tmp_path, CALL.replace("t = [0.0, 1.0, 3]", "t = [0.5, 0.5, 1]").replace(
        "x = [0.0, 150.0, 4]", "x = [50.0, 50.0, 1]"))
    main(["train", cfg, "--out", str(tmp_path)])
    assert main(["evaluate", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert len(rows(tmp_path / "surface.csv")) == 2


def test_merton_control_column(tmp_path):
    cfg = write(tmp_path, CALL.replace("european_call", "merton").replace("x = [0.0, 150.0, 4]", "x = [0.1, 1.0, 4]"))
    main(["train", cfg, "--out", str(tmp_path)])
    assert main(["evaluate", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert rows(tmp_path / "surface.csv")[0] == ["t", "x", "f", "pi", "extrapolated"]


def test_compare_oracle_with_itself(tmp_path):
    cfg = write(tmp_path, 'problem = "systemic"\n[evaluation]\nt = [0, 1, 2]\nx1 = [0, 10, 3]\nx2 = [0, 10, 3]\n'
                          '[compare]\nsource = "oracle"\n')
    assert main(["compare", cfg, "--out", str(tmp_path), "--deterministic"]) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"problem", "seed", "iterations", "mae", "rmse", "max_err", "wall_ms"}
    assert summary["mae"] == summary["rmse"] == summary["max_err"] == 0.0
    assert summary["wall_ms"] == 0


def test_compare_mismatched_grid_dimensions(tmp_path):
    cfg = write(tmp_path, 'problem = "systemic"\n[evaluation]\nx3 = [0, 10, 3]\n[compare]\nsource = "oracle"\n')
    assert main(["compare", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg = write(tmp_path, 'problem = "merton"\n[evaluation]\nx2 = [0, 1, 3]\n[compare]\nsource = "oracle"\n')
    assert main(["compare", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_compare_checkpoint_for_other_problem(tmp_path):
    main(["train", write(tmp_path, CALL), "--out", str(tmp_path)])
    cfg = write(tmp_path, 'problem = "merton"\n', "m.toml")
    assert main(["compare", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


BASE = 'problem = "{p}"\n[baseline]\nscheme = "{s}"\n{extra}[evaluation]\nt = [0, 1, 3]\n'


@pytest.mark.parametrize("problem,scheme,extra", [
    ("european_call", "implicit_grid", "n_t = 20\nn_x = 20\n"),
    ("european_call", "monte_carlo", "paths = 200\n"),
    ("fokker_planck", "ou_monte_carlo", "paths = 500\n"),
    ("execution", "closed_form", ""),
    ("mfg", "fixed_point_grid", "n_t = 40\nn_x = 41\n"),
])
def test_baseline_file_created_and_deterministic(tmp_path, problem, scheme, extra):
    cfg = write(tmp_path, BASE.format(p=problem, s=scheme, extra=extra))
    for o in ("a", "b"):
        assert main(["baseline", cfg, "--out", str(tmp_path / o), "--deterministic"]) == EXIT_OK
    a, b = (tmp_path / "a" / "baseline.csv").read_bytes(), (tmp_path / "b" / "baseline.csv").read_bytes()
    assert a == b and a.count(b"\n") > 1


def test_baseline_unknown_scheme(tmp_path):
    cfg = write(tmp_path, BASE.format(p="merton", s="ftcs", extra=""))
    assert main(["baseline", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_compare_baseline_against_closed_form(tmp_path):
    cfg = write(tmp_path, 'problem = "european_call"\n[baseline]\nscheme = "implicit_grid"\nn_t = 200\nn_x = 260\n'
                          '[evaluation]\nt = [0, 0.5, 3]\nx = [20, 80, 13]\n[compare]\nsource = "baseline"\n')
    assert main(["compare", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "summary.json").read_text())["max_err"] < 0.05


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_code(tmp_path):
    # a huge learning rate drives the tanh network to overflow in the residual
    cfg = write(tmp_path, CALL.replace("lr_schedule = [[0, 1e-3], [6, 5e-4]]", "lr_schedule = [[0, 1e300]]"))
    assert main(["train", cfg, "--out", str(tmp_path)]) == EXIT_NUMERIC
    assert (tmp_path / "checkpoint.bin").is_file()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dgmpde.cli", "train", str(tmp_path / "none.toml")],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_CONFIG and "config error" in r.stderr
