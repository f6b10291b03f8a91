import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochac.cli import main
from stochac.config import (RunConfig, bundled_config, bundled_configs, load_config,
                            parse_config, serialize_config)
from stochac.errors import ConfigError
from stochac.mesh import build_mesh
from stochac.output import read_snapshot_csv, write_snapshot_csv

SMALL = """\
run_id = small
n = 8
t_final = 0.5
lambda_jump = 10
scenario = random_half
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_round_trip_default_and_bundled():
    for cfg in [RunConfig()] + [bundled_config(n) for n in bundled_configs()]:
        assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=50, deadline=None)
@given(tau=st.sampled_from([0.01, 0.05, 0.1]), lam=st.floats(0, 500), c=st.floats(0, 10),
       snaps=st.lists(st.floats(0, 4), max_size=4), ymode=st.booleans())
def test_round_trip_property(tau, lam, c, snaps, ymode):
    cfg = RunConfig(tau=tau, lambda_jump=lam, c_noise=c, snapshots=snaps,
                    mode="yosida" if ymode else "exact_barrier", lam=1e-3 if ymode else None)
    assert parse_config(serialize_config(cfg), validate=False) == cfg


def test_bundled_recipes():
    names = bundled_configs()
    assert len(names) == 24
    c1 = bundled_config("case1_few")
    assert (c1.lambda_jump, c1.compensated, c1.scenario, c1.c_noise) == (10.0, True, "random_half", 0.5)
    c2 = bundled_config("case2_many_highnoise")
    assert (c2.lambda_jump, c2.compensated, c2.scenario, c2.c_noise) == (100.0, False, "circle", 5.0)
    assert c2.amplitude == "affine" and c2.compensator_in_f2


@pytest.mark.parametrize("text,key", [
    ("bogus = 1\n", "bogus"),
    ("tau = 0.05\ntau = 0.1\n", "tau"),
    ("theta = 1.5\n", "theta"),
    ("sigma_track = 0\n", "sigma_track"),
    ("tau = 0.3\nt_final = 0.6\n", "tau"),
    ("compensated = maybe\n", "compensated"),
    ("n = 1\n", "n"),
])
def test_invalid_configs_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_comments_and_missing_equals():
    cfg = parse_config("# header\nn = 8  # mesh\n\nseed = 4\n")
    assert cfg.n == 8 and cfg.seed == 4
    with pytest.raises(ConfigError):
        parse_config("n 8\n")


def test_snapshot_csv_round_trip(tmp_path):
    mesh = build_mesh(4)
    u = np.random.default_rng(0).uniform(0, 1, mesh.n_nodes)
    write_snapshot_csv(u, mesh, tmp_path / "s.csv")
    assert np.array_equal(read_snapshot_csv(tmp_path / "s.csv").ravel(), u)


def test_simulate_case1_few_writes_all_rows(tmp_path):
    assert main(["simulate", "--config", "case1_few", "--out", str(tmp_path),
                 "--snapshots", "0,1,4"]) == 0
    run = tmp_path / "case1_few"
    rows = _rows(run / "record.csv")
    assert len(rows) == 81
    assert rows[0]["newton_iters"] == "" and rows[-1]["time"] == "4.0"
    assert {p.name for p in run.iterdir()} >= {"record.csv", "events.csv", "manifest.txt",
                                                 "snap_t0.csv", "snap_t1.csv", "snap_t4.csv"}
    assert sum(int(r["jump_count"]) for r in rows[1:]) == len(_rows(run / "events.csv"))


def test_simulate_high_noise_stays_below_one(tmp_path):
    assert main(["simulate", "--config", "case2_many_highnoise", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "case2_many_highnoise" / "record.csv")
    assert all(float(r["u_max"]) < 1.0 and float(r["u_min"]) > 0.0 for r in rows)


def test_bad_config_writes_nothing(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(SMALL + "colour = red\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert main(["simulate", "--config", "no_such_recipe", "--out", str(out)]) == 2
    assert not out.exists()


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    manifest = tmp_path / "a" / "small" / "manifest.txt"
    assert load_config(manifest) == load_config(cfg)
    assert main(["simulate", "--config", str(manifest), "--out", str(tmp_path / "b")]) == 0
    for name in ("record.csv", "events.csv", "manifest.txt"):
        assert (tmp_path / "a" / "small" / name).read_bytes() == (tmp_path / "b" / "small" / name).read_bytes()


def test_step_failure_keeps_partial_output(tmp_path):
    cfg = tmp_path / "fail.cfg"
    cfg.write_text(SMALL + "newton_max_iter = 0\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    run = tmp_path / "small"
    assert len(_rows(run / "record.csv")) == 1
    assert "status = step-failure" in (run / "manifest.txt").read_text()


def test_verify_exit_codes(capsys):
    assert main(["verify", "potential", "mesh"]) == 0
    out = capsys.readouterr().out
    assert "resolvent identity" in out and "FAIL" not in out
    assert main(["verify", "nonexistent"]) == 2


def test_convergence_writes_reports(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    assert main(["convergence", "--config", str(cfg), "--out", str(tmp_path),
                 "--lambdas", "1e-2,1e-3,1e-4", "--taus", "0.1,0.05,0.025", "--t-final", "0.5"]) == 0
    rows = _rows(tmp_path / "small" / "yosida_cauchy.csv")
    assert [float(r["lambda"]) for r in rows] == [1e-2, 1e-3, 1e-4]
    d = [float(r["sup_sq_diff_to_exact"]) for r in rows]
    assert d[0] > d[1] > d[2]
    assert len(_rows(tmp_path / "small" / "tau_refinement.csv")) == 3


def test_ensemble_writes_stats(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL.replace("random_half", "circle") + "compensated = false\namplitude = affine\n")
    assert main(["ensemble", "--config", str(cfg), "--out", str(tmp_path), "--realizations", "3"]) == 0
    run = tmp_path / "small"
    rows = _rows(run / "stats.csv")
    assert len(rows) == 11
    assert list(rows[0]) == ["time", "mean_total_damage", "std_total_damage", "mean_umin",
                             "min_umin", "mean_umax", "max_umax", "mean_sq_H_norm"]
    assert len(list(run.glob("record_*.csv"))) == 3
    assert "failed_realizations = none" in (run / "manifest.txt").read_text()


def test_list_command(capsys):
    assert main(["list"]) == 0
    assert "case1_few.cfg" in capsys.readouterr().out
