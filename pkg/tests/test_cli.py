import json

import numpy as np
import pytest

from localredfield.cli import main, read_table
from localredfield.config import ConfigError, parse_config, serialize

BASE = """
[model]
kind = xxz
energy_unit = h
L = {L}
J = 1.0
Delta = 0.7
h = 1.0
delta = -0.07

[bath:left]
site = first
family = ohmic
gamma = {gamma}
T = 2.2

[bath:right]
site = last
family = ohmic
gamma = {gamma}
T = 2.2

[method]
methods = {methods}

[run]
initial_state = x-polarized
t_max = {t_max}
n_times = {n_times}
observables = populations, magnetization, currents, purity, min_eig, trace
"""


def config(tmp_path, name="run.ini", L=3, gamma=0.25, methods="exact-redfield, local-redfield:2",
           t_max=2.0, n_times=11, extra=""):
    path = tmp_path / name
    path.write_text(BASE.format(L=L, gamma=gamma, methods=methods, t_max=t_max, n_times=n_times) + extra)
    return path


def run(*args):
    return main([str(a) for a in args])


def test_round_trip(tmp_path):
    extra = "\n[sweep]\nparameter = T\ngrid = log:2:20:5\n\n[trajectories]\nn_traj = 7\nseed = 3\n"
    cfg = parse_config(config(tmp_path, extra=extra).read_text())
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert again.digest() == cfg.digest()
    assert len(cfg.sweep.values) == 5


def test_inline_comments(tmp_path):
    text = config(tmp_path).read_text()
    commented = text.replace("kind = xxz", "kind = xxz   ; spin chain").replace("L = 3", "L = 3  # sites")
    assert parse_config(commented) == parse_config(text)


@pytest.mark.parametrize("drop, field", [("energy_unit = h\n", "energy_unit"), ("T = 2.2\n", "'T'"),
                                         ("family = ohmic\n", "family")])
def test_missing_field_is_named(tmp_path, drop, field):
    text = config(tmp_path).read_text().replace(drop, "", 1)
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_invalid_entries(tmp_path):
    text = config(tmp_path).read_text()
    with pytest.raises(ConfigError, match="unknown method"):
        parse_config(text.replace("local-redfield:2", "global-redfield"))
    with pytest.raises(ConfigError, match="out of range"):
        parse_config(text.replace("site = last", "site = 7"))
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(text + "\n[extras]\nx = 1\n")


def test_evolve_writes_metadata_and_columns(tmp_path, capsys):
    path = config(tmp_path)
    assert run("evolve", "--config", path, "--out", tmp_path / "out", "--threads", 1) == 0
    cols, rows, meta = read_table(tmp_path / "out" / "evolve_exact-redfield_0.csv")
    assert cols[0] == "time" and "pop_0" in cols and "j_0" in cols and "sz_2" in cols
    assert len(rows) == 11
    assert {"config_sha256", "version", "energy_unit", "command"} <= set(meta)
    trace = np.array([float(r[cols.index("trace")]) for r in rows])
    assert np.allclose(trace, 1.0, atol=1e-10)


def test_unitary_config_keeps_purity(tmp_path):
    path = config(tmp_path, gamma=0.0, methods="exact-redfield", extra="rtol = 1e-10\natol = 1e-12\ntau_r = 4\n")
    assert run("evolve", "--config", path, "--out", tmp_path) == 0
    cols, rows, _ = read_table(tmp_path / "evolve_exact-redfield_0.csv")
    p = np.array([float(r[cols.index("purity")]) for r in rows])
    assert np.allclose(p, 1.0, atol=1e-8)


def test_exit_codes(tmp_path):
    assert run("evolve", "--config", tmp_path / "missing.ini", "--out", tmp_path) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nkind = xxz\nL = 3\n")
    assert run("evolve", "--config", bad, "--out", tmp_path) == 2
    cold = config(tmp_path, "cold.ini", L=4, methods="local-redfield:4").read_text().replace("T = 2.2", "T = 0.4")
    (tmp_path / "cold.ini").write_text(cold)
    assert run("evolve", "--config", tmp_path / "cold.ini", "--out", tmp_path, "--strict") == 3
    assert run("trajectories", "--config", config(tmp_path), "--out", tmp_path) == 2


def test_steady_state_and_json(tmp_path):
    path = config(tmp_path, methods="exact-redfield, local-redfield:4, local-lindblad:1, standard-local-lindblad")
    assert run("steady-state", "--config", path, "--out", tmp_path, "--format", "json") == 0
    data = json.loads((tmp_path / "steady_state.json").read_text())
    rows = {(r[0], r[1]): r for r in data["rows"]}
    d = data["columns"].index("d_exact")
    assert rows[("exact-redfield", 0)][d] == 0.0
    assert rows[("local-redfield", 4)][d] < rows[("standard-local-lindblad", 0)][d]


def test_error_sweep_single_point(tmp_path):
    extra = "\n[sweep]\nparameter = T\nvalues = 3.0\n"
    path = config(tmp_path, methods="local-redfield:1, local-redfield:4, adhoc-redfield:2:2.0", extra=extra)
    assert run("error-sweep", "--config", path, "--out", tmp_path, "--threads", 1) == 0
    cols, rows, _ = read_table(tmp_path / "error_sweep.csv")
    assert len(rows) == 3 and cols == ["T", "method", "order", "eps0", "d"]
    assert [r[1] for r in rows] == ["local-redfield", "local-redfield", "adhoc-redfield"]


def test_scaling_needs_four_points(tmp_path):
    extra = "\n[sweep]\nparameter = T\nvalues = 2, 4, 8\n"
    path = config(tmp_path, methods="local-redfield:0", extra=extra)
    assert run("scaling", "--config", path, "--out", tmp_path) == 2


def test_trajectories_deterministic(tmp_path):
    extra = "\n[trajectories]\nn_traj = 1\nseed = 42\nrecord_jumps = true\n"
    path = config(tmp_path, methods="local-lindblad:1", extra=extra)
    for sub in ("a", "b"):
        assert run("trajectories", "--config", path, "--out", tmp_path / sub, "--threads", 1) == 0
    a = (tmp_path / "a" / "trajectories_local-lindblad_1.csv").read_text()
    b = (tmp_path / "b" / "trajectories_local-lindblad_1.csv").read_text()
    assert a == b and "# seed: 42" in a
    assert (tmp_path / "a" / "trajectories_local-lindblad_1_jumps.jsonl").exists()
    assert run("trajectories", "--config", path, "--out", tmp_path / "c", "--seed", 43) == 0
    assert "# seed: 43" in (tmp_path / "c" / "trajectories_local-lindblad_1.csv").read_text()


def test_exact_and_local_dynamics_agree(tmp_path):
    path = config(tmp_path, L=6, methods="exact-redfield, local-redfield:4", t_max=4.0, n_times=41)
    assert run("evolve", "--config", path, "--out", tmp_path) == 0
    a = tmp_path / "evolve_exact-redfield_0.csv"
    b = tmp_path / "evolve_local-redfield_4.csv"
    assert run("compare", a, b, "--out", tmp_path) == 0
    cols, rows, _ = read_table(tmp_path / "compare.csv")
    summary = {r[0]: float(r[1]) for r in rows}
    assert summary["populations_l1_max"] < 0.02
