import csv
import json

import numpy as np
import pytest

from cgdyn import experiments as exp
from cgdyn.channels import blurred_detector_channel, channel_to_dict, identity_channel
from cgdyn.cli import main

PI = np.pi


def amps(v):
    return [[float(np.real(z)), float(np.imag(z))] for z in v]


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def scenario(**kw):
    base = {
        "channel": {"builtin": "blurred_detector"},
        "hamiltonian": {"builtin": "zz"},
        "initial_states": [amps(np.full(4, 0.5))],
        "time_grid": {"tau_start": 0.0, "tau_end": PI, "steps": 101},
        "seed": 3,
    }
    base.update(kw)
    return base


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (v if k == "status" else float(v)) for k, v in r.items()} for r in rows]


# --- check-channel ---------------------------------------------------------

def test_check_channel_builtin(tmp_path, capsys):
    assert main(["check-channel", "--config", write(tmp_path, scenario())]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "table_max_error" in out
    residual = float(out.split("completeness_residual")[1].split()[0])
    assert residual < 1e-12


def test_check_channel_broken(tmp_path, capsys):
    data = channel_to_dict(blurred_detector_channel())
    data["kraus"][0][0][0] += 0.1
    assert main(["check-channel", "--config", write(tmp_path, scenario(channel=data))]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    residual = float(out.split("completeness_residual")[1].split()[0])
    # (1.1)^2 - 1 on the |00> diagonal
    assert residual == pytest.approx(0.21, abs=1e-9)


def test_check_channel_identity(tmp_path, capsys):
    cfg = scenario(channel=channel_to_dict(identity_channel(4)))
    assert main(["check-channel", "--config", write(tmp_path, cfg)]) == 0
    assert "PASS" in capsys.readouterr().out


@pytest.mark.parametrize("text", ["{not json", json.dumps([1, 2]), json.dumps({"channel": {"builtin": "nope"}})])
def test_malformed_config(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["check-channel", "--config", str(p)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == 2


def test_non_hermitian_hamiltonian(tmp_path):
    h = [[[0, 0]] * 4 for _ in range(4)]
    h[0][1] = [1, 0]
    assert main(["simulate", "--config", write(tmp_path, scenario(hamiltonian=h))]) == 2


def test_renormalizes_initial_state(caplog):
    scn = exp.parse_config(scenario(initial_states=[[1, 1, 1, 1]]))
    assert np.allclose(scn.initial_states[0], np.full((4, 4), 0.25))
    assert "renormalizing" in caplog.text


# --- simulate --------------------------------------------------------------

def test_simulate_uniform_state(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--config", write(tmp_path, scenario()), "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "tau,purity,bx,by,bz,zeta_norm,min_output_eig"
    rows = read_csv(out)
    assert len(rows) == 101
    assert rows[0]["purity"] == pytest.approx(1, abs=1e-9)
    assert rows[50]["purity"] == pytest.approx(2 / 3, abs=1e-9)
    assert rows[100]["purity"] == pytest.approx(1, abs=1e-9)


def test_simulate_ket00_stays_pure(tmp_path):
    out = tmp_path / "sim.csv"
    cfg = scenario(initial_states=[[1, 0, 0, 0]])
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    for r in read_csv(out):
        assert r["purity"] == pytest.approx(1, abs=1e-12)
        assert r["zeta_norm"] < 1e-12


def test_simulate_matches_closed_form(rng):
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    c /= np.linalg.norm(c)
    c00, c01, c10, c11 = c
    scn = exp.parse_config(scenario(initial_states=[amps(c)]))
    rows, worst = exp.simulate(scn)
    assert worst < 1e-9
    for r in rows:
        rho10 = np.conj(c00) * (np.exp(2j * r["tau"]) * (c01 + c10) + c11) / np.sqrt(3)
        assert r["bx"] == pytest.approx(2 * rho10.real, abs=1e-10)
        assert r["by"] == pytest.approx(2 * rho10.imag, abs=1e-10)
        assert r["bz"] == pytest.approx(abs(c00) ** 2 - (1 - abs(c00) ** 2), abs=1e-10)


def test_simulate_needs_one_state(tmp_path):
    cfg = scenario(initial_states=[[1, 0, 0, 0], [0, 1, 0, 0]])
    assert main(["simulate", "--config", write(tmp_path, cfg)]) == 2


def test_simulate_without_bloch_columns():
    ch = {"builtin": "identity", "dim": 3}
    h = [[[1.0 if i == j else 0.0, 0.0] for j in range(3)] for i in range(3)]
    scn = exp.parse_config(scenario(channel=ch, hamiltonian=h, initial_states=[[1, 0, 0]]))
    rows, _ = exp.simulate(scn)
    assert "bx" not in rows[0] and "purity" in rows[0]


def test_csv_precision(tmp_path):
    out = tmp_path / "sim.csv"
    main(["simulate", "--config", write(tmp_path, scenario()), "--out", str(out)])
    raw = out.read_bytes()
    assert b"\r\n" not in raw
    line = raw.decode().splitlines()[51]
    assert line.split(",")[1].startswith("0.66666666666666")


def test_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cfg = write(tmp_path, scenario(hamiltonian={"builtin": "zz_transverse", "g": 3}))
    main(["find-pair", "--config", cfg, "--out", str(a), "--budget", "30"])
    main(["find-pair", "--config", cfg, "--out", str(b), "--budget", "30"])
    assert a.read_text() == b.read_text()


# --- distance / find-pair --------------------------------------------------

def test_distance_identical_states(tmp_path):
    out = tmp_path / "d.csv"
    v = amps(np.full(4, 0.5))
    assert main(["distance", "--config", write(tmp_path, scenario(initial_states=[v, v])), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["tau", "eff_distance", "eff_distance_0", "underlying_distance_0", "underlying_distance"]
    assert all(r["eff_distance"] < 1e-12 for r in rows)


def test_distance_refuses_different_maps(tmp_path):
    cfg = write(tmp_path, scenario(initial_states=[[1, 0, 0, 0], [0, 1, 0, 0]]))
    assert main(["distance", "--config", cfg]) == 1
    assert main(["distance", "--config", cfg, "--override-same-map-check", "--out", str(tmp_path / "x.csv")]) == 0


def test_distance_zz_pair_never_exceeds_start(tmp_path):
    pair = tmp_path / "pair.json"
    out = tmp_path / "d.csv"
    assert main(["find-pair", "--config", write(tmp_path, scenario()), "--out", str(pair), "--budget", "60"]) == 0
    assert main(["distance", "--config", str(pair), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0]["eff_distance"] > 0
    for r in rows:
        assert r["eff_distance"] <= r["eff_distance_0"] + 1e-10
        assert r["eff_distance"] <= r["underlying_distance_0"] + 1e-10


def test_find_pair_zero_budget():
    res = exp.find_pair(exp.parse_config(scenario()), 0)
    assert res.excess == 0
    assert np.array_equal(res.partner, res.seed_state)


def test_find_pair_transverse_field_excess(tmp_path):
    from cgdyn.gamma import in_domain

    scn = exp.parse_config(scenario(hamiltonian={"builtin": "zz_transverse", "g": 3.0}, seed=11))
    res = exp.find_pair(scn, 500)
    assert res.excess > 1e-3
    g0 = exp.bloch_vector(res.seed_state, res.system.basisD)
    assert in_domain(res.system, g0, res.partner_gamma).member
    # certify the excess on the direct path
    rows = exp.distance(exp.Scenario(scn.channel, scn.hamiltonian, [res.seed_state, res.partner], scn.taus))
    eff = np.array([r["eff_distance"] for r in rows])
    assert eff.max() - eff[0] == pytest.approx(res.excess, abs=1e-12)


def test_find_pair_output_feeds_distance(tmp_path):
    pair = tmp_path / "pair.json"
    cfg = write(tmp_path, scenario(hamiltonian={"builtin": "zz_transverse", "g": 3}))
    assert main(["find-pair", "--config", cfg, "--out", str(pair), "--budget", "40"]) == 0
    data = json.loads(pair.read_text())
    assert len(data["initial_states"]) == 2 and "excess" in data
    assert main(["distance", "--config", str(pair), "--out", str(tmp_path / "d.csv")]) == 0


# --- domain-probe / divisibility ---------------------------------------------

def test_domain_probe_detector(tmp_path, capsys):
    assert main(["domain-probe", "--config", write(tmp_path, scenario()), "--samples", "100"]) == 0
    assert "violations 0" in capsys.readouterr().out


def test_domain_probe_identity_and_partial_trace(tmp_path, capsys):
    for ch in ({"builtin": "identity", "dim": 4}, {"builtin": "partial_trace", "dims": [2, 2]}):
        cfg = write(tmp_path, scenario(channel=ch, initial_states=[[1, 0, 0, 0]]))
        assert main(["domain-probe", "--config", cfg, "--samples", "30"]) == 0


def test_divisibility_table(tmp_path):
    out = tmp_path / "div.csv"
    cfg = write(tmp_path, scenario(time_grid={"tau_start": 0, "tau_end": PI, "steps": 6}))
    assert main(["divisibility", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 21
    for r in rows:
        assert r["status"] in {"CP", "NOT-CP", "indeterminate"}
        if r["tau_j"] == r["tau_k"]:
            assert r["status"] == "CP"


def test_divisibility_swap_partial_trace_is_cp():
    scn = exp.parse_config(
        scenario(
            channel={"builtin": "partial_trace", "dims": [2, 2]},
            hamiltonian={"builtin": "swap"},
            time_grid={"tau_start": 0, "tau_end": PI / 2, "steps": 5},
        )
    )
    assert {r["status"] for r in exp.divisibility(scn)} == {"CP"}


def test_divisibility_transverse_field_has_non_cp_interval():
    scn = exp.parse_config(scenario(hamiltonian={"builtin": "zz_transverse", "g": 3}, time_grid={"tau_start": 0, "tau_end": PI, "steps": 6}))
    assert "NOT-CP" in {r["status"] for r in exp.divisibility(scn)}


def test_divisibility_requires_monotone_grid(tmp_path):
    cfg = write(tmp_path, scenario(time_grid={"tau_start": 1, "tau_end": 0, "steps": 3}))
    assert main(["divisibility", "--config", cfg]) == 2
