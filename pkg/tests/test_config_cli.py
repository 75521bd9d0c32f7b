import io
import math

import numpy as np
import pytest

from flockopt import ConfigError, preset
from flockopt.cli import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main
from flockopt.config import PRESET_NAMES, config_from_dict, config_parse, config_to_dict, from_toml, to_toml
from flockopt.harness import (COLUMNS, csv_text, read_csv, run_experiment, summarize, summarize_columns)


def test_preset_values():
    f = preset("fig1-centralized")
    assert f.N == 10 and f.m == 2 and f.objective["name"] == "lognorm"
    assert abs(f.sigma ** 2 - 450) < 1e-9 and f.step == 0.02 and f.gamma_central == 0.02
    c2 = preset("ackley-case2-flocking")
    assert c2.N == 30 and c2.sigma == 35.0 and c2.potential["a"] == 3.0
    c1 = preset("ackley-case1")
    assert c1.mode == "flocking" and c1.gamma_central == 0.018 and c1.N == 20
    assert abs(c1.sampling_central.mean - 0.01 * 20 ** 0.2) < 1e-12


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_toml_round_trip(name):
    cfg = preset(name)
    assert from_toml(to_toml(cfg)) == cfg


def test_config_file_round_trip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(to_toml(preset("quad-bounds").replace(seed=99)), encoding="utf-8")
    assert config_parse(p).seed == 99


def _bad(**changes):
    d = {**config_to_dict(preset("quad-bounds")), **changes}
    with pytest.raises(ConfigError) as e:
        config_from_dict(d)
    return e.value.errors


def test_validation_names_the_field():
    assert any(err.startswith("step:") for err in _bad(step=0.0))
    assert any(err.startswith("beta:") for err in _bad(beta=0.5))
    assert _bad(colour="red") == ["unknown key 'colour'"]
    assert any("parallel" in err for err in _bad(engine="parallel", mode="centralized"))
    assert any(err.startswith("timing.mean") for err in _bad(timing={"kind": "constant", "mean": -1.0}))
    assert any(err.startswith("topology.k") for err in
               _bad(topology={"kind": "random_k_neighbors", "k": 12, "seed": 1}))


def test_validation_collects_every_error():
    errs = _bad(step=-1.0, N=0, noise={"sigma": -2.0})
    assert len(errs) >= 3


def test_toml_syntax_error():
    with pytest.raises(ConfigError, match="TOML"):
        from_toml("N = = 3")


def test_bounds_flag(capsys):
    assert main(["--preset", "quad-bounds", "--bounds"]) == EXIT_OK
    lines = dict(ln.split(" = ", 1) for ln in capsys.readouterr().out.splitlines())
    assert float(lines["phi"]) == pytest.approx(0.45, abs=1e-12)
    assert lines["psi1"].startswith("unavailable")


def test_print_config_is_loadable(capsys):
    assert main(["--preset", "fig1", "--seed", "5", "--print-config"]) == EXIT_OK
    cfg = from_toml(capsys.readouterr().out)
    assert cfg.seed == 5 and cfg.name == "fig1-flocking"


def test_csv_to_stdout(capsys):
    assert main(["--preset", "quad-bounds", "--replicas", "2", "--horizon", "0.2"]) == EXIT_OK
    out, err = capsys.readouterr()
    header, cols = read_csv(out)
    assert list(cols)[:len(COLUMNS)] == list(COLUMNS)
    assert header["config.name"] == "'quad-bounds'"
    assert "longrun.U.mean" in err


def test_out_file_and_summary(tmp_path, capsys):
    p = tmp_path / "o.csv"
    assert main(["--preset", "quad-bounds", "--replicas", "3", "--horizon", "0.5", "--per-thread",
                 "--out", str(p)]) == EXIT_OK
    summary = capsys.readouterr().out
    raw = p.read_bytes()
    assert b"\r\n" not in raw and raw.endswith(b"\n")
    _, cols = read_csv(raw.decode())
    assert [f"d_{i}" for i in range(10)] == [c for c in cols if c.startswith("d_")]
    for k in ("longrun.U.mean", "bound.phi", "hitting.count"):
        assert k + " = " in summary


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("N = 0\n", encoding="utf-8")
    assert main(["--config", str(p)]) == EXIT_CONFIG
    assert "N:" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG


def test_all_diverged_exit_code(tmp_path, capsys):
    cfg = preset("quad-bounds").replace(step=2.5, horizon=200.0, replicates=2, noise={"sigma": 1.0})
    p = tmp_path / "div.toml"
    p.write_text(to_toml(cfg), encoding="utf-8")
    assert main(["--config", str(p), "--out", str(tmp_path / "o.csv")]) == EXIT_DIVERGED
    text = (tmp_path / "o.csv").read_text()
    assert "# diverged.0" in text and "# diverged.1" in text


@pytest.mark.parametrize("mode", ["flocking", "centralized", "independent"])
def test_header_stable_across_modes(mode):
    cfg = preset("quad-bounds").replace(mode=mode, horizon=0.3, replicates=2)
    text = csv_text(run_experiment(cfg))
    header_row = next(ln for ln in text.splitlines() if not ln.startswith("#"))
    assert header_row == ",".join(COLUMNS)
    _, cols = read_csv(text)
    for r in (0, 1):
        t = cols["t"][cols["replicate"] == r]
        assert np.all(np.diff(t) > 0)


def test_floats_round_trip_exactly():
    res = run_experiment(preset("quad-bounds").replace(horizon=0.3, replicates=2))
    _, cols = read_csv(csv_text(res))
    n = len(res.stats.times)
    np.testing.assert_array_equal(cols["U"][:n], res.stats.values["U"][0])
    np.testing.assert_array_equal(cols["V_bar"][n:], res.stats.values["V_bar"][1])


def test_summary_matches_recomputation_from_csv():
    res = run_experiment(preset("quad-bounds").replace(horizon=2.0, replicates=4))
    _, c = read_csv(csv_text(res))
    again = summarize_columns(c["replicate"], c["t"], c["U"], c["V_bar"], c["diverged"])
    direct = summarize(res)
    for k, v in again.items():
        assert (math.isnan(v) and math.isnan(direct[k])) or v == direct[k], k
