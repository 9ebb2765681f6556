import csv
import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from tribaker import storage
from tribaker.cli import (EXIT_CACHE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, build_parser,
                          config_from_args, main, run_dir)
from tribaker.config import ConfigError, JobConfig, parse_text
from tribaker.experiments import cmd_fwl

D_HALF = math.log(2) / (2 * math.log(3))


def run(tmp_path, *argv):
    args = list(argv) + ["--out-dir", str(tmp_path / "out"), "--cache-dir", str(tmp_path / "cache")]
    code = main(args)
    cfg = config_from_args(build_parser().parse_args(args)) if code != EXIT_CONFIG else None
    return code, (run_dir(cfg) if cfg is not None else None)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def snapshot(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "run.log"}


# -- config ------------------------------------------------------------------


def test_config_roundtrip():
    cfg = JobConfig(command="performance", family="intersection", k_list=[1, 2, 3], l=6,
                    npos_list=[4, 8], epsilon=0.1, allow_long=True)
    back = JobConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.to_text() == cfg.to_text()
    assert back.hash() == cfg.hash()


def test_config_parsing_and_validation():
    vals = parse_text("# comment\nfamily = shift\nk_list = 1..3, 5\ngamma-c = 0.2\nallow_long = yes\n")
    assert vals == {"family": "shift", "k_list": [1, 2, 3, 5], "gamma_c": 0.2, "allow_long": True}
    for bad in ("nonsense = 1", "k = x", "just words", "allow_long = maybe"):
        with pytest.raises(ConfigError):
            parse_text(bad)
    for kwargs in ({"gamma_c": 0}, {"epsilon": -1}, {"family": "x"}, {"command": "x"},
                   {"l": 8}, {"k": 9, "l": 3}, {"tau": -1}, {"estimator": "x"}):
        with pytest.raises(ConfigError):
            JobConfig(**kwargs)
    JobConfig(l=8, allow_long=True)


def test_hash_covers_thresholds_not_paths():
    a = JobConfig()
    assert a.hash() == JobConfig(out_dir="elsewhere", cache_dir="x").hash()
    for change in ({"epsilon": 0.002}, {"gamma_c": 0.2}, {"floor": 0.02}, {"rank_tol": 1e-9},
                   {"tau": 3}, {"seed": 1}, {"grid": 81}, {"k": 2}):
        assert JobConfig(**change).hash() != a.hash()


def test_specs_skip_k_above_l():
    cfg = JobConfig(k_list=[1, 4, 5], l_list=[4, 5])
    assert [s.label for s in cfg.specs()] == ["shift_k1_l4", "shift_k4_l4", "shift_k1_l5",
                                              "shift_k4_l5", "shift_k5_l5"]
    assert [s.label for s in JobConfig(family="closed", l_list=[2, 3]).specs()] == ["closed_l2", "closed_l3"]


# -- exit codes -----------------------------------------------------------------


def test_config_errors_exit_2(tmp_path):
    assert run(tmp_path, "spectrum", "--gamma-c", "0")[0] == EXIT_CONFIG
    assert run(tmp_path, "spectrum", "--l", "8")[0] == EXIT_CONFIG
    assert run(tmp_path, "spectrum", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("unknown_key = 3\n")
    assert run(tmp_path, "spectrum", "--config", str(bad))[0] == EXIT_CONFIG
    assert run(tmp_path, "fwl", "--l", "4")[0] == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--family", "nope"])
    assert exc.value.code == 2


def test_fit_failure_exits_3(tmp_path):
    # a cutoff this small leaves no long-lived resonance at these sizes
    code, out = run(tmp_path, "fwl", "--family", "shift", "--k", "1", "--l", "2,3", "--gamma-c", "1e-6")
    assert code == EXIT_NUMERICAL
    fit = json.loads((out / "fwl_fit_shift_k1.json").read_text())
    assert "error" in fit
    assert len(read_rows(out / "fwl_shift_k1.csv")) == 2


def test_cache_error_exits_4(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    code = main(["spectrum", "--l", "2", "--cache-dir", str(blocker / "sub"), "--out-dir", str(tmp_path)])
    assert code == EXIT_CACHE


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "job.cfg"
    cfg.write_text("family = intersection\nk = 2\nl = 3\n")
    code, out = run(tmp_path, "spectrum", "--config", str(cfg), "--l", "2")
    assert code == EXIT_OK
    snap = JobConfig.from_text((out / "config.txt").read_text())
    assert (snap.family, snap.k, snap.l) == ("intersection", 2, 2)
    assert out.name == f"spectrum-{snap.hash()[:12]}"


# -- commands ----------------------------------------------------------------------


def test_spectrum_command_and_cache(tmp_path):
    code, out = run(tmp_path, "spectrum", "--family", "shift", "--k", "1", "--l", "4")
    assert code == EXIT_OK
    rows = read_rows(out / "spectrum_shift_k1_l4.csv")
    assert len(rows) == 81
    assert float(rows[-1]["n_over_N"]) == 1.0
    first = snapshot(out)
    code, again = run(tmp_path, "spectrum", "--family", "shift", "--k", "1", "--l", "4")
    assert again == out and snapshot(again) == first
    assert "served from cache" in (out / "run.log").read_text()


def test_fwl_injected_spectra_recover_exponent(tmp_path):
    # N_mu = 2^(l/2) = N^(ln2 / (2 ln3)) exactly for even l
    def source(spec):
        n_long = 2 ** (spec.l // 2)
        return np.concatenate([np.ones(n_long), np.zeros(spec.N - n_long)]).astype(complex)

    cfg = JobConfig(command="fwl", family="shift", k_list=[1], l_list=[2, 4, 6])
    summary = cmd_fwl(cfg, tmp_path, None, spectrum_source=source)
    assert abs(summary["shift_k1"]["exponent"] - D_HALF) < 1e-12


def test_fwl_intersection_sweep_gives_fit_per_member(tmp_path):
    def source(spec):
        n_long = 3 ** (spec.l // 2) * spec.k
        return np.concatenate([np.ones(n_long), np.zeros(spec.N - n_long)]).astype(complex)

    cfg = JobConfig(command="fwl", family="intersection", k_list=[1, 2, 3, 4], l_list=[4, 6])
    summary = cmd_fwl(cfg, tmp_path, None, spectrum_source=source)
    assert sorted(summary) == [f"intersection_k{k}" for k in range(1, 5)]
    assert len(list(tmp_path.glob("fwl_fit_*.json"))) == 4
    for rec in summary.values():
        assert abs(rec["exponent"] - 0.5) < 1e-12


def test_performance_epsilon_monotone(tmp_path):
    args = ["performance", "--family", "shift", "--k", "1,2", "--l", "4", "--npos", "4,8,12"]
    code, narrow = run(tmp_path, *args)
    assert code == EXIT_OK
    code, wide = run(tmp_path, *args, "--epsilon", "0.1")
    assert code == EXIT_OK
    a, b = read_rows(narrow / "performance.csv"), read_rows(wide / "performance.csv")
    assert len(a) == len(b) == 6
    for ra, rb in zip(a, b):
        assert (ra["k"], ra["N_POs"]) == (rb["k"], rb["N_POs"])
        assert float(rb["P"]) >= float(ra["P"])


def test_qfield_outputs(tmp_path):
    code, out = run(tmp_path, "qfield", "--l", "4", "--npos", "12", "--j", "1", "--grid", "27")
    assert code == EXIT_OK
    rasters = sorted(p.name for p in out.glob("*.ras"))
    assert rasters == ["qfield_exact_shift_k1_l4.ras", "qfield_exact_shift_k3_l4.ras",
                       "qfield_shortpo_shift_k1_l4.ras", "qfield_shortpo_shift_k3_l4.ras"]
    values, meta = storage.load_raster(out / rasters[0])
    assert values.shape == (27, 27) and meta["j"] == 1
    report = json.loads((out / "distances.json").read_text())
    assert set(report["distances"]) == {"shift_k1_l4", "shift_k3_l4"}


def test_qfield_too_many_modes_is_numerical_failure(tmp_path):
    code, _ = run(tmp_path, "qfield", "--l", "3", "--npos", "2", "--j", "20", "--grid", "9", "--k", "1,2")
    assert code == EXIT_NUMERICAL


def test_classical_command(tmp_path):
    code, out = run(tmp_path, "classical", "--family", "shift", "--k", "1,3", "--l", "6",
                    "--n-samples", "200000", "--t-max", "16")
    assert code == EXIT_OK
    summary = json.loads((out / "classical_summary.json").read_text())["members"]
    r1, r3 = summary["shift_k1_l6"]["escape_rate"], summary["shift_k3_l6"]["escape_rate"]
    assert abs(r1 - r3) < 0.05 * r1
    assert abs(r1 - math.log(1.5)) < 0.05 * math.log(1.5)
    t1 = summary["shift_k1_l6"]["transient"]
    t3 = summary["shift_k3_l6"]["transient"]
    assert abs(t1[0] - t3[0]) > 0.05
    code, out = run(tmp_path, "classical", "--family", "closed", "--l", "3", "--n-samples", "1000")
    assert code == EXIT_OK
    rows = read_rows(out / "survival_closed_l3.csv")
    assert all(float(r["surviving_fraction"]) == 1.0 for r in rows)


def test_orbits_command(tmp_path):
    code, out = run(tmp_path, "orbits", "--l-max", "6")
    assert code == EXIT_OK
    counts = json.loads((out / "orbit_counts.json").read_text())
    assert all(v["found"] == v["necklace_formula"] for v in counts.values())
    rows = read_rows(out / "orbits.csv")
    assert rows[0] == {"period": "1", "canonical_word": "0", "point_index": "0", "q": "0.0", "p": "0.0"}


@pytest.mark.parametrize("argv", [
    ["spectrum", "--l", "3", "--k", "1..3"],
    ["fwl", "--family", "intersection", "--k", "1", "--l", "3,4", "--gamma-c", "1.5"],
    ["performance", "--l", "3", "--k", "1,2", "--npos", "3,6"],
    ["qfield", "--l", "3", "--npos", "6", "--j", "4", "--grid", "9"],
    ["classical", "--l", "4", "--k", "2", "--n-samples", "5000", "--seed", "11"],
    ["orbits", "--l-max", "5"],
])
def test_commands_deterministic(tmp_path, argv):
    code1, out = run(tmp_path, *argv)
    first = snapshot(out)
    # recompute from scratch: no cache, no previous outputs
    shutil.rmtree(tmp_path / "out")
    shutil.rmtree(tmp_path / "cache")
    code2, again = run(tmp_path, *argv)
    assert code1 == code2 == EXIT_OK
    assert again == out
    assert snapshot(again) == first


def test_run_dir_named_by_hash():
    cfg = JobConfig(command="orbits", out_dir="x")
    assert run_dir(cfg) == Path("x") / f"orbits-{cfg.hash()[:12]}"
