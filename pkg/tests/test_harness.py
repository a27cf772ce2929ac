import json
import math
import os
import warnings

import numpy as np
import pytest

from tnoma.harness import compare as cmp
from tnoma.harness import runner
from tnoma.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from tnoma.harness.config import (ConfigError, ExperimentConfig, build_config, config_to_kv_text,
                                  parse_kv_text, parse_value)
from tnoma.harness.presets import preset, preset_names

SMALL = dict(scenario="svd-ber,ber-theory,user-selection-ber,rates", N=64,
             snr_db=(10.0, 20.0), test_frames=64, rate_draws=20, theory_draws=2000)


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv(runner.OUTPUT_ROOT_ENV, str(tmp_path))
    return tmp_path


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


# -- config -------------------------------------------------------------------

@pytest.mark.parametrize("field,value", [("K", 0), ("N", 5), ("rolloff", 1.5), ("span", 4),
                                         ("tau_design", 1.0), ("loss", "hinge"),
                                         ("variant", "AE10"), ("snr_db", ()), ("lr", 0.0),
                                         ("scenario", "bogus"), ("waterfill", "x")])
def test_bounds_name_the_field(field, value):
    with pytest.raises(ConfigError, match=f"^{field}:"):
        ExperimentConfig(**{field: value})


def test_eval_needs_checkpoint():
    with pytest.raises(ConfigError, match="checkpoint"):
        ExperimentConfig(scenario="ae-eval")


def test_sweep_validation():
    with pytest.raises(ConfigError, match="sweep_key"):
        ExperimentConfig(sweep_key="seeds", sweep_values=("1",))
    with pytest.raises(ConfigError, match="sweep_values"):
        ExperimentConfig(sweep_key="K", sweep_values=("0",))
    with pytest.raises(ConfigError, match="sweep_values"):
        ExperimentConfig(sweep_key="use_pa,use_t", sweep_values=("true",))


def test_parse_values():
    assert parse_value("snr_db", "0:10:5") == (0.0, 5.0, 10.0)
    assert parse_value("snr_db", "1, 2") == (1.0, 2.0)
    assert parse_value("use_pa", "yes") is True
    assert parse_value("K", "4") == 4
    assert parse_value("sweep_values", "a/b; c/d") == ("a/b", "c/d")
    for key, text in (("K", "two"), ("use_pa", "maybe"), ("nope", "1")):
        with pytest.raises(ConfigError):
            parse_value(key, text)


def test_kv_text_round_trip():
    kv = parse_kv_text("# comment\nK = 2  # users\n\nsnr_db = 0:20:10\n")
    assert kv == {"K": "2", "snr_db": "0:20:10"}
    with pytest.raises(ConfigError, match="line 1"):
        parse_kv_text("K 2")
    cfg = build_config(None, {"N": "128", "skips": "a,c", "sweep_key": "alpha",
                              "sweep_values": "0.0;0.1"})
    again = build_config(None, parse_kv_text(config_to_kv_text(cfg)))
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_sweep_labels_and_hash():
    cfg = ExperimentConfig(sweep_key="use_pa,use_t", sweep_values=("true/false", "true/true"))
    labels = [(lab, c.use_pa, c.use_t) for lab, c in cfg.sweep()]
    assert labels == [("use_pa=true,use_t=false", True, False), ("use_pa=true,use_t=true", True, True)]
    a, b = ExperimentConfig(), ExperimentConfig(output_dir="elsewhere", workers=4)
    assert a.config_hash() == b.config_hash()
    assert ExperimentConfig(N=256).config_hash() != a.config_hash()


def test_timing_width_is_fraction_of_offset():
    assert ExperimentConfig(timing_width=0.16, tau_design=0.5).timing_width_symbols == 0.08


# -- presets ------------------------------------------------------------------

def test_presets():
    names = preset_names()
    assert {"fig4", "fig6", "fig7", "fig8", "fig9", "fig11", "fig12", "fig14"} <= set(names)
    for n in names:
        for scale in ("desk", "full"):
            cfg = preset(n, scale)
            assert cfg.output_dir == f"results/{n}-{scale}"
    full = preset("fig12", "full")
    assert full.timing_width == 0.16 and full.csi_variance == 0.01
    assert full.train_frames == 131072 and full.epochs == 20 and full.batch == 32
    desk = preset("fig4", "desk")
    assert desk.N == 512 and desk.tau_design == 0.5 and desk.train_frames < full.train_frames
    f14 = preset("fig14")
    assert f14.power_per_user * f14.K == 2.0 and f14.waterfill == "printed"
    with pytest.raises(KeyError):
        preset("fig99")
    with pytest.raises(ValueError):
        preset("fig4", "huge")


# -- runs ---------------------------------------------------------------------

def test_run_writes_results_and_manifest(out_root):
    cfg = small(output_dir="a")
    out = runner.run(cfg)
    assert out == os.path.join(str(out_root), "a")
    rows = runner.read_results(os.path.join(out, runner.RESULTS_FILE))
    scen = {r.scenario for r in rows}
    assert scen == {"svd-ber", "ber-theory", "user-selection-ber", "rates"}
    assert all(r.config_hash == cfg.config_hash() for r in rows)
    svd_users = {r.user for r in rows if r.scenario == "svd-ber"}
    assert svd_users == {"0", "1", "avg"}
    rate_users = {r.user for r in rows if r.scenario == "rates"}
    assert rate_users == {"svd", "strong", "weak", "avg", "single"}
    with open(os.path.join(out, runner.MANIFEST_FILE)) as f:
        manifest = json.load(f)
    assert manifest["rows"] == len(rows)
    assert manifest["files"][runner.RESULTS_FILE] == runner._sha256(
        os.path.join(out, runner.RESULTS_FILE))
    assert runner.load_manifest_config(os.path.join(out, runner.MANIFEST_FILE)) == cfg


def test_run_is_deterministic(out_root):
    a = runner.run(small(output_dir="a", timing_width=0.1, csi_variance=0.01))
    b = runner.run(small(output_dir="b", timing_width=0.1, csi_variance=0.01))
    for name in (runner.RESULTS_FILE, runner.MANIFEST_FILE):
        with open(os.path.join(a, name), "rb") as fa, open(os.path.join(b, name), "rb") as fb:
            left, right = fa.read(), fb.read()
        if name == runner.MANIFEST_FILE:
            left = left.replace(b'"output_dir": "a"', b"")
            right = right.replace(b'"output_dir": "b"', b"")
        assert left == right


def test_manifest_hash_mismatch_is_rejected(out_root):
    out = runner.run(small(output_dir="a", scenario="ber-theory"))
    path = os.path.join(out, runner.MANIFEST_FILE)
    with open(path) as f:
        manifest = json.load(f)
    manifest["config"]["N"] = 128
    with open(path, "w") as f:
        json.dump(manifest, f)
    with pytest.raises(ValueError, match="hash mismatch"):
        runner.load_manifest_config(path)


def test_complexity_scenario(out_root):
    out = runner.run(ExperimentConfig(scenario="complexity", output_dir="c"))
    with open(os.path.join(out, runner.COMPLEXITY_FILE)) as f:
        lines = f.read().splitlines()
    assert lines[0].split(",") == runner.COMPLEXITY_HEADER
    by_method = {ln.split(",")[2]: ln.split(",") for ln in lines[1:]}
    assert set(by_method) == {"svd_encoder", "svd_decoder", "cnn_encoder", "cnn_decoder",
                              "mlp_pa", "mlp_t"}
    assert by_method["cnn_decoder"][3] == "4.0550e5"
    assert by_method["svd_decoder"][5] == str(1012 ** 2)


def test_user_selection_matches_theory(out_root):
    cfg = small(scenario="ber-theory,user-selection-ber", snr_db=(0.0, 10.0, 20.0),
                theory_draws=200_000, output_dir="t")
    rows = runner.read_results(os.path.join(runner.run(cfg), runner.RESULTS_FILE))
    for user in ("strong", "weak"):
        sim = cmp.curves_from_rows([r for r in rows if r.scenario == "user-selection-ber"],
                                   user=user)[0]
        th = cmp.curves_from_rows([r for r in rows if r.scenario == "ber-theory"], user=user)[0]
        assert cmp.max_sigma_gap(sim, th) < 3.0


def test_rates_svd_exceeds_single_user(out_root):
    rows = runner.read_results(os.path.join(runner.run(small(scenario="rates", output_dir="r")),
                                            runner.RESULTS_FILE))
    val = {(r.snr_db, r.user): r.value for r in rows}
    for s in (10.0, 20.0):
        assert val[(s, "weak")] < val[(s, "strong")]
        assert val[(s, "avg")] == pytest.approx(0.5 * (val[(s, "weak")] + val[(s, "strong")]))


# -- compare ------------------------------------------------------------------

def curve(name, snr, ber):
    snr, ber = np.asarray(snr, float), np.asarray(ber, float)
    return cmp.Curve(name, snr, ber, 0.1 * ber)


def test_identical_curves_have_zero_gain():
    c = curve("a", [0, 10, 20, 30], [0.1, 0.01, 1e-3, 1e-4])
    assert cmp.gain_at(c, c, 2e-3) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(cmp.matched_deltas(c, c), 0.0, atol=1e-12)


def test_shifted_curve_gain():
    a = curve("a", [0, 10, 20, 30], [0.1, 0.01, 1e-3, 1e-4])
    b = curve("b", [0, 10, 20, 30], [0.01, 1e-3, 1e-4, 1e-5])
    assert cmp.gain_at(a, b, 2e-3) == pytest.approx(10.0, abs=1e-9)
    assert cmp.snr_at(a, 1e-9) != cmp.snr_at(a, 1e-9)  # NaN outside the curve


def test_disjoint_grids_warn():
    a = curve("a", [0, 10], [0.1, 0.01])
    b = curve("b", [30, 40], [1e-3, 1e-4])
    with pytest.warns(cmp.GridWarning):
        d = cmp.matched_deltas(a, b)
    assert np.all(np.isnan(d))
    with pytest.warns(cmp.GridWarning):
        assert math.isnan(cmp.gain_at(a, b, 1e-5))


def test_summary_needs_two_curves():
    with pytest.raises(ValueError):
        cmp.summary([curve("a", [0, 10], [0.1, 0.01])])


def test_plot_writes_svg(tmp_path):
    pytest.importorskip("matplotlib")
    path = tmp_path / "p.svg"
    cmp.plot([curve("a", [0, 10], [0.1, 0.01]), curve("b", [0, 10], [0.05, 0.0])], str(path))
    assert path.read_text().lstrip().startswith("<?xml")


# -- CLI ----------------------------------------------------------------------

def test_cli_exit_codes(out_root, capsys):
    assert main(["preset", "--list"]) == EXIT_OK
    assert "fig14" in capsys.readouterr().out
    assert main(["preset", "fig8"]) == EXIT_OK
    assert "variant = AE5" in capsys.readouterr().out
    assert main(["run", "--K", "0"]) == EXIT_CONFIG
    assert "config error: K:" in capsys.readouterr().err
    assert main(["preset", "fig99"]) == EXIT_CONFIG
    assert main(["run", "--config", str(out_root / "missing.cfg")]) == EXIT_CONFIG
    # checkpoint file does not exist: fails at run time
    assert main(["run", "--scenario", "ae-eval", "--checkpoint", str(out_root / "no.ckpt"),
                 "--quiet"]) == EXIT_RUNTIME
    assert "error:" in capsys.readouterr().err


def test_cli_run_and_compare(out_root, capsys):
    cfg_file = out_root / "run.cfg"
    cfg_file.write_text("scenario = ber-theory,user-selection-ber\nN = 64\n"
                        "snr_db = 0:20:10\ntheory_draws = 20000\noutput_dir = cli\n")
    assert main(["run", "--config", str(cfg_file), "--quiet"]) == EXIT_OK
    results = capsys.readouterr().out.strip()
    assert results == os.path.join(str(out_root), "cli", "results.csv")
    manifest = os.path.join(os.path.dirname(results), "manifest.json")
    assert main(["run", "--config", manifest, "--output-dir", "cli2", "--quiet"]) == EXIT_OK
    capsys.readouterr()
    with open(results) as f, open(os.path.join(str(out_root), "cli2", "results.csv")) as g:
        assert f.read() == g.read()
    assert main(["compare", results, os.path.join(str(out_root), "cli2", "results.csv"),
                 "--user", "weak", "--target-ber", "0.05"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "reference:" in out and "0.00" in out
