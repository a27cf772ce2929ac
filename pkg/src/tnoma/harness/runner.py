"""Scenario execution, result rows and run manifests."""

import csv
import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from .. import __version__
from .. import analysis as an
from .. import ae
from .. import channel as ch
from .. import svd
from ..nn.losses import qfunc
from ..seeding import stream
from .config import ExperimentConfig, build_config

OUTPUT_ROOT_ENV = "TNOMA_OUTPUT_ROOT"
RESULTS_FILE = "results.csv"
MANIFEST_FILE = "manifest.json"
CURVE_FILE = "learning_curve.csv"
COMPLEXITY_FILE = "complexity.csv"
METRICS = ("ber", "rate_bits_s_hz", "loss_ce", "loss_q")
BANDWIDTH = 0.5  # W = 1/(2T) with T = 1
# fading counters outside the frame splits (0, 1, 2)
SELECTION_STREAM, RATES_STREAM = 100, 101


@dataclass
class ResultRow:
    scenario: str
    label: str
    snr_db: float
    user: str
    metric: str
    value: float
    ci95: float
    frames: int
    seed: int
    config_hash: str


RESULT_HEADER = [f.name for f in fields(ResultRow)]


def _cell(v):
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(v)
    return str(v)


class ResultSink:
    """Single writer for the results CSV; rows are appended in arrival order."""

    def __init__(self, path):
        self.path = path
        self.count = 0
        with open(path, "w", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(RESULT_HEADER)

    def extend(self, rows):
        with open(self.path, "a", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            for r in rows:
                if r.metric not in METRICS:
                    raise ValueError(f"unknown metric {r.metric!r}")
                w.writerow([_cell(v) for v in astuple(r)])
                self.count += 1


def read_results(path):
    """Rows of a results CSV as ResultRow objects (empty cells become NaN)."""
    out = []
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if header != RESULT_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in rd:
            d = dict(zip(header, rec))
            out.append(ResultRow(d["scenario"], d["label"], float(d["snr_db"]), d["user"],
                                 d["metric"], float(d["value"]) if d["value"] else math.nan,
                                 float(d["ci95"]) if d["ci95"] else math.nan, int(d["frames"]),
                                 int(d["seed"]), d["config_hash"]))
    return out


def resolve_output_dir(cfg):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(cfg.output_dir):
        return os.path.join(root, cfg.output_dir)
    return cfg.output_dir


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

def _bank(cfg):
    pulse = ch.PulseSpec(cfg.rolloff, cfg.span)
    return ch.build_crosscorr_bank(pulse, ch.design_offsets(cfg.K, cfg.tau_design))


def interference_gain(cfg):
    """G_{2,1} of the configured nominal bank (0 for a single user)."""
    return _bank(cfg).interference_gain(1, 0) if cfg.K > 1 else 0.0


def _ber_rows(scenario, label, snr, ber, ci, ber_avg, ci_avg, frames, seed):
    rows = []
    for si, s in enumerate(snr):
        for r in range(ber.shape[1]):
            rows.append(ResultRow(scenario, label, float(s), str(r), "ber", float(ber[si, r]),
                                  float(ci[si, r]), frames, seed, ""))
        rows.append(ResultRow(scenario, label, float(s), "avg", "ber", float(ber_avg[si]),
                              float(ci_avg[si]), frames, seed, ""))
    return rows


def run_svd_ber(cfg, label, seed, out_dir):
    res = svd.simulate_svd_ber(cfg.snr_db, cfg.test_frames, cfg.K, cfg.N, cfg.rolloff, cfg.span,
                               cfg.tau_design, seed, cfg.timing_width_symbols, cfg.csi_variance,
                               cfg.power_per_user, waterfill_mode=cfg.waterfill,
                               shared_csi=cfg.shared_csi)
    return _ber_rows("svd-ber", label, res.snr_db, res.ber, res.ci95, res.ber_avg, res.ci95_avg,
                     cfg.test_frames, seed), {}


def system_config(cfg, seed):
    return ae.SystemConfig(variant=cfg.variant.upper(), K=cfg.K, N=cfg.N, rolloff=cfg.rolloff,
                           span=cfg.span, tau=cfg.tau_design, power_per_user=cfg.power_per_user,
                           loss=cfg.loss, skips=tuple(cfg.skips), use_pa=cfg.use_pa,
                           use_t=cfg.use_t, pa_hidden=tuple(cfg.pa_hidden),
                           t_hidden=tuple(cfg.t_hidden), seed=seed)


def train_config(cfg, seed, checkpoint_path=None):
    return ae.TrainConfig(frames=cfg.train_frames, batch=cfg.batch, epochs=cfg.epochs, lr=cfg.lr,
                          snr_db=cfg.train_snr_db, alpha=cfg.alpha, kappa=cfg.kappa,
                          timing_width=cfg.timing_width_symbols, csi_variance=cfg.csi_variance,
                          shared_csi=cfg.shared_csi, valid_frames=cfg.valid_frames, seed=seed,
                          checkpoint_path=checkpoint_path)


def _checkpoint_path(cfg, label, seed, out_dir):
    if cfg.checkpoint:
        base = cfg.checkpoint
        if len(cfg.seeds) > 1 or label:
            stem = base[:-5] if base.endswith(".ckpt") else base
            tag = label.replace("=", "-").replace(",", "_")
            base = f"{stem}{'_' + tag if tag else ''}_seed{seed}.ckpt"
        return base
    tag = label.replace("=", "-").replace(",", "_") or "base"
    return os.path.join(out_dir, "checkpoints", f"ae_{tag}_seed{seed}.ckpt")


def _eval_rows(system, cfg, label, seed, scenario):
    res = ae.evaluate(system, cfg.snr_db, cfg.test_frames, cfg.timing_width_symbols,
                      cfg.csi_variance, seed=seed, shared_csi=cfg.shared_csi)
    return _ber_rows(scenario, label, res.snr_db, res.ber, res.ci95, res.ber_avg, res.ci95_avg,
                     cfg.test_frames, seed)


def run_ae_train(cfg, label, seed, out_dir):
    path = _checkpoint_path(cfg, label, seed, out_dir)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    system = ae.build_system(system_config(cfg, seed))
    curve = ae.train(system, train_config(cfg, seed, path))
    last = [row for row in curve if row["epoch"] == cfg.epochs and row["iteration"] > 0]
    rows = _eval_rows(system, cfg, label, seed, "ae-train")
    for metric, key in (("loss_ce", "J_CE"), ("loss_q", "J_Q")):
        vals = np.array([row[key] for row in last], dtype=float)
        value = float(vals.mean()) if vals.size and np.all(np.isfinite(vals)) else math.nan
        if math.isfinite(value):
            rows.append(ResultRow("ae-train", label, float(cfg.train_snr_db), "avg", metric,
                                  value, math.nan, cfg.train_frames, seed, ""))
    return rows, {"curve": [(label, seed, row) for row in curve]}


def run_ae_eval(cfg, label, seed, out_dir):
    system, _, _ = ae.load_system(cfg.checkpoint)
    return _eval_rows(system, cfg, label, seed, "ae-eval"), {}


def _mean_ci(samples):
    n = samples.size
    sd = samples.std(ddof=1) if n > 1 else 0.0
    return float(samples.mean()), float(svd.Z95 * sd / math.sqrt(n))


def selection_snrs(cfg):
    """Average per-user fading SNR 1/N0 for each configured SNR point."""
    return [1.0 / float(ch.snr_to_n0(s)) for s in cfg.snr_db]


def run_user_selection(cfg, label, seed, out_dir):
    """Monte Carlo average of the selection BERs over sorted exponential draws.

    The weaker user treats the stronger user's interference G_{2,1} P_s gamma
    as Gaussian noise, the same model the closed forms assume.
    """
    g21 = interference_gain(cfg)
    p = cfg.power_per_user
    e = stream(seed, "fading", SELECTION_STREAM).exponential(size=(2, cfg.theory_draws))
    rows = []
    for s, abar in zip(cfg.snr_db, selection_snrs(cfg)):
        g = abar * e
        strong, weak = g.max(axis=0), g.min(axis=0)
        for user, ber in (("strong", qfunc(np.sqrt(2.0 * p * strong))),
                          ("weak", qfunc(np.sqrt(2.0 * p * weak / (1.0 + g21 * p * weak))))):
            m, c = _mean_ci(np.asarray(ber))
            rows.append(ResultRow("user-selection-ber", label, float(s), user, "ber", m, c,
                                  cfg.theory_draws, seed, ""))
    return rows, {}


def run_ber_theory(cfg, label, seed, out_dir):
    g21 = interference_gain(cfg)
    p = cfg.power_per_user
    rows = []
    for s, abar in zip(cfg.snr_db, selection_snrs(cfg)):
        vals = (("strong", an.ber_strong_closed(abar, abar, 1.0, 2.0, p)),
                ("weak", an.ber_weak_numeric(abar, abar, 1.0, 2.0, p, p, g21)),
                ("single", float(an.single_user_ber_rayleigh(p * abar))))
        for user, v in vals:
            rows.append(ResultRow("ber-theory", label, float(s), user, "ber", float(v), 0.0, 0,
                                  seed, ""))
    return rows, {}


def run_rates(cfg, label, seed, out_dir):
    """Selection closed forms and the fading-averaged water-filled SVD rate.

    The average fading SNR is 1/(W N0) with W = 1/(2T); SVD powers are
    water-filled against the same noise level W N0.
    """
    bank = _bank(cfg)
    G = ch.build_channel_matrix(bank, cfg.K, cfg.N)
    lam = svd.subchannel_gains(G)
    owner = np.arange(lam.size) % cfg.K
    g21 = interference_gain(cfg)
    p = cfg.power_per_user
    h = ch.draw_fading(stream(seed, "fading", RATES_STREAM), cfg.K, size=cfg.rate_draws).h
    rows = []
    for s in cfg.snr_db:
        n0 = float(ch.snr_to_n0(s))
        abar = 1.0 / (BANDWIDTH * n0)
        rate = np.empty(cfg.rate_draws)
        for d in range(cfg.rate_draws):
            power = svd.waterfill(lam, h[d], BANDWIDTH * n0, cfg.K * p, cfg.N, cfg.K,
                                  mode=cfg.waterfill)
            rate[d] = an.rate_svd(lam, power, h[d][owner], n0, BANDWIDTH, cfg.K, cfg.N)
        m, c = _mean_ci(rate)
        rows.append(ResultRow("rates", label, float(s), "svd", "rate_bits_s_hz", m, c,
                              cfg.rate_draws, seed, ""))
        if cfg.K == 2:
            rs = an.rate_strong_closed(abar, abar, p, BANDWIDTH)
            rw = an.rate_weak_closed(abar, abar, p, p, g21, BANDWIDTH)
            for user, v in (("strong", rs), ("weak", rw), ("avg", 0.5 * (rs + rw))):
                rows.append(ResultRow("rates", label, float(s), user, "rate_bits_s_hz", float(v),
                                      0.0, 0, seed, ""))
        rows.append(ResultRow("rates", label, float(s), "single", "rate_bits_s_hz",
                              float(an.rate_single_closed(p * abar, BANDWIDTH)), 0.0, 0, seed, ""))
    return rows, {}


COMPLEXITY_HEADER = ["label", "variant", "method", "printed_flops", "formula_flops",
                     "measured_macs", "printed_storage", "formula_storage", "measured_params",
                     "note"]


def _complexity_cell(key, v):
    if v is None:
        return ""
    if key.startswith("printed"):
        return an.format_printed(v)
    return _cell(v)


def run_complexity(cfg, label, seed, out_dir):
    scfg = dataclasses.replace(system_config(cfg, seed), use_pa=True, use_t=True)
    system = ae.build_system(scfg)
    measured = ae.measure_complexity(system)
    G = ch.build_channel_matrix(system.bank, cfg.K, cfg.N)
    measured.update(svd.svd_complexity(svd.build_codec(G)))
    report = an.complexity_report(system.variant, cfg.K, cfg.N, tuple(cfg.pa_hidden),
                                  tuple(cfg.t_hidden), measured)
    return [], {"complexity": [(label, cfg.variant.upper(), row) for row in report]}


SCENARIO_FUNCS = {
    "svd-ber": run_svd_ber,
    "ae-train": run_ae_train,
    "ae-eval": run_ae_eval,
    "user-selection-ber": run_user_selection,
    "ber-theory": run_ber_theory,
    "rates": run_rates,
    "complexity": run_complexity,
}


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def jobs(cfg):
    """(scenario, label, concrete config, seed) in output order."""
    out = []
    for scenario in cfg.scenarios():
        seeds = (cfg.seeds[0],) if scenario in ("ber-theory", "complexity") else cfg.seeds
        for label, sub in cfg.sweep():
            for seed in seeds:
                out.append((scenario, label, sub, seed))
    return out


def _run_job(job, out_dir):
    scenario, label, sub, seed = job
    return SCENARIO_FUNCS[scenario](sub, label, seed, out_dir)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def run(cfg, log=None):
    """Execute every job of ``cfg``; returns the output directory.

    Writes results.csv, optional learning_curve.csv / complexity.csv and a
    manifest.json holding the fully resolved config and file digests.
    """
    if not isinstance(cfg, ExperimentConfig):
        raise TypeError("run expects an ExperimentConfig")
    out_dir = resolve_output_dir(cfg)
    os.makedirs(out_dir, exist_ok=True)
    chash = cfg.config_hash()
    sink = ResultSink(os.path.join(out_dir, RESULTS_FILE))
    todo = jobs(cfg)
    curves, complexity = [], []

    def collect(job, result):
        rows, extra = result
        for r in rows:
            r.config_hash = chash
        sink.extend(rows)
        curves.extend(extra.get("curve", []))
        complexity.extend(extra.get("complexity", []))
        if log is not None:
            log(f"{job[0]} {job[1] or '-'} seed {job[3]}: {len(rows)} rows")

    if cfg.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_job, job, out_dir) for job in todo]
            for job, fut in zip(todo, futures):
                collect(job, fut.result())
    else:
        for job in todo:
            collect(job, _run_job(job, out_dir))

    files = [RESULTS_FILE]
    if curves:
        with open(os.path.join(out_dir, CURVE_FILE), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["label", "seed", "iteration", "epoch", "J_CE", "J_Q", "BER_val"])
            for label, seed, row in curves:
                w.writerow([label, seed, row["iteration"], row["epoch"]] +
                           [_cell(float(row[k])) for k in ("J_CE", "J_Q", "BER_val")])
        files.append(CURVE_FILE)
    if complexity:
        with open(os.path.join(out_dir, COMPLEXITY_FILE), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(COMPLEXITY_HEADER)
            for label, variant, row in complexity:
                w.writerow([label, variant] + [_complexity_cell(k, row[k])
                                               for k in COMPLEXITY_HEADER[2:]])
        files.append(COMPLEXITY_FILE)
    manifest = {
        "package_version": __version__,
        "config_hash": chash,
        "config": cfg.to_dict(),
        "rows": sink.count,
        "files": {name: _sha256(os.path.join(out_dir, name)) for name in files},
    }
    with open(os.path.join(out_dir, MANIFEST_FILE), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return out_dir


def load_manifest_config(path):
    """Rebuild the config recorded in a manifest and check its hash."""
    with open(path) as f:
        manifest = json.load(f)
    values = {k: (",".join(map(str, v)) if k != "sweep_values" else ";".join(map(str, v)))
              if isinstance(v, list) else str(v) for k, v in manifest["config"].items()}
    cfg = build_config(None, values)
    if cfg.config_hash() != manifest["config_hash"]:
        raise ValueError(f"{path}: config hash mismatch (manifest {manifest['config_hash']}, "
                         f"rebuilt {cfg.config_hash()})")
    return cfg
