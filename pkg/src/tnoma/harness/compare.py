"""Align BER curves from result files and report SNR gains at matched BER."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .runner import read_results


class GridWarning(UserWarning):
    """SNR grids do not overlap enough for interpolation."""


@dataclass
class Curve:
    name: str
    snr_db: np.ndarray
    value: np.ndarray
    ci95: np.ndarray


def curves_from_rows(rows, metric="ber", user="avg", source=""):
    """One curve per (scenario, label, user), seeds averaged, in first-seen order."""
    groups = {}
    for r in rows:
        if r.metric != metric or (user is not None and r.user != user):
            continue
        key = (r.scenario, r.label, r.user)
        groups.setdefault(key, {}).setdefault(r.snr_db, []).append((r.value, r.ci95))
    out = []
    for (scenario, label, u), pts in groups.items():
        snr = np.array(sorted(pts))
        vals = np.array([np.mean([v for v, _ in pts[s]]) for s in snr])
        cis = np.array([np.sqrt(np.nansum([c**2 for _, c in pts[s]])) / len(pts[s]) for s in snr])
        name = "/".join(x for x in (source, scenario, label, u) if x)
        out.append(Curve(name, snr, vals, cis))
    return out


def load_curves(paths, metric="ber", user="avg", scenario=None):
    out = []
    for p in paths:
        rows = read_results(p)
        if scenario:
            rows = [r for r in rows if r.scenario == scenario]
        out.extend(curves_from_rows(rows, metric, user, source=p if len(paths) > 1 else ""))
    return out


def snr_at(curve, ber):
    """SNR (dB) where ``curve`` reaches ``ber``, linear in log10(BER); NaN if outside."""
    s, v = curve.snr_db, curve.value
    ok = v > 0
    s, lv = s[ok], np.log10(v[ok])
    target = math.log10(ber) if ber > 0 else -math.inf
    for i in range(len(s) - 1):
        lo, hi = lv[i], lv[i + 1]
        if min(lo, hi) <= target <= max(lo, hi):
            if hi == lo:
                return float(s[i])
            return float(s[i] + (target - lo) * (s[i + 1] - s[i]) / (hi - lo))
    if len(s) == 1 and lv[0] == target:
        return float(s[0])
    return math.nan


def matched_deltas(reference, other):
    """Per-SNR gain of ``other`` over ``reference`` in dB at matched BER.

    At each of ``other``'s SNR points, the gain is the SNR the reference
    needs for the same BER minus that SNR point (positive: ``other`` is
    better).  NaN where the reference never reaches that BER.
    """
    lo = max(reference.snr_db.min(), other.snr_db.min())
    hi = min(reference.snr_db.max(), other.snr_db.max())
    if lo > hi or len(reference.snr_db) < 2:
        warnings.warn(f"SNR grids of {reference.name} and {other.name} are disjoint; "
                      "gains cannot be interpolated", GridWarning, stacklevel=2)
    return np.array([snr_at(reference, b) - s for s, b in zip(other.snr_db, other.value)])


def gain_at(reference, other, ber):
    """SNR gain of ``other`` over ``reference`` at a target BER."""
    a, b = snr_at(reference, ber), snr_at(other, ber)
    if math.isnan(a) or math.isnan(b):
        warnings.warn(f"BER {ber:g} is outside the range of {reference.name} or {other.name}",
                      GridWarning, stacklevel=2)
    return a - b


def max_sigma_gap(simulated, theory):
    """Largest |BER_sim - BER_theory| in Monte Carlo standard errors on common SNRs."""
    common = np.intersect1d(simulated.snr_db, theory.snr_db)
    if common.size == 0:
        warnings.warn("no common SNR points", GridWarning, stacklevel=2)
        return math.nan
    z = []
    for s in common:
        i = np.nonzero(simulated.snr_db == s)[0][0]
        j = np.nonzero(theory.snr_db == s)[0][0]
        se = simulated.ci95[i] / 1.959963984540054
        diff = abs(simulated.value[i] - theory.value[j])
        z.append(diff / se if se > 0 else (0.0 if diff == 0 else math.inf))
    return float(max(z))


def summary(curves, target_ber=2e-3):
    """Text table of each curve's gain over the first one."""
    if len(curves) < 2:
        raise ValueError("compare needs at least two curves")
    ref = curves[0]
    lines = [f"reference: {ref.name}", f"{'curve':<48} {'gain@' + format(target_ber, 'g') + ' dB':>14}"
             "  per-SNR gains (dB)"]
    for c in curves[1:]:
        g = gain_at(ref, c, target_ber)
        d = matched_deltas(ref, c)
        per = " ".join(f"{s:g}:{x:+.2f}" if np.isfinite(x) else f"{s:g}:n/a"
                       for s, x in zip(c.snr_db, d))
        lines.append(f"{c.name:<48} {g:>14.2f}  {per}" if np.isfinite(g) else
                     f"{c.name:<48} {'n/a':>14}  {per}")
    return "\n".join(lines)


def plot(curves, path, ylabel="BER"):
    """Static SVG of the curves on a log axis (needs matplotlib)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "tnoma"
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for c in curves:
        ok = c.value > 0
        ax.semilogy(c.snr_db[ok], c.value[ok], marker="o", ms=3, label=c.name)
    ax.set_xlabel("SNR per user (dB)")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
