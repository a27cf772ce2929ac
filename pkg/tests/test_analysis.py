import math

import numpy as np
import pytest
from scipy import integrate, special

from tnoma import ae
from tnoma import analysis as an
from tnoma import channel as ch
from tnoma.nn.losses import qfunc

W = 0.5


def g21_nominal():
    bank = ch.build_crosscorr_bank(ch.PulseSpec(1.0, 7), ch.design_offsets(2, 0.5))
    return bank.interference_gain(1, 0)


def exp_draws(mean, n, seed):
    return np.random.default_rng(seed).exponential(mean, n)


# -- special functions --------------------------------------------------------

def test_e1_matches_quadrature():
    ref, _ = integrate.quad(lambda t: math.exp(-t) / t, 1.0, np.inf, epsabs=1e-14, epsrel=1e-13)
    assert an.exp_integral_E1(1.0) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("x", np.logspace(-6, 2.5, 25))
def test_e1_matches_reference(x):
    assert an.exp_integral_E1(x) == pytest.approx(float(special.exp1(x)), rel=1e-10)
    assert an.exp_e1(x) == pytest.approx(float(special.exp1(x) * np.exp(x)), rel=1e-10)


def test_e1_small_argument_series():
    x = 1e-8
    assert abs(an.exp_integral_E1(x) - (-an.EULER_GAMMA - math.log(x))) < 1e-6


def test_e1_monotone_and_errors():
    assert an.exp_integral_E1(2.0) < an.exp_integral_E1(1.0)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            an.exp_integral_E1(bad)


def test_scaled_e1_bounds_and_large_arguments():
    x = np.logspace(-4, 4, 200)
    f = np.array([an.exp_e1(v) for v in x])
    assert np.all(np.diff(f) < 0)
    assert np.all(f > 1 / (1 + x)) and np.all(f < 1 / x)
    # no overflow far beyond exp() range
    assert an.exp_e1(1e4) == pytest.approx(1 / (1e4 + 1), rel=1e-4)


# -- rates --------------------------------------------------------------------

def test_rate_svd_sanity():
    lam = np.array([1.0, 0.5])
    assert an.rate_svd(lam, np.zeros(2), np.ones(2), 1.0, W, 1, 2) == 0.0
    # one subchannel with P |h|^2 lam^2 / (W sigma^2) = 1 -> W log2(2) / (K N)
    r = an.rate_svd(np.array([1.0]), np.array([W]), np.array([1.0]), 1.0, W, 2, 4)
    assert r == pytest.approx(W / 8, abs=1e-15)


def test_rate_strong_symmetric_reduction():
    a, ps = 7.0, 1.3
    c1 = 1 / (ps * a)
    expect = W * an.LOG2E * (2 * an.exp_e1(c1) - an.exp_e1(2 * c1))
    assert an.rate_strong_closed(a, a, ps, W) == pytest.approx(expect, rel=1e-14)


def test_rate_limits():
    assert an.rate_strong_closed(1e-9, 1e-9, 1.0, W) < 1e-8
    assert an.rate_strong_closed(0.0, 1.0, 1.0, W) == 0.0
    assert an.rate_weak_closed(1.0, 1.0, 0.0, 0.0, 0.5, W) == 0.0
    assert an.rate_single_closed(0.0) == 0.0


def test_rate_weak_without_interference_is_min_snr_rate():
    a1, a2, pw = 5.0, 20.0, 1.0
    c = (a1 + a2) / (a1 * a2)
    assert an.rate_weak_closed(a1, a2, 1.0, pw, 0.0, W) == pytest.approx(
        W * an.LOG2E * an.exp_e1(c / pw), rel=1e-14)


def test_rate_weak_saturates():
    g = g21_nominal()
    limit = W * math.log2(1 + 1.0 / (g * 1.0))
    assert an.rate_weak_closed(1e7, 1e7, 1.0, 1.0, g, W) == pytest.approx(limit, rel=1e-5)
    assert an.rate_weak_closed(1e3, 1e3, 1.0, 1.0, g, W) < limit


@pytest.mark.parametrize("alpha", [1.0, 10.0])
def test_rates_match_monte_carlo(alpha):
    n = 400_000
    a1, a2 = exp_draws(alpha, n, 1), exp_draws(alpha, n, 2)
    ps, pw, g = 1.0, 1.0, g21_nominal()
    strong = W * np.log2(1 + ps * np.maximum(a1, a2))
    gw = np.minimum(a1, a2)
    weak = W * np.log2(1 + pw * gw / (1 + g * ps * gw))
    single = W * np.log2(1 + a1)
    for closed, mc in ((an.rate_strong_closed(alpha, alpha, ps, W), strong),
                       (an.rate_weak_closed(alpha, alpha, ps, pw, g, W), weak),
                       (an.rate_single_closed(alpha, W), single)):
        assert abs(closed - mc.mean()) < 4 * mc.std() / np.sqrt(n)
        assert abs(closed / mc.mean() - 1) < 5e-3


def test_rate_ordering_between_weak_and_strong():
    g = g21_nominal()
    for a in (1.0, 10.0, 100.0):
        assert (an.rate_weak_closed(a, a, 1.0, 1.0, g, W) < an.rate_single_closed(a, W)
                < an.rate_strong_closed(a, a, 1.0, W))


def test_rate_inputs_validation():
    with pytest.raises(ValueError):
        an.RateInputs(alpha1=-1.0, alpha2=1.0)


# -- BER ----------------------------------------------------------------------

def test_ber_strong_limits_and_slope():
    assert an.ber_strong_closed(1e-9, 1e-9) == pytest.approx(0.5, abs=1e-4)
    b3 = an.ber_strong_closed(1e3, 1e3)
    b4 = an.ber_strong_closed(1e4, 1e4)
    assert math.log10(b4 / b3) == pytest.approx(-2.0, abs=0.1)


@pytest.mark.parametrize("alpha", [1.0, 10.0, 100.0])
def test_ber_closed_forms_match_monte_carlo(alpha):
    n = 400_000
    a1, a2 = exp_draws(alpha, n, 3), exp_draws(alpha, n, 4)
    g = g21_nominal()
    strong = qfunc(np.sqrt(2 * np.maximum(a1, a2)))
    gw = np.minimum(a1, a2)
    weak = qfunc(np.sqrt(2 * gw / (1 + g * gw)))
    for closed, mc in ((an.ber_strong_closed(alpha, alpha), strong),
                       (an.ber_weak_numeric(alpha, alpha, g21=g), weak)):
        assert abs(closed - mc.mean()) < 3 * mc.std() / np.sqrt(n)


def test_weak_floor():
    g = g21_nominal()
    assert g == pytest.approx(0.5, abs=1e-12)
    floor = an.weak_ber_floor(g21=g)
    assert floor == pytest.approx(float(qfunc(2.0)), rel=1e-12)
    assert 0.015 < floor < 0.025
    # close to the plateau by 20 dB, on it by 40 dB
    assert floor < an.ber_weak_numeric(100.0, 100.0, g21=g) < 1.5 * floor
    assert an.ber_weak_numeric(1e4, 1e4, g21=g) == pytest.approx(floor, rel=1e-2)


@pytest.mark.parametrize("alpha", [1.0, 10.0, 1e3, 1e5])
def test_interference_free_weak_user_is_rayleigh_with_half_mean(alpha):
    # min of two exponentials of mean alpha is exponential of mean alpha / 2
    expect = an.single_user_ber_rayleigh(alpha / 2)
    assert an.ber_weak_numeric(alpha, alpha, g21=0.0) == pytest.approx(expect, rel=1e-6)


def test_strong_never_worse_than_weak():
    g = g21_nominal()
    for a in np.logspace(-1, 3, 9):
        assert an.ber_strong_closed(a, a) <= an.ber_weak_numeric(a, a, g21=g)
        assert an.ber_strong_closed(a, a) <= an.ber_weak_numeric(a, a, g21=0.0)


def test_weak_density_integrates_to_one():
    val, _ = integrate.quad(lambda y: an.weak_density(y, 3.0, 7.0), 0, np.inf)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_single_user_ber():
    assert an.single_user_ber_rayleigh(1e-12) == pytest.approx(0.5, abs=1e-5)
    g = np.logspace(-2, 4, 30)
    assert np.all(np.diff(an.single_user_ber_rayleigh(g)) < 0)
    n = 1_000_000
    h2 = np.random.default_rng(5).exponential(1.0, n)
    mc = qfunc(np.sqrt(2 * h2 * 10.0))
    assert abs(an.single_user_ber_rayleigh(10.0) - mc.mean()) < 3 * mc.std() / np.sqrt(n)


# -- complexity ---------------------------------------------------------------

def test_complexity_report_reproduces_printed_entries():
    rows = {r["method"]: r for r in an.complexity_report(ae.get_variant("AE5"))}
    printed = {k: (an.format_printed(r["printed_flops"]), an.format_printed(r["printed_storage"]))
               for k, r in rows.items()}
    assert printed == {
        "svd_encoder": ("1.0486e6", "1.0486e6"),
        "svd_decoder": ("1.0486e6", "1.0486e6"),
        "cnn_encoder": ("1.8022e5", "352"),
        "cnn_decoder": ("4.0550e5", "396"),
        "mlp_pa": ("656", "656"),
        "mlp_t": ("96", "96"),
    }
    assert rows["svd_encoder"]["formula_flops"] == 1048576
    assert rows["cnn_decoder"]["formula_flops"] == 405504
    assert rows["cnn_decoder"]["formula_storage"] == 396
    assert rows["mlp_t"]["formula_flops"] == 96
    flagged = {k for k, r in rows.items() if r["note"]}
    assert flagged == {"cnn_encoder", "mlp_pa"}
    assert "2 x formula" in rows["cnn_encoder"]["note"]
    assert rows["mlp_pa"]["formula_flops"] == 2208


def test_complexity_report_carries_measured_counts():
    system = ae.build_system(variant="AE5", use_pa=True, use_t=True)
    measured = ae.measure_complexity(system)
    rows = {r["method"]: r for r in an.complexity_report(system.variant, measured=measured)}
    assert rows["cnn_decoder"]["measured_macs"] == measured["cnn_decoder"][0]
    assert rows["svd_encoder"]["measured_macs"] is None


def test_format_printed():
    assert an.format_printed(1048576) == "1.0486e6"
    assert an.format_printed(405504) == "4.0550e5"
    assert an.format_printed(96) == "96"
