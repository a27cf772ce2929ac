import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tnoma import channel as ch


def rect_bank(beta=1.0, span=7, tau=0.5, eps=0.0):
    pulse = ch.PulseSpec(beta, span)
    return ch.build_crosscorr_bank(pulse, ch.design_offsets(2, tau), eps)


# -- pulses -----------------------------------------------------------------

def test_raised_cosine_peak_and_zero_crossing():
    assert ch.raised_cosine(0.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert ch.raised_cosine(1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert ch.raised_cosine(3.0, 0.3) == pytest.approx(0.0, abs=1e-15)


def test_raised_cosine_matches_rrc_self_convolution():
    # g(t) = integral p(s) p(t - s) ds on a x64 grid
    for beta, t in ((1.0, 0.5), (1.0, 0.3), (0.5, 0.5), (0.25, 1.7)):
        dt = 1.0 / 64
        s = np.arange(-400.0, 400.0, dt)
        conv = dt * np.sum(ch.root_raised_cosine(s, beta) * ch.root_raised_cosine(t - s, beta))
        assert ch.raised_cosine(t, beta) == pytest.approx(conv, abs=1e-6)


def test_raised_cosine_singular_points_are_continuous():
    for beta in (0.25, 0.5, 1.0):
        t0 = 1.0 / (2 * beta)
        assert ch.raised_cosine(t0, beta) == pytest.approx(ch.raised_cosine(t0 + 1e-7, beta),
                                                           abs=1e-6)


def test_raised_cosine_rejects_bad_rolloff():
    with pytest.raises(ValueError):
        ch.raised_cosine(0.0, 1.5)


def test_pulse_spec_validation():
    with pytest.raises(ValueError):
        ch.PulseSpec(1.0, 0)
    with pytest.raises(ValueError):
        ch.PulseSpec(1.0, 6)
    with pytest.raises(ValueError):
        ch.PulseSpec(-0.1, 7)


# -- banks ------------------------------------------------------------------

def test_bank_self_energy_and_symmetry():
    for beta in (0.0, 0.25, 0.5, 1.0):
        bank = rect_bank(beta)
        E = bank.energy()
        assert abs(E[0, 0] - 1) < 1e-12 and abs(E[1, 1] - 1) < 1e-12
        for l in range(2):
            seq = bank.sequence(l, l)
            assert np.argmax(np.abs(seq)) == bank.pulse.half_span
            for k in range(2):
                np.testing.assert_allclose(bank.sequence(l, k), bank.sequence(k, l)[::-1],
                                           atol=1e-15)


def test_bank_cross_gain_for_unit_rolloff_half_offset():
    # only g(+-1/2) = 1/2 survive on the half-integer grid
    bank = rect_bank(1.0)
    assert bank.interference_gain(1, 0) == pytest.approx(0.5, abs=1e-12)
    assert bank.normalizer == pytest.approx(1.0, abs=1e-12)


def test_bank_zero_perturbation_is_nominal():
    a = rect_bank(1.0)
    b = rect_bank(1.0, eps=0.0)
    assert np.array_equal(a.taps, b.taps)
    assert a.is_nominal()


def test_bank_perturbation_matches_direct_evaluation():
    bank = rect_bank(1.0, eps=0.04)
    expect = ch.raised_cosine(0.5 + 0.04, 1.0) / bank.normalizer
    assert bank.taps[0, 1, bank.pulse.half_span] == pytest.approx(expect, abs=1e-15)
    # self terms unperturbed
    np.testing.assert_array_equal(bank.taps[0, 0], rect_bank(1.0).taps[0, 0])


def test_perturbed_taps_match_per_frame_banks():
    pulse = ch.PulseSpec(0.5, 7)
    offs = ch.design_offsets(2, 0.5)
    eps = np.array([0.0, 0.03, -0.02])
    taps = ch.perturbed_taps(pulse, offs, eps)
    for b, e in enumerate(eps):
        np.testing.assert_allclose(taps[b], ch.build_crosscorr_bank(pulse, offs, e).taps,
                                   atol=1e-15)


def test_bank_rejects_large_timing_error():
    with pytest.raises(ValueError):
        rect_bank(1.0, eps=1.0)


# -- channel matrix -----------------------------------------------------------

def test_single_user_matrix_is_toeplitz():
    pulse = ch.PulseSpec(0.5, 5)
    bank = ch.build_crosscorr_bank(pulse, [0.0])
    G = ch.build_channel_matrix(bank, 1, 12)
    from scipy.linalg import toeplitz

    assert np.allclose(G.G, toeplitz(G.G[:, 0], G.G[0, :]))
    e = np.zeros(12)
    e[6] = 1.0
    col = G.apply(e)
    np.testing.assert_allclose(col[6 - 4:6 + 1][::-1], bank.sequence(0, 0), atol=1e-15)


def test_matrix_matches_double_sum_oracle():
    rng = np.random.default_rng(3)
    K, N, beta, span = 2, 8, 0.7, 3
    pulse = ch.PulseSpec(beta, span)
    offs = ch.design_offsets(K, 0.5)
    bank = ch.build_crosscorr_bank(pulse, offs)
    G = ch.build_channel_matrix(bank, K, N)
    h = pulse.half_span
    norm = np.sqrt(sum(ch.raised_cosine(float(j), beta) ** 2 for j in range(-h, h + 1)))
    for _ in range(20):
        X = rng.standard_normal((K, N))
        y = np.zeros((K, N - span + 1))
        for l in range(K):
            for i in range(N - span + 1):
                m = i + h
                for k in range(K):
                    for n in range(N):
                        if abs(m - n) <= h:
                            y[l, i] += X[k, n] * ch.raised_cosine(m - n + offs[l] - offs[k],
                                                                  beta) / norm
        assert np.max(np.abs(G.apply(ch.interleave(X)) - y.reshape(-1))) < 1e-12


def test_matrix_shape_and_svd_invariants():
    G = ch.build_channel_matrix(rect_bank(1.0), 2, 512)
    assert G.G.shape == (2 * 506, 2 * 512)
    small = ch.build_channel_matrix(rect_bank(1.0), 2, 40)
    U, s, V = small.U, small.singular_values, small.V
    r = s.size
    assert np.max(np.abs(U[:, :r] * s @ V[:, :r].T - small.G)) < 1e-9
    assert np.max(np.abs(U.T @ U - np.eye(U.shape[1]))) < 1e-10
    assert np.max(np.abs(V.T @ V - np.eye(V.shape[1]))) < 1e-10
    assert np.all(np.diff(s) <= 1e-15) and np.all(s >= 0)


def test_matrix_rejects_mismatch():
    with pytest.raises(ValueError):
        ch.build_channel_matrix(rect_bank(1.0), 3, 16)
    with pytest.raises(ValueError):
        ch.build_channel_matrix(rect_bank(1.0), 2, 7)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(8, 24), st.sampled_from([1, 3, 5, 7]),
       st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
def test_interleave_convolve_and_adjoint(K, N, span, beta, seed):
    if N <= span:
        return
    rng = np.random.default_rng(seed)
    bank = ch.build_crosscorr_bank(ch.PulseSpec(beta, span), ch.design_offsets(K, 0.5))
    G = ch.build_channel_matrix(bank, K, N)
    X = rng.standard_normal((3, K, N))
    v = ch.interleave(X)
    np.testing.assert_array_equal(ch.deinterleave(v, K), X)
    y = ch.convolve_valid(X, bank.taps).reshape(3, -1)
    np.testing.assert_allclose(y, G.apply(v), atol=1e-12)
    b = rng.standard_normal((3, K, N - span + 1))
    lhs = np.sum(ch.convolve_valid(X, bank.taps) * b)
    rhs = np.sum(X * ch.convolve_valid_adjoint(b, bank.taps, N))
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


# -- noise --------------------------------------------------------------------

def test_colorer_factors_reproduce_covariance():
    bank = rect_bank(1.0)
    c = ch.build_noise_colorer(bank, 64)
    assert not c.projected and c.ridge == 0.0
    assert np.max(np.abs(c.chol @ c.chol.T - c.R)) < 1e-9
    L = c.sorted_factor.toarray()
    RO = c.R[np.ix_(c.time_order, c.time_order)]
    assert np.max(np.abs(L @ L.T - RO)) < 1e-9
    # banded factor in time order
    assert c.sorted_factor.nnz < 4 * c.R.shape[0]


def test_colorer_handles_indefinite_truncation():
    bank = rect_bank(0.5)
    c = ch.build_noise_colorer(bank, 64)
    assert c.projected
    assert np.min(np.linalg.eigvalsh(c.chol @ c.chol.T)) > 0


def test_colorer_rejects_perturbed_bank():
    with pytest.raises(ValueError):
        ch.build_noise_colorer(rect_bank(1.0, eps=0.01), 32)


def test_noise_autocovariance_matches_analytic():
    N, frames, snr = 16, 100000, 10.0
    bank = rect_bank(1.0)
    G = ch.build_channel_matrix(bank, 2, N)
    c = ch.build_noise_colorer(bank, N)
    n0 = float(ch.snr_to_n0(snr))
    y = ch.apply_channel(np.zeros((frames, 2 * N)), 1.0, G, np.ones(frames), c, snr, seed=5)
    emp = (y.T @ y.conj()) / frames
    R = n0 * c.R
    d = np.diag(R).real
    sigma = np.sqrt((np.outer(d, d) + R**2) / (2 * frames))
    assert np.max(np.abs(emp.real - R) / sigma) < 4.5


def test_whitening_round_trip_is_white():
    bank = rect_bank(1.0)
    c = ch.build_noise_colorer(bank, 32)
    rng = np.random.default_rng(11)
    n = c.sample(1.0, rng, size=100000 // c.R.shape[0] + 1)
    w = c.whiten(n.real) * np.sqrt(2.0)
    sample = w.reshape(-1)[:100000]
    assert stats.kstest(sample, "norm").pvalue > 0.01


def test_apply_channel_impulse_gives_column():
    bank = rect_bank(1.0)
    G = ch.build_channel_matrix(bank, 2, 16)
    v = np.zeros(32)
    v[9] = 1.0
    y = ch.apply_channel(v, 1.0, G, 1.0, None, 30.0)
    np.testing.assert_allclose(y, G.G[:, 9], atol=1e-15)


def test_apply_channel_rejects_nan():
    G = ch.build_channel_matrix(rect_bank(1.0), 2, 16)
    v = np.zeros(32)
    v[0] = np.nan
    with pytest.raises(ValueError):
        ch.apply_channel(v, 1.0, G, 1.0, None, 30.0)


# -- matched-filter oracle ----------------------------------------------------

def test_oracle_single_symbol_peak():
    pulse = ch.PulseSpec(1.0, 7)
    out = ch.matched_filter_oracle(np.array([[0, 0, 0, 1.0, 0, 0, 0]]), pulse, [0.0])
    assert np.argmax(out[0]) == 3
    assert out[0, 3] == pytest.approx(ch.raised_cosine(0.0, 1.0), abs=1e-4)


def test_oracle_matches_channel_matrix():
    rng = np.random.default_rng(1)
    pulse = ch.PulseSpec(1.0, 7)
    offs = ch.design_offsets(2, 0.5)
    G = ch.build_channel_matrix(ch.build_crosscorr_bank(pulse, offs), 2, 16)
    X = rng.choice([-1.0, 1.0], size=(2, 16))
    out = ch.matched_filter_oracle(X, pulse, offs)
    valid = out[:, 3:3 + G.Nv].reshape(-1)
    assert np.max(np.abs(G.apply(ch.interleave(X)) - valid)) < 1e-4


def test_oracle_superposition_degenerates_to_one_user():
    rng = np.random.default_rng(2)
    pulse = ch.PulseSpec(1.0, 7)
    x1 = rng.choice([-1.0, 1.0], size=12)
    two = ch.matched_filter_oracle(np.stack([x1, np.zeros(12)]), pulse, [0.5, 0.0])
    one = ch.matched_filter_oracle(x1[None], pulse, [0.5])
    np.testing.assert_allclose(two[0], one[0], atol=1e-12)


def test_oracle_requires_oversampling():
    with pytest.raises(ValueError):
        ch.matched_filter_oracle(np.ones((1, 4)), ch.PulseSpec(1.0, 3), [0.0], oversample=8)


# -- fading and impairments ---------------------------------------------------

def test_fading_unit_power():
    h = ch.draw_fading(0, K=1, size=100000).h
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02


def test_impairments_off():
    d = ch.draw_impairments(0.0, 0.0, 1, K=2)
    assert d.timing_error == 0.0
    assert not np.any(d.csi_error_tx) and not np.any(d.csi_error_rx)


def test_timing_error_bounds():
    d = ch.draw_impairments(0.16 * 0.5, 0.0, 2, K=2, size=100000)
    assert np.max(np.abs(d.timing_error)) <= 0.04
    assert np.max(np.abs(d.timing_error)) > 0.039


def test_csi_error_variance():
    d = ch.draw_impairments(0.0, 0.01, 3, K=1, size=1000000)
    e = np.abs(d.csi_error_tx[:, 0]) ** 2
    se = e.std() / np.sqrt(e.size)
    assert abs(e.mean() - 0.01) < 3 * se
    assert not np.array_equal(d.csi_error_tx, d.csi_error_rx)
    shared = ch.draw_impairments(0.0, 0.01, 3, K=2, size=4, shared_csi=True)
    np.testing.assert_array_equal(shared.csi_error_tx, shared.csi_error_rx)


def test_draws_are_reproducible():
    a = ch.draw_impairments(0.1, 0.01, 7, size=5)
    b = ch.draw_impairments(0.1, 0.01, 7, size=5)
    np.testing.assert_array_equal(a.timing_error, b.timing_error)
    np.testing.assert_array_equal(a.csi_error_rx, b.csi_error_rx)
    with pytest.raises(ValueError):
        ch.draw_impairments(-1.0, 0.0, 0)
