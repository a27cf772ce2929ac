"""SVD precoding baseline with water-filling power allocation.

Interleaved symbol ``i`` (ownership slot ``i % K``) rides on subchannel
``i`` of the nominal channel matrix ``G = U diag(s) V^T``.  The transmitter sends
``V sqrt(P) x`` and receiver ``r`` projects onto ``U^H``, which decouples
the subchannels when the channel is nominal.
"""

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .frames import TEST, batch_taps, draw_batch, draw_white_noise
from .seeding import stream

RANK_TOL = 1e-12
Z95 = 1.959963984540054


# --------------------------------------------------------------------------
# water-filling
# --------------------------------------------------------------------------

def _noise_levels(lam, h_gain, sigma2, K):
    """sigma^2 / (|h_{i mod K}|^2 lam_i^2); inf for unusable subchannels."""
    lam = np.asarray(lam, dtype=float)
    owner = np.arange(lam.size) % K
    gain = np.asarray(h_gain, dtype=float)[owner] * lam**2
    out = np.full(lam.size, np.inf)
    usable = (lam > RANK_TOL * lam.max()) & (gain > 0)
    out[usable] = sigma2 / gain[usable]
    return out


def waterfill(lam, h, sigma2, P, N, K, mode="strict"):
    """Power per subchannel with total N*P.

    ``lam`` are the singular values in subchannel order (one per interleaved
    symbol, zeros for null-space symbols), ``h`` the (estimated) fading
    coefficient per user.

    ``mode="strict"`` iterates the active set (drop subchannels whose power
    would be negative, recompute the water level) until every allocation is
    nonnegative; the KKT conditions then hold exactly.  ``mode="printed"``
    evaluates the single-pass clip at the level (NP + sum noise) / KN and
    rescales the clipped allocation to total NP.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0 or not np.any(lam > 0):
        raise ValueError("waterfill needs at least one nonzero singular value")
    if P <= 0:
        raise ValueError("total power must be positive")
    budget = N * P
    noise = _noise_levels(lam, np.abs(np.asarray(h)) ** 2, sigma2, K)
    finite = np.isfinite(noise)
    power = np.zeros(lam.size)
    if mode == "printed":
        level = (budget + noise[finite].sum()) / lam.size
        raw = np.where(finite, np.maximum(level - np.where(finite, noise, 0.0), 0.0), 0.0)
        if raw.sum() == 0:
            # every subchannel clipped: fall back to the best one
            raw[np.argmin(noise)] = 1.0
        return budget * raw / raw.sum()
    if mode != "strict":
        raise ValueError(f"unknown waterfill mode {mode!r}")
    order = np.argsort(noise[finite])
    sorted_noise = noise[finite][order]
    # largest active count m with level_m = (budget + sum_{j<m} n_j)/m > n_{m-1}
    csum = np.cumsum(sorted_noise)
    m = np.arange(1, sorted_noise.size + 1)
    levels = (budget + csum) / m
    m_active = int(np.nonzero(levels > sorted_noise)[0].max()) + 1
    nu = levels[m_active - 1]
    idx = np.nonzero(finite)[0][order[:m_active]]
    power[idx] = nu - noise[idx]
    return power


def water_level(power, lam, h, sigma2, K):
    """Common level nu of an allocation and the per-channel KKT residual."""
    noise = _noise_levels(lam, np.abs(np.asarray(h)) ** 2, sigma2, K)
    active = power > 0
    levels = power[active] + noise[active]
    return levels.mean(), np.abs(levels - levels.mean()).max() if active.any() else 0.0


# --------------------------------------------------------------------------
# codec
# --------------------------------------------------------------------------

@dataclass
class SvdCodec:
    """Encode/decode matrices and per-subchannel powers for one channel."""

    V_tx: np.ndarray
    U_rx: np.ndarray
    singular_values: np.ndarray
    power_alloc: np.ndarray
    K: int
    noise_diag: np.ndarray = field(default=None, repr=False)

    @property
    def n_symbols(self):
        return self.V_tx.shape[1]

    @property
    def usable(self):
        lam = self.singular_values
        return lam > RANK_TOL * lam.max()

    def with_power(self, power):
        return SvdCodec(self.V_tx, self.U_rx, self.singular_values, np.asarray(power, float),
                        self.K, self.noise_diag)


def subchannel_gains(channel):
    """Singular values padded with zeros to one entry per interleaved symbol."""
    lam = np.zeros(channel.K * channel.N)
    s = channel.singular_values
    lam[:s.size] = s
    return lam


def build_codec(channel, power=None, noise=None):
    """Codec for ``channel`` with unit power per subchannel unless given.

    ``noise`` (a NoiseColorer) enables the post-projection noise variance
    diag(U^T R U) used for LLR scaling.
    """
    lam = subchannel_gains(channel)
    power = np.ones(lam.size) if power is None else np.asarray(power, float)
    U = channel.U
    nd = None
    if noise is not None:
        nd = np.zeros(lam.size)
        nd[:U.shape[1]] = np.einsum("ij,ij->j", U, noise.R @ U)
    return SvdCodec(V_tx=channel.V, U_rx=U.T, singular_values=lam, power_alloc=power,
                    K=channel.K, noise_diag=nd)


def svd_encode(x, codec):
    """V sqrt(P) x for one interleaved frame (KN,) or a batch (B, KN).

    ``power_alloc`` may be (KN,) or per-frame (B, KN).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != codec.n_symbols:
        raise ValueError(f"frame length {x.shape[-1]} != codec size {codec.n_symbols}")
    return (np.sqrt(codec.power_alloc) * x) @ codec.V_tx.T


def svd_decode(y, codec, h_hat, user=None, power=None):
    """Per-subchannel decision statistics Re{h^* (U^H y)_i} / (|h|^2 s_i sqrt(P_i)).

    ``y`` is (K N_v,) or (B, K N_v) complex, ``h_hat`` the receiver's
    estimate (scalar or shape (B,)).  Returns ``(stat, hard, usable)``
    over all KN subchannels (or only ``user``'s symbols when given).
    Subchannels with zero gain or zero power are erasures decided as +1;
    ``usable`` marks subchannels that are not in the null space.
    """
    h_hat = np.asarray(h_hat)
    if np.any(h_hat == 0):
        raise ValueError("channel estimate must be nonzero")
    y = np.asarray(y)
    power = codec.power_alloc if power is None else np.asarray(power)
    z = y @ codec.U_rx.T
    M = codec.n_symbols
    zf = np.zeros(z.shape[:-1] + (M,), complex)
    r = min(M, z.shape[-1])
    zf[..., :r] = z[..., :r]
    hh = h_hat[..., None] if h_hat.ndim else h_hat
    scale = np.abs(hh) ** 2 * codec.singular_values * np.sqrt(power)
    live = scale > 0
    stat = np.where(live, np.real(np.conj(hh) * zf) / np.where(live, scale, 1.0), 0.0)
    hard = np.where(stat < 0, -1.0, 1.0)
    usable = codec.usable
    if user is not None:
        sel = np.arange(M) % codec.K == user
        return stat[..., sel], hard[..., sel], usable[sel]
    return stat, hard, usable


def svd_llr(stat, codec, h_hat, n0, power=None):
    """LLRs from decode statistics using the true post-projection noise variance."""
    if codec.noise_diag is None:
        raise ValueError("codec was built without a noise colorer")
    power = codec.power_alloc if power is None else np.asarray(power)
    h_hat = np.asarray(h_hat)
    hh = h_hat[..., None] if h_hat.ndim else h_hat
    sig = np.abs(hh) ** 2 * codec.singular_values**2 * power
    var = 0.5 * n0 * codec.noise_diag / np.where(sig > 0, sig, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(var > 0, 2.0 * stat / var, 0.0)


def svd_complexity(codec):
    """Multiply-adds and stored coefficients of one encode and one decode.

    Encoding is the dense (KN x KN) product with V; decoding projects the
    K N_v receive samples with U^T, which is (K N_v) x (K N_v).
    """
    enc = codec.V_tx.shape[0] * codec.V_tx.shape[1]
    dec = codec.U_rx.shape[0] * codec.U_rx.shape[1]
    return {"svd_encoder": (enc, enc), "svd_decoder": (dec, dec)}


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

@dataclass
class SvdBerResult:
    snr_db: np.ndarray
    ber: np.ndarray          # (n_snr, K)
    ci95: np.ndarray         # (n_snr, K)
    ber_avg: np.ndarray      # (n_snr,)
    ci95_avg: np.ndarray
    frames: int
    bits_per_user: int


def _mean_ci(per_frame):
    n = per_frame.shape[0]
    mean = per_frame.mean(axis=0)
    sd = per_frame.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, Z95 * sd / np.sqrt(n)


def simulate_svd_ber(snr_db, frames, K=2, N=512, rolloff=1.0, span=7, tau=0.5, seed=0,
                     timing_width=0.0, csi_variance=0.0, power_per_user=1.0, batch=256,
                     waterfill_mode="strict", shared_csi=False, split=TEST, rotate_slots=True):
    """Monte Carlo BER of the SVD transceiver.

    Each frame draws BPSK symbols, Rayleigh fading per user, a timing
    error eps ~ U(-w/2, w/2) (``timing_width`` in symbol units) and CSI
    errors.  Powers are water-filled per frame from the transmitter's CSI
    estimate, the channel applies the perturbed bank, and receiver r
    decodes its own symbols with the nominal U and its CSI estimate.

    The CI is 1.96 standard errors over per-frame error fractions (frames
    are the independent unit since fading is per frame).  Null-space
    symbols (no usable subchannel) are not counted.

    Subchannels are sorted by gain, so a fixed ``i % K`` ownership hands
    user 0 the better subchannel of every group of K.  With
    ``rotate_slots`` (default) each frame draws a cyclic shift c and user
    r's symbols ride on slot ``(r + c) % K``, which makes the users
    statistically exchangeable.  The shift is known to both ends.
    """
    snr_db = np.atleast_1d(np.asarray(snr_db, dtype=float))
    pulse = ch.PulseSpec(rolloff, span)
    offsets = ch.design_offsets(K, tau)
    bank = ch.build_crosscorr_bank(pulse, offsets)
    G = ch.build_channel_matrix(bank, K, N)
    colorer = ch.build_noise_colorer(bank, N)
    codec = build_codec(G)
    lam = codec.singular_values
    usable = codec.usable
    owner = np.arange(K * N) % K
    counted = [np.nonzero((owner == r) & usable)[0] for r in range(K)]
    P_total = K * power_per_user

    errs = np.zeros((snr_db.size, frames, K))
    n_batches = -(-frames // batch)
    for b in range(n_batches):
        B = min(batch, frames - b * batch)
        fb = draw_batch(seed, split, b, B, K, N, timing_width, csi_variance, shared_csi)
        shift = (stream(seed, "eval", split, b).integers(0, K, B) if rotate_slots
                 else np.zeros(B, dtype=int))
        # slot[f, r]: which ownership slot carries user r in frame f
        slot = (np.arange(K)[None, :] + shift[:, None]) % K
        user_of_slot = np.argsort(slot, axis=1)
        f_idx = np.arange(B)[:, None]
        x = ch.interleave(fb.symbols[f_idx, user_of_slot])
        taps = batch_taps(pulse, offsets, fb, bank.taps)
        h, h_rx = fb.h, fb.h_rx
        h_tx_slot = fb.h_tx[f_idx, user_of_slot]
        for si, snr in enumerate(snr_db):
            n0 = float(ch.snr_to_n0(snr))
            power = np.stack([waterfill(lam, h_tx_slot[f], n0, P_total, N, K, mode=waterfill_mode)
                              for f in range(B)])
            v = svd_encode(x, codec.with_power(power))
            clean = ch.convolve_valid(ch.deinterleave(v, K), taps).reshape(B, K * G.Nv)
            white = draw_white_noise(seed, split, b, si, K, B, K * G.Nv)
            for r in range(K):
                noise = np.sqrt(n0 / 2.0) * colorer.color(white[r])
                y = h[:, r, None] * clean + noise
                _, hard, _ = svd_decode(y, codec, h_rx[:, r], power=power)
                wrong = hard != x
                for k in range(K):
                    sel = slot[:, r] == k
                    if sel.any():
                        errs[si, b * batch + np.nonzero(sel)[0], r] = \
                            wrong[sel][:, counted[k]].mean(axis=1)

    ber = np.zeros((snr_db.size, K))
    ci = np.zeros((snr_db.size, K))
    ber_avg = np.zeros(snr_db.size)
    ci_avg = np.zeros(snr_db.size)
    for si in range(snr_db.size):
        ber[si], ci[si] = _mean_ci(errs[si])
        m, c = _mean_ci(errs[si].mean(axis=1, keepdims=True))
        ber_avg[si], ci_avg[si] = m[0], c[0]
    return SvdBerResult(snr_db, ber, ci, ber_avg, ci_avg, frames, int(counted[0].size))
