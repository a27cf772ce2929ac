"""Discrete-time T-NOMA channel.

Pulses, cross-correlation banks, the doubly-block Toeplitz channel matrix,
Rayleigh fading, colored receiver noise and timing/CSI impairment draws.

All times are in symbol units (T = 1).  Transmit vectors are interleaved
``x = [x_1[1], ..., x_K[1], x_1[2], ...]`` (column index ``n*K + k``) and
receive vectors are stacked per sampling grid ``y = [y_1; ...; y_K]`` (row
index ``l*N_v + i``), as in the matrix model ``y = h G P x + n``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

RIDGE = 1e-10
RANK_TOL = 1e-12


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# --------------------------------------------------------------------------
# pulses
# --------------------------------------------------------------------------

def raised_cosine(t, beta):
    """Unnormalized raised-cosine pulse g(t) = (p * p)(t) for a RRC pulse p.

    Removable singularities at t = 0 and |t| = 1/(2 beta) are evaluated with
    their analytic limits.  Accepts scalars or arrays.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {beta}")
    t = np.asarray(t, dtype=float)
    out = np.sinc(t)
    if beta == 0.0:
        return out if out.ndim else float(out)
    x = 2.0 * beta * t
    denom = 1.0 - x * x
    edge = np.abs(denom) < 1e-10
    safe = np.where(edge, 1.0, denom)
    shaped = np.cos(np.pi * beta * t) / safe
    limit = np.pi / 4.0
    out = out * np.where(edge, limit, shaped)
    return out if out.ndim else float(out)


def root_raised_cosine(t, beta):
    """Unit-energy root-raised-cosine pulse (used by the matched-filter oracle)."""
    t = np.asarray(t, dtype=float)
    if beta == 0.0:
        return np.sinc(t)
    out = np.empty_like(t)
    at_zero = np.abs(t) < 1e-12
    at_edge = np.abs(np.abs(t) - 1.0 / (4.0 * beta)) < 1e-12
    rest = ~(at_zero | at_edge)
    tr = t[rest]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    out[rest] = num / (np.pi * tr * (1 - (4 * beta * tr) ** 2))
    out[at_zero] = 1 - beta + 4 * beta / np.pi
    a = np.pi / (4 * beta)
    out[at_edge] = beta / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(a) + (1 - 2 / np.pi) * np.cos(a))
    return out


@dataclass(frozen=True)
class PulseSpec:
    """Raised-cosine pulse with a truncated ISI window of ``span_symbols`` taps.

    The window holds ``span_symbols`` (odd) lags centered on zero, so a linear
    convolution over N symbols has ``N - span_symbols + 1`` valid outputs.
    """

    rolloff: float = 1.0
    span_symbols: int = 7
    symbol_interval: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"rolloff must lie in [0, 1], got {self.rolloff}")
        if self.span_symbols < 1:
            raise ValueError("span_symbols must be >= 1")
        if self.span_symbols % 2 == 0:
            raise ValueError("span_symbols must be odd (centered tap window)")
        if self.symbol_interval != 1.0:
            raise ValueError("symbol_interval is fixed at 1.0")

    @property
    def half_span(self):
        return (self.span_symbols - 1) // 2

    @property
    def lags(self):
        return np.arange(-self.half_span, self.half_span + 1)


# --------------------------------------------------------------------------
# cross-correlation bank
# --------------------------------------------------------------------------

@dataclass
class CrossCorrBank:
    """Sampled pulse correlations ``taps[l, k, j] = g_{l,k}[lags[j]]``."""

    pulse: PulseSpec
    offsets: np.ndarray
    perturbation: np.ndarray
    taps: np.ndarray
    normalizer: float

    @property
    def K(self):
        return len(self.offsets)

    @property
    def lags(self):
        return self.pulse.lags

    def sequence(self, l, k):
        return self.taps[l, k]

    def energy(self):
        """Sum of squared taps for every (l, k) pair, shape (K, K)."""
        return np.sum(self.taps**2, axis=-1)

    def interference_gain(self, l=1, k=0):
        """G_{l,k} = sum_i g_{l,k}[i]^2 (defaults to G_{2,1} in 1-based notation)."""
        return float(np.sum(self.taps[l, k] ** 2))

    def is_nominal(self):
        return not np.any(self.perturbation)


def design_offsets(K, tau=0.5):
    """Design offsets: user k lags the last user by (K-1-k) tau/(K-1); [tau, 0] for K=2."""
    if K == 1:
        return [0.0]
    return [tau * (K - 1 - k) / (K - 1) for k in range(K)]


def build_crosscorr_bank(pulse, offsets, perturbation=0.0):
    """Sample g((m) + tau_l - tau_k) on the pulse tap window.

    ``perturbation`` is the timing error: a scalar is applied to the first
    user's offset (so the offset difference becomes tau_design + eps), an
    array gives one error per user.  The error only enters the cross terms
    l != k; every sequence is divided by the same normalizer computed from
    the unperturbed self-correlation so that the self sequences carry unit
    energy and a perturbation genuinely changes the cross energies.
    """
    if pulse.span_symbols <= 0:
        raise ValueError("span must be positive")
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    K = len(offsets)
    eps = np.zeros(K)
    if np.ndim(perturbation) == 0:
        eps[0] = float(perturbation)
    else:
        eps = np.asarray(perturbation, dtype=float).reshape(-1)
        if len(eps) != K:
            raise ValueError("perturbation length must match the number of users")
    if np.any(np.abs(eps) >= 1.0):
        raise ValueError("timing error must satisfy |eps| < 1")

    lags = pulse.lags
    beta = pulse.rolloff
    normalizer = float(np.sqrt(np.sum(raised_cosine(lags.astype(float), beta) ** 2)))
    taps = np.empty((K, K, len(lags)))
    for l in range(K):
        for k in range(K):
            shift = offsets[l] - offsets[k]
            if l != k:
                shift += eps[l] - eps[k]
            taps[l, k] = raised_cosine(lags + shift, beta)
    taps /= normalizer
    return CrossCorrBank(pulse=pulse, offsets=offsets, perturbation=eps, taps=taps,
                         normalizer=normalizer)


def perturbed_taps(pulse, offsets, eps):
    """Per-frame taps (B, K, K, N_p) for scalar timing errors ``eps`` (B,).

    Vectorized equivalent of stacking ``build_crosscorr_bank(pulse, offsets, e).taps``.
    """
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    eps = np.asarray(eps, dtype=float).reshape(-1)
    if np.any(np.abs(eps) >= 1.0):
        raise ValueError("timing error must satisfy |eps| < 1")
    K = len(offsets)
    lags = pulse.lags.astype(float)
    normalizer = np.sqrt(np.sum(raised_cosine(lags, pulse.rolloff) ** 2))
    e = np.zeros((eps.size, K))
    e[:, 0] = eps
    shift = offsets[:, None] - offsets[None, :] + (e[:, :, None] - e[:, None, :])
    shift = np.where(np.eye(K, dtype=bool), offsets[:, None] - offsets[None, :], shift)
    return raised_cosine(lags + shift[..., None], pulse.rolloff) / normalizer


# --------------------------------------------------------------------------
# channel matrix
# --------------------------------------------------------------------------

def _toeplitz_blocks(taps, K, rows, cols, half):
    """Scatter tap blocks into a (K*rows) x (K*cols) matrix.

    Row ``l*rows + i`` (output time m = i + half) and interleaved column
    ``n*K + k`` receive ``taps[l, k, m - n + half]``.
    """
    M = np.zeros((K * rows, K * cols))
    i = np.arange(rows)
    for l in range(K):
        for k in range(K):
            for j, lag in enumerate(range(-half, half + 1)):
                n = i + half - lag
                M[l * rows + i, n * K + k] = taps[l, k, j]
    return M


@dataclass
class ChannelMatrix:
    """Doubly-block Toeplitz channel matrix with a lazily cached SVD."""

    G: np.ndarray
    K: int
    N: int
    bank: CrossCorrBank

    @property
    def Nv(self):
        return self.N - self.bank.pulse.span_symbols + 1

    @cached_property
    def _svd(self):
        U, s, Vt = np.linalg.svd(self.G, full_matrices=True)
        return U, s, Vt.T

    @property
    def U(self):
        return self._svd[0]

    @property
    def singular_values(self):
        return self._svd[1]

    @property
    def V(self):
        return self._svd[2]

    @property
    def rank(self):
        s = self.singular_values
        return int(np.sum(s > RANK_TOL * s[0]))

    def apply(self, x):
        """G @ x for an interleaved vector or a batch of row vectors."""
        return np.asarray(x) @ self.G.T if np.ndim(x) > 1 else self.G @ x

    def adjoint(self, y):
        return np.asarray(y) @ self.G if np.ndim(y) > 1 else self.G.T @ y


def build_channel_matrix(bank, K, N):
    """Assemble the (K N_v) x (K N) matrix of the valid convolution outputs."""
    if bank.K != K:
        raise ValueError(f"bank describes {bank.K} users, expected K={K}")
    Np = bank.pulse.span_symbols
    if N <= Np:
        raise ValueError(f"N={N} must exceed the pulse span N_p={Np}")
    Nv = N - Np + 1
    G = _toeplitz_blocks(bank.taps, K, Nv, N, bank.pulse.half_span)
    return ChannelMatrix(G=G, K=K, N=N, bank=bank)


def interleave(x):
    """(..., K, N) user-major array -> (..., K*N) interleaved vector."""
    x = np.asarray(x)
    return np.swapaxes(x, -1, -2).reshape(x.shape[:-2] + (-1,))


def deinterleave(v, K):
    """(..., K*N) interleaved vector -> (..., K, N)."""
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (-1, K)), -1, -2)


def convolve_valid(u, taps):
    """Batched channel convolution without a dense matrix.

    ``u`` has shape (B, K, N) (already power scaled), ``taps`` has shape
    (K, K, N_p) or (B, K, K, N_p) for per-frame banks.  Returns
    (B, K, N_v) with ``out[b, l, i] = sum_k sum_j taps[l, k, j] u[b, k, i + h - lag_j]``.
    """
    B, K, N = u.shape
    Np = taps.shape[-1]
    h = (Np - 1) // 2
    Nv = N - Np + 1
    per_frame = taps.ndim == 4
    out = np.zeros((B, K, Nv))
    for j in range(Np):
        lag = j - h
        seg = u[:, :, h - lag:h - lag + Nv]
        if per_frame:
            out += np.einsum("blk,bkn->bln", taps[..., j], seg)
        else:
            out += np.einsum("lk,bkn->bln", taps[..., j], seg)
    return out


def convolve_valid_adjoint(gy, taps, N):
    """Adjoint of :func:`convolve_valid`: (B, K, N_v) -> (B, K, N)."""
    B, K, Nv = gy.shape
    Np = taps.shape[-1]
    h = (Np - 1) // 2
    per_frame = taps.ndim == 4
    gu = np.zeros((B, K, N))
    for j in range(Np):
        lag = j - h
        if per_frame:
            gu[:, :, h - lag:h - lag + Nv] += np.einsum("blk,bln->bkn", taps[..., j], gy)
        else:
            gu[:, :, h - lag:h - lag + Nv] += np.einsum("lk,bln->bkn", taps[..., j], gy)
    return gu


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

@dataclass
class NoiseColorer:
    """Cholesky factor of the normalized receiver noise covariance.

    The covariance of the stacked noise vector is ``N0 * R`` with
    ``R[(l,i),(k,i')] = g_{l,k}[i - i']`` on the nominal grid.  Real and
    imaginary parts are independent with covariance ``(N0/2) R`` each.

    Sampling uses a second factor computed in sample-time order, where R is
    banded and so is its Cholesky factor; it is stored sparse.
    """

    R: np.ndarray
    chol: np.ndarray
    ridge: float = 0.0
    time_order: np.ndarray = None
    sorted_factor: object = field(default=None, repr=False)
    projected: bool = False

    def sample(self, n0, rng, size=None):
        """Draw colored complex noise; ``size`` is an optional batch count."""
        dim = self.R.shape[0]
        shape = (dim,) if size is None else (size, dim)
        scale = np.sqrt(n0 / 2.0)
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return scale * self.color(z)

    def color(self, z):
        """Map white samples (last axis) to samples with covariance R."""
        if self.sorted_factor is None:
            return z @ self.chol.T
        z2 = np.atleast_2d(z)
        colored = np.empty_like(z2)
        colored[:, self.time_order] = (self.sorted_factor @ z2.T).T
        return colored.reshape(np.shape(z))

    def whiten(self, n):
        """Apply chol^-1 (returns unit-variance white samples for colored noise)."""
        from scipy.linalg import solve_triangular

        n = np.asarray(n)
        if n.ndim == 1:
            return solve_triangular(self.chol, n, lower=True)
        return solve_triangular(self.chol, n.T, lower=True).T


def noise_covariance(bank, N):
    """Normalized covariance R of the stacked (K N_v) noise vector."""
    K = bank.K
    Nv = N - bank.pulse.span_symbols + 1
    h = bank.pulse.half_span
    R = np.zeros((K * Nv, K * Nv))
    i = np.arange(Nv)
    for l in range(K):
        for k in range(K):
            for j, lag in enumerate(range(-h, h + 1)):
                ip = i - lag
                ok = (ip >= 0) & (ip < Nv)
                R[l * Nv + i[ok], k * Nv + ip[ok]] = bank.taps[l, k, j]
    return 0.5 * (R + R.T)


def sample_time_order(bank, Nv):
    """Permutation sorting stacked receive samples (l, i) by time i + tau_l."""
    t = np.concatenate([np.arange(Nv) + tau for tau in bank.offsets])
    return np.argsort(t, kind="stable")


def _psd_repair(R):
    """R itself if Cholesky succeeds, else R + ridge I, else the eigenvalue
    clipped projection onto {R >= ridge I}.  Returns (matrix, ridge, projected)."""
    try:
        np.linalg.cholesky(R)
        return R, 0.0, False
    except np.linalg.LinAlgError:
        pass
    Rr = R + RIDGE * np.eye(R.shape[0])
    try:
        np.linalg.cholesky(Rr)
        return Rr, RIDGE, False
    except np.linalg.LinAlgError:
        pass
    w, Q = np.linalg.eigh(R)
    Rp = (Q * np.maximum(w, RIDGE)) @ Q.T
    return 0.5 * (Rp + Rp.T), RIDGE, True


def build_noise_colorer(bank, N):
    """Factor the nominal noise covariance.

    A truncated pulse with rolloff below one gives an indefinite covariance;
    if neither R nor R + ridge I factors, the covariance is replaced by its
    eigenvalue-clipped PSD projection (``projected`` is then set).
    """
    from scipy import sparse

    if not bank.is_nominal():
        raise ValueError("noise covariance is defined on the nominal (unperturbed) bank")
    R = noise_covariance(bank, N)
    Ru, ridge, projected = _psd_repair(R)
    chol = np.linalg.cholesky(Ru)
    order = sample_time_order(bank, N - bank.pulse.span_symbols + 1)
    L_sorted = np.linalg.cholesky(Ru[np.ix_(order, order)])
    L_sorted[np.abs(L_sorted) < 1e-15 * np.abs(L_sorted).max()] = 0.0
    return NoiseColorer(R=R, chol=chol, ridge=ridge, time_order=order,
                        sorted_factor=sparse.csr_matrix(L_sorted), projected=projected)


def snr_to_n0(snr_db):
    """N0 = 10^(-SNR/10) (SNR defined as E|h|^2 / N0 with unit symbol energy)."""
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


def apply_channel(v, powers, channel, h, noise, snr_db, seed=None):
    """y = h G P v + n for one interleaved sequence or a batch of them.

    ``powers`` holds P_{k,n} in the same (interleaved) layout as ``v`` or is
    broadcastable to it.  ``noise=None`` gives the noise-free signal.
    """
    v = np.asarray(v, dtype=float)
    powers = np.broadcast_to(np.asarray(powers, dtype=float), v.shape)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(powers)) and np.all(np.isfinite(h))):
        raise ValueError("non-finite input to apply_channel")
    if np.any(powers < 0):
        raise ValueError("powers must be nonnegative")
    if v.shape[-1] != channel.K * channel.N:
        raise ValueError(f"expected length {channel.K * channel.N}, got {v.shape[-1]}")
    clean = channel.apply(np.sqrt(powers) * v)
    h = np.asarray(h)
    y = (h[..., None] if h.ndim and v.ndim > 1 else h) * clean
    if noise is not None:
        rng = _as_rng(seed)
        size = None if v.ndim == 1 else v.shape[0]
        y = y + noise.sample(float(snr_to_n0(snr_db)), rng, size=size)
    return y


# --------------------------------------------------------------------------
# fading and impairments
# --------------------------------------------------------------------------

@dataclass
class FadingDraw:
    h: np.ndarray


@dataclass
class ImpairmentDraw:
    timing_error: float
    csi_error_tx: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    csi_error_rx: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))


def complex_normal(rng, variance, size):
    """Circularly-symmetric CN(0, variance) samples."""
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def draw_fading(seed, K=2, size=None):
    """Rayleigh flat fading h ~ CN(0, 1), one coefficient per user (per frame)."""
    rng = _as_rng(seed)
    shape = (K,) if size is None else (size, K)
    return FadingDraw(h=complex_normal(rng, 1.0, shape))


def draw_impairments(width, csi_variance, seed, K=2, size=None, shared_csi=False):
    """Timing error eps ~ U(-w/2, w/2) and CSI errors delta ~ CN(0, var).

    ``width`` is in symbol units.  Transmit and receive CSI errors are
    independent draws unless ``shared_csi`` is set.
    """
    if width < 0 or csi_variance < 0:
        raise ValueError("width and csi_variance must be nonnegative")
    rng = _as_rng(seed)
    eps_shape = () if size is None else (size,)
    csi_shape = (K,) if size is None else (size, K)
    eps = rng.uniform(-width / 2.0, width / 2.0, eps_shape) if width > 0 else np.zeros(eps_shape)
    if csi_variance > 0:
        d_tx = complex_normal(rng, csi_variance, csi_shape)
        d_rx = d_tx.copy() if shared_csi else complex_normal(rng, csi_variance, csi_shape)
    else:
        d_tx = np.zeros(csi_shape, complex)
        d_rx = np.zeros(csi_shape, complex)
    if size is None:
        eps = float(eps)
    return ImpairmentDraw(timing_error=eps, csi_error_tx=d_tx, csi_error_rx=d_rx)


# --------------------------------------------------------------------------
# matched-filter oracle
# --------------------------------------------------------------------------

def matched_filter_oracle(symbols, pulse, offsets, oversample=32, truncation=100.0):
    """Continuous-time matched-filter sufficient statistics by quadrature.

    Builds the noise-free superposition y(t) = sum_k sum_n x_k[n] p(t - n - tau_k)
    of unit-energy RRC pulses on a grid of ``oversample`` points per symbol
    and correlates it with p(t - m - tau_l).  Returns an array of shape
    (K, N) with ``out[l, m] = y_l[m]``.  Intended only as a test oracle.
    """
    if oversample < 16:
        raise ValueError("oversample must be >= 16")
    X = np.atleast_2d(np.asarray(symbols, dtype=float))
    offsets = np.asarray(offsets, dtype=float)
    K, N = X.shape
    dt = 1.0 / oversample
    t = np.arange(-truncation, N + truncation, dt)
    n = np.arange(N)
    # shifted pulses, rows ordered (k, n)
    centers = (n[None, :] + offsets[:, None]).reshape(-1)
    pulses = root_raised_cosine(t[None, :] - centers[:, None], pulse.rolloff)
    waveform = X.reshape(-1) @ pulses
    stats = dt * (pulses @ waveform)
    return stats.reshape(K, N)
