"""Training objectives: cross-entropy, MSE and the LLR-statistics Q-loss."""

import numpy as np
from scipy.special import erfc

from .tensor import Tensor, as_tensor, make

PROB_CLAMP = 1e-12
GRAD_CLIP = 1e3


def qfunc(x):
    """Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt(2))."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def ce_loss(p, bits):
    """Mean cross-entropy.

    Binary case: ``p`` holds Pr{bit = 1} with the same shape as ``bits``
    (values in {0, 1}).  M-ary case: ``p`` has a trailing class axis and
    ``bits`` holds integer labels.  The mean runs over every symbol.
    """
    p = as_tensor(p)
    bits = np.asarray(bits)
    if p.shape == bits.shape:
        pc = np.clip(p.data, PROB_CLAMP, 1 - PROB_CLAMP)
        inside = (p.data >= PROB_CLAMP) & (p.data <= 1 - PROB_CLAMP)
        n = bits.size
        val = -np.mean(bits * np.log(pc) + (1 - bits) * np.log(1 - pc))

        def back(g):
            return (g * inside * (-(bits / pc) + (1 - bits) / (1 - pc)) / n,)

        return make(val, (p,), back)
    if p.shape[:-1] != bits.shape:
        raise ValueError(f"shape mismatch: p{p.shape} labels{bits.shape}")
    labels = bits.astype(int)
    picked = np.take_along_axis(p.data, labels[..., None], axis=-1)[..., 0]
    pc = np.clip(picked, PROB_CLAMP, None)
    n = labels.size

    def back(g):
        out = np.zeros_like(p.data)
        np.put_along_axis(out, labels[..., None], (-g / (pc * n))[..., None], axis=-1)
        return (out,)

    return make(-np.mean(np.log(pc)), (p,), back)


def mse_loss(xhat, x):
    """Mean squared error over every symbol."""
    xhat = as_tensor(xhat)
    x = np.asarray(x, dtype=float)
    if xhat.shape != x.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    d = xhat.data - x
    return make(np.mean(d * d), (xhat,), lambda g: (2.0 * g * d / d.size,))


def llr_from_prob(p):
    pc = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    return np.log(pc / (1 - pc))


def q_loss_stats(llr, symbols):
    """Class-conditional LLR mean, population std and count for s = -1, +1."""
    out = {}
    for s in (-1, 1):
        vals = llr[symbols == s]
        out[s] = (vals.mean(), vals.std(), vals.size) if vals.size else (0.0, 0.0, 0)
    return out


def q_loss(p, symbols, kappa, clip=GRAD_CLIP):
    """J_Q = 1/2 sum_s Q(kappa * s * mu_s / sigma_s) from per-bit LLRs.

    ``p`` are the decoder probabilities Pr{x = +1}; ``symbols`` are the
    transmitted BPSK symbols in {-1, +1}.  The class means are sign adjusted
    so that both Q arguments are positive for a good detector.  Classes are
    normalized by their own bit counts.  If either class has fewer than two
    bits (or zero spread) the term is skipped and a constant 0 is returned.

    The gradient w.r.t. ``p`` runs through dLLR/dp = 1/(p (1 - p)) and is
    clipped elementwise at ``clip`` (``None`` disables clipping).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    p = as_tensor(p)
    symbols = np.asarray(symbols)
    if symbols.shape != p.shape:
        raise ValueError("symbols must match p in shape")
    llr = llr_from_prob(p.data)
    stats = q_loss_stats(llr, symbols)
    if any(n < 2 or sd == 0.0 for _, sd, n in stats.values()):
        return Tensor(0.0)

    val = 0.0
    dJ_dllr = np.zeros_like(llr)
    for s, (mu, sd, n) in stats.items():
        z = kappa * s * mu / sd
        val += 0.5 * float(qfunc(z))
        mask = symbols == s
        # dQ(z)/dz = -exp(-z^2/2)/sqrt(2 pi); d(mu/sd)/dLLR_i = (1/n)(1/sd - mu (LLR_i - mu)/sd^3)
        dq = -np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
        dratio = (1.0 / sd - mu * (llr[mask] - mu) / sd**3) / n
        dJ_dllr[mask] = 0.5 * dq * kappa * s * dratio
    pc = np.clip(p.data, PROB_CLAMP, 1 - PROB_CLAMP)
    inside = (p.data > PROB_CLAMP) & (p.data < 1 - PROB_CLAMP)
    dllr_dp = inside / (pc * (1 - pc))

    def back(g):
        gp = g * dJ_dllr * dllr_dp
        if clip is not None:
            gp = np.clip(gp, -clip, clip)
        return (gp,)

    return make(val, (p,), back)


def combined_loss(j_ce, j_q, alpha):
    """J_CE + alpha J_Q."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return as_tensor(j_ce) + alpha * as_tensor(j_q)
