"""Mini-batches of transmitted frames and their channel draws.

A batch is addressed by ``(seed, split, index)``: the same address always
yields the same bits, fading, timing errors and CSI errors, and noise is
drawn from its own stream keyed additionally by the SNR point.  The SVD
and auto-encoder evaluators share this convention, so both see identical
frames under the same seed.
"""

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .seeding import stream

TRAIN, VALID, TEST = 0, 1, 2


@dataclass
class FrameBatch:
    bits: np.ndarray          # (B, K, N) in {0, 1}
    h: np.ndarray             # (B, K) complex fading
    timing_error: np.ndarray  # (B,) symbol units
    csi_error_tx: np.ndarray  # (B, K)
    csi_error_rx: np.ndarray  # (B, K)

    @property
    def size(self):
        return self.bits.shape[0]

    @property
    def symbols(self):
        """BPSK symbols, bit 1 -> +1."""
        return 2.0 * self.bits - 1.0

    @property
    def h_tx(self):
        return self.h + self.csi_error_tx

    @property
    def h_rx(self):
        return self.h + self.csi_error_rx


def draw_batch(seed, split, index, B, K, N, timing_width=0.0, csi_variance=0.0,
               shared_csi=False):
    """Frame batch ``index`` of ``split``; ``timing_width`` in symbol units."""
    bits = (stream(seed, "data", split, index).random((B, K, N)) < 0.5).astype(np.int8)
    h = ch.draw_fading(stream(seed, "fading", split, index), K, size=B).h
    imp = ch.draw_impairments(timing_width, csi_variance, stream(seed, "impairments", split, index),
                              K, size=B, shared_csi=shared_csi)
    return FrameBatch(bits=bits, h=h, timing_error=np.asarray(imp.timing_error, float),
                      csi_error_tx=imp.csi_error_tx, csi_error_rx=imp.csi_error_rx)


def draw_white_noise(seed, split, index, snr_index, K, B, dim):
    """Unit-variance complex white samples (K receivers, B, dim), E|z|^2 = 2."""
    rng = stream(seed, "noise", split, index, snr_index)
    z = rng.standard_normal((2, K, B, dim))
    return z[0] + 1j * z[1]


def batch_taps(pulse, offsets, batch, nominal_taps):
    """Per-frame perturbed taps, or the nominal taps if no frame has a timing error."""
    if np.any(batch.timing_error):
        return ch.perturbed_taps(pulse, offsets, batch.timing_error)
    return nominal_taps
