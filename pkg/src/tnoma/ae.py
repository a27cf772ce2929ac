"""CNN auto-encoder T-NOMA transceiver.

Encoder, power normalization, MLP power allocator, differentiable channel,
MLP CSI transformer and one decoder per user, trained end to end.

Layouts
-------
The encoder reads the interleaved symbol vector (length KN, column
``n*K + k``) as one sequence and its output is de-interleaved to (K, N)
before power normalization.  Each decoder reads the combined receive
vector ``y' = q_r y^r`` as a two-row (Re, Im) image whose columns are the
K N_v samples sorted by sampling time, zero padded to KN so that user r's
symbol n sits at column ``n*K + rank(tau_r)``; those columns are the
decoder's N outputs.
"""

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .frames import TEST, TRAIN, VALID, batch_taps, draw_batch, draw_white_noise
from .nn import layers as nl
from .nn import tensor as nt
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.losses import ce_loss, combined_loss, mse_loss, q_loss
from .nn.optim import Adam
from .seeding import stream

LOSS_MODES = ("ce", "mse-identity", "mse-tanh", "ce+q")
HEADS = {"ce": "sigmoid", "ce+q": "sigmoid", "mse-identity": "identity", "mse-tanh": "tanh"}
SKIPS = ("a", "b", "c")
Z95 = 1.959963984540054


# --------------------------------------------------------------------------
# variants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AeVariant:
    name: str
    encoder_filters: tuple
    decoder_filters: tuple
    kernel_len: int = 11
    skips: frozenset = frozenset()
    final_activation: str = "sigmoid"

    def __post_init__(self):
        if len(self.encoder_filters) != 3 or len(self.decoder_filters) != 4:
            raise ValueError("encoder needs 3 stages and decoder 4 stages")
        if min(self.encoder_filters + self.decoder_filters) < 1:
            raise ValueError("filter counts must be positive")
        if self.kernel_len % 2 == 0:
            raise ValueError("kernel_len must be odd")
        bad = set(self.skips) - set(SKIPS)
        if bad:
            raise ValueError(f"unknown skip connection(s) {sorted(bad)}")
        if self.final_activation not in ("sigmoid", "tanh", "identity", "softmax"):
            raise ValueError(f"unknown final activation {self.final_activation!r}")

    def replace(self, **changes):
        if "skips" in changes:
            changes["skips"] = frozenset(changes["skips"])
        return dataclasses.replace(self, **changes)


_TABLE = {
    "AE1": ((1, 1, 1), (1, 1, 1, 1)),
    "AE2": ((2, 4, 2), (1, 1, 1, 1)),
    "AE3": ((2, 4, 2), (1, 1, 2, 2)),
    "AE4": ((1, 1, 1), (2, 4, 4, 2)),
    "AE5": ((2, 4, 2), (2, 4, 4, 2)),
    "AE6": ((1, 1, 1), (1, 2, 8, 4)),
    "AE7": ((1, 1, 1), (2, 16, 128, 16)),
    "AE8": ((2, 4, 2), (2, 16, 128, 16)),
    "AE9": ((2, 4, 2), (4, 32, 128, 16)),
}
VARIANTS = {name: AeVariant(name, enc, dec) for name, (enc, dec) in _TABLE.items()}


def get_variant(name, **changes):
    try:
        v = VARIANTS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}") from None
    return v.replace(**changes) if changes else v


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------

def normalize_power(u, powers):
    """Zero-mean rows of ``u`` (B, K, N) scaled to mean power ``powers`` (B, K)."""
    c = u - nt.mean(u, axis=2, keepdims=True)
    rms = nt.sqrt(nt.mean(nt.square(c), axis=2, keepdims=True))
    p = nt.as_tensor(powers)
    return c / rms * nt.reshape(nt.sqrt(p), p.shape + (1,))


def channel_op(v, taps):
    """s = G_eps v as (B, K, N_v) through the valid convolution and its adjoint."""
    N = v.shape[-1]
    return nt.linear_op(v, lambda a: ch.convolve_valid(a, taps),
                        lambda g: ch.convolve_valid_adjoint(g, taps, N))


def _split_complex(z):
    z = np.asarray(z)
    return np.real(z), np.imag(z)


def default_combiner(h_hat):
    """q = h^* / |h|^2 for each estimate."""
    h_hat = np.asarray(h_hat)
    if np.any(h_hat == 0):
        raise ValueError("default combiner needs a nonzero channel estimate")
    return np.conj(h_hat) / np.abs(h_hat) ** 2


def combine(y_re, y_im, q_re, q_im):
    """Complex product q y on (Re, Im) pairs; q may be arrays or tensors."""
    return y_re * q_re - y_im * q_im, y_re * q_im + y_im * q_re


class Encoder(nl.Module):
    def __init__(self, variant, rng, rng_skip):
        L1, L2, L3 = variant.encoder_filters
        S = variant.kernel_len
        self.conv1 = nl.Conv1d(1, L1, S, rng)
        self.bn1 = nl.BatchNorm(L1)
        self.conv2 = nl.Conv1d(L1, L2, S, rng)
        self.bn2 = nl.BatchNorm(L2)
        self.conv3 = nl.Conv1d(L2, L3, S, rng)
        # (a): stage-1 output -> input of the final stage
        self.skip_a = nl.Conv1d(L1, L2, 1, rng_skip, bias=False) if "a" in variant.skips else None

    def forward(self, x):
        """x: interleaved symbols (B, KN) -> unnormalized sequence (B, KN)."""
        B, L = x.shape
        h1 = self.bn1(nl.selu(self.conv1(nt.reshape(nt.as_tensor(x), (B, 1, L)))))
        h2 = self.bn2(nl.selu(self.conv2(h1)))
        if self.skip_a is not None:
            h2 = h2 + self.skip_a(h1)
        return nt.tsum(self.conv3(h2), axis=1)


class Decoder(nl.Module):
    def __init__(self, variant, rng, rng_skip):
        L1, L2, L3, L4 = variant.decoder_filters
        S = variant.kernel_len
        self.conv1 = nl.Conv2dFirst(L1, S, rng)
        self.bn1 = nl.BatchNorm(L1)
        self.conv2 = nl.Conv1d(L1, L2, S, rng)
        self.bn2 = nl.BatchNorm(L2)
        self.conv3 = nl.Conv1d(L2, L3, S, rng)
        self.bn3 = nl.BatchNorm(L3)
        self.conv4 = nl.Conv1d(L3, L4, S, rng)
        # (b): stage-1 output -> input of stage 3; (c): stage-1 output -> input of stage 4
        self.skip_b = nl.Conv1d(L1, L2, 1, rng_skip, bias=False) if "b" in variant.skips else None
        self.skip_c = nl.Conv1d(L1, L3, 1, rng_skip, bias=False) if "c" in variant.skips else None

    def forward(self, image):
        """image: (B, 2, KN) time-ordered, padded -> pre-activation (B, KN)."""
        h1 = self.bn1(nl.selu(self.conv1(image)))
        h2 = self.bn2(nl.selu(self.conv2(h1)))
        if self.skip_b is not None:
            h2 = h2 + self.skip_b(h1)
        h3 = self.bn3(nl.hswish(self.conv3(h2)))
        if self.skip_c is not None:
            h3 = h3 + self.skip_c(h1)
        return nt.tsum(self.conv4(h3), axis=1)


class MlpPa(nl.Module):
    """CSI estimates (Re, Im per user) -> per-user powers summing to P."""

    def __init__(self, K, hidden, rng):
        m1, m2, m3 = hidden
        self.fc1 = nl.Linear(2 * K, m1, rng)
        self.fc2 = nl.Linear(m1, m2, rng)
        self.bn = nl.BatchNorm(m2)
        self.fc3 = nl.Linear(m2, m3, rng)
        self.out = nl.Linear(m3, K, rng)

    def forward(self, h_tx, total_power):
        re, im = _split_complex(h_tx)
        feats = np.concatenate([re, im], axis=1)
        z = self.bn(nl.selu(self.fc2(nl.selu(self.fc1(feats)))))
        return nl.softmax(self.out(self.fc3(z)), axis=-1) * float(total_power)


class MlpT(nl.Module):
    """CSI estimate (Re, Im) -> combining factor.

    ``mode="direct"`` outputs q itself.  ``mode="residual"`` (default)
    multiplies the network output with the default combiner h^*/|h|^2, so
    the identity initialization (zero output weights, bias [1, 0]) starts
    training from conventional combining.
    """

    def __init__(self, hidden, rng, mode="residual"):
        if mode not in ("direct", "residual"):
            raise ValueError(f"unknown MLP-T mode {mode!r}")
        c1, c2 = hidden
        self.fc1 = nl.Linear(2, c1, rng)
        self.fc2 = nl.Linear(c1, c2, rng)
        self.out = nl.Linear(c2, 2, rng, zero=True)
        self.out.bias.data[:] = [1.0, 0.0]
        self.mode = mode

    def forward(self, h_rx):
        re, im = _split_complex(h_rx)
        t = self.out(nl.selu(self.fc2(nl.selu(self.fc1(np.stack([re, im], axis=1))))))
        t_re, t_im = t[:, 0:1], t[:, 1:2]
        if self.mode == "direct":
            return t_re, t_im
        q0_re, q0_im = _split_complex(default_combiner(h_rx)[:, None])
        return combine(t_re, t_im, q0_re, q0_im)


# --------------------------------------------------------------------------
# end-to-end system
# --------------------------------------------------------------------------

@dataclass
class SystemConfig:
    variant: str = "AE5"
    K: int = 2
    N: int = 512
    rolloff: float = 1.0
    span: int = 7
    tau: float = 0.5
    power_per_user: float = 1.0
    loss: str = "ce"
    skips: tuple = ()
    use_pa: bool = False
    use_t: bool = False
    pa_hidden: tuple = (32, 32, 32)
    t_hidden: tuple = (8, 8)
    t_mode: str = "residual"
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_MODES:
            raise ValueError(f"loss must be one of {LOSS_MODES}, got {self.loss!r}")
        if self.K < 1 or self.N <= self.span:
            raise ValueError("need K >= 1 and N > span")
        self.skips = tuple(sorted(self.skips))
        self.pa_hidden = tuple(int(m) for m in self.pa_hidden)
        self.t_hidden = tuple(int(m) for m in self.t_hidden)

    def to_dict(self):
        return dataclasses.asdict(self)


class AeSystem(nl.Module):
    def __init__(self, cfg):
        self.cfg = cfg
        K, N = cfg.K, cfg.N
        head = HEADS[cfg.loss]
        self.variant = get_variant(cfg.variant, skips=cfg.skips, final_activation=head)
        self.pulse = ch.PulseSpec(cfg.rolloff, cfg.span)
        self.offsets = np.asarray(ch.design_offsets(K, cfg.tau))
        if np.any(self.offsets < 0) or np.any(self.offsets >= 1):
            raise ValueError("design offsets must lie in [0, 1)")
        self.bank = ch.build_crosscorr_bank(self.pulse, self.offsets)
        self.colorer = ch.build_noise_colorer(self.bank, N)
        self.Nv = N - cfg.span + 1
        s = cfg.seed
        self.encoder = Encoder(self.variant, stream(s, "init", 0), stream(s, "init", 100))
        self.decoders = [Decoder(self.variant, stream(s, "init", 1 + r), stream(s, "init", 101 + r))
                         for r in range(K)]
        self.pa = MlpPa(K, cfg.pa_hidden, stream(s, "init", 50)) if cfg.use_pa else None
        self.mlp_t = ([MlpT(cfg.t_hidden, stream(s, "init", 60 + r), cfg.t_mode) for r in range(K)]
                      if cfg.use_t else None)
        # stacked (l, i) -> time-ordered, padded column index
        rank = np.argsort(np.argsort(self.offsets, kind="stable"), kind="stable")
        h = self.pulse.half_span
        self._time_cols = ((np.arange(self.Nv)[None, :] + h) * K + rank[:, None]).reshape(-1)
        self._user_cols = [np.arange(N) * K + rank[r] for r in range(K)]

    @property
    def K(self):
        return self.cfg.K

    @property
    def N(self):
        return self.cfg.N

    @property
    def total_power(self):
        return self.cfg.K * self.cfg.power_per_user

    # -- stages ------------------------------------------------------------
    def powers(self, h_tx):
        if self.pa is None:
            B = np.shape(h_tx)[0]
            return np.full((B, self.K), self.cfg.power_per_user)
        return self.pa(h_tx, self.total_power)

    def transmit(self, symbols, h_tx):
        """(B, K, N) symbols -> power-normalized encoded v (B, K, N) and powers."""
        B = symbols.shape[0]
        u = self.encoder(ch.interleave(symbols))
        u = nt.transpose(nt.reshape(u, (B, self.N, self.K)), (0, 2, 1))
        p = self.powers(h_tx)
        return normalize_power(u, p), p

    def decoder_image(self, y_re, y_im):
        """Stacked (B, K N_v) Re/Im tensors -> padded time-ordered (B, 2, KN) image."""
        img = nt.stack([y_re, y_im], axis=1)
        return _scatter_last(img, self._time_cols, self.K * self.N)

    def receive(self, s, batch, white, n0):
        """Per-user decoder outputs, each (B, N), after the activation head."""
        outs = []
        scale = np.sqrt(n0 / 2.0)
        for r in range(self.K):
            noise = scale * self.colorer.color(white[r])
            h_re, h_im = _split_complex(batch.h[:, r, None])
            y_re = s * h_re + np.real(noise)
            y_im = s * h_im + np.imag(noise)
            if self.mlp_t is not None:
                q_re, q_im = self.mlp_t[r](batch.h_rx[:, r])
            else:
                q_re, q_im = _split_complex(default_combiner(batch.h_rx[:, r])[:, None])
            yc_re, yc_im = combine(y_re, y_im, q_re, q_im)
            z = self.decoders[r](self.decoder_image(yc_re, yc_im))
            outs.append(nl.ACTIVATIONS[self.variant.final_activation](
                nt.take_last(z, self._user_cols[r])))
        return outs

    def forward(self, batch, taps, white, n0):
        """Full pass; returns (outputs (B, K, N) tensor, powers)."""
        v, p = self.transmit(batch.symbols, batch.h_tx)
        B = batch.size
        s = nt.reshape(channel_op(v, taps), (B, self.K * self.Nv))
        return nt.stack(self.receive(s, batch, white, n0), axis=1), p

    # -- persistence ---------------------------------------------------------
    def state_arrays(self):
        arrays = {f"param/{k}": p.data for k, p in self.named_parameters()}
        arrays.update({f"buffer/{k}": b for k, b in self.named_buffers()})
        return arrays

    def load_state_arrays(self, arrays):
        for k, p in self.named_parameters():
            p.data[...] = arrays[f"param/{k}"]
        for k, b in self.named_buffers():
            b[...] = arrays[f"buffer/{k}"]

    def n_storage(self):
        """Trainable parameters plus batchnorm running statistics."""
        return self.n_parameters() + sum(b.size for _, b in self.named_buffers())


def _scatter_last(a, cols, length):
    """Place a[..., j] at (distinct) column cols[j] of a zero array of ``length`` columns."""
    out_shape = a.shape[:-1] + (length,)

    def fwd(x):
        out = np.zeros(out_shape)
        out[..., cols] = x
        return out

    return nt.linear_op(a, fwd, lambda g: g[..., cols])


def build_system(cfg=None, **kwargs):
    cfg = cfg or SystemConfig(**kwargs)
    return AeSystem(cfg)


def save_system(path, system, optimizer=None, meta=None):
    arrays = system.state_arrays()
    info = {"system": system.cfg.to_dict(), **(meta or {})}
    if optimizer is not None:
        info["adam_step"] = optimizer.state.step
        for i, (m, v) in enumerate(zip(optimizer.state.m, optimizer.state.v)):
            arrays[f"adam/m/{i}"] = m
            arrays[f"adam/v/{i}"] = v
    save_checkpoint(path, arrays, system.layer_specs(), info)


def load_system(path):
    """Rebuild a system from a checkpoint; returns (system, meta, adam_moments)."""
    arrays, _, meta = load_checkpoint(path)
    cfg = dict(meta["system"])
    for key in ("skips", "pa_hidden", "t_hidden"):
        cfg[key] = tuple(cfg[key])
    system = AeSystem(SystemConfig(**cfg))
    system.load_state_arrays(arrays)
    n = sum(1 for k in arrays if k.startswith("adam/m/"))
    moments = ([arrays[f"adam/m/{i}"] for i in range(n)], [arrays[f"adam/v/{i}"] for i in range(n)])
    return system, meta, moments


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

@dataclass
class TrainConfig:
    frames: int = 131072
    batch: int = 32
    epochs: int = 20
    lr: float = 3e-3
    snr_db: float = 30.0
    alpha: float = 0.0
    kappa: float = 1.0
    timing_width: float = 0.0
    csi_variance: float = 0.0
    shared_csi: bool = False
    valid_frames: int = 512
    valid_every: int = 0
    seed: int = 0
    curve_path: str = None
    checkpoint_path: str = None

    def __post_init__(self):
        if self.frames < self.batch or self.batch < 2:
            raise ValueError("need batch >= 2 and frames >= batch")
        if self.epochs < 1 or self.lr <= 0:
            raise ValueError("epochs must be >= 1 and lr > 0")
        if self.alpha < 0 or self.kappa <= 0:
            raise ValueError("alpha must be >= 0 and kappa > 0")


class TrainingDiverged(RuntimeError):
    pass


def batch_loss(system, outputs, batch, alpha=0.0, kappa=1.0):
    """Training objective for the system's loss mode; returns (J, J_CE, J_Q)."""
    mode = system.cfg.loss
    if mode in ("mse-identity", "mse-tanh"):
        j = mse_loss(outputs, batch.symbols)
        return j, float("nan"), float("nan")
    j_ce = ce_loss(outputs, batch.bits)
    if mode == "ce+q" and alpha > 0:
        j_q = q_loss(outputs, batch.symbols, kappa)
        return combined_loss(j_ce, j_q, alpha), j_ce.item(), j_q.item()
    return j_ce, j_ce.item(), float("nan")


def hard_decisions(system, outputs):
    """Estimated bits in {0, 1}."""
    out = outputs.data if isinstance(outputs, nt.Tensor) else np.asarray(outputs)
    threshold = 0.5 if system.variant.final_activation == "sigmoid" else 0.0
    return (out > threshold).astype(np.int8)


def _n0(snr_db):
    return float(ch.snr_to_n0(snr_db))


def train(system, tcfg, log=None):
    """Adam training on a fixed set of ``tcfg.frames`` frames (bits, fading,
    impairments) with fresh noise every epoch.  Returns the learning curve
    as a list of dicts (iteration, epoch, J_CE, J_Q, BER_val)."""
    opt = Adam(system.parameters(), lr=tcfg.lr)
    n0 = _n0(tcfg.snr_db)
    width = tcfg.timing_width
    n_batches = tcfg.frames // tcfg.batch
    curve = []
    it = 0

    def record(epoch, j_ce, j_q, ber):
        row = {"iteration": it, "epoch": epoch, "J_CE": j_ce, "J_Q": j_q, "BER_val": ber}
        curve.append(row)
        return row

    record(0, float("nan"), float("nan"), validate(system, tcfg))
    for epoch in range(tcfg.epochs):
        system.train()
        for b in range(n_batches):
            batch = draw_batch(tcfg.seed, TRAIN, b, tcfg.batch, system.K, system.N, width,
                               tcfg.csi_variance, tcfg.shared_csi)
            taps = batch_taps(system.pulse, system.offsets, batch, system.bank.taps)
            white = draw_white_noise(tcfg.seed, TRAIN, b, epoch, system.K, tcfg.batch,
                                     system.K * system.Nv)
            outputs, _ = system(batch, taps, white, n0)
            j, j_ce, j_q = batch_loss(system, outputs, batch, tcfg.alpha, tcfg.kappa)
            if not np.isfinite(j.item()):
                if tcfg.checkpoint_path:
                    save_system(tcfg.checkpoint_path + ".diverged", system, opt,
                                {"iteration": it, "epoch": epoch})
                raise TrainingDiverged(f"loss became {j.item()} at iteration {it}")
            opt.zero_grad()
            j.backward()
            opt.step()
            it += 1
            val = float("nan")
            if tcfg.valid_every and it % tcfg.valid_every == 0:
                val = validate(system, tcfg)
            if mode_is_mse(system):
                j_ce = j.item()
            record(epoch + 1, j_ce, j_q, val)
        curve[-1]["BER_val"] = validate(system, tcfg)
        if log is not None:
            log(f"epoch {epoch + 1}/{tcfg.epochs}: loss {curve[-1]['J_CE']:.4g} "
                f"val BER {curve[-1]['BER_val']:.4g}")
    system.eval()
    if tcfg.curve_path:
        write_curve(tcfg.curve_path, curve)
    if tcfg.checkpoint_path:
        save_system(tcfg.checkpoint_path, system, opt, {"train": dataclasses.asdict(tcfg)})
    return curve


def mode_is_mse(system):
    return system.cfg.loss.startswith("mse")


def write_curve(path, curve):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "epoch", "J_CE", "J_Q", "BER_val"])
        for row in curve:
            w.writerow([row["iteration"], row["epoch"]] +
                       [_fmt(row[k]) for k in ("J_CE", "J_Q", "BER_val")])


def _fmt(x):
    return "" if x is None or not np.isfinite(x) else repr(float(x))


def validate(system, tcfg):
    """BER on the held-out validation frames at the training SNR."""
    res = evaluate(system, [tcfg.snr_db], tcfg.valid_frames, tcfg.timing_width, tcfg.csi_variance,
                   seed=tcfg.seed, batch=max(tcfg.batch, 64), split=VALID,
                   shared_csi=tcfg.shared_csi)
    return float(res.ber_avg[0])


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

@dataclass
class AeBerResult:
    snr_db: np.ndarray
    ber: np.ndarray
    ci95: np.ndarray
    ber_avg: np.ndarray
    ci95_avg: np.ndarray
    frames: int
    powers: np.ndarray = field(default=None, repr=False)


def evaluate(system, snr_db, frames, timing_width=0.0, csi_variance=0.0, seed=0, batch=256,
             split=TEST, shared_csi=False, keep_powers=False):
    """Monte Carlo BER with hard decisions (inference-mode batchnorm).

    CIs are 1.96 standard errors over per-frame error fractions.
    """
    snr_db = np.atleast_1d(np.asarray(snr_db, dtype=float))
    was_training = system.training
    system.eval()
    errs = np.zeros((snr_db.size, frames, system.K))
    powers = [] if keep_powers else None
    with nt.no_grad():
        for b in range(-(-frames // batch)):
            B = min(batch, frames - b * batch)
            rows = slice(b * batch, b * batch + B)
            fb = draw_batch(seed, split, b, B, system.K, system.N, timing_width, csi_variance,
                            shared_csi)
            taps = batch_taps(system.pulse, system.offsets, fb, system.bank.taps)
            v, p = system.transmit(fb.symbols, fb.h_tx)
            s = nt.reshape(channel_op(v, taps), (B, system.K * system.Nv))
            if keep_powers:
                powers.append(np.asarray(p.data if isinstance(p, nt.Tensor) else p))
            for si, snr in enumerate(snr_db):
                white = draw_white_noise(seed, split, b, si, system.K, B, system.K * system.Nv)
                outs = system.receive(s, fb, white, _n0(snr))
                for r, o in enumerate(outs):
                    errs[si, rows, r] = np.mean(hard_decisions(system, o) != fb.bits[:, r], axis=1)
    system.train(was_training)
    ber = errs.mean(axis=1)
    sd = errs.std(axis=1, ddof=1) if frames > 1 else np.zeros_like(ber)
    avg = errs.mean(axis=2)
    sd_avg = avg.std(axis=1, ddof=1) if frames > 1 else np.zeros(snr_db.size)
    return AeBerResult(snr_db, ber, Z95 * sd / np.sqrt(frames), avg.mean(axis=1),
                       Z95 * sd_avg / np.sqrt(frames), frames,
                       np.concatenate(powers) if keep_powers else None)


# --------------------------------------------------------------------------
# complexity counters
# --------------------------------------------------------------------------

def measure_complexity(system):
    """Forward multiply-adds and storage for one frame, per component."""
    K, N = system.K, system.N
    fb = draw_batch(0, TEST, 0, 2, K, N)
    was = system.training
    system.eval()
    out = {}
    with nt.no_grad():
        with nt.count_macs() as c:
            system.encoder(ch.interleave(fb.symbols[:1]))
        out["cnn_encoder"] = (c["count"], _storage(system.encoder))
        img = nt.Tensor(np.zeros((1, 2, K * N)))
        with nt.count_macs() as c:
            for d in system.decoders:
                d(img)
        out["cnn_decoder"] = (c["count"], sum(_storage(d) for d in system.decoders))
        if system.pa is not None:
            with nt.count_macs() as c:
                system.pa(fb.h_tx[:1], system.total_power)
            out["mlp_pa"] = (c["count"], _storage(system.pa))
        if system.mlp_t is not None:
            with nt.count_macs() as c:
                system.mlp_t[0](fb.h_rx[:1, 0])
            out["mlp_t"] = (c["count"], _storage(system.mlp_t[0]))
    system.train(was)
    return out


def _storage(module):
    return module.n_parameters() + sum(b.size for _, b in module.named_buffers())
