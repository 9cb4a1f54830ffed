"""Recurrent variational autoencoder over stroke sequences.

A forward-backward LSTM reads the (dx, dy, lift) sequence; final hidden
states are concatenated and projected to a deterministic bottleneck code,
from which mean and log-variance heads parameterize the sampled latent. A
linear classifier hangs off the mean. The decoder projects a latent to its
initial LSTM state and rolls the sequence out autoregressively, emitting
(dx, dy, lift-logit, end-logit) per step.

Training optimizes reconstruction + KL + classification with equal weights.
The log-variance head is hard-clamped so elementwise variance never exceeds
VARIANCE_CEILING, keeping the sampled path tight for downstream consumers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import grad, nn
from .grad import Tensor, backward, no_grad
from .optim import AdamState, step_from_tape
from .sketch import Sketch, fit_to_length

VARIANCE_CEILING = 1e-2
LOG_VAR_CEILING = math.log(VARIANCE_CEILING)
START_TOKEN = np.array([0.0, 0.0, 0.0])


@dataclass
class VaeConfig:
    latent_dim: int = 128
    encoder_hidden: int = 256
    decoder_hidden: int = 256
    max_len: int = 96
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_decay_at: tuple = ()  # epoch indices where the rate is multiplied down
    lr_decay: float = 0.3
    offset_weight: float = 1.0  # weight of the (dx, dy) error inside reconstruction
    seed: int = 0
    clamp_variance: bool = True
    sample_during_training: bool = True
    checkpoint_dir: str | None = None


@dataclass
class EncoderParams:
    wx_f: Tensor
    wh_f: Tensor
    b_f: Tensor
    wx_b: Tensor
    wh_b: Tensor
    b_b: Tensor
    w_z0: Tensor
    b_z0: Tensor
    w_mu: Tensor
    b_mu: Tensor
    w_lv: Tensor
    b_lv: Tensor
    w_cls: Tensor
    b_cls: Tensor
    classes: list[str] = field(default_factory=list)
    clamp_variance: bool = True

    @property
    def latent_dim(self) -> int:
        return self.w_mu.shape[1]

    @property
    def hidden(self) -> int:
        return self.wh_f.shape[0]

    def params(self) -> dict[str, Tensor]:
        return {f"enc.{k}": getattr(self, k) for k in (
            "wx_f", "wh_f", "b_f", "wx_b", "wh_b", "b_b",
            "w_z0", "b_z0", "w_mu", "b_mu", "w_lv", "b_lv", "w_cls", "b_cls",
        )}


@dataclass
class DecoderParams:
    w_init: Tensor
    b_init: Tensor
    wx: Tensor
    wh: Tensor
    b: Tensor
    w_out: Tensor
    b_out: Tensor

    @property
    def latent_dim(self) -> int:
        return self.w_init.shape[0]

    @property
    def hidden(self) -> int:
        return self.wh.shape[0]

    def params(self) -> dict[str, Tensor]:
        return {f"dec.{k}": getattr(self, k) for k in ("w_init", "b_init", "wx", "wh", "b", "w_out", "b_out")}


@dataclass
class LatentCode:
    z0: np.ndarray
    mu: np.ndarray
    log_var: np.ndarray
    batch_z: np.ndarray


@dataclass
class VaeLosses:
    reconstruction: float
    kl: float
    classification: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.kl + self.classification


@dataclass
class DecodeResult:
    sketch: Sketch
    steps: int
    hit_max_steps: bool


def init_encoder(rng: np.random.Generator, latent_dim: int, hidden: int, classes: list[str],
                 clamp_variance: bool = True) -> EncoderParams:
    wx_f, wh_f, b_f = nn.lstm_params(rng, 3, hidden)
    wx_b, wh_b, b_b = nn.lstm_params(rng, 3, hidden)
    return EncoderParams(
        wx_f=Tensor(wx_f, requires_grad=True),
        wh_f=Tensor(wh_f, requires_grad=True),
        b_f=Tensor(b_f, requires_grad=True),
        wx_b=Tensor(wx_b, requires_grad=True),
        wh_b=Tensor(wh_b, requires_grad=True),
        b_b=Tensor(b_b, requires_grad=True),
        w_z0=Tensor(nn.glorot(rng, 2 * hidden, latent_dim), requires_grad=True),
        b_z0=Tensor(np.zeros(latent_dim), requires_grad=True),
        w_mu=Tensor(nn.glorot(rng, latent_dim, latent_dim), requires_grad=True),
        b_mu=Tensor(np.zeros(latent_dim), requires_grad=True),
        w_lv=Tensor(nn.glorot(rng, latent_dim, latent_dim) * 0.1, requires_grad=True),
        b_lv=Tensor(np.full(latent_dim, LOG_VAR_CEILING - 1.0), requires_grad=True),
        w_cls=Tensor(nn.glorot(rng, latent_dim, len(classes)), requires_grad=True),
        b_cls=Tensor(np.zeros(len(classes)), requires_grad=True),
        classes=list(classes),
        clamp_variance=clamp_variance,
    )


def init_decoder(rng: np.random.Generator, latent_dim: int, hidden: int) -> DecoderParams:
    wx, wh, b = nn.lstm_params(rng, 3 + latent_dim, hidden)
    return DecoderParams(
        w_init=Tensor(nn.glorot(rng, latent_dim, 2 * hidden), requires_grad=True),
        b_init=Tensor(np.zeros(2 * hidden), requires_grad=True),
        wx=Tensor(wx, requires_grad=True),
        wh=Tensor(wh, requires_grad=True),
        b=Tensor(b, requires_grad=True),
        w_out=Tensor(nn.glorot(rng, hidden, 4), requires_grad=True),
        b_out=Tensor(np.zeros(4), requires_grad=True),
    )


# -- batching -----------------------------------------------------------------


def pad_batch(sketches: list[Sketch]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad to the longest sketch; returns (points (B,T,3), mask (B,T))."""
    lengths = [len(s) for s in sketches]
    t_max = max(lengths)
    points = np.zeros((len(sketches), t_max, 3))
    mask = np.zeros((len(sketches), t_max))
    for i, s in enumerate(sketches):
        points[i, : lengths[i]] = s.points
        mask[i, : lengths[i]] = 1.0
    return points, mask


def _run_lstm(points: np.ndarray, mask: np.ndarray, wx, wh, b, reverse: bool) -> Tensor:
    batch, t_max, _ = points.shape
    hidden = wh.shape[0]
    h = Tensor(np.zeros((batch, hidden)))
    c = Tensor(np.zeros((batch, hidden)))
    steps = range(t_max - 1, -1, -1) if reverse else range(t_max)
    for t in steps:
        x = Tensor(points[:, t, :])
        m = Tensor(mask[:, t : t + 1])
        h_new, c_new = nn.lstm_step(x, h, c, wx, wh, b)
        h = nn.masked_update(h_new, h, m)
        c = nn.masked_update(c_new, c, m)
    return h


def encode_tape(points: np.ndarray, mask: np.ndarray, enc: EncoderParams) -> tuple[Tensor, Tensor, Tensor]:
    """Traced encoder over a padded batch; returns (z0, mu, log_var) tensors."""
    h_f = _run_lstm(points, mask, enc.wx_f, enc.wh_f, enc.b_f, reverse=False)
    h_b = _run_lstm(points, mask, enc.wx_b, enc.wh_b, enc.b_b, reverse=True)
    joined = grad.concat([h_f, h_b], axis=1)
    z0 = nn.linear(joined, enc.w_z0, enc.b_z0)
    mu = nn.linear(z0, enc.w_mu, enc.b_mu)
    log_var = nn.linear(z0, enc.w_lv, enc.b_lv)
    if enc.clamp_variance:
        log_var = grad.clamp_max(log_var, LOG_VAR_CEILING)
    return z0, mu, log_var


def sample_latent(mu: np.ndarray, log_var: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Reparameterized draw: mu + exp(log_var / 2) * eta."""
    eta = rng.standard_normal(mu.shape)
    return mu + np.exp(log_var / 2.0) * eta


def encode(sketch: Sketch, enc: EncoderParams, sample: bool = False,
           rng: np.random.Generator | None = None, max_len: int = 96) -> LatentCode:
    """Deterministic latent code for one sketch; optionally a sampled draw."""
    if len(sketch) > max_len:
        raise ValueError(f"sketch has {len(sketch)} points, limit is {max_len}")
    points, mask = pad_batch([sketch])
    with no_grad():
        z0, mu, log_var = encode_tape(points, mask, enc)
    z0v, muv, lvv = z0.data[0], mu.data[0], log_var.data[0]
    if sample:
        batch_z = sample_latent(muv, lvv, rng or np.random.default_rng(0))
    else:
        batch_z = muv.copy()
    return LatentCode(z0=z0v, mu=muv, log_var=lvv, batch_z=batch_z)


def encode_many(sketches: list[Sketch], enc: EncoderParams, batch_size: int = 64) -> np.ndarray:
    """Deterministic mean codes for a corpus, row-aligned with the input."""
    out = np.empty((len(sketches), enc.latent_dim))
    for lo in range(0, len(sketches), batch_size):
        chunk = sketches[lo : lo + batch_size]
        points, mask = pad_batch(chunk)
        with no_grad():
            _, mu, _ = encode_tape(points, mask, enc)
        out[lo : lo + len(chunk)] = mu.data
    return out


def classify(mu: np.ndarray, enc: EncoderParams) -> np.ndarray:
    """Class logits from mean codes (rows)."""
    return np.atleast_2d(mu) @ enc.w_cls.data + enc.b_cls.data


# -- decoding -----------------------------------------------------------------


def _decoder_state(z: Tensor, dec: DecoderParams) -> tuple[Tensor, Tensor]:
    init = grad.tanh(nn.linear(z, dec.w_init, dec.b_init))
    hidden = dec.hidden
    return init[:, :hidden], init[:, hidden:]


def decode(z: np.ndarray, dec: DecoderParams, max_steps: int = 96) -> DecodeResult:
    """Greedy autoregressive rollout from a latent vector."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    rows = []
    hit_max = False
    with no_grad():
        zt = Tensor(z)
        h, c = _decoder_state(zt, dec)
        prev = START_TOKEN.copy()
        for step in range(max_steps):
            x = grad.concat([Tensor(prev.reshape(1, 3)), zt], axis=1)
            h, c = nn.lstm_step(x, h, c, dec.wx, dec.wh, dec.b)
            out = nn.linear(h, dec.w_out, dec.b_out).data[0]
            lift = 1.0 if out[2] > 0.0 else 0.0
            end = out[3] > 0.0
            rows.append([out[0], out[1], lift])
            prev = np.array([out[0], out[1], lift])
            if end:
                break
        else:
            hit_max = True
    rows[-1][2] = 1.0
    return DecodeResult(sketch=Sketch(rows), steps=len(rows), hit_max_steps=hit_max)


# -- losses ---------------------------------------------------------------------


def kl_loss(mu: np.ndarray, log_var: np.ndarray) -> float:
    """-0.5 * sum(1 + log_var - mu^2 - exp(log_var)), batch-averaged."""
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    log_var = np.atleast_2d(np.asarray(log_var, dtype=np.float64))
    if mu.shape != log_var.shape:
        raise ValueError(f"mu shape {mu.shape} != log_var shape {log_var.shape}")
    per_item = -0.5 * (1.0 + log_var - mu**2 - np.exp(log_var)).sum(axis=1)
    return float(per_item.mean())


def covariance_clamp(log_var: np.ndarray) -> np.ndarray:
    """Cap elementwise variance at VARIANCE_CEILING."""
    return np.minimum(np.asarray(log_var, dtype=np.float64), LOG_VAR_CEILING)


def _kl_tape(mu: Tensor, log_var: Tensor) -> Tensor:
    batch = mu.shape[0]
    inner = 1.0 + log_var - mu * mu - grad.exp(log_var)
    return grad.tensor_sum(inner) * (-0.5 / batch)


def reconstruction_targets(points: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-forcing inputs (start token then shifted points) and end flags."""
    batch, t_max, _ = points.shape
    inputs = np.zeros_like(points)
    inputs[:, 0, :] = START_TOKEN
    inputs[:, 1:, :] = points[:, :-1, :]
    lengths = mask.sum(axis=1).astype(int)
    end_flags = np.zeros((batch, t_max))
    end_flags[np.arange(batch), lengths - 1] = 1.0
    return inputs, end_flags


def vae_batch_loss(
    points: np.ndarray,
    mask: np.ndarray,
    labels: np.ndarray,
    enc: EncoderParams,
    dec: DecoderParams,
    eps: np.ndarray | None,
    offset_weight: float = 1.0,
) -> tuple[Tensor, VaeLosses]:
    """Traced total loss over a padded batch (eps=None disables sampling)."""
    batch, t_max, _ = points.shape
    z0, mu, log_var = encode_tape(points, mask, enc)
    if eps is not None:
        batch_z = mu + grad.exp(log_var * 0.5) * Tensor(eps)
    else:
        batch_z = mu

    inputs, end_flags = reconstruction_targets(points, mask)
    h, c = _decoder_state(batch_z, dec)
    point_loss = None
    for t in range(t_max):
        x = grad.concat([Tensor(inputs[:, t, :]), batch_z], axis=1)
        h_new, c_new = nn.lstm_step(x, h, c, dec.wx, dec.wh, dec.b)
        m = Tensor(mask[:, t : t + 1])
        h = nn.masked_update(h_new, h, m)
        c = nn.masked_update(c_new, c, m)
        out = nn.linear(h, dec.w_out, dec.b_out)
        se = grad.tensor_sum((out[:, 0:2] - Tensor(points[:, t, 0:2])) ** 2.0, axis=1, keepdims=True)
        lift_bce = nn.bce_with_logits(out[:, 2:3], points[:, t, 2:3])
        end_bce = nn.bce_with_logits(out[:, 3:4], end_flags[:, t : t + 1])
        step_loss = grad.tensor_sum((se * offset_weight + lift_bce + end_bce) * m)
        point_loss = step_loss if point_loss is None else point_loss + step_loss

    # per-sketch sum (sequence log-likelihood), averaged over the batch, so
    # the reconstruction term is commensurate with the per-item KL sum
    recon = point_loss * (1.0 / float(batch))
    kl = _kl_tape(mu, log_var)
    logits = nn.linear(mu, enc.w_cls, enc.b_cls)
    cls = nn.cross_entropy(logits, labels)
    total = recon + kl + cls
    parts = VaeLosses(reconstruction=recon.item(), kl=kl.item(), classification=cls.item())
    return total, parts


# -- training ---------------------------------------------------------------------


def train_vae(corpus: list[Sketch], config: VaeConfig) -> tuple[EncoderParams, DecoderParams, list[dict]]:
    """Adam optimization of the combined loss; returns params and the loss curve."""
    labeled = [s for s in corpus if s.label is not None]
    classes = sorted({s.label for s in labeled})
    if len(classes) < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    class_of = {c: i for i, c in enumerate(classes)}
    data = [fit_to_length(s, config.max_len) for s in labeled]
    labels_all = np.array([class_of[s.label] for s in data])

    rng = np.random.default_rng(config.seed)
    enc = init_encoder(rng, config.latent_dim, config.encoder_hidden, classes, config.clamp_variance)
    dec = init_decoder(rng, config.latent_dim, config.decoder_hidden)
    params = {**enc.params(), **dec.params()}
    state = AdamState(lr=config.learning_rate)
    curve: list[dict] = []
    last_good: dict[str, np.ndarray] | None = None

    for epoch in range(config.epochs):
        if epoch in config.lr_decay_at:
            state.lr *= config.lr_decay
        order = rng.permutation(len(data))
        sums = np.zeros(3)
        batches = 0
        for lo in range(0, len(data), config.batch_size):
            pick = order[lo : lo + config.batch_size]
            chunk = [data[i] for i in pick]
            points, mask = pad_batch(chunk)
            eps = rng.standard_normal((len(chunk), config.latent_dim)) if config.sample_during_training else None
            total, parts = vae_batch_loss(points, mask, labels_all[pick], enc, dec, eps, config.offset_weight)
            if not np.isfinite(total.data):
                if last_good is not None:
                    for name, arr in last_good.items():
                        params[name].data = arr.copy()
                curve.append({"epoch": epoch, "diverged": True})
                return enc, dec, curve
            backward(total)
            step_from_tape(params, state)
            sums += (parts.reconstruction, parts.kl, parts.classification)
            batches += 1
        rec, kl, cls = sums / batches
        curve.append(
            {"epoch": epoch, "reconstruction": rec, "kl": kl, "classification": cls, "total": rec + kl + cls}
        )
        last_good = {name: p.data.copy() for name, p in params.items()}
        if config.checkpoint_dir:
            save_vae(f"{config.checkpoint_dir}/vae_epoch{epoch:03d}.npz", enc, dec)
    return enc, dec, curve


def classification_accuracy(sketches: list[Sketch], enc: EncoderParams, max_len: int = 96) -> float:
    data = [fit_to_length(s, max_len) for s in sketches]
    mu = encode_many(data, enc)
    pred = classify(mu, enc).argmax(axis=1)
    truth = np.array([enc.classes.index(s.label) for s in data])
    return float((pred == truth).mean())


# -- persistence --------------------------------------------------------------------


def save_vae(path, enc: EncoderParams, dec: DecoderParams) -> None:
    from .checkpoint import save_params

    arrays = {name: t.data for name, t in {**enc.params(), **dec.params()}.items()}
    meta = {
        "kind": "seqvae",
        "classes": enc.classes,
        "clamp_variance": enc.clamp_variance,
    }
    save_params(path, arrays, meta)


def load_vae(path) -> tuple[EncoderParams, DecoderParams]:
    from .checkpoint import load_params

    arrays, meta = load_params(path)
    if meta.get("kind") != "seqvae":
        raise ValueError(f"{path}: not a sequence-vae checkpoint")

    def t(name):
        return Tensor(arrays[name], requires_grad=True)

    enc = EncoderParams(
        wx_f=t("enc.wx_f"), wh_f=t("enc.wh_f"), b_f=t("enc.b_f"),
        wx_b=t("enc.wx_b"), wh_b=t("enc.wh_b"), b_b=t("enc.b_b"),
        w_z0=t("enc.w_z0"), b_z0=t("enc.b_z0"),
        w_mu=t("enc.w_mu"), b_mu=t("enc.b_mu"),
        w_lv=t("enc.w_lv"), b_lv=t("enc.b_lv"),
        w_cls=t("enc.w_cls"), b_cls=t("enc.b_cls"),
        classes=list(meta["classes"]),
        clamp_variance=bool(meta["clamp_variance"]),
    )
    dec = DecoderParams(
        w_init=t("dec.w_init"), b_init=t("dec.b_init"),
        wx=t("dec.wx"), wh=t("dec.wh"), b=t("dec.b"),
        w_out=t("dec.w_out"), b_out=t("dec.b_out"),
    )
    return enc, dec
