"""Joint search space: four fully-connected layers over both modalities.

The first layer is modality-specific (latent codes vs raster structure
features); layers 2-4 are one shared set of weights. Outputs are
L2-normalized, so search distances live in [0, 2]. Training minimizes the
squared-distance triplet hinge between a stroke-encoded anchor, the render
of the same sketch, and a render of a different class, with the upstream
encoders frozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grad, nn, rasternet, seqvae
from .grad import Tensor, backward, no_grad
from .optim import AdamState, step_from_tape
from .raster import rasterize
from .corpus import Dataset
from .sketch import RasterCanvas, Sketch, rdp_simplify, shuffle_strokes

TRIPLET_MARGIN = 0.2


@dataclass
class FcStackParams:
    w1_vec: Tensor
    b1_vec: Tensor
    w1_ras: Tensor
    b1_ras: Tensor
    w2: Tensor
    b2: Tensor
    w3: Tensor
    b3: Tensor
    w4: Tensor
    b4: Tensor

    @property
    def search_dim(self) -> int:
        return self.w4.shape[1]

    def params(self) -> dict[str, Tensor]:
        return {f"fc.{k}": getattr(self, k) for k in (
            "w1_vec", "b1_vec", "w1_ras", "b1_ras", "w2", "b2", "w3", "b3", "w4", "b4",
        )}


def init_fc_stack(rng: np.random.Generator, latent_dim: int, raster_dim: int,
                  hidden: int = 128, search_dim: int = 64) -> FcStackParams:
    def lin(fan_in, fan_out):
        return Tensor(nn.glorot(rng, fan_in, fan_out), requires_grad=True), Tensor(
            np.zeros(fan_out), requires_grad=True
        )

    w1v, b1v = lin(latent_dim, hidden)
    w1r, b1r = lin(raster_dim, hidden)
    w2, b2 = lin(hidden, hidden)
    w3, b3 = lin(hidden, hidden)
    w4, b4 = lin(hidden, search_dim)
    return FcStackParams(w1v, b1v, w1r, b1r, w2, b2, w3, b3, w4, b4)


def _shared_tail(h: Tensor, fc: FcStackParams) -> Tensor:
    h = grad.relu(nn.linear(h, fc.w2, fc.b2))
    h = grad.relu(nn.linear(h, fc.w3, fc.b3))
    return grad.normalize_rows(nn.linear(h, fc.w4, fc.b4))


def project_latent_tape(v: Tensor, fc: FcStackParams) -> Tensor:
    """Latent-side path; rows of `v` map to unit vectors in search space."""
    return _shared_tail(grad.relu(nn.linear(v, fc.w1_vec, fc.b1_vec)), fc)


def project_raster_tape(r: Tensor, fc: FcStackParams) -> Tensor:
    return _shared_tail(grad.relu(nn.linear(r, fc.w1_ras, fc.b1_ras)), fc)


def project_latent(v: np.ndarray, fc: FcStackParams) -> np.ndarray:
    squeeze = np.ndim(v) == 1
    with no_grad():
        out = project_latent_tape(Tensor(np.atleast_2d(v)), fc).data
    return out[0] if squeeze else out


def project_raster(r: np.ndarray, fc: FcStackParams) -> np.ndarray:
    squeeze = np.ndim(r) == 1
    with no_grad():
        out = project_raster_tape(Tensor(np.atleast_2d(r)), fc).data
    return out[0] if squeeze else out


def embed_query(sketch: Sketch, enc: seqvae.EncoderParams, fc: FcStackParams, max_len: int = 96) -> np.ndarray:
    """Stroke sequence -> search space (deterministic encoder path)."""
    code = seqvae.encode(sketch, enc, sample=False, max_len=max_len)
    return project_latent(code.mu, fc)


def embed_image(canvas: RasterCanvas, struct: rasternet.StructureEncoderParams, fc: FcStackParams) -> np.ndarray:
    """Gallery image -> search space via the image branch."""
    return project_raster(rasternet.encode_image(canvas, struct), fc)


def embed_sketch_raster(canvas: RasterCanvas, struct: rasternet.StructureEncoderParams,
                        fc: FcStackParams) -> np.ndarray:
    """Rendered sketch -> search space via the sketch branch (training-side path)."""
    return project_raster(rasternet.encode_sketch_raster(canvas, struct), fc)


# -- triplet loss ---------------------------------------------------------------------


def visual_targets(pixel_batch: np.ndarray, out_dim: int, pool: int = 4, seed: int = 0) -> np.ndarray:
    """Unit sphere codes of dilated, pooled renders via a seeded random projection.

    Pooled ink descriptors have stable norms, and a random projection keeps
    their relative distances, so every target direction is well conditioned
    (a per-item-normalized PCA would blow up items near the corpus mean).
    """
    from .raster import dilate

    n, _, h, w = pixel_batch.shape
    pooled = np.stack([
        dilate(img[0], 1).reshape(h // pool, pool, w // pool, pool).mean(axis=(1, 3)).ravel()
        for img in pixel_batch
    ])
    pooled /= np.maximum(np.linalg.norm(pooled, axis=1, keepdims=True), 1e-12)
    proj_matrix = np.random.default_rng(seed).standard_normal((pooled.shape[1], out_dim)) / np.sqrt(out_dim)
    proj = pooled @ proj_matrix
    norms = np.maximum(np.linalg.norm(proj, axis=1, keepdims=True), 1e-12)
    return proj / norms


def triplet_hinge(anchor_s: np.ndarray, pos_s: np.ndarray, neg_s: np.ndarray,
                  margin: float = TRIPLET_MARGIN) -> float:
    """[margin + d2(a, p) - d2(a, n)]_+ on already-embedded vectors."""
    d_pos = float(((anchor_s - pos_s) ** 2).sum())
    d_neg = float(((anchor_s - neg_s) ** 2).sum())
    return max(0.0, margin + d_pos - d_neg)


def triplet_loss(
    anchor: Sketch,
    positive: RasterCanvas,
    negative: RasterCanvas,
    margin: float,
    enc: seqvae.EncoderParams,
    struct: rasternet.StructureEncoderParams,
    fc: FcStackParams,
    max_len: int = 96,
) -> float:
    """Full-path hinge: stroke anchor vs sketch-branch renders of p and n."""
    sa = embed_query(anchor, enc, fc, max_len)
    sp = embed_sketch_raster(positive, struct, fc)
    sn = embed_sketch_raster(negative, struct, fc)
    return triplet_hinge(sa, sp, sn, margin)


@dataclass
class JointTrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden: int = 128
    search_dim: int = 64
    margin: float = TRIPLET_MARGIN
    # batch-contrastive pairing of each anchor with its own render; the hinge
    # alone only separates classes, and at desk scale that collapses every
    # class to a point, losing instance alignment across modalities
    contrast_weight: float = 1.0
    contrast_temperature: float = 0.1
    # extra anchor codes from stroke-shuffled and re-simplified copies: the
    # render is blind to stroke order and to point count, so pairing their
    # codes with the same render teaches the projection to discard both
    # nuisance factors instead of memorizing per-item correspondences
    shuffle_variants: int = 2
    simplify_epsilons: tuple = (0.05, 0.12)
    # adapt the render branch toward the (frozen) sequence codes; frozen
    # raster features cannot be instance-matched from the latent side on
    # held-out items, so the fc layers alone memorize the training corpus
    finetune_raster: bool = True
    contrast_bank: int = 128
    # regress both paths onto a fixed pixel-derived descriptor of each item's
    # render (pooled, principal-component projected, unit norm). A shared
    # visually-grounded target makes instance alignment generalize: each
    # branch only has to predict its own drawing's appearance, not discover a
    # cross-network correspondence from a few hundred pairs
    visual_target_weight: float = 2.0
    visual_target_pool: int = 4
    seed: int = 0


def train_joint(
    dataset: Dataset,
    enc: seqvae.EncoderParams,
    struct: rasternet.StructureEncoderParams,
    config: JointTrainConfig,
) -> tuple[FcStackParams, list[dict]]:
    """Train the fc stack on precomputed frozen-encoder features.

    Anchors are latent codes of training sketches; positives are the
    sketch-branch features of each anchor's own render; negatives come from
    a different class, resampled each epoch. History rows carry the epoch
    hinge loss, held-out triplet accuracy, and the sketch/image branch gap.
    """
    labels = sorted({s.label for _, s in dataset.train})
    rng = np.random.default_rng(config.seed)

    train_sketches = dataset.train_sketches()
    v_variants = [seqvae.encode_many(train_sketches, enc)]
    for k in range(config.shuffle_variants):
        shuffled = [shuffle_strokes(s, seed=config.seed * 1000 + k * len(train_sketches) + i)
                    for i, s in enumerate(train_sketches)]
        v_variants.append(seqvae.encode_many(shuffled, enc))
    for eps in config.simplify_epsilons:
        resimplified = [rdp_simplify(s, eps) for s in train_sketches]
        v_variants.append(seqvae.encode_many(resimplified, enc))
    v_codes = v_variants[0]
    renders = [rasterize(s, dataset.raster_size) for s in train_sketches]
    pixels = rasternet.canvases_to_batch(renders)
    r_feats = rasternet.encode_batch(renders, struct, "sketch")
    y = np.array([labels.index(s.label) for s in train_sketches])
    by_class = {c: np.flatnonzero(y == c) for c in range(len(labels))}

    gap = rasternet.branch_gap(struct, renders[: min(64, len(renders))])
    targets = (
        visual_targets(pixels, config.search_dim, config.visual_target_pool, seed=config.seed)
        if config.visual_target_weight > 0
        else None
    )

    test_sketches = dataset.test_sketches()
    v_test = seqvae.encode_many(test_sketches, enc)
    test_renders = [rasterize(s, dataset.raster_size) for s in test_sketches]
    y_test = np.array([labels.index(s.label) for s in test_sketches])

    fc = init_fc_stack(rng, v_codes.shape[1], r_feats.shape[1], config.hidden, config.search_dim)
    opt_params = dict(fc.params())
    if config.finetune_raster:
        cnn_params = {k: t for k, t in struct.params().items() if not k.startswith("struct.first_image")}
        opt_params.update(cnn_params)
    state = AdamState(lr=config.learning_rate)
    history = []
    n = len(train_sketches)
    for epoch in range(config.epochs):
        if config.finetune_raster:
            r_feats = rasternet.encode_batch(renders, struct, "sketch")  # refresh stale bank
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            neg_idx = np.array([rng.choice(by_class[rng.choice([c for c in by_class if c != y[i]])]) for i in idx])
            anchor_codes = np.stack([v_variants[rng.integers(len(v_variants))][i] for i in idx])
            sa = project_latent_tape(Tensor(anchor_codes), fc)
            if config.finetune_raster:
                live = rasternet._structure_tape(pixels[idx], struct, "sketch")
                sp = project_raster_tape(live, fc)
            else:
                sp = project_raster_tape(Tensor(r_feats[idx]), fc)
            # negatives and the contrast bank use bank features: gradients
            # reach the projection layers but not the conv stack, keeping one
            # conv pass per step
            sn = project_raster_tape(Tensor(r_feats[neg_idx]), fc)
            d_pos = grad.tensor_sum((sa - sp) ** 2.0, axis=1)
            d_neg = grad.tensor_sum((sa - sn) ** 2.0, axis=1)
            hinge = grad.tensor_mean(grad.relu(d_pos - d_neg + config.margin))
            # unit vectors make the dot product an affine stand-in for
            # -d^2 / temperature in the softmax
            outside = np.setdiff1d(np.arange(n), idx)
            bank_n = min(config.contrast_bank, len(outside))
            cols = [grad.matmul(sa, sp.T)]
            if bank_n:
                bank_idx = rng.choice(outside, size=bank_n, replace=False)
                bank = project_raster_tape(Tensor(r_feats[bank_idx]), fc)
                cols.append(grad.matmul(sa, bank.T))
            logits = grad.concat(cols, axis=1) * (2.0 / config.contrast_temperature)
            contrast = nn.cross_entropy(logits, np.arange(len(idx)))
            loss = hinge + contrast * config.contrast_weight
            if targets is not None:
                t = Tensor(targets[idx])
                anchor_reg = grad.tensor_mean(grad.tensor_sum((sa - t) ** 2.0, axis=1))
                render_reg = grad.tensor_mean(grad.tensor_sum((sp - t) ** 2.0, axis=1))
                loss = loss + (anchor_reg + render_reg) * config.visual_target_weight
            if not np.isfinite(loss.data):
                history.append({"epoch": epoch, "diverged": True})
                return fc, history
            backward(loss)
            step_from_tape(opt_params, state)
            losses.append(loss.item())
        r_test = rasternet.encode_batch(test_renders, struct, "sketch")
        history.append(
            {
                "epoch": epoch,
                "triplet_loss": float(np.mean(losses)),
                "val_triplet_accuracy": validation_triplet_accuracy(fc, v_test, r_test, y_test, seed=epoch),
                "branch_gap": gap if not config.finetune_raster
                else rasternet.branch_gap(struct, renders[: min(64, len(renders))]),
            }
        )
    return fc, history


def validation_triplet_accuracy(fc: FcStackParams, v_codes: np.ndarray, r_feats: np.ndarray,
                                y: np.ndarray, seed: int = 0, trials: int = 200) -> float:
    """Fraction of random eligible triplets with d(a, p) < d(a, n)."""
    rng = np.random.default_rng(seed)
    s_vec = project_latent(v_codes, fc)
    s_ras = project_raster(r_feats, fc)
    hits = 0
    n = len(y)
    for _ in range(trials):
        i = int(rng.integers(n))
        neg_pool = np.flatnonzero(y != y[i])
        j = int(rng.choice(neg_pool))
        d_pos = ((s_vec[i] - s_ras[i]) ** 2).sum()
        d_neg = ((s_vec[i] - s_ras[j]) ** 2).sum()
        hits += int(d_pos < d_neg)
    return hits / trials


# -- persistence -----------------------------------------------------------------------


def save_fc(path, fc: FcStackParams) -> None:
    from .checkpoint import save_params

    save_params(path, {name: t.data for name, t in fc.params().items()}, {"kind": "fc_stack"})


def load_fc(path) -> FcStackParams:
    from .checkpoint import load_params

    arrays, meta = load_params(path)
    if meta.get("kind") != "fc_stack":
        raise ValueError(f"{path}: not an fc-stack checkpoint")

    def t(name):
        return Tensor(arrays[name], requires_grad=True)

    return FcStackParams(
        w1_vec=t("fc.w1_vec"), b1_vec=t("fc.b1_vec"),
        w1_ras=t("fc.w1_ras"), b1_ras=t("fc.b1_ras"),
        w2=t("fc.w2"), b2=t("fc.b2"), w3=t("fc.w3"), b3=t("fc.b3"), w4=t("fc.w4"), b4=t("fc.b4"),
    )
