"""Convolutional encoders for rasterized content.

Two small stride-2 conv stacks:

* a structure encoder with one unshared first block per branch (sketch
  renders vs gallery images) feeding a shared trunk and projection head,
  trained with a squared-distance triplet hinge;
* a semantic classifier whose penultimate activations serve as the
  auxiliary embedding used for intent clustering (never for ranking).

No normalization layers: inference is a pure function of the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grad, nn
from .grad import Tensor, backward, no_grad
from .optim import AdamState, step_from_tape
from .raster import rasterize
from .sketch import RasterCanvas
from .corpus import Dataset

TRIPLET_MARGIN = 0.2


@dataclass
class ConvBlock:
    w: Tensor
    b: Tensor

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


def _conv_block(rng, c_in, c_out) -> ConvBlock:
    fan_in = c_in * 9
    scale = np.sqrt(2.0 / fan_in)
    return ConvBlock(
        w=Tensor(rng.standard_normal((c_out, c_in, 3, 3)) * scale, requires_grad=True),
        b=Tensor(np.zeros(c_out), requires_grad=True),
    )


def _apply_blocks(x: Tensor, blocks: list[ConvBlock]) -> Tensor:
    for blk in blocks:
        x = grad.relu(grad.conv2d(x, blk.w, blk.b, stride=2, padding=1))
    return x


def _gap(x: Tensor) -> Tensor:
    return x.mean(axis=(2, 3))


def canvases_to_batch(canvases: list[RasterCanvas]) -> np.ndarray:
    return np.stack([c.pixels for c in canvases])[:, None, :, :]


@dataclass
class StructureEncoderParams:
    first_sketch: ConvBlock
    first_image: ConvBlock
    trunk: list[ConvBlock]
    w_head: Tensor
    b_head: Tensor
    input_size: int = 64

    @property
    def feature_dim(self) -> int:
        return self.w_head.shape[1]

    def params(self) -> dict[str, Tensor]:
        out = {}
        out.update(self.first_sketch.params("struct.first_sketch"))
        out.update(self.first_image.params("struct.first_image"))
        for i, blk in enumerate(self.trunk):
            out.update(blk.params(f"struct.trunk{i}"))
        out["struct.w_head"] = self.w_head
        out["struct.b_head"] = self.b_head
        return out


def init_structure(rng: np.random.Generator, feature_dim: int = 64, channels=(8, 16, 32, 64),
                   input_size: int = 64) -> StructureEncoderParams:
    c1 = channels[0]
    trunk = [_conv_block(rng, channels[i], channels[i + 1]) for i in range(len(channels) - 1)]
    return StructureEncoderParams(
        first_sketch=_conv_block(rng, 1, c1),
        first_image=_conv_block(rng, 1, c1),
        trunk=trunk,
        w_head=Tensor(nn.glorot(rng, channels[-1], feature_dim), requires_grad=True),
        b_head=Tensor(np.zeros(feature_dim), requires_grad=True),
        input_size=input_size,
    )


def _structure_tape(batch: np.ndarray, params: StructureEncoderParams, branch: str) -> Tensor:
    first = params.first_sketch if branch == "sketch" else params.first_image
    x = grad.relu(grad.conv2d(Tensor(batch), first.w, first.b, stride=2, padding=1))
    x = _apply_blocks(x, params.trunk)
    feat = nn.linear(_gap(x), params.w_head, params.b_head)
    return grad.normalize_rows(feat)


def _check_canvas(canvas: RasterCanvas, params: StructureEncoderParams) -> None:
    if canvas.width != params.input_size or canvas.height != params.input_size:
        raise grad.DimensionError(
            f"canvas is {canvas.height}x{canvas.width}, encoder expects {params.input_size}x{params.input_size}"
        )


def encode_sketch_raster(canvas: RasterCanvas, params: StructureEncoderParams) -> np.ndarray:
    """Structure features of a rendered sketch (the anchor-side branch)."""
    _check_canvas(canvas, params)
    with no_grad():
        return _structure_tape(canvas.pixels[None, None], params, "sketch").data[0]


def encode_image(canvas: RasterCanvas, params: StructureEncoderParams) -> np.ndarray:
    """Structure features of a gallery image (the indexing-side branch)."""
    _check_canvas(canvas, params)
    with no_grad():
        return _structure_tape(canvas.pixels[None, None], params, "image").data[0]


def encode_batch(canvases: list[RasterCanvas], params: StructureEncoderParams, branch: str,
                 batch_size: int = 64) -> np.ndarray:
    out = np.empty((len(canvases), params.feature_dim))
    for lo in range(0, len(canvases), batch_size):
        chunk = canvases_to_batch(canvases[lo : lo + batch_size])
        with no_grad():
            out[lo : lo + chunk.shape[0]] = _structure_tape(chunk, params, branch).data
    return out


def branch_gap(params: StructureEncoderParams, canvases: list[RasterCanvas]) -> float:
    """Mean feature distance between the two branches on identical rasters."""
    a = encode_batch(canvases, params, "sketch")
    b = encode_batch(canvases, params, "image")
    return float(np.linalg.norm(a - b, axis=1).mean())


@dataclass
class TrainConfig:
    epochs: int = 12
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    margin: float = TRIPLET_MARGIN


def train_structure(dataset: Dataset, config: TrainConfig, feature_dim: int = 64,
                    channels=(8, 16, 32, 64)) -> tuple[StructureEncoderParams, list[dict]]:
    """Triplet training: sketch-render anchor, same-class positive, other-class negative."""
    labels = sorted({s.label for _, s in dataset.train})
    if len(labels) < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(config.seed)
    params = init_structure(rng, feature_dim, channels, dataset.raster_size)
    opt_params = params.params()
    state = AdamState(lr=config.learning_rate)

    size = dataset.raster_size
    anchors = [rasterize(s, size).pixels for _, s in dataset.train]
    # positives are augmented views of the anchor's own sketch (same class by
    # construction), which keeps instances within a class distinguishable
    augmented = [
        rasterize(s, size, rotate_deg=float(rng.uniform(-10, 10)), scale_mult=float(rng.uniform(0.8, 1.2)),
                  thickness=int(rng.integers(1, 3))).pixels
        for _, s in dataset.train
    ]
    y = np.array([labels.index(s.label) for _, s in dataset.train])
    by_class = {c: np.flatnonzero(y == c) for c in range(len(labels))}

    history = []
    n = len(anchors)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            neg_idx = np.array([rng.choice(by_class[rng.choice([c for c in by_class if c != y[i]])]) for i in idx])
            a = np.stack([anchors[i] for i in idx])[:, None]
            p = np.stack([augmented[i] for i in idx])[:, None]
            ng = np.stack([augmented[i] for i in neg_idx])[:, None]
            fa = _structure_tape(a, params, "sketch")
            fp = _structure_tape(p, params, "image")
            fn = _structure_tape(ng, params, "image")
            d_pos = grad.tensor_sum((fa - fp) ** 2.0, axis=1)
            d_neg = grad.tensor_sum((fa - fn) ** 2.0, axis=1)
            loss = grad.tensor_mean(grad.relu(d_pos - d_neg + config.margin))
            if not np.isfinite(loss.data):
                history.append({"epoch": epoch, "diverged": True})
                return params, history
            backward(loss)
            step_from_tape(opt_params, state)
            losses.append(loss.item())
        history.append({"epoch": epoch, "triplet_loss": float(np.mean(losses))})
    return params, history


# -- semantic classifier -----------------------------------------------------------


@dataclass
class SemanticEncoderParams:
    blocks: list[ConvBlock]
    w_feat: Tensor
    b_feat: Tensor
    w_cls: Tensor
    b_cls: Tensor
    classes: list[str] = field(default_factory=list)
    input_size: int = 64
    trained: bool = False

    @property
    def feature_dim(self) -> int:
        return self.w_feat.shape[1]

    def params(self) -> dict[str, Tensor]:
        out = {}
        for i, blk in enumerate(self.blocks):
            out.update(blk.params(f"sem.block{i}"))
        out.update({"sem.w_feat": self.w_feat, "sem.b_feat": self.b_feat,
                    "sem.w_cls": self.w_cls, "sem.b_cls": self.b_cls})
        return out


def init_semantic(rng: np.random.Generator, classes: list[str], feature_dim: int = 64,
                  channels=(8, 16, 32, 64), input_size: int = 64) -> SemanticEncoderParams:
    chain = [1, *channels]
    blocks = [_conv_block(rng, chain[i], chain[i + 1]) for i in range(len(channels))]
    return SemanticEncoderParams(
        blocks=blocks,
        w_feat=Tensor(nn.glorot(rng, channels[-1], feature_dim), requires_grad=True),
        b_feat=Tensor(np.zeros(feature_dim), requires_grad=True),
        w_cls=Tensor(nn.glorot(rng, feature_dim, len(classes)) * 0.1, requires_grad=True),
        b_cls=Tensor(np.zeros(len(classes)), requires_grad=True),
        classes=list(classes),
        input_size=input_size,
    )


def _semantic_tape(batch: np.ndarray, params: SemanticEncoderParams) -> tuple[Tensor, Tensor]:
    x = _apply_blocks(Tensor(batch), params.blocks)
    feat = grad.relu(nn.linear(_gap(x), params.w_feat, params.b_feat))
    logits = nn.linear(feat, params.w_cls, params.b_cls)
    return feat, logits


def semantic_embedding(canvas: RasterCanvas, params: SemanticEncoderParams) -> np.ndarray:
    """Penultimate-layer activations for intent clustering."""
    if not params.trained:
        raise ValueError("semantic encoder has not been trained")
    with no_grad():
        feat, _ = _semantic_tape(canvas.pixels[None, None], params)
    return feat.data[0]


def semantic_batch(canvases: list[RasterCanvas], params: SemanticEncoderParams, batch_size: int = 64) -> np.ndarray:
    if not params.trained:
        raise ValueError("semantic encoder has not been trained")
    out = np.empty((len(canvases), params.feature_dim))
    for lo in range(0, len(canvases), batch_size):
        chunk = canvases_to_batch(canvases[lo : lo + batch_size])
        with no_grad():
            out[lo : lo + chunk.shape[0]] = _semantic_tape(chunk, params)[0].data
    return out


def train_semantic(dataset: Dataset, config: TrainConfig, feature_dim: int = 64,
                   channels=(8, 16, 32, 64), views_per_sketch: int = 2) -> tuple[SemanticEncoderParams, list[dict]]:
    """Cross-entropy training on augmented renders standing in for photos."""
    classes = sorted({s.label for _, s in dataset.train})
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(config.seed)
    params = init_semantic(rng, classes, feature_dim, channels, dataset.raster_size)
    opt_params = params.params()
    state = AdamState(lr=config.learning_rate)

    size = dataset.raster_size
    images, y = [], []
    for _, s in dataset.train:
        for _ in range(views_per_sketch):
            images.append(
                rasterize(s, size, rotate_deg=float(rng.uniform(-10, 10)), scale_mult=float(rng.uniform(0.8, 1.2)),
                          thickness=int(rng.integers(1, 3))).pixels
            )
            y.append(classes.index(s.label))
    y = np.array(y)

    history = []
    n = len(images)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses, correct = [], 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            batch = np.stack([images[i] for i in idx])[:, None]
            _, logits = _semantic_tape(batch, params)
            loss = nn.cross_entropy(logits, y[idx])
            if not np.isfinite(loss.data):
                history.append({"epoch": epoch, "diverged": True})
                return params, history
            backward(loss)
            step_from_tape(opt_params, state)
            losses.append(loss.item())
            correct += int((logits.data.argmax(axis=1) == y[idx]).sum())
        history.append({"epoch": epoch, "ce_loss": float(np.mean(losses)), "train_accuracy": correct / n})
    params.trained = True
    return params, history


# -- persistence -------------------------------------------------------------------


def save_encoders(path, struct: StructureEncoderParams, sem: SemanticEncoderParams) -> None:
    from .checkpoint import save_params

    arrays = {name: t.data for name, t in {**struct.params(), **sem.params()}.items()}
    meta = {
        "kind": "rasternet",
        "classes": sem.classes,
        "input_size": struct.input_size,
        "trunk_blocks": len(struct.trunk),
        "sem_blocks": len(sem.blocks),
        "sem_trained": sem.trained,
    }
    save_params(path, arrays, meta)


def load_encoders(path) -> tuple[StructureEncoderParams, SemanticEncoderParams]:
    from .checkpoint import load_params

    arrays, meta = load_params(path)
    if meta.get("kind") != "rasternet":
        raise ValueError(f"{path}: not a raster-encoder checkpoint")

    def t(name):
        return Tensor(arrays[name], requires_grad=True)

    def block(prefix):
        return ConvBlock(w=t(f"{prefix}.w"), b=t(f"{prefix}.b"))

    struct = StructureEncoderParams(
        first_sketch=block("struct.first_sketch"),
        first_image=block("struct.first_image"),
        trunk=[block(f"struct.trunk{i}") for i in range(meta["trunk_blocks"])],
        w_head=t("struct.w_head"),
        b_head=t("struct.b_head"),
        input_size=meta["input_size"],
    )
    sem = SemanticEncoderParams(
        blocks=[block(f"sem.block{i}") for i in range(meta["sem_blocks"])],
        w_feat=t("sem.w_feat"),
        b_feat=t("sem.b_feat"),
        w_cls=t("sem.w_cls"),
        b_cls=t("sem.b_cls"),
        classes=list(meta["classes"]),
        input_size=meta["input_size"],
        trained=bool(meta["sem_trained"]),
    )
    return struct, sem
