"""Desk-scale corpora: parametric shape generators, splits, and dataset files.

A dataset directory holds jsonl sketch records plus a meta header:

    meta.json       {"version": 1, "seed", "classes", "raster_size",
                     "offset_scale", "max_len"}
    train.jsonl     {"id", "class", "points"}      model-training sketches
    test.jsonl      {"id", "class", "points"}      held-out query sketches
    gallery.jsonl   {"id", "class", "points", "rotate_deg", "scale_mult",
                     "thickness"}                  render specs for "images"

Gallery entries are augmented rasterizations of sketches held out from both
sketch splits, standing in for photographs; they are rendered on demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import rasterize
from .sketch import RasterCanvas, Sketch, fit_to_length, normalize_offsets, rdp_simplify, sketch_from_absolute

DATASET_VERSION = 1


def _rot(points: np.ndarray, deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    m = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    return points @ m.T


def _poly(angles, radii) -> np.ndarray:
    return np.column_stack([np.cos(angles) * radii, np.sin(angles) * radii])


# Generators draw instance parameters (aspect, counts, rotations, ratios)
# from wide ranges so same-class items stay visually distinguishable, the way
# two people's drawings of one object differ.


def gen_circle(rng):
    # arc span and lumpiness vary per instance, like freehand circles:
    # open gaps, overshoot, and low-frequency wobble
    n = int(rng.integers(16, 28))
    span = rng.uniform(0.88, 1.12) * 2 * np.pi
    a = np.linspace(0, span, n) + rng.uniform(0, 2 * np.pi)
    rx = rng.uniform(60, 105)
    ry = rx * rng.uniform(0.55, 1.0)
    lump_phase = rng.uniform(0, 2 * np.pi)
    lumps = 1 + rng.uniform(0.04, 0.12) * np.sin(a * int(rng.integers(2, 5)) + lump_phase)
    pts = np.column_stack([np.cos(a) * rx, np.sin(a) * ry]) * lumps[:, None]
    return [_rot(pts, rng.uniform(0, 180))]


def gen_box(rng):
    w = rng.uniform(45, 110)
    h = w * rng.uniform(0.4, 2.2)
    corners = np.array([[-w, -h], [w, -h], [w, h], [-w, h], [-w, -h]], dtype=float)
    return [_rot(corners, rng.uniform(-18, 18))]


def gen_triangle(rng):
    r = rng.uniform(60, 115)
    base = np.array([90.0, 210.0, 330.0]) + rng.uniform(-28, 28, 3)
    a = np.deg2rad(np.append(base, base[0]))
    radii = r * rng.uniform(0.7, 1.3, 4)
    radii[-1] = radii[0]
    return [_rot(_poly(a, radii), rng.uniform(-30, 30))]


def gen_star(rng):
    points = int(rng.integers(4, 8))
    outer = rng.uniform(80, 115)
    inner = outer * rng.uniform(0.25, 0.55)
    a = np.deg2rad(90 + (360.0 / (2 * points)) * np.arange(2 * points + 1))
    r = np.where(np.arange(2 * points + 1) % 2 == 0, outer, inner)
    return [_rot(_poly(a, r), rng.uniform(0, 72))]


def gen_zigzag(rng):
    n = int(rng.integers(5, 11))
    xs = np.linspace(-105, 105, n)
    amp = rng.uniform(25, 70)
    ys = np.where(np.arange(n) % 2 == 0, -1, 1) * amp * rng.uniform(0.75, 1.25, n)
    ys += np.linspace(0, rng.uniform(-40, 40), n)
    return [_rot(np.column_stack([xs, ys]), rng.uniform(-15, 15))]


def gen_cross_box(rng):
    w = rng.uniform(50, 100)
    h = w * rng.uniform(0.6, 1.6)
    box = np.array([[-w, -h], [w, -h], [w, h], [-w, h], [-w, -h]], dtype=float)
    d1 = np.array([[-w, -h], [w, h]], dtype=float)
    d2 = np.array([[-w, h], [w, -h]], dtype=float)
    deg = rng.uniform(-12, 12)
    return [_rot(s, deg) for s in (box, d1, d2)]


def gen_spiral(rng):
    turns = rng.uniform(1.6, 3.4)
    n = int(rng.integers(30, 46))
    a = np.linspace(0, turns * 2 * np.pi, n) * (1 if rng.random() < 0.5 else -1)
    r = np.linspace(rng.uniform(85, 110), rng.uniform(5, 15), n)
    squash = rng.uniform(0.7, 1.0)
    pts = _poly(a + rng.uniform(0, 2 * np.pi), r)
    pts[:, 1] *= squash
    return [pts]


def gen_arrow(rng):
    length = rng.uniform(75, 120)
    head = rng.uniform(25, 55)
    spread = rng.uniform(18, 42)
    shaft = np.array([[-length, 0], [length, 0]], dtype=float)
    head1 = np.array([[length, 0], [length - head, -spread]], dtype=float)
    head2 = np.array([[length, 0], [length - head, spread]], dtype=float)
    deg = rng.uniform(0, 360)
    return [_rot(s, deg) for s in (shaft, head1, head2)]


def gen_house(rng):
    w = rng.uniform(55, 95)
    h = w * rng.uniform(0.7, 1.6)
    roof = w * rng.uniform(0.5, 1.1)
    box = np.array([[-w, 0], [w, 0], [w, h], [-w, h], [-w, 0]], dtype=float)
    top = np.array([[-w, 0], [rng.uniform(-0.25, 0.25) * w, -roof], [w, 0]], dtype=float)
    return [box, top]


def gen_sun(rng):
    n = int(rng.integers(12, 20))
    span = rng.uniform(0.9, 1.1) * 2 * np.pi
    a = np.linspace(0, span, n) + rng.uniform(0, 2 * np.pi)
    disc_r = rng.uniform(32, 58) * (1 + rng.uniform(0.0, 0.08) * np.sin(a * 3 + rng.uniform(0, 6)))
    disc = _poly(a, disc_r)
    rays = []
    count = int(rng.integers(5, 10))
    base = rng.uniform(0, 2 * np.pi)
    mean_r = float(np.mean(disc_r))
    for k in range(count):
        ang = base + k * 2 * np.pi / count + rng.uniform(-0.25, 0.25)
        d = np.array([np.cos(ang), np.sin(ang)])
        rays.append(np.array([d * (mean_r + rng.uniform(8, 18)), d * (mean_r + rng.uniform(30, 70))]))
    return [disc] + rays


def gen_wave(rng):
    n = int(rng.integers(22, 34))
    xs = np.linspace(-110, 110, n)
    periods = rng.uniform(1.2, 3.2)
    phase = rng.uniform(0, 2 * np.pi)
    ys = np.sin(xs / 220.0 * 2 * np.pi * periods + phase) * rng.uniform(25, 55)
    return [_rot(np.column_stack([xs, ys]), rng.uniform(-12, 12))]


def gen_ladder(rng):
    h = rng.uniform(80, 120)
    w = h * rng.uniform(0.22, 0.45)
    rungs_n = int(rng.integers(3, 7))
    rails = [np.array([[-w, -h], [-w, h]], dtype=float), np.array([[w, -h], [w, h]], dtype=float)]
    rungs = [np.array([[-w, y], [w, y]], dtype=float) for y in np.linspace(-h * 0.75, h * 0.75, rungs_n)]
    deg = rng.uniform(-14, 14)
    return [_rot(s, deg) for s in rails + rungs]


GENERATORS = {
    "circle": gen_circle,
    "box": gen_box,
    "triangle": gen_triangle,
    "star": gen_star,
    "zigzag": gen_zigzag,
    "cross_box": gen_cross_box,
    "spiral": gen_spiral,
    "arrow": gen_arrow,
    "house": gen_house,
    "sun": gen_sun,
    "wave": gen_wave,
    "ladder": gen_ladder,
}


def synthesize_sketch(cls: str, rng: np.random.Generator, jitter: float = 3.0) -> Sketch:
    strokes = GENERATORS[cls](rng)
    out = []
    scale = rng.uniform(0.85, 1.15)
    for s in strokes:
        s = np.asarray(s, dtype=float) * scale + rng.normal(0, jitter, size=s.shape)
        out.append(s + 128.0)
    return sketch_from_absolute(out, label=cls)


@dataclass
class GalleryRecord:
    item_id: int
    sketch: Sketch
    rotate_deg: float
    scale_mult: float
    thickness: int

    @property
    def label(self) -> str:
        return self.sketch.label

    def render(self, size: int) -> RasterCanvas:
        return rasterize(
            self.sketch, size, thickness=self.thickness, rotate_deg=self.rotate_deg, scale_mult=self.scale_mult
        )


@dataclass
class Dataset:
    classes: list[str]
    train: list[tuple[int, Sketch]]
    test: list[tuple[int, Sketch]]
    gallery: list[GalleryRecord]
    raster_size: int
    offset_scale: float
    max_len: int
    seed: int

    def train_sketches(self) -> list[Sketch]:
        return [s for _, s in self.train]

    def test_sketches(self) -> list[Sketch]:
        return [s for _, s in self.test]


@dataclass
class CorpusConfig:
    classes: tuple = ("circle", "box", "triangle", "star", "zigzag", "cross_box", "spiral", "arrow", "house", "sun")
    per_class_train: int = 50
    per_class_test: int = 10
    per_class_gallery: int = 10
    augment_per_source: int = 2
    raster_size: int = 64
    rdp_epsilon: float = 2.0
    max_len: int = 96
    seed: int = 0


def _prepare(sketches: list[Sketch], cfg: CorpusConfig) -> list[Sketch]:
    return [fit_to_length(rdp_simplify(s, cfg.rdp_epsilon), cfg.max_len) for s in sketches]


def build_toy_corpus(config: CorpusConfig, source: dict[str, list[Sketch]] | None = None) -> Dataset:
    """Synthesize (or split pre-ingested) sketches into train/test/gallery.

    The gallery's source sketches are held out of both sketch splits, so the
    image and sketch sides are instance-disjoint. "Images" are jittered
    renders (rotation, fitted-scale multiplier, stroke thickness).
    """
    if len(config.classes) < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(config.seed)
    per_class_total = config.per_class_train + config.per_class_test + config.per_class_gallery

    by_class: dict[str, list[Sketch]] = {}
    for cls in config.classes:
        if source is not None:
            pool = source.get(cls, [])
            if len(pool) < per_class_total:
                raise ValueError(f"class {cls!r}: need {per_class_total} sketches, got {len(pool)}")
            pick = rng.permutation(len(pool))[:per_class_total]
            by_class[cls] = _prepare([pool[i] for i in pick], config)
        else:
            if cls not in GENERATORS:
                raise ValueError(f"unknown shape class {cls!r}; known: {sorted(GENERATORS)}")
            by_class[cls] = _prepare([synthesize_sketch(cls, rng) for _ in range(per_class_total)], config)

    everything = [s for cls in config.classes for s in by_class[cls]]
    normalized, scale = normalize_offsets(everything)
    it = iter(normalized)
    by_class = {cls: [next(it) for _ in by_class[cls]] for cls in config.classes}

    train, test, gallery = [], [], []
    next_id = 0

    def take(n, pool):
        nonlocal next_id
        out = []
        for _ in range(n):
            sid = next_id
            next_id += 1
            out.append((sid, pool.pop()))
        return out

    for cls in config.classes:
        pool = by_class[cls]
        train.extend(take(config.per_class_train, pool))
        test.extend(take(config.per_class_test, pool))
        for _, src in take(config.per_class_gallery, pool):
            for _ in range(config.augment_per_source):
                gallery.append(
                    GalleryRecord(
                        item_id=next_id,
                        sketch=src,
                        rotate_deg=float(rng.uniform(-10, 10)),
                        scale_mult=float(rng.uniform(0.8, 1.2)),
                        thickness=int(rng.integers(1, 3)),
                    )
                )
                next_id += 1

    return Dataset(
        classes=list(config.classes),
        train=train,
        test=test,
        gallery=gallery,
        raster_size=config.raster_size,
        offset_scale=scale,
        max_len=config.max_len,
        seed=config.seed,
    )


# -- persistence ------------------------------------------------------------------


def save_dataset(dataset: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": DATASET_VERSION,
        "seed": dataset.seed,
        "classes": dataset.classes,
        "raster_size": dataset.raster_size,
        "offset_scale": dataset.offset_scale,
        "max_len": dataset.max_len,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    for name, rows in (("train", dataset.train), ("test", dataset.test)):
        with open(out / f"{name}.jsonl", "w") as fh:
            for sid, s in rows:
                fh.write(json.dumps({"id": sid, "class": s.label, "points": s.points.tolist()}) + "\n")
    with open(out / "gallery.jsonl", "w") as fh:
        for g in dataset.gallery:
            fh.write(
                json.dumps(
                    {
                        "id": g.item_id,
                        "class": g.sketch.label,
                        "points": g.sketch.points.tolist(),
                        "rotate_deg": g.rotate_deg,
                        "scale_mult": g.scale_mult,
                        "thickness": g.thickness,
                    }
                )
                + "\n"
            )


def load_dataset(path) -> Dataset:
    root = Path(path)
    meta = json.loads((root / "meta.json").read_text())
    if meta.get("version") != DATASET_VERSION:
        raise ValueError(f"{path}: unsupported dataset version {meta.get('version')}")

    def read_split(name):
        rows = []
        for line in (root / f"{name}.jsonl").read_text().splitlines():
            rec = json.loads(line)
            rows.append((rec["id"], Sketch(rec["points"], label=rec["class"])))
        return rows

    gallery = []
    for line in (root / "gallery.jsonl").read_text().splitlines():
        rec = json.loads(line)
        gallery.append(
            GalleryRecord(
                item_id=rec["id"],
                sketch=Sketch(rec["points"], label=rec["class"]),
                rotate_deg=rec["rotate_deg"],
                scale_mult=rec["scale_mult"],
                thickness=rec["thickness"],
            )
        )
    return Dataset(
        classes=meta["classes"],
        train=read_split("train"),
        test=read_split("test"),
        gallery=gallery,
        raster_size=meta["raster_size"],
        offset_scale=meta["offset_scale"],
        max_len=meta["max_len"],
        seed=meta["seed"],
    )
