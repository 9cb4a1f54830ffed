"""Offline corpus indexing for the search service.

An index directory is self-contained:

    images.pqx      quantized index over gallery search vectors
    sketches.pqx    exact index over the sketch corpus's search vectors
    vectors.npz     per-gallery-item search + semantic vectors (cluster math)
    sketch_codes.npz  latent codes of the sketch corpus (perturbation targets)
    sketches.jsonl  the sketch corpus itself (target sketches)
    records.jsonl   gallery id, class label (held for evaluation), thumb name
    thumbs/{id}.png rendered thumbnails
    index_meta.json version, seed, counts, dims
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import jointspace, pq, rasternet, seqvae
from .config import Config
from .corpus import Dataset
from .raster import rasterize
from .sketch import Sketch
from .stack import ModelStack

INDEX_META_VERSION = 1
THUMB_SIZE = 128


@dataclass
class CorpusRecord:
    item_id: int
    label: str
    thumb_name: str
    search_vec: np.ndarray
    semantic_vec: np.ndarray


@dataclass
class IndexBundle:
    image_index: pq.PQIndex
    sketch_index: pq.PQIndex
    records: dict[int, CorpusRecord]
    sketches: dict[int, Sketch]
    sketch_latents: dict[int, np.ndarray]
    thumbs_dir: Path
    meta: dict

    def __len__(self) -> int:
        return len(self.records)


def index_corpus(dataset: Dataset, stack: ModelStack, out_dir, config: Config | None = None) -> IndexBundle:
    """Encode the gallery and sketch corpus, build both indexes, render thumbs."""
    config = config or Config()
    if not dataset.gallery:
        raise ValueError("dataset has no gallery items; nothing to index")
    if not dataset.train:
        raise ValueError("dataset has no sketch corpus for target lookup")
    out = Path(out_dir)
    thumbs = out / "thumbs"
    thumbs.mkdir(parents=True, exist_ok=True)

    renders = [g.render(dataset.raster_size) for g in dataset.gallery]
    gal_ids = np.array([g.item_id for g in dataset.gallery], dtype=np.int64)
    s_vecs = jointspace.project_raster(
        rasternet.encode_batch(renders, stack.structure, "image"), stack.fc
    ).astype(np.float32)
    z_vecs = rasternet.semantic_batch(renders, stack.semantic).astype(np.float32)

    image_index = pq.build(
        s_vecs,
        gal_ids,
        {
            "subspaces": config.index.subspaces,
            "centroids": config.index.centroids,
            "seed": config.seed,
            "iters": config.index.kmeans_iters,
            "exact": config.index.exact,
        },
    )

    corpus_sketches = dataset.train
    sk_ids = np.array([sid for sid, _ in corpus_sketches], dtype=np.int64)
    mu = seqvae.encode_many([s for _, s in corpus_sketches], stack.encoder)
    sk_vecs = jointspace.project_latent(mu, stack.fc).astype(np.float32)
    sketch_index = pq.build(sk_vecs, sk_ids, {"subspaces": config.index.subspaces,
                                              "centroids": min(config.index.centroids, len(sk_ids)),
                                              "seed": config.seed, "exact": True})

    records = {}
    with open(out / "records.jsonl", "w") as fh:
        for g, sv, zv in zip(dataset.gallery, s_vecs, z_vecs):
            thumb_name = f"{g.item_id}.png"
            big = g.render(THUMB_SIZE) if dataset.raster_size != THUMB_SIZE else None
            pixels = (big or g.render(dataset.raster_size)).pixels
            img = Image.fromarray(((1.0 - pixels) * 255).astype(np.uint8), mode="L")
            img.save(thumbs / thumb_name)
            records[g.item_id] = CorpusRecord(g.item_id, g.label, thumb_name, sv, zv)
            fh.write(json.dumps({"id": g.item_id, "class": g.label, "thumb": thumb_name}) + "\n")

    pq.save_index(image_index, out / "images.pqx")
    pq.save_index(sketch_index, out / "sketches.pqx")
    np.savez(out / "vectors.npz", ids=gal_ids, s=s_vecs, z=z_vecs)
    np.savez(out / "sketch_codes.npz", ids=sk_ids, v=mu.astype(np.float32))
    with open(out / "sketches.jsonl", "w") as fh:
        for sid, s in corpus_sketches:
            fh.write(json.dumps({"id": sid, "class": s.label, "points": s.points.tolist()}) + "\n")

    meta = {
        "version": INDEX_META_VERSION,
        "seed": config.seed,
        "gallery_count": len(gal_ids),
        "sketch_count": len(sk_ids),
        "search_dim": int(s_vecs.shape[1]),
        "semantic_dim": int(z_vecs.shape[1]),
        "raster_size": dataset.raster_size,
        "max_len": dataset.max_len,
    }
    (out / "index_meta.json").write_text(json.dumps(meta, indent=2))

    return IndexBundle(
        image_index=image_index,
        sketch_index=sketch_index,
        records=records,
        sketches={sid: s for sid, s in corpus_sketches},
        sketch_latents={int(i): v.astype(np.float64) for i, v in zip(sk_ids, mu)},
        thumbs_dir=thumbs,
        meta=meta,
    )


def load_bundle(index_dir) -> IndexBundle:
    root = Path(index_dir)
    meta_path = root / "index_meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"{index_dir}: not an index directory (missing index_meta.json)")
    meta = json.loads(meta_path.read_text())
    if meta.get("version") != INDEX_META_VERSION:
        raise ValueError(f"{index_dir}: unsupported index version {meta.get('version')}")
    if meta.get("gallery_count", 0) == 0:
        raise ValueError(f"{index_dir}: index is empty")

    image_index = pq.load_index(root / "images.pqx")
    sketch_index = pq.load_index(root / "sketches.pqx")
    vec = np.load(root / "vectors.npz")
    by_id = {int(i): k for k, i in enumerate(vec["ids"])}

    records = {}
    for line in (root / "records.jsonl").read_text().splitlines():
        rec = json.loads(line)
        k = by_id[rec["id"]]
        records[rec["id"]] = CorpusRecord(rec["id"], rec["class"], rec["thumb"], vec["s"][k], vec["z"][k])

    sketches = {}
    for line in (root / "sketches.jsonl").read_text().splitlines():
        rec = json.loads(line)
        sketches[rec["id"]] = Sketch(rec["points"], label=rec["class"])
    codes = np.load(root / "sketch_codes.npz")
    sketch_latents = {int(i): v.astype(np.float64) for i, v in zip(codes["ids"], codes["v"])}

    return IndexBundle(
        image_index=image_index,
        sketch_index=sketch_index,
        records=records,
        sketches=sketches,
        sketch_latents=sketch_latents,
        thumbs_dir=root / "thumbs",
        meta=meta,
    )
