"""Trained-model bundle: the four parameter sets the runtime needs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import jointspace, rasternet, seqvae


@dataclass
class ModelStack:
    encoder: seqvae.EncoderParams
    decoder: seqvae.DecoderParams
    structure: rasternet.StructureEncoderParams
    semantic: rasternet.SemanticEncoderParams
    fc: jointspace.FcStackParams
    max_len: int = 96


VAE_FILE = "vae.npz"
RASTER_FILE = "raster.npz"
FC_FILE = "fc.npz"
META_FILE = "models_meta.json"


def save_stack(stack: ModelStack, models_dir) -> None:
    out = Path(models_dir)
    out.mkdir(parents=True, exist_ok=True)
    seqvae.save_vae(out / VAE_FILE, stack.encoder, stack.decoder)
    rasternet.save_encoders(out / RASTER_FILE, stack.structure, stack.semantic)
    jointspace.save_fc(out / FC_FILE, stack.fc)
    (out / META_FILE).write_text(json.dumps({"max_len": stack.max_len}))


def load_stack(models_dir) -> ModelStack:
    root = Path(models_dir)
    for name in (VAE_FILE, RASTER_FILE, FC_FILE, META_FILE):
        if not (root / name).exists():
            raise FileNotFoundError(f"{root}: missing model file {name}")
    enc, dec = seqvae.load_vae(root / VAE_FILE)
    struct, sem = rasternet.load_encoders(root / RASTER_FILE)
    fc = jointspace.load_fc(root / FC_FILE)
    meta = json.loads((root / META_FILE).read_text())
    return ModelStack(encoder=enc, decoder=dec, structure=struct, semantic=sem, fc=fc, max_len=meta["max_len"])
