"""Shared fixtures.

The trained-stack fixtures are expensive (minutes of CPU), so they cache
their artifacts under .pytest_artifacts/ next to this file; delete that
directory to retrain from scratch. Cached runs reproduce the same seeds.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from livesketch import jointspace, rasternet, seqvae
from livesketch.corpus import CorpusConfig, Dataset, build_toy_corpus, load_dataset, save_dataset
from livesketch.stack import ModelStack, load_stack, save_stack

CACHE = Path(os.environ.get("LIVESKETCH_TEST_CACHE", Path(__file__).parent / ".pytest_artifacts"))

# sized so the full train fits the acceptance-time budget while clearing the
# retrieval gates; see test_acceptance.py
CORPUS = CorpusConfig(per_class_train=100, per_class_test=10, per_class_gallery=6, augment_per_source=2, seed=11)
VAE = seqvae.VaeConfig(
    latent_dim=64, encoder_hidden=96, decoder_hidden=128, max_len=64,
    epochs=110, batch_size=32, learning_rate=2e-3, lr_decay_at=(70, 95),
    offset_weight=3.0, seed=7,
)
STRUCT = rasternet.TrainConfig(epochs=8, seed=3)
SEMANTIC = rasternet.TrainConfig(epochs=12, seed=4, learning_rate=3e-3)
JOINT = jointspace.JointTrainConfig(
    epochs=40, seed=5, hidden=128, search_dim=48,
    contrast_weight=1.0, contrast_temperature=0.05,
    shuffle_variants=2, simplify_epsilons=(0.03, 0.08, 0.15),
    finetune_raster=True, contrast_bank=128,
    visual_target_weight=4.0, visual_target_pool=2,
)
CNN_DIMS = {"feature_dim": 96, "channels": (12, 24, 48, 96)}
SEMANTIC_DIMS = {"feature_dim": 64, "channels": (12, 24, 48, 96)}


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    path = CACHE / "dataset"
    if (path / "meta.json").exists():
        return load_dataset(path)
    dataset = build_toy_corpus(CORPUS)
    save_dataset(dataset, path)
    return dataset


@pytest.fixture(scope="session")
def trained_stack(toy_dataset) -> ModelStack:
    import json
    import time

    models = CACHE / "models"
    try:
        return load_stack(models)
    except FileNotFoundError:
        pass
    times = {}
    t0 = time.time()
    enc, dec, curve = seqvae.train_vae(toy_dataset.train_sketches(), VAE)
    times["vae"] = time.time() - t0
    assert not any(row.get("diverged") for row in curve), "vae training diverged"
    t0 = time.time()
    struct, hist_s = rasternet.train_structure(toy_dataset, STRUCT, **CNN_DIMS)
    assert not any(row.get("diverged") for row in hist_s)
    sem, hist_z = rasternet.train_semantic(toy_dataset, SEMANTIC, **SEMANTIC_DIMS)
    assert not any(row.get("diverged") for row in hist_z)
    times["raster"] = time.time() - t0
    t0 = time.time()
    fc, hist_j = jointspace.train_joint(toy_dataset, enc, struct, JOINT)
    assert not any(row.get("diverged") for row in hist_j)
    times["joint"] = time.time() - t0
    stack = ModelStack(encoder=enc, decoder=dec, structure=struct, semantic=sem, fc=fc, max_len=VAE.max_len)
    save_stack(stack, models)
    CACHE.mkdir(parents=True, exist_ok=True)
    (CACHE / "train_times.json").write_text(json.dumps(times))
    (CACHE / "vae_curve.json").write_text(json.dumps(curve, default=float))
    (CACHE / "joint_curve.json").write_text(json.dumps(hist_j, default=float))
    return stack


# -- a deliberately tiny stack for service-machinery tests ---------------------------


TINY_CORPUS = CorpusConfig(
    classes=("circle", "box", "zigzag"),
    per_class_train=12, per_class_test=4, per_class_gallery=4, augment_per_source=2, seed=21,
)


@pytest.fixture(scope="session")
def tiny_dataset() -> Dataset:
    return build_toy_corpus(TINY_CORPUS)


@pytest.fixture(scope="session")
def tiny_stack(tiny_dataset) -> ModelStack:
    vcfg = seqvae.VaeConfig(latent_dim=12, encoder_hidden=16, decoder_hidden=16, max_len=64,
                            epochs=4, batch_size=12, learning_rate=2e-3, seed=2)
    enc, dec, _ = seqvae.train_vae(tiny_dataset.train_sketches(), vcfg)
    struct, _ = rasternet.train_structure(tiny_dataset, rasternet.TrainConfig(epochs=2, seed=3),
                                          feature_dim=12, channels=(4, 8))
    sem, _ = rasternet.train_semantic(tiny_dataset, rasternet.TrainConfig(epochs=2, seed=4, learning_rate=3e-3),
                                      feature_dim=12, channels=(4, 8))
    fc, _ = jointspace.train_joint(tiny_dataset, enc, struct,
                                   jointspace.JointTrainConfig(epochs=4, seed=5, hidden=16, search_dim=16,
                                                               shuffle_variants=0, simplify_epsilons=()))
    return ModelStack(encoder=enc, decoder=dec, structure=struct, semantic=sem, fc=fc, max_len=64)


@pytest.fixture(scope="session")
def tiny_runtime(tiny_dataset, tiny_stack, tmp_path_factory):
    from livesketch.config import Config
    from livesketch.indexing import index_corpus
    from livesketch.runtime import SearchRuntime

    cfg = Config()
    cfg.service.k = 24
    cfg.index.exact = True
    bundle = index_corpus(tiny_dataset, tiny_stack, tmp_path_factory.mktemp("index"), cfg)
    return SearchRuntime(tiny_stack, bundle, cfg)
