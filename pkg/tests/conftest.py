"""Shared fixtures: small trained models reused across test modules."""

import numpy as np
import pytest

from fsdd.data import SyntheticSpec, sample_dataset_arrays
from fsdd.net import DenoiserConfig
from fsdd.trainer import TrainConfig, fit


@pytest.fixture(scope="session")
def toy_spec():
    return SyntheticSpec(kind="two_point", codebook_size=8, num_tokens=16, seed=11)


@pytest.fixture(scope="session")
def toy_dataset(toy_spec):
    return sample_dataset_arrays(toy_spec, 2048)


@pytest.fixture(scope="session")
def trained_toy(toy_dataset, tmp_path_factory):
    """Two-point model trained enough for sharp sampling; fast EMA for short runs."""
    path = str(tmp_path_factory.mktemp("ckpt") / "toy.ckpt")
    dcfg = DenoiserConfig(codebook_size=8, num_tokens=16)
    tcfg = TrainConfig(steps=800, batch_size=64, ema_decay=0.99, seed=3, checkpoint_path=path)
    return fit(toy_dataset, dcfg, tcfg)


@pytest.fixture(scope="session")
def cond_spec():
    return SyntheticSpec(
        kind="class_conditional_two_point",
        codebook_size=6,
        num_tokens=8,
        num_classes=2,
        seed=5,
    )


@pytest.fixture(scope="session")
def trained_cond(cond_spec, tmp_path_factory):
    path = str(tmp_path_factory.mktemp("ckpt") / "cond.ckpt")
    dcfg = DenoiserConfig(
        codebook_size=6, num_tokens=8, num_classes=2, embed_dim=32, num_layers=1, num_heads=2
    )
    tcfg = TrainConfig(steps=700, batch_size=64, ema_decay=0.99, seed=9, checkpoint_path=path)
    dataset = sample_dataset_arrays(cond_spec, 2048)
    return fit(dataset, dcfg, tcfg)
