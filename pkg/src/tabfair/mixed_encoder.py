"""Cross-reconstruction embedding of mixed tabular data.

Two independent networks are trained without labels or sensitive
attributes: one maps the numerical block to a latent code and decodes
the categorical indicators (sigmoid output, BCE loss), the other maps
the categorical block to a latent code and decodes the standardized
numerical block (linear output, MSE loss). The two latent codes are
concatenated row-wise into the mixed-space representation Z.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import EncodedDataset
from .errors import ConfigError
from .neuralnet import MlpConfig, MlpParams, TrainHistory, forward, train


@dataclass(frozen=True)
class MixedEncoderConfig:
    """Shapes and training hyperparameters for both networks.

    hidden_num_cat / hidden_cat_num count hidden layers including the
    latent layer, which sits at the middle position. latent_num +
    latent_cat is the mixed-space dimension p.
    """

    latent_num: int
    latent_cat: int
    hidden_num_cat: int = 3
    hidden_cat_num: int = 3
    epochs: int = 100
    batch_size: int = 64
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.hidden_num_cat < 1 or self.hidden_cat_num < 1:
            raise ConfigError("both networks need at least one hidden layer")
        if self.latent_num < 1 or self.latent_cat < 1:
            raise ConfigError("latent dimensions must be >= 1")

    @property
    def p(self) -> int:
        return self.latent_num + self.latent_cat

    def digest(self) -> str:
        """Short stable hash of every field, for provenance metadata."""
        blob = repr(sorted(asdict(self).items())).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def interpolated_widths(start: int, end: int, steps: int) -> list[int]:
    """Rounded geometric interpolation between two widths; returns the
    steps-1 intermediate widths."""
    if start < 1 or end < 1 or steps < 1:
        raise ConfigError("widths and steps must be >= 1")
    ratio = end / start
    return [max(1, int(round(start * ratio ** (i / steps)))) for i in range(1, steps)]


def _layer_widths(input_dim: int, latent_dim: int, output_dim: int, hidden: int):
    """Hidden widths interpolate input -> latent -> output geometrically
    with the latent layer at the middle hidden position."""
    mid = hidden // 2
    pre = interpolated_widths(input_dim, latent_dim, mid + 1)
    post = interpolated_widths(latent_dim, output_dim, hidden - mid)
    widths = [input_dim, *pre, latent_dim, *post, output_dim]
    latent_index = 1 + mid
    return tuple(widths), latent_index


def build_num_cat(d1: int, d2: int, config: MixedEncoderConfig) -> MlpConfig:
    """Network reconstructing categorical indicators from numerical
    inputs: sigmoid output, trained with BCE."""
    widths, latent_index = _layer_widths(d1, config.latent_num, d2, config.hidden_num_cat)
    return MlpConfig(layer_widths=widths, output_activation="sigmoid", latent_index=latent_index)


def build_cat_num(d2: int, d1: int, config: MixedEncoderConfig) -> MlpConfig:
    """Network reconstructing the numerical block from categorical
    inputs: linear output, trained with MSE."""
    widths, latent_index = _layer_widths(d2, config.latent_cat, d1, config.hidden_cat_num)
    return MlpConfig(layer_widths=widths, output_activation="linear", latent_index=latent_index)


@dataclass
class MixedTrainResult:
    params_num_cat: MlpParams
    params_cat_num: MlpParams
    history_num_cat: TrainHistory
    history_cat_num: TrainHistory


def train_mixed(dataset: EncodedDataset, config: MixedEncoderConfig) -> MixedTrainResult:
    """Train both networks on the feature blocks only.

    The sensitive matrix S and the labels y are never part of either
    network's inputs or targets. The two trainings are independent;
    their seeds derive from config.seed (seed and seed + 1).
    """
    cfg_nc = build_num_cat(dataset.d1, dataset.d2, config)
    cfg_cn = build_cat_num(dataset.d2, dataset.d1, config)
    params_nc, hist_nc = train(
        cfg_nc,
        dataset.X_num,
        dataset.X_cat,
        epochs=config.epochs,
        batch_size=config.batch_size,
        val_fraction=config.val_fraction,
        seed=config.seed,
    )
    params_cn, hist_cn = train(
        cfg_cn,
        dataset.X_cat,
        dataset.X_num,
        epochs=config.epochs,
        batch_size=config.batch_size,
        val_fraction=config.val_fraction,
        seed=config.seed + 1,
    )
    return MixedTrainResult(params_nc, params_cn, hist_nc, hist_cn)


def extract_latent(params: MlpParams, X) -> np.ndarray:
    """Post-activation values at the network's latent layer."""
    cache = forward(params, X)
    return cache.activations[params.config.latent_index]


@dataclass
class MixedRepresentation:
    """The n x p concatenated latent matrix plus provenance."""

    Z: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.Z.shape[1]


def concatenate_latents(z_num, z_cat, meta: dict | None = None) -> MixedRepresentation:
    """Column-wise concatenation, numerical-side code first."""
    z_num = np.asarray(z_num, dtype=np.float64)
    z_cat = np.asarray(z_cat, dtype=np.float64)
    if z_num.shape[0] != z_cat.shape[0]:
        raise ConfigError(
            f"row mismatch: {z_num.shape[0]} numerical-side rows vs "
            f"{z_cat.shape[0]} categorical-side rows"
        )
    return MixedRepresentation(Z=np.hstack([z_num, z_cat]), meta=dict(meta or {}))


def encode_dataset(dataset: EncodedDataset, config: MixedEncoderConfig):
    """Train both networks and return (representation, train result)."""
    result = train_mixed(dataset, config)
    z_num = extract_latent(result.params_num_cat, dataset.X_num)
    z_cat = extract_latent(result.params_cat_num, dataset.X_cat)
    rep = concatenate_latents(
        z_num,
        z_cat,
        meta={
            "config_digest": config.digest(),
            "latent_num": config.latent_num,
            "latent_cat": config.latent_cat,
            "seeds": (config.seed, config.seed + 1),
        },
    )
    return rep, result
