"""Python front end for the minivlm C++ core.

Structured reports come back as plain dicts; tensors and images as numpy arrays.
"""

import json

from ._core import (
    ConfigError,
    ContractError,
    FormatError,
    TrainingDiverged,
    assign_positions,
    compute_grid,
    count_positions,
    generate_sample,
    merge,
    merged_token_count,
    split_image,
)
from . import _core

__all__ = [
    "ConfigError",
    "ContractError",
    "FormatError",
    "TrainingDiverged",
    "assign_positions",
    "budget",
    "compute_grid",
    "count_positions",
    "default_train_config",
    "evaluate",
    "generate_sample",
    "gradcheck",
    "load_checkpoint",
    "merge",
    "merged_token_count",
    "split_image",
    "train",
]


def budget(dims=None, frames=None, strategy="ds12", tile=336, patch=14, max_patches=None, window=2, text_tokens=0):
    """Token and position-id budget for an image (dims=(h, w)) or a video (frames=n)."""
    return json.loads(_core._budget(dims, frames, strategy, tile, patch, max_patches, window, text_tokens))


def load_checkpoint(path):
    """Returns (model config dict, {tensor name: ndarray})."""
    config, tensors = _core._load_checkpoint(str(path))
    return json.loads(config), tensors


def default_train_config():
    return json.loads(_core._default_train_config())


def train(config):
    return json.loads(_core._train(json.dumps(config)))


def evaluate(checkpoint, config=None):
    return json.loads(_core._evaluate(str(checkpoint), json.dumps(config or {})))


def gradcheck(config=None):
    return json.loads(_core._gradcheck(json.dumps(config or {})))
