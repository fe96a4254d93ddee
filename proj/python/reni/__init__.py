"""Rotation-equivariant conditional spherical neural fields."""

import json as _json

from ._reni import *  # noqa: F401,F403
from ._reni import train as _train


def train(images, config):
    """Train on a list of H x 2H x 3 arrays. `config` is a dict or a JSON string."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _train(list(images), config)
