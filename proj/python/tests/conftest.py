import json
import os
import pathlib

import pytest

ROOT = pathlib.Path(os.environ.get("MINIVLM_ROOT", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture
def schema():
    def load(name):
        return json.loads((ROOT / "schemas" / f"{name}.schema.json").read_text())

    return load


SMALL_MODEL = {
    "encoder": {"tile_px": 56, "d_v": 16, "n_heads": 2},
    "decoder": {"d_m": 32, "n_layers": 2, "n_heads": 2, "vocab": 64},
}
