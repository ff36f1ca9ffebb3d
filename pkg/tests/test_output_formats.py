import json
import math
from enum import Enum

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cflab.serialize import config_hash, dumps
from cflab.svg import line_plot, raster_plot


class Color(Enum):
    RED = "red"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_exactly(v):
    assert json.loads(dumps({"v": v}))["v"] == v


def test_dumps_plain_types():
    text = dumps({"a": np.float64(0.1), "b": np.arange(3), "c": (True, None), "d": Color.RED, "e": math.inf})
    doc = json.loads(text)
    assert doc == {"a": 0.1, "b": [0, 1, 2], "c": [True, None], "d": "red", "e": None}
    assert '"b": [0, 1, 2]' in text
    assert "0.10000000000000001" in text


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [0.5]}) == config_hash({"b": [0.5], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_line_plot_breaks_on_nan():
    svg = line_plot([(np.array([0, 1, np.nan, 2, 3]), np.array([0, 1, np.nan, 0, 1]))], "x", "y", "t")
    assert svg.count("<polyline") == 2
    assert svg.strip().endswith("</svg>")
    dots = line_plot([([0, 1], [0, 1])], points=True)
    assert dots.count("<circle") == 2


def test_raster_plot_cells_and_legend():
    labels = np.array([["a", "b"], ["Undetermined", "a"]], dtype=object)
    svg = raster_plot(labels, ["a", "b"], (0, 1), (0, 1))
    assert svg.count("<rect") == 2 + 4 + 3
    assert ">Undetermined<" in svg
