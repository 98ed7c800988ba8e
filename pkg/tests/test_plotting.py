import re

import pytest
from hypothesis import given, strategies as st

from ranslice.plotting import emit_plot


def test_four_points_four_markers(tmp_path):
    rows = [{"x": i, "y": i * i} for i in range(4)]
    text = emit_plot(rows, "x", "y", tmp_path / "p.svg").read_text()
    assert text.count('class="marker"') == 4
    assert text.count('class="series"') == 1
    assert 'class="legend"' not in text


def test_two_series_have_legend(tmp_path):
    rows = [{"x": i, "y": i + len(k), "k": k} for k in ("a", "bb") for i in range(3)]
    text = emit_plot(rows, "x", "y", tmp_path / "p.svg", series="k").read_text()
    assert text.count('class="series"') == 2
    assert text.count('class="legend"') == 2
    assert "k=a" in text and "k=bb" in text


def test_rerun_is_byte_identical(tmp_path):
    rows = [{"x": 0.1 * i, "y": 1.0 / (i + 1), "s": i % 2} for i in range(8)]
    a = emit_plot(rows, "x", "y", tmp_path / "a.svg", series="s", note="seed=3").read_bytes()
    b = emit_plot(list(reversed(rows)), "x", "y", tmp_path / "b.svg", series="s", note="seed=3").read_bytes()
    assert a == b
    assert b"<desc>seed=3</desc>" in a


def test_empty_table_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_plot([], "x", "y", tmp_path / "p.svg")


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=20))
def test_coordinates_stay_inside_canvas(tmp_path_factory, pts):
    path = tmp_path_factory.mktemp("svg") / "p.svg"
    text = emit_plot([{"x": a, "y": b} for a, b in pts], "x", "y", path).read_text()
    for cx, cy in re.findall(r'cx="([-\d.]+)" cy="([-\d.]+)"', text):
        assert 0 <= float(cx) <= 640 and 0 <= float(cy) <= 420
