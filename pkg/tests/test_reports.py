import math
from types import SimpleNamespace

import pytest

from modules.reports.export import blob_plot_svg, export_table_to_pdf, line_plot_svg
from shared.routers.command_router import COMMAND_ROUTER, route_command
from shared.constants.command_register import COMMAND_EVALUATE


def test_pdf_table(tmp_path):
    rows = [{"method": "static", "rate": 0.5, "matched": True}, {"method": "reduced", "rate": math.nan}]
    path = export_table_to_pdf(tmp_path / "out" / "table.pdf", "Summary", ["method", "rate", "matched"], rows,
                               notes=["two rows"])
    assert path.read_bytes()[:4] == b"%PDF"


def test_line_plot(tmp_path):
    series = {"static": [(0.01, 0.2), (0.02, 0.6), (0.03, math.nan)], "reference": [(0.01, 0.1), (0.03, 0.9)]}
    path = line_plot_svg(tmp_path / "rates.svg", series, "Rates", "separation", "rate", dashed=("reference",))
    text = path.read_text()
    assert "<svg" in text and "Rates" in text and "reference" in text


def test_line_plot_without_data(tmp_path):
    path = line_plot_svg(tmp_path / "empty.svg", {"static": [(0.1, math.nan)]}, "Empty", "x", "y")
    assert "no data" in path.read_text()


def test_blob_plot(tmp_path):
    counts = {"both": 5, "only_static": 0, "only_reduced": 2, "neither": 1}
    text = blob_plot_svg(tmp_path / "groups.svg", counts, "Groups").read_text()
    assert "<svg" in text and "only_reduced" in text


def test_router_covers_every_command():
    assert COMMAND_EVALUATE in COMMAND_ROUTER and len(COMMAND_ROUTER) == 6
    with pytest.raises(ValueError):
        route_command("train", SimpleNamespace())
