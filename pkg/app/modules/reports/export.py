"""
Report rendering with reportlab: PDF summary tables and SVG plots.
"""
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math

from reportlab.graphics import renderSVG
from reportlab.graphics.charts.lineplots import LinePlot
from reportlab.graphics.shapes import Circle, Drawing, String
from reportlab.graphics.widgets.markers import makeMarker
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

logger = logging.getLogger(__name__)

SERIES_COLORS = [colors.darkblue, colors.darkred, colors.darkgreen, colors.darkorange, colors.purple, colors.grey]
PLOT_WIDTH = 480
PLOT_HEIGHT = 320


def _cell(value) -> str:
    if isinstance(value, bool):
        return "Yes" if value else "No"
    if isinstance(value, float):
        return "N/A" if math.isnan(value) else f"{value:.4g}"
    return "N/A" if value is None else str(value)


def export_table_to_pdf(path, title: str, columns: Sequence[str], rows: Sequence[dict],
                        notes: Sequence[str] = ()) -> Path:
    """Write rows as a single styled table"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        doc = SimpleDocTemplate(str(path), pagesize=landscape(A4), rightMargin=0.5*inch, leftMargin=0.5*inch)
        story = []

        styles = getSampleStyleSheet()
        title_style = ParagraphStyle(
            'CustomTitle',
            parent=styles['Heading1'],
            fontSize=16,
            textColor=colors.HexColor('#1a1a1a'),
            spaceAfter=30,
            alignment=TA_CENTER
        )
        story.append(Paragraph(title, title_style))
        story.append(Spacer(1, 0.2*inch))

        data = [list(columns)] + [[_cell(row.get(column)) for column in columns] for row in rows]
        table = Table(data, repeatRows=1)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, 0), 9),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 12),
            ('GRID', (0, 0), (-1, -1), 1, colors.black),
            ('FONTSIZE', (0, 1), (-1, -1), 8),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [colors.white, colors.lightgrey]),
        ]))
        story.append(table)
        story.append(Spacer(1, 0.2*inch))
        for note in notes:
            story.append(Paragraph(note, styles['Normal']))
        story.append(Paragraph(f"Export date: {datetime.now(timezone.utc).strftime('%d.%m.%Y %H:%M UTC')}",
                               styles['Normal']))
        doc.build(story)
    except Exception as e:
        logger.error(f"Error exporting {title!r} to PDF: {e}", exc_info=True)
        raise
    logger.info(f"Wrote PDF table to {path}")
    return path


def _finite_points(points) -> List[Tuple[float, float]]:
    return [(float(x), float(y)) for x, y in points if math.isfinite(x) and math.isfinite(y)]


def _axis_range(values: Sequence[float]) -> Tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_plot_svg(path, series: Dict[str, Sequence[Tuple[float, float]]], title: str, x_label: str,
                  y_label: str, y_range: Optional[Tuple[float, float]] = None,
                  dashed: Sequence[str] = ()) -> Path:
    """
    One polyline with markers per named series; non-finite points are
    dropped. Series named in `dashed` are drawn as dashed reference lines.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    drawing = Drawing(PLOT_WIDTH + 160, PLOT_HEIGHT + 90)
    drawing.add(String((PLOT_WIDTH + 160) / 2, PLOT_HEIGHT + 70, title, fontSize=12, textAnchor='middle'))

    cleaned = {name: _finite_points(points) for name, points in series.items()}
    cleaned = {name: points for name, points in cleaned.items() if points}
    if not cleaned:
        logger.warning(f"No finite data for plot {title!r}")
        drawing.add(String(PLOT_WIDTH / 2, PLOT_HEIGHT / 2, "no data", fontSize=10, textAnchor='middle'))
        renderSVG.drawToFile(drawing, str(path))
        return path

    plot = LinePlot()
    plot.x, plot.y = 60, 50
    plot.width, plot.height = PLOT_WIDTH - 40, PLOT_HEIGHT - 20
    plot.data = list(cleaned.values())
    xs = [x for points in plot.data for x, _ in points]
    ys = [y for points in plot.data for _, y in points]
    plot.xValueAxis.valueMin, plot.xValueAxis.valueMax = _axis_range(xs)
    plot.yValueAxis.valueMin, plot.yValueAxis.valueMax = y_range or _axis_range(ys)
    plot.xValueAxis.labelTextFormat = '%.3g'
    plot.yValueAxis.labelTextFormat = '%.3g'
    for i, name in enumerate(cleaned):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        plot.lines[i].strokeColor = color
        plot.lines[i].strokeWidth = 1.5
        if name in dashed:
            plot.lines[i].strokeDashArray = [4, 3]
        else:
            plot.lines[i].symbol = makeMarker('FilledCircle', size=4, fillColor=color)
        drawing.add(String(PLOT_WIDTH + 40, PLOT_HEIGHT - 14 * i, name, fontSize=9, fillColor=color))
    drawing.add(plot)
    drawing.add(String(plot.x + plot.width / 2, 15, x_label, fontSize=10, textAnchor='middle'))
    drawing.add(String(12, plot.y + plot.height + 10, y_label, fontSize=10))
    renderSVG.drawToFile(drawing, str(path))
    logger.info(f"Wrote plot {title!r} to {path}")
    return path


def blob_plot_svg(path, counts: Dict[str, int], title: str) -> Path:
    """One disc per group with area proportional to its count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    width = 160 * max(len(counts), 1)
    drawing = Drawing(width, 240)
    drawing.add(String(width / 2, 220, title, fontSize=12, textAnchor='middle'))
    largest = max(counts.values(), default=0)
    for i, (name, count) in enumerate(counts.items()):
        cx = 80 + 160 * i
        if count > 0:
            radius = 60 * math.sqrt(count / largest)
            drawing.add(Circle(cx, 120, radius, fillColor=SERIES_COLORS[i % len(SERIES_COLORS)],
                               strokeColor=colors.black, fillOpacity=0.6))
        drawing.add(String(cx, 30, name, fontSize=9, textAnchor='middle'))
        drawing.add(String(cx, 15, str(count), fontSize=9, textAnchor='middle'))
    renderSVG.drawToFile(drawing, str(path))
    logger.info(f"Wrote blob plot {title!r} to {path}")
    return path
