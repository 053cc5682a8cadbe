import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader

from app.models.report import Distribution

logger = logging.getLogger(__name__)

PALETTE = ["#4e79a7", "#e15759", "#f28e2b", "#76b7b2", "#59a14f", "#edc948"]


class ChartRenderer:
    """Static, self-contained SVG pie and line charts."""

    def __init__(self, template_dir: Optional[Path] = None):
        template_dir = template_dir or Path(__file__).parent.parent / "templates" / "svg"
        self.jinja_env = Environment(
            loader=FileSystemLoader(template_dir),
            autoescape=True,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.jinja_env.filters["fmt"] = self._fmt_filter

    @staticmethod
    def _fmt_filter(value: float, digits: int = 2) -> str:
        return f"{value:.{digits}f}"

    def pie(self, title: str, distribution: Distribution) -> str:
        width, height, radius = 420, 260, 100
        cx, cy = 130, 140
        slices = []
        angle = -math.pi / 2
        nonzero = [s for s in distribution.shares if s.count > 0]
        for i, share in enumerate(distribution.shares):
            color = PALETTE[i % len(PALETTE)]
            if share.count == 0:
                continue
            sweep = 2 * math.pi * share.count / distribution.total
            end = angle + sweep
            slices.append(
                {
                    "color": color,
                    "full": len(nonzero) == 1,
                    "x1": cx + radius * math.cos(angle),
                    "y1": cy + radius * math.sin(angle),
                    "x2": cx + radius * math.cos(end),
                    "y2": cy + radius * math.sin(end),
                    "large": 1 if sweep > math.pi else 0,
                }
            )
            angle = end
        legend = [
            {"label": s.label, "percent": s.percent, "count": s.count, "color": PALETTE[i % len(PALETTE)], "y": 60 + 22 * i}
            for i, s in enumerate(distribution.shares)
        ]
        template = self.jinja_env.get_template("pie.svg.j2")
        return template.render(
            title=title, width=width, height=height, cx=cx, cy=cy, radius=radius, slices=slices, legend=legend, legend_x=260
        )

    def line(self, title: str, semesters: Sequence[str], series: Dict[str, Sequence[Optional[float]]]) -> str:
        """One polyline per label over semesters, y axis 0-100%."""
        width, height = 600, 320
        left, right, top, bottom = 50, 440, 36, 280
        step = (right - left) / max(len(semesters) - 1, 1)

        def x_at(i: int) -> float:
            return (left + right) / 2 if len(semesters) == 1 else left + i * step

        def y_at(value: float) -> float:
            return bottom - (bottom - top) * value / 100.0

        lines: List[dict] = []
        for n, (label, values) in enumerate(series.items()):
            points = [{"x": x_at(i), "y": y_at(v), "value": v} for i, v in enumerate(values) if v is not None]
            lines.append({"label": label, "color": PALETTE[n % len(PALETTE)], "points": points, "legend_y": top + 10 + 22 * n})
        template = self.jinja_env.get_template("line.svg.j2")
        return template.render(
            title=title,
            width=width,
            height=height,
            left=left,
            right=right,
            top=top,
            bottom=bottom,
            ticks=[{"value": v, "y": y_at(v)} for v in range(0, 101, 25)],
            columns=[{"semester": s, "x": x_at(i)} for i, s in enumerate(semesters)],
            lines=lines,
        )


# Global chart renderer instance
chart_renderer = ChartRenderer()
