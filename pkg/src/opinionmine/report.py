"""Analyst-facing outputs: the topic-impact table and the priority matrix.

Rendering is pure: the same rows serialize to markdown, CSV, and JSON with
identical numeric content (betas at three significant figures, p values at
three decimals). Full-precision numbers live in the fit artifact, not here.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

from .corpus import OpinionUnit, unit_text
from .regression import RegressionFit
from .topics import TopicModel

SIGNIFICANCE_ALPHA = 0.05

QUADRANTS = ("urgent", "monitor", "maintain", "promote")


@dataclass
class TopicImpactRow:
    topic_id: int
    name: str                    # top keywords joined
    polarity: str
    beta: float | None           # None only for topics dropped from the fit
    p_value: float | None
    significant: bool
    size: int
    example: str                 # representative opinion unit text

    def beta_display(self) -> str:
        if not self.significant:
            return "n.s."
        return _sig3(self.beta)


@dataclass
class PriorityCell:
    topic_id: int
    name: str
    frequency: int
    beta: float
    quadrant: str


@dataclass
class PriorityMatrix:
    cells: list[PriorityCell]
    median_frequency: float


def _sig3(value: float) -> str:
    """Three significant figures, plain decimal notation."""
    if value == 0:
        return "0.00"
    exponent = math.floor(math.log10(abs(value)))
    decimals = max(0, 2 - exponent)
    return f"{value:.{decimals}f}"


def impact_table(model: TopicModel, fit: RegressionFit,
                 units: Sequence[OpinionUnit]) -> list[TopicImpactRow]:
    """Rows ranked by influence: negative block ascending by beta, positive
    descending, non-significant rows last inside their block; ties break on
    topic_id. Topics dropped from the fit are omitted (they have no estimate).
    """
    unit_by_id = {u.unit_id: u for u in units}
    rows: list[TopicImpactRow] = []
    for topic in model.topics:
        if topic.topic_id in fit.dropped:
            continue
        beta = fit.coefficients.get(topic.topic_id)
        p = fit.p_values.get(topic.topic_id)
        if beta is None:
            continue
        example = ""
        for uid in topic.representative_unit_ids:
            if uid in unit_by_id:
                example = unit_text(unit_by_id[uid])
                break
        rows.append(TopicImpactRow(
            topic_id=topic.topic_id,
            name=", ".join(topic.keywords[:3]) if topic.keywords else f"topic {topic.topic_id}",
            polarity=topic.polarity,
            beta=beta,
            p_value=p,
            significant=p is not None and p <= SIGNIFICANCE_ALPHA,
            size=topic.size,
            example=example))

    def block_order(row: TopicImpactRow) -> tuple:
        block = 0 if row.polarity in ("negative", "unsplit") else 1
        ns_last = 0 if row.significant else 1
        direction = row.beta if block == 0 else -row.beta
        return (block, ns_last, direction, row.topic_id)

    rows.sort(key=block_order)
    return rows


def priority_matrix(rows: Sequence[TopicImpactRow]) -> PriorityMatrix:
    """Quadrants over (topic frequency, beta) for the significant rows.

    High/low frequency splits at the median topic frequency (>= median is
    high, so a single topic counts as high). Negative beta: urgent when
    frequent, monitor otherwise; positive beta: maintain when frequent,
    promote otherwise.
    """
    significant = [r for r in rows if r.significant and r.beta is not None]
    if not significant:
        raise ValueError("priority matrix needs at least one significant row")
    freqs = sorted(r.size for r in significant)
    mid = len(freqs) // 2
    median = float(freqs[mid]) if len(freqs) % 2 == 1 \
        else (freqs[mid - 1] + freqs[mid]) / 2.0
    cells = []
    for r in sorted(significant, key=lambda r: r.topic_id):
        high = r.size >= median
        if r.beta < 0:
            quadrant = "urgent" if high else "monitor"
        else:
            quadrant = "maintain" if high else "promote"
        cells.append(PriorityCell(topic_id=r.topic_id, name=r.name, frequency=r.size,
                                  beta=r.beta, quadrant=quadrant))
    return PriorityMatrix(cells=cells, median_frequency=median)


# --- rendering --------------------------------------------------------------

def _row_payload(row: TopicImpactRow) -> dict:
    return {
        "topic_id": row.topic_id,
        "topic": row.name,
        "polarity": row.polarity,
        "beta": row.beta_display(),
        "p": "n/a" if row.p_value is None else f"{row.p_value:.3f}",
        "size": row.size,
        "example": row.example,
    }


def render_json(rows: Sequence[TopicImpactRow],
                matrix: PriorityMatrix | None = None) -> str:
    doc: dict = {"impact_table": [_row_payload(r) for r in rows]}
    if matrix is not None:
        doc["priority_matrix"] = {
            "median_frequency": matrix.median_frequency,
            "cells": [{"topic_id": c.topic_id, "topic": c.name, "frequency": c.frequency,
                       "beta": _sig3(c.beta), "quadrant": c.quadrant} for c in matrix.cells],
        }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_csv(rows: Sequence[TopicImpactRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["topic_id", "topic", "polarity", "beta",
                                             "p", "size", "example"])
    writer.writeheader()
    for r in rows:
        writer.writerow(_row_payload(r))
    return buf.getvalue()


def render_markdown(rows: Sequence[TopicImpactRow],
                    matrix: PriorityMatrix | None = None) -> str:
    lines = ["| Topic | Polarity | beta | p | Size | Opinion unit example |",
             "|---|---|---|---|---|---|"]
    for r in rows:
        payload = _row_payload(r)
        example = payload["example"].replace("|", "\\|")
        lines.append(f"| {payload['topic']} | {payload['polarity']} | {payload['beta']} "
                     f"| {payload['p']} | {payload['size']} | {example} |")
    if matrix is not None:
        lines.append("")
        lines.append(f"Priority matrix (median frequency {matrix.median_frequency:g}):")
        lines.append("")
        lines.append("| Topic | Frequency | beta | Quadrant |")
        lines.append("|---|---|---|---|")
        for c in matrix.cells:
            lines.append(f"| {c.name} | {c.frequency} | {_sig3(c.beta)} | {c.quadrant} |")
    return "\n".join(lines) + "\n"
