"""Six design-quality attributes and improvement statistics.

Coefficient tables are data. The default table repairs two symbols the
printed source leaves undefined (NOS and MOP both read as NOP) and
collapses the duplicated understandability terms to single occurrences.
The literal printed variant, with the duplicates kept as doubled
coefficients, is also loadable for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UndefinedRate, UnknownMetricName
from .metrics import MetricVector

ATTRIBUTES = (
    "Reusability",
    "Flexibility",
    "Understandability",
    "Effectiveness",
    "Extendibility",
    "Functionality",
)

UNDEFINED = "undefined"  # sentinel for guarded divisions


@dataclass
class CoefficientTable:
    weights: dict[str, dict[str, float]]

    def validate(self) -> None:
        known = set(MetricVector.metric_names())
        for attribute, row in self.weights.items():
            if attribute not in ATTRIBUTES:
                raise UnknownMetricName(attribute)
            for metric in row:
                if metric not in known:
                    raise UnknownMetricName(metric)


def default_table() -> CoefficientTable:
    return CoefficientTable(
        weights={
            "Reusability": {"DCC": -0.25, "CAM": 0.25, "CIS": 0.5, "DSC": 0.5},
            "Flexibility": {"DAM": 0.25, "DCC": -0.25, "MOA": 0.5, "NOP": 0.5},
            "Understandability": {
                "ANA": -0.33, "DAM": 0.33, "DCC": -0.33, "CAM": 0.33,
                "NOP": -0.33, "NOM": -0.33, "DSC": -0.33,
            },
            "Effectiveness": {
                "ANA": 0.2, "DAM": 0.2, "MOA": 0.2, "MFA": 0.2, "NOP": 0.2,
            },
            "Extendibility": {"ANA": 0.5, "DCC": -0.5, "MFA": 0.5, "NOP": 0.5},
            "Functionality": {
                "MOA": 0.12, "NOP": 0.22, "CIS": 0.22, "DSC": 0.22, "NOH": 0.22,
            },
        }
    )


def literal_table() -> CoefficientTable:
    """The printed variant: duplicated terms doubled, symbol repair kept."""
    table = default_table()
    table.weights["Understandability"] = {
        "ANA": -0.33, "DAM": 0.33, "DCC": -0.33, "CAM": 0.66,
        "NOP": -0.66, "NOM": -0.66, "DSC": -0.66,
    }
    return table


def load_table(data: dict) -> CoefficientTable:
    table = CoefficientTable(
        weights={
            attribute: {m: float(w) for m, w in row.items()}
            for attribute, row in data.items()
        }
    )
    table.validate()
    return table


@dataclass
class QmoodVector:
    values: dict[str, float]

    def __getitem__(self, attribute: str) -> float:
        return self.values[attribute]


def qmood_attributes(
    metrics: MetricVector, coeffs: CoefficientTable | None = None
) -> QmoodVector:
    """Weighted sums of design-aggregated metrics, one per attribute."""
    coeffs = coeffs or default_table()
    coeffs.validate()
    values = metrics.as_dict()
    result = {
        attribute: sum(weight * values[metric] for metric, weight in row.items())
        for attribute, row in coeffs.weights.items()
    }
    return QmoodVector(values=result)


def quality_improvement(
    before: QmoodVector, after: QmoodVector
) -> dict[str, float | str]:
    """Signed percent change per attribute, absolute-value divisor."""
    result: dict[str, float | str] = {}
    for attribute in before.values:
        b = before[attribute]
        a = after[attribute]
        if b == 0 or math.isnan(b):
            result[attribute] = UNDEFINED
        else:
            result[attribute] = (a - b) / abs(b) * 100.0
    return result


def improvement_rate(m_before: float, m_after: float) -> float:
    """Relative reduction percent; regressions come out negative."""
    if m_before == 0:
        raise UndefinedRate("improvement rate undefined for zero baseline")
    return (m_before - m_after) / m_before * 100.0
