"""Forecast evaluation metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from .exceptions import ContractError, UndefinedMetricError

logger = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (5, 10, 15, 20, 25, 30)


def _pair(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if len(y_true) == 0 or len(y_true) != len(y_pred):
        raise ContractError(f"Need equal non-zero lengths, got {len(y_true)} and {len(y_pred)}")
    return y_true, y_pred


def rmse(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def nrmse(y_true, y_pred) -> float:
    """Root-mean-squared error divided by |mean(y_true)|.

    Raises:
        UndefinedMetricError: If mean(y_true) is zero; carries the rmse
    """
    y_true, y_pred = _pair(y_true, y_pred)
    error = rmse(y_true, y_pred)
    denominator = abs(float(np.mean(y_true)))
    if denominator == 0.0:
        raise UndefinedMetricError(error)
    return error / denominator


@dataclass
class EvalReport:
    """nrmse of one model over the first k steps, for each cutoff k.

    Cutoffs listed in ``absolute`` hold the plain rmse because nrmse was undefined.
    """
    label: str
    scores: Dict[int, float] = field(default_factory=dict)
    absolute: List[int] = field(default_factory=list)

    @property
    def cutoffs(self) -> List[int]:
        return sorted(self.scores)


def evaluate_horizons(
    y_true,
    y_pred,
    label: str,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
) -> EvalReport:
    """Cumulative nrmse over steps 1..k for each cutoff k <= len(y_true).

    The full horizon is always scored as the last cutoff, so a 12-step forecast
    reports 5, 10 and 12 and a 3-step forecast reports 3 alone.
    """
    y_true, y_pred = _pair(y_true, y_pred)
    horizon = len(y_true)
    ks = {int(c) for c in cutoffs if 1 <= int(c) <= horizon}
    ks.add(horizon)
    report = EvalReport(label)
    for k in sorted(ks):
        try:
            report.scores[k] = nrmse(y_true[:k], y_pred[:k])
        except UndefinedMetricError as exc:
            logger.warning("%s: nrmse undefined at %d steps, reporting rmse", label, k)
            report.scores[k] = exc.rmse
            report.absolute.append(k)
    return report


def reports_to_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Rows = models, columns = step cutoffs (rmse-substituted cells marked with '*')."""
    cutoffs = sorted({k for r in reports for k in r.cutoffs})
    rows = []
    for report in reports:
        row: Dict[str, object] = {"model": report.label}
        for k in cutoffs:
            value = report.scores.get(k)
            if value is None:
                row[str(k)] = ""
            elif k in report.absolute:
                row[str(k)] = f"{value!r}*"
            else:
                row[str(k)] = value
        rows.append(row)
    return pd.DataFrame(rows, columns=["model"] + [str(k) for k in cutoffs])


def write_eval_csv(reports: Sequence[EvalReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    reports_to_frame(reports).to_csv(path, index=False)
    return path
