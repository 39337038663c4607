"""Per-finding forecast aggregation: final market price and survey rules.

Survey rules: simple mean, median, simple voting (share of responses at or
above the binarization threshold), and a variance-weighted mean where each
forecaster's weight is the sample variance of their own responses across
all findings they forecast.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .dataset import Dataset, surveys_for, trades_for
from .errors import AllWeightsZero, EmptyMarket, NoSurveyResponses

METHOD_MARKET = "market_final_price"
METHOD_MEAN = "survey_mean"
METHOD_MEDIAN = "survey_median"
METHOD_VOTING = "survey_voting"
METHOD_VAR_WEIGHTED = "survey_var_weighted"

SURVEY_METHODS = (METHOD_MEAN, METHOD_MEDIAN, METHOD_VOTING, METHOD_VAR_WEIGHTED)
ALL_METHODS = (METHOD_MARKET,) + SURVEY_METHODS


@dataclass(frozen=True)
class AggregateForecast:
    finding_id: str
    method: str
    value: float
    n_inputs: int


@dataclass(frozen=True)
class ForecasterWeight:
    forecaster_id: str
    weight: float


def market_final_price(ds: Dataset, finding_id: str) -> AggregateForecast:
    """Last post-trade price at or before market close."""
    finding = ds.finding(finding_id)
    trades = trades_for(ds, finding_id)
    in_window = [t for t in trades if t.timestamp <= finding.market_close]
    if not in_window:
        raise EmptyMarket(f"no trades at or before close for {finding_id!r}")
    return AggregateForecast(finding_id, METHOD_MARKET,
                             in_window[-1].post_trade_price, len(trades))


def _beliefs(ds: Dataset, finding_id: str) -> list[float]:
    responses = surveys_for(ds, finding_id)
    if not responses:
        raise NoSurveyResponses(finding_id)
    return [s.belief for s in responses]


def survey_mean(ds: Dataset, finding_id: str) -> AggregateForecast:
    beliefs = _beliefs(ds, finding_id)
    return AggregateForecast(finding_id, METHOD_MEAN,
                             sum(beliefs) / len(beliefs), len(beliefs))


def survey_median(ds: Dataset, finding_id: str) -> AggregateForecast:
    beliefs = sorted(_beliefs(ds, finding_id))
    n = len(beliefs)
    mid = n // 2
    value = beliefs[mid] if n % 2 else (beliefs[mid - 1] + beliefs[mid]) / 2.0
    return AggregateForecast(finding_id, METHOD_MEDIAN, value, n)


def survey_voting(ds: Dataset, finding_id: str,
                  threshold: float = 0.5) -> AggregateForecast:
    """Share of responses voting for replication (belief >= threshold)."""
    beliefs = _beliefs(ds, finding_id)
    votes = sum(1 for b in beliefs if b >= threshold)
    return AggregateForecast(finding_id, METHOD_VOTING,
                             votes / len(beliefs), len(beliefs))


def forecaster_weights(ds: Dataset) -> list[ForecasterWeight]:
    """Sample variance (n-1 divisor) of each forecaster's beliefs.

    Forecasters with fewer than two responses get weight 0.
    """
    beliefs: dict[str, list[float]] = {}
    for s in ds.surveys:
        beliefs.setdefault(s.forecaster_id, []).append(s.belief)
    weights = []
    for forecaster in sorted(beliefs):
        vals = beliefs[forecaster]
        n = len(vals)
        if n < 2:
            weights.append(ForecasterWeight(forecaster, 0.0))
            continue
        mean = sum(vals) / n
        var = sum((v - mean) ** 2 for v in vals) / (n - 1)
        weights.append(ForecasterWeight(forecaster, var))
    return weights


def survey_var_weighted(ds: Dataset, finding_id: str,
                        weights) -> AggregateForecast:
    """Variance-weighted mean of the finding's survey responses."""
    if not isinstance(weights, dict):
        weights = {w.forecaster_id: w.weight for w in weights}
    responses = surveys_for(ds, finding_id)
    if not responses:
        raise NoSurveyResponses(finding_id)
    total_w = sum(weights.get(s.forecaster_id, 0.0) for s in responses)
    if total_w <= 0.0:
        raise AllWeightsZero(
            f"every respondent of {finding_id!r} has zero weight")
    value = sum(weights.get(s.forecaster_id, 0.0) * s.belief
                for s in responses) / total_w
    return AggregateForecast(finding_id, METHOD_VAR_WEIGHTED, value, len(responses))


def aggregate_all(ds: Dataset, methods=ALL_METHODS,
                  threshold: float = 0.5) -> list[AggregateForecast]:
    """One forecast per (finding, method), skipping findings a method cannot
    aggregate (empty market / no responses / all-zero weights)."""
    weights = None
    if METHOD_VAR_WEIGHTED in methods:
        weights = {w.forecaster_id: w.weight for w in forecaster_weights(ds)}
    out: list[AggregateForecast] = []
    for finding in ds.findings:
        fid = finding.finding_id
        for method in methods:
            try:
                if method == METHOD_MARKET:
                    out.append(market_final_price(ds, fid))
                elif method == METHOD_MEAN:
                    out.append(survey_mean(ds, fid))
                elif method == METHOD_MEDIAN:
                    out.append(survey_median(ds, fid))
                elif method == METHOD_VOTING:
                    out.append(survey_voting(ds, fid, threshold))
                elif method == METHOD_VAR_WEIGHTED:
                    out.append(survey_var_weighted(ds, fid, weights))
                else:
                    raise ValueError(f"unknown method {method!r}")
            except (EmptyMarket, NoSurveyResponses, AllWeightsZero):
                continue
    return out


def write_aggregates(forecasts: list[AggregateForecast], path: str | Path,
                     delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["finding_id", "method", "value", "n_inputs"])
        for f in forecasts:
            w.writerow([f.finding_id, f.method, repr(f.value), f.n_inputs])
