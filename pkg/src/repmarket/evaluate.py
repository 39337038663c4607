"""Scoring of aggregated forecasts against replication outcomes.

Produces per-forecast score rows, per-project and pooled summary tables,
the overestimation / error / extremeness tests, prediction-asymmetry
quadrants, and the p-value-category regression.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .aggregate import (
    AggregateForecast,
    METHOD_MARKET,
    METHOD_MEAN,
)
from .dataset import CATEGORY_ABOVE, CATEGORY_AT_OR_BELOW, Dataset, Finding, PROJECTS
from .errors import DegenerateInput, MissingOutcome
from . import stats

POOLED = "Pooled"


@dataclass(frozen=True)
class ScoreRow:
    finding_id: str
    method: str
    forecast: float
    outcome: int
    predicted: int
    correct: bool
    abs_error: float
    extremeness: float


@dataclass
class ProjectSummary:
    project: str
    n_findings: int
    n_replicated: int
    replication_rate: float
    mean_belief: dict[str, float] = field(default_factory=dict)
    n_correct: dict[str, int] = field(default_factory=dict)
    mae: dict[str, float] = field(default_factory=dict)
    spearman_market_survey: float | None = None
    spearman_outcome: dict[str, float | None] = field(default_factory=dict)


@dataclass(frozen=True)
class ConfusionQuadrants:
    method: str
    predicted_fail_replicated: int
    predicted_fail_not_replicated: int
    predicted_replicate_replicated: int
    predicted_replicate_not_replicated: int

    @property
    def n(self) -> int:
        return (self.predicted_fail_replicated + self.predicted_fail_not_replicated
                + self.predicted_replicate_replicated
                + self.predicted_replicate_not_replicated)


def _findings_by_id(findings) -> dict[str, Finding]:
    if isinstance(findings, Dataset):
        findings = findings.findings
    return {f.finding_id: f for f in findings}


def score(forecasts: list[AggregateForecast], findings,
          threshold: float = 0.5) -> list[ScoreRow]:
    """One score row per (finding, method).

    A forecast at exactly the threshold binarizes to "replicates".
    """
    by_id = _findings_by_id(findings)
    rows = []
    for fc in forecasts:
        finding = by_id.get(fc.finding_id)
        if finding is None:
            raise MissingOutcome(f"no outcome recorded for {fc.finding_id!r}")
        predicted = 1 if fc.value >= threshold else 0
        rows.append(ScoreRow(
            finding_id=fc.finding_id,
            method=fc.method,
            forecast=fc.value,
            outcome=finding.outcome,
            predicted=predicted,
            correct=predicted == finding.outcome,
            abs_error=abs(finding.outcome - fc.value),
            extremeness=abs(fc.value - 0.5),
        ))
    return rows


def _scores_by_finding(scores, method: str) -> dict[str, ScoreRow]:
    return {s.finding_id: s for s in scores if s.method == method}


def _safe_spearman(x, y) -> float | None:
    try:
        return stats.spearman(x, y)
    except DegenerateInput:
        return None


def summarize(scores: list[ScoreRow], findings,
              group_by: str = "project") -> list[ProjectSummary]:
    """Per-project summaries (`group_by="project"`) or one pooled row."""
    by_id = _findings_by_id(findings)
    if group_by == "pooled":
        groups = [(POOLED, list(by_id.values()))]
    elif group_by == "project":
        groups = [(p, [f for f in by_id.values() if f.project == p])
                  for p in PROJECTS]
        groups = [(p, fs) for p, fs in groups if fs]
    else:
        raise ValueError(f"group_by must be 'project' or 'pooled', got {group_by!r}")

    methods = sorted({s.method for s in scores})
    summaries = []
    for name, members in groups:
        ids = {f.finding_id for f in members}
        n = len(members)
        n_rep = sum(f.outcome for f in members)
        summary = ProjectSummary(
            project=name, n_findings=n, n_replicated=n_rep,
            replication_rate=n_rep / n if n else 0.0)
        for method in methods:
            rows = [s for s in scores if s.method == method and s.finding_id in ids]
            if not rows:
                continue
            summary.mean_belief[method] = sum(r.forecast for r in rows) / len(rows)
            summary.n_correct[method] = sum(r.correct for r in rows)
            summary.mae[method] = sum(r.abs_error for r in rows) / len(rows)
            summary.spearman_outcome[method] = _safe_spearman(
                [r.outcome for r in rows], [r.forecast for r in rows])
        market = _scores_by_finding(scores, METHOD_MARKET)
        survey = _scores_by_finding(scores, METHOD_MEAN)
        both = sorted(ids & market.keys() & survey.keys())
        if len(both) >= 3:
            summary.spearman_market_survey = _safe_spearman(
                [market[i].forecast for i in both],
                [survey[i].forecast for i in both])
        summaries.append(summary)
    return summaries


def asymmetry_tests(scores: list[ScoreRow],
                    methods: tuple[str, ...] = (METHOD_MARKET, METHOD_MEAN),
                    yates: bool = False) -> dict[str, tuple[ConfusionQuadrants, stats.TestResult]]:
    """Is each method more accurate on predicted failures than on predicted
    replications? Chi-square on the (predicted class x correctness) table."""
    out = {}
    for method in methods:
        rows = [s for s in scores if s.method == method]
        quad = ConfusionQuadrants(
            method=method,
            predicted_fail_replicated=sum(
                1 for s in rows if s.predicted == 0 and s.outcome == 1),
            predicted_fail_not_replicated=sum(
                1 for s in rows if s.predicted == 0 and s.outcome == 0),
            predicted_replicate_replicated=sum(
                1 for s in rows if s.predicted == 1 and s.outcome == 1),
            predicted_replicate_not_replicated=sum(
                1 for s in rows if s.predicted == 1 and s.outcome == 0),
        )
        table = [
            [quad.predicted_fail_not_replicated, quad.predicted_fail_replicated],
            [quad.predicted_replicate_replicated, quad.predicted_replicate_not_replicated],
        ]
        out[method] = (quad, stats.chi_square_1df(table, yates=yates))
    return out


def accuracy_comparison_test(scores: list[ScoreRow],
                             method_a: str = METHOD_MARKET,
                             method_b: str = METHOD_MEAN,
                             yates: bool = False) -> stats.TestResult:
    """Chi-square comparing the correct/incorrect counts of two methods."""
    def counts(method):
        rows = [s for s in scores if s.method == method]
        correct = sum(s.correct for s in rows)
        return [correct, len(rows) - correct]

    return stats.chi_square_1df([counts(method_a), counts(method_b)], yates=yates)


def overestimation_tests(forecasts: list[AggregateForecast], findings,
                         methods: tuple[str, ...] = (METHOD_MEAN, METHOD_MARKET),
                         ) -> dict[str, stats.TestResult]:
    """Paired t-tests of outcomes against each method's forecasts.

    Negative t means the forecasts overestimate the replication rate.
    """
    by_id = _findings_by_id(findings)
    out = {}
    for method in methods:
        pairs = [(by_id[f.finding_id].outcome, f.value)
                 for f in forecasts if f.method == method and f.finding_id in by_id]
        out[method] = stats.paired_t([p[0] for p in pairs], [p[1] for p in pairs])
    return out


def error_difference_test(scores: list[ScoreRow],
                          method_a: str = METHOD_MEAN,
                          method_b: str = METHOD_MARKET) -> stats.TestResult:
    """Paired t-test of per-finding absolute errors, method_a minus method_b.

    With the defaults, positive t means the market's errors are smaller
    than the survey's.
    """
    a = _scores_by_finding(scores, method_a)
    b = _scores_by_finding(scores, method_b)
    both = sorted(a.keys() & b.keys())
    return stats.paired_t([a[i].abs_error for i in both],
                          [b[i].abs_error for i in both])


def extremeness_test(scores: list[ScoreRow],
                     method_a: str = METHOD_MARKET,
                     method_b: str = METHOD_MEAN) -> stats.TestResult:
    """Paired t-test of per-finding extremeness, method_a minus method_b."""
    a = _scores_by_finding(scores, method_a)
    b = _scores_by_finding(scores, method_b)
    both = sorted(a.keys() & b.keys())
    return stats.paired_t([a[i].extremeness for i in both],
                          [b[i].extremeness for i in both])


def forecast_correlations(scores: list[ScoreRow]) -> dict[str, float | None]:
    """Outcome/forecast and market/survey correlations on shared findings."""
    market = _scores_by_finding(scores, METHOD_MARKET)
    survey = _scores_by_finding(scores, METHOD_MEAN)

    def safe_pearson(x, y):
        try:
            return stats.pearson(x, y)
        except DegenerateInput:
            return None

    out: dict[str, float | None] = {}
    m_ids = sorted(market)
    s_ids = sorted(survey)
    out["pearson_outcome_market"] = safe_pearson(
        [market[i].outcome for i in m_ids], [market[i].forecast for i in m_ids])
    out["pearson_outcome_survey"] = safe_pearson(
        [survey[i].outcome for i in s_ids], [survey[i].forecast for i in s_ids])
    both = sorted(market.keys() & survey.keys())
    out["pearson_market_survey"] = safe_pearson(
        [market[i].forecast for i in both], [survey[i].forecast for i in both])
    out["spearman_market_survey"] = _safe_spearman(
        [market[i].forecast for i in both], [survey[i].forecast for i in both])
    return out


def pvalue_regression(findings, p_threshold: float = 0.005,
                      ) -> tuple[stats.OLSFit, dict[str, dict]]:
    """OLS of outcome on the significant-evidence indicator, plus rates.

    The indicator is 1 for the at-or-below-threshold category; the
    intercept is then the above-threshold replication rate and
    intercept + slope the at-or-below rate.
    """
    if isinstance(findings, Dataset):
        findings = findings.findings
    x = [1.0 if f.p_value_category == CATEGORY_AT_OR_BELOW else 0.0
         for f in findings]
    y = [float(f.outcome) for f in findings]
    fit = stats.ols_simple(x, y)
    rates = {}
    for category, indicator in ((CATEGORY_ABOVE, 0.0), (CATEGORY_AT_OR_BELOW, 1.0)):
        members = [f for f, xv in zip(findings, x) if xv == indicator]
        n = len(members)
        n_rep = sum(f.outcome for f in members)
        rates[category] = {
            "n": n,
            "n_replicated": n_rep,
            "rate": n_rep / n if n else None,
            "threshold": p_threshold,
        }
    return fit, rates


# ----------------------------------------------------------------------
# report tables
# ----------------------------------------------------------------------

def build_table1(ds: Dataset, scores: list[ScoreRow]) -> dict:
    """Per-project and pooled summary in a structured, JSON-friendly form."""
    groups = summarize(scores, ds, group_by="project")
    groups += summarize(scores, ds, group_by="pooled")
    rows = []
    for g in groups:
        rows.append({
            "project": g.project,
            "n_findings": g.n_findings,
            "n_replicated": g.n_replicated,
            "replication_rate": g.replication_rate,
            "market_mean_belief": g.mean_belief.get(METHOD_MARKET),
            "market_n_correct": g.n_correct.get(METHOD_MARKET),
            "market_mae": g.mae.get(METHOD_MARKET),
            "survey_mean_belief": g.mean_belief.get(METHOD_MEAN),
            "survey_n_correct": g.n_correct.get(METHOD_MEAN),
            "survey_mae": g.mae.get(METHOD_MEAN),
            "spearman_market_survey": g.spearman_market_survey,
            "spearman_outcome_market": g.spearman_outcome.get(METHOD_MARKET),
            "spearman_outcome_survey": g.spearman_outcome.get(METHOD_MEAN),
        })
    return {"rows": rows}


def build_table2(findings, p_threshold: float = 0.005) -> dict:
    """P-value-category regression in a structured, JSON-friendly form."""
    fit, rates = pvalue_regression(findings, p_threshold)
    slope_test = stats.ols_coef_test(fit.slope, fit.se_slope, fit.n)
    intercept_test = stats.ols_coef_test(fit.intercept, fit.se_intercept, fit.n)
    return {
        "dependent": "replication outcome (binary)",
        "intercept": fit.intercept,
        "se_intercept": fit.se_intercept,
        "p_intercept": intercept_test.p_value,
        "slope": fit.slope,
        "se_slope": fit.se_slope,
        "p_slope": slope_test.p_value,
        "r_squared": fit.r_squared,
        "n": fit.n,
        "category_rates": rates,
    }


def write_scores(scores: list[ScoreRow], path: str | Path,
                 delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["finding_id", "method", "forecast", "outcome", "predicted",
                    "correct", "abs_error", "extremeness"])
        for s in scores:
            w.writerow([s.finding_id, s.method, repr(s.forecast), s.outcome,
                        s.predicted, int(s.correct), repr(s.abs_error),
                        repr(s.extremeness)])


def write_table1_csv(table1: dict, path: str | Path, delimiter: str = ",") -> None:
    rows = table1["rows"]
    if not rows:
        return
    cols = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(cols)
        for row in rows:
            w.writerow(["" if row[c] is None else row[c] for c in cols])


def write_table2_csv(table2: dict, path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["term", "estimate", "se", "p_value"])
        w.writerow(["intercept", table2["intercept"], table2["se_intercept"],
                    table2["p_intercept"]])
        w.writerow(["significant_category", table2["slope"], table2["se_slope"],
                    table2["p_slope"]])
        w.writerow(["r_squared", table2["r_squared"], "", ""])
        w.writerow(["n", table2["n"], "", ""])
