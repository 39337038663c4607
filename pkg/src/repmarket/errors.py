"""Exception types shared across the package."""


class RepmarketError(Exception):
    """Base class for all repmarket errors."""


class MissingColumn(RepmarketError):
    """A column named by the column mapping is absent from the file header."""

    def __init__(self, table: str, column: str):
        super().__init__(f"table {table!r} has no column {column!r}")
        self.table = table
        self.column = column


class UnknownFinding(RepmarketError):
    """A finding_id that does not exist in the dataset."""


class EmptyMarket(RepmarketError):
    """A market with no usable trades."""


class NonPositiveLiquidity(RepmarketError):
    """Liquidity parameter must be strictly positive."""


class MarketSettled(RepmarketError):
    """Operation requires an open market."""


class UnknownTrader(RepmarketError):
    """Trader has no ledger in this market."""


class InsufficientTokens(RepmarketError):
    """Trade would drive the trader's token balance below zero."""


class InsufficientHoldings(RepmarketError):
    """Sell exceeds the trader's holdings (short positions are not allowed)."""


class NoSurveyResponses(RepmarketError):
    """Finding has no survey responses to aggregate."""


class AllWeightsZero(RepmarketError):
    """Every respondent for the finding carries zero weight."""


class MissingOutcome(RepmarketError):
    """Forecast references a finding with no recorded outcome."""


class DegenerateInput(RepmarketError):
    """Statistic is undefined for the given input (constant vector, too short)."""


class DegenerateTable(RepmarketError):
    """Contingency table has a zero marginal."""


class DomainError(RepmarketError):
    """Special-function argument outside its valid domain."""


class InsufficientPoints(RepmarketError):
    """Too few points for the requested local regression."""


class NoReduction(RepmarketError):
    """Error curve is flat or rising; no reduction milestone exists."""
