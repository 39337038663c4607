"""Binary prediction-market state machine with a log-scoring-rule market maker.

The maker quotes prices from a cost function C(q) = b*ln(exp(q_yes/b) +
exp(q_no/b)); a trade changing outstanding quantities from q to q' costs
C(q') - C(q). The instantaneous YES price is the softmax weight of q_yes,
which callers interpret as the market's replication probability. All
arithmetic uses the log-sum-exp form so quantities up to |q|/b ~ 700 stay
finite.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

from .dataset import Dataset, Trade, trades_for
from .errors import (
    EmptyMarket,
    InsufficientHoldings,
    InsufficientTokens,
    MarketSettled,
    NonPositiveLiquidity,
    UnknownTrader,
)

OPEN = "open"
SETTLED = "settled"

PRICE_TAKING = "price_taking"
SIMULATED = "simulated"

# Strict (0, 1) bounds for quoted prices; the upper bound is the largest
# double below 1.
_PRICE_FLOOR = sys.float_info.min
_PRICE_CEIL = 1.0 - 2.0 ** -53

DEFAULT_LIQUIDITY = 100.0
DEFAULT_ENDOWMENT = 100.0


@dataclass(frozen=True)
class Quote:
    price_yes: float
    price_no: float
    cost: float = 0.0


@dataclass(frozen=True)
class TraderAccount:
    tokens: float
    yes_held: float = 0.0
    no_held: float = 0.0


@dataclass(frozen=True)
class MarketState:
    liquidity_b: float
    q_yes: float
    q_no: float
    ledgers: dict[str, TraderAccount]
    status: str = OPEN
    outcome: int | None = None
    maker_intake: float = field(default=0.0)  # cumulative tokens paid to the maker


def cost_function(q_yes: float, q_no: float, b: float) -> float:
    """C(q) = b*ln(exp(q_yes/b) + exp(q_no/b)), evaluated without overflow."""
    a1, a2 = q_yes / b, q_no / b
    m = max(a1, a2)
    return b * (m + math.log1p(math.exp(min(a1, a2) - m)))


def price_yes_from_quantities(q_yes: float, q_no: float, b: float) -> float:
    """Instantaneous YES price, clamped to the open interval (0, 1)."""
    d = (q_yes - q_no) / b  # logit of the YES price
    if d >= 0:
        p = 1.0 / (1.0 + math.exp(-d))
    else:
        e = math.exp(d)
        p = e / (1.0 + e)
    return min(max(p, _PRICE_FLOOR), _PRICE_CEIL)


def new_market(liquidity_b: float, endowment: float = DEFAULT_ENDOWMENT,
               traders: tuple[str, ...] | list[str] | set[str] = ()) -> MarketState:
    """Open a market with zero outstanding contracts and endowed traders."""
    if not liquidity_b > 0:
        raise NonPositiveLiquidity(f"liquidity_b must be > 0, got {liquidity_b}")
    if endowment < 0:
        raise ValueError(f"endowment must be nonnegative, got {endowment}")
    ledgers = {tid: TraderAccount(tokens=endowment) for tid in sorted(traders)}
    return MarketState(liquidity_b, 0.0, 0.0, ledgers)


def price(ms: MarketState) -> Quote:
    """Current instantaneous quote; price_yes + price_no == 1 to 1e-12."""
    if ms.status != OPEN:
        raise MarketSettled("cannot quote a settled market")
    p_yes = price_yes_from_quantities(ms.q_yes, ms.q_no, ms.liquidity_b)
    p_no = min(max(1.0 - p_yes, _PRICE_FLOOR), _PRICE_CEIL)
    return Quote(price_yes=p_yes, price_no=p_no)


def quote_trade(ms: MarketState, side: str, quantity: float) -> Quote:
    """Post-trade prices and signed token cost of a prospective trade."""
    cost = cost_to_trade(ms, side, quantity)
    dq = quantity if side == "YES" else 0.0
    p_yes = price_yes_from_quantities(ms.q_yes + dq, ms.q_no + (quantity - dq),
                                      ms.liquidity_b)
    p_no = min(max(1.0 - p_yes, _PRICE_FLOOR), _PRICE_CEIL)
    return Quote(price_yes=p_yes, price_no=p_no, cost=cost)


def cost_to_trade(ms: MarketState, side: str, quantity: float) -> float:
    """Tokens required to trade `quantity` contracts on `side`.

    Positive quantity buys, negative sells; buys cost positive tokens,
    sells return tokens (negative cost).
    """
    if ms.status != OPEN:
        raise MarketSettled("cannot trade a settled market")
    if side not in ("YES", "NO"):
        raise ValueError(f"side must be YES or NO, got {side!r}")
    dq_yes = quantity if side == "YES" else 0.0
    dq_no = quantity if side == "NO" else 0.0
    b = ms.liquidity_b
    return (cost_function(ms.q_yes + dq_yes, ms.q_no + dq_no, b)
            - cost_function(ms.q_yes, ms.q_no, b))


def execute_trade(ms: MarketState, trader_id: str, side: str, quantity: float,
                  timestamp: int) -> tuple[MarketState, Trade]:
    """Execute a trade and return (new state, trade record).

    The input state is never mutated; on error it remains the valid state.
    The trade record always carries a positive quantity: a sell is recorded
    as the price-equivalent buy of the opposite side (the cost function is
    translation-invariant, so the recorded sequence replays to the same
    price path). post_trade_price is the YES price after the trade,
    regardless of side.
    """
    if ms.status != OPEN:
        raise MarketSettled("cannot trade a settled market")
    account = ms.ledgers.get(trader_id)
    if account is None:
        raise UnknownTrader(trader_id)
    if quantity == 0:
        raise ValueError("quantity must be nonzero")

    cost = cost_to_trade(ms, side, quantity)
    tokens_after = account.tokens - cost
    if tokens_after < 0:
        raise InsufficientTokens(
            f"trade costs {cost:.6f} but {trader_id!r} holds {account.tokens:.6f} tokens")
    yes_after = account.yes_held + (quantity if side == "YES" else 0.0)
    no_after = account.no_held + (quantity if side == "NO" else 0.0)
    if yes_after < 0 or no_after < 0:
        raise InsufficientHoldings(
            f"sell of {-quantity} {side} exceeds holdings of {trader_id!r}")

    ledgers = dict(ms.ledgers)
    ledgers[trader_id] = TraderAccount(tokens_after, yes_after, no_after)
    new_state = MarketState(
        liquidity_b=ms.liquidity_b,
        q_yes=ms.q_yes + (quantity if side == "YES" else 0.0),
        q_no=ms.q_no + (quantity if side == "NO" else 0.0),
        ledgers=ledgers,
        maker_intake=ms.maker_intake + cost,
    )
    post_price = price_yes_from_quantities(new_state.q_yes, new_state.q_no,
                                           new_state.liquidity_b)
    if quantity > 0:
        rec_side, rec_quantity = side, quantity
    else:
        rec_side = "NO" if side == "YES" else "YES"
        rec_quantity = -quantity
    trade = Trade(finding_id="", trader_id=trader_id, timestamp=timestamp,
                  side=rec_side, quantity=rec_quantity, post_trade_price=post_price)
    return new_state, trade


def settle(ms: MarketState, outcome: int) -> tuple[MarketState, dict[str, float]]:
    """Redeem contracts at one token per winning contract.

    Returns the settled state and each trader's final token balance.
    """
    if ms.status != OPEN:
        raise MarketSettled("market already settled")
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    ledgers = {}
    final_tokens = {}
    for tid, acct in ms.ledgers.items():
        payout = acct.yes_held if outcome == 1 else acct.no_held
        ledgers[tid] = TraderAccount(tokens=acct.tokens + payout)
        final_tokens[tid] = acct.tokens + payout
    settled = MarketState(ms.liquidity_b, ms.q_yes, ms.q_no, ledgers,
                          status=SETTLED, outcome=outcome,
                          maker_intake=ms.maker_intake)
    return settled, final_tokens


def replay(ds: Dataset, finding_id: str, mode: str = PRICE_TAKING,
           liquidity_b: float | None = None) -> list[float]:
    """Price time series of one market, ending with its final price.

    price_taking returns the recorded post-trade prices verbatim; simulated
    re-executes the recorded (side, quantity) sequence through a fresh
    market with the given liquidity and returns the model prices. Simulated
    replay requires recorded quantities.
    """
    trades = trades_for(ds, finding_id)
    if not trades:
        raise EmptyMarket(finding_id)
    if mode == PRICE_TAKING:
        return [t.post_trade_price for t in trades]
    if mode != SIMULATED:
        raise ValueError(f"unknown replay mode {mode!r}")
    if liquidity_b is None:
        raise ValueError("simulated replay requires liquidity_b")
    missing = [t for t in trades if t.quantity is None]
    if missing:
        raise ValueError(
            f"simulated replay needs recorded quantities; market {finding_id!r} "
            f"has {len(missing)} trades without them")
    ms = new_market(liquidity_b, endowment=math.inf,
                    traders={t.trader_id for t in trades})
    prices = []
    for t in trades:
        ms, executed = execute_trade(ms, t.trader_id, t.side, t.quantity, t.timestamp)
        prices.append(executed.post_trade_price)
    return prices
