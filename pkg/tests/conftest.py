import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from repmarket.dataset import load_dataset
from repmarket.synth import synthetic_dataset

OUTCOMES_CSV = """\
finding_id,project,outcome,p_value_category,original_p_value,market_open,market_close
F001,RPP,1,at_or_below,0.001,2020-01-06T00:00:00.000Z,2020-01-20T00:00:00.000Z
F002,SSRP,0,above,0.03,2020-01-07T00:00:00.000Z,2020-01-21T00:00:00.000Z
"""

SURVEYS_CSV = """\
finding_id,forecaster_id,belief
F001,alice,0.2
F001,bob,0.4
F001,carol,0.9
F002,alice,0.3
"""

TRADES_CSV = """\
finding_id,trader_id,timestamp,side,quantity,post_trade_price
F001,alice,2020-01-06T01:00:00.000Z,YES,10,0.55
F001,bob,2020-01-07T00:00:00.000Z,YES,5,0.7
F001,carol,2020-01-10T12:00:00.000Z,YES,4,0.8
F002,alice,2020-01-07T02:00:00.000Z,NO,3,0.45
F002,bob,2020-01-08T00:00:00.000Z,YES,2,0.5
F002,carol,2020-01-09T00:00:00.000Z,NO,6,0.35
"""


def write_fixture_files(directory: Path, outcomes=OUTCOMES_CSV,
                        surveys=SURVEYS_CSV, trades=TRADES_CSV) -> dict[str, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "outcomes": directory / "outcomes.csv",
        "surveys": directory / "surveys.csv",
        "trades": directory / "trades.csv",
    }
    paths["outcomes"].write_text(outcomes, encoding="utf-8")
    paths["surveys"].write_text(surveys, encoding="utf-8")
    paths["trades"].write_text(trades, encoding="utf-8")
    return paths


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    return write_fixture_files(tmp_path_factory.mktemp("fixture"))


@pytest.fixture()
def fixture_ds(fixture_paths):
    return load_dataset(fixture_paths["outcomes"], fixture_paths["surveys"],
                        fixture_paths["trades"])


@pytest.fixture(scope="session")
def synth_ds():
    return synthetic_dataset(seed=2024, n_markets=16, n_traders=8)
