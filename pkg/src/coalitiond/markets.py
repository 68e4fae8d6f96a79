"""Market scenarios turned into dynamic coalitional games.

Two markets are modelled:

* a collaborative forecasting market, where a coalition's value is one minus
  the absolute error of its linearly pooled point forecast;
* a local electricity market, where a coalition's value is the welfare of
  clearing its members' bids and asks against each other.

Both operate on normalized inputs: forecasts and observations are capacity
factors in [0, 1], energy in kWh, prices in currency per kWh.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .game import DynamicGame, GameError, InstantaneousGame, as_mask, coalition_sizes, membership_matrix


@dataclass(frozen=True)
class ForecastRecord:
    k: int
    forecasts: np.ndarray
    observation: float
    time: float = 0.0

    @property
    def n_agents(self) -> int:
        return len(self.forecasts)


@dataclass(frozen=True)
class MarketAgentOffer:
    """One agent's offer; ``price`` is stored positive for both sides."""

    agent: int
    side: str
    quantity: float
    price: float

    def __post_init__(self):
        if self.side not in ("buyer", "seller"):
            raise GameError(f"side must be 'buyer' or 'seller', got {self.side!r}")
        if self.quantity < 0 or self.price < 0:
            raise GameError(f"agent {self.agent}: quantity and price must be non-negative")


@dataclass(frozen=True)
class MarketSnapshot:
    k: int
    offers: tuple[MarketAgentOffer, ...]
    time: float = 0.0
    _order: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        offers = tuple(sorted(self.offers, key=lambda o: o.agent))
        if [o.agent for o in offers] != list(range(len(offers))):
            raise GameError(f"step {self.k}: need exactly one offer per agent 0..N-1")
        object.__setattr__(self, "offers", offers)
        # merit order over the whole market; any coalition's order is a subsequence
        buyers = sorted((o for o in offers if o.side == "buyer"), key=lambda o: (-o.price, o.agent))
        sellers = sorted((o for o in offers if o.side == "seller"), key=lambda o: (o.price, o.agent))
        object.__setattr__(self, "_order", (tuple(buyers), tuple(sellers)))

    @property
    def n_agents(self) -> int:
        return len(self.offers)


# forecasting market

def forecast_value(record: ForecastRecord, s) -> float:
    """``1 - |pooled forecast - observation|``; the empty coalition is worth 0."""
    mask = as_mask(s)
    if mask == 0:
        return 0.0
    idx = [i for i in range(record.n_agents) if mask >> i & 1]
    pooled = float(np.mean(record.forecasts[idx]))
    return 1.0 - abs(pooled - record.observation)


def forecast_to_game(record: ForecastRecord) -> InstantaneousGame:
    n = record.n_agents
    sizes = coalition_sizes(n).astype(float)
    sums = membership_matrix(n) @ np.asarray(record.forecasts, dtype=float)
    table = np.zeros(1 << n)
    table[1:] = 1.0 - np.abs(sums[1:] / sizes[1:] - record.observation)
    return InstantaneousGame.from_table(n, table)


# electricity market

def clear_market(buyers: Sequence[MarketAgentOffer], sellers: Sequence[MarketAgentOffer]) -> tuple[float, float]:
    """Merit-order clearing of price-sorted offers; returns ``(welfare, traded)``.

    Arithmetic stays in the offers' number type, so rational inputs clear exactly.
    """
    welfare = traded = 0
    b = s = 0
    demand = buyers[0].quantity if buyers else 0
    supply = sellers[0].quantity if sellers else 0
    while b < len(buyers) and s < len(sellers):
        if buyers[b].price <= sellers[s].price:
            break
        q = min(demand, supply)
        welfare += q * (buyers[b].price - sellers[s].price)
        traded += q
        demand -= q
        supply -= q
        if demand <= 0.0:
            b += 1
            demand = buyers[b].quantity if b < len(buyers) else 0
        if supply <= 0.0:
            s += 1
            supply = sellers[s].quantity if s < len(sellers) else 0
    return welfare, traded


def electricity_value(snap: MarketSnapshot, s) -> float:
    """Maximum welfare the coalition can realize by trading among its members."""
    mask = as_mask(s)
    if mask >> snap.n_agents:
        raise GameError(f"coalition {mask:#b} has members outside the market")
    buyers, sellers = snap._order
    welfare, _ = clear_market(
        [o for o in buyers if mask >> o.agent & 1],
        [o for o in sellers if mask >> o.agent & 1],
    )
    return float(welfare)


def snapshot_to_game(snap: MarketSnapshot) -> InstantaneousGame:
    n = snap.n_agents
    buyers, sellers = snap._order
    table = np.zeros(1 << n)
    buyer_bits = sum(1 << o.agent for o in buyers)
    seller_bits = sum(1 << o.agent for o in sellers)
    for mask in range(1, 1 << n):
        # only mixed coalitions can trade
        if mask & buyer_bits and mask & seller_bits:
            table[mask] = clear_market(
                [o for o in buyers if mask >> o.agent & 1],
                [o for o in sellers if mask >> o.agent & 1],
            )[0]
    return InstantaneousGame.from_table(n, table)


# time series ingestion

def _parse_time(text: str, row: int) -> float:
    """Minutes: plain numbers are taken as minutes, otherwise ISO 8601."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text).timestamp() / 60.0
    except ValueError:
        raise GameError(f"row {row}: cannot parse timestamp {text!r}") from None


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise GameError(f"row {row}: malformed number {text!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise GameError(f"row {row}: non-finite value in column {column!r}")
    return value


def resample_times(times: np.ndarray, step: float) -> np.ndarray:
    count = int(math.floor((times[-1] - times[0]) / step + 1e-9)) + 1
    return times[0] + step * np.arange(count)


def interpolate_rows(times: np.ndarray, values: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Linearly interpolate each column of ``values`` onto a regular grid of spacing ``step``."""
    grid = resample_times(times, step)
    values = np.asarray(values, dtype=float)
    out = np.column_stack([np.interp(grid, times, values[:, c]) for c in range(values.shape[1])])
    return grid, out


def _check_monotone(times: Sequence[float], rows: Sequence[int]) -> None:
    for a in range(1, len(times)):
        if times[a] <= times[a - 1]:
            raise GameError(f"row {rows[a]}: timestamps must be strictly increasing")


def _read_forecasts(path: Path, resolution: float | None) -> list[ForecastRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if len(header) < 3 or header[0] != "timestamp" or header[-1] != "observation":
            raise GameError("row 1: forecast header must be 'timestamp, f_1..f_N, observation'")
        times, data, rows = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise GameError(f"row {row_no}: expected {len(header)} columns, got {len(row)}")
            times.append(_parse_time(row[0], row_no))
            values = [_parse_float(c, row_no, h) for c, h in zip(row[1:], header[1:])]
            if any(v < 0.0 or v > 1.0 for v in values):
                raise GameError(f"row {row_no}: capacity factors must lie in [0, 1]")
            data.append(values)
            rows.append(row_no)
    if not data:
        raise GameError("no data rows")
    _check_monotone(times, rows)
    times = np.array(times)
    data = np.array(data)
    if resolution is not None:
        times, data = interpolate_rows(times, data, resolution)
    return [
        ForecastRecord(k, data[k, :-1].copy(), float(data[k, -1]), float(times[k] - times[0]))
        for k in range(len(times))
    ]


def _read_market(path: Path, resolution: float | None) -> list[MarketSnapshot]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["timestamp", "agent", "side", "quantity", "price"]:
            raise GameError("row 1: market header must be 'timestamp, agent, side, quantity, price'")
        groups: dict[float, dict[int, tuple]] = {}
        first_row: dict[float, int] = {}
        last_time = None
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise GameError(f"row {row_no}: expected 5 columns, got {len(row)}")
            t = _parse_time(row[0], row_no)
            if last_time is not None and t < last_time:
                raise GameError(f"row {row_no}: timestamps must be non-decreasing")
            last_time = t
            try:
                agent = int(row[1])
            except ValueError:
                raise GameError(f"row {row_no}: agent must be an integer index") from None
            side = row[2].strip().lower()
            if side not in ("buyer", "seller"):
                raise GameError(f"row {row_no}: side must be 'buyer' or 'seller'")
            quantity = _parse_float(row[3], row_no, "quantity")
            price = _parse_float(row[4], row_no, "price")
            if quantity < 0 or price < 0:
                raise GameError(f"row {row_no}: quantity and price must be non-negative")
            slot = groups.setdefault(t, {})
            first_row.setdefault(t, row_no)
            if agent in slot:
                raise GameError(f"row {row_no}: duplicate offer for agent {agent}")
            slot[agent] = (side, quantity, price)
    if not groups:
        raise GameError("no data rows")
    times = sorted(groups)
    n = len(groups[times[0]])
    for t in times:
        if sorted(groups[t]) != list(range(n)):
            raise GameError(f"row {first_row[t]}: every timestamp needs one offer for each agent 0..{n - 1}")
    t_arr = np.array(times)
    sides = np.array([[groups[t][a][0] == "seller" for a in range(n)] for t in times])
    qty = np.array([[groups[t][a][1] for a in range(n)] for t in times])
    price = np.array([[groups[t][a][2] for a in range(n)] for t in times])
    return build_snapshots(t_arr, sides, qty, price, resolution)


def build_snapshots(times, is_seller, quantity, price, resolution: float | None = None) -> list[MarketSnapshot]:
    """Assemble snapshots from ``(T, N)`` arrays, optionally resampled to ``resolution`` minutes.

    Interpolated steps take each agent's side from the preceding source row.
    """
    times = np.asarray(times, dtype=float)
    is_seller = np.asarray(is_seller, dtype=bool)
    if resolution is not None:
        grid, qty = interpolate_rows(times, quantity, resolution)
        _, prc = interpolate_rows(times, price, resolution)
        left = np.clip(np.searchsorted(times, grid + 1e-9, side="right") - 1, 0, len(times) - 1)
        sides = is_seller[left]
        times = grid
    else:
        qty, prc, sides = np.asarray(quantity, float), np.asarray(price, float), is_seller
    out = []
    for k in range(len(times)):
        offers = tuple(
            MarketAgentOffer(a, "seller" if sides[k, a] else "buyer", float(qty[k, a]), float(prc[k, a]))
            for a in range(qty.shape[1])
        )
        out.append(MarketSnapshot(k, offers, float(times[k] - times[0])))
    return out


def ingest_timeseries(path, schema: str, resolution_minutes: float | None = None):
    """Read a forecast or market CSV into records in step order.

    ``schema`` is ``"forecast"`` or ``"electricity"``. Row numbers in error
    messages count the header as row 1. With ``resolution_minutes`` the
    series is linearly interpolated onto that grid.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    if resolution_minutes is not None and resolution_minutes <= 0:
        raise GameError("resolution must be positive")
    if schema == "forecast":
        return _read_forecasts(path, resolution_minutes)
    if schema == "electricity":
        return _read_market(path, resolution_minutes)
    raise GameError(f"unknown schema {schema!r}")


def write_forecast_csv(records: Sequence[ForecastRecord], path) -> None:
    n = records[0].n_agents
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp"] + [f"f_{i + 1}" for i in range(n)] + ["observation"])
        for r in records:
            w.writerow([repr(r.time)] + [repr(float(f)) for f in r.forecasts] + [repr(r.observation)])


def write_market_csv(snapshots: Sequence[MarketSnapshot], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "agent", "side", "quantity", "price"])
        for snap in snapshots:
            for o in snap.offers:
                w.writerow([repr(snap.time), o.agent, o.side, repr(o.quantity), repr(o.price)])


# synthetic scenarios

def _ar1(rng, shape, rho, scale, steps):
    """Stationary AR(1) paths with marginal std ``scale``; constant when ``rho == 1``."""
    out = np.empty((steps,) + shape)
    out[0] = scale * rng.standard_normal(shape)
    innov = scale * math.sqrt(max(0.0, 1.0 - rho * rho))
    for k in range(1, steps):
        out[k] = rho * out[k - 1] + innov * rng.standard_normal(shape)
    return out


def _persistence(smoothness: float) -> float:
    if smoothness <= 0:
        raise GameError("smoothness must be positive")
    return 1.0 if math.isinf(smoothness) else math.exp(-1.0 / smoothness)


def synthetic_forecast_records(n_agents: int, horizon: int, smoothness: float = 50.0, noise: float = 0.03,
                               seed: int = 0, step_minutes: float = 5.0) -> list[ForecastRecord]:
    """Smooth capacity-factor observations plus per-agent correlated forecast errors.

    ``smoothness`` is the correlation time in steps of both the observation
    and the forecast errors (``inf`` freezes them); ``noise`` is the typical
    forecast error, scaled per agent by a skill factor in [0.5, 1.5].
    """
    if n_agents < 1 or horizon < 1:
        raise GameError("need at least one agent and one step")
    if noise < 0:
        raise GameError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    rho = _persistence(smoothness)
    level = rng.uniform(0.3, 0.7)
    omega = np.clip(level + _ar1(rng, (), rho, 0.15, horizon), 0.0, 1.0)
    skill = rng.uniform(0.5, 1.5, size=n_agents)
    errors = _ar1(rng, (n_agents,), rho, 1.0, horizon) * (noise * skill)
    forecasts = np.clip(omega[:, None] + errors, 0.0, 1.0)
    return [
        ForecastRecord(k, forecasts[k], float(omega[k]), k * step_minutes) for k in range(horizon)
    ]


def synthetic_forecast_scenario(n_agents: int, horizon: int, smoothness: float = 50.0, noise: float = 0.03,
                                seed: int = 0) -> DynamicGame:
    records = synthetic_forecast_records(n_agents, horizon, smoothness, noise, seed)
    return DynamicGame(tuple(forecast_to_game(r) for r in records))


def synthetic_market_base(n_agents: int = 10, n_sellers: int | None = None, start_hour: float = 10.0,
                          end_hour: float = 14.0, seed: int = 0, base_minutes: float = 10.0):
    """Raw market data on a 10-minute grid: PV sellers and consumer buyers.

    Returns ``(times, is_seller, quantity, price)``; times in minutes since
    midnight, arrays of shape ``(T, N)``.
    """
    n_sellers = n_agents // 2 if n_sellers is None else n_sellers
    if not 0 <= n_sellers <= n_agents:
        raise GameError("n_sellers must lie in 0..n_agents")
    rng = np.random.default_rng(seed)
    times = np.arange(start_hour * 60.0, end_hour * 60.0 + 1e-9, base_minutes)
    steps = len(times)
    is_seller = np.zeros((steps, n_agents), dtype=bool)
    is_seller[:, :n_sellers] = True

    hours = times / 60.0
    sun = np.clip(np.sin(np.pi * (hours - 6.0) / 14.0), 0.0, None)
    rho = math.exp(-base_minutes / 40.0)
    quantity = np.empty((steps, n_agents))
    price = np.empty((steps, n_agents))

    pv_peak = rng.uniform(2.0, 6.0, size=n_sellers)  # kWh per interval at full sun
    cloud = np.clip(1.0 + _ar1(rng, (n_sellers,), rho, 0.15, steps), 0.3, 1.0)
    quantity[:, :n_sellers] = pv_peak * sun[:, None] * cloud
    ask = rng.uniform(0.04, 0.10, size=n_sellers)
    price[:, :n_sellers] = ask * (1.0 + _ar1(rng, (n_sellers,), rho, 0.05, steps))

    n_buyers = n_agents - n_sellers
    base_load = rng.uniform(1.0, 4.0, size=n_buyers)
    load = np.clip(1.0 + _ar1(rng, (n_buyers,), rho, 0.2, steps), 0.2, None)
    quantity[:, n_sellers:] = base_load * load
    bid = rng.uniform(0.14, 0.26, size=n_buyers)
    price[:, n_sellers:] = bid * (1.0 + _ar1(rng, (n_buyers,), rho, 0.05, steps))
    return times, is_seller, quantity, np.clip(price, 0.0, None)


def synthetic_market_snapshots(n_agents: int = 10, lead_time_minutes: float = 5.0, seed: int = 0,
                               n_sellers: int | None = None, start_hour: float = 10.0,
                               end_hour: float = 14.0) -> list[MarketSnapshot]:
    """One synthetic market day window resampled to the lead-time resolution.

    The underlying 10-minute data depends only on ``seed``, so different
    lead times see the same market evolving at different sampling rates.
    """
    times, sides, qty, price = synthetic_market_base(n_agents, n_sellers, start_hour, end_hour, seed)
    return build_snapshots(times, sides, qty, price, resolution=lead_time_minutes)


def market_scenario(snapshots: Sequence[MarketSnapshot]) -> DynamicGame:
    return DynamicGame(tuple(snapshot_to_game(s) for s in snapshots))


def forecast_scenario(records: Sequence[ForecastRecord]) -> DynamicGame:
    return DynamicGame(tuple(forecast_to_game(r) for r in records))
