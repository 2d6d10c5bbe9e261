"""Upper bounds on feedback rate and feedback error exponent.

Three bound families:

- ``burnashev``: the classical memoryless-channel exponent C1 * (1 - R/C),
  with capacity certified by an alternating-maximization upper/lower gap;
- ``capacity_bound``: sup over behavioral input policies and bounded
  stopping rules of stopped directed information per expected stop time;
- ``exponent_bound``: sup over message-form deterministic encoders and
  nested stopping-rule pairs of D * (1 - R/I), where I is the per-step
  information accumulated up to the first rule and D the per-step
  worst-case effective-channel divergence accumulated between the rules.

Searches are exact enumerations over finite families (encoders, stopping
rules) combined with seeded coordinate ascent on a simplex grid for
behavioral policies, so every reported value is the exact evaluation of a
stored maximizer; ``reevaluate`` recomputes it from that record.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import (
    BudgetExceededError,
    Channel,
    DEFAULT_TRAJECTORY_BUDGET,
    InputPolicy,
    JointLaw,
    SchemaError,
    StoppingRule,
    enumerate_stopping_rules,
    forward_joint,
)
from .info_measures import (
    binary_entropy,
    directed_kl_stopped,
    directed_mi_stopped,
    expected_stop_time,
    kl,
    mutual_information,
)
from .info_measures import _step_kl_per_history  # shared per-history divergence

__all__ = [
    "SearchConfig",
    "BoundResult",
    "BurnashevResult",
    "dmc_capacity",
    "burnashev",
    "capacity_bound",
    "exponent_bound",
    "exponent_candidates",
    "dmc_consistency",
    "ConsistencyReport",
    "ResidualTerms",
    "residual_terms",
    "reevaluate",
    "encoder_policy_from_tables",
]

CAPACITY_CERT_GAP = 1e-9
CAPACITY_UPDATE_TOL = 1e-10


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the bound searches; defaults match the documented
    acceptance setups."""

    grid_denominator: int = 16  # simplex grid resolution per coordinate
    sweeps: int = 50            # coordinate-ascent passes (early exit on no change)
    restarts: int = 8           # random restarts beyond the uniform start
    seed: int = 0
    stopping: str = "fixed"     # "fixed" (deterministic times) or "all" (prefix rules)
    rule_cap: int = 10**5
    budget: int = DEFAULT_TRAJECTORY_BUDGET
    fixed_t: int | None = None  # pin the capacity stopping time to one value
    messages: tuple[int, ...] = (2, 4)
    encoder_cap: int = 10**5    # max encoders enumerated per message count


@dataclass(frozen=True)
class BoundResult:
    """A bound value together with the maximizer that produced it and
    enough detail to re-evaluate it from scratch."""

    kind: str                  # "capacity" or "exponent"
    value: float
    horizon: int
    rate: float | None = None
    maximizer: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def to_json(self) -> str:
        def clean(obj):
            if isinstance(obj, dict):
                return {str(k): clean(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [clean(v) for v in obj]
            if isinstance(obj, float) and math.isinf(obj):
                return "inf" if obj > 0 else "-inf"
            if isinstance(obj, np.floating):
                return float(obj)
            if isinstance(obj, np.integer):
                return int(obj)
            return obj

        payload = {
            "kind": self.kind,
            "value": clean(self.value),
            "horizon": self.horizon,
            "rate": clean(self.rate),
            "maximizer": clean(self.maximizer),
            "diagnostics": clean(self.diagnostics),
            "flags": list(self.flags),
        }
        return json.dumps(payload, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# memoryless capacity and the classical exponent
# ---------------------------------------------------------------------------


def dmc_capacity(
    rows: np.ndarray,
    cert_gap: float = CAPACITY_CERT_GAP,
    update_tol: float = CAPACITY_UPDATE_TOL,
    max_iter: int = 200_000,
) -> tuple[float, np.ndarray, float]:
    """Capacity of a memoryless channel in bits by alternating maximization.

    Returns (capacity, input distribution, certified gap): the true capacity
    lies within ``gap`` of the returned value, by the standard sandwich
    between the achieved information and the worst-row divergence from the
    output marginal.
    """
    q = np.asarray(rows, dtype=float)
    x_size = q.shape[0]
    r = np.full(x_size, 1.0 / x_size)
    gap = math.inf
    lower = 0.0
    for _ in range(max_iter):
        py = r @ q
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(q > 0, q / np.where(py > 0, py, 1.0), 1.0)
            d = np.where(q > 0, q * np.log2(ratio), 0.0).sum(axis=1)
        lower = float(r @ d)
        upper = float(d.max())
        gap = upper - lower
        if gap < cert_gap:
            break
        r_new = r * np.exp2(d)
        r_new /= r_new.sum()
        if np.max(np.abs(r_new - r)) < update_tol and gap < 1e-6:
            r = r_new
            break
        r = r_new
    mid = lower + 0.5 * max(gap, 0.0)
    return mid, r, max(gap, 0.0)


@dataclass(frozen=True)
class BurnashevResult:
    capacity: float
    max_kl: float
    rate: float
    exponent: float
    infinite: bool
    gap: float

    def line(self) -> str:
        e = "inf" if self.infinite else f"{self.exponent:.9f}"
        return (
            f"C={self.capacity:.9f} C1={self.max_kl:.9f} "
            f"R={self.rate:.9f} E={e}"
        )


def burnashev(ch: Channel, rate: float) -> BurnashevResult:
    """Classical feedback error-exponent line C1 * (1 - R/C) for a
    memoryless channel.

    The divergence C1 is the largest pairwise divergence between channel
    rows; when some row pair has a support mismatch the exponent is
    explicitly infinite.  Rates above capacity are rejected.
    """
    if not ch.spec.is_dmc():
        raise SchemaError("the classical exponent needs a single-state channel")
    if rate < 0:
        raise SchemaError("rate must be nonnegative")
    rows = ch.spec.q[0]
    cap, _, gap = dmc_capacity(rows)
    c1 = 0.0
    for a in range(ch.spec.x_size):
        for b in range(ch.spec.x_size):
            c1 = max(c1, kl(rows[a], rows[b]))
    if rate > cap + 1e-9:
        raise SchemaError(f"rate {rate} exceeds capacity {cap:.9f}")
    if math.isinf(c1):
        return BurnashevResult(cap, c1, rate, math.inf, True, gap)
    if rate == 0.0:
        return BurnashevResult(cap, c1, rate, c1, False, gap)
    exponent = c1 * (1.0 - rate / cap)
    return BurnashevResult(cap, c1, rate, exponent, False, gap)


# ---------------------------------------------------------------------------
# capacity bound: behavioral policy x stopping rule search
# ---------------------------------------------------------------------------


def _simplex_grid(x_size: int, denom: int) -> list[tuple[float, ...]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(x_size), denom):
        counts = [0] * x_size
        for c in combo:
            counts[c] += 1
        out.append(tuple(c / denom for c in counts))
    return sorted(set(out))


def _policy_row_keys(ch: Channel, horizon: int):
    keys = []
    for t in range(1, horizon + 1):
        for xh in itertools.product(range(ch.spec.x_size), repeat=t - 1):
            for yh in itertools.product(range(ch.spec.y_size), repeat=t - 1):
                keys.append((t, xh, yh))
    return keys


def _capacity_rules(ch: Channel, horizon: int, cfg: SearchConfig):
    flags: list[str] = []
    if cfg.fixed_t is not None:
        rules = [StoppingRule.fixed(cfg.fixed_t, horizon, ch.spec.y_size)]
        return rules, flags
    if cfg.stopping == "all":
        try:
            rules = enumerate_stopping_rules(horizon, ch.spec.y_size, cap=cfg.rule_cap)
            return rules, flags
        except BudgetExceededError:
            flags.append("rule_cap_exceeded_fell_back_to_fixed")
    rules = [StoppingRule.fixed(t, horizon, ch.spec.y_size) for t in range(1, horizon + 1)]
    return rules, flags


def _capacity_objective(ch, rows, horizon, rules, budget):
    policy = InputPolicy(
        horizon=horizon, x_size=ch.spec.x_size, y_size=ch.spec.y_size, rows=rows
    )
    law = forward_joint(ch, policy, horizon, budget=budget)
    best_val, best_rule = -math.inf, None
    for rule in rules:
        et = expected_stop_time(law, rule)
        val = directed_mi_stopped(law, rule) / et
        if val > best_val:
            best_val, best_rule = val, rule
    return best_val, best_rule


def capacity_bound(ch: Channel, horizon: int, cfg: SearchConfig = SearchConfig()) -> BoundResult:
    """Best found value of stopped directed information per expected stop
    time, over behavioral policies (simplex-grid coordinate ascent with
    restarts) and stopping rules.

    The returned maximizer records the policy rows and the stop set, so the
    value can be recomputed exactly; diagnostics report the largest
    improvement available one grid step away from the chosen policy.
    """
    if horizon < 1:
        raise SchemaError("horizon must be >= 1")
    rules, flags = _capacity_rules(ch, horizon, cfg)
    keys = _policy_row_keys(ch, horizon)
    grid = _simplex_grid(ch.spec.x_size, cfg.grid_denominator)
    uniform = tuple(np.full(ch.spec.x_size, 1.0 / ch.spec.x_size))
    rng = np.random.default_rng(cfg.seed)

    best_val, best_rows, best_rule = -math.inf, None, None
    for restart in range(cfg.restarts + 1):
        if restart == 0:
            rows = {k: uniform for k in keys}
        else:
            rows = {k: grid[rng.integers(len(grid))] for k in keys}
        val, rule = _capacity_objective(ch, rows, horizon, rules, cfg.budget)
        for _ in range(cfg.sweeps):
            changed = False
            for key in keys:
                cur = rows[key]
                for cand in grid:
                    if cand == cur:
                        continue
                    trial = dict(rows)
                    trial[key] = cand
                    v, ru = _capacity_objective(ch, trial, horizon, rules, cfg.budget)
                    if v > val + 1e-12:
                        rows, val, rule = trial, v, ru
                        cur = cand
                        changed = True
            if not changed:
                break
        if val > best_val:
            best_val, best_rows, best_rule = val, rows, rule

    # one-grid-step optimality gap around the maximizer
    gap = 0.0
    for key in keys:
        for cand in grid:
            if cand == best_rows[key]:
                continue
            trial = dict(best_rows)
            trial[key] = cand
            v, _ = _capacity_objective(ch, trial, horizon, rules, cfg.budget)
            gap = max(gap, v - best_val)

    maximizer = {
        "policy_rows": {
            f"{t}|{','.join(map(str, xh))}|{','.join(map(str, yh))}": list(row)
            for (t, xh, yh), row in best_rows.items()
        },
        "stop_set": sorted(list(s) for s in best_rule.stops),
    }
    diagnostics = {"grid_neighbor_gap": gap, "rules_searched": len(rules)}
    return BoundResult(
        kind="capacity",
        value=best_val,
        horizon=horizon,
        maximizer=maximizer,
        diagnostics=diagnostics,
        flags=tuple(flags),
    )


def _rows_from_maximizer(payload: dict):
    rows = {}
    for key, row in payload["policy_rows"].items():
        t_s, xh_s, yh_s = key.split("|")
        xh = tuple(int(v) for v in xh_s.split(",") if v != "")
        yh = tuple(int(v) for v in yh_s.split(",") if v != "")
        rows[(int(t_s), xh, yh)] = tuple(row)
    return rows


# ---------------------------------------------------------------------------
# exponent bound: encoder x stopping-pair search
# ---------------------------------------------------------------------------


def encoder_policy_from_tables(
    tables: tuple, m: int, x_size: int, y_size: int, horizon: int
) -> InputPolicy:
    """tables[t-1][w][y_index] is the input sent for message w at step t
    after the y-history with the given lexicographic index."""

    def enc(t: int, w: int, y_hist: tuple[int, ...]) -> int:
        idx = 0
        for sym in y_hist:
            idx = idx * y_size + sym
        return tables[t - 1][w][idx]

    return InputPolicy(horizon=horizon, x_size=x_size, y_size=y_size, messages=m, encoder=enc)


def _full_encoder_tables(m, x_size, y_size, horizon):
    step_spaces = []
    for t in range(1, horizon + 1):
        ylen = y_size ** (t - 1)
        maps = []
        for flat in itertools.product(range(x_size), repeat=m * ylen):
            maps.append(tuple(tuple(flat[w * ylen : (w + 1) * ylen]) for w in range(m)))
        step_spaces.append(maps)
    yield from itertools.product(*step_spaces)


def _blockwise_encoder_tables(m, x_size, y_size, horizon):
    per_step = list(itertools.product(range(x_size), repeat=m))
    for combo in itertools.product(per_step, repeat=horizon):
        yield tuple(
            tuple((combo[t - 1][w],) * (y_size ** (t - 1)) for w in range(m))
            for t in range(1, horizon + 1)
        )


def _encoder_family(m, x_size, y_size, horizon, cap):
    full_count = 1
    for t in range(1, horizon + 1):
        full_count *= x_size ** (m * y_size ** (t - 1))
        if full_count > cap:
            break
    if full_count <= cap:
        return _full_encoder_tables(m, x_size, y_size, horizon), "full", full_count
    block_count = (x_size**m) ** horizon
    if block_count > cap:
        raise BudgetExceededError(
            f"even the per-step encoder family for m={m} exceeds cap {cap}"
        )
    return _blockwise_encoder_tables(m, x_size, y_size, horizon), "per_step", block_count


def _step_aggregates(law: JointLaw):
    """E over histories of the per-step information and divergence terms."""
    n = law.horizon
    ej = np.zeros(n + 1)
    ed = np.zeros(n + 1)
    for t in range(1, n + 1):
        for prev, xy in law.xy_node[t].items():
            p = law.node_prob[t - 1][prev]
            ej[t] += p * mutual_information(xy)
            ed[t] += p * _step_kl_per_history(law, t, prev)
    return ej, ed


def _stopping_pairs(ch: Channel, horizon: int, cfg: SearchConfig):
    """(first, last) rule pairs with first stopping no later than last."""
    flags: list[str] = []
    if cfg.stopping == "all":
        try:
            rules = enumerate_stopping_rules(horizon, ch.spec.y_size, cap=cfg.rule_cap)
            pairs = []
            for first in rules:
                for last in rules:
                    if first is not last and first.dominates(last):
                        pairs.append((first, last))
            if len(pairs) > cfg.rule_cap:
                raise BudgetExceededError("pair count over cap")
            return pairs, "rules", flags
        except BudgetExceededError:
            flags.append("rule_cap_exceeded_fell_back_to_fixed")
    pairs = [
        (t1, t)
        for t1 in range(1, horizon)
        for t in range(t1 + 1, horizon + 1)
    ]
    return pairs, "fixed", flags


def exponent_candidates(
    ch: Channel, horizon: int, cfg: SearchConfig = SearchConfig()
) -> tuple[list[dict], tuple[str, ...]]:
    """Enumerate (encoder, stopping-pair) candidates with their per-phase
    information and divergence, independent of the target rate.

    Each candidate dict carries: m, tables, pair description, i_rate
    (information per expected first-phase step), d_rate (divergence per
    expected second-phase step), et, et1.
    """
    if horizon < 2:
        raise SchemaError("exponent search needs horizon >= 2")
    pairs, pair_kind, flags = _stopping_pairs(ch, horizon, cfg)
    out: list[dict] = []
    for m in cfg.messages:
        family, family_kind, _count = _encoder_family(
            m, ch.spec.x_size, ch.spec.y_size, horizon, cfg.encoder_cap
        )
        if family_kind == "per_step":
            flags = tuple(set(flags) | {f"m{m}_encoders_restricted_to_per_step_maps"})
        for tables in family:
            policy = encoder_policy_from_tables(
                tables, m, ch.spec.x_size, ch.spec.y_size, horizon
            )
            law = forward_joint(ch, policy, horizon, budget=cfg.budget)
            if pair_kind == "fixed":
                ej, ed = _step_aggregates(law)
                for t1, t in pairs:
                    i_rate = float(ej[1 : t1 + 1].sum()) / t1
                    d_rate = float(ed[t1 + 1 : t + 1].sum()) / (t - t1)
                    out.append(
                        {
                            "m": m,
                            "tables": tables,
                            "pair": (t1, t),
                            "i_rate": i_rate,
                            "d_rate": d_rate,
                            "et": float(t),
                            "et1": float(t1),
                        }
                    )
            else:
                for first, last in pairs:
                    et1 = expected_stop_time(law, first)
                    et = expected_stop_time(law, last)
                    if et - et1 <= 1e-12:
                        continue
                    i_rate = directed_mi_stopped(law, first) / et1
                    d_rate = directed_kl_stopped(law, first, last) / (et - et1)
                    out.append(
                        {
                            "m": m,
                            "tables": tables,
                            "pair": (
                                sorted(list(s) for s in first.stops),
                                sorted(list(s) for s in last.stops),
                            ),
                            "i_rate": i_rate,
                            "d_rate": d_rate,
                            "et": et,
                            "et1": et1,
                        }
                    )
    return out, tuple(flags)


def _candidate_value(cand: dict, rate: float) -> float:
    i, d = cand["i_rate"], cand["d_rate"]
    if i <= 1e-12:  # numerically uninformative first phase
        return -math.inf
    if math.isinf(d):
        return math.inf if rate < i else -math.inf
    return d * (1.0 - rate / i)


def exponent_bound(
    ch: Channel,
    rate: float,
    horizon: int,
    cfg: SearchConfig = SearchConfig(),
    _candidates: tuple[list[dict], tuple[str, ...]] | None = None,
) -> BoundResult:
    """Best candidate value of D * (1 - R/I) at the given rate.

    Candidates whose searched information rate does not exceed R give
    non-positive values; they are reported only when nothing positive
    exists, with an explanatory flag.
    """
    if rate < 0:
        raise SchemaError("rate must be nonnegative")
    cands, flags = _candidates if _candidates is not None else exponent_candidates(
        ch, horizon, cfg
    )
    flags = tuple(flags)
    if not cands:
        return BoundResult(
            kind="exponent", value=-math.inf, horizon=horizon, rate=rate,
            flags=flags + ("no_candidates",),
        )
    best = max(cands, key=lambda c: _candidate_value(c, rate))
    value = _candidate_value(best, rate)
    if value <= 0.0:
        flags = flags + ("rate_exceeds_searched_information",)
    if math.isinf(value) and value > 0:
        flags = flags + ("infinite_divergence",)
    maximizer = {
        "m": best["m"],
        "encoder_tables": [
            [list(row) for row in step] for step in best["tables"]
        ],
        "pair": best["pair"],
    }
    diagnostics = {
        "i_rate": best["i_rate"],
        "d_rate": best["d_rate"],
        "et": best["et"],
        "et1": best["et1"],
        "candidates": len(cands),
    }
    return BoundResult(
        kind="exponent", value=value, horizon=horizon, rate=rate,
        maximizer=maximizer, diagnostics=diagnostics, flags=flags,
    )


def reevaluate(result: BoundResult, ch: Channel, cfg: SearchConfig = SearchConfig()) -> float:
    """Recompute a bound value from its stored maximizer (no search)."""
    if result.kind == "capacity":
        rows = _rows_from_maximizer(result.maximizer)
        policy = InputPolicy(
            horizon=result.horizon, x_size=ch.spec.x_size, y_size=ch.spec.y_size, rows=rows
        )
        law = forward_joint(ch, policy, result.horizon, budget=cfg.budget)
        stops = frozenset(tuple(s) for s in result.maximizer["stop_set"])
        rule = StoppingRule(horizon=result.horizon, y_size=ch.spec.y_size, stops=stops)
        return directed_mi_stopped(law, rule) / expected_stop_time(law, rule)
    if result.kind == "exponent":
        m = result.maximizer["m"]
        tables = tuple(
            tuple(tuple(row) for row in step)
            for step in result.maximizer["encoder_tables"]
        )
        policy = encoder_policy_from_tables(
            tables, m, ch.spec.x_size, ch.spec.y_size, result.horizon
        )
        law = forward_joint(ch, policy, result.horizon, budget=cfg.budget)
        pair = result.maximizer["pair"]
        if isinstance(pair[0], int) or (
            isinstance(pair, (list, tuple)) and len(pair) == 2 and isinstance(pair[0], (int, float))
        ):
            t1, t = int(pair[0]), int(pair[1])
            ej, ed = _step_aggregates(law)
            i_rate = float(ej[1 : t1 + 1].sum()) / t1
            d_rate = float(ed[t1 + 1 : t + 1].sum()) / (t - t1)
        else:
            first = StoppingRule(
                horizon=result.horizon, y_size=ch.spec.y_size,
                stops=frozenset(tuple(s) for s in pair[0]),
            )
            last = StoppingRule(
                horizon=result.horizon, y_size=ch.spec.y_size,
                stops=frozenset(tuple(s) for s in pair[1]),
            )
            et1 = expected_stop_time(law, first)
            et = expected_stop_time(law, last)
            i_rate = directed_mi_stopped(law, first) / et1
            d_rate = directed_kl_stopped(law, first, last) / (et - et1)
        if i_rate <= 1e-12:
            return -math.inf
        if math.isinf(d_rate):
            return math.inf if result.rate < i_rate else -math.inf
        return d_rate * (1.0 - result.rate / i_rate)
    raise SchemaError(f"unknown bound kind {result.kind!r}")


# ---------------------------------------------------------------------------
# consistency against the classical line
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    capacity: float
    max_kl: float
    rows: tuple[dict, ...]
    max_deviation: float
    degenerate: bool
    flags: tuple[str, ...]

    def to_text(self) -> str:
        if self.degenerate:
            return "degenerate rate grid: capacity is zero\n"
        lines = [
            f"capacity {self.capacity:.9f} bits, worst-pair divergence {self.max_kl:.9f} bits",
            "R,searched,classical,deviation",
        ]
        for row in self.rows:
            lines.append(
                f"{row['rate']:.9f},{row['searched']:.9f},"
                f"{row['classical']:.9f},{row['deviation']:.3e}"
            )
        lines.append(f"max deviation {self.max_deviation:.3e}")
        return "\n".join(lines) + "\n"


def dmc_consistency(
    ch: Channel,
    horizon: int = 3,
    cfg: SearchConfig = SearchConfig(),
    n_rates: int = 5,
) -> ConsistencyReport:
    """Compare the searched exponent bound against the classical line on a
    memoryless channel over an interior rate grid.

    A zero-capacity channel yields a flagged degenerate report instead of a
    rate grid.
    """
    if not ch.spec.is_dmc():
        raise SchemaError("consistency check needs a single-state channel")
    rows_q = ch.spec.q[0]
    cap, _, _ = dmc_capacity(rows_q)
    c1 = 0.0
    for a in range(ch.spec.x_size):
        for b in range(ch.spec.x_size):
            c1 = max(c1, kl(rows_q[a], rows_q[b]))
    if cap < 1e-9:
        return ConsistencyReport(
            capacity=cap, max_kl=c1, rows=(), max_deviation=0.0,
            degenerate=True, flags=("degenerate_rate_grid",),
        )
    cands = exponent_candidates(ch, horizon, cfg)
    rows = []
    worst = 0.0
    for i in range(1, n_rates + 1):
        rate = cap * i / (n_rates + 1)
        res = exponent_bound(ch, rate, horizon, cfg, _candidates=cands)
        classical = c1 * (1.0 - rate / cap)
        dev = abs(res.value - classical)
        worst = max(worst, dev)
        rows.append(
            {
                "rate": rate,
                "searched": res.value,
                "classical": classical,
                "deviation": dev,
            }
        )
    return ConsistencyReport(
        capacity=cap, max_kl=c1, rows=tuple(rows), max_deviation=worst,
        degenerate=False, flags=cands[1],
    )


# ---------------------------------------------------------------------------
# residual terms of the assembled finite-length statement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualTerms:
    """All pieces of the assembled finite-length exponent statement for one
    law and one nested stopping pair, exposed so tests can recompute the
    assembly independently."""

    messages: int
    horizon: int
    pe: float
    et: float
    et1: float
    rate: float
    i_rate: float
    d_rate: float
    eps: float
    lam: float
    fano_ceiling: float   # h(pe) + pe log2 M
    u_term: float
    delta_term: float
    v_term: float
    assembled: float
    flags: tuple[str, ...]


def residual_terms(
    law: JointLaw,
    last: StoppingRule,
    first: StoppingRule,
    eps: float | None = None,
    lam: float = 0.25,
) -> ResidualTerms:
    """Evaluate rate, per-phase information and divergence, and the three
    residual corrections for a message-form law under nested stopping rules
    (first stops no later than last); decoding is maximum posterior at the
    stop node.

    eps defaults to horizon**-3.
    """
    if not law.is_message_form:
        raise SchemaError("residual terms need a message-form law")
    if not first.dominates(last):
        raise SchemaError("the first rule must stop no later than the last")
    n = law.horizon
    if eps is None:
        eps = float(n) ** -3
    logm = math.log2(law.messages)
    flags: list[str] = []

    pe = 0.0
    et = 0.0
    for path, p in law.node_prob[n].items():
        t = last.stop_time(path)
        et += p * t
    # group stop-node mass once for the error probability
    stop_mass: dict[tuple[int, ...], float] = {}
    for path, p in law.node_prob[n].items():
        node = path[: last.stop_time(path)]
        stop_mass[node] = stop_mass.get(node, 0.0) + p
    for node, p in stop_mass.items():
        mu = law.w_post[len(node)][node]
        pe += p * (1.0 - float(mu.max()))
    pe = max(pe, 0.0)

    et1 = expected_stop_time(law, first)
    i_rate = directed_mi_stopped(law, first) / et1
    den = et - et1
    d_rate = directed_kl_stopped(law, first, last) / den if den > 1e-12 else math.nan
    if den <= 1e-12:
        flags.append("empty_divergence_phase")
    rate = logm / et

    fano = binary_entropy(min(max(pe, 0.0), 1.0)) + pe * logm
    if i_rate <= 0 or not math.isfinite(d_rate) or d_rate <= 0:
        flags.append("degenerate_phase_rates")
        u = math.nan
        v = math.nan
        delta = math.nan
        assembled = math.nan
    else:
        u = rate * (
            (fano + eps) / (i_rate * logm)
            + (-math.log2(eps)) / (d_rate * logm)
            + 1.0 / (lam * d_rate * logm)
        )
        if pe <= 0.0:
            delta = 0.0
            flags.append("zero_error_probability")
        else:
            neg_log_pe = -math.log2(pe)
            delta = math.log2(neg_log_pe + 2.0 + logm) / neg_log_pe
        v = (rate / i_rate) * math.sqrt(eps) * n + math.sqrt(eps) * n / (et * i_rate)
        if delta >= 1.0:
            flags.append("delta_at_least_one")
            assembled = math.inf
        else:
            assembled = d_rate / (1.0 - delta) * (1.0 - rate / i_rate + u + v)
    return ResidualTerms(
        messages=law.messages,
        horizon=n,
        pe=pe,
        et=et,
        et1=et1,
        rate=rate,
        i_rate=i_rate,
        d_rate=d_rate,
        eps=eps,
        lam=lam,
        fano_ceiling=fano,
        u_term=u,
        delta_term=delta,
        v_term=v,
        assembled=assembled,
        flags=tuple(flags),
    )
