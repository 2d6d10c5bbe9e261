"""Finite channels with stochastic state, input policies, stopping rules,
and exact joint-law enumeration.

A channel instance is a pair (ChannelSpec, StateKernel): the spec holds the
per-state transition matrix Q[s][x][y] = P(y | x, s), the kernel describes how
the state sequence evolves given past states and past inputs.  Together with
an input policy (either behavioral rows P(x_t | x-history, y-history) or a
message-form deterministic encoder) they induce a unique joint distribution
over (message, input, state, output) trajectories up to a finite horizon.
``forward_joint`` materializes that law exactly by enumerating every positive
probability trajectory, which is the verification strategy used throughout:
all downstream quantities (posteriors, entropy processes, drift terms) are
exact sums over this enumeration.

Histories are tuples of integer symbols; per-level tables are plain dicts
keyed by those tuples (a sparse fixed-arity tree).  Budgets cap enumeration
size rather than a hard horizon constant.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "FboundError",
    "SchemaError",
    "DistributionError",
    "BudgetExceededError",
    "MessageStructureError",
    "LogRatioUnboundedError",
    "VALIDATION_TOL",
    "ROW_SUM_INVARIANT_TOL",
    "DEFAULT_TRAJECTORY_BUDGET",
    "ChannelSpec",
    "StateKernel",
    "Channel",
    "parse_channel",
    "serialize_channel",
    "load_channel",
    "dump_channel",
    "bsc",
    "z_channel",
    "uniform_channel",
    "perfect_binary_channel",
    "two_state_flip_channel",
    "InputPolicy",
    "repetition_encoder",
    "rotating_encoder",
    "uniform_behavioral_policy",
    "StoppingRule",
    "enumerate_stopping_rules",
    "JointLaw",
    "forward_joint",
    "PosteriorTables",
    "posteriors",
    "average_channel",
]

# Hard error threshold for user-supplied distributions.
VALIDATION_TOL = 1e-9
# Stored rows are kept at least this close to 1; parse renormalizes past it.
ROW_SUM_INVARIANT_TOL = 1e-12
DEFAULT_TRAJECTORY_BUDGET = 10**7


class FboundError(Exception):
    """Base class for all library errors."""


class SchemaError(FboundError):
    """Malformed channel / scheme file or inconsistent dimensions."""


class DistributionError(FboundError):
    """A vector that must be a probability distribution is not one."""


class BudgetExceededError(FboundError):
    """Exact enumeration would exceed the configured trajectory budget."""


class MessageStructureError(FboundError):
    """An operation requiring message structure got a behavioral-only law."""


class LogRatioUnboundedError(FboundError):
    """The log-ratio step bound needs a strictly positive channel."""


def _check_distribution(vec: np.ndarray, what: str) -> None:
    if np.any(vec < 0):
        raise DistributionError(f"{what} has a negative entry")
    s = float(vec.sum())
    if abs(s - 1.0) > VALIDATION_TOL:
        raise DistributionError(f"{what} sums to {s!r}, not 1 within {VALIDATION_TOL}")


def _canonicalize_rows(arr: np.ndarray) -> np.ndarray:
    """Renormalize rows along the last axis when they miss 1 by more than
    the storage invariant (but less than the validation tolerance)."""
    out = np.array(arr, dtype=float)
    flat = out.reshape(-1, out.shape[-1])
    for i in range(flat.shape[0]):
        s = float(flat[i].sum())
        if abs(s - 1.0) > ROW_SUM_INVARIANT_TOL:
            flat[i] = flat[i] / s
    return flat.reshape(out.shape)


# ---------------------------------------------------------------------------
# channel spec and state kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelSpec:
    """Per-state channel law Q[s, x, y] = P(Y=y | X=x, S=s).

    The array has shape (s_size, x_size, y_size); every (s, x) row is a
    probability distribution over y.
    """

    x_size: int
    y_size: int
    s_size: int
    q: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.s_size, self.x_size, self.y_size):
            raise SchemaError(
                f"Q shape {q.shape} does not match (s_size, x_size, y_size)="
                f"({self.s_size}, {self.x_size}, {self.y_size})"
            )
        for s in range(self.s_size):
            for x in range(self.x_size):
                _check_distribution(q[s, x], f"Q row (s={s}, x={x})")
        object.__setattr__(self, "q", q)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.q > 0.0))

    def is_dmc(self) -> bool:
        return self.s_size == 1

    def row(self, x: int, s: int) -> np.ndarray:
        return self.q[s, x]

    def rows(self) -> list[np.ndarray]:
        """All (x, s) rows, x-major then s."""
        return [self.q[s, x] for x in range(self.x_size) for s in range(self.s_size)]


@dataclass(frozen=True)
class StateKernel:
    """State evolution P(s_t | s-history, x-history).

    variant "memoryless": states are i.i.d. with distribution ``table``
    (shape (s_size,)).
    variant "markov1": first state from ``init`` (shape (s_size,)), then
    ``table[s_prev, x_prev, s_next]`` (shape (s, x, s)).
    variant "history_table": ``levels[t-1][s_hist][x_hist]`` is the
    distribution of s_t given the full histories, histories indexed in
    lexicographic (symbol-major) order; level t has shape
    (s_size**(t-1), x_size**(t-1), s_size).
    """

    variant: str
    s_size: int
    x_size: int
    table: np.ndarray | None = None
    init: np.ndarray | None = None
    levels: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        if self.variant == "memoryless":
            t = np.asarray(self.table, dtype=float)
            if t.shape != (self.s_size,):
                raise SchemaError("memoryless kernel table must have shape (s_size,)")
            _check_distribution(t, "state distribution")
            object.__setattr__(self, "table", t)
        elif self.variant == "markov1":
            t = np.asarray(self.table, dtype=float)
            if t.shape != (self.s_size, self.x_size, self.s_size):
                raise SchemaError(
                    "markov1 kernel table must have shape (s_size, x_size, s_size)"
                )
            init = np.asarray(
                self.init if self.init is not None else np.full(self.s_size, 1.0 / self.s_size),
                dtype=float,
            )
            if init.shape != (self.s_size,):
                raise SchemaError("markov1 init must have shape (s_size,)")
            _check_distribution(init, "initial state distribution")
            for s in range(self.s_size):
                for x in range(self.x_size):
                    _check_distribution(t[s, x], f"state transition row (s={s}, x={x})")
            object.__setattr__(self, "table", t)
            object.__setattr__(self, "init", init)
        elif self.variant == "history_table":
            lv = tuple(np.asarray(a, dtype=float) for a in self.levels)
            for i, a in enumerate(lv):
                t = i + 1
                want = (self.s_size ** (t - 1), self.x_size ** (t - 1), self.s_size)
                if a.shape != want:
                    raise SchemaError(f"history_table level {t} must have shape {want}")
                for rowidx in np.ndindex(a.shape[0], a.shape[1]):
                    _check_distribution(a[rowidx], f"state row t={t}, hist={rowidx}")
            object.__setattr__(self, "levels", lv)
        else:
            raise SchemaError(f"unknown state kernel variant {self.variant!r}")

    def horizon_cap(self) -> int | None:
        """Largest t this kernel can drive, None when unbounded."""
        if self.variant == "history_table":
            return len(self.levels)
        return None

    def distribution(
        self, t: int, s_hist: tuple[int, ...], x_hist: tuple[int, ...]
    ) -> np.ndarray:
        """P(s_t | s^{t-1}, x^{t-1}) with 1-based t; histories have length t-1."""
        if self.variant == "memoryless":
            return self.table
        if self.variant == "markov1":
            if t == 1:
                return self.init
            return self.table[s_hist[-1], x_hist[-1]]
        if t > len(self.levels):
            raise SchemaError(f"history_table kernel has no level for t={t}")
        si = _hist_index(s_hist, self.s_size)
        xi = _hist_index(x_hist, self.x_size)
        return self.levels[t - 1][si, xi]


def _hist_index(hist: Sequence[int], arity: int) -> int:
    i = 0
    for sym in hist:
        i = i * arity + sym
    return i


@dataclass(frozen=True)
class Channel:
    """A parsed channel file: spec + kernel + optional name."""

    spec: ChannelSpec
    kernel: StateKernel

    @property
    def name(self) -> str:
        return self.spec.name


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


def parse_channel(text: str) -> Channel:
    """Parse the JSON channel format.

    Required fields: x_size, y_size, s_size, Q (s-major 3-D array of rows
    Q[s][x][y]), state_kernel {type, table, [init]}.  Optional: name.
    Rows may miss 1 by at most 1e-9 and are renormalized to the storage
    invariant; worse violations and negative entries are errors.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"channel file is not valid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise SchemaError("channel file must be a JSON object")
    try:
        x_size = int(obj["x_size"])
        y_size = int(obj["y_size"])
        s_size = int(obj["s_size"])
        q_raw = obj["Q"]
        sk_raw = obj["state_kernel"]
    except KeyError as e:
        raise SchemaError(f"channel file missing required field {e.args[0]!r}") from e
    if min(x_size, y_size, s_size) < 1:
        raise SchemaError("alphabet sizes must be positive")
    name = str(obj.get("name", ""))
    q = np.asarray(q_raw, dtype=float)
    if q.shape != (s_size, x_size, y_size):
        raise SchemaError(
            f"Q shape {q.shape} does not match declared sizes "
            f"({s_size}, {x_size}, {y_size})"
        )
    if np.any(q < 0):
        raise SchemaError("Q has a negative entry")
    sums = q.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > VALIDATION_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise SchemaError(f"Q row sums deviate from 1 by {worst:.3e} (> {VALIDATION_TOL})")
    q = _canonicalize_rows(q)
    spec = ChannelSpec(x_size=x_size, y_size=y_size, s_size=s_size, q=q, name=name)

    if not isinstance(sk_raw, dict) or "type" not in sk_raw:
        raise SchemaError("state_kernel must be an object with a 'type' field")
    variant = sk_raw["type"]
    if variant == "memoryless":
        table = _canonicalize_rows(np.asarray(sk_raw.get("table"), dtype=float))
        kernel = StateKernel(variant="memoryless", s_size=s_size, x_size=x_size, table=table)
    elif variant == "markov1":
        table = np.asarray(sk_raw.get("table"), dtype=float)
        # 2-D (s, s) tables are accepted as input-independent shorthand.
        if table.ndim == 2:
            if table.shape != (s_size, s_size):
                raise SchemaError("markov1 2-D table must have shape (s_size, s_size)")
            table = np.repeat(table[:, None, :], x_size, axis=1)
        table = _canonicalize_rows(table)
        init_raw = sk_raw.get("init")
        init = None if init_raw is None else _canonicalize_rows(np.asarray(init_raw, dtype=float))
        kernel = StateKernel(
            variant="markov1", s_size=s_size, x_size=x_size, table=table, init=init
        )
    elif variant == "history_table":
        levels = tuple(
            _canonicalize_rows(np.asarray(a, dtype=float)) for a in sk_raw.get("table", [])
        )
        kernel = StateKernel(variant="history_table", s_size=s_size, x_size=x_size, levels=levels)
    else:
        raise SchemaError(f"unknown state kernel type {variant!r}")
    return Channel(spec=spec, kernel=kernel)


def serialize_channel(ch: Channel) -> str:
    """Canonical text for a channel; parse(serialize(ch)) round-trips
    bit-identically for canonically formatted input."""
    sk: dict[str, object] = {"type": ch.kernel.variant}
    if ch.kernel.variant == "memoryless":
        sk["table"] = ch.kernel.table.tolist()
    elif ch.kernel.variant == "markov1":
        sk["table"] = ch.kernel.table.tolist()
        sk["init"] = ch.kernel.init.tolist()
    else:
        sk["table"] = [a.tolist() for a in ch.kernel.levels]
    obj = {
        "name": ch.spec.name,
        "x_size": ch.spec.x_size,
        "y_size": ch.spec.y_size,
        "s_size": ch.spec.s_size,
        "Q": ch.spec.q.tolist(),
        "state_kernel": sk,
    }
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def load_channel(path: str) -> Channel:
    with open(path, "r", encoding="utf-8") as f:
        return parse_channel(f.read())


def dump_channel(ch: Channel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_channel(ch))


def _memoryless_kernel(x_size: int) -> StateKernel:
    return StateKernel(variant="memoryless", s_size=1, x_size=x_size, table=np.array([1.0]))


def bsc(p: float, name: str = "") -> Channel:
    """Binary symmetric channel with crossover p (single state)."""
    q = np.array([[[1 - p, p], [p, 1 - p]]], dtype=float)
    spec = ChannelSpec(2, 2, 1, q, name=name or f"bsc({p})")
    return Channel(spec, _memoryless_kernel(2))


def z_channel(p: float, name: str = "") -> Channel:
    """Binary channel where only input 1 is noisy: 1 -> 0 with probability p."""
    q = np.array([[[1.0, 0.0], [p, 1 - p]]], dtype=float)
    spec = ChannelSpec(2, 2, 1, q, name=name or f"z({p})")
    return Channel(spec, _memoryless_kernel(2))


def uniform_channel(x_size: int = 2, y_size: int = 2) -> Channel:
    """Output independent of input; capacity is exactly zero."""
    q = np.full((1, x_size, y_size), 1.0 / y_size)
    spec = ChannelSpec(x_size, y_size, 1, q, name="uniform")
    return Channel(spec, _memoryless_kernel(x_size))


def perfect_binary_channel() -> Channel:
    q = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    spec = ChannelSpec(2, 2, 1, q, name="perfect")
    return Channel(spec, _memoryless_kernel(2))


def two_state_flip_channel(
    p: float = 0.1,
    stay: float = 0.8,
    init: tuple[float, float] = (0.7, 0.3),
    name: str = "flip2",
) -> Channel:
    """Two-state channel: state 0 behaves like bsc(p), state 1 inverts the
    input before the same noise.  The state is a sticky two-state Markov
    chain, independent of the inputs."""
    row = np.array([1 - p, p])
    q = np.array([[row, row[::-1]], [row[::-1], row]])
    spec = ChannelSpec(2, 2, 2, q, name=name)
    trans = np.array([[stay, 1 - stay], [1 - stay, stay]])
    kernel = StateKernel(
        variant="markov1",
        s_size=2,
        x_size=2,
        table=np.repeat(trans[:, None, :], 2, axis=1),
        init=np.asarray(init, dtype=float),
    )
    return Channel(spec, kernel)


# ---------------------------------------------------------------------------
# input policies
# ---------------------------------------------------------------------------


EncoderFn = Callable[[int, int, tuple[int, ...]], int]


@dataclass(frozen=True)
class InputPolicy:
    """Either a behavioral policy or a message-form deterministic encoder.

    Behavioral form: ``rows[(t, x_hist, y_hist)]`` is the distribution of
    X_t given the two histories (tuples of length t-1).  Message form:
    ``encoder(t, w, y_hist)`` gives the input for message w at time t; the
    message is uniform on range(messages).
    """

    horizon: int
    x_size: int
    y_size: int
    messages: int | None = None
    encoder: EncoderFn | None = None
    rows: Mapping[tuple[int, tuple[int, ...], tuple[int, ...]], tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        if (self.messages is None) == (self.rows is None):
            raise SchemaError("policy must be exactly one of message-form or behavioral")
        if self.messages is not None:
            if self.messages < 1:
                raise SchemaError("message count must be >= 1")
            if self.encoder is None:
                raise SchemaError("message-form policy needs an encoder")
        else:
            for key, row in self.rows.items():
                arr = np.asarray(row, dtype=float)
                if arr.shape != (self.x_size,):
                    raise SchemaError(f"behavioral row {key} has wrong arity")
                _check_distribution(arr, f"behavioral row {key}")

    @property
    def is_message_form(self) -> bool:
        return self.messages is not None

    def input_distribution(
        self, t: int, x_hist: tuple[int, ...], y_hist: tuple[int, ...]
    ) -> np.ndarray:
        if self.is_message_form:
            raise MessageStructureError(
                "message-form policy rows are per message; use induced_behavioral"
            )
        try:
            return np.asarray(self.rows[(t, x_hist, y_hist)], dtype=float)
        except KeyError as e:
            raise SchemaError(f"behavioral policy lacks row (t={t}, {x_hist}, {y_hist})") from e

    def induced_behavioral(self, ch: Channel, budget: int = DEFAULT_TRAJECTORY_BUDGET) -> "InputPolicy":
        """Behavioral rows P(x_t | x^{t-1}, y^{t-1}) obtained by averaging the
        encoder over the message posterior; defined on reachable histories."""
        law = forward_joint(ch, self, self.horizon, budget=budget)
        acc: dict[tuple[int, tuple[int, ...], tuple[int, ...]], np.ndarray] = {}
        for (w, xs, ss, ys), p in law.trajectories.items():
            for t in range(1, self.horizon + 1):
                key = (t, xs[: t - 1], ys[: t - 1])
                vec = acc.setdefault(key, np.zeros(self.x_size))
                vec[xs[t - 1]] += p
        rows = {}
        for key, vec in acc.items():
            tot = vec.sum()
            if tot > 0:
                rows[key] = tuple(vec / tot)
        return InputPolicy(
            horizon=self.horizon, x_size=self.x_size, y_size=self.y_size, rows=rows
        )


def repetition_encoder(m: int, x_size: int, horizon: int, y_size: int = 2) -> InputPolicy:
    """Each message is sent as its own symbol, repeated every step.
    Requires m <= x_size."""
    if m > x_size:
        raise SchemaError("repetition needs at least as many inputs as messages")

    def enc(t: int, w: int, y_hist: tuple[int, ...]) -> int:
        return w

    return InputPolicy(horizon=horizon, x_size=x_size, y_size=y_size, messages=m, encoder=enc)


def rotating_encoder(m: int, x_size: int, horizon: int, y_size: int = 2) -> InputPolicy:
    """History-independent encoder cycling through the base-|X| digits of the
    message, so successive steps partition the message set along different
    digits.  For m = x_size**k this keeps the input distribution uniform for
    the first k steps under a uniform prior."""
    digits = max(1, math.ceil(math.log(max(m, 2), x_size)))

    def enc(t: int, w: int, y_hist: tuple[int, ...]) -> int:
        d = (t - 1) % digits
        return (w // x_size**d) % x_size

    return InputPolicy(horizon=horizon, x_size=x_size, y_size=y_size, messages=m, encoder=enc)


def uniform_behavioral_policy(ch: Channel, horizon: int) -> InputPolicy:
    """Uniform i.i.d. inputs on every reachable history."""
    rows = {}
    row = tuple(np.full(ch.spec.x_size, 1.0 / ch.spec.x_size))
    for t in range(1, horizon + 1):
        for xh in itertools.product(range(ch.spec.x_size), repeat=t - 1):
            for yh in itertools.product(range(ch.spec.y_size), repeat=t - 1):
                rows[(t, xh, yh)] = row
    return InputPolicy(
        horizon=horizon, x_size=ch.spec.x_size, y_size=ch.spec.y_size, rows=rows
    )


# ---------------------------------------------------------------------------
# stopping rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StoppingRule:
    """A stopping time on the output filtration, given by the prefix-minimal
    set of output histories at which it stops.

    Invariants enforced at construction: no stopped history is a proper
    prefix of another, every history has length in 1..horizon, and every
    length-``horizon`` history without a stopped prefix is itself stopped
    (the rule always stops by the horizon).
    """

    horizon: int
    y_size: int
    stops: frozenset[tuple[int, ...]]

    def __post_init__(self) -> None:
        stops = frozenset(tuple(s) for s in self.stops)
        object.__setattr__(self, "stops", stops)
        for node in stops:
            if not 1 <= len(node) <= self.horizon:
                raise SchemaError(f"stop node {node} outside 1..{self.horizon}")
            for k in range(1, len(node)):
                if node[:k] in stops:
                    raise SchemaError(f"stop set is not prefix-minimal at {node}")
        # exhaustiveness at the horizon
        for leaf in itertools.product(range(self.y_size), repeat=self.horizon):
            if not any(leaf[:k] in stops for k in range(1, self.horizon + 1)):
                raise SchemaError(f"rule never stops along {leaf}")

    @classmethod
    def fixed(cls, t: int, horizon: int, y_size: int) -> "StoppingRule":
        """Deterministic T identically equal to t."""
        if not 1 <= t <= horizon:
            raise SchemaError("fixed stopping time must lie in 1..horizon")
        stops = frozenset(itertools.product(range(y_size), repeat=t))
        return cls(horizon=horizon, y_size=y_size, stops=stops)

    def stop_time(self, path: Sequence[int]) -> int:
        """Length of the unique stopped prefix of a full-horizon path."""
        tup = tuple(path)
        for k in range(1, len(tup) + 1):
            if tup[:k] in self.stops:
                return k
        raise SchemaError(f"path {tup} has no stopped prefix")

    def is_stopped(self, hist: Sequence[int]) -> bool:
        tup = tuple(hist)
        return any(tup[:k] in self.stops for k in range(1, len(tup) + 1))

    def continue_histories(self, t: int) -> Iterator[tuple[int, ...]]:
        """All histories of length t-1 at which symbol t is still sent."""
        for hist in itertools.product(range(self.y_size), repeat=t - 1):
            if not self.is_stopped(hist):
                yield hist

    def dominates(self, other: "StoppingRule") -> bool:
        """True when this rule stops no later than ``other`` on every path."""
        for leaf in itertools.product(range(self.y_size), repeat=self.horizon):
            if self.stop_time(leaf) > other.stop_time(leaf):
                return False
        return True


def enumerate_stopping_rules(
    horizon: int, y_size: int, cap: int = 10**5
) -> list[StoppingRule]:
    """All prefix-minimal bounded stopping rules up to the horizon.

    Raises BudgetExceededError when the count would exceed ``cap``; callers
    fall back to the fixed-T family in that case.
    """

    def node_options(depth: int) -> list[frozenset[tuple[int, ...]]]:
        # options for the subtree hanging below a node at this depth, each a
        # set of stop nodes given as suffixes
        if depth == horizon:
            return [frozenset([()])]
        out = [frozenset([()])]
        child_opts = node_options(depth + 1)
        for combo in itertools.product(child_opts, repeat=y_size):
            merged = frozenset(
                (sym,) + suffix for sym, opt in enumerate(combo) for suffix in opt
            )
            out.append(merged)
            if len(out) > cap:
                raise BudgetExceededError(
                    f"stopping-rule count exceeds cap {cap} at horizon {horizon}"
                )
        return out

    rules = []
    # the root itself cannot stop (T >= 1), so expand the first symbol level
    child_opts = node_options(1)
    for combo in itertools.product(child_opts, repeat=y_size):
        stops = frozenset(
            (sym,) + suffix for sym, opt in enumerate(combo) for suffix in opt
        )
        rules.append(StoppingRule(horizon=horizon, y_size=y_size, stops=stops))
        if len(rules) > cap:
            raise BudgetExceededError(
                f"stopping-rule count exceeds cap {cap} at horizon {horizon}"
            )
    return rules


# ---------------------------------------------------------------------------
# joint law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JointLaw:
    """Exact joint law of (W, X^N, S^N, Y^N) as a sparse trajectory table
    together with per-output-history summaries.

    ``trajectories`` maps (w, x-tuple, s-tuple, y-tuple) to its probability;
    behavioral laws use w = 0 throughout.  The level tables are keyed by
    output histories:

    - node_prob[t][y^t]: P(Y^t = y^t), t = 0..N
    - w_post[t][y^t]: posterior over messages (array of length M)
    - xy_node[t][y^{t-1}]: joint P(X_t, Y_t | y^{t-1}), t = 1..N
    - wy_node[t][y^{t-1}]: joint P(W, Y_t | y^{t-1}), t = 1..N
    """

    channel: Channel
    policy: InputPolicy
    horizon: int
    messages: int
    trajectories: dict[tuple[int, tuple[int, ...], tuple[int, ...], tuple[int, ...]], float]
    node_prob: tuple[dict[tuple[int, ...], float], ...] = field(repr=False, default=())
    w_post: tuple[dict[tuple[int, ...], np.ndarray], ...] = field(repr=False, default=())
    xy_node: tuple[dict[tuple[int, ...], np.ndarray], ...] = field(repr=False, default=())
    wy_node: tuple[dict[tuple[int, ...], np.ndarray], ...] = field(repr=False, default=())

    @property
    def is_message_form(self) -> bool:
        return self.policy.is_message_form

    def output_paths(self) -> dict[tuple[int, ...], float]:
        """P(y^N) over full-length output paths."""
        return dict(self.node_prob[self.horizon])

    def total_mass(self) -> float:
        return sum(self.trajectories.values())


def _build_level_tables(
    trajectories, horizon: int, m: int, x_size: int, y_size: int
):
    node_prob = tuple({} for _ in range(horizon + 1))
    w_mass = tuple({} for _ in range(horizon + 1))
    xy_mass = tuple({} for _ in range(horizon + 1))  # index t in 1..N
    wy_mass = tuple({} for _ in range(horizon + 1))
    for (w, xs, ss, ys), p in trajectories.items():
        for t in range(horizon + 1):
            node = ys[:t]
            node_prob[t][node] = node_prob[t].get(node, 0.0) + p
            vec = w_mass[t].get(node)
            if vec is None:
                vec = np.zeros(m)
                w_mass[t][node] = vec
            vec[w] += p
            if t >= 1:
                prev = ys[: t - 1]
                xy = xy_mass[t].get(prev)
                if xy is None:
                    xy = np.zeros((x_size, y_size))
                    xy_mass[t][prev] = xy
                xy[xs[t - 1], ys[t - 1]] += p
                wy = wy_mass[t].get(prev)
                if wy is None:
                    wy = np.zeros((m, y_size))
                    wy_mass[t][prev] = wy
                wy[w, ys[t - 1]] += p
    w_post = tuple({} for _ in range(horizon + 1))
    for t in range(horizon + 1):
        for node, vec in w_mass[t].items():
            w_post[t][node] = vec / node_prob[t][node]
    xy_node = tuple({} for _ in range(horizon + 1))
    wy_node = tuple({} for _ in range(horizon + 1))
    for t in range(1, horizon + 1):
        for prev, xy in xy_mass[t].items():
            xy_node[t][prev] = xy / node_prob[t - 1][prev]
        for prev, wy in wy_mass[t].items():
            wy_node[t][prev] = wy / node_prob[t - 1][prev]
    return node_prob, w_post, xy_node, wy_node


def forward_joint(
    ch: Channel,
    policy: InputPolicy,
    horizon: int,
    budget: int = DEFAULT_TRAJECTORY_BUDGET,
) -> JointLaw:
    """Enumerate the exact joint law over all positive-probability
    trajectories of length ``horizon``.

    The trajectory probability is the product, over steps, of the policy
    factor, the state-kernel factor, and the channel factor; zero branches
    are pruned.  Raises BudgetExceededError when the live trajectory count
    would exceed ``budget`` and SchemaError when the kernel cannot drive the
    requested horizon.
    """
    spec, kernel = ch.spec, ch.kernel
    cap = kernel.horizon_cap()
    if cap is not None and horizon > cap:
        raise SchemaError(f"state kernel only defines {cap} steps, horizon={horizon}")
    if policy.horizon < horizon:
        raise SchemaError("policy horizon shorter than requested law horizon")
    if policy.x_size != spec.x_size or policy.y_size != spec.y_size:
        raise SchemaError("policy alphabet sizes do not match the channel")
    m = policy.messages if policy.is_message_form else 1
    trajectories: dict = {}
    count = 0

    def expand(w, t, x_hist, s_hist, y_hist, p):
        nonlocal count
        if t > horizon:
            trajectories[(w, x_hist, s_hist, y_hist)] = p
            count += 1
            if count > budget:
                raise BudgetExceededError(
                    f"trajectory count exceeds budget {budget} at horizon {horizon}"
                )
            return
        if policy.is_message_form:
            x_choices = [(policy.encoder(t, w, y_hist), 1.0)]
        else:
            row = policy.input_distribution(t, x_hist, y_hist)
            x_choices = [(x, float(row[x])) for x in range(spec.x_size) if row[x] > 0.0]
        s_row = kernel.distribution(t, s_hist, x_hist)
        for x, px in x_choices:
            for s in range(spec.s_size):
                ps = float(s_row[s])
                if ps == 0.0:
                    continue
                q_row = spec.q[s, x]
                for y in range(spec.y_size):
                    py = float(q_row[y])
                    if py == 0.0:
                        continue
                    expand(
                        w,
                        t + 1,
                        x_hist + (x,),
                        s_hist + (s,),
                        y_hist + (y,),
                        p * px * ps * py,
                    )

    for w in range(m):
        expand(w, 1, (), (), (), 1.0 / m)

    node_prob, w_post, xy_node, wy_node = _build_level_tables(
        trajectories, horizon, m, spec.x_size, spec.y_size
    )
    return JointLaw(
        channel=ch,
        policy=policy,
        horizon=horizon,
        messages=m,
        trajectories=trajectories,
        node_prob=node_prob,
        w_post=w_post,
        xy_node=xy_node,
        wy_node=wy_node,
    )


# ---------------------------------------------------------------------------
# posteriors and the averaged channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorTables:
    """Message posteriors along output histories for a message-form law.

    - prior[t][y^t]: posterior over messages after y^t (t = 0..N)
    - step[t][y^{t-1}][w]: per-message output law P(Y_t | W=w, y^{t-1})
      as an array (M, y_size); rows for zero-posterior messages are NaN.
    """

    horizon: int
    messages: int
    prior: tuple[dict[tuple[int, ...], np.ndarray], ...]
    step: tuple[dict[tuple[int, ...], np.ndarray], ...]

    def map_message(self, t: int, node: tuple[int, ...]) -> int:
        """Most likely message after y^t; ties resolve to the lowest index."""
        return int(np.argmax(self.prior[t][node]))


def posteriors(law: JointLaw) -> PosteriorTables:
    """Exact message posteriors and one-step predictive laws.

    Raises MessageStructureError on behavioral laws (no message to infer).
    """
    if not law.is_message_form:
        raise MessageStructureError("posteriors need a message-form law")
    step = tuple({} for _ in range(law.horizon + 1))
    for t in range(1, law.horizon + 1):
        for prev, wy in law.wy_node[t].items():
            mu = law.w_post[t - 1][prev]
            rows = np.full_like(wy, np.nan)
            pos = mu > 0.0
            rows[pos] = wy[pos] / mu[pos, None]
            step[t][prev] = rows
    return PosteriorTables(
        horizon=law.horizon,
        messages=law.messages,
        prior=law.w_post,
        step=step,
    )


def average_channel(law: JointLaw, t: int) -> dict[tuple[int, ...], np.ndarray]:
    """Effective one-step channel P(Y_t | X_t = x, y^{t-1}) per realizable
    history.

    Returns, per history, an (x_size, y_size) array whose row x is the
    conditional output law; rows for inputs of conditional probability zero
    are NaN (absent, never fabricated).
    """
    if not 1 <= t <= law.horizon:
        raise SchemaError(f"step {t} outside 1..{law.horizon}")
    out = {}
    for prev, xy in law.xy_node[t].items():
        nu = xy.sum(axis=1)
        rows = np.full_like(xy, np.nan)
        pos = nu > 0.0
        rows[pos] = xy[pos] / nu[pos, None]
        out[prev] = rows
    return out
