"""Variable-length feedback coding simulator: send-and-confirm schemes with
block repeats, Monte Carlo and exact evaluation.

A scheme runs in blocks of n1 data uses plus n2 confirm uses.  The receiver
decodes the data block by maximum metric (ties to the lowest message), the
transmitter — which sees the outputs over the feedback link — sends the
"ack" symbol when the decode is right and the "nack" symbol otherwise, and
the receiver accepts when the confirm log-likelihood ratio clears the
threshold.  Rejected blocks repeat with the same message, up to ``cap``
blocks; the final block's tentative decision is forced.

Randomness convention (load-bearing for reproducibility): trial ``t`` of a
run with seed ``s`` draws everything from ``Philox(key=[s, t])`` as one flat
uniform vector ``d = rng.random(1 + 2*N)`` with ``N = cap*(n1+n2)``:
``d[0]`` picks the message, ``d[1:N+1]`` drive the state draws position by
position, ``d[N+1:]`` drive the output draws.  Because trials are keyed
individually, splitting a run across workers cannot change any result; the
vectorized single-state fast path and the generic per-trial path consume the
same positions and therefore agree bit for bit.

Decoding on channels with states uses the entry-wise state-averaged matrix
under the initial state law as a (mismatched) memoryless metric; on a
single-state channel this is exact maximum likelihood.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as _beta_dist

from .channel_model import BudgetExceededError, Channel, SchemaError
from .info_measures import kl

__all__ = [
    "SchemeSpec",
    "RunStats",
    "ExactStats",
    "build_yamamoto_itoh",
    "build_repetition_confirm",
    "parse_scheme",
    "serialize_scheme",
    "load_scheme",
    "dump_scheme",
    "simulate",
    "exact_stats",
    "exponent_sweep",
    "CSV_COLUMNS",
]

SCHEME_VARIANTS = ("yamamoto_itoh", "repetition_confirm", "user_table")
EXACT_BUDGET = 10**6
CSV_COLUMNS = (
    "M", "n1", "n2", "cap", "trials",
    "Pe", "Pe_lo", "Pe_hi", "ET", "R", "E", "E_lo", "E_hi",
)


@dataclass(frozen=True)
class SchemeSpec:
    """A send-and-confirm scheme: data codebook plus confirm symbol pair."""

    variant: str
    m: int
    n1: int
    n2: int
    cap: int
    x_size: int
    codebook: tuple[tuple[int, ...], ...]
    confirm: tuple[int, int]
    threshold: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.variant not in SCHEME_VARIANTS:
            raise SchemaError(f"unknown scheme variant {self.variant!r}")
        if self.m < 2:
            raise SchemaError("need at least two messages")
        if min(self.n1, self.n2, self.cap) < 1:
            raise SchemaError("n1, n2 and cap must be positive")
        if len(self.codebook) != self.m:
            raise SchemaError("codebook must have one row per message")
        seen = set()
        for row in self.codebook:
            if len(row) != self.n1:
                raise SchemaError("codeword length must equal n1")
            if not all(0 <= x < self.x_size for x in row):
                raise SchemaError("codeword symbol out of range")
            if row in seen:
                raise SchemaError("codewords must be distinct")
            seen.add(row)
        xa, xn = self.confirm
        if xa == xn or not (0 <= xa < self.x_size and 0 <= xn < self.x_size):
            raise SchemaError("confirm pair must be two distinct valid symbols")

    @property
    def block_len(self) -> int:
        return self.n1 + self.n2

    @property
    def max_uses(self) -> int:
        return self.cap * self.block_len


def serialize_scheme(scheme: SchemeSpec) -> str:
    payload = {
        "variant": scheme.variant,
        "name": scheme.name,
        "m": scheme.m,
        "n1": scheme.n1,
        "n2": scheme.n2,
        "cap": scheme.cap,
        "x_size": scheme.x_size,
        "threshold": scheme.threshold,
        "codebook": [list(row) for row in scheme.codebook],
        "confirm": list(scheme.confirm),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def parse_scheme(text: str) -> SchemeSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"scheme file is not valid JSON: {e}") from e
    try:
        return SchemeSpec(
            variant=payload["variant"],
            name=payload.get("name", ""),
            m=int(payload["m"]),
            n1=int(payload["n1"]),
            n2=int(payload["n2"]),
            cap=int(payload["cap"]),
            x_size=int(payload["x_size"]),
            threshold=float(payload.get("threshold", 0.0)),
            codebook=tuple(tuple(int(x) for x in row) for row in payload["codebook"]),
            confirm=tuple(int(x) for x in payload["confirm"]),
        )
    except KeyError as e:
        raise SchemaError(f"scheme file missing field {e}") from e


def load_scheme(path) -> SchemeSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scheme(fh.read())


def dump_scheme(scheme: SchemeSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scheme(scheme))


def _metric_matrix(ch: Channel) -> np.ndarray:
    """State-averaged single-letter matrix under the initial state law."""
    init = ch.kernel.distribution(1, (), ())
    return np.einsum("s,sxy->xy", init, ch.spec.q)


def _confirm_pair(qbar: np.ndarray) -> tuple[int, int]:
    best, pair = -1.0, (0, 1)
    x_size = qbar.shape[0]
    for a in range(x_size):
        for b in range(x_size):
            if a == b:
                continue
            v = kl(qbar[a], qbar[b])
            if v > best:
                best, pair = v, (a, b)
    return pair


def build_yamamoto_itoh(
    ch: Channel,
    m: int,
    n1: int,
    n2: int,
    cap: int,
    seed: int = 0,
    threshold: float = 0.0,
    name: str = "",
) -> SchemeSpec:
    """Random distinct data codebook (seeded) + the most distinguishable
    confirm pair (largest one-way divergence, ties to the lowest indices)."""
    x_size = ch.spec.x_size
    if x_size**n1 < m:
        raise SchemaError("codeword space too small for m distinct rows")
    rng = np.random.default_rng(seed)
    rows: list[tuple[int, ...]] = []
    seen = set()
    while len(rows) < m:
        row = tuple(int(v) for v in rng.integers(0, x_size, size=n1))
        if row not in seen:
            seen.add(row)
            rows.append(row)
    qbar = _metric_matrix(ch)
    return SchemeSpec(
        variant="yamamoto_itoh",
        m=m, n1=n1, n2=n2, cap=cap, x_size=x_size,
        codebook=tuple(rows),
        confirm=_confirm_pair(qbar),
        threshold=threshold,
        name=name or f"yi_m{m}_n{n1}+{n2}_cap{cap}",
    )


def build_repetition_confirm(
    ch: Channel, m: int, n1: int, n2: int, cap: int, threshold: float = 0.0, name: str = ""
) -> SchemeSpec:
    """Each message repeats its own symbol through the data phase."""
    if m > ch.spec.x_size:
        raise SchemaError("repetition data phase needs m <= |X|")
    qbar = _metric_matrix(ch)
    return SchemeSpec(
        variant="repetition_confirm",
        m=m, n1=n1, n2=n2, cap=cap, x_size=ch.spec.x_size,
        codebook=tuple((w,) * n1 for w in range(m)),
        confirm=_confirm_pair(qbar),
        threshold=threshold,
        name=name or f"rep_m{m}_n{n1}+{n2}_cap{cap}",
    )


# ---------------------------------------------------------------------------
# run statistics
# ---------------------------------------------------------------------------


def _clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = (1.0 - level) / 2.0
    lo = 0.0 if k == 0 else float(_beta_dist.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(_beta_dist.ppf(1.0 - a, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class RunStats:
    """Monte Carlo outcome with exact binomial error bars and propagated
    rate/exponent intervals (worst-case corner propagation)."""

    m: int
    trials: int
    errors: int
    pe: float
    pe_lo: float
    pe_hi: float
    et: float
    et_lo: float
    et_hi: float
    rate: float
    rate_lo: float
    rate_hi: float
    exponent: float
    exp_lo: float
    exp_hi: float

    @classmethod
    def from_counts(cls, m: int, trials: int, errors: int, t_sum: float, t_sqsum: float) -> "RunStats":
        pe = errors / trials
        pe_lo, pe_hi = _clopper_pearson(errors, trials)
        et = t_sum / trials
        var = max(t_sqsum / trials - et * et, 0.0)
        half = 1.96 * math.sqrt(var / trials)
        et_lo, et_hi = max(et - half, 1e-300), et + half
        logm = math.log2(m)
        rate = logm / et
        rate_lo, rate_hi = logm / et_hi, logm / et_lo
        exponent = math.inf if pe == 0.0 else -math.log2(pe) / et
        exp_lo = -math.log2(pe_hi) / et_hi if pe_hi > 0 else math.inf
        exp_hi = math.inf if pe_lo == 0.0 else -math.log2(pe_lo) / et_lo
        return cls(
            m=m, trials=trials, errors=errors,
            pe=pe, pe_lo=pe_lo, pe_hi=pe_hi,
            et=et, et_lo=et_lo, et_hi=et_hi,
            rate=rate, rate_lo=rate_lo, rate_hi=rate_hi,
            exponent=exponent, exp_lo=exp_lo, exp_hi=exp_hi,
        )


@dataclass(frozen=True)
class ExactStats:
    pe: float
    et: float
    rate: float
    exponent: float
    leaves: int


def csv_row(scheme: SchemeSpec, stats: RunStats) -> dict:
    return {
        "M": scheme.m,
        "n1": scheme.n1,
        "n2": scheme.n2,
        "cap": scheme.cap,
        "trials": stats.trials,
        "Pe": stats.pe,
        "Pe_lo": stats.pe_lo,
        "Pe_hi": stats.pe_hi,
        "ET": stats.et,
        "R": stats.rate,
        "E": stats.exponent,
        "E_lo": stats.exp_lo,
        "E_hi": stats.exp_hi,
    }


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _log_metric(qbar: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(qbar > 0, np.log2(np.where(qbar > 0, qbar, 1.0)), -np.inf)


def _draw_uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    out = np.empty((count, width))
    for i in range(count):
        gen = np.random.Generator(np.random.Philox(key=[seed, start + i]))
        out[i] = gen.random(width)
    return out


def _inverse_cdf(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    # index of the first cumulative entry at or above u (ties go left, same
    # as searchsorted side='left'), vectorized over leading axes
    return (cum < u[..., None]).sum(axis=-1)


def _simulate_fast_dmc(
    scheme: SchemeSpec, ch: Channel, trials: int, seed: int, start: int
) -> tuple[int, float, float]:
    q = ch.spec.q[0]
    cum = np.cumsum(q, axis=1)
    logq = _log_metric(q)
    m, n1, n2, cap = scheme.m, scheme.n1, scheme.n2, scheme.cap
    ll_len = scheme.block_len
    n_uses = scheme.max_uses
    xa, xn = scheme.confirm
    cb = np.array(scheme.codebook)
    lq_cb = logq[cb]  # (m, n1, y_size)
    llr_row = logq[xa] - logq[xn]

    errors = 0
    t_sum = 0.0
    t_sqsum = 0.0
    chunk = 20_000
    for lo in range(0, trials, chunk):
        n = min(chunk, trials - lo)
        d = _draw_uniforms(seed, start + lo, n, 1 + 2 * n_uses)
        w = np.minimum((d[:, 0] * m).astype(int), m - 1)
        uy = d[:, 1 + n_uses :]
        alive = np.ones(n, dtype=bool)
        stop_block = np.zeros(n, dtype=int)
        final_err = np.zeros(n, dtype=bool)
        for b in range(cap):
            off = b * ll_len
            y_data = _inverse_cdf(cum[cb[w]], uy[:, off : off + n1])
            ll = np.take_along_axis(
                lq_cb[None, :, :, :], y_data[:, None, :, None], axis=3
            )[..., 0].sum(axis=2)
            w_hat = np.argmax(ll, axis=1)
            xc = np.where(w_hat == w, xa, xn)
            y_conf = _inverse_cdf(cum[xc][:, None, :], uy[:, off + n1 : off + ll_len])
            llr = llr_row[y_conf].sum(axis=1)
            accept = llr >= scheme.threshold
            done = alive & (accept | (b == cap - 1))
            stop_block[done] = b + 1
            final_err[done] = (w_hat != w)[done]
            alive &= ~done
        t = stop_block * ll_len
        errors += int(final_err.sum())
        t_sum += float(t.sum())
        t_sqsum += float((t.astype(float) ** 2).sum())
    return errors, t_sum, t_sqsum


def _simulate_generic(
    scheme: SchemeSpec, ch: Channel, trials: int, seed: int, start: int
) -> tuple[int, float, float]:
    q = ch.spec.q
    cum_q = np.cumsum(q, axis=2)  # (s, x, y)
    qbar = _metric_matrix(ch)
    logq = _log_metric(qbar)
    m, n1, n2, cap = scheme.m, scheme.n1, scheme.n2, scheme.cap
    block = scheme.block_len
    n_uses = scheme.max_uses
    hcap = ch.kernel.horizon_cap()
    if hcap is not None and n_uses > hcap:
        raise SchemaError("scheme needs more channel uses than the kernel defines")
    xa, xn = scheme.confirm
    cb = scheme.codebook
    errors = 0
    t_sum = 0.0
    t_sqsum = 0.0
    for i in range(trials):
        gen = np.random.Generator(np.random.Philox(key=[seed, start + i]))
        d = gen.random(1 + 2 * n_uses)
        w = min(int(d[0] * m), m - 1)
        us, uy = d[1 : n_uses + 1], d[n_uses + 1 :]
        s_hist: tuple[int, ...] = ()
        x_hist: tuple[int, ...] = ()
        t_abs = 0
        w_hat = 0
        stopped = False
        for b in range(cap):
            ys_data = []
            for pos in range(block):
                x = cb[w][pos] if pos < n1 else (xa if w_hat == w else xn)
                sd = ch.kernel.distribution(t_abs + 1, s_hist, x_hist)
                s = int(np.searchsorted(np.cumsum(sd), us[t_abs], side="left"))
                y = int(np.searchsorted(cum_q[s, x], uy[t_abs], side="left"))
                s_hist += (s,)
                x_hist += (x,)
                t_abs += 1
                if pos < n1:
                    ys_data.append(y)
                    if pos == n1 - 1:
                        ll = [
                            sum(logq[cb[cand][j], ys_data[j]] for j in range(n1))
                            for cand in range(m)
                        ]
                        w_hat = int(np.argmax(ll))
                        llr = 0.0
                else:
                    llr += logq[xa, y] - logq[xn, y]
            if llr >= scheme.threshold or b == cap - 1:
                stopped = True
                t_sum += t_abs
                t_sqsum += float(t_abs) ** 2
                if w_hat != w:
                    errors += 1
                break
        assert stopped
    return errors, t_sum, t_sqsum


def simulate(
    scheme: SchemeSpec,
    ch: Channel,
    trials: int,
    seed: int = 0,
    workers: int = 1,
    _force_generic: bool = False,
) -> RunStats:
    """Monte Carlo run.  ``workers`` splits the trial range into contiguous
    chunks executed independently; the per-trial keyed generators make the
    outcome identical for every worker count."""
    if trials < 1:
        raise SchemaError("need at least one trial")
    if scheme.x_size != ch.spec.x_size:
        raise SchemaError("scheme and channel disagree on the input alphabet")
    workers = max(1, int(workers))
    fast = ch.spec.is_dmc() and not _force_generic
    runner = _simulate_fast_dmc if fast else _simulate_generic
    bounds = [
        (trials * k // workers, trials * (k + 1) // workers) for k in range(workers)
    ]
    errors = 0
    t_sum = 0.0
    t_sqsum = 0.0
    for lo, hi in bounds:  # fixed merge order regardless of execution order
        if hi <= lo:
            continue
        e, ts, tq = runner(scheme, ch, hi - lo, seed, lo)
        errors += e
        t_sum += ts
        t_sqsum += tq
    return RunStats.from_counts(scheme.m, trials, errors, t_sum, t_sqsum)


# ---------------------------------------------------------------------------
# exact evaluation over the stopped output tree
# ---------------------------------------------------------------------------


def exact_stats(scheme: SchemeSpec, ch: Channel, budget: int = EXACT_BUDGET) -> ExactStats:
    """Exact error probability and expected stop time by forward recursion
    of the per-state mass over every output branch of every block.

    Supported for memoryless and one-step state kernels (the state mass is
    a finite vector); the node budget guards the tree size.
    """
    if ch.kernel.variant not in ("memoryless", "markov1"):
        raise SchemaError("exact evaluation supports memoryless and markov1 kernels")
    if scheme.x_size != ch.spec.x_size:
        raise SchemaError("scheme and channel disagree on the input alphabet")
    q = ch.spec.q
    s_size = ch.spec.s_size
    qbar = _metric_matrix(ch)
    logq = _log_metric(qbar)
    m, n1, cap = scheme.m, scheme.n1, scheme.cap
    block = scheme.block_len
    xa, xn = scheme.confirm
    cb = scheme.codebook

    if ch.kernel.variant == "memoryless":
        p_state = np.asarray(ch.kernel.table, dtype=float).reshape(s_size)
        trans = None
    else:
        p_state = np.asarray(ch.kernel.init, dtype=float)
        trans = np.asarray(ch.kernel.table, dtype=float)  # (s, x, s')

    nodes = 0
    pe = 0.0
    et = 0.0
    leaves = 0

    def step(alpha: np.ndarray, x: int, x_prev: int | None, first: bool):
        # advance the state mass, then split on the output symbol
        if trans is None:
            a = alpha.sum() * p_state
        elif first:
            a = alpha.sum() * p_state
        else:
            a = alpha @ trans[:, x_prev, :]
        for y in range(ch.spec.y_size):
            child = a * q[:, x, y]
            mass = child.sum()
            if mass > 0.0:
                yield y, child

    def run_block(w: int, alpha: np.ndarray, x_prev: int | None, b: int, t0: int):
        nonlocal nodes, pe, et, leaves
        # data phase: enumerate output prefixes with the state mass attached
        frontier = [((), alpha, x_prev)]
        for pos in range(n1):
            nxt = []
            for ys, a, xp in frontier:
                x = cb[w][pos]
                for y, child in step(a, x, xp, first=(t0 == 0 and pos == 0)):
                    nodes += 1
                    if nodes > budget:
                        raise BudgetExceededError(
                            f"exact evaluation exceeded {budget} tree nodes"
                        )
                    nxt.append((ys + (y,), child, x))
            frontier = nxt
        for ys, a, xp in frontier:
            ll = [sum(logq[cb[c][j], ys[j]] for j in range(n1)) for c in range(m)]
            w_hat = int(np.argmax(ll))
            xc = xa if w_hat == w else xn
            conf = [((), a, xp, 0.0)]
            for pos in range(scheme.n2):
                nxt = []
                for cys, ca, cxp, llr in conf:
                    for y, child in step(ca, xc, cxp, first=False):
                        nodes += 1
                        if nodes > budget:
                            raise BudgetExceededError(
                                f"exact evaluation exceeded {budget} tree nodes"
                            )
                        # same association order as the simulators so ties
                        # land on exactly the same side of the threshold
                        nxt.append(
                            (cys + (y,), child, xc, llr + (logq[xa, y] - logq[xn, y]))
                        )
                conf = nxt
            for cys, ca, cxp, llr in conf:
                mass = float(ca.sum())
                if llr >= scheme.threshold or b == cap - 1:
                    leaves += 1
                    et += mass * (t0 + block)
                    if w_hat != w:
                        pe += mass
                else:
                    run_block(w, ca, cxp, b + 1, t0 + block)

    for w in range(m):
        run_block(w, np.array([1.0 / m]), None, 0, 0)

    rate = math.log2(m) / et
    exponent = math.inf if pe == 0.0 else -math.log2(pe) / et
    return ExactStats(pe=pe, et=et, rate=rate, exponent=exponent, leaves=leaves)


def exponent_sweep(
    ch: Channel,
    schemes: list[SchemeSpec],
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> list[tuple[SchemeSpec, RunStats]]:
    """Simulate each scheme with the same seed and trial count."""
    return [(sc, simulate(sc, ch, trials, seed=seed, workers=workers)) for sc in schemes]
