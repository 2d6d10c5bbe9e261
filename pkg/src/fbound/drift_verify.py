"""Mechanical verification of the drift and martingale facts behind the
bounds, by exact enumeration on small instances and Monte Carlo on
unstructured ones.

Every check returns a ``Verdict`` carrying the number of cases examined,
the worst signed margin (nonnegative means the claimed inequality held),
the constants in force, and human-readable detail lines.  Checks accept a
``mutate`` argument where a deliberately falsified input is documented;
a mutated run is expected to fail, which guards the checker itself against
vacuous passes.

Pruned-time conventions used throughout, for an entropy path H_0..H_N and a
threshold eps (requires H_0 >= eps):

- ``tau_hit``: first t in [1, N] with H_t <= eps, else N;
- ``tau_last``: last t in [1, N+1] with H_{t-1} >= eps, capped at N;
- pruned index ``t_n``: n before the hit, max(n, tau_last) afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import (
    Channel,
    JointLaw,
    SchemaError,
    StoppingRule,
    bsc,
    forward_joint,
    posteriors,
    average_channel,
    repetition_encoder,
)
from .info_measures import (
    DriftTerms,
    EntropyProcess,
    binary_entropy,
    binary_entropy_inv,
    drift_terms,
    entropy,
    h_process,
    kl,
)

__all__ = [
    "Verdict",
    "PrunedTimes",
    "MUTATIONS",
    "verify_linear_drift",
    "verify_log_drift",
    "verify_submartingale_L",
    "verify_fano",
    "verify_lemma4_budget",
    "verify_lemma5_kl_transfer",
    "verify_lemma7",
    "verify_entropy_proposition",
    "verify_maximal_inequality",
    "default_lambda_grid",
]

MUTATIONS = ("halve_kl_drift",)

DRIFT_TOL = 1e-10


@dataclass(frozen=True)
class Verdict:
    """Outcome of one mechanical check."""

    check: str
    instance: str
    count: int
    worst: float
    passed: bool
    constants: dict = field(default_factory=dict)
    details: tuple[str, ...] = ()

    def to_text(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        const = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.constants.items()))
        lines = [
            f"[{tag}] {self.check}  instance={self.instance}  "
            f"cases={self.count}  worst-margin={_fmt(self.worst)}"
        ]
        if const:
            lines.append(f"  constants: {const}")
        lines.extend(f"  {d}" for d in self.details)
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return f"{v:.6g}"
    return str(v)


def _instance_name(law: JointLaw) -> str:
    name = law.channel.spec.name or "channel"
    return f"{name} M={law.messages} N={law.horizon}"


def _check_mutation(mutate: str | None) -> None:
    if mutate is not None and mutate not in MUTATIONS:
        raise SchemaError(f"unknown mutation {mutate!r}; available: {MUTATIONS}")


def _kl_drift_value(terms: DriftTerms, t: int, prev: tuple[int, ...], mutate: str | None) -> float:
    v = terms.kl_drift[t][prev]
    if mutate == "halve_kl_drift":
        return 0.5 * v
    return v


def _child_prob(law: JointLaw, prev: tuple[int, ...], y: int) -> float:
    node = prev + (y,)
    child = law.node_prob[len(node)].get(node, 0.0)
    return child / law.node_prob[len(prev)][prev]


# ---------------------------------------------------------------------------
# pruned times
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrunedTimes:
    horizon: int
    eps: float
    tau_hit: int
    tau_last: int

    @classmethod
    def from_path(cls, h_path: list[float], eps: float) -> "PrunedTimes":
        n = len(h_path) - 1
        if h_path[0] < eps:
            raise SchemaError("pruning needs the initial entropy at or above eps")
        tau_hit = n
        for t in range(1, n + 1):
            if h_path[t] <= eps:
                tau_hit = t
                break
        tau_last = 0
        for t in range(n + 1, 0, -1):
            if h_path[t - 1] >= eps:
                tau_last = t
                break
        tau_last = min(tau_last, n)
        return cls(horizon=n, eps=eps, tau_hit=tau_hit, tau_last=tau_last)

    def pruned_index(self, n: int) -> int:
        if n > self.horizon:
            return self.horizon
        if n < self.tau_hit:
            return n
        return min(max(n, self.tau_last), self.horizon)


# ---------------------------------------------------------------------------
# per-path tables shared by the pruned-process checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PathData:
    path: tuple[int, ...]
    prob: float
    h: tuple[float, ...]        # H_0 .. H_N
    j: tuple[float, ...]        # j[r] for r in 1..N (index 0 unused)
    d: tuple[float, ...]        # kl drift, same indexing
    times: PrunedTimes


def _path_data(law: JointLaw, eps: float, mutate: str | None) -> list[_PathData]:
    proc = h_process(law)
    terms = drift_terms(law, proc)
    out = []
    for path, p in sorted(law.node_prob[law.horizon].items()):
        if p <= 0.0:
            continue
        h = proc.path_values(path)
        j = [0.0] + [terms.mi_drift[r][path[: r - 1]] for r in range(1, law.horizon + 1)]
        d = [0.0] + [
            _kl_drift_value(terms, r, path[: r - 1], mutate)
            for r in range(1, law.horizon + 1)
        ]
        out.append(
            _PathData(
                path=path,
                prob=p,
                h=tuple(h),
                j=tuple(j),
                d=tuple(d),
                times=PrunedTimes.from_path(h, eps),
            )
        )
    return out


def _phase_constants(paths: list[_PathData], last_time) -> tuple[float, float]:
    """Information/divergence per expected step over the pre-hit and
    post-hit windows; ``last_time(pd)`` gives the terminal time per path."""
    num_i = den_i = num_d = den_d = 0.0
    for pd in paths:
        th = pd.times.tau_hit
        tt = last_time(pd)
        num_i += pd.prob * sum(pd.j[1 : th + 1])
        den_i += pd.prob * th
        num_d += pd.prob * sum(pd.d[th + 1 : tt + 1])
        den_d += pd.prob * (tt - th)
    if den_i <= 1e-12:
        raise SchemaError("empty pre-hit window: cannot form the information constant")
    if den_d <= 1e-12:
        raise SchemaError(
            "the entropy path never crosses eps before the end: no divergence window"
        )
    return num_i / den_i, num_d / den_d


# ---------------------------------------------------------------------------
# linear entropy drift
# ---------------------------------------------------------------------------


def verify_linear_drift(law: JointLaw, tol: float = DRIFT_TOL) -> Verdict:
    """Expected one-step entropy decrease at every realizable history is at
    most the conditional input-output information there.

    ``worst`` is the smallest value of (information - decrease); the
    constants report the largest absolute gap, which is ~0 on instances
    where the encoder makes the message and the input one-to-one.
    """
    proc = h_process(law)
    terms = drift_terms(law, proc)
    worst = math.inf
    max_abs = 0.0
    count = 0
    for t in range(1, law.horizon + 1):
        for prev in sorted(law.xy_node[t]):
            h_prev = proc.value(prev)
            drop = h_prev
            for y in range(law.channel.spec.y_size):
                node = prev + (y,)
                if node in proc.levels[t]:
                    drop -= _child_prob(law, prev, y) * proc.value(node)
            margin = terms.mi_drift[t][prev] - drop
            worst = min(worst, margin)
            max_abs = max(max_abs, abs(margin))
            count += 1
    return Verdict(
        check="linear-drift",
        instance=_instance_name(law),
        count=count,
        worst=worst,
        passed=worst >= -tol,
        constants={"tol": tol, "max_abs_gap": max_abs},
    )


# ---------------------------------------------------------------------------
# logarithmic entropy drift
# ---------------------------------------------------------------------------


def verify_log_drift(
    law: JointLaw,
    eps: float,
    c: float | None = None,
    tol: float = DRIFT_TOL,
    mutate: str | None = None,
) -> Verdict:
    """On low-entropy histories (0 < H < eps), the expected one-step drop of
    log2 H is at most the worst-case effective divergence plus a slack
    proportional to the inverse binary entropy of eps.

    Reports the minimal constant that would pass, so a failure under the
    default constant is quantified.
    """
    _check_mutation(mutate)
    if not 0.0 < eps <= 1.0:
        raise SchemaError("eps must lie in (0, 1] for the inverse-entropy slack")
    proc = h_process(law)
    terms = drift_terms(law, proc)
    d_max = terms.max_pairwise_kl
    if c is None:
        c = 2.0 * (1.0 + d_max) + d_max + 2.0
    slack = binary_entropy_inv(eps)
    worst = math.inf
    c_min = 0.0
    count = 0
    for t in range(1, law.horizon + 1):
        for prev in sorted(law.xy_node[t]):
            h_prev = proc.value(prev)
            if not 0.0 < h_prev < eps:
                continue
            drift = 0.0
            for y in range(law.channel.spec.y_size):
                node = prev + (y,)
                if node in proc.levels[t]:
                    h_child = proc.value(node)
                    if h_child <= 0.0:
                        drift = -math.inf
                        break
                    drift += _child_prob(law, prev, y) * math.log2(h_child)
            else:
                drift -= math.log2(h_prev)
            d_r = _kl_drift_value(terms, t, prev, mutate)
            margin = drift + d_r + c * slack
            worst = min(worst, margin)
            if slack > 0:
                c_min = max(c_min, (-drift - d_r) / slack)
            count += 1
    details = ()
    if count == 0:
        worst = math.inf
        details = ("no history with entropy inside (0, eps): vacuous pass",)
    return Verdict(
        check="log-drift",
        instance=_instance_name(law),
        count=count,
        worst=worst,
        passed=worst >= -tol,
        constants={
            "eps": eps,
            "c": c,
            "c_minimal_passing": c_min,
            "hb_inv_eps": slack,
            "d_max": d_max,
            "mutate": mutate or "none",
        },
        details=details,
    )


# ---------------------------------------------------------------------------
# pruned compensated process: submartingale check
# ---------------------------------------------------------------------------


def default_lambda_grid() -> tuple[float, ...]:
    return tuple(2.0**-k for k in range(21))


def _z_value(h: float, eps: float, i_const: float, d_const: float, lam: float) -> float:
    if h >= eps:
        return (h - eps) / i_const
    y = math.log2(h / eps)
    return y / d_const + (1.0 - math.exp(lam * y)) / (lam * d_const)


def _s_values(pd: _PathData, eps: float, i_const: float, d_const: float, logm: float) -> list[float]:
    """Compensator path: information credits before the hit, capped
    excursion credits between the hit and the last crossing (only while the
    previous entropy is at least sqrt(eps)), divergence credits afterwards,
    plus a one-off sqrt(eps) * N / I once past the last crossing."""
    n = pd.times.horizon
    th, tl = pd.times.tau_hit, pd.times.tau_last
    root = math.sqrt(eps)
    s = [0.0] * (n + 1)
    for r in range(1, n + 1):
        if r <= th:
            inc = pd.j[r] / i_const
        elif r <= tl:
            inc = logm / i_const if pd.h[r - 1] >= root else 0.0
        else:
            inc = pd.d[r] / d_const
        s[r] = s[r - 1] + inc
    return [s[t] + (root * n / i_const if t >= tl else 0.0) for t in range(n + 1)]


def _f_precondition_holds(eps: float, i_const: float, d_const: float, lam: float, eta: float) -> tuple[bool, float]:
    ys = np.linspace(-eta, 0.0, 1002)[1:-1]
    lhs = (eps / i_const) * (np.exp(ys) - 1.0) - ys / d_const
    f = (1.0 - np.exp(lam * ys)) / (lam * d_const)
    gap = float(np.min(f - lhs))
    return bool(np.all(lhs < f)), gap


def verify_submartingale_L(
    law: JointLaw,
    eps: float,
    lam_grid: tuple[float, ...] | None = None,
    i_const: float | None = None,
    d_const: float | None = None,
    tol: float = DRIFT_TOL,
    mutate: str | None = None,
) -> Verdict:
    """The compensated pruned process L_n = Z_{t_n} + S_{t_n} is a
    submartingale: conditional on each realized pruned history, the expected
    increment is nonnegative.

    Conditioning atoms are the realized pruned-history strings y^{t_n};
    because the pruned index collapses the post-threshold excursion, paths
    sharing a plain prefix may sit in different atoms.  A shape parameter
    lambda is admissible when its convexity precondition holds on a dense
    sample of the negative log-ratio range; the verdict reports the largest
    grid lambda that is admissible and passes every atom at every step.
    """
    _check_mutation(mutate)
    if not law.is_message_form:
        raise SchemaError("submartingale check needs a message-form law")
    if law.messages < 2:
        raise SchemaError("need at least two messages")
    logm = math.log2(law.messages)
    if not 0.0 < eps < logm:
        raise SchemaError("eps must lie in (0, log2 M)")
    terms = drift_terms(law)
    eta = terms.log_ratio_bound()  # raises unless strictly positive
    paths = _path_data(law, eps, mutate)
    n = law.horizon
    if i_const is None or d_const is None:
        i_auto, d_auto = _phase_constants(paths, lambda pd: n)
        i_const = i_auto if i_const is None else i_const
        d_const = d_auto if d_const is None else d_const
    if lam_grid is None:
        lam_grid = default_lambda_grid()

    details: list[str] = []
    best_lam = None
    best_worst = -math.inf
    best_count = 0
    for lam in sorted(lam_grid, reverse=True):
        pre_ok, pre_gap = _f_precondition_holds(eps, i_const, d_const, lam, eta)
        if not pre_ok:
            details.append(f"lambda={lam:g}: precondition violated (gap {pre_gap:.3e})")
            continue
        atoms: dict[tuple[int, tuple[int, ...]], list[float]] = {}
        lcheck: dict[tuple[int, tuple[int, ...]], list[float]] = {}
        for pd in paths:
            z = [_z_value(pd.h[t], eps, i_const, d_const, lam) for t in range(n + 1)]
            s = _s_values(pd, eps, i_const, d_const, logm)
            l = [z[pd.times.pruned_index(m)] + s[pd.times.pruned_index(m)] for m in range(n + 1)]
            for m in range(n):
                key = (m, pd.path[: pd.times.pruned_index(m)])
                acc = atoms.setdefault(key, [0.0, 0.0])
                acc[0] += pd.prob * (l[m + 1] - l[m])
                acc[1] += pd.prob
                lcheck.setdefault(key, []).append(l[m])
        worst = math.inf
        for key, (num, mass) in atoms.items():
            worst = min(worst, num / mass)
        spread = max(max(v) - min(v) for v in lcheck.values())
        if spread > 1e-8:
            details.append(f"lambda={lam:g}: non-constant L on an atom (spread {spread:.2e})")
            continue
        ok = worst >= -tol
        details.append(
            f"lambda={lam:g}: atoms={len(atoms)} worst-margin={worst:.6g} "
            f"{'pass' if ok else 'fail'}"
        )
        if ok and best_lam is None:
            best_lam, best_worst, best_count = lam, worst, len(atoms)
        if best_lam is None and worst > best_worst:
            best_worst, best_count = worst, len(atoms)
    passed = best_lam is not None
    return Verdict(
        check="pruned-submartingale",
        instance=_instance_name(law),
        count=best_count,
        worst=best_worst,
        passed=passed,
        constants={
            "eps": eps,
            "i_const": i_const,
            "d_const": d_const,
            "eta": eta,
            "lambda_best": best_lam if best_lam is not None else float("nan"),
            "mutate": mutate or "none",
        },
        details=tuple(details),
    )


# ---------------------------------------------------------------------------
# decoder entropy ceiling
# ---------------------------------------------------------------------------


def verify_fano(law: JointLaw, rule: StoppingRule | None = None, tol: float = 1e-9) -> Verdict:
    """Conditional message entropy at each stop node is at most
    h(pe) + pe * log2(M-1) for the node's decoder error probability, for
    both the posterior-maximizing decoder and a constant decoder; the
    averaged version is checked as well.
    """
    if not law.is_message_form:
        raise SchemaError("decoder check needs a message-form law")
    if rule is None:
        rule = StoppingRule.fixed(law.horizon, law.horizon, law.channel.spec.y_size)
    m = law.messages
    log_m1 = math.log2(m - 1) if m > 1 else 0.0
    worst = math.inf
    count = 0
    details = []
    for decoder in ("map", "constant"):
        avg_h = 0.0
        avg_pe = 0.0
        for path, p in law.node_prob[law.horizon].items():
            node = path[: rule.stop_time(path)]
            mu = law.w_post[len(node)][node]
            h_node = entropy(mu)
            if decoder == "map":
                w_hat = int(np.nanargmax(mu))
            else:
                w_hat = 0
            pe = 1.0 - float(mu[w_hat])
            # weight by the node mass contribution of this full path
            weight = p
            avg_h += weight * h_node
            avg_pe += weight * pe
            margin = binary_entropy(min(max(pe, 0.0), 1.0)) + pe * log_m1 - h_node
            worst = min(worst, margin)
            count += 1
        margin = binary_entropy(min(max(avg_pe, 0.0), 1.0)) + avg_pe * log_m1 - avg_h
        worst = min(worst, margin)
        count += 1
        details.append(f"{decoder} decoder: avg error {avg_pe:.6g}, avg entropy {avg_h:.6g}")
    return Verdict(
        check="decoder-entropy-ceiling",
        instance=_instance_name(law),
        count=count,
        worst=worst,
        passed=worst >= -tol,
        constants={"tol": tol},
        details=tuple(details),
    )


# ---------------------------------------------------------------------------
# compensator budget
# ---------------------------------------------------------------------------


def verify_lemma4_budget(
    law: JointLaw,
    eps: float,
    rule: StoppingRule | None = None,
    tol: float = DRIFT_TOL,
) -> Verdict:
    """The expected terminal compensator E[S at max(T, tau_last)] stays
    within E[T] * (1 + V), where V collects the square-root-eps excursion
    credits.  Valid only when eps exceeds the decoder entropy ceiling
    h(pe) + pe * log2 M at the stop.
    """
    if not law.is_message_form:
        raise SchemaError("compensator budget needs a message-form law")
    n = law.horizon
    if rule is None:
        rule = StoppingRule.fixed(n, n, law.channel.spec.y_size)
    logm = math.log2(law.messages)

    pe = 0.0
    et = 0.0
    seen: dict[tuple[int, ...], float] = {}
    for path, p in law.node_prob[n].items():
        t_stop = rule.stop_time(path)
        et += p * t_stop
        node = path[:t_stop]
        seen[node] = seen.get(node, 0.0) + p
    for node, p in seen.items():
        mu = law.w_post[len(node)][node]
        pe += p * (1.0 - float(np.nanmax(mu)))
    alpha = binary_entropy(min(max(pe, 0.0), 1.0)) + pe * logm
    if eps <= alpha:
        raise SchemaError(
            f"eps={eps:g} must exceed the decoder entropy ceiling {alpha:.6g}"
        )

    paths = _path_data(law, eps, mutate=None)
    stop_of = {pd.path: rule.stop_time(pd.path) for pd in paths}
    i_const, d_const = _phase_constants(paths, lambda pd: stop_of[pd.path])
    rate = logm / et
    v_term = (rate / i_const) * math.sqrt(eps) * n + math.sqrt(eps) * n / (et * i_const)

    es = 0.0
    for pd in paths:
        s = _s_values(pd, eps, i_const, d_const, logm)
        t_end = max(stop_of[pd.path], pd.times.tau_last)
        es += pd.prob * s[t_end]
    rhs = et * (1.0 + v_term)
    margin = rhs - es
    return Verdict(
        check="compensator-budget",
        instance=_instance_name(law),
        count=len(paths),
        worst=margin,
        passed=margin >= -tol,
        constants={
            "eps": eps,
            "i_const": i_const,
            "d_const": d_const,
            "pe": pe,
            "entropy_ceiling": alpha,
            "expected_stop": et,
            "v_term": v_term,
            "expected_compensator": es,
        },
    )


# ---------------------------------------------------------------------------
# divergence transfer at low entropy
# ---------------------------------------------------------------------------


def verify_lemma5_kl_transfer(
    law: JointLaw,
    eps: float,
    cprime: float | None = None,
    tol: float = DRIFT_TOL,
    mutate: str | None = None,
) -> Verdict:
    """At histories with entropy inside (0, eps), the worst divergence of
    the leading message's output row against the other messages' rows is at
    most the corresponding worst divergence between effective input rows
    plus a slack linear in the inverse binary entropy of eps.
    """
    _check_mutation(mutate)
    if not 0.0 < eps <= 1.0:
        raise SchemaError("eps must lie in (0, 1] for the inverse-entropy slack")
    proc = h_process(law)
    terms = drift_terms(law)
    d_max = terms.max_pairwise_kl
    if cprime is None:
        cprime = 4.0 * (1.0 + d_max)
    slack = binary_entropy_inv(eps)
    pt = posteriors(law)
    worst = math.inf
    cprime_min = 0.0
    count = 0
    for t in range(1, law.horizon + 1):
        avg_rows = average_channel(law, t)
        for prev in sorted(law.xy_node[t]):
            h_prev = proc.value(prev)
            if not 0.0 < h_prev < eps:
                continue
            w_rows = pt.step[t][prev]
            w_star = pt.map_message(t - 1, prev)
            lhs = 0.0
            for w in range(law.messages):
                if w == w_star or np.isnan(w_rows[w]).any():
                    continue
                lhs = max(lhs, kl(w_rows[w_star], w_rows[w]))
            rows = avg_rows[prev]
            nu = law.xy_node[t][prev].sum(axis=1)
            x_star = int(np.argmax(nu))
            rhs_kl = 0.0
            for x in range(law.channel.spec.x_size):
                if x == x_star or np.isnan(rows[x]).any():
                    continue
                rhs_kl = max(rhs_kl, kl(rows[x_star], rows[x]))
            if mutate == "halve_kl_drift":
                rhs_kl *= 0.5
            margin = rhs_kl + cprime * slack - lhs
            worst = min(worst, margin)
            if slack > 0:
                cprime_min = max(cprime_min, (lhs - rhs_kl) / slack)
            count += 1
    details = ()
    if count == 0:
        worst = math.inf
        details = ("no history with entropy inside (0, eps): vacuous pass",)
    return Verdict(
        check="kl-transfer",
        instance=_instance_name(law),
        count=count,
        worst=worst,
        passed=worst >= -tol,
        constants={
            "eps": eps,
            "cprime": cprime,
            "cprime_minimal_passing": cprime_min,
            "hb_inv_eps": slack,
            "d_max": d_max,
            "mutate": mutate or "none",
        },
        details=details,
    )


# ---------------------------------------------------------------------------
# random-instance checks
# ---------------------------------------------------------------------------


def verify_lemma7(
    trials: int = 10**5, seed: int = 0, max_dim: int = 5, tol: float = 1e-9
) -> Verdict:
    """Log-sum split: sum_l p_l log2(sum_i mu_i / sum_i beta_il) is at most
    max_i sum_l p_l log2(mu_i / beta_il), on random positive instances."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    count = 0
    dims = [(k, l) for k in range(2, max_dim + 1) for l in range(2, max_dim + 1)]
    per = max(1, -(-trials // len(dims)))  # ceil: at least `trials` in total
    for k, l in dims:
        mu = rng.random((per, k)) + 1e-12
        beta = rng.random((per, k, l)) + 1e-12
        p = rng.random((per, l)) + 1e-12
        p /= p.sum(axis=1, keepdims=True)
        lhs = (p * np.log2(mu.sum(axis=1, keepdims=True) / beta.sum(axis=1))).sum(axis=1)
        per_i = (p[:, None, :] * np.log2(mu[:, :, None] / beta)).sum(axis=2)
        rhs = per_i.max(axis=1)
        worst = min(worst, float((rhs - lhs).min()))
        count += per
    return Verdict(
        check="log-sum-split",
        instance=f"random positive instances, dims 2..{max_dim}",
        count=count,
        worst=worst,
        passed=worst >= -tol,
        constants={"tol": tol, "seed": seed},
    )


def verify_entropy_proposition(
    trials: int = 10**5, seed: int = 0, tol: float = 1e-12
) -> Verdict:
    """A distribution whose largest atom is at most one half has at least
    one bit of entropy; random rejection-sampled instances plus adversarial
    near-boundary ones."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    count = 0
    # dimension 2 has zero acceptance mass under rejection (only the exact
    # half-half point qualifies), so it is covered by the adversarial cases
    for dim in (3, 4, 6, 8):
        need = max(1, trials // 4)
        got = 0
        while got < need:
            batch = rng.dirichlet(np.ones(dim), size=need * 2)
            ok = batch.max(axis=1) <= 0.5
            batch = batch[ok][: need - got]
            if batch.size:
                with np.errstate(divide="ignore"):
                    lg = np.where(batch > 0, np.log2(np.where(batch > 0, batch, 1.0)), 0.0)
                hs = -(batch * lg).sum(axis=1)
                worst = min(worst, float(hs.min()) - 1.0)
                got += batch.shape[0]
        count += need
    # adversarial: exactly-half atoms and slim remainders
    for p in (
        [0.5, 0.5],
        [0.5, 0.5 - 1e-12, 1e-12],
        [0.5, 0.25, 0.25],
        [0.5, 0.49999999, 1e-8],
    ):
        worst = min(worst, entropy(np.array(p)) - 1.0)
        count += 1
    return Verdict(
        check="half-atom-entropy-floor",
        instance="random + adversarial distributions",
        count=count,
        worst=worst,
        passed=worst >= -tol,
        constants={"tol": tol, "seed": seed},
    )


def _walk_paths(rng: np.random.Generator, trials: int, steps: int) -> np.ndarray:
    factors = np.where(rng.random((trials, steps)) < 0.5, 0.5, 1.4)
    return np.cumprod(factors, axis=1)


def verify_maximal_inequality(
    law: JointLaw | None = None,
    trials: int = 10**4,
    seed: int = 0,
    tol_self: float = 1e-9,
) -> Verdict:
    """Monte Carlo check of the nonnegative-supermartingale maximal
    inequality: the running-supremum exceedance frequency stays below the
    started mean over the level, plus three binomial standard errors.

    Generators: the message-entropy process of a feedback law (exact
    one-step decrease verified from the law), and a multiplicative walk
    with mean factor 0.95 (decrease verified analytically).
    """
    rng = np.random.default_rng(seed)
    details = []
    worst = math.inf
    count = 0

    if law is None:
        law = forward_joint(bsc(0.1), repetition_encoder(2, 2, 6), 6)
    proc = h_process(law)
    # generator self-check: expected one-step decrease at every history
    for t in range(1, law.horizon + 1):
        for prev in sorted(law.xy_node[t]):
            h_prev = proc.value(prev)
            step = sum(
                _child_prob(law, prev, y) * proc.value(prev + (y,))
                for y in range(law.channel.spec.y_size)
                if prev + (y,) in proc.levels[t]
            )
            if step > h_prev + tol_self:
                raise SchemaError("entropy process failed its decrease self-check")
    nodes = sorted(law.node_prob[law.horizon])
    probs = np.array([law.node_prob[law.horizon][p] for p in nodes])
    probs = probs / probs.sum()
    idx = rng.choice(len(nodes), size=trials, p=probs)
    h_paths = np.array([proc.path_values(nodes[i]) for i in idx])
    start_mean = float(h_paths[:, 1].mean())
    for c in (0.2, 0.5, 0.9):
        sup = h_paths[:, 1:].max(axis=1)
        freq = float((sup > c).mean())
        se = math.sqrt(max(freq * (1 - freq), 1e-12) / trials)
        bound = start_mean / c + 3.0 * se
        margin = bound - freq
        worst = min(worst, margin)
        count += 1
        details.append(f"entropy-process c={c:g}: freq={freq:.4g} bound={bound:.4g}")

    assert abs(0.5 * 0.5 + 0.5 * 1.4 - 0.95) < tol_self  # walk decrease factor
    walks = _walk_paths(rng, trials, 30)
    for c in (1.5, 2.0, 4.0):
        freq = float((walks.max(axis=1) > c).mean())
        se = math.sqrt(max(freq * (1 - freq), 1e-12) / trials)
        bound = 1.0 / c + 3.0 * se
        margin = bound - freq
        worst = min(worst, margin)
        count += 1
        details.append(f"multiplicative-walk c={c:g}: freq={freq:.4g} bound={bound:.4g}")

    return Verdict(
        check="maximal-inequality",
        instance="entropy process + multiplicative walk",
        count=count,
        worst=worst,
        passed=worst >= 0.0,
        constants={"trials": trials, "seed": seed},
        details=tuple(details),
    )
