"""Independent brute-force reference implementations used only by tests.

Everything here recomputes quantities from first principles with flat
cartesian-product loops and explicit probability formulas, sharing no code
with the library beyond numpy.  Deliberately slow and simple.
"""

from __future__ import annotations

import itertools
import math


def log2(v: float) -> float:
    return math.log2(v)


def oracle_joint(q, kernel_fn, policy_fn, m, horizon):
    """Joint law over (w, x^N, s^N, y^N) by full enumeration.

    q[s][x][y] nested lists; kernel_fn(t, s_hist, x_hist) -> list of state
    probabilities; policy_fn(t, w, x_hist, y_hist) -> list of input
    probabilities (message-form policies embed the message dependence here).
    Returns dict mapping (w, xs, ss, ys) -> probability, zero entries absent.
    """
    s_size = len(q)
    x_size = len(q[0])
    y_size = len(q[0][0])
    out = {}
    for w in range(m):
        for xs in itertools.product(range(x_size), repeat=horizon):
            for ss in itertools.product(range(s_size), repeat=horizon):
                for ys in itertools.product(range(y_size), repeat=horizon):
                    p = 1.0 / m
                    for t in range(1, horizon + 1):
                        xh, sh, yh = xs[: t - 1], ss[: t - 1], ys[: t - 1]
                        p *= policy_fn(t, w, xh, yh)[xs[t - 1]]
                        p *= kernel_fn(t, sh, xh)[ss[t - 1]]
                        p *= q[ss[t - 1]][xs[t - 1]][ys[t - 1]]
                        if p == 0.0:
                            break
                    if p > 0.0:
                        out[(w, xs, ss, ys)] = p
    return out


def marginal_y(joint, upto):
    """P(y^upto) from an oracle joint dict."""
    out = {}
    for (w, xs, ss, ys), p in joint.items():
        key = ys[:upto]
        out[key] = out.get(key, 0.0) + p
    return out


def posterior_w(joint, ynode):
    """P(w | y^t = ynode) from an oracle joint dict."""
    t = len(ynode)
    mass = {}
    for (w, xs, ss, ys), p in joint.items():
        if ys[:t] == ynode:
            mass[w] = mass.get(w, 0.0) + p
    z = sum(mass.values())
    return {w: v / z for w, v in mass.items()}


def entropy_bits(dist) -> float:
    vals = dist.values() if isinstance(dist, dict) else dist
    return -sum(p * log2(p) for p in vals if p > 0.0)


def kl_bits(p, q) -> float:
    total = 0.0
    for a, b in zip(p, q):
        if a > 0.0:
            if b == 0.0:
                return math.inf
            total += a * log2(a / b)
    return total


def oracle_directed_mi(joint, n, x_size, y_size):
    """sum_i I(X_i; Y_i | Y^{i-1}) computed directly from the joint dict."""
    total = 0.0
    for t in range(1, n + 1):
        prevs = marginal_y(joint, t - 1)
        for prev, pprev in prevs.items():
            xy = [[0.0] * y_size for _ in range(x_size)]
            for (w, xs, ss, ys), p in joint.items():
                if ys[: t - 1] == prev:
                    xy[xs[t - 1]][ys[t - 1]] += p
            term = 0.0
            px = [sum(row) for row in xy]
            py = [sum(xy[x][y] for x in range(x_size)) for y in range(y_size)]
            z = sum(px)
            for x in range(x_size):
                for y in range(y_size):
                    v = xy[x][y] / z
                    if v > 0.0:
                        term += v * log2(v * z * z / (px[x] * py[y]))
            total += pprev * term
    return total


def oracle_effective_rows(joint, t, prev, x_size, y_size):
    """P(Y_t | X_t = x, y^{t-1} = prev) rows plus the most likely input."""
    xy = [[0.0] * y_size for _ in range(x_size)]
    for (w, xs, ss, ys), p in joint.items():
        if ys[: t - 1] == prev:
            xy[xs[t - 1]][ys[t - 1]] += p
    nu = [sum(row) for row in xy]
    z = sum(nu)
    rows = {}
    best_x, best_v = None, -1.0
    for x in range(x_size):
        if nu[x] > 0.0:
            rows[x] = [v / nu[x] for v in xy[x]]
            if nu[x] / z > best_v + 1e-15:
                best_x, best_v = x, nu[x] / z
    return best_x, rows


def oracle_directed_kl(joint, a, b, x_size, y_size, variant):
    """Double loop over (step, history, input) per the two max orders."""
    total = 0.0
    for t in range(a, b + 1):
        prevs = marginal_y(joint, t - 1)
        if variant == "per_history_max":
            for prev, pprev in prevs.items():
                x_star, rows = oracle_effective_rows(joint, t, prev, x_size, y_size)
                base = rows[x_star]
                total += pprev * max(kl_bits(base, r) for r in rows.values())
        else:
            per_x = {}
            for prev, pprev in prevs.items():
                x_star, rows = oracle_effective_rows(joint, t, prev, x_size, y_size)
                base = rows[x_star]
                for x, r in rows.items():
                    per_x[x] = per_x.get(x, 0.0) + pprev * kl_bits(base, r)
            total += max(per_x.values()) if per_x else 0.0
    return total


def oracle_capacity_binary_input(q_rows, grid=20001):
    """DMC capacity over a binary input by dense line search (bits)."""
    best = 0.0
    for i in range(grid):
        r = i / (grid - 1)
        dist = [r, 1 - r]
        py = [sum(dist[x] * q_rows[x][y] for x in range(2)) for y in range(len(q_rows[0]))]
        val = 0.0
        for x in range(2):
            for y in range(len(q_rows[0])):
                if dist[x] > 0 and q_rows[x][y] > 0:
                    val += dist[x] * q_rows[x][y] * log2(q_rows[x][y] / py[y])
        best = max(best, val)
    return best


def oracle_vlc(q, kernel_fn, codebook, confirm, threshold, m, n1, n2, cap):
    """Error probability and mean stop time of a send-and-confirm scheme by
    enumerating complete output sequences and walking the protocol on each.

    q[s][x][y] nested lists, kernel_fn as in oracle_joint.  For every full
    output word the walk yields the stop time, the decision and the input
    sequence actually sent; the prefix probability then sums explicitly over
    state sequences.  Stopped prefixes are deduplicated so each contributes
    once.  Returns (pe, et).
    """
    s_size = len(q)
    x_size = len(q[0])
    y_size = len(q[0][0])
    xa, xn = confirm
    total_uses = cap * (n1 + n2)
    init = kernel_fn(1, (), ())
    qbar = [
        [sum(init[s] * q[s][x][y] for s in range(s_size)) for y in range(y_size)]
        for x in range(x_size)
    ]
    logq = [
        [log2(v) if v > 0.0 else float("-inf") for v in row] for row in qbar
    ]

    def walk(w, ys):
        xs = []
        t = 0
        for b in range(cap):
            data = []
            for pos in range(n1):
                xs.append(codebook[w][pos])
                data.append(ys[t])
                t += 1
            ll = [
                sum(logq[codebook[c][j]][data[j]] for j in range(n1))
                for c in range(m)
            ]
            w_hat = ll.index(max(ll))
            xc = xa if w_hat == w else xn
            llr = 0.0
            for pos in range(n2):
                xs.append(xc)
                llr += logq[xa][ys[t]] - logq[xn][ys[t]]
                t += 1
            if llr >= threshold or b == cap - 1:
                return t, w_hat != w, tuple(xs)
        raise AssertionError("unreachable: final block always stops")

    pe = 0.0
    et = 0.0
    for w in range(m):
        seen = set()
        for ys in itertools.product(range(y_size), repeat=total_uses):
            t, err, xs = walk(w, ys)
            if ys[:t] in seen:
                continue
            seen.add(ys[:t])
            p = 0.0
            for ss in itertools.product(range(s_size), repeat=t):
                pp = 1.0 / m
                for r in range(1, t + 1):
                    pp *= kernel_fn(r, ss[: r - 1], xs[: r - 1])[ss[r - 1]]
                    pp *= q[ss[r - 1]][xs[r - 1]][ys[r - 1]]
                    if pp == 0.0:
                        break
                p += pp
            et += p * t
            if err:
                pe += p
    return pe, et
