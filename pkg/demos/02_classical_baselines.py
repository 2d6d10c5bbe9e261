#!/usr/bin/env python3
"""Classical single-state baselines: capacity and the reliability line.

Computes memoryless capacity with a two-sided certificate (the iteration
stops only once the gap between its lower and upper envelope is below
1e-9), then traces the straight reliability line E(R) = C1 (1 - R/C)
that variable-length schemes with feedback are judged against.  Shows
the Z-channel's one-way infinite divergence and why channels with more
than one state are refused by these baselines.
"""

from pathlib import Path

from fbound import SchemaError, burnashev, dmc_capacity, load_channel

CHANNELS = Path(__file__).resolve().parents[1] / "channels"


def main() -> None:
    for name in ("bsc01", "bsc02", "z01"):
        ch = load_channel(str(CHANNELS / f"{name}.json"))
        cap, opt_input, gap = dmc_capacity(ch.spec.q[0])
        c1 = burnashev(ch, 0.0).max_kl
        print(f"{name}: C = {cap:.9f} bits/use  (certificate gap {gap:.2e}), "
              f"C1 = {c1 if c1 != float('inf') else 'inf'}")
        print(f"  maximizing input: {opt_input.round(6)}")

    ch = load_channel(str(CHANNELS / "bsc01.json"))
    cap = dmc_capacity(ch.spec.q[0])[0]
    print("\nreliability line for bsc01 (zero-rate slope C1, x-intercept C):")
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        res = burnashev(ch, frac * cap)
        print(f"  {res.line()}")

    # The Z-channel has a noiseless input letter, so one pairwise divergence
    # diverges and the line is infinite at every achievable rate.
    z = load_channel(str(CHANNELS / "z01.json"))
    res = burnashev(z, 0.3)
    print(f"\nz01 at R=0.3: {res.line()}  (infinite={res.infinite})")

    # Rates beyond capacity and channels with hidden state are rejected:
    # the line is a fixed-rate converse for plain memoryless channels only.
    try:
        burnashev(ch, cap + 0.05)
    except SchemaError as exc:
        print(f"\nrate above capacity -> {type(exc).__name__}: {exc}")
    flip = load_channel(str(CHANNELS / "flip2.json"))
    try:
        burnashev(flip, 0.1)
    except SchemaError as exc:
        print(f"state channel       -> {type(exc).__name__}: {exc}")


if __name__ == "__main__":
    main()
