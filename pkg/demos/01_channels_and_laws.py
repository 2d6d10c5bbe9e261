#!/usr/bin/env python3
"""Tour of the channel model: specs on disk, encoders, and exact joint laws.

Loads a binary symmetric channel from ``channels/``, drives it with a
two-message repetition encoder for three uses, and walks the resulting
output tree: path masses, message posteriors, and the entropy process
that the bounds and the lemma checks are built on.  Ends with a state
channel to show that the same machinery handles channels whose behaviour
depends on an evolving hidden state.
"""

from pathlib import Path

from fbound import (
    StoppingRule,
    directed_mi_stopped,
    entropy,
    expected_stop_time,
    forward_joint,
    h_process,
    load_channel,
    posteriors,
    repetition_encoder,
    two_state_flip_channel,
)

CHANNELS = Path(__file__).resolve().parents[1] / "channels"


def main() -> None:
    ch = load_channel(str(CHANNELS / "bsc01.json"))
    print(f"channel {ch.name}: x_size={ch.spec.x_size} y_size={ch.spec.y_size} "
          f"s_size={ch.spec.s_size} kernel={ch.kernel.variant}")
    for x in range(ch.spec.x_size):
        print(f"  P(y|x={x}) = {ch.spec.row(x, 0)}")

    # Two equiprobable messages, each repeating its bit for three uses.
    m, horizon = 2, 3
    policy = repetition_encoder(m, ch.spec.x_size, horizon)
    law = forward_joint(ch, policy, horizon)
    print(f"\njoint law: {m} messages, horizon {horizon}, "
          f"{len(law.output_paths())} output paths, total mass {law.total_mass():.12f}")

    print("\nheaviest output paths and their message posteriors:")
    post = posteriors(law)
    paths = sorted(law.output_paths().items(), key=lambda kv: -kv[1])
    for path, mass in paths[:4]:
        w = post.prior[horizon][path]
        print(f"  y={path}  P={mass:.6f}  P(W|y)={w.round(6)}  "
              f"H(W|y)={entropy(w):.6f} bits")

    # The posterior entropy process: one value per output node, decreasing
    # on average as observations accumulate.
    proc = h_process(law)
    print("\nexpected posterior entropy by time:")
    for t in range(horizon + 1):
        print(f"  t={t}  E[H_t] = {proc.expected(t):.6f} bits")

    # Stop after two of the three uses: information and stopping time of a
    # stopped transcript, the basic quantities the converse bounds trade off.
    rule = StoppingRule.fixed(2, horizon, ch.spec.y_size)
    print(f"\nfixed stop at t=2: E[tau]={expected_stop_time(law, rule):.6f}, "
          f"directed information I(W -> Y^tau) = {directed_mi_stopped(law, rule):.6f} bits")

    # Same pipeline on a channel with a hidden flipping state.
    flip = two_state_flip_channel()
    law2 = forward_joint(flip, repetition_encoder(m, flip.spec.x_size, horizon), horizon)
    proc2 = h_process(law2)
    print(f"\nstate channel {flip.name}: kernel={flip.kernel.variant}, "
          f"mass {law2.total_mass():.12f}")
    for t in range(horizon + 1):
        print(f"  t={t}  E[H_t] = {proc2.expected(t):.6f} bits")


if __name__ == "__main__":
    main()
