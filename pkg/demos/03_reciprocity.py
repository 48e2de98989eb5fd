"""The reciprocity rule: no one-way vital-sign flows, ever.

Walks the delivery decision through every consent combination, shows the
self-access exception, and demonstrates mid-stream revocation.

Run: python demos/03_reciprocity.py
"""

import itertools

from pulseboard import (
    ConsentState,
    SignalChannel,
    SignalFrame,
    filter_frame,
    may_deliver,
    set_consent,
)

print("Truth table for frames from A to B on the SC channel:\n")
print("  A shares | B shares | delivered | reason")
print("  ---------+----------+-----------+-------------------------")
for a_shares, b_shares in itertools.product([False, True], repeat=2):
    state = ConsentState(["A", "B"])
    set_consent(state, "A", SignalChannel.SC, a_shares)
    set_consent(state, "B", SignalChannel.SC, b_shares)
    decision = may_deliver(state, "A", "B", SignalChannel.SC)
    print(
        f"  {str(a_shares):<8} | {str(b_shares):<8} | {str(decision.allowed):<9} | {decision.reason.value}"
    )

print("\nThe rule is symmetric: blocking A->B also blocks B->A.")
state = ConsentState(["A", "B"])
set_consent(state, "A", SignalChannel.SC, True)
print(f"  A->B: {may_deliver(state, 'A', 'B', SignalChannel.SC).reason.value}")
print(f"  B->A: {may_deliver(state, 'B', 'A', SignalChannel.SC).reason.value}")

print("\nOne's own display is never gated:")
print(f"  A->A: {may_deliver(state, 'A', 'A', SignalChannel.SC).reason.value}")

print("\nFan-out through the filter (A, B, C in a session; only A and C share):")
state = ConsentState(["A", "B", "C"])
set_consent(state, "A", SignalChannel.SC, True)
set_consent(state, "C", SignalChannel.SC, True)
frame = SignalFrame("A", SignalChannel.SC, seq=1, t_ms=0, value=2.4)
print(f"  recipients of A's frame: {filter_frame(state, frame, ['A', 'B', 'C'])}")

print("\nRevocation takes effect at the next version and stays off:")
version_before = state.version
set_consent(state, "A", SignalChannel.SC, False)
print(f"  version {version_before} -> {state.version}")
print(f"  recipients now: {filter_frame(state, frame, ['A', 'B', 'C'])} (self only)")
