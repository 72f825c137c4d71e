"""Pick the cheapest merge order for a mixed mainline/ramp group.

Enumerates every order-preserving interleaving, scores each one by the
fuel its predicted string trajectory burns, and prints the ranking.
"""
import numpy as np

from rampmerge.sequencing import (
    ScoringContext,
    count_sequences,
    enumerate_sequences,
    optimal_sequence,
    score_sequence,
)
from rampmerge.vehicles import Lane, VehicleState

ctx = ScoringContext(horizon=150, control_weight=2.0, desired_speed=30.0)

states = {
    1: VehicleState(id=1, lane=Lane.MAINLINE, position=-30.0, speed=31.0,
                    entry_speed=31.0),
    2: VehicleState(id=2, lane=Lane.MAINLINE, position=-95.0, speed=30.5,
                    entry_speed=30.5),
    7: VehicleState(id=7, lane=Lane.RAMP, position=-60.0, speed=16.0,
                    entry_speed=16.0),
    8: VehicleState(id=8, lane=Lane.RAMP, position=-130.0, speed=15.0,
                    entry_speed=15.0),
}
mainline = [1, 2]
ramp = [7, 8]

total = count_sequences(len(mainline), len(ramp))
print(f"{total} admissible interleavings of {len(mainline)} mainline "
      f"and {len(ramp)} ramp vehicles\n")

scores = [score_sequence(s, states, ctx)
          for s in enumerate_sequences(mainline, ramp)]
for s in sorted(scores, key=lambda s: s.total_fuel):
    order = " ".join(
        f"{'M' if lane is Lane.MAINLINE else 'R'}{vid}"
        for vid, lane in zip(s.sequence.ids, s.sequence.lanes))
    flag = "" if s.feasible else "  (degraded)"
    print(f"  {order:20s} {s.total_fuel:8.3f} mL{flag}")

best = optimal_sequence(mainline, ramp, states, ctx)
print(f"\noptimal_sequence picks {best.sequence.ids} "
      f"at {best.total_fuel:.3f} mL")
