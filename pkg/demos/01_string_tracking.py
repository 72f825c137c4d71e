"""Drive a three-vehicle string onto its reference with the LQ tracker.

Shows the pieces in isolation: build the integrator-chain model, expand
scalar weights, solve one finite-horizon pass, then run the closed loop
with converged gains and watch gaps and speeds settle.
"""
import numpy as np

from rampmerge.statespace import build_model
from rampmerge.tracking import (
    build_reference,
    converged_gains,
    solve_finite_horizon,
    steady_state_feedforward,
    weights_for,
)
from rampmerge.vehicles import Lane

n = 3
dt = 0.1
model = build_model(n, dt)
lanes = (Lane.MAINLINE, Lane.RAMP, Lane.MAINLINE)
weights = weights_for(lanes, control_weight=2.0)

# desired: 36 m net gaps at 30 m/s, i.e. position differences of 41 m
ref = build_reference(
    n,
    pair_gap_min=np.array([20.0, 20.0]),
    desired_speed=30.0,
    desired_time_headway=1.2,
    vehicle_length=5.0,
    horizon=300,
)

solution = solve_finite_horizon(model, weights, ref)
print(f"finite horizon N=300: feedback gain K_0 shape {solution.K[0].shape}")

K, Ky = converged_gains(model, weights)
print(f"converged gains within {np.max(np.abs(K - solution.K[0])):.2e} of K_0")

V = steady_state_feedforward(model, weights, K, ref.r[0])

# start bunched and slow relative to the reference
x = np.array([0.0, -28.0, -60.0, 24.0, 26.0, 22.0])
print("\n   t |    gap1    gap2 |      v1      v2      v3")
for k in range(1200):
    u = -K @ x + Ky @ V
    x = model.step(x, u)
    if k % 200 == 199:
        y = model.observe(x)
        print(f"{(k + 1) * dt:4.0f} | {y[0]:7.2f} {y[1]:7.2f} |"
              f" {y[2]:7.2f} {y[3]:7.2f} {y[4]:7.2f}")

y = model.observe(x)
print(f"\nreference was gaps {ref.r[0][:2]} speeds {ref.r[0][2:]}")
print(f"settled to     gaps {np.round(y[:2], 3)} speeds {np.round(y[2:], 3)}")
