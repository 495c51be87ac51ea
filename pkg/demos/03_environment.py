# The rendezvous decision process
# --------------------------------
# Each decision picks the next on-road stop. The UGV drives there, the UAV
# flies a sortie over unvisited points and docks, then recharges while riding.
from pathlib import Path

import numpy as np

from rendezvous_rl.env import Env
from rendezvous_rl.scenario import load_scenario

root = Path(__file__).resolve().parent.parent
env = Env(load_scenario(root / "fixtures" / "grid12.json"))

state = env.reset()
print("valid first stops:", np.flatnonzero(env.mask(state)).tolist())

# %% Follow a hand-picked stop sequence that completes the mission
total = 0.0
for stop in (0, 2, 5, 4, 3, 4, 2, 1):
    state, r, done, out = env.step(state, stop)
    total += r
    print(f"stop {stop}: route {out.t_route / 60:5.1f} min, recharge {out.t_recharge / 60:5.1f}, "
          f"hover {out.t_uav_idle / 60:5.1f}, UGV wait {out.t_ugv_idle / 60:4.1f}, "
          f"new points {sorted(out.visited)}, reward {r:9.2f}")
    if done:
        break
print(f"complete={state.complete}, return {total:.2f}, clock {state.clock / 60:.1f} min")

# %% The policy sees one feature row per task point
print(env.encode(state).round(3)[:3])
