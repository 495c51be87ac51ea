# World model and energy budget
# ------------------------------
# A scenario is a road grid, some task points and the vehicle constants.
# Half the points sit on road nodes (the UGV can reach them, and they double
# as rendezvous stops); the rest are reachable only by air.
from pathlib import Path

import numpy as np

from rendezvous_rl.energy import flight_endurance, flight_range, recharge_time, uav_power
from rendezvous_rl.scenario import load_scenario, shortest_road_path

root = Path(__file__).resolve().parent.parent
sc = load_scenario(root / "fixtures" / "grid12.json")
print(f"{sc.n_points} task points, {len(sc.on_road_ids)} on the road, depot at {sc.node_xy(sc.depot)}")

# %% Power draw is a cubic in airspeed. Hovering is the most expensive state.
for v in (0.0, 5.0, 10.0):
    print(f"P({v:4.1f} m/s) = {uav_power(v):8.3f} W")
speeds = np.linspace(0, 12, 7)
print("P over 0..12 m/s:", np.round(uav_power(speeds), 1))

# %% One tank buys about 24 minutes of cruise, or 14.5 km.
F = sc.params.fuel_capacity
print(f"endurance {flight_endurance(F, 10.0):.1f} s, range {flight_range(F, 10.0):.0f} m, "
      f"hover endurance {flight_endurance(F, 0.0):.1f} s")
print(f"empty-to-full recharge: {recharge_time(0.0, F, sc.params.recharge_rate):.0f} s")

# %% The UGV drives shortest road paths at 4.5 m/s.
far = sc.point_node[sc.on_road_ids[-1]]
path, dist = shortest_road_path(sc.road, sc.depot, far)
print(f"depot -> node {far}: {path}, {dist:.0f} m, {dist / sc.params.ugv_speed / 60:.1f} min")
