# One UAV sortie as a small routing problem
# ------------------------------------------
# Between takeoff and the next rendezvous the UAV visits whatever it can
# afford. Tabu search finds the route; an exhaustive oracle confirms it.
import time

from rendezvous_rl.evrptw import (
    brute_force_oracle,
    check_feasibility,
    construct_initial,
    evrptw_cost,
    random_instance,
    tabu_search,
)

inst = random_instance(seed=4, n_candidates=7)
print(f"{inst.k} candidates, window [{inst.t_start:.0f}, {inst.t_end:.0f}] s, "
      f"budget {inst.travel_budget:.0f} s of flight")

greedy = construct_initial(inst)
print("greedy route", greedy.route, f"cost {evrptw_cost(inst, greedy):.1f}")

t0 = time.perf_counter()
best = tabu_search(inst, greedy)
print("tabu route  ", best.route, f"cost {evrptw_cost(inst, best):.1f} ({time.perf_counter() - t0:.3f} s)")

opt = brute_force_oracle(inst)
print("oracle route", opt.route, f"cost {evrptw_cost(inst, opt):.1f}")
print("feasibility:", check_feasibility(inst, best))

# %% Arrival times and fuel along the tabu route
for v, t, f in zip(best.route, best.arrival, best.fuel_at):
    print(f"vertex {v:2d}  t = {t:8.1f} s  fuel = {f / 1000:7.2f} kJ")
