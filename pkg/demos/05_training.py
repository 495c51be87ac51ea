# REINFORCE on the grid12 scenario
# ---------------------------------
import time
from pathlib import Path

import numpy as np

from rendezvous_rl.env import Env
from rendezvous_rl.metrics import run_eval
from rendezvous_rl.scenario import load_scenario
from rendezvous_rl.training import TrainConfig, train

root = Path(__file__).resolve().parent.parent
env = Env(load_scenario(root / "fixtures" / "grid12.json"))

t0 = time.perf_counter()
res = train(env, TrainConfig(epochs=500, learning_rate=0.005, seed=4))
print(f"trained in {time.perf_counter() - t0:.1f} s")

# %% Learning curve in 50-episode blocks
R = np.array(res.reward_log).reshape(10, 50)
S = np.array(res.success_log).reshape(10, 50)
for i, (r, s) in enumerate(zip(R.mean(1), S.mean(1))):
    print(f"episodes {50 * i + 1:3d}-{50 * (i + 1):3d}: mean reward {r:8.1f}, success {s:.2f}")

# %% Greedy evaluation of the final policy
metrics, trace, _ = run_eval(env, res.params, "greedy")
print(f"success={metrics.success}, total {metrics.total_time:.1f} min, "
      f"{metrics.n_recharges} recharges, UGV idle {metrics.ugv_idle_pct:.1f}%")
