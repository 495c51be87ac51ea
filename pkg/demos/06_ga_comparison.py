# Policy versus the genetic-algorithm baseline
# ---------------------------------------------
# Both are scored through the same environment, so the tables compare like
# with like.
from pathlib import Path

from rendezvous_rl.baseline_ga import GAParams, ga_run
from rendezvous_rl.env import Env
from rendezvous_rl.metrics import compare_report, run_eval
from rendezvous_rl.scenario import load_scenario
from rendezvous_rl.training import TrainConfig, train

root = Path(__file__).resolve().parent.parent
env = Env(load_scenario(root / "fixtures" / "grid12.json"))

policy = train(env, TrainConfig(seed=4)).params
ga = ga_run(env, GAParams(seed=1))
print(f"GA best fitness {ga.best_fitness:.1f} after {ga.evaluations} distinct rollouts")
print("GA stop sequence:", ga.episode.actions)

rl_metrics, _, _ = run_eval(env, policy)
ga_metrics, _, _ = run_eval(env, ga.best)
print(compare_report(rl_metrics, ga_metrics))
