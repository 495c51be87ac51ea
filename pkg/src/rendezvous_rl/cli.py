"""Command-line runner: gen-scenario, train, eval, ga, compare.

Exit codes: 0 success, 1 invalid input, 2 mission failure under ``--strict``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baseline_ga import GAParams, ga_run
from .env import Env
from .metrics import compare_report, export_route_trace, metrics_table, run_eval
from .policy import PolicyParams
from .scenario import ScenarioError, ScenarioParseError, generate_scenario, load_scenario, save_scenario
from .training import TrainConfig, train, write_log

EXIT_OK, EXIT_INVALID, EXIT_MISSION_FAILED = 0, 1, 2


def _load_chromosome(path) -> tuple[int, ...]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    genes = data["chromosome"] if isinstance(data, dict) else data
    return tuple(int(g) for g in genes)


def _emit(metrics, table: str | None = None) -> None:
    print(metrics.to_json())
    if table:
        print(table, end="")


def cmd_gen_scenario(args) -> int:
    sc = generate_scenario(args.seed, args.n_points, args.grid, args.bounds)
    save_scenario(sc, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = TrainConfig(epochs=args.epochs, batch=args.batch, episode_cap=args.episode_cap,
                      learning_rate=args.lr, gamma=args.gamma, seed=args.seed,
                      clip_norm=None if args.clip_norm <= 0 else args.clip_norm,
                      checkpoint_every=args.checkpoint_every, checkpoint_dir=args.checkpoint_dir)
    result = train(sc, cfg)
    result.params.save(args.out)
    if args.log:
        write_log(result.reward_log, args.log)
    tail = result.reward_log[-50:]
    print(json.dumps({"checkpoint": str(args.out), "epochs": len(result.reward_log),
                      "final50_mean_reward": sum(tail) / len(tail),
                      "final50_success": sum(result.success_log[-50:]) / len(tail)}))
    return EXIT_OK


def _solution(args):
    if args.checkpoint:
        return PolicyParams.load(args.checkpoint)
    if args.chromosome:
        return _load_chromosome(args.chromosome)
    raise ValueError("one of --checkpoint or --chromosome is required")


def cmd_eval(args) -> int:
    sc = load_scenario(args.scenario)
    metrics, trace, episode = run_eval(sc, _solution(args), args.mode, args.seed)
    if args.trace:
        export_route_trace(trace, args.trace)
    if args.episode_log:
        Path(args.episode_log).write_text(episode.to_jsonl(), encoding="utf-8")
    _emit(metrics, metrics_table(metrics, args.mode))
    return EXIT_MISSION_FAILED if args.strict and not metrics.success else EXIT_OK


def cmd_ga(args) -> int:
    sc = load_scenario(args.scenario)
    params = GAParams(pop=args.pop, generations=args.generations, elite=args.elite,
                      tourney_k=args.tourney_k, p_cx=args.p_cx, p_mut=args.p_mut, seed=args.seed)
    res = ga_run(sc, params)
    Path(args.out).write_text(json.dumps({"chromosome": list(res.best), "fitness": res.best_fitness,
                                          "seed": args.seed}) + "\n", encoding="utf-8")
    if args.history:
        write_log(res.history, args.history, ("generation", "best_fitness"))
    print(json.dumps({"chromosome": str(args.out), "fitness": res.best_fitness,
                      "evaluations": res.evaluations, "success": res.episode.success}))
    return EXIT_MISSION_FAILED if args.strict and not res.episode.success else EXIT_OK


def cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    env = Env(sc)
    rl, _, _ = run_eval(env, PolicyParams.load(args.checkpoint), "greedy")
    ga, _, _ = run_eval(env, _load_chromosome(args.chromosome))
    print(json.dumps({"DRL": rl.to_dict(), "GA": ga.to_dict()}, sort_keys=True))
    print(compare_report(rl, ga), end="")
    failed = not (rl.success and ga.success)
    return EXIT_MISSION_FAILED if args.strict and failed else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which means mission failure here
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rendezvous-rl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-scenario", help="generate a grid scenario")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--n-points", type=int, default=12)
    g.add_argument("--grid", type=int, default=4)
    g.add_argument("--bounds", type=float, default=20_000.0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_scenario)

    t = sub.add_parser("train", help="train the policy with REINFORCE")
    t.add_argument("--scenario", required=True)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--batch", type=int, default=1)
    t.add_argument("--episode-cap", type=int, default=None)
    t.add_argument("--lr", type=float, default=0.005)
    t.add_argument("--gamma", type=float, default=1.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--clip-norm", type=float, default=10.0, help="<= 0 disables clipping")
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.add_argument("--checkpoint-dir", default=None)
    t.add_argument("--out", required=True, help="final checkpoint path")
    t.add_argument("--log", help="two-column reward log")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint or chromosome")
    e.add_argument("--scenario", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--chromosome")
    e.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--trace", help="route trace CSV")
    e.add_argument("--episode-log", help="per-step JSON lines")
    e.add_argument("--strict", action="store_true")
    e.set_defaults(fn=cmd_eval)

    ga = sub.add_parser("ga", help="run the genetic-algorithm baseline")
    ga.add_argument("--scenario", required=True)
    ga.add_argument("--pop", type=int, default=50)
    ga.add_argument("--generations", type=int, default=100)
    ga.add_argument("--elite", type=int, default=2)
    ga.add_argument("--tourney-k", type=int, default=3)
    ga.add_argument("--p-cx", type=float, default=0.8)
    ga.add_argument("--p-mut", type=float, default=0.1)
    ga.add_argument("--seed", type=int, default=0)
    ga.add_argument("--out", required=True, help="best chromosome (JSON)")
    ga.add_argument("--history", help="two-column best-fitness log")
    ga.add_argument("--strict", action="store_true")
    ga.set_defaults(fn=cmd_ga)

    c = sub.add_parser("compare", help="side-by-side DRL vs GA tables")
    c.add_argument("--scenario", required=True)
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--chromosome", required=True)
    c.add_argument("--strict", action="store_true")
    c.set_defaults(fn=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, ScenarioParseError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
