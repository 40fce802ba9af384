"""Command-line entry point tying configs, backends, and pipelines together.

Subcommands: run, evaluate, label-states, replay-verify, export-metrics.
Exit codes: 0 success, 2 configuration error, 3 backend failure beyond
tolerance.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import tempfile
from pathlib import Path

from langrl.backends import (
    Backend,
    BackendError,
    HttpBackend,
    MockBackend,
    ReplayBackend,
    SamplingParams,
    check_endpoint_conformance,
)
from langrl.core import EnvKind
from langrl.envs.breakthrough import BreakthroughEnv
from langrl.envs.frozenlake import FrozenLakeEnv
from langrl.envs.maze import MazeEnv, load_layout
from langrl.envs.opponents import OpponentKind, OpponentPolicy
from langrl.envs.tictactoe import TicTacToeEnv
from langrl.harness.config import ConfigError, RunConfig
from langrl.harness.metrics_export import EmptyRun, write_metrics_csv
from langrl.oracle_backend import OracleBackend
from langrl.oracles import MctsConfig, label_to_record, mc_winrate, write_labels_jsonl
from langrl.pipelines import (
    ActorCriticConfig,
    GpiConfig,
    PipelineBackends,
    build_state_dataset,
    evaluate_policy,
    hash_tree,
    maze_start_states,
    run_actor_critic,
    run_language_gpi,
    run_td_training,
)
from langrl.pipelines.checkpoints import atomic_write

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3


def build_env(cfg: RunConfig):
    kind = cfg.get("env", "kind")
    if kind == "tictactoe":
        return TicTacToeEnv(first_to_move=cfg.get("env", "first_to_move", "O"))
    if kind == "breakthrough":
        return BreakthroughEnv()
    if kind == "frozenlake":
        return FrozenLakeEnv(
            slippery=cfg.get_bool("env", "slippery", False),
            step_cap=cfg.get_int("env", "step_cap", 16),
        )
    if kind == "maze":
        layout = load_layout(cfg.get("env", "layout"))
        return MazeEnv(layout, step_cap=cfg.get_int("env", "step_cap", 50))
    raise ConfigError(f"unknown env kind {kind!r}")


def _base_backend(cfg: RunConfig, role: str, env) -> Backend:
    kind = cfg.get("backends", role, "oracle")
    if kind == "oracle":
        layout = env.layout if isinstance(env, MazeEnv) else None
        return OracleBackend(env.kind, maze_layout=layout)
    if kind == "mock":
        return MockBackend(cfg.get("backends", f"{role}.script_path"))
    if kind == "http":
        return HttpBackend(
            base_url=cfg.get("backends", f"{role}.base_url"),
            model_name=cfg.get("backends", f"{role}.model_name"),
            api_key_env=cfg.get("backends", f"{role}.api_key_env", "OPENAI_API_KEY"),
            timeout=cfg.get_float("backends", f"{role}.timeout", 60.0),
            max_retries=cfg.get_int("backends", f"{role}.max_retries", 3),
            max_in_flight=cfg.get_int("backends", f"{role}.max_in_flight", 8),
        )
    if kind == "replay":
        return ReplayBackend(cfg.get("backends", "cache_dir"), strict=True)
    raise ConfigError(f"unknown backend kind {kind!r}")


def build_backends(cfg: RunConfig, env) -> PipelineBackends:
    mode = cfg.get("run", "mode")
    roles = {}
    for role in ("policy", "value", "aggregator"):
        base = _base_backend(cfg, role, env)
        if mode == "record":
            cache = Path(cfg.get("backends", "cache_dir")) / role
            base = ReplayBackend(cache, strict=False, record_with=base)
        elif mode == "replay":
            cache = Path(cfg.get("backends", "cache_dir")) / role
            base = ReplayBackend(cache, strict=True)
        roles[role] = base
    return PipelineBackends(
        policy=roles["policy"], value=roles["value"], aggregator=roles["aggregator"]
    )


def sampling_params(cfg: RunConfig) -> SamplingParams:
    return SamplingParams(
        temperature=cfg.get_float("hyperparameters", "temperature", 1.0),
        top_k=cfg.get_int("hyperparameters", "top_k", 50),
        top_p=cfg.get_float("hyperparameters", "top_p", 0.95),
        max_tokens=cfg.get_int("hyperparameters", "max_tokens", 512),
    )


def build_opponent(cfg: RunConfig) -> OpponentPolicy:
    kind = OpponentKind(cfg.get("opponent", "kind", "uniform_random"))
    mcts_config = None
    if kind is OpponentKind.MCTS:
        mcts_config = MctsConfig(
            uct_c=cfg.get_float("opponent", "mcts_uct_c", 1.0),
            simulations=cfg.get_int("opponent", "mcts_simulations", 1000),
            rollouts_per_eval=cfg.get_int("opponent", "mcts_rollouts", 100),
        )
    return OpponentPolicy(
        kind=kind, seed=cfg.get_int("opponent", "seed", 0), mcts_config=mcts_config
    )


def _dataset_states(cfg: RunConfig, limit: int):
    grid = [int(x) for x in cfg.get("dataset", "sim_grid").split(",")]
    rollouts = [int(x) for x in cfg.get("dataset", "rollout_grid").split(",")]
    games = cfg.get_int("dataset", "games_per_pair", 1)
    dataset = build_state_dataset(
        grid, rollouts, games, seed=cfg.get_int("run", "seed", 0)
    )
    states = list(dataset.train) + list(dataset.test)
    return states[:limit] if limit else states


def _run_pipeline(cfg: RunConfig, output_dir: Path) -> None:
    env = build_env(cfg)
    backends = build_backends(cfg, env)
    params = sampling_params(cfg)
    seed = cfg.get_int("run", "seed", 0)
    pipeline = cfg.get("run", "pipeline")
    output_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(output_dir / "resolved_config.cfg", cfg.serialize())
    if pipeline == "actor_critic":
        ac = ActorCriticConfig(
            trajectories=cfg.get_int("hyperparameters", "trajectories"),
            k_mc=cfg.get_int("hyperparameters", "k_mc"),
            n_sample=cfg.get_int("hyperparameters", "n_sample"),
            top_m=cfg.get_int("hyperparameters", "top_m"),
            k_buffer=cfg.get_int("hyperparameters", "k_buffer"),
            parallel=cfg.get_int("hyperparameters", "parallel"),
            rollout_cap=cfg.get_int("hyperparameters", "rollout_cap", 100),
            agent_side=cfg.get("env", "first_to_move", "O"),
        )
        opponent = build_opponent(cfg)
        run_actor_critic(
            env, opponent, ac, backends,
            iterations=cfg.get_int("hyperparameters", "iterations", 1),
            run_dir=output_dir, seed=seed, params=params,
        )
    elif pipeline == "td_train":
        states = _dataset_states(cfg, cfg.get_int("dataset", "state_limit", 0))
        rollout_kind = cfg.get("dataset", "rollout_policy", "uniform_random")
        if rollout_kind == "mcts":
            policy = OpponentPolicy(
                OpponentKind.MCTS,
                mcts_config=MctsConfig(
                    uct_c=cfg.get_float("dataset", "mcts_uct_c", 1.0),
                    simulations=cfg.get_int("dataset", "mcts_simulations", 1000),
                    rollouts_per_eval=cfg.get_int("dataset", "mcts_rollouts", 100),
                ),
            )
        else:
            policy = OpponentPolicy(OpponentKind.UNIFORM_RANDOM)
        run_td_training(
            env, states, policy,
            lookahead_steps=cfg.get_int("hyperparameters", "lookahead_l"),
            variations=cfg.get_int("hyperparameters", "variations_k"),
            backends=backends,
            iterations=cfg.get_int("hyperparameters", "iterations", 1),
            run_dir=output_dir, seed=seed, params=params,
        )
    elif pipeline == "gpi":
        assert isinstance(env, MazeEnv)
        gpi_cfg = GpiConfig(
            variations=cfg.get_int("hyperparameters", "variations_k"),
            lookahead_steps=cfg.get_int("hyperparameters", "lookahead_l"),
            eval_starts=cfg.get_int("hyperparameters", "eval_starts"),
            seeds_per_start=cfg.get_int("hyperparameters", "seeds_per_start"),
            step_cap=cfg.get_int("env", "step_cap", 50),
        )
        starts = maze_start_states(
            env.layout, gpi_cfg.eval_starts, seed=seed, step_cap=gpi_cfg.step_cap
        )
        from langrl.pipelines import TraceWriter

        trace = TraceWriter()
        metrics = run_language_gpi(env, gpi_cfg, backends, starts, seed=seed,
                                   params=params, trace=trace)
        it_dir = output_dir / "iteration_0"
        atomic_write(it_dir / "trace.jsonl", trace.to_jsonl())
        atomic_write(
            it_dir / "metrics.json",
            json.dumps(metrics.to_dict(), sort_keys=True, indent=1),
        )
    elif pipeline == "evaluate":
        metrics = evaluate_policy(
            env, backends.policy, build_opponent(cfg),
            n_games=cfg.get_int("hyperparameters", "eval_games"),
            seed=seed, agent_side=cfg.get("env", "first_to_move", "O"),
            params=params,
        )
        it_dir = output_dir / "iteration_0"
        atomic_write(
            it_dir / "metrics.json",
            json.dumps(metrics.to_dict(), sort_keys=True, indent=1),
        )
    else:  # pragma: no cover - validate() rejects unknown pipelines
        raise ConfigError(f"unknown pipeline {pipeline!r}")


def cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.mode:
        overrides["run.mode"] = args.mode
    cfg = RunConfig.load(args.config, overrides)
    output_dir = Path(args.output_dir or cfg.get("run", "output_dir", "run_output"))
    _run_pipeline(cfg, output_dir)
    print(f"run complete: {output_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    overrides = {"run.pipeline": "evaluate"}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    cfg = RunConfig.load(args.config, overrides)
    output_dir = Path(args.output_dir or cfg.get("run", "output_dir", "eval_output"))
    _run_pipeline(cfg, output_dir)
    metrics = json.loads((output_dir / "iteration_0" / "metrics.json").read_text())
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_label_states(args) -> int:
    if args.env != "breakthrough":
        raise ConfigError("only breakthrough state labeling is supported")
    from langrl.envs import breakthrough as bt

    env = BreakthroughEnv()
    sim_grid = [int(x) for x in args.sim_grid.split(",")]
    rollout_grid = [int(x) for x in args.rollout_grid.split(",")]
    dataset = build_state_dataset(
        sim_grid, rollout_grid, args.games_per_pair, seed=args.seed
    )
    states = (list(dataset.train) + list(dataset.test))[: args.limit or None]
    rng = random.Random(args.seed)
    policies = {
        bt.WHITE: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
        bt.BLACK: OpponentPolicy(OpponentKind.UNIFORM_RANDOM),
    }
    rows = []
    for board in states:
        label = mc_winrate(
            env, board, policies, args.rollouts, rng, threshold=args.threshold
        )
        rows.append(label_to_record(label, bt.board_text(board)))
    write_labels_jsonl(args.out, rows)
    print(f"wrote {len(rows)} labels to {args.out}")
    return EXIT_OK


def cmd_replay_verify(args) -> int:
    if args.endpoint:
        checks = check_endpoint_conformance(args.endpoint, args.model_name)
        failed = [c for c in checks if not c[1]]
        for name, passed, detail in checks:
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return EXIT_OK if not failed else EXIT_BACKEND
    if not args.config:
        raise ConfigError("replay-verify needs --config or --endpoint")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cache = tmp / "cache"
        record_cfg = RunConfig.load(
            args.config,
            {"run.mode": "record", "backends.cache_dir": str(cache)},
        )
        _run_pipeline(record_cfg, tmp / "recorded")
        replay_cfg = RunConfig.load(
            args.config,
            {"run.mode": "replay", "backends.cache_dir": str(cache)},
        )
        _run_pipeline(replay_cfg, tmp / "replayed")
        recorded = {
            k: v for k, v in hash_tree(tmp / "recorded").items()
            if k != "resolved_config.cfg"
        }
        replayed = {
            k: v for k, v in hash_tree(tmp / "replayed").items()
            if k != "resolved_config.cfg"
        }
        if recorded == replayed:
            print(f"replay verified: {len(recorded)} artifacts byte-identical")
            return EXIT_OK
        only_one_side = set(recorded) ^ set(replayed)
        mismatched = {k for k in recorded if recorded.get(k) != replayed.get(k)}
        print(f"replay mismatch: {sorted(mismatched | only_one_side)}", file=sys.stderr)
        return EXIT_BACKEND


def cmd_export_metrics(args) -> int:
    write_metrics_csv(args.run_dir, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langrl", description="Language-space RL experiment harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured pipeline")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--mode", choices=("live", "record", "replay"))
    p_run.add_argument("--output-dir")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("evaluate", help="evaluate the configured policy backend")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--output-dir")
    p_eval.set_defaults(func=cmd_evaluate)

    p_label = sub.add_parser("label-states", help="Monte-Carlo advantage labels")
    p_label.add_argument("--env", default="breakthrough")
    p_label.add_argument("--rollouts", type=int, default=100)
    p_label.add_argument("--threshold", type=float, default=0.55)
    p_label.add_argument("--sim-grid", default="2,10")
    p_label.add_argument("--rollout-grid", default="1,10")
    p_label.add_argument("--games-per-pair", type=int, default=1)
    p_label.add_argument("--limit", type=int, default=0)
    p_label.add_argument("--seed", type=int, default=0)
    p_label.add_argument("--out", default="labels.jsonl")
    p_label.set_defaults(func=cmd_label_states)

    p_verify = sub.add_parser(
        "replay-verify",
        help="record a run then replay it and compare artifacts, or probe an endpoint",
    )
    p_verify.add_argument("--config")
    p_verify.add_argument("--endpoint")
    p_verify.add_argument("--model-name", default="served-model")
    p_verify.set_defaults(func=cmd_replay_verify)

    p_export = sub.add_parser("export-metrics", help="flatten run metrics to CSV")
    p_export.add_argument("--run-dir", required=True)
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=cmd_export_metrics)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EmptyRun, FileNotFoundError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendError, RuntimeError) as err:
        print(f"backend failure: {err}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
