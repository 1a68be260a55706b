"""Command-line entry point.

Subcommands: finetune, train, eval, optimize, corpus-check. Machine-readable
output goes to stdout, diagnostics to stderr. Exit codes: 0 success, 1 usage,
2 environment, 3 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation, trainer
from .config import RunConfig, load_config
from .policy import ByteTokenizer, PolicyModel, PolicyParams, load_checkpoint, save_checkpoint
from .sandbox import Sandbox, SandboxEnvironmentError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ENVIRONMENT = 2
EXIT_INTERNAL = 3

log = logging.getLogger("perfrl")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfrl", description=__doc__)
    parser.add_argument("--config", help="YAML run config file")
    parser.add_argument("--corpus", help="training corpus path (JSONL)")
    parser.add_argument("--run-dir", dest="run_dir", help="run directory")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("--jobs", type=int, help="worker pool size")
    parser.add_argument("--rl-steps", dest="rl_steps", type=int, help="number of RL steps")
    parser.add_argument("--timeout", type=float, help="per-run execution timeout (s)")
    parser.add_argument("--instruction", help="prompt instruction text override")
    parser.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("finetune", help="supervised fine-tuning pass over the corpus")

    p_train = sub.add_parser("train", help="fine-tune then run the RL loop")
    p_train.add_argument("--resume", action="store_true", help="continue an interrupted run")
    p_train.add_argument(
        "--from-scratch", action="store_true",
        help="start from fresh parameters even if a fine-tuned checkpoint exists",
    )

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a test corpus")
    p_eval.add_argument("checkpoint", help="policy checkpoint file")
    p_eval.add_argument("--eval-corpus", dest="eval_corpus", help="test corpus (JSONL)")

    p_opt = sub.add_parser("optimize", help="optimize a single program")
    p_opt.add_argument("checkpoint", help="policy checkpoint file")
    p_opt.add_argument("source", help="program file to optimize")
    p_opt.add_argument("--tests", required=True,
                       help="JSON file: list of {input, expected_output}")

    sub.add_parser("corpus-check", help="report corpus executability")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "corpus": args.corpus,
        "run_dir": args.run_dir,
        "seed": args.seed,
        "jobs": args.jobs,
        "rl_steps": args.rl_steps,
        "timeout": args.timeout,
        "instruction": args.instruction,
        "eval_corpus": getattr(args, "eval_corpus", None),
    }
    return load_config(args.config, overrides)


def _make_model(cfg: RunConfig) -> PolicyModel:
    tok = ByteTokenizer()
    params = PolicyParams.initialize(
        tok.vocab_size, cfg.model.context, cfg.model.embed_dim, cfg.model.hidden_dim,
        seed=cfg.seed, scale=cfg.model.init_scale,
    )
    return PolicyModel(params, tok)


def _make_sandbox(cfg: RunConfig) -> Sandbox:
    import shlex

    interpreter = shlex.split(cfg.interpreter) if cfg.interpreter else None
    return Sandbox(interpreter=interpreter)


def _snapshot(cfg: RunConfig) -> None:
    run_dir = Path(cfg.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(run_dir / "config.yaml")


def cmd_finetune(cfg: RunConfig) -> int:
    tasks = corpus_mod.load_tasks(cfg.corpus)
    harness = _make_sandbox(cfg)
    tasks = corpus_mod.filter_executable(tasks, harness, cfg.train.timeout)
    model = _make_model(cfg)
    _snapshot(cfg)
    losses = trainer.fine_tune(model, tasks, cfg.train)
    run_dir = Path(cfg.run_dir)
    save_checkpoint(model.params, run_dir / "ft.ckpt")
    (run_dir / "ft_losses.json").write_text(json.dumps(losses))
    print(json.dumps({"checkpoint": str(run_dir / "ft.ckpt"), "batch_losses": losses}))
    return EXIT_OK


def cmd_train(cfg: RunConfig, resume: bool, from_scratch: bool) -> int:
    tasks = corpus_mod.load_tasks(cfg.corpus)
    harness = _make_sandbox(cfg)
    model = _make_model(cfg)
    run_dir = Path(cfg.run_dir)
    if not resume and not from_scratch and (run_dir / "ft.ckpt").exists():
        model.params = load_checkpoint(run_dir / "ft.ckpt")
    _snapshot(cfg)
    model, history = trainer.train(
        model, tasks, harness, cfg.train, run_dir, resume=resume
    )
    final = run_dir / "final.ckpt"
    save_checkpoint(model.params, final)
    print(json.dumps({
        "checkpoint": str(final),
        "steps": [s.__dict__ for s in history],
    }))
    return EXIT_OK


def cmd_eval(cfg: RunConfig, checkpoint: str) -> int:
    params = load_checkpoint(checkpoint)
    model = PolicyModel(params, ByteTokenizer())
    tasks = corpus_mod.load_tasks(cfg.eval_corpus or cfg.corpus)
    harness = _make_sandbox(cfg)
    report, results = evaluation.evaluate_model(
        model, tasks, harness, cfg.sampling,
        timeout=cfg.train.timeout, repeats=cfg.eval_repeats,
        instruction=cfg.instruction, noise_floor=cfg.noise_floor,
    )
    run_dir = Path(cfg.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    evaluation.save_results(results, run_dir / "eval_results.jsonl")
    (run_dir / "eval_report.json").write_text(report.to_json())
    print(report.render_table())
    print(report.to_json())
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, checkpoint: str, source_path: str, tests_path: str) -> int:
    params = load_checkpoint(checkpoint)
    model = PolicyModel(params, ByteTokenizer())
    source = Path(source_path).read_text(encoding="utf-8", errors="surrogateescape")
    raw_tests = json.loads(Path(tests_path).read_text(encoding="utf-8"))
    tests = [
        corpus_mod.UnitTest(input=str(t["input"]), expected_output=str(t["expected_output"]))
        for t in raw_tests
    ]
    task = corpus_mod.TaskInstance(
        id="cli-optimize", slow_source=source, fast_source=source, tests=tests
    )
    harness = _make_sandbox(cfg)
    result = evaluation.evaluate_task(
        model, task, harness, cfg.sampling,
        timeout=cfg.train.timeout, repeats=cfg.eval_repeats,
        instruction=cfg.instruction, noise_floor=cfg.noise_floor,
    )
    if result.baseline_runtime is None:
        log.error("input program does not pass its own tests; cannot establish a baseline")
        return EXIT_USAGE
    if not result.optimized:
        print(f"no improvement (baseline runtime {result.baseline_runtime:.4f}s)")
        return EXIT_OK
    # re-decode the surviving candidates to recover the fastest program text
    prompt = corpus_mod.build_prompt(task, cfg.instruction)
    from .sampling import beam_search, prompt_tokens_for

    beams = beam_search(model, prompt_tokens_for(model, prompt), cfg.sampling)[:2]
    best_text = None
    best_runtime = None
    for cand, record in zip(beams, result.candidates):
        if record.improved and (best_runtime is None or record.runtime < best_runtime):
            best_runtime = record.runtime
            best_text = model.tokenizer.decode(cand.tokens)
    print(best_text)
    return EXIT_OK


def cmd_corpus_check(cfg: RunConfig) -> int:
    tasks = corpus_mod.load_tasks(cfg.corpus)
    harness = _make_sandbox(cfg)
    kept = corpus_mod.filter_executable(list(tasks), harness, cfg.train.timeout)
    ratio = len(kept) / len(tasks) if tasks else 0.0
    print(json.dumps({
        "total": len(tasks),
        "executable": len(kept),
        "ratio": ratio,
        "executable_ids": [t.id for t in kept],
    }))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_from_args(args)
        if args.command == "finetune":
            return cmd_finetune(cfg)
        if args.command == "train":
            return cmd_train(cfg, resume=args.resume, from_scratch=args.from_scratch)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.checkpoint, args.source, args.tests)
        if args.command == "corpus-check":
            return cmd_corpus_check(cfg)
        log.error("unknown command %r", args.command)
        return EXIT_USAGE
    except (FileNotFoundError, corpus_mod.CorpusError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except SandboxEnvironmentError as exc:
        log.error("environment: %s", exc)
        return EXIT_ENVIRONMENT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
