"""Command-line entry point.

    specforge run      --input m.ml --backend oracle --out out/
    specforge plan     --input m.ml --out out/
    specforge specgen  --input m.ml --out out/ --domain-knowledge dk/
    specforge reason   --input m.ml --out out/
    specforge validate --input m.ml --out out/ --max-attempts 10
    specforge exec     --input m.ml --case case.json

`exec` runs one entry-function test case through the interpreter; it exists
so a MiniLang codebase can also be driven through the generic run-command
harness like any foreign system under test.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import oracle, pipeline
from .backend.base import BackendConfig
from .codebase import load_minilang_file
from .errors import SpecforgeError
from .validator import HarnessConfig


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="MiniLang module or call-graph manifest")
    p.add_argument("--manifest", action="store_true",
                   help="treat --input as a JSON call-graph manifest")
    p.add_argument("--backend", choices=("oracle", "remote", "replay"), default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--bound", type=int, default=None)
    p.add_argument("--domain-knowledge", default=None)
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--endpoint", default=None, help="remote backend base URL")
    p.add_argument("--model", default=None)
    p.add_argument("--api-key-env", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--run-command", default=None,
                   help="SUT command template with {input_file} and {workdir}")
    p.add_argument("--reference-command", default=None)
    p.add_argument("--timeout", type=float, default=None)


def parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SpecforgeError(f"config line is not key=value: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_INT_KEYS = {"batch_size", "workers", "max_attempts", "bound", "retries",
             "max_concurrent_requests"}
_FLOAT_KEYS = {"timeout", "timeout_seconds"}


def build_run_config(args: argparse.Namespace) -> pipeline.RunConfig:
    file_cfg = parse_config_file(args.config) if args.config else {}

    def pick(cli_value, key: str, default):
        if cli_value is not None:
            return cli_value
        if key in file_cfg:
            raw = file_cfg[key]
            if key in _INT_KEYS:
                return int(raw)
            if key in _FLOAT_KEYS:
                return float(raw)
            if isinstance(default, bool):
                return raw.lower() in ("1", "true", "yes")
            return raw
        return default

    backend = BackendConfig(
        endpoint=pick(args.endpoint, "endpoint", ""),
        model=pick(args.model, "model", ""),
        api_key_env=pick(args.api_key_env, "api_key_env", "SPECFORGE_API_KEY"),
        batch_size=pick(args.batch_size, "batch_size", 8),
        max_concurrent_requests=pick(None, "max_concurrent_requests", 16),
        timeout_seconds=pick(args.timeout, "timeout_seconds", 60.0),
        retries=pick(None, "retries", 2),
        cache_dir=pick(args.cache_dir, "cache_dir", None),
    )
    harness = HarnessConfig(
        run_command=pick(args.run_command, "run_command", None),
        reference_command=pick(args.reference_command, "reference_command", None),
        timeout_seconds=pick(args.timeout, "timeout", 10.0),
        max_attempts=pick(args.max_attempts, "max_attempts", 10),
        env_setup_doc=pick(None, "env_setup_doc", None),
    )
    overrides: dict[str, str] = {}
    for pair in (file_cfg.get("phase_overrides") or "").split(","):
        if "=" in pair:
            fn, label = pair.split("=", 1)
            overrides[fn.strip()] = label.strip()
    return pipeline.RunConfig(
        input_path=args.input,
        out_dir=args.out,
        manifest=bool(args.manifest or file_cfg.get("manifest", "").lower() == "true"),
        backend_kind=pick(args.backend, "backend", "oracle"),
        backend=backend,
        harness=harness,
        workers=pick(args.workers, "workers", 8),
        batch_size=pick(args.batch_size, "batch_size", 8),
        bound=pick(args.bound, "bound", 8),
        domain_knowledge_dir=pick(args.domain_knowledge, "domain_knowledge", None),
        phase_overrides=overrides,
    )


def cmd_exec(args: argparse.Namespace) -> int:
    cb = load_minilang_file(args.input)
    doc = json.loads(Path(args.case).read_text(encoding="utf-8"))
    outcome = oracle.eval_function(
        cb, doc["entry"], [int(a) for a in doc["args"]], step_budget=args.step_budget
    )
    if isinstance(outcome, oracle.Returned):
        print(outcome.value)
        return 0
    if isinstance(outcome, oracle.RuntimeFault):
        print(f"runtime error: {outcome.kind}", file=sys.stderr)
        return 2
    print("nonterminated: step budget exhausted", file=sys.stderr)
    return 3


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="specforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "plan", "specgen", "reason", "validate"):
        p = sub.add_parser(name)
        _add_common(p)

    p_exec = sub.add_parser("exec")
    p_exec.add_argument("--input", required=True)
    p_exec.add_argument("--case", required=True, help="JSON file: {entry, args}")
    p_exec.add_argument("--step-budget", type=int, default=100_000)

    args = parser.parse_args(argv)
    if args.command == "exec":
        return cmd_exec(args)

    cfg = build_run_config(args)
    try:
        if args.command == "run":
            report = pipeline.run_pipeline(cfg)
            for line in report.summary_lines():
                print(line)
        elif args.command == "plan":
            pipeline.stage_plan(cfg)
            print(f"plan written to {cfg.out() / pipeline.PLAN_FILE}")
        elif args.command == "specgen":
            state = pipeline.stage_specgen(cfg)
            print(f"specs: {len(state.specs)} generated, {len(state.failures)} failed")
        elif args.command == "reason":
            index = pipeline.stage_reason(cfg)
            total = sum(v["bugs"] for v in index["functions"].values())
            print(f"potential bugs: {total}")
        elif args.command == "validate":
            report = pipeline.stage_validate(cfg)
            for line in report.summary_lines():
                print(line)
    except SpecforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
