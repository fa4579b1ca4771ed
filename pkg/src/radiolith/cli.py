"""``radiolith`` command line: run pipelines, validate them, or apply one op.

Exit status is 0 on success, 1 when processing fails and 2 for usage
errors (bad flags, unknown ops, invalid pipeline files).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import _backend, pipeline
from .io import ImageFormatError, encode_label_map, load_image, save_image

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_param_flags(parser, op: pipeline.Operation):
    for name, schema in op.params.items():
        if name == "seed":  # served by the shared --seed flag
            continue
        dest = "param_" + name
        hint = f"default {schema.default}" if schema.default is not pipeline._REQUIRED else "required"
        if schema.choices:
            hint += f"; one of {', '.join(schema.choices)}"
        if schema.kind is bool:
            parser.add_argument(_flag(name), dest=dest, action=argparse.BooleanOptionalAction,
                                default=None, help=hint)
        else:
            parser.add_argument(_flag(name), dest=dest, type=schema.kind, default=None, help=hint)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radiolith", description="Radiograph processing pipelines.")
    parser.add_argument("--backend", choices=_backend.available(), help="kernel backend (default: fastest)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a pipeline file")
    run.add_argument("pipeline", type=Path)
    run.add_argument("-i", "--input", type=Path, required=True)
    run.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int, default=None, help="override the pipeline's global seed")
    run.add_argument("--timings", action="store_true", help="record stage wall times in report.json")

    val = sub.add_parser("validate", help="check a pipeline file without running it")
    val.add_argument("pipeline", type=Path)

    sub.add_parser("ops", help="list available operations")

    op = sub.add_parser("op", help="apply a single operation")
    op_sub = op.add_subparsers(dest="op_name", required=True, metavar="<name>")
    for name in sorted(pipeline.REGISTRY):
        spec = pipeline.REGISTRY[name]
        p = op_sub.add_parser(name.replace("_", "-"), help=spec.summary, aliases=[name] if "_" in name else [])
        p.set_defaults(op_key=name)
        p.add_argument("-i", "--input", type=Path, required=True)
        p.add_argument("-o", "--output", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        p.add_argument("--border", default="reflect")
        p.add_argument("--threads", type=int, default=1)
        _add_param_flags(p, spec)
    return parser


def _cmd_run(args) -> int:
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.seed is not None and args.seed < 0:
        raise UsageError("--seed must be >= 0")
    try:
        spec = pipeline.parse_pipeline(args.pipeline)
    except pipeline.PipelineError as exc:
        raise UsageError(str(exc)) from None
    try:
        report = pipeline.run_pipeline(spec, args.input, args.output, seed=args.seed,
                                       threads=args.threads, timings=args.timings)
    except pipeline.PipelineRunError as exc:
        print(f"radiolith: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(report.stages)} stage(s) ok -> {args.output}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        spec = pipeline.parse_pipeline(args.pipeline)
    except pipeline.PipelineError as exc:
        raise UsageError(str(exc)) from None
    print(f"ok: {len(spec.stages)} stage(s), sha256 {spec.sha256}")
    return EXIT_OK


def _cmd_ops(args) -> int:
    for name in sorted(pipeline.REGISTRY):
        print(f"{name.replace('_', '-'):16s} {pipeline.REGISTRY[name].summary}")
    return EXIT_OK


def _cmd_op(args) -> int:
    name = args.op_key
    op = pipeline.REGISTRY[name]
    raw = {k: getattr(args, "param_" + k) for k in op.params
           if k != "seed" and getattr(args, "param_" + k) is not None}
    if "seed" in op.params and args.seed is not None:
        raw["seed"] = args.seed
    seed = 0 if args.seed is None else args.seed
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    try:
        params = pipeline.validate_params(name, raw)
        env = pipeline.Env(seed, pipeline.BorderPolicy.parse(args.border))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    img = load_image(args.input)
    with _backend.threads(args.threads):
        result = pipeline.run_stage(name, img, params, env)
    if name == "otsu":
        print(result.stats["level"])
    out = args.output
    if op.artifact == "csv":
        if out is None:
            sys.stdout.write(result.csv)
        else:
            out.write_text(result.csv, encoding="utf-8")
    elif op.artifact == "labels":
        if out is None:
            raise UsageError(f"{name} needs -o for its label map")
        out.write_bytes(encode_label_map(result.labels))
    elif out is not None:
        save_image(result.image, out)
    elif name != "otsu":
        raise UsageError(f"{name} needs -o for its output image")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.backend:
        _backend.set_backend(args.backend)
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "ops": _cmd_ops, "op": _cmd_op}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"radiolith: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageFormatError, ValueError, OSError) as exc:
        print(f"radiolith: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
