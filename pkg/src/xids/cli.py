"""Command-line client for the pipeline service.

Every stage command posts the config to the service API.  By default an
in-process app instance handles the call, so no server is needed; pass
--server to talk to a running one instead.  Exit codes: 0 success,
1 usage error, 2 data error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__
from .errors import UsageError, XidsError

STAGE_HELP = {
    "preprocess": "encode the CSV, fit scaling on the train split, write preprocessor.json",
    "train-vae": "train the representation model on the train split",
    "train-teacher": "train the teacher classifier",
    "distill": "distill the teacher into the student",
    "evaluate": "score both classifiers on the test split and time inference",
    "explain": "write per-instance attribution reports",
    "report": "collect metrics into report.json / report.csv",
    "run": "run every stage in order",
}

EXIT_BY_KIND = {"usage": 1, "data": 2, "divergence": 3}


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="xids", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    for name, help_line in STAGE_HELP.items():
        p = sub.add_parser(name, help=help_line, description=help_line)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="override the artifact directory")
        p.add_argument("--train-fraction", type=float, help="override the train split fraction")
        feats = p.add_mutually_exclusive_group()
        feats.add_argument(
            "--latent", action="store_true", help="classify on the learned representation"
        )
        feats.add_argument(
            "--raw", action="store_true", help="classify on the encoded features directly"
        )
        p.add_argument("--target-class", help="class (name or index) the explanation targets")
        p.add_argument("--model", choices=["teacher", "student"], help="model to explain")
        p.add_argument("--instances", help="comma-separated test row positions to explain")
        p.add_argument("--server", help="base URL of a running service (default: in-process)")

    serve = sub.add_parser("serve", help="run the HTTP service", description="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    synth = sub.add_parser(
        "synth-data",
        help="write a seeded synthetic dataset (data.csv + schema.json)",
        description="write a seeded synthetic dataset (data.csv + schema.json)",
    )
    synth.add_argument("--out", required=True, help="directory for data.csv and schema.json")
    synth.add_argument("--rows", type=int, default=1000)
    synth.add_argument("--features", type=int, default=8)
    synth.add_argument("--classes", type=int, default=2)
    synth.add_argument("--separation", type=float, default=3.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--missing-rate", type=float, default=0.0)
    synth.add_argument("--with-nominal", action="store_true")
    return parser


def _read_config_doc(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {p} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise UsageError(f"config file {p} must hold a JSON object")
    return doc


def _parse_instances(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError:
        raise UsageError(f"--instances must be comma-separated integers, got {raw!r}") from None


def _overrides(args: argparse.Namespace) -> dict:
    over: dict = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["out"] = args.out
    if args.train_fraction is not None:
        over["train_fraction"] = args.train_fraction
    if args.latent:
        over["features"] = "latent"
    if args.raw:
        over["features"] = "raw"
    explain: dict = {}
    if args.target_class is not None:
        explain["target_class"] = args.target_class
    if args.model is not None:
        explain["model"] = args.model
    if args.instances is not None:
        explain["instances"] = _parse_instances(args.instances)
    if explain:
        over["explain"] = explain
    return over


def _post_stage(stage: str, payload: dict, server: str | None) -> httpx.Response:
    if server:
        try:
            with httpx.Client(base_url=server, timeout=None) as client:
                return client.post(f"/pipeline/{stage}", json=payload)
        except httpx.HTTPError as e:
            raise UsageError(f"could not reach {server}: {e}") from e

    async def go() -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service.internal", timeout=None
        ) as client:
            return await client.post(f"/pipeline/{stage}", json=payload)

    return asyncio.run(go())


def _finish(resp: httpx.Response) -> int:
    try:
        body = resp.json()
    except ValueError:
        print(f"error (usage): service returned a non-JSON body (HTTP {resp.status_code})",
              file=sys.stderr)
        return 1
    if resp.status_code == 200:
        print(json.dumps(body, indent=2, sort_keys=True))
        return 0
    kind = body.get("error_kind", "usage")
    message = body.get("message", f"HTTP {resp.status_code}")
    print(f"error ({kind}): {message}", file=sys.stderr)
    return EXIT_BY_KIND.get(kind, 1)


def _run_stage_command(args: argparse.Namespace) -> int:
    doc = _read_config_doc(args.config)
    payload = {"config": doc, "overrides": _overrides(args)}
    return _finish(_post_stage(args.command, payload, args.server))


def _run_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("xids.service.app:app", host=args.host, port=args.port)
    return 0


def _run_synth(args: argparse.Namespace) -> int:
    from .synthetic import write_synthetic

    csv_path, schema_path = write_synthetic(
        args.out,
        n_rows=args.rows,
        n_features=args.features,
        n_classes=args.classes,
        separation=args.separation,
        seed=args.seed,
        missing_rate=args.missing_rate,
        with_nominal=args.with_nominal,
    )
    print(json.dumps({"csv": str(csv_path), "schema": str(schema_path)}, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "serve":
            return _run_serve(args)
        if args.command == "synth-data":
            return _run_synth(args)
        return _run_stage_command(args)
    except XidsError as e:
        print(f"error ({e.kind}): {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
