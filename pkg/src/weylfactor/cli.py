"""weylfactor command line.

Runs the commands in process, or against a running service with --server.
Exit codes: 0 ok, 1 usage, 2 inadmissible region, 3 fixed-point collision,
4 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml
from pydantic import ValidationError

from . import pipeline
from .schemas import RunConfig, RunResult


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(pipeline.EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair(kind=float):
    def parse(text):
        parts = text.split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
        return [kind(p) for p in parts]
    return parse


def _sigma(text):
    if text not in ("1", "+1", "-1"):
        raise argparse.ArgumentTypeError("sigma is +1 or -1")
    return int(text)


def _tol(text):
    name, _, val = text.partition("=")
    if not name or not val:
        raise argparse.ArgumentTypeError("tolerance override looks like NAME=VALUE")
    return name, float(val)


def _config_flags(p):
    g = p.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", type=Path, help="YAML file with a nested run configuration")
    g.add_argument("--family", choices=["eps0", "eps1", "kasner", "emd3"])
    g.add_argument("--sigma", type=_sigma)
    g.add_argument("--class", dest="cls", choices=["i", "ii", "iii", "iv"])
    g.add_argument("--form", choices=["A", "B"], help="two-dimensional signature of the Weyl block")
    g.add_argument("--inverse", action="store_true", default=None, help="use M^-1 (Delta -> 1/Delta)")
    for name in ("m", "omega", "h1", "h2", "P", "Q"):
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--mode", dest="kasner_mode", choices=["canonical", "meromorphic"])
    g.add_argument("--c1", choices=["zero", "regularizing"])
    g.add_argument("--rho", type=_pair(), metavar="LO,HI")
    g.add_argument("--v", type=_pair(), metavar="LO,HI")
    g.add_argument("--n", type=_pair(int), metavar="NRHO,NV")
    g.add_argument("--point", type=_pair(), metavar="RHO,V", help="also factorize at this point")
    g.add_argument("--map", help="chart map applied by solve")
    g.add_argument("--chart-x1", type=_pair(), metavar="LO,HI")
    g.add_argument("--chart-x2", type=_pair(), metavar="LO,HI")
    g.add_argument("--chart-n", type=_pair(int), metavar="N1,N2")
    g.add_argument("--extension", choices=["smooth", "jump_1", "jump_2", "jump_3"])
    g.add_argument("--anchor-value", type=float)
    g.add_argument("--perturb", type=float, help="relative noise on M (negative control)")
    g.add_argument("--seed", type=int)
    g.add_argument("--tol", type=_tol, action="append", metavar="NAME=VALUE")


def _io_flags(p):
    p.add_argument("-q", "--quiet", action="store_true", help="no summary on standard output")
    p.add_argument("--out", type=Path, default=Path("weylfactor-out"), help="output directory")
    p.add_argument("--server", help="base URL of a running weylfactor service")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weylfactor", description="Weyl metrics from monodromy factorization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [("factorize", "Delta grid and factor tables"),
                       ("solve", "metric components on the grid (and chart)"),
                       ("verify", "run the numerical checks")]:
        p = sub.add_parser(name, help=text)
        _config_flags(p)
        _io_flags(p)
        if name == "verify":
            p.add_argument("--from", dest="from_dir", type=Path, help="directory written by solve")
    p = sub.add_parser("sweep", help="scan one parameter")
    _config_flags(p)
    _io_flags(p)
    p.add_argument("--param", required=True, choices=["m", "P", "Q", "h1", "h2", "omega"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p = sub.add_parser("catalog", help="A-metrics and the data producing each")
    p.add_argument("--check", action="store_true", help="pull back and compare at 100 chart points")
    p.add_argument("--m", type=float, default=1.0)
    _io_flags(p)
    return parser


def load_config(args) -> RunConfig:
    data = {}
    if args.config is not None:
        data = yaml.safe_load(args.config.read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError("the config file must hold a mapping")
    simple = ["family", "sigma", "form", "inverse", "m", "omega", "h1", "h2", "P", "Q", "kasner_mode",
              "c1", "point", "map", "extension", "anchor_value", "perturb", "seed"]
    for key in simple:
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if args.cls is not None:
        data.pop("cls", None)
        data["class"] = args.cls
    for key, attrs in (("grid", ("rho", "v", "n")), ("chart", ("chart_x1", "chart_x2", "chart_n"))):
        vals = [getattr(args, a) for a in attrs]
        if any(x is not None for x in vals):
            sect = dict(data.get(key) or {})
            for field, x in zip(("x1", "x2", "n"), vals):
                if x is not None:
                    sect[field] = x
            data[key] = sect
    if args.tol:
        data["tolerances"] = {**data.get("tolerances", {}), **dict(args.tol)}
    return RunConfig.model_validate(data)


def _remote(server: str, method: str, path: str, **kw) -> RunResult:
    import httpx
    r = httpx.request(method, server.rstrip("/") + path, timeout=600.0, **kw)
    body = r.json()
    if r.status_code != 200:
        raise pipeline.PipelineError(body.get("error", r.text), int(body.get("exit_code", pipeline.EXIT_USAGE)))
    return RunResult.model_validate(body)


def _read_solution(path: Path) -> dict[str, str]:
    files = {}
    for name in ("solution.csv", "metadata.json"):
        f = path / name
        if not f.exists():
            raise pipeline.PipelineError(f"{f} not found", pipeline.EXIT_USAGE)
        files[name] = f.read_text()
    return files


def execute(args) -> RunResult:
    cmd = args.command
    if cmd == "catalog":
        if args.server:
            return _remote(args.server, "GET", "/catalog", params={"check": args.check, "m": args.m})
        return pipeline.catalog(check=args.check, m=args.m)
    if cmd == "verify" and args.from_dir is not None:
        sol = _read_solution(args.from_dir)
        if args.server:
            return _remote(args.server, "POST", "/verify", json={"solution": sol})
        return pipeline.verify(RunConfig(), solution=sol)
    cfg = load_config(args)
    payload = cfg.model_dump(by_alias=True)
    if cmd == "sweep":
        try:
            values = [float(x) for x in args.values.split(",")]
        except ValueError:
            raise pipeline.PipelineError(f"bad --values {args.values!r}", pipeline.EXIT_USAGE)
        if args.server:
            return _remote(args.server, "POST", "/sweep",
                           json={"config": payload, "param": args.param, "values": values})
        return pipeline.sweep(cfg, args.param, values)
    if args.server:
        body = {"config": payload} if cmd == "verify" else payload
        return _remote(args.server, "POST", f"/{cmd}", json=body)
    return getattr(pipeline, cmd)(cfg)


def _write(result: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(result.files.items()):
        (out / name).write_text(text)


def _show(result: RunResult) -> str:
    s = result.summary
    if "table" in s:
        return s["table"]
    return json.dumps(s, indent=2, sort_keys=True, default=str)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        result = execute(args)
    except ValidationError as e:
        print(f"weylfactor: invalid configuration\n{e}", file=sys.stderr)
        return pipeline.EXIT_USAGE
    except pipeline.PipelineError as e:
        print(f"weylfactor: {e}", file=sys.stderr)
        return e.code
    except (ValueError, OSError, yaml.YAMLError) as e:
        print(f"weylfactor: {e}", file=sys.stderr)
        return pipeline.EXIT_USAGE
    for w in result.warnings:
        print(f"WARNING: {w}", file=sys.stderr)
    _write(result, args.out)
    if not args.quiet:
        print(_show(result))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
