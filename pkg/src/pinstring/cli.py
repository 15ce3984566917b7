"""Command-line entry point.

Every command writes CSV preceded by a ``#`` line recording the version, the
command and every parameter that affects the result. ``workers`` and
``output`` are left out so that outputs compare byte for byte across worker
counts. Exit codes: 0 success, 1 usage or invalid parameters, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, NumericalError, ValidationError
from .grid import SpaceTimeGrid, dyadic_grid
from .kernel import FORMS, PinnedKernel, f_value
from .probe import (
    CSV_FIELDS,
    double_point_grid_bound,
    double_points,
    hit_events,
    hit_probability,
    recurrence_experiment,
    second_moment_hit_bound,
)
from .sampler import sample_exact
from .selftest import run_selftest
from .spde import INITIAL_KINDS, SpdeConfig, integrate_spde
from .streams import rng_stream

NOT_RECORDED = ("workers", "output")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parameter schemas: name -> (parser, default, check, help)

def _int(lo=None):
    def check(v):
        return lo is None or v >= lo
    return int, check, f">= {lo}" if lo is not None else ""


def _float(lo=None, strict=False):
    def check(v):
        if not np.isfinite(v):
            return False
        if lo is None:
            return True
        return v > lo if strict else v >= lo
    return float, check, (f"> {lo}" if strict else f">= {lo}") if lo is not None else ""


def _choice(options):
    return str, (lambda v: v in options), "one of " + "|".join(options)


def _opt_float(lo=0.0):
    def parse(s):
        return None if str(s).lower() in ("", "none", "auto") else float(s)
    return parse, (lambda v: v is None or v > lo), f"> {lo} or auto"


def _p(kind, default, help_=""):
    parse, check, rule = kind
    return parse, default, check, rule, help_


FORM = _p(_choice(FORMS), "stationary", "kernel form")
SEED = _p(_int(0), 0, "64-bit seed")
WORKERS = _p(_int(1), 1, "worker processes (never changes results)")

SCHEMAS = {
    "fvalue": {"a": _p(_float(0.0), 0.0, "argument of F")},
    "cov": {"t1": _p(_float(0.0), 1.0), "x1": _p(_float(), 0.0),
            "t2": _p(_float(0.0), 2.0), "x2": _p(_float(), 0.0), "form": FORM},
    "sample": {"n": _p(_int(0), 1, "dyadic level"),
               "t_count": _p(_int(1), 4, "time indices 1..t_count"),
               "x_count": _p(_int(1), 4, "position indices 1..x_count"),
               "t_offset": _p(_float(0.0), 0.0), "dim": _p(_int(1), 1),
               "seed": SEED, "replica": _p(_int(0), 0), "form": FORM},
    "simulate": {"domain": _p(_choice(("line", "circle")), "line"),
                 "dx": _p(_float(0.0, True), 0.02), "dt": _p(_opt_float(), None, "default dx^2/4"),
                 "horizon": _p(_float(0.0, True), 0.25), "dim": _p(_int(1), 1),
                 "kappa": _p(_float(0.0, True), 0.5),
                 "initial": _p(_choice(INITIAL_KINDS[:2]), "pinned-brownian"),
                 "initial_scale": _p(_float(0.0, True), 1.0),
                 "extent": _p(_float(0.0), 1.0), "save_every": _p(_int(1), 25),
                 "seed": SEED, "replica": _p(_int(0), 0)},
    "hitprob": {"dim": _p(_int(1), 1), "n": _p(_int(0), 1),
                "delta": _p(_opt_float(), None, "default delta0*2^(-6n/5)"),
                "delta0": _p(_float(0.0, True), 1.0), "target": _p(_float(), 0.0, "every component"),
                "trials": _p(_int(1), 1000), "seed": SEED, "workers": WORKERS, "form": FORM},
    "doublepoints": {"dim": _p(_int(1), 1), "n": _p(_int(0), 1),
                     "mode": _p(_choice(("fixed-time", "simultaneous", "range")), "range"),
                     "tolerance": _p(_float(0.0, True), 0.05),
                     "min_sep": _p(_int(1), 2), "time": _p(_float(0.0), 0.0, "fixed-time slice"),
                     "seed": SEED, "replica": _p(_int(0), 0), "form": FORM},
    "recur": {"dim": _p(_int(1), 2), "N": _p(_int(2), 4), "delta": _p(_float(0.0, True), 0.5),
              "trials": _p(_int(1), 1000), "seed": SEED, "workers": WORKERS, "form": FORM},
    "bound": {"kind": _p(_choice(("hit", "double")), "hit"), "n": _p(_int(0), 1),
              "dim": _p(_int(1), 5), "delta0": _p(_float(0.0, True), 1.0), "form": FORM},
    "selftest": {"form": FORM},
}
for _schema in SCHEMAS.values():
    _schema["output"] = (str, None, lambda v: True, "", "write CSV here instead of stdout")


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pinstring", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pinstring {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS, help="file of `key = value` lines")
        for key, (_, default, _, rule, help_) in schema.items():
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            extra = f" [{rule}]" if rule else ""
            p.add_argument(*flags, dest=key, default=argparse.SUPPRESS,
                           help=f"{help_}{extra} (default {default})")
    return parser


def read_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected `key = value`")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def parse_config(argv) -> RunConfig:
    """Merge command defaults, config-file values and flags (in rising precedence)."""
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command", None)
    if command is None:
        raise UsageError("a command is required: " + ", ".join(SCHEMAS))
    schema = SCHEMAS[command]
    raw = {}
    if "config" in ns:
        raw.update(read_config_file(ns.pop("config")))
    raw.update(ns)
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise UsageError(f"unknown parameter {unknown[0]!r} for command {command}")
    params = {}
    for key, (parse, default, check, rule, _) in schema.items():
        if key not in raw:
            params[key] = default
            continue
        try:
            value = parse(raw[key])
        except ValueError:
            raise UsageError(f"cannot parse {key}={raw[key]!r}") from None
        if not check(value):
            raise UsageError(f"invalid {key}={raw[key]!r} (must be {rule})")
        params[key] = value
    return RunConfig(command, params)


# --------------------------------------------------------------------------
# commands

def metadata_line(config: RunConfig) -> str:
    items = [f"{k}={config.params[k]}" for k in sorted(config.params) if k not in NOT_RECORDED]
    return f"# pinstring {__version__} command={config.command} " + " ".join(items)


def _kernel(p) -> PinnedKernel:
    return PinnedKernel(form=p["form"])


def _cmd_fvalue(p, out):
    out.write("a,F\n")
    out.write(f"{p['a']!r},{f_value(p['a'])!r}\n")


def _cmd_cov(p, out):
    k = _kernel(p)
    a, b = (p["t1"], p["x1"]), (p["t2"], p["x2"])
    out.write("t1,x1,t2,x2,increment_variance,covariance\n")
    row = (*a, *b, k.increment_variance(a, b), k.covariance(a, b))
    out.write(",".join(repr(float(v)) for v in row) + "\n")


def _cmd_sample(p, out):
    grid = dyadic_grid(p["n"], p["t_count"], p["x_count"], t_offset=p["t_offset"])
    sample = sample_exact(grid, p["dim"], rng_stream(p["seed"], p["replica"]), _kernel(p))
    sample.write_csv(out)


def _cmd_simulate(p, out):
    dt = p["dt"] if p["dt"] is not None else p["dx"] ** 2 / 4
    cfg = SpdeConfig(dx=p["dx"], dt=dt, horizon=p["horizon"], dim=p["dim"], kappa=p["kappa"],
                     domain=p["domain"], initial=p["initial"], extent=p["extent"],
                     initial_scale=p["initial_scale"], save_every=p["save_every"])
    integrate_spde(cfg, rng_stream(p["seed"], p["replica"])).write_csv(out)


def _write_estimates(out, estimates):
    out.write(",".join(CSV_FIELDS) + "\n")
    for e in estimates:
        out.write(e.to_row() + "\n")


def _cmd_hitprob(p, out):
    events = hit_events(p["n"], p["dim"], delta=p["delta"], delta0=p["delta0"])
    target = np.full(p["dim"], p["target"])
    est = hit_probability(events, p["trials"], p["seed"], target=target,
                          workers=p["workers"], kernel=_kernel(p))
    _write_estimates(out, [est])


def _cmd_recur(p, out):
    est = recurrence_experiment(p["N"], p["delta"], p["dim"], p["trials"], p["seed"],
                                workers=p["workers"], kernel=_kernel(p))
    _write_estimates(out, [est])


def _cmd_doublepoints(p, out):
    n = p["n"]
    if p["mode"] == "fixed-time":
        side = 2 ** (2 * n)
        xs = np.arange(-side, side + 1) * 2.0 ** (-2 * n)
        grid = SpaceTimeGrid.product([p["time"]], xs)
    else:
        grid = dyadic_grid(n, 2 ** (4 * n), 2 ** (2 * n))
    sample = sample_exact(grid, p["dim"], rng_stream(p["seed"], p["replica"]), _kernel(p))
    report = double_points(sample, p["mode"], p["tolerance"], p["min_sep"])
    out.write("t1,x1,t2,x2,gap\n")
    for a, b, gap in report.pairs:
        pa, pb = grid[a], grid[b]
        out.write(f"{pa.t!r},{pa.x!r},{pb.t!r},{pb.x!r},{gap!r}\n")


def _cmd_bound(p, out):
    k = _kernel(p)
    if p["kind"] == "hit":
        value = second_moment_hit_bound(p["n"], p["dim"], p["delta0"], kernel=k)
        delta = p["delta0"] * 2.0 ** (-6.0 * p["n"] / 5.0)
    else:
        value = double_point_grid_bound(p["n"], p["dim"], kernel=k)
        delta = 2.0 ** (-12.0 * p["n"] / 11.0)
    out.write("kind,n,dim,delta,bound\n")
    out.write(f"{p['kind']},{p['n']},{p['dim']},{delta!r},{value!r}\n")


def _cmd_selftest(p, out):
    rows = run_selftest(p["form"])
    out.write("check,passed,detail\n")
    for name, ok, detail in rows:
        out.write(f"{name},{'pass' if ok else 'FAIL'},{detail}\n")
    if not all(ok for _, ok, _ in rows):
        raise NumericalError("kernel self-test failed")


COMMANDS = {
    "fvalue": _cmd_fvalue, "cov": _cmd_cov, "sample": _cmd_sample, "simulate": _cmd_simulate,
    "hitprob": _cmd_hitprob, "doublepoints": _cmd_doublepoints, "recur": _cmd_recur,
    "bound": _cmd_bound, "selftest": _cmd_selftest,
}


def run(config: RunConfig, stdout=None) -> int:
    """Execute ``config``; writes to ``config.params['output']`` or ``stdout``."""
    stdout = stdout or sys.stdout
    buf = io.StringIO()
    buf.write(metadata_line(config) + "\n")
    code = 0
    try:
        COMMANDS[config.command](config.params, buf)
    except NumericalError as exc:
        print(f"pinstring: numerical failure: {exc}", file=sys.stderr)
        if config.command != "selftest":
            return 2
        code = 2
    except (ConfigError, DomainError, ValidationError) as exc:
        print(f"pinstring: error: {exc}", file=sys.stderr)
        return 1
    path = config.params.get("output")
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    return code


def main(argv=None) -> int:
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"pinstring: usage error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
