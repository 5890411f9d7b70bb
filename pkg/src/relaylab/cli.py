"""relaylab command line: single realizations, CDF runs, relay-position sweeps
and the scalar oracle check.

Exit codes: 0 ok, 1 oracle mismatch, 2 usage, 3 I/O, 4 too many failed solves.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Optional


from . import oracles
from .channel import AntennaConfig, ChannelRealization, PowerConstraints, Topology, dump_channels, realization
from .fullduplex import DEFAULT_TOL
from .harness import (
    BASE_SCHEMES,
    HALF_DUPLEX,
    ExperimentSpec,
    dx_grid,
    evaluate_scheme,
    parse_scheme,
    position_sweep,
    run,
)
from .reports import LN2, SchemeError

log = logging.getLogger("relaylab")

EXIT_ORACLE, EXIT_USAGE, EXIT_IO, EXIT_FAILURES = 1, 2, 3, 4
DEFAULT_SCHEMES = {
    "single": ",".join(BASE_SCHEMES),
    "cdf": "cs,df,direct",
    "sweep": "cs,df,hcs,hdf,twohop,direct",
    "oracle": "cs,df,hcs,hdf,twohop,coloc-src,cf-rd,cf-wz",
}
ORACLE_TOL_BITS = 1e-3
CF_TOL_BITS = 1e-9


@dataclass
class CliConfig:
    command: str
    spec: ExperimentSpec
    out: Optional[str] = None
    fmt: str = "csv"
    dump_channels: Optional[str] = None
    max_failure_rate: float = 0.10
    extra: dict = field(default_factory=dict)


def fmt_float(x: float) -> str:
    return "" if x is None or not math.isfinite(x) else f"{x:.12g}"


def _json_float(x):
    return None if x is None or not math.isfinite(x) else float(f"{x:.12g}")


def _grid_arg(text: str) -> tuple[float, ...]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
        return dx_grid(start, stop, step)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad dx grid {text!r} (want start:stop:step): {exc}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("experiment")
    for name in ("m1", "n1", "m2", "n2"):
        g.add_argument(f"--{name}", type=_positive_int, default=4)
    g.add_argument("--p1-db", type=float, default=0.0)
    g.add_argument("--p2-db", type=float, default=0.0)
    g.add_argument("--dx", type=float, default=1 / 3)
    g.add_argument("--dy", type=float, default=1 / 2)
    g.add_argument("--eta", type=float, default=4.0)
    g.add_argument("--trials", type=_positive_int, default=50)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--schemes", default=None, help="comma list; append +pa for per-antenna variants")
    g.add_argument("--per-antenna", action="store_true", help="per-antenna power limits for every relay scheme")
    g.add_argument("--tol", type=float, default=DEFAULT_TOL, help="solver duality-gap tolerance (nats)")
    g.add_argument("--dx-grid", type=_grid_arg, default=None, help="start:stop:step, inclusive")
    g.add_argument("--out", default=None, help="output file (stdout if omitted)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--dump-channels", default=None, help="write the realizations as JSON lines")
    g.add_argument("--max-failure-rate", type=float, default=0.10)
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="relaylab", description="MIMO relay channel rate experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("single", parents=[common], help="every scheme on one realization (trial 0)")
    sub.add_parser("cdf", parents=[common], help="per-trial rates for empirical CDFs")
    sub.add_parser("sweep", parents=[common], help="mean rates over a relay-position grid")
    sub.add_parser("oracle", parents=[common], help="scalar solver-vs-brute-force comparison")
    return p


def _glue_grid(argv):
    # argparse takes "-0.5:1.5:0.1" for an option; bind it to --dx-grid explicitly
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--dx-grid":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def parse_args(argv=None) -> CliConfig:
    parser = build_parser()
    ns = parser.parse_args(_glue_grid(sys.argv[1:] if argv is None else list(argv)))
    schemes = tuple(s.strip() for s in (ns.schemes or DEFAULT_SCHEMES[ns.command]).split(",") if s.strip())
    try:
        for s in schemes:
            parse_scheme(s)
        cfg = AntennaConfig(ns.m1, ns.n1, ns.m2, ns.n2)
        pc = PowerConstraints.from_db(ns.p1_db, ns.p2_db)
        topo = Topology(ns.dx, ns.dy, ns.eta)
    except ValueError as exc:
        parser.error(str(exc))
    if ns.command == "sweep":
        if ns.out is None:
            parser.error("sweep requires --out")
        dx_list = ns.dx_grid or dx_grid(-0.5, 1.5, 0.1)
    elif ns.dx_grid is not None:
        parser.error("--dx-grid only applies to sweep")
    else:
        dx_list = None
    if ns.command == "oracle" and not cfg.is_scalar:
        parser.error("oracle needs a scalar configuration: --m1 1 --n1 1 --m2 1 --n2 1")
    trials = 1 if ns.command == "single" else ns.trials
    spec = ExperimentSpec(cfg, pc, topo, schemes, trials, ns.seed, ns.per_antenna, ns.tol, dx_list)
    try:
        spec.validate()
    except ValueError as exc:
        parser.error(str(exc))
    if ns.command != "sweep":
        try:
            topo.amplitude_scales()
        except ValueError as exc:
            parser.error(str(exc))
    return CliConfig(ns.command, spec, ns.out, ns.format, ns.dump_channels, ns.max_failure_rate,
                     {"workers": ns.workers, "verbose": ns.verbose})


def _spec_dict(spec: ExperimentSpec) -> dict:
    return {
        "antennas": {"m1": spec.cfg.m1, "n1": spec.cfg.n1, "m2": spec.cfg.m2, "n2": spec.cfg.n2},
        "p1": spec.pc.p1, "p2": spec.pc.p2,
        "dx": spec.topo.dx, "dy": spec.topo.dy, "eta": spec.topo.eta,
        "trials": spec.trials, "seed": spec.seed, "per_antenna": spec.per_antenna, "tol": spec.tol,
        "schemes": sorted(spec.schemes),
        "dx_grid": list(spec.dx_list) if spec.dx_list is not None else None,
    }


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def render_cdf(result, cfg: CliConfig) -> str:
    schemes = sorted(result.schemes)
    if cfg.fmt == "csv":
        rows = [(k, s, fmt_float(result.rates[s][k])) for k in range(result.trials) for s in schemes]
        return _csv(("trial", "scheme", "rate_bits"), rows)
    return _json({
        "config": _spec_dict(cfg.spec),
        "rows": [{"trial": k, "scheme": s, "rate_bits": _json_float(result.rates[s][k])}
                 for k in range(result.trials) for s in schemes],
        "cdf": {s: [[_json_float(v), _json_float(f)] for v, f in result.cdf(s)] if result.samples(s).size else []
                for s in schemes},
        "summary": {s: {"mean_rate_bits": _json_float(result.mean(s)), "stderr_bits": _json_float(result.stderr(s)),
                        "mean_w1": _json_float(result.mean_w1(s)) if s in result.w1 else None}
                    for s in schemes},
        "diagnostics": _diagnostics(result.failures, result.checksums),
    })


def render_single(result, cfg: CliConfig) -> str:
    schemes = sorted(result.schemes)
    if cfg.fmt == "csv":
        return _csv(("scheme", "rate_bits"), [(s, fmt_float(result.rates[s][0])) for s in schemes])
    return _json({
        "config": _spec_dict(cfg.spec),
        "rows": [{"scheme": s, "rate_bits": _json_float(result.rates[s][0]),
                  **({"w1": _json_float(result.w1[s][0])} if s in result.w1 else {})} for s in schemes],
        "diagnostics": _diagnostics(result.failures, result.checksums),
    })


def render_sweep(sweep, cfg: CliConfig) -> str:
    rows = sorted(sweep.rows, key=lambda r: (r.dx, r.scheme))

    def w1(r):
        return r.mean_w1 if parse_scheme(r.scheme)[0] in HALF_DUPLEX else None

    if cfg.fmt == "csv":
        return _csv(("dx", "scheme", "mean_rate_bits", "stderr_bits", "mean_w1"),
                    [(fmt_float(r.dx), r.scheme, fmt_float(r.mean_rate_bits), fmt_float(r.stderr_bits),
                      fmt_float(w1(r))) for r in rows])
    failures = [f for res in sweep.per_dx.values() for f in res.failures]
    return _json({
        "config": _spec_dict(cfg.spec),
        "rows": [{"dx": _json_float(r.dx), "scheme": r.scheme, "mean_rate_bits": _json_float(r.mean_rate_bits),
                  "stderr_bits": _json_float(r.stderr_bits), "mean_w1": _json_float(w1(r)),
                  "ok": r.ok, "failed": r.failed} for r in rows],
        "skipped": [{"dx": dx, "reason": why} for dx, why in sweep.skipped],
        "diagnostics": _diagnostics(failures, []),
    })


def _diagnostics(failures, checksums) -> dict:
    out = {"failed_solves": len(failures),
           "failures": [{"scheme": f.scheme, "trial": f.trial, "error": f.error} for f in failures]}
    if checksums:
        out["channel_checksums"] = list(checksums)
    return out


# -- oracle ---------------------------------------------------------------

def _fixed_instances() -> list[tuple[str, oracles.ScalarInstance, tuple[str, ...]]]:
    return [
        ("example-relay", oracles.ScalarInstance(1, 2, 2), ("cs", "df", "hcs", "hdf", "twohop", "coloc-src")),
        ("example-twohop", oracles.ScalarInstance(0, 1, 1), ("twohop",)),
        ("example-cf", oracles.ScalarInstance(1, 1, 10), ("cf-rd", "cf-wz")),
    ]


def _oracle_rows(spec: ExperimentSpec):
    jobs = list(_fixed_instances())
    oracle_schemes = tuple(s for s in spec.schemes if s in oracles.ORACLES)
    for k in range(spec.trials):
        ch = realization(spec.cfg, spec.topo, spec.seed, k)
        inst = oracles.ScalarInstance(complex(ch.h11[0, 0]), complex(ch.h21[0, 0]), complex(ch.h12[0, 0]),
                                      spec.pc.p1, spec.pc.p2)
        jobs.append((f"trial-{k}", inst, oracle_schemes))
    rows = []
    for label, inst, schemes in jobs:
        ch = ChannelRealization.scalar(inst.h11, inst.h21, inst.h12)
        pc = PowerConstraints(inst.p1, inst.p2)
        for s in sorted(schemes):
            want = oracles.ORACLES[s](inst) / LN2
            try:
                got = evaluate_scheme(s, ch, pc, False, spec.tol)[0]
            except SchemeError as exc:
                log.warning("%s %s: %s", label, s, exc)
                got = float("nan")
            tol = CF_TOL_BITS if s.startswith("cf-") else ORACLE_TOL_BITS
            delta = got - want
            ok = math.isfinite(delta) and abs(delta) <= tol
            rows.append((label, s, got, want, delta, ok))
    return rows


def render_oracle(rows, cfg: CliConfig) -> str:
    if cfg.fmt == "csv":
        return _csv(("instance", "scheme", "solver_bits", "oracle_bits", "delta_bits", "ok"),
                    [(a, s, fmt_float(g), fmt_float(w), fmt_float(d), int(ok)) for a, s, g, w, d, ok in rows])
    return _json({
        "config": _spec_dict(cfg.spec),
        "rows": [{"instance": a, "scheme": s, "solver_bits": _json_float(g), "oracle_bits": _json_float(w),
                  "delta_bits": _json_float(d), "ok": ok} for a, s, g, w, d, ok in rows],
    })


# -- entry point ----------------------------------------------------------

def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def execute(cfg: CliConfig) -> int:
    spec = cfg.spec
    workers = cfg.extra.get("workers")
    failure_rate = 0.0
    if cfg.command == "oracle":
        rows = _oracle_rows(spec)
        text = render_oracle(rows, cfg)
        status = 0 if all(r[-1] for r in rows) else EXIT_ORACLE
    elif cfg.command == "sweep":
        sweep = position_sweep(spec, workers)
        text, failure_rate, status = render_sweep(sweep, cfg), sweep.failure_rate, 0
    else:
        result = run(spec, workers)
        render = render_single if cfg.command == "single" else render_cdf
        text, failure_rate, status = render(result, cfg), result.failure_rate, 0
    try:
        _write(text, cfg.out)
        if cfg.dump_channels:
            topo = spec.topo
            dump_channels(cfg.dump_channels, spec.cfg, topo, spec.seed,
                          [realization(spec.cfg, topo, spec.seed, k) for k in range(spec.trials)])
    except OSError as exc:
        print(f"relaylab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if failure_rate > cfg.max_failure_rate:
        print(f"relaylab: {failure_rate:.1%} of solves failed (threshold {cfg.max_failure_rate:.0%})",
              file=sys.stderr)
        return EXIT_FAILURES
    return status


def main(argv=None) -> int:
    cfg = parse_args(argv)
    logging.basicConfig(level=logging.INFO if cfg.extra.get("verbose") else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
