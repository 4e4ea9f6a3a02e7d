"""Command-line front end.

Subcommands emit data tables only (no plotting):

  eigencdf      fraction of covariance eigenvalues above thresholds x
  cdf-compare   CDF of the FAS gain: empirical, stage 1, stage 2, reference
  outage-sweep  outage over N, W and SNR-target lists
  fit-a         fit of the epsilon-rank constant a
  validate      invariant suites and the acceptance table
  replay        re-run the command recorded in a manifest

SNR targets are given in dB as gamma_th/Gamma; the outage threshold on the
channel magnitude is r_th = sigma * 10^(dB/20).

Every file written with --out gets a sidecar <out>.manifest.json holding
the command line, configuration, seeds and evaluator settings.  Re-running
a manifest reproduces the output byte for byte.

Exit codes: 0 success, 2 usage error, 3 numeric or accuracy error,
4 validation failure.
"""
import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__, channel, covariance, outage, validate
from ._backend import BACKEND
from .covariance import FasConfig
from .errors import AccuracyError, ConstructionError, ConvergenceError, DomainError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4

DEFAULT_THRESHOLDS = tuple(10.0 ** e for e in np.arange(-16.0, 1.01, 0.25))


class UsageError(Exception):
    pass


def fmt(x):
    """17 significant digits; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return "" if x is None else str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def parse_list(text, kind=float):
    """Comma list, or lo:hi:step (inclusive) for evenly spaced values."""
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                lo, hi, step = (float(v) for v in part.split(":"))
                if step <= 0:
                    raise ValueError("step must be positive")
                count = int(math.floor((hi - lo) / step + 1e-9)) + 1
                out.extend(kind(round(lo + i * step, 12)) for i in range(count))
            else:
                out.append(kind(float(part)) if kind is int else kind(part))
    except ValueError as exc:
        raise UsageError(f"cannot parse list {text!r}: {exc}") from None
    if not out:
        raise UsageError(f"empty list {text!r}")
    return out


# ---------------------------------------------------------------------------
# output


class Table:
    def __init__(self, columns, rows, summary=None):
        self.columns = list(columns)
        self.rows = rows
        self.summary = summary or {}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self):
        doc = {"columns": self.columns,
               "rows": [[_jsonable(v) for v in row] for row in self.rows],
               "summary": _jsonable(self.summary)}
        return json.dumps(doc, indent=2) + "\n"


def _emit(args, table, manifest_extra):
    text = table.to_json() if args.format == "json" else table.to_csv()
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        manifest = {
            "command": args.command,
            "argv": args.argv,
            "config": manifest_extra.pop("config", None),
            "seeds": manifest_extra.pop("seeds", []),
            "evaluator_params": manifest_extra.pop("evaluator_params", {}),
            "summary": table.summary,
            "output_path": args.out,
            "format": args.format,
            "tool_version": __version__,
            "backend": BACKEND,
        }
        manifest.update(manifest_extra)
        with open(args.out + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(_jsonable(manifest), indent=2) + "\n")
    if table.summary:
        for k, v in table.summary.items():
            print(f"# {k}: {fmt(v) if not isinstance(v, (dict, list)) else json.dumps(_jsonable(v))}",
                  file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def _config(args, n=None, w=None, snr_db=None):
    return FasConfig(n_ports=args.n if n is None else n, width=args.w if w is None else w,
                     sigma2=args.sigma2, snr_target_db=args.snr_db[0] if snr_db is None else snr_db)


def _models(cfg, args):
    """(spectral, stage1 or None, stage2 or None) honouring overrides."""
    sp = covariance.spectral_model(cfg)
    if cfg.n_ports < 2:
        return sp, None, None
    eps = args.eps_rank if args.eps_rank is not None else covariance.epsilon_rank_formula(cfg)
    rep = args.replication if args.replication is not None else channel.select_replication(cfg)
    st1 = channel.build_stage1(sp, eps)
    return sp, st1, channel.Stage2Model(st1, rep)


def _quad(args):
    return outage.QuadratureSpec(nodes=args.quad_nodes)


def cmd_eigencdf(args):
    cfg = _config(args)
    thresholds = parse_list(args.thresholds) if args.thresholds else list(DEFAULT_THRESHOLDS)
    vals = covariance.jake_eigenvalues(cfg)
    c = cfg.spacing
    rows = []
    for x in thresholds:
        if x <= 0:
            raise UsageError("thresholds must be positive")
        frac = np.count_nonzero(vals > x) / cfg.n_ports
        limit = 1.0 - float(covariance.limiting_eigen_cdf(x, c, cfg.sigma2)) if 0 < c < 0.5 else None
        rows.append((x, frac, limit))
    table = Table(["x", "fraction_above", "limit_fraction_above"], rows,
                  {"n_ports": cfg.n_ports, "width": cfg.width, "spacing": c})
    return table, {"config": cfg.to_dict(), "evaluator_params": {"thresholds": thresholds}}


def cmd_cdf_compare(args):
    cfg = _config(args)
    sp, st1, st2 = _models(cfg, args)
    seed = args.seed
    emp = outage.empirical_cdf(channel.exact_maxima(sp, args.exact_draws, seed))
    r_max = args.r_max if args.r_max is not None else emp.quantile(outage.KS_UPPER_QUANTILE)
    r = np.linspace(0.0, r_max, args.r_points)
    quad = _quad(args)
    if st1 is None:
        f1 = f2 = fref = outage.rayleigh_max_cdf(r, cfg.sigma2)
        se1 = np.zeros_like(r)
    else:
        f1, se1 = outage.stage1_cdf_grid(st1, r, args.mc_draws, seed + 1)
        f2 = outage.stage2_cdf(st2, r, quad)
        fref = outage.reference_cdf(cfg, r, quad)
    e = emp(r)
    grid = outage.ks_grid(emp, upper=r_max)
    ks = {
        "stage1": outage.ks_distance(outage.TabulatedCdf(r, f1, kind="cubic"), emp, grid),
        "stage2": outage.ks_distance(outage.TabulatedCdf(r, f2, kind="cubic"), emp, grid),
        "reference": outage.ks_distance(outage.TabulatedCdf(r, fref, kind="cubic"), emp, grid),
    }
    rows = [(r[i], e[i], f1[i], se1[i], f2[i], fref[i]) for i in range(r.size)]
    summary = {"eps_rank": None if st1 is None else st1.eps_rank,
               "replication": None if st2 is None else st2.replication,
               "ks": ks, "exact_draws": args.exact_draws}
    params = {"mc_draws": args.mc_draws, "exact_draws": args.exact_draws,
              "quad_nodes": args.quad_nodes, "eps_rank": summary["eps_rank"],
              "replication": summary["replication"], "r_points": args.r_points,
              "r_max": r_max}
    return (Table(["r", "empirical", "stage1", "stage1_stderr", "stage2", "reference"], rows, summary),
            {"config": cfg.to_dict(), "seeds": [seed, seed + 1], "evaluator_params": params})


def _log10(x):
    return math.log10(x) if x > 0 else -math.inf


def cmd_outage_sweep(args):
    n_list = parse_list(args.n_list, int) if args.n_list else [args.n]
    w_list = parse_list(args.w_list) if args.w_list else [args.w]
    quad = _quad(args)
    rows, seeds = [], []
    for n in n_list:
        for w in w_list:
            cfg = _config(args, n=n, w=w)
            sp, st1, st2 = _models(cfg, args)
            seed = args.seed + 1000 * len(seeds)
            seeds.append(seed)
            maxima = np.sort(channel.exact_maxima(sp, args.mc_draws, seed))
            emp = outage.EmpiricalCdf(maxima)
            for db in args.snr_db:
                q = outage.OutageQuery.from_config(cfg, db)
                e = emp(q.threshold_magnitude)
                if st2 is None:
                    s2 = ref = outage.rayleigh_max_cdf(q.threshold_magnitude, cfg.sigma2)
                else:
                    s2 = float(outage.stage2_outage(st2, q, quad))
                    ref = outage.reference_outage_fas1(cfg, q, quad)
                rows.append((n, w, db, None if st1 is None else st1.eps_rank,
                             None if st2 is None else st2.replication,
                             e, s2, ref, _log10(e), _log10(s2), _log10(ref)))
    cols = ["n_ports", "width", "snr_db", "eps_rank", "replication", "empirical", "stage2",
            "reference", "log10_empirical", "log10_stage2", "log10_reference"]
    params = {"mc_draws": args.mc_draws, "quad_nodes": args.quad_nodes, "n_list": n_list,
              "w_list": w_list, "snr_db": args.snr_db, "eps_rank": args.eps_rank,
              "replication": args.replication}
    return Table(cols, rows), {"config": {"sigma2": args.sigma2}, "seeds": seeds,
                               "evaluator_params": params}


def cmd_fit_a(args):
    n_grid = parse_list(args.n_grid, int) if args.n_grid else list(covariance.DEFAULT_FIT_N_GRID)
    w_grid = parse_list(args.w_grid) if args.w_grid else list(covariance.DEFAULT_FIT_W_GRID)
    default = (tuple(n_grid) == covariance.DEFAULT_FIT_N_GRID
               and tuple(w_grid) == covariance.DEFAULT_FIT_W_GRID)
    try:
        fit = covariance.fit_a_constant(n_grid, w_grid, sigma2=args.sigma2,
                                        drop_invalid=default or args.drop_invalid)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for (n, w), rank in zip(fit.pairs, fit.numeric_ranks):
        formula = covariance.epsilon_rank_formula(FasConfig(n, w), fit.a)
        rows.append((n, w, rank, formula, formula - rank))
    summary = {"a": fit.a, "mse": fit.mse, "interval": list(fit.interval), "width": fit.width,
               "pairs": len(fit.pairs), "dropped": [list(p) for p in fit.dropped],
               "grid": {"n": n_grid, "w": w_grid}}
    table = Table(["n_ports", "width", "numeric_rank", "formula_rank", "residual"], rows, summary)
    return table, {"config": None, "evaluator_params": {"scan": list(covariance.FIT_SCAN)}}


def cmd_validate(args):
    def progress(res):
        print(res.line(), file=sys.stderr, flush=True)

    results = validate.run(args.level, corrupt_j0=args.corrupt_j0, progress=progress)
    rows = [(r.key, r.name, "pass" if r.passed else "fail", r.measured, r.bound, r.detail, r.seconds)
            for r in results]
    failed = [r.key for r in results if not r.passed]
    summary = {"level": args.level, "checks": len(results), "failed": failed,
               "backend": BACKEND}
    table = Table(["key", "name", "status", "measured", "bound", "detail", "seconds"], rows, summary)
    return table, {"config": None, "evaluator_params": {"level": args.level}}, bool(failed)


def cmd_replay(args):
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        argv = manifest["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest}: {exc}") from None
    if args.out:
        if "--out" in argv:
            i = argv.index("--out")
            argv = argv[:i] + ["--out", args.out] + argv[i + 2:]
        else:
            argv = argv + ["--out", args.out]
    return main(argv)


# ---------------------------------------------------------------------------
# parser


def _common(p):
    g = p.add_argument_group("scenario and evaluator")
    g.add_argument("--n", type=int, default=100, help="number of ports N (default 100)")
    g.add_argument("--w", type=float, default=1.0, help="aperture W in wavelengths (default 1)")
    g.add_argument("--sigma2", type=float, default=10.0, help="per-port channel power (default 10)")
    g.add_argument("--snr-db", default="0",
                   help="SNR target gamma_th/Gamma in dB; comma list for outage-sweep. "
                        "Outage threshold r_th = sigma * 10^(dB/20) (default 0). "
                        "Write negative values as --snr-db=-inf or --snr-db=-3")
    g.add_argument("--eps-rank", type=int, default=None,
                   help="first-stage rank (default ceil(3.1935 W N/(N-1)))")
    g.add_argument("--replication", type=int, default=None,
                   help="replication count R (default min(floor(1.52 (N-1)/(2 pi W)), N))")
    g.add_argument("--mc-draws", type=int, default=100_000, help="Monte Carlo draws (default 1e5)")
    g.add_argument("--seed", type=int, default=1, help="base seed (default 1)")
    g.add_argument("--quad-nodes", type=int, default=96, help="base quadrature nodes (default 96)")
    g.add_argument("--out", default=None, help="output file (default stdout, no manifest)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    p = _Parser(prog="fasmodel", description=__doc__.split("\n\n")[0],
                formatter_class=argparse.RawDescriptionHelpFormatter,
                epilog="r_th = sigma * 10^(snr_db/20); exit codes 0 ok, 2 usage, 3 numeric, 4 validation")
    p.add_argument("--version", action="version", version=f"fasmodel {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("eigencdf", help="fraction of eigenvalues above thresholds")
    _common(s)
    s.add_argument("--thresholds", default=None, help="comma list of x (default 1e-16..10)")

    s = sub.add_parser("cdf-compare", help="compare CDF evaluators with the exact sampler")
    _common(s)
    s.add_argument("--exact-draws", type=int, default=1_000_000, help="exact-sampler draws (default 1e6)")
    s.add_argument("--r-points", type=int, default=128, help="r grid points (default 128)")
    s.add_argument("--r-max", type=float, default=None,
                   help="upper end of the r grid (default 99.99th percentile of the exact sample)")

    s = sub.add_parser("outage-sweep", help="outage over lists of N, W and SNR targets")
    _common(s)
    s.add_argument("--n-list", default=None, help="comma list or lo:hi:step of N")
    s.add_argument("--w-list", default=None, help="comma list or lo:hi:step of W")

    s = sub.add_parser("fit-a", help="fit the epsilon-rank constant")
    _common(s)
    s.add_argument("--n-grid", default=None, help="N grid (default 10:300:10)")
    s.add_argument("--w-grid", default=None, help="W grid (default 0.1:5.0:0.1)")
    s.add_argument("--drop-invalid", action="store_true",
                   help="skip grid pairs with W/(N-1) >= 1/2 instead of failing")

    s = sub.add_parser("validate", help="run the invariant suites")
    _common(s)
    s.add_argument("--level", choices=("quick", "full"), default="quick")
    s.add_argument("--corrupt-j0", action="store_true", help=argparse.SUPPRESS)

    s = sub.add_parser("replay", help="re-run the command stored in a manifest")
    s.add_argument("manifest")
    s.add_argument("--out", default=None, help="write to this path instead of the recorded one")
    return p


COMMANDS = {"eigencdf": cmd_eigencdf, "cdf-compare": cmd_cdf_compare,
            "outage-sweep": cmd_outage_sweep, "fit-a": cmd_fit_a, "validate": cmd_validate}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "replay":
            return cmd_replay(args)
        args.argv = argv
        args.snr_db = parse_list(args.snr_db)
        if args.mc_draws < 100:
            raise UsageError("--mc-draws must be >= 100")
        result = COMMANDS[args.command](args)
        failed = False
        if len(result) == 3:
            table, extra, failed = result
        else:
            table, extra = result
        _emit(args, table, extra)
        return EXIT_VALIDATION if failed else EXIT_OK
    except (UsageError, DomainError, ConstructionError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AccuracyError, ConvergenceError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
