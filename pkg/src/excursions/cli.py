"""Command-line front end: ``excursions decompose | synthesize | check``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path
from typing import Dict, List

import numpy as np

from . import __version__
from .harness import (
    STATS, counterexample_demo, default_workers, eq_cond_check, passage_variant_check,
    sample_first_big, scaled_srw,
)
from .ops import decompose, write_excursions
from .paths import PathFormatError, read_path, write_path
from .regen import (
    bm_cost, bm_height_tail, bm_laplace_g_height, bm_length_tail, bm_small_cost_height,
    Accumulator, check_h1, check_h2, check_h3, exact_laplace_g, g_samples, sandwich_check, srw_spec,
    stream, synthesize, trend_ok,
)
from .sizes import from_config
from .tightness import modulus_w_prime, small_part_bound_check, tightness_probe

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


DEFAULTS: Dict[str, dict] = {
    "synthesize": {"family": "srw", "n": 100, "horizon": 1.0, "paths": 10,
                   "mode": "exponential-holds"},
    "h1": {"family": "srw", "phi": "height", "n_grid": [100, 10_000, 1_000_000],
           "eps_grid": [0.3, 0.5, 1.0]},
    "h2": {"family": "srw", "phi": "height", "n_grid": [100, 10_000, 1_000_000],
           "eps_grid": [0.3, 0.5], "lambda_grid": [0.5, 1.0, 2.0], "rate_constant": 3.0},
    "h3": {"family": "srw", "phi": "height", "n_grid": [100, 10_000, 1_000_000],
           "eps_grid": [0.3, 0.5], "lambda_grid": [0.5, 1.0, 2.0], "rate_constant": 3.0},
    "laplace": {"family": "srw", "phi": "height", "n": 100, "eps_grid": [0.3, 0.5],
                "lambda_grid": [0.5, 1.0, 2.0], "samples": 100_000, "horizon": 4.0},
    "eqcond": {"family": "srw", "phi": "height", "n_grid": [400, 2500, 10_000],
               "eps_grid": [0.3, 0.5], "samples": 2000, "reference_n": 250_000,
               "alpha": 0.01, "cap": 1.0},
    "passage": {"family": "srw", "n_grid": [400, 2500, 10_000], "eps_grid": [0.3, 0.5],
                "samples": 2000, "reference_n": 250_000, "alpha": 0.01, "cap": 1.0},
    "tightness": {"family": "srw", "phi": "height", "n_grid": [64, 256, 1024], "m": 1.0,
                  "eta": 0.2, "delta_grid": [0.4, 0.2, 0.1, 0.05], "eps_grid": [0.05, 0.1, 0.15],
                  "samples": 200},
    "counterexample": {"n_grid": [100, 10_000], "base_n": 1_000_000, "paths": 40, "eps": 0.1,
                       "horizon": 1.0, "growth_factor": 5.0},
}


def resolve_config(section: str, path) -> dict:
    """Defaults overlaid with the JSON file; unknown keys are an error."""
    cfg = json.loads(json.dumps(DEFAULTS[section]))
    if path is None:
        return cfg
    try:
        user = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    # a file may hold one section per command
    if isinstance(user.get(section), dict):
        user = user[section]
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown config keys for {section}: {', '.join(unknown)}")
    cfg.update(user)
    if cfg.get("family", "srw") != "srw":
        raise ConfigError("only the srw family is available from the command line")
    for key in ("horizon", "m", "eta"):
        if key in cfg and not float(cfg[key]) > 0:
            raise ConfigError(f"{key} must be positive")
    for key in ("paths", "samples", "n", "reference_n", "base_n"):
        if key in cfg and not int(cfg[key]) >= 1:
            raise ConfigError(f"{key} must be a positive integer")
    return cfg


def _write_report(target: Path, header: List[str], rows: List[list], provenance: dict) -> Path:
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as fh:
        for k, v in provenance.items():
            fh.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return target


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "pass" if x else "fail"
    if isinstance(x, float):
        return repr(x)
    return x


def _provenance(command: str, cfg: dict, seed: int) -> dict:
    return {"command": command, "version": __version__, "seed": seed, "config": cfg}


# -- subcommands ---------------------------------------------------------------------


def cmd_decompose(args) -> int:
    try:
        f = read_path(args.path)
    except (OSError, PathFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        phi = from_config(_phi_arg(args.phi))
    except (KeyError, ValueError) as exc:
        print(f"error: bad functional {args.phi!r}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    items = [it for it in decompose(f, phi) if it.size > args.eps]
    out = Path(args.out)
    write_excursions(items, out, with_paths=not args.no_paths)
    print(f"{len(items)} excursions written to {out / 'excursions.csv'}")
    return EXIT_PASS


def _phi_arg(text: str):
    if text.startswith("additive:"):
        return {"kind": "additive", "kernel": text.split(":", 1)[1]}
    return text


def cmd_synthesize(args, cfg) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = int(cfg["n"])
    rows = []
    for i in range(int(cfg["paths"])):
        rng = stream(args.seed, i)
        f = scaled_srw(n, float(cfg["horizon"]), rng, mode=cfg["mode"])
        write_path(f, out / f"path_{i:04d}.csv")
        items = decompose(f)
        at_zero = np.append(np.diff(f.times), f.horizon - f.times[-1])[f.at_anchor()].sum()
        rows.append([i, len(f.times), len(items), float(at_zero)])
    _write_report(out / "summary.csv", ["path", "breakpoints", "excursions", "time_at_anchor"],
                  rows, _provenance("synthesize", cfg, args.seed))
    print(f"{len(rows)} paths written to {out}")
    return EXIT_PASS


def _srw_specs(n_grid):
    return [(int(n), srw_spec(int(n))) for n in n_grid]


def check_h(which, cfg, args, out: Path) -> bool:
    phi = from_config(cfg["phi"])
    specs = _srw_specs(cfg["n_grid"])
    header = ["n", "eps", "lambda", "estimate", "se", "limit", "verdict"]
    if which == "h1":
        limit = bm_height_tail if phi.kind == "height" else bm_length_tail
        rows = check_h1(specs, phi, cfg["eps_grid"], limit,
                        lambda n, eps: 1.0 / (eps * eps * math.sqrt(n)))
        passed = all(r.ok for r in rows)
    else:
        C = float(cfg["rate_constant"])
        if which == "h2":
            if phi.kind != "height":
                raise ConfigError("the h2 limit is available for the height functional")
            rows = check_h2(specs, phi, cfg["eps_grid"], cfg["lambda_grid"], bm_small_cost_height,
                            lambda n, eps, lam: C * bm_small_cost_height(lam, eps) / math.sqrt(n))
        else:
            rows = check_h3(specs, cfg["lambda_grid"], bm_cost,
                            lambda n, lam: C * bm_cost(lam) / math.sqrt(n))
        groups: Dict[tuple, list] = {}
        for r in rows:
            groups.setdefault((r.eps if not math.isnan(r.eps) else None, r.lam), []).append(r)
        passed = all(g[-1].ok and trend_ok([r.error for r in g], inversions=0)
                     for g in groups.values())
    table = [[r.n, r.eps, r.lam, r.estimate, r.std_error, r.limit, r.ok] for r in rows]
    if which == "h3":
        sw = sandwich_check(specs, phi, cfg["eps_grid"], cfg["lambda_grid"])
        passed = passed and all(r.ok for r in sw)
        _write_report(out / "report_h3_sandwich.csv",
                      ["n", "eps", "lambda", "h2", "h3", "tail", "se", "verdict"],
                      [[r.n, r.eps, r.lam, r.h2, r.h3, r.tail, r.std_error, r.ok] for r in sw],
                      _provenance(f"check {which}", cfg, args.seed))
    _write_report(out / f"report_{which}.csv", header, table,
                  _provenance(f"check {which}", cfg, args.seed))
    return passed


def check_laplace(cfg, args, out: Path) -> bool:
    phi = from_config(cfg["phi"])
    n = int(cfg["n"])
    spec = srw_spec(n)
    rows, passed = [], True
    for i, eps in enumerate(cfg["eps_grid"]):
        # one set of paths per eps serves every lambda
        g = g_samples(spec, phi, eps, int(cfg["samples"]), args.seed + 97 * i,
                      float(cfg["horizon"]))
        for lam in cfg["lambda_grid"]:
            formula = exact_laplace_g(spec, phi, eps, lam)
            est = Accumulator().add(np.exp(-lam * g)).estimate(seed=args.seed)
            ok = est.covers(formula)
            passed &= ok
            limit = bm_laplace_g_height(lam, eps) if phi.kind == "height" else math.nan
            rows.append([n, eps, lam, est.value, est.std_error, formula, limit, ok])
    _write_report(out / "report_laplace.csv",
                  ["n", "eps", "lambda", "estimate", "se", "formula", "limit", "verdict"], rows,
                  _provenance("check laplace", cfg, args.seed))
    return passed


def check_convergence(which, cfg, args, out: Path) -> bool:
    common = dict(samples=int(cfg["samples"]), reference_n=int(cfg["reference_n"]),
                  alpha=float(cfg["alpha"]), cap=float(cfg["cap"]), seed=args.seed,
                  workers=args.workers)
    if which == "eqcond":
        phi = from_config(cfg["phi"])
        if phi.kind not in ("height", "length"):
            raise ConfigError("eqcond samples the lazy walk for height or length only")
        report = eq_cond_check(cfg["n_grid"], cfg["eps_grid"], phi.kind, **common)
    else:
        report = passage_variant_check(cfg["n_grid"], cfg["eps_grid"], **common)
    header = ["eps", "statistic", "n", "ks", "threshold", "verdict", "trend", "informational"]
    rows = [[r.eps, r.statistic, r.n, r.ks, r.threshold, r.passed, r.trend_ok, int(r.informational)]
            for r in report.rows]
    prov = _provenance(f"check {which}", cfg, args.seed)
    prov["extras"] = report.extras
    prov["verdicts"] = {k: bool(v) for k, v in report.verdicts.items()}
    _write_report(out / f"report_{which}.csv", header, rows, prov)
    if args.svg:
        from .plotting import ecdf_svg
        kind = "height" if which == "passage" else from_config(cfg["phi"]).kind
        cols = {s: i for i, s in enumerate(STATS)}
        stats = ("g", "T", "size") if which == "eqcond" else ("g", "T_up", "size")
        for ie, eps in enumerate(cfg["eps_grid"]):
            seed = args.seed if which == "eqcond" else args.seed + 1
            arrays = {f"n={n}": sample_first_big(int(n), kind, eps, common["cap"], common["samples"],
                                                 seed, 10 * ie + j, args.workers)
                      for j, n in enumerate(cfg["n_grid"])}
            arrays["reference"] = sample_first_big(common["reference_n"], kind, eps, common["cap"],
                                                   common["samples"], seed, 1000 + ie, args.workers)
            for s in stats:
                ecdf_svg({k: v[:, cols[s]] for k, v in arrays.items()},
                         out / f"ecdf_{which}_{s}_eps{eps:g}.svg",
                         title=f"{s}, eps={eps:g}", xlabel=s)
    return report.passed


def check_tightness(cfg, args, out: Path) -> bool:
    phi = from_config(cfg["phi"])
    specs = _srw_specs(cfg["n_grid"])
    rows = tightness_probe(specs, float(cfg["m"]), float(cfg["eta"]), cfg["delta_grid"],
                           cfg["eps_grid"], phi, int(cfg["samples"]), args.seed)
    prov = _provenance("check tightness", cfg, args.seed)
    _write_report(out / "report_tightness.csv",
                  ["n", "delta", "eps", "eta", "lhs", "lhs_se", "rhs", "rhs_se", "ok"],
                  [[r.n, r.delta, r.eps, r.eta, r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.ok] for r in rows],
                  prov)
    bound = small_part_bound_check(specs, float(cfg["m"]), float(cfg["eta"]), cfg["eps_grid"], phi,
                                   int(cfg["samples"]), args.seed)
    _write_report(out / "report_tightness_bound.csv",
                  ["n", "eps", "eta", "lhs", "lhs_se", "rhs", "alpha", "lambda", "ok"],
                  [[r.n, r.eps, r.eta, r.lhs, r.lhs_se, r.rhs, r.alpha, r.lam, r.ok] for r in bound],
                  prov)
    if args.svg:
        from .plotting import modulus_grid_svg
        curves = {}
        for n, spec in specs:
            paths = [synthesize(spec, float(cfg["m"]), stream(args.seed, i))
                     for i in range(min(int(cfg["samples"]), 50))]
            curves[f"n={n}"] = [(d, float(np.mean([modulus_w_prime(f, float(cfg["m"]), d)
                                                   for f in paths])))
                                for d in cfg["delta_grid"]]
        modulus_grid_svg(curves, out / "modulus_w_prime.svg", title="mean w' over sampled paths",
                         ylabel="w'")
    return all(r.ok for r in rows) and all(r.ok for r in bound)


def check_counterexample(cfg, args, out: Path) -> bool:
    rows = counterexample_demo(cfg["n_grid"], int(cfg["base_n"]), int(cfg["paths"]),
                               float(cfg["eps"]), float(cfg["horizon"]), args.seed)
    growth = rows[-1].mean_sup / rows[0].mean_sup
    diverges = growth >= float(cfg["growth_factor"])
    same_length = all(r.length_lists_equal == r.paths for r in rows)
    prov = _provenance("check counterexample", cfg, args.seed)
    prov["sup_growth"] = growth
    prov["non_tightness_flagged"] = bool(diverges)
    _write_report(out / "report_counterexample.csv",
                  ["n", "paths", "mean_sup", "frac_replaced", "length_lists_equal",
                   "height_lists_equal"],
                  [[r.n, r.paths, r.mean_sup, r.frac_replaced, r.length_lists_equal,
                    r.height_lists_equal] for r in rows], prov)
    # divergence of the sup norm is the expected outcome
    return diverges and same_length


CHECKS = ("h1", "h2", "h3", "laplace", "eqcond", "passage", "tightness", "counterexample")


def cmd_check(args) -> int:
    cfg = resolve_config(args.which, args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if args.which in ("h1", "h2", "h3"):
        passed = check_h(args.which, cfg, args, out)
    elif args.which == "laplace":
        passed = check_laplace(cfg, args, out)
    elif args.which in ("eqcond", "passage"):
        passed = check_convergence(args.which, cfg, args, out)
    elif args.which == "tightness":
        passed = check_tightness(cfg, args, out)
    else:
        passed = check_counterexample(cfg, args, out)
    print(f"check {args.which}: {'pass' if passed else 'FAIL'} ({time.time() - t0:.1f}s)")
    return EXIT_PASS if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="excursions", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with parameters (unknown keys are rejected)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out")
        sp.add_argument("--workers", type=int, default=default_workers())
        sp.add_argument("--svg", action="store_true", help="also write SVG figures")

    d = sub.add_parser("decompose", help="list the excursions of a path file")
    d.add_argument("path")
    d.add_argument("--phi", default="height", help="length, height or additive:<kernel>")
    d.add_argument("--eps", type=float, default=0.0, help="keep excursions with size above eps")
    d.add_argument("--no-paths", action="store_true", help="skip per-excursion path files")
    common(d)

    s = sub.add_parser("synthesize", help="write synthesized scaled-walk paths")
    common(s)

    c = sub.add_parser("check", help="run a statistical check and write its report")
    c.add_argument("which", choices=CHECKS)
    common(c)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    try:
        if args.command == "decompose":
            return cmd_decompose(args)
        if args.command == "synthesize":
            return cmd_synthesize(args, resolve_config("synthesize", args.config))
        return cmd_check(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
