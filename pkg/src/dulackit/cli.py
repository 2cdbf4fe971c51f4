"""Command-line driver: JSON problem specs in, JSON/CSV reports out.

    dulackit check  spec.json [--out DIR]
    dulackit expand spec.json [--out DIR]
    dulackit verify spec.json [--out DIR] [--threads N]
    dulackit loud   spec.json [--out DIR] [--threads N]

Exit codes: 0 pass, 1 verification fail, 2 hypothesis fail, 3 parse error,
4 refused preconditions.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import expansion, family, loud, oracle
from .errors import DegenerateQ, DulacKitError, Inconclusive
from .series import TruncatedSeries

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_HYPOTHESIS = 2
EXIT_PARSE = 3
EXIT_REFUSED = 4


def _load_spec(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _series_from(data) -> TruncatedSeries:
    return TruncatedSeries.from_json([str(tok) for tok in data])


def _family_from(data) -> family.PolynomialFamily:
    return family.PolynomialFamily.from_json(data)


def _write_json(obj, out_dir: Path, name: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _write_csv(rows, out_dir: Path, name: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)
    return path


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("DULACKIT_THREADS")
    return max(1, int(env)) if env else 1


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _analyze(spec: dict):
    fam = _family_from(spec["family"])
    sign = int(spec.get("sign", +1))
    branch = family.biggest_real_root_branch(fam, sign)
    Q = family.compute_Q(fam, branch)
    nd = family.newton_diagram(Q)
    family.check_h0(nd)
    try:
        family.check_h2(nd)
    except Inconclusive as exc:
        nd.h2 = family.Verdict(
            holds=False,
            witness=exc.theta,
            detail=f"inconclusive: {exc}",
        )
    return fam, branch, nd


def cmd_check(spec: dict, out_dir: Path) -> int:
    fam, branch, nd = _analyze(spec)
    report = {
        "family": fam.to_json(),
        "branch": {
            "rho": branch.rho,
            "sigma": branch.sigma.to_json(),
            "sign": branch.sign,
            "exact": branch.exact,
        },
        "newton": nd.to_json(),
    }
    _write_json(report, out_dir, "check.json")
    print(json.dumps(report["newton"], sort_keys=True))
    return EXIT_PASS


def _unfolding_spec(spec: dict, fam, branch) -> expansion.UnfoldingSpec:
    return expansion.UnfoldingSpec(
        family=fam,
        branch=branch,
        V=_series_from(spec.get("V", ["1"])),
        U=_series_from(spec.get("U", ["0"])),
        lam=float(spec.get("lambda", 1.0)),
        eps=float(spec.get("eps", 0.0)),
    )


def cmd_expand(spec: dict, out_dir: Path) -> int:
    fam, branch, nd = _analyze(spec)
    if not (nd.h1.holds and nd.h2.holds):
        sys.stderr.write(
            "refusing to expand: hypothesis verdicts "
            f"h1={nd.h1.holds} h2={nd.h2.holds}\n"
        )
        return EXIT_REFUSED
    uspec = _unfolding_spec(spec, fam, branch)
    ell = int(spec.get("ell", 2))
    res = expansion.coefficients(uspec, ell, check_validity=True)
    _write_json(res.to_json(), out_dir, "expansion.json")
    print(json.dumps(res.to_json(), sort_keys=True))
    return EXIT_PASS


def _s_grid(spec: dict):
    g = spec.get("s_grid", {})
    return np.geomspace(
        float(g.get("min", 1e-3)), float(g.get("max", 1e-1)), int(g.get("n", 25))
    )


def _quad_config(spec: dict) -> oracle.QuadratureConfig:
    o = spec.get("oracle", {})
    return oracle.QuadratureConfig(
        rel_tol=float(o.get("rel_tol", 1e-10)),
        abs_tol=float(o.get("abs_tol", 1e-13)),
        max_subdivisions=int(o.get("max_subdivisions", 200)),
        substitution=bool(o.get("substitution", True)),
        ode_rel_tol=float(o.get("ode_rel_tol", 1e-9)),
        ode_abs_tol=float(o.get("ode_abs_tol", 1e-12)),
    )


def cmd_verify(spec: dict, out_dir: Path, threads: int) -> int:
    kind = spec.get("kind", "orbit")
    fam, branch, nd = _analyze(spec)
    cfg = _quad_config(spec)
    ell = int(spec.get("ell", 2))
    k = int(spec.get("k", 1))
    x0 = float(spec.get("x0", 1.0))
    s_grid = _s_grid(spec)

    if kind == "orbit":
        uspec = _unfolding_spec(spec, fam, branch)
        res = expansion.coefficients(uspec, ell)
        res = _apply_overrides(res, spec)
        case = oracle.FlatnessCase(
            label={"case": "orbit", "eps": float(uspec.eps)},
            values_fn=lambda s: oracle.particular_solution(uspec, x0, s, cfg),
            expansion=res,
            lam=float(uspec.lam),
        )
    elif kind == "dulac_map":
        uspec = _unfolding_spec(spec, fam, branch)
        res = expansion.ExpansionResult(c=(0.0,) * (ell + 1), ell=ell)
        case = oracle.FlatnessCase(
            label={"case": "dulac_map", "eps": float(uspec.eps)},
            values_fn=lambda s: oracle.dulac_map(uspec, s, cfg),
            expansion=res,
            lam=float(uspec.lam),
        )
    elif kind == "dulac_time":
        modes = tuple(_series_from(m) for m in spec["modes"])
        ts = expansion.DulacTimeSpec(
            family=fam,
            branch=branch,
            V=_series_from(spec.get("V", ["1"])),
            eps=float(spec.get("eps", 0.0)),
            modes=modes,
            y0=float(spec.get("y0", 1.0)),
            x0=x0,
        )
        res = expansion.dulac_time_coefficients(ts, ell)
        res = _apply_overrides(res, spec)
        case = oracle.FlatnessCase(
            label={"case": "dulac_time", "eps": float(ts.eps)},
            values_fn=lambda s: oracle.dulac_time(ts, s, cfg),
            expansion=res,
            lam=1.0,
        )
    else:
        raise ValueError(f"unknown verify kind {kind!r}")

    tol = float(spec.get("flatness_tol", 1e-2))
    report = oracle.flatness_report([case], s_grid=s_grid, k=k, tol=tol)
    _write_csv(report.to_csv_rows(), out_dir, "flatness.csv")
    summary = report.to_json()
    summary["passed"] = bool(all(report.decay_ok))
    _write_json(summary, out_dir, "verify.json")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


def _apply_overrides(res, spec: dict):
    """Debug hook: replace chosen coefficients before verification."""
    overrides = spec.get("debug_coefficient_overrides")
    if not overrides:
        return res
    c = list(res.c)
    for idx, val in overrides.items():
        c[int(idx)] = float(val)
    return expansion.ExpansionResult(c=tuple(c), ell=res.ell, meta=dict(res.meta))


def cmd_loud(spec: dict, out_dir: Path, threads: int) -> int:
    conf = spec.get("loud", {})
    D_grid = [float(d) for d in conf.get("D_grid", [-0.9, -0.75, -0.5, -0.25, -0.1])]
    F = float(conf.get("F", 1.0))
    s_vals = conf.get("s_grid")
    s_grid = (
        np.geomspace(1e-3, 1e-2, 7)
        if s_vals is None
        else np.asarray([float(x) for x in s_vals])
    )

    gamma_self_test = {
        "gamma(1)": loud.gamma(1.0),
        "gamma(5)": loud.gamma(5.0),
        "gamma(0.5)^2/pi": loud.gamma(0.5) ** 2 / np.pi,
    }
    c1_table = []
    for D in D_grid:
        if D == -0.5:
            continue
        pp = loud.LoudParams(D=D, F=1 - 1e-4)
        c1_table.append(
            {
                "D": D,
                "c1_hat": loud.c1_hat(pp),
                "limit": loud.c1_hat_limit(D),
            }
        )
    report = loud.regularity_check(D_grid, F=F, s_grid=s_grid)

    samples = [["D", "s", "period"]]
    def one(D):
        p = loud.LoudParams(D=D, F=F)
        return [(D, float(sj), loud.period_numeric(p, float(sj))) for sj in s_grid]
    for chunk in _pmap(one, D_grid, threads):
        for D, sj, P in chunk:
            samples.append([f"{D:.17g}", f"{sj:.17g}", f"{P:.17g}"])
    _write_csv(samples, out_dir, "period_samples.csv")

    out = {
        "gamma_self_test": gamma_self_test,
        "c1_limit_table": c1_table,
        "regularity": report.to_json(),
    }
    _write_json(out, out_dir, "loud.json")
    print(json.dumps(out["regularity"], sort_keys=True))
    ok = all(r.near_zero or (r.coherent is True) for r in report.rows)
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dulackit", description=__doc__)
    parser.add_argument("command", choices=["check", "expand", "verify", "loud"])
    parser.add_argument("spec", help="path to the problem spec JSON")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        spec = _load_spec(args.spec)
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"cannot read spec: {exc}\n")
        return EXIT_PARSE

    out_dir = Path(args.out)
    try:
        if args.command == "check":
            return cmd_check(spec, out_dir)
        if args.command == "expand":
            return cmd_expand(spec, out_dir)
        if args.command == "verify":
            return cmd_verify(spec, out_dir, _threads(args))
        return cmd_loud(spec, out_dir, _threads(args))
    except DegenerateQ as exc:
        sys.stderr.write(f"hypothesis failure: {exc}\n")
        return EXIT_HYPOTHESIS
    except (KeyError, ValueError, TypeError) as exc:
        sys.stderr.write(f"bad spec: {exc}\n")
        return EXIT_PARSE
    except DulacKitError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
