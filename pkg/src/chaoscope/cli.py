"""Command-line front end: matrices, percolation runs, bounds, Gaussian
certification, SDE simulation, and the verification battery.

Every output file gets a `<file>.manifest.json` sidecar recording the
subcommand, full parameter echo, seed, version, wall-clock, and output list.
Payload files carry only numbers, so reruns with the same parameters and seed
are byte-identical whatever the thread count; wall-clock lives in the
manifest alone.  Exit codes: 0 success, 1 failed checks, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import __version__
from . import bounds as bounds_mod
from . import gaussian as gauss
from . import percolation as perc
from . import sde
from . import verify as verify_mod
from .matrix import (Graph, InteractionMatrix, MatrixError, SubsetState,
                     build_mean_field, build_random_walk, build_sequential,
                     load_matrix, p_xi, q_xi, sample_erdos_renyi, save_matrix,
                     validate)
from .percolation import EngineTooLarge, PercolationModel
from .rng import stream


# ---------------------------------------------------------------------------
# Shared plumbing

def _add_source(p: argparse.ArgumentParser, random_n: bool = False,
                required: bool = True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--matrix", metavar="FILE", help="load a saved matrix (.json or .csv)")
    g.add_argument("--mean-field", type=int, metavar="N", help="complete graph on N, delta=1/(N-1)")
    g.add_argument("--random-walk", metavar="GRAPH", help="edge-list file; rows are 1/degree")
    g.add_argument("--er", nargs=2, metavar=("N", "P"), help="Erdos-Renyi random-walk matrix (uses --seed)")
    g.add_argument("--sequential", type=int, metavar="N", help="row i feeds on 0..i-1 with weight 1/i")
    if random_n:
        g.add_argument("--n", type=int, metavar="N",
                       help="random substochastic matrix of size N (uses --seed)")


def _build_xi(args) -> InteractionMatrix:
    if args.matrix:
        return load_matrix(args.matrix)
    if args.mean_field:
        return build_mean_field(args.mean_field)
    if args.random_walk:
        return build_random_walk(Graph.from_file(args.random_walk))
    if args.er:
        n, prob = int(args.er[0]), float(args.er[1])
        return build_random_walk(sample_erdos_renyi(n, prob, args.seed))
    if args.sequential:
        return build_sequential(args.sequential)
    if getattr(args, "n", None):
        return verify_mod.random_substochastic(args.n, stream(args.seed))
    raise MatrixError("no matrix source given")


def _parse_subset(spec: str, n: int) -> SubsetState:
    try:
        members = [int(s) for s in spec.replace(",", " ").split()]
    except ValueError:
        raise MatrixError(f"cannot parse subset {spec!r}; want comma-separated indices")
    if not members:
        raise MatrixError("subset must be nonempty")
    return SubsetState.of(members, n)


def _parse_times(spec: str) -> list[float]:
    try:
        return [float(s) for s in spec.replace(",", " ").split()]
    except ValueError:
        raise MatrixError(f"cannot parse time list {spec!r}")


def _fmt(x) -> str:
    return repr(float(x))


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if c is None else (_fmt(c) if isinstance(c, float) else c)
                    for c in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _deliver(text: str, args, outputs: list):
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        outputs.append(out)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _emit_gnuplot(csv_path: str, xcol: int, ycol: int, xlabel: str,
                  ylabel: str, outputs: list):
    """Companion gnuplot script next to a CSV (column indices are 1-based)."""
    path = str(csv_path) + ".gnu"
    with open(path, "w") as fh:
        fh.write("set datafile separator ','\n"
                 f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"
                 "set key autotitle columnhead\n"
                 f"plot '{csv_path}' using {xcol}:{ycol} with linespoints\n"
                 "pause -1\n")
    outputs.append(path)


def _write_manifests(subcommand: str, args, outputs: list, elapsed: float):
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {"subcommand": subcommand, "parameters": params,
                "seed": getattr(args, "seed", None), "version": __version__,
                "wall_clock_s": elapsed, "outputs": [str(p) for p in outputs]}
    for path in outputs:
        with open(f"{path}.manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1, default=str)
            fh.write("\n")


def _constants_from(args, required: bool = False):
    vals = (args.gamma, args.big_m, args.sigma_const, args.horizon)
    if any(v is None for v in vals):
        if required:
            raise MatrixError("this theorem needs --gamma, --big-m, --sigma-const and --horizon")
        return None
    return bounds_mod.ModelConstants(gamma=args.gamma, M=args.big_m,
                                     sigma=args.sigma_const, T=args.horizon,
                                     eta=args.eta, C0=args.c0)


def _add_constants(p: argparse.ArgumentParser):
    p.add_argument("--gamma", type=float, help="transport constant of the kernel")
    p.add_argument("--big-m", type=float, help="second-moment constant M")
    p.add_argument("--sigma-const", type=float, help="noise level sigma")
    p.add_argument("--horizon", type=float, help="time horizon T")
    p.add_argument("--eta", type=float, help="log-Sobolev constant (uniform mode)")
    p.add_argument("--c0", type=float, default=0.0, help="initial-chaoticity constant")


# ---------------------------------------------------------------------------
# Subcommands

def cmd_matrix(args) -> int:
    outputs: list = []
    t0 = time.perf_counter()
    xi = _build_xi(args)
    rows_ok = validate(xi).ok
    full = validate(xi, check_columns=True)
    report = {
        "n": xi.n,
        "delta": float(xi.delta),
        "delta_i": [float(x) for x in xi.delta_i],
        "max_row_sum": float(xi.row_sums.max()),
        "max_col_sum": float(xi.col_sums.max()),
        "rows_ok": bool(rows_ok),
        "cols_ok": bool(full.ok),
        "validity": full.describe(),
        "p_xi": float(p_xi(xi)),
    }
    if args.v:
        v = _parse_subset(args.v, xi.n)
        report["v"] = v.sorted_members()
        report["q_xi"] = float(q_xi(xi, v))
    if args.save:
        save_matrix(xi, args.save)
        outputs.append(args.save)
    if args.format == "csv":
        rows = []
        for key, val in report.items():
            if key == "delta_i":
                rows.extend([f"delta_i[{i}]", float(x)] for i, x in enumerate(val))
            elif key == "v":
                rows.append(["v", " ".join(str(i) for i in val)])
            else:
                rows.append([key, float(val) if isinstance(val, (int, float)) and
                             not isinstance(val, bool) else str(val)])
        text = _csv_text(["quantity", "value"], rows)
    else:
        text = _json_text(report)
    _deliver(text, args, outputs)
    _write_manifests("matrix", args, outputs, time.perf_counter() - t0)
    return 0


def cmd_percolate(args) -> int:
    outputs: list = []
    t0 = time.perf_counter()
    xi = _build_xi(args)
    model = PercolationModel(xi, args.kappa)
    v = _parse_subset(args.v, xi.n)
    times = _parse_times(args.t)
    table = perc.functional_table(args.functional, xi) if args.engine == "exact" else None
    rows = []
    records = []
    for t in times:
        if args.engine == "exact":
            val = perc.exact_expectation(model, table, v, t)
            est_err, reps, seed = None, None, None
        else:
            method = "gillespie" if args.engine == "mc" else "fpp"
            est = perc.mc_expectation(model, args.functional, v, t,
                                      reps=args.reps, seed=args.seed,
                                      method=method, threads=args.threads)
            val, est_err, reps, seed = est.mean, est.stderr, est.reps, est.seed
        rows.append([args.engine, args.functional, str(v), float(t), float(val),
                     None if est_err is None else float(est_err),
                     "" if reps is None else reps, "" if seed is None else seed])
        rec = {"engine": args.engine, "functional": args.functional,
               "v": v.sorted_members(), "t": t, "value": val}
        if est_err is not None:
            rec.update(stderr=est_err, reps=reps, seed=seed)
        records.append(rec)
    header = ["engine", "functional", "v", "t", "value", "stderr", "reps", "seed"]
    text = _csv_text(header, rows) if args.format == "csv" else _json_text(records)
    _deliver(text, args, outputs)
    if args.emit_gnuplot and args.out and args.format == "csv":
        _emit_gnuplot(args.out, 4, 5, "t", args.functional, outputs)
    _write_manifests("percolate", args, outputs, time.perf_counter() - t0)
    return 0


def cmd_verify(args) -> int:
    outputs: list = []
    t0 = time.perf_counter()
    results = verify_mod.run_suite(args.suite, args.instances, args.seed)
    for r in results:
        slacks = [c.slack for c in r.checks if c.slack is not None]
        worst = min(slacks) if slacks else float("nan")
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.suite}: {len(r.checks)} checks, min slack {worst:.3e}, {status}")
        if not r.passed:
            for c in r.checks:
                if not c.passed:
                    detail = "" if c.slack is None else f" (slack {c.slack:.3e})"
                    print(f"  FAIL {c.name}{detail}{' ' + c.note if c.note else ''}")
    if args.out:
        verify_mod.save_results(results, args.out)
        outputs.append(args.out)
    _write_manifests("verify", args, outputs, time.perf_counter() - t0)
    return 0 if all(r.passed for r in results) else 1


def cmd_gaussian(args) -> int:
    outputs: list = []
    t0 = time.perf_counter()
    xi = _build_xi(args)
    gm = gauss.sigma_T(xi, args.T)
    info = {"n": gm.n, "T": gm.T, "rho": gm.rho, "small_time": gm.small_time()}
    if args.avg_k:
        avg = gauss.avg_entropy(gm, args.avg_k, mode=args.mode,
                                reps=args.reps, seed=args.seed)
        lo, hi = gauss.avg_entropy_sandwich(gm, args.avg_k)
        lo_e, hi_e = gauss.avg_entropy_sandwich(gm, args.avg_k, explicit=True)
        rec = dict(info, k=args.avg_k, mode=avg.mode, avg=avg.value,
                   lower=lo, upper=hi, explicit_lower=lo_e, explicit_upper=hi_e)
        if avg.stderr is not None:
            rec["stderr"] = avg.stderr
        header = ["k", "mode", "avg", "stderr", "lower", "upper",
                  "explicit_lower", "explicit_upper"]
        rows = [[args.avg_k, avg.mode, float(avg.value),
                 None if avg.stderr is None else float(avg.stderr),
                 float(lo), float(hi), float(lo_e), float(hi_e)]]
        text = _csv_text(header, rows) if args.format == "csv" else _json_text(rec)
    else:
        if args.v:
            subsets = [_parse_subset(s, xi.n) for s in args.v]
        else:
            subsets = [SubsetState.of([i], xi.n) for i in range(xi.n)]
        rows, recs = [], []
        row_ok = validate(xi).ok
        for v in subsets:
            pair = gauss.entropy_bounds(gm, v)
            clique = gauss.clique_lower(xi, v, gm.T)
            worst = gauss.max_upper(gm, v) if row_ok else None
            rows.append([str(v), float(pair.exact), float(pair.lower),
                         float(pair.upper), float(clique),
                         None if worst is None else float(worst)])
            rec = {"v": v.sorted_members(), "exact": pair.exact,
                   "lower": pair.lower, "upper": pair.upper,
                   "clique_lower": clique, "small_time": pair.small_time}
            if worst is not None:
                rec["max_upper"] = worst
            recs.append(rec)
        header = ["v", "exact", "lower", "upper", "clique_lower", "max_upper"]
        text = _csv_text(header, rows) if args.format == "csv" \
            else _json_text(dict(info, subsets=recs))
    _deliver(text, args, outputs)
    _write_manifests("gaussian", args, outputs, time.perf_counter() - t0)
    return 0


def cmd_bound(args) -> int:
    outputs: list = []
    t0 = time.perf_counter()
    constants = _constants_from(args, required=args.theorem in ("h3", "growth"))
    if args.theorem == "h3":
        if args.delta is None:
            raise MatrixError("--theorem h3 needs --delta")
        val = bounds_mod.h3_bound(constants, args.delta, uniform=args.uniform)
        report = bounds_mod.BoundReport(
            "h3", val, {"delta": args.delta, "uniform": args.uniform,
                        **bounds_mod._echo(constants)}, 1.0, explicit=val)
    else:
        xi = _build_xi(args)
        if args.theorem == "growth":
            v = _parse_subset(args.v, xi.n)
            model = PercolationModel(xi, constants.rate_scale())
            val = bounds_mod.percolation_entropy_bound(
                model, v, constants, use_chat=args.use_chat,
                h3=args.h3_value, uniform=args.uniform)
            report = bounds_mod.BoundReport(
                "growth", val,
                {"v": v.sorted_members(), "n": xi.n, "use_chat": args.use_chat,
                 "uniform": args.uniform, **bounds_mod._echo(constants)},
                1.0, explicit=val)
        elif args.theorem == "setwise":
            report = bounds_mod.setwise_bound(xi, _parse_subset(args.v, xi.n),
                                              constants)
        else:
            if args.k is None:
                raise MatrixError(f"--theorem {args.theorem} needs --k")
            if args.theorem == "max":
                report = bounds_mod.max_entropy_bound(xi, args.k, constants)
            elif args.theorem == "avg":
                report = bounds_mod.avg_entropy_bound(xi, args.k, constants)
            elif args.theorem == "avg-2way":
                report = bounds_mod.sharper_avg_bound(xi, args.k, constants)
            else:  # avg-markov
                if args.pi:
                    with open(args.pi) as fh:
                        pi = json.load(fh)
                else:
                    pi = np.full(xi.n, 1.0 / xi.n)
                report = bounds_mod.weighted_avg_bound(xi, args.k, pi, constants)
        if args.reversed:
            report = bounds_mod.reversed_variant(report)
    if args.format == "csv":
        text = _csv_text(["theorem", "structural", "explicit", "inputs"],
                         [list(report.csv_row())])
    else:
        text = _json_text(report.to_json_dict())
    _deliver(text, args, outputs)
    _write_manifests("bound", args, outputs, time.perf_counter() - t0)
    return 0


def cmd_simulate(args) -> int:
    outputs: list = []
    t0 = time.perf_counter()
    xi = _build_xi(args)
    if args.drift == "linear":
        drift = sde.DriftSpec.linear()
    elif args.drift == "zero":
        drift = sde.DriftSpec.zero()
    else:
        drift = sde.DriftSpec.custom(args.drift)
    cfg = sde.SimConfig(dt=args.dt, T=args.T, samples=args.samples,
                        seed=args.seed, sigma=args.sigma)
    run = sde.simulate_projection if args.projection else sde.simulate_particles
    samples = run(xi, drift, cfg, threads=args.threads)
    if args.save_samples:
        sde.save_samples(samples, args.save_samples)
        outputs.append(args.save_samples)
    emp = np.cov(samples, rowvar=False)
    emp = np.atleast_2d(emp)
    dim = emp.shape[0]
    oracle = None
    if drift.kind in ("linear", "zero"):
        if args.projection or drift.kind == "zero":
            # decoupled: each coordinate is a plain Brownian motion
            oracle = args.sigma ** 2 * args.T * np.eye(dim)
        else:
            oracle = args.sigma ** 2 * gauss.sigma_T(xi, args.T).sigma_T
    rows, recs = [], []
    for i in range(dim):
        for j in range(i, dim):
            stderr = float(np.sqrt((emp[i, i] * emp[j, j] + emp[i, j] ** 2)
                                   / samples.shape[0]))
            ora = None if oracle is None else float(oracle[i, j])
            diff = None if ora is None else abs(float(emp[i, j]) - ora)
            rows.append([i, j, float(emp[i, j]), ora, diff, stderr])
            rec = {"i": i, "j": j, "empirical": float(emp[i, j]), "stderr": stderr}
            if ora is not None:
                rec.update(oracle=ora, abs_diff=diff)
            recs.append(rec)
    header = ["i", "j", "empirical", "oracle", "abs_diff", "stderr"]
    text = _csv_text(header, rows) if args.format == "csv" else _json_text(recs)
    _deliver(text, args, outputs)
    if args.emit_gnuplot and args.out and args.format == "csv":
        _emit_gnuplot(args.out, 3, 4, "empirical", "oracle", outputs)
    _write_manifests("simulate", args, outputs, time.perf_counter() - t0)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="chaoscope",
        description="entropy bounds for interacting diffusions: matrices, "
                    "growth-process runs, Gaussian certification, simulation")
    top.add_argument("--version", action="version", version=f"chaoscope {__version__}")
    sub = top.add_subparsers(dest="subcommand", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", metavar="FILE", help="write the table here instead of stdout")
            p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("matrix", help="build or inspect an interaction matrix")
    _add_source(p)
    common(p)
    p.add_argument("--save", metavar="FILE", help="save the matrix (.json or .csv)")
    p.add_argument("--v", metavar="SUBSET", help="also report q_xi on this subset, e.g. '0,2,5'")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("percolate", help="run the subset growth process")
    _add_source(p)
    common(p)
    p.add_argument("--engine", choices=("exact", "mc", "fpp"), default="exact")
    p.add_argument("--functional", choices=("size", "size2", "size3"), default="size")
    p.add_argument("--v", required=True, metavar="SUBSET", help="start subset, e.g. '0,1'")
    p.add_argument("--t", required=True, metavar="TIMES", help="comma-separated times")
    p.add_argument("--kappa", type=float, default=1.0, help="rate scale")
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--emit-gnuplot", action="store_true")
    p.set_defaults(func=cmd_percolate)

    p = sub.add_parser("verify", help="run the inequality battery")
    p.add_argument("--suite", choices=verify_mod.SUITES + ("all",), default="all")
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="FILE", help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gaussian", help="exact entropies and bounds for linear drift")
    _add_source(p, random_n=True)
    common(p)
    p.add_argument("--T", type=float, required=True, help="time horizon")
    p.add_argument("--v", action="append", metavar="SUBSET",
                   help="subset to evaluate (repeatable); default: all singletons")
    p.add_argument("--avg-k", type=int, help="average entropy over subsets of this size")
    p.add_argument("--mode", choices=("enumerate", "sample"), default="enumerate")
    p.add_argument("--reps", type=int, default=10000, help="sample mode: number of subsets")
    p.set_defaults(func=cmd_gaussian)

    p = sub.add_parser("bound", help="evaluate a structural entropy bound")
    _add_source(p, required=False)  # h3 is matrix-free
    common(p)
    p.add_argument("--theorem", required=True,
                   choices=("max", "avg", "avg-markov", "avg-2way", "setwise",
                            "h3", "growth"))
    p.add_argument("--k", type=int, help="subset size for max/avg theorems")
    p.add_argument("--v", metavar="SUBSET", help="subset for setwise/growth")
    p.add_argument("--pi", metavar="FILE", help="JSON weight vector for avg-markov")
    p.add_argument("--delta", type=float, help="interaction strength for h3")
    p.add_argument("--reversed", action="store_true",
                   help="reversed-entropy variant (drops the size prefactor)")
    p.add_argument("--uniform", action="store_true", help="uniform-in-time mode")
    p.add_argument("--use-chat", action="store_true",
                   help="growth: use the self-improved cost functional")
    p.add_argument("--h3-value", type=float, default=0.0,
                   help="growth: three-particle entropy ceiling for --use-chat")
    _add_constants(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("simulate", help="Euler-Maruyama particle or projected system")
    _add_source(p, random_n=True)
    common(p)
    p.add_argument("--drift", default="linear",
                   help="linear | zero | a named custom drift (sine)")
    p.add_argument("--linear", dest="drift", action="store_const", const="linear")
    p.add_argument("--zero", dest="drift", action="store_const", const="zero")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--projection", action="store_true",
                   help="simulate the decoupled projection instead of particles")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--save-samples", metavar="FILE")
    p.add_argument("--emit-gnuplot", action="store_true")
    p.set_defaults(func=cmd_simulate)

    return top


def console_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, EngineTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(console_main())
