"""Command-line entry point: ``imbalance <subcommand> [flags]``.

Every output carries the resolved configuration and package version in
``#`` header lines, and floats are printed with 17 significant digits so
that identical configurations give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attractors import classify
from .kernel import build_kernel
from .measure import DegenerateChain, branch_order, invariant_measure, measure_stats
from .oracle import build_chain, stationary_solve
from .params import InvalidParameter, ModelParams
from .sweep import solve_branch, evaluate_cell, grid, parse_range
from .wealth import optimal_q

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

DEFAULTS = {"gamma": "-0.7", "q": "1", "beta": "inf", "format": "csv", "price": "1",
            "f_plus": "1", "seed": "0", "init_eta1": "random", "init_eta2": "random",
            "record": "hist", "path_stride": "1"}
# per-subcommand overrides of DEFAULTS; None means "let the library decide"
SUB_DEFAULTS = {("qstar", "q"): "0.01:1:0.01", ("simulate", "f_plus"): None}
SUBCOMMANDS = ("kernel", "classify", "measure", "wealth", "qstar", "sweep", "simulate", "oracle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if isinstance(v, dict):
        return ";".join(f"{k}:{_fmt(x)}" for k, x in sorted(v.items()))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _add_model_flags(p, ranges=False):
    kind = "start:stop:step or value" if ranges else None
    p.add_argument("--n", help="number of agents N")
    p.add_argument("--d", help="half the neighbourhood size")
    p.add_argument("--alpha", help=f"coupling constant ({kind})" if kind else "coupling constant")
    p.add_argument("--gamma", help=f"impact asymmetry ({kind})" if kind else "impact asymmetry")
    p.add_argument("--q", help=f"strategic mixing ({kind})" if kind else "strategic mixing")
    p.add_argument("--beta", help="inverse temperature (inf for the frozen phase)")


def _add_common(p):
    p.add_argument("--config", help="key=value file; flags override its values")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imbalance", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS[:-1]) + "}",
                                parser_class=_Parser)

    for name, text in (("kernel", "dump the frozen-phase transition kernel"),
                       ("classify", "attractor class of every imbalance level")):
        p = sub.add_parser(name, help=text)
        _add_model_flags(p)
        _add_common(p)

    p = sub.add_parser("measure", help="invariant measure for every A2 branch")
    _add_model_flags(p)
    _add_common(p)

    for name, text in (("wealth", "stationary market increment over a q grid"),
                       ("qstar", "optimal q over an alpha or gamma sweep"),
                       ("sweep", "existence, uniqueness and wealth over a parameter grid")):
        p = sub.add_parser(name, help=text)
        _add_model_flags(p, ranges=True)
        _add_common(p)
        p.add_argument("--price", help="price P (increments scale with f(1,N) P)")
        p.add_argument("--f-plus", dest="f_plus", help="impact of one buyer f(1,N)")
        p.add_argument("--jobs", help="worker processes (default $IMBAL_JOBS or 1)")

    p = sub.add_parser("simulate", help="Monte Carlo run of the jump chain")
    _add_model_flags(p)
    _add_common(p)
    p.add_argument("--epochs")
    p.add_argument("--seed")
    p.add_argument("--init-eta1", dest="init_eta1", help="random|plus|minus or a file of N spins")
    p.add_argument("--init-eta2", dest="init_eta2",
                   help="random|plus|minus or a file of N+1 spins")
    p.add_argument("--record", help="comma list from hist,path,eta2,wealth")
    p.add_argument("--path-stride", dest="path_stride")
    p.add_argument("--f-plus", dest="f_plus", help="impact of one buyer (default 1/N)")

    p = sub.add_parser("oracle")  # debugging aid, left out of the help listing
    _add_model_flags(p)
    _add_common(p)
    return parser


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_").lower()] = value
    return values


def parse_config(argv=None) -> dict:
    """Merge flags over the optional config file; returns the resolved config."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS[:-1]))
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "subcommand")}
    from_file = _read_config_file(ns.config) if ns.config else {}
    unknown = sorted(set(from_file) - set(flags))
    if unknown:
        raise UsageError(f"unknown config keys for {ns.subcommand}: {', '.join(unknown)}")
    cfg = {"subcommand": ns.subcommand}
    for key, value in flags.items():
        if value is None:
            default = SUB_DEFAULTS.get((ns.subcommand, key), DEFAULTS.get(key))
            value = from_file.get(key, default)
        cfg[key] = value
    for key in ("n", "d", "alpha"):
        if cfg.get(key) is None:
            raise UsageError(f"--{key} is required (flag or config file)")
    if ns.subcommand in ("wealth", "qstar", "sweep") and cfg.get("jobs") is None:
        cfg["jobs"] = os.environ.get("IMBAL_JOBS", "1")
    if ns.subcommand == "simulate" and cfg.get("epochs") is None:
        raise UsageError("--epochs is required for simulate")
    return cfg


def _int(cfg, key):
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise UsageError(f"--{key} must be an integer, got {cfg[key]!r}") from exc


def _float(cfg, key):
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise UsageError(f"--{key} must be a number, got {cfg[key]!r}") from exc


def _range(cfg, key):
    try:
        return parse_range(cfg[key])
    except ValueError as exc:
        raise UsageError(f"--{key}: {exc}") from exc


def _params(cfg) -> ModelParams:
    return ModelParams(N=_int(cfg, "n"), d=_int(cfg, "d"), alpha=_float(cfg, "alpha"),
                       gamma=_float(cfg, "gamma"), q=_float(cfg, "q"), beta=_float(cfg, "beta"))


class _Output:
    """Collects named tables and metadata, then writes them to a directory or stdout."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.tables = []  # (name, header, rows)
        self.meta = {}

    def header_lines(self):
        resolved = {k: v for k, v in self.cfg.items() if v is not None}
        return [f"# imbalance {__version__}",
                "# config: " + json.dumps(resolved, sort_keys=True)]

    def table(self, name, header, rows):
        self.tables.append((name, list(header), [list(r) for r in rows]))

    def _csv(self, header, rows):
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def _json_doc(self, with_tables):
        doc = {"version": __version__,
               "config": {k: v for k, v in self.cfg.items() if v is not None}}
        doc.update(_jsonable(self.meta))
        if with_tables:
            for name, header, rows in self.tables:
                doc[name] = [dict(zip(header, _jsonable(r))) for r in rows]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self):
        fmt = self.cfg.get("format") or "csv"
        out = self.cfg.get("out")
        if out is None:
            if fmt == "json":
                sys.stdout.write(self._json_doc(True))
                return
            for name, header, rows in self.tables:
                sys.stdout.write(self._csv(header, rows))
            if self.meta:
                sys.stdout.write(self._json_doc(False))
            return
        outdir = Path(out)
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            sub = self.cfg["subcommand"]
            if fmt == "json":
                (outdir / f"{sub}.json").write_text(self._json_doc(True))
                return
            for name, header, rows in self.tables:
                (outdir / f"{name}.csv").write_text(self._csv(header, rows))
            if self.meta:
                (outdir / f"{sub}.json").write_text(self._json_doc(False))
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write output: {exc.strerror}",
                          exc.filename or str(outdir)) from exc


def _cmd_kernel(cfg, out):
    kernel = build_kernel(_params(cfg))
    out.table("kernel", ("i", "stay_plus", "stay_minus", "p_pp", "p_pm", "p_mm", "p_mp", "e_plus"),
              kernel.rows())


def _cmd_classify(cfg, out):
    kernel = build_kernel(_params(cfg))
    cls = classify(kernel)
    out.table("classify", ("i", "e_plus", "in_B", "in_C", "class"), cls.rows(kernel))


def _cmd_measure(cfg, out):
    params = _params(cfg)
    cell = evaluate_cell(params)
    kernel = build_kernel(params)
    cls = classify(kernel)
    rows, branches = [], []
    if cell.status == "ok":
        for b, branch in enumerate(branch_order(cls.a2_levels)):
            m, _ = solve_branch(kernel, cls, branch)
            if m is None:
                continue
            st = measure_stats(m)
            branches.append({"branch": b, "assignment": branch, "mode": st.global_mode,
                             "modes": list(st.mode_list), "mean": st.mean,
                             "mass5": st.mode_mass_5})
            rows.extend((b, lvl, p) for lvl, p in enumerate(m.pi))
    out.table("measure", ("branch", "level", "pi"), rows)
    out.meta = {"exists": cell.exists, "unique": cell.unique, "status": cell.status,
                "branches": branches, "a2_levels": cell.a2_levels, "a3_levels": cell.a3_levels,
                "mode": cell.mode, "mean": cell.mean, "mass5": cell.mass5,
                "fallback": cell.fallback}


def _evaluate(args):
    params, price, f_plus = args
    return evaluate_cell(params, price=price, f_plus=f_plus)


def _cells(cfg, param_list):
    price, f_plus = _float(cfg, "price"), _float(cfg, "f_plus")
    jobs = _int(cfg, "jobs")
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    work = [(p, price, f_plus) for p in param_list]
    if jobs == 1 or len(work) < 2:
        return [_evaluate(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate, work, chunksize=max(1, len(work) // (4 * jobs))))


def _grid(cfg):
    N, d = _int(cfg, "n"), _int(cfg, "d")
    params = grid(N, d, _range(cfg, "alpha"), _range(cfg, "gamma"), _range(cfg, "q"))
    if not params:
        raise UsageError("empty parameter grid")
    return params


def _q_star(cells):
    scored = [c for c in cells if c.dw is not None]
    if not scored:
        return None
    best = scored[0]
    for c in scored[1:]:
        if c.dw > best.dw and not math.isclose(c.dw, best.dw, rel_tol=1e-12, abs_tol=1e-15):
            best = c
    return best.params.q


def _cmd_wealth(cfg, out):
    cells = _cells(cfg, _grid(cfg))
    out.table("wealth", ("alpha", "gamma", "q", "exists", "unique", "dW", "mode", "mean",
                         "disagreement_count"),
              ((c.params.alpha, c.params.gamma, c.params.q, c.exists, c.unique, c.dw, c.mode,
                c.mean, c.disagreement_count) for c in cells))


def _cmd_sweep(cfg, out):
    cells = _cells(cfg, _grid(cfg))
    groups = {}
    for c in cells:
        groups.setdefault((c.params.alpha, c.params.gamma), []).append(c)
    qstar = {k: _q_star(v) for k, v in groups.items()} if len(_range(cfg, "q")) > 1 else {}
    rows = []
    for c in cells:
        p = c.params
        rows.append((p.N, p.d, p.alpha, p.gamma, p.q, c.status, c.exists, c.unique,
                     len(c.a2_levels), c.a2_levels, c.a3_levels, c.best_branch, c.mode, c.mean,
                     c.mass5, c.dw, qstar.get((p.alpha, p.gamma))))
    out.table("sweep", ("N", "d", "alpha", "gamma", "q", "status", "exists", "unique", "n_a2",
                        "a2_levels", "a3_levels", "branch", "mode", "mean", "mass5", "dW",
                        "qstar"), rows)


def _qstar_one(args):
    base, qs, price, f_plus = args
    return optimal_q(base, qs, price=price, f_plus=f_plus)


def _cmd_qstar(cfg, out):
    N, d = _int(cfg, "n"), _int(cfg, "d")
    alphas, gammas = _range(cfg, "alpha"), _range(cfg, "gamma")
    qs = _range(cfg, "q")
    price, f_plus, jobs = _float(cfg, "price"), _float(cfg, "f_plus"), _int(cfg, "jobs")
    work = [(ModelParams(N=N, d=d, alpha=a, gamma=g, q=qs[0]), qs, price, f_plus)
            for a in alphas for g in gammas]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_qstar_one, work))
    else:
        results = [_qstar_one(w) for w in work]
    rows = []
    for (base, *_), r in zip(work, results):
        ru = r.runner_up or (None, None)
        rows.append((base.alpha, base.gamma, r.q_star, r.dw_star, r.unique, r.branch, r.tie,
                     ru[0], ru[1], len(r.skipped)))
    out.table("qstar", ("alpha", "gamma", "q_star", "dW_star", "unique", "branch", "tie",
                        "runner_up_q", "runner_up_dW", "n_skipped"), rows)


def _spin_spec(value, n, name):
    if value in ("random", "plus", "minus"):
        return value
    try:
        arr = np.loadtxt(value, dtype=int, ndmin=1)
    except OSError as exc:
        raise UsageError(f"--{name}: cannot read {value}: {exc}") from exc
    if arr.shape != (n,):
        raise UsageError(f"--{name}: expected {n} spins in {value}, found {arr.size}")
    return arr


def _cmd_simulate(cfg, out):
    from .simulator import SimConfig, run
    from .wealth import ImpactFunction

    params = _params(cfg)
    record = {r.strip() for r in cfg["record"].split(",") if r.strip()}
    impact = None  # the simulator defaults to f(1,N) = 1/N
    if cfg.get("f_plus") is not None:
        impact = ImpactFunction.for_params(params, _float(cfg, "f_plus"))
    sim = SimConfig(params=params, epochs=_int(cfg, "epochs"), seed=_int(cfg, "seed"),
                    impact=impact,
                    initial_eta1=_spin_spec(cfg["init_eta1"], params.N, "init-eta1"),
                    initial_eta2=_spin_spec(cfg["init_eta2"], params.N + 1, "init-eta2"),
                    record=record, path_stride=_int(cfg, "path_stride"))
    traj = run(sim)
    summary = traj.summary()
    summary["f_plus"] = sim.impact.f_plus
    occ = traj.occupation
    exact = None
    if params.frozen:
        kernel = build_kernel(params)
        cls = classify(kernel)
        if not cls.a3_levels and not cls.a2_levels:
            m, _ = solve_branch(kernel, cls, {})
            if m is not None:
                exact = m.pi
                summary["tv_exact"] = 0.5 * float(np.abs(occ - exact).sum())
    out.meta = {"summary": summary}
    rows = [(lvl, int(traj.histogram[lvl]), occ[lvl], None if exact is None else exact[lvl])
            for lvl in range(params.N + 1)]
    out.table("histogram", ("level", "count", "occupation", "pi_exact"), rows)
    if traj.path is not None:
        out.table("path", ("epoch", "n_plus", "price", "aggregate_wealth"),
                  ((int(e), int(n), p, w) for e, n, p, w in traj.path))
    if traj.eta2_trace is not None:
        out.table("eta2", ["epoch"] + [f"level_{k}" for k in range(params.N + 1)],
                  ([t] + [int(v) for v in row] for t, row in enumerate(traj.eta2_trace)))


def _cmd_oracle(cfg, out):
    params = _params(cfg)
    kernel = build_kernel(params)
    cls = classify(kernel)
    if cls.a3_levels:
        out.meta = {"exists": False, "a3_levels": cls.a3_levels}
        out.table("oracle", ("branch", "level", "pi_dense", "pi_product", "abs_diff"), [])
        return
    rows, report = [], []
    for b, m in enumerate(_branches_or_none(kernel, cls)):
        sol = stationary_solve(build_chain(kernel, cls, m["branch"]))
        prod = m["pi"]
        report.append({"branch": b, "assignment": m["branch"],
                       "recurrent_classes": sol.recurrent_classes,
                       "product_form": prod is not None})
        if sol.pi is None:
            continue
        for lvl in range(params.N + 1):
            pp = None if prod is None else prod[lvl]
            diff = None if pp is None else abs(pp - sol.pi[lvl])
            rows.append((b, lvl, sol.pi[lvl], pp, diff))
    out.meta = {"exists": True, "a2_levels": cls.a2_levels, "branches": report}
    out.table("oracle", ("branch", "level", "pi_dense", "pi_product", "abs_diff"), rows)


def _branches_or_none(kernel, cls):
    for branch in branch_order(cls.a2_levels):
        try:
            yield {"branch": branch, "pi": invariant_measure(kernel, cls, branch).pi}
        except DegenerateChain:
            yield {"branch": branch, "pi": None}


COMMANDS = {"kernel": _cmd_kernel, "classify": _cmd_classify, "measure": _cmd_measure,
            "wealth": _cmd_wealth, "qstar": _cmd_qstar, "sweep": _cmd_sweep,
            "simulate": _cmd_simulate, "oracle": _cmd_oracle}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        out = _Output(cfg)
        COMMANDS[cfg["subcommand"]](cfg, out)
        out.write()
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, InvalidParameter) as exc:
        print(f"imbalance: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"imbalance: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - map any failure to the runtime exit code
        print(f"imbalance: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
