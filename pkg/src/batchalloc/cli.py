"""Command-line interface: ``gen``, ``run``, ``certify`` and ``bench``.

Every subcommand returns a process exit code.  Errors in flags or input
files print a one-line message to stderr and exit with status 2; ``certify``
exits 1 when a check fails.  CSV output is written to a temporary file and
moved into place only when complete, so a failed run never leaves a partial
file behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, certify as cert, instances, matching_algs, mca_alg
from .frankwolfe import CERTIFY, FwConfig
from .model import InstanceError
from .regularizers import gamma
from .simplex import SolverError

COLUMNS = ["instance_id", "seed", "K", "scenario", "algo", "objective", "offline_opt", "ratio", "gamma_K",
           "fw_gap_max", "runtime_ms", "ratio_stderr"]
SCENARIOS = ("symmetric", "asymmetric", "tightness", "custom")
TRACE_ALGOS = ("pr-mwm", "pr-mwbm", "pr-mwbm-int", "pr-f-adwords", "pr-i-adwords", "pr-mca")
ALGOS = TRACE_ALGOS + ("online-gr", "batched-gr")
GEN_KINDS = ("vwm", "bmatching", "adwords", "mca", "tightness", "auction")


class CliError(Exception):
    pass


@dataclass
class BenchConfig:
    scenario: str
    K: list
    mc: int = 50
    seed: int = 0
    fw_iters: int = 100
    out: str | None = None
    algos: list = field(default_factory=list)
    instances: list = field(default_factory=list)
    N: int | None = None
    timing: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise CliError(f"unknown scenario {self.scenario!r}")
        if self.mc < 1:
            raise CliError("--mc must be at least 1")
        if not self.K or min(self.K) < 1:
            raise CliError("every K must be at least 1")
        if self.fw_iters < 1:
            raise CliError("--fw-iters must be at least 1")


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.6f}"
    return str(v)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for r in rows:
        wr.writerow([_fmt(r.get(c, "")) for c in COLUMNS])
    return buf.getvalue()


def _write_atomic(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out):
    if out:
        _write_atomic(out, text)
    else:
        sys.stdout.write(text)


def run_seed(master: int, index: int, algo: str) -> int:
    """Per-run stream: a hash of (master seed, instance index, algorithm)."""
    tag = int.from_bytes(algo.encode(), "little") % (2 ** 63)
    return int(np.random.SeedSequence([int(master), int(index), tag]).generate_state(1)[0])


def instance_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


def run_algo(algo: str, inst, fw_cfg: FwConfig, seed: int = 0, rho=None):
    """Run one algorithm; returns (objective, trace or None)."""
    if algo == "pr-mwm":
        tr = matching_algs.pr_mwm(inst, fw_cfg=fw_cfg)
    elif algo == "pr-mwbm":
        tr = matching_algs.pr_mwbm(inst, fw_cfg=fw_cfg)
    elif algo == "pr-mwbm-int":
        tr = matching_algs.pr_mwbm(inst, fw_cfg=fw_cfg, integral=True)
    elif algo == "pr-f-adwords":
        tr = matching_algs.pr_f_adwords(inst, fw_cfg=fw_cfg)
    elif algo == "pr-i-adwords":
        tr = matching_algs.pr_i_adwords(inst, fw_cfg=fw_cfg,
                                        rounding=matching_algs.AdwordsRoundingConfig(rho=rho, seed=seed))
    elif algo == "pr-mca":
        tr = mca_alg.pr_mca(inst, fw_cfg=fw_cfg)
    elif algo == "online-gr":
        return baselines.online_greedy(inst).objective, None
    elif algo == "batched-gr":
        return baselines.batched_greedy(inst).objective, None
    else:
        raise CliError(f"unknown algorithm {algo!r}")
    return tr.objective, tr


def _row(instance_id, seed, K, scenario, algo, objective, opt, fw_gap, runtime_ms):
    return {"instance_id": instance_id, "seed": seed, "K": K, "scenario": scenario, "algo": algo,
            "objective": float(objective), "offline_opt": float(opt),
            "ratio": float(objective / opt) if opt > 0 else 1.0, "gamma_K": gamma(K),
            "fw_gap_max": float(fw_gap), "runtime_ms": float(runtime_ms)}


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, 1000.0 * (time.perf_counter() - t0)


# -- gen --------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.kind == "tightness":
        inst, _ = instances.gen_tightness(args.K, args.N, args.seed)
    elif args.kind == "auction":
        spec = instances.AuctionSpec(advertisers=args.advertisers, users=args.users, demand=args.demand,
                                     T=args.T, configs=args.configs, per_config=args.per_config,
                                     symmetric=not args.asymmetric, K=args.K, seed=args.seed)
        inst = instances.gen_auction(spec)
    else:
        inst = instances.gen_random(args.kind, K=args.K, n_online=args.n_online, n_offline=args.n_offline,
                                    density=args.density, seed=args.seed, B=args.B, T=args.T,
                                    n_configs=args.configs)
    _emit(instances.dumps(inst) + "\n", args.out)
    return 0


# -- run --------------------------------------------------------------------


def _fw_from(args) -> FwConfig:
    if getattr(args, "certify_grade", False):
        return CERTIFY
    return FwConfig(max_iters=args.fw_iters, step=args.step)


def cmd_run(args) -> int:
    inst = instances.load(args.instance)
    if args.K is not None and args.K != inst.K:
        inst = instances.rebatch(inst, args.K)
    if args.trace and args.algo not in TRACE_ALGOS:
        raise CliError(f"{args.algo} produces no trace")
    (objective, tr), ms = _timed(run_algo, args.algo, inst, _fw_from(args), args.seed, args.rho)
    opt = baselines.offline_opt(inst).value
    if tr is not None and args.trace:
        instances.save_trace(tr, args.trace)
    row = _row(Path(args.instance).stem, args.seed, inst.K, "custom", args.algo, objective, opt,
               tr.fw_gap_max if tr is not None else 0.0, ms if args.timing else 0.0)
    _emit(_csv_text([row]), args.csv)
    return 0


# -- certify ----------------------------------------------------------------


def cmd_certify(args) -> int:
    tr = instances.load_trace(args.trace)
    kw = {"tol_obj": args.tol, "tol_feas": args.tol} if tr.algo != "pr-mca" else {"tol": args.tol}
    if args.structure and tr.algo in ("pr-mwm", "pr-mwbm", "pr-f-adwords", "pr-i-adwords"):
        kw["structure"] = True
    report = cert.certify(tr, **kw)
    _emit(json.dumps(report.to_dict(), indent=2, default=float) + "\n", args.out)
    for c in report.checks:
        if not c.passed:
            print(f"check {c.name} failed: value {c.value:.6g} tol {c.tol:.3g} {c.witness}", file=sys.stderr)
    return 0 if report.passed else 1


# -- bench ------------------------------------------------------------------


def _bench_auction(cfg: BenchConfig, index: int) -> list:
    seed = instance_seed(cfg.seed, index)
    fw = FwConfig(max_iters=cfg.fw_iters)
    base = instances.gen_auction(instances.AuctionSpec(symmetric=cfg.scenario == "symmetric",
                                                       K=1, seed=seed))
    opt = baselines.offline_opt(base).value
    (online, ms_online) = _timed(baselines.online_greedy, base)
    rows = []
    for K in cfg.K:
        inst = instances.rebatch(base, K)
        (bgr, ms_b) = _timed(baselines.batched_greedy, inst)
        (tr, ms_p) = _timed(mca_alg.pr_mca, inst, fw_cfg=fw)
        for algo, val, gap, ms in (("pr-mca", tr.objective, tr.fw_gap_max, ms_p),
                                   ("batched-gr", bgr.objective, 0.0, ms_b),
                                   ("online-gr", online.objective, 0.0, ms_online)):
            rows.append(_row(f"{cfg.scenario}-{index}", seed, K, cfg.scenario, algo, val, opt, gap,
                             ms if cfg.timing else 0.0))
    return rows


def _bench_tightness(cfg: BenchConfig, index: int) -> list:
    seed = instance_seed(cfg.seed, index)
    fw = FwConfig(max_iters=cfg.fw_iters)
    rows = []
    for K in cfg.K:
        inst, spec = instances.gen_tightness(K, cfg.N, seed)
        opt = float(spec.n_offline)  # a perfect matching exists by construction
        for algo in cfg.algos or ("pr-mwm", "batched-gr", "online-gr"):
            (val, tr), ms = _timed(run_algo, algo, inst, fw, run_seed(cfg.seed, index, algo))
            rows.append(_row(f"tightness-{index}", seed, K, "tightness", algo, val, opt,
                             tr.fw_gap_max if tr is not None else 0.0, ms if cfg.timing else 0.0))
    return rows


def _bench_custom(cfg: BenchConfig, index: int) -> list:
    path = cfg.instances[index % len(cfg.instances)]
    rep = index // len(cfg.instances)
    base = instances.load(path)
    fw = FwConfig(max_iters=cfg.fw_iters)
    rows = []
    for K in cfg.K:
        inst = base if K == base.K else instances.rebatch(base, K)
        opt = baselines.offline_opt(inst).value
        for algo in cfg.algos or _default_algos(inst):
            seed = run_seed(cfg.seed, index, algo)
            (val, tr), ms = _timed(run_algo, algo, inst, fw, seed)
            rows.append(_row(f"{Path(path).stem}-{rep}", seed, K, "custom", algo, val, opt,
                             tr.fw_gap_max if tr is not None else 0.0, ms if cfg.timing else 0.0))
    return rows


def _default_algos(inst):
    return {"vwm": ("pr-mwm", "batched-gr", "online-gr"),
            "bmatching": ("pr-mwbm", "batched-gr", "online-gr"),
            "adwords": ("pr-f-adwords", "pr-i-adwords", "batched-gr", "online-gr"),
            "mca": ("pr-mca", "batched-gr", "online-gr")}[inst.kind]


def bench_task(cfg: BenchConfig, index: int) -> list:
    if cfg.scenario in ("symmetric", "asymmetric"):
        return _bench_auction(cfg, index)
    if cfg.scenario == "tightness":
        return _bench_tightness(cfg, index)
    return _bench_custom(cfg, index)


def workers(n_tasks: int) -> int:
    env = os.environ.get("BATCHALLOC_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise CliError(f"BATCHALLOC_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise CliError("BATCHALLOC_THREADS must be at least 1")
    return max(1, min(cap, n_tasks))


def summarize(rows) -> list:
    """Mean of every numeric column and the standard error of the ratio per (scenario, K, algo)."""
    keys = []
    groups = {}
    for r in rows:
        key = (r["scenario"], r["K"], r["algo"])
        if key not in groups:
            keys.append(key)
            groups[key] = []
        groups[key].append(r)
    out = []
    for key in keys:
        g = groups[key]
        ratios = np.array([r["ratio"] for r in g])
        se = float(ratios.std(ddof=1) / math.sqrt(len(g))) if len(g) > 1 else 0.0
        out.append({"instance_id": "summary", "seed": "", "K": key[1], "scenario": key[0], "algo": key[2],
                    "objective": float(np.mean([r["objective"] for r in g])),
                    "offline_opt": float(np.mean([r["offline_opt"] for r in g])),
                    "ratio": float(ratios.mean()), "gamma_K": gamma(key[1]),
                    "fw_gap_max": float(max(r["fw_gap_max"] for r in g)),
                    "runtime_ms": float(np.mean([r["runtime_ms"] for r in g])), "ratio_stderr": se})
    return out


def run_bench(cfg: BenchConfig) -> list:
    n = cfg.mc if cfg.scenario != "custom" else cfg.mc * len(cfg.instances)
    nw = workers(n)
    if nw == 1:
        per = [bench_task(cfg, i) for i in range(n)]
    else:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            per = list(ex.map(bench_task, [cfg] * n, range(n)))  # map keeps index order
    rows = [r for block in per for r in block]
    return rows + summarize(rows)


def cmd_bench(args) -> int:
    if args.scenario == "custom" and not args.instances:
        raise CliError("the custom scenario needs --instances")
    cfg = BenchConfig(args.scenario, args.K, args.mc, args.seed, args.fw_iters, args.out, args.algo or [],
                      args.instances or [], args.N, args.timing)
    if cfg.scenario in ("symmetric", "asymmetric") and cfg.algos:
        raise CliError("auction scenarios always run pr-mca, batched-gr and online-gr")
    rows = run_bench(cfg)
    _emit(_csv_text(rows), cfg.out)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="batchalloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance JSON")
    g.add_argument("--kind", choices=GEN_KINDS, required=True)
    g.add_argument("--K", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output path (default: stdout)")
    g.add_argument("--N", type=int, help="tightness scale (default K^K)")
    g.add_argument("--n-online", type=int, default=4, help="online vertices per batch (random kinds)")
    g.add_argument("--n-offline", type=int, default=4, help="offline vertices or advertisers (random kinds)")
    g.add_argument("--density", type=float, default=0.6)
    g.add_argument("--B", type=int, default=1, help="b-matching capacity")
    g.add_argument("--T", type=int, default=None, help="price levels (mca: 3, auction: 20)")
    g.add_argument("--configs", type=int, default=None, help="configurations per user (mca: 2, auction: 5)")
    g.add_argument("--asymmetric", action="store_true", help="auction: asymmetric advertiser pools")
    g.add_argument("--advertisers", type=int, default=20)
    g.add_argument("--users", type=int, default=100)
    g.add_argument("--demand", type=float, default=5.0)
    g.add_argument("--per-config", type=int, default=3)

    r = sub.add_parser("run", help="run one algorithm on an instance")
    r.add_argument("--algo", choices=ALGOS, required=True)
    r.add_argument("--instance", required=True)
    r.add_argument("--K", type=int, help="rebatch the instance into K stages")
    r.add_argument("--trace", help="write the run trace JSON here")
    r.add_argument("--csv", help="write the CSV row here (default: stdout)")
    r.add_argument("--seed", type=int, default=0, help="rounding seed (pr-i-adwords)")
    r.add_argument("--rho", type=float, help="budget trim (pr-i-adwords; default from B_min)")
    r.add_argument("--fw-iters", type=int, default=100)
    r.add_argument("--step", choices=("exact", "open-loop"), default="exact")
    r.add_argument("--certify-grade", action="store_true",
                   help="solve regularized stages to gap 1e-12 so the trace certifies tightly")
    r.add_argument("--no-timing", dest="timing", action="store_false", help="write runtime_ms as 0")

    c = sub.add_parser("certify", help="certify a trace JSON; exit 0 iff every check passes")
    c.add_argument("--trace", required=True)
    c.add_argument("--out", help="write the report JSON here (default: stdout)")
    c.add_argument("--tol", type=float, default=cert.TOL)
    c.add_argument("--structure", action="store_true", help="also require the decomposition properties")

    b = sub.add_parser("bench", help="Monte-Carlo benchmark with CSV output")
    b.add_argument("--scenario", choices=SCENARIOS, required=True)
    b.add_argument("--K", type=int, nargs="+", default=[2])
    b.add_argument("--mc", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--fw-iters", type=int, default=100)
    b.add_argument("--out", help="CSV path (default: stdout)")
    b.add_argument("--N", type=int, help="tightness scale (default K^K)")
    b.add_argument("--algo", nargs="+", choices=ALGOS, help="algorithms (tightness and custom)")
    b.add_argument("--instances", nargs="+", help="instance JSON files (custom scenario)")
    b.add_argument("--no-timing", dest="timing", action="store_false",
                   help="write runtime_ms as 0 so output bytes are reproducible")
    return p


def _fill_defaults(args):
    if args.command == "gen":
        if args.T is None:
            args.T = 20 if args.kind == "auction" else 3
        if args.configs is None:
            args.configs = 5 if args.kind == "auction" else 2
        if args.K < 1:
            raise CliError("--K must be at least 1")
    if args.command == "run" and args.fw_iters < 1:
        raise CliError("--fw-iters must be at least 1")


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "certify": cmd_certify, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _fill_defaults(args)
        return COMMANDS[args.command](args)
    except (CliError, InstanceError, SolverError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"batchalloc {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
