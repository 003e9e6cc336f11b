"""Command-line entry point and batch experiment runner.

Every command prints one JSON document on stdout. Exit codes: 0 success,
1 a reported check failed or a runtime invariant broke, 2 invalid input or
configuration, 3 a capacity budget was exceeded, 4 any other library error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import RNG_NAME, __version__
from .bounds import (FIXED_ELL_NOTE, best_certified_bound, brute_force_col, certified_lower_bounds,
                     cor_lower_bound, hyp_lower_bound, scaling_experiment, verify_cor_to_agr_shift,
                     verify_sigma_cor, write_scaling_csv)
from .config import ExperimentConfig, validate_config
from .errors import CapacityError, ConfigError, CorrsimError, InvariantViolation
from .estimates import EstimateReport
from .measures import (check_hypercontractive, cond_entropy, entropy, max_correlation, mutual_info)
from .protocols import (agreement_from_collision, amplify_collision, best_agreement, birthday_collision,
                        collision_from_agreement, eval_agreement, eval_collision, optimize_agreement,
                        protocol_from_dict, symmetrize, uniformity_pvalue)
from .smp import (PERFECT, eq_inner_product, equality_protocol, equality_round_rates, gapip_naive_protocol,
                  reduce_randomness, run_gapip, run_smp, simulate_with_collision)
from .sources import ceil_log2, is_degenerate, is_product, load_source, marginals, sample, source_to_dict

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_CAPACITY, EXIT_OTHER = 0, 1, 2, 3, 4
TABLE_FACTOR = 64


def _gapip_m(n: int, m: int | None) -> int:
    return m if m is not None else min(63, max(2, 8 * ceil_log2(n)))


def _jsonable(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_jsonable, indent=2, allow_nan=True)


def _error_report(successes_report: EstimateReport) -> EstimateReport:
    fails = round((1.0 - successes_report.value) * successes_report.trials)
    return EstimateReport.from_successes(fails, successes_report.trials, successes_report.seed)


def _analytic_cor(label: str) -> float | None:
    known = {"perf": 1.0, "priv": 0.0, "disj": 0.5}
    if label in known:
        return known[label]
    if label.startswith("bsc(") and label.endswith(")"):
        return abs(1 - 2 * float(label[4:-1]))
    return None


# experiments

@dataclass
class RunReport:
    config: dict
    metrics: dict
    details: dict
    checks: dict
    tables: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__
    rng: str = RNG_NAME

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"config": self.config, "metrics": self.metrics, "details": self.details,
                "checks": self.checks, "passed": self.passed, "tables": self.tables,
                "wall_clock": self.wall_clock, "version": self.version, "rng": self.rng}


def _exp_equality(cfg: ExperimentConfig, rep: RunReport):
    s, n, target = cfg.source, cfg.params["n"], cfg.params["error_target"]
    pr = equality_protocol(s, n, target)
    w = pr.info["witness"]
    rep.details.update(protocol=pr.name, witness=w, t=pr.info["t"], threshold=pr.info["threshold"],
                       accounting=pr.accounting())
    rep.metrics["gamma"] = EstimateReport.exact(w.gamma)
    rep.metrics["gamma_prime"] = EstimateReport.exact(w.gamma_prime)
    if cfg.trials == 0:
        return
    for x, y in cfg.params["pairs"]:
        err = _error_report(run_smp(s, pr, x, y, cfg.trials, cfg.seed))
        rep.metrics[f"error[{x},{y}]"] = err
        rep.checks[f"error[{x},{y}] <= {target:.6g}"] = err.one_sided_high <= target
        rate = equality_round_rates(s, pr, x, y, cfg.trials, cfg.seed)
        exact = w.gamma if x == y else w.gamma_prime
        rep.metrics[f"round_rate[{x},{y}]"] = rate
        rep.checks[f"round_rate[{x},{y}] covers exact"] = rate.ci_low <= exact <= rate.ci_high


def _exp_gapip(cfg: ExperimentConfig, rep: RunReport):
    n, m, b = cfg.params["n"], _gapip_m(cfg.params["n"], cfg.params["m"]), cfg.params["b"]
    pr = gapip_naive_protocol(n, m)
    rep.details.update(protocol=pr.name, R=pr.info["R"], accounting=pr.accounting())
    if cfg.trials == 0:
        return
    succ = run_gapip(n, m, cfg.trials, cfg.seed, b)
    rep.metrics["success"] = succ
    rep.checks["success >= 2/3 (within CI)"] = succ.one_sided_high >= 2 / 3


def _exp_simulate(cfg: ExperimentConfig, rep: RunReport):
    s, p = cfg.source, cfg.params
    table = p["table_size"] or TABLE_FACTOR * p["n"]
    base = reduce_randomness(eq_inner_product(p["n"], 3), table, cfg.seed or 0)
    pr = simulate_with_collision(s, base, p["eps"], p["votes"])
    dec = pr.info["cost_decomposition"]
    rep.details.update(protocol=pr.name, info=pr.info, accounting=pr.accounting())
    expect_a = dec["votes"] * dec["max_out"] * (dec["R"] + dec["base_bits_alice"])
    expect_b = dec["votes"] * dec["max_out"] * (dec["R"] + dec["base_bits_bob"])
    rep.checks["cost decomposes as votes*max_out*(R+base)"] = (pr.bits_alice, pr.bits_bob) == (expect_a, expect_b)
    if cfg.trials == 0:
        return
    for x, y in p["pairs"]:
        err = _error_report(run_smp(s, pr, x, y, cfg.trials, cfg.seed))
        rep.metrics[f"error[{x},{y}]"] = err
        rep.checks[f"error[{x},{y}] <= 1/3"] = err.one_sided_high <= 1 / 3


def _exp_scaling(cfg: ExperimentConfig, rep: RunReport):
    res = scaling_experiment(cfg.source, cfg.params["n_values"], cfg.seed or 0)
    rep.metrics["fitted_exponent"] = EstimateReport.exact(res.fitted_exponent)
    rep.metrics["r_squared"] = EstimateReport.exact(res.r_squared)
    rep.details.update(reliable_fit=res.reliable, note=FIXED_ELL_NOTE)
    rep.tables["scaling"] = res.rows
    for row in res.rows:
        rep.checks[f"min_per_i >= 1/n at n={row['n']}"] = row["min_per_i"] >= row["p"] - 1e-12


def _exp_measures(cfg: ExperimentConfig, rep: RunReport):
    rows = []
    for s in cfg.sources:
        cor = max_correlation(s)
        mu, nu = marginals(s)
        row = {"source": s.label, "cor": cor, "analytic": _analytic_cor(s.label),
               "h_u": entropy(mu), "h_v": entropy(nu), "mutual_info": mutual_info(s.probs)}
        rows.append(row)
        rep.metrics[f"cor[{s.label}]"] = EstimateReport.exact(cor)
        if row["analytic"] is not None:
            rep.checks[f"cor[{s.label}] matches analytic value"] = abs(cor - row["analytic"]) <= 1e-9
    rep.tables["measures"] = rows


def _exp_oracle(cfg: ExperimentConfig, rep: RunReport):
    p = cfg.params
    res = brute_force_col(cfg.source, p["n"], p["p"], p["ell"], p["kmax"])
    rep.metrics["best_size"] = EstimateReport.exact(res.best_size)
    rep.details.update(protocol=res.best_protocol.to_dict(), searched=res.searched, note=FIXED_ELL_NOTE)
    if p["p"] > 0:
        floor = p["n"] * best_certified_bound(cfg.source, p["p"]) / 2
        rep.details["certified_floor"] = floor
        rep.checks["best_size >= certified floor"] = res.best_size >= math.ceil(floor - 1e-9)


def _exp_agreement(cfg: ExperimentConfig, rep: RunReport):
    s, p = cfg.source, cfg.params
    pr = best_agreement(s, p["p"]) if p["ell"] is None else optimize_agreement(s, p["ell"], p["p"])
    mode = p["mode"]
    ev = eval_agreement(s, pr, mode, cfg.trials or 100_000, cfg.seed)
    rep.metrics["cost"], rep.metrics["success"] = ev.cost, ev.success
    rep.details["protocol"] = pr.to_dict()
    certs = certified_lower_bounds(s, p["p"])
    rep.details["certificates"] = [c.to_dict() for c in certs]
    slack = 1e-9 + (ev.cost.value - ev.cost.ci_low if mode == "mc" else 0.0)
    for c in certs:
        rep.checks[f"cost >= {c.kind} bound"] = ev.cost.value >= c.value - slack


_EXPERIMENTS = {"equality": _exp_equality, "gapip": _exp_gapip, "simulate": _exp_simulate,
                "scaling": _exp_scaling, "measures": _exp_measures, "oracle": _exp_oracle,
                "agreement": _exp_agreement}


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run one configured experiment and write its report (JSON) or table (CSV) if requested."""
    start = time.perf_counter()
    rep = RunReport(cfg.raw, {}, {}, {})
    _EXPERIMENTS[cfg.experiment](cfg, rep)
    rep.wall_clock = time.perf_counter() - start
    if cfg.output_path:
        write_report(rep, cfg.output_path, cfg.output_format)
    return rep


def write_report(rep: RunReport, path, fmt: str = "json") -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(dumps(rep.to_dict()) + "\n")
        return
    (name, rows), = rep.tables.items()
    cols = ["n", "p", "achieved_max_out", "hyp_floor", "cor_floor"] if name == "scaling" else list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


# direct commands

class UsageError(Exception):
    pass


def _need_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for Monte Carlo runs")


def _cmd_source(args):
    s = load_source(args.spec)
    mu, nu = marginals(s)
    out = dict(source_to_dict(s), marginal_u=mu, marginal_v=nu, product=is_product(s),
               degenerate=is_degenerate(s))
    if args.sample:
        _need_seed(args)
        batch = sample(s, args.sample, args.seed)
        out["sample"] = {"u": batch.u_values, "v": batch.v_values, "seed": args.seed}
    return out


def _cmd_measure(args):
    s = load_source(args.source)
    if args.what == "cor":
        return {"value": max_correlation(s)}
    if args.what == "entropy":
        mu, nu = marginals(s)
        return {"value": mutual_info(s.probs), "h_u": entropy(mu), "h_v": entropy(nu),
                "h_u_given_v": cond_entropy(s.probs), "h_v_given_u": cond_entropy(s.probs, (1,), (0,))}
    if args.random is not None:
        _need_seed(args)
        rep = check_hypercontractive(s, args.q, args.p, random=args.random, seed=args.seed)
    else:
        rep = check_hypercontractive(s, args.q, args.p, grid=args.grid)
    return {"value": rep.holds, "gap": rep.worst_gap, "witness": rep.witness, "candidates": rep.candidates}


def _eval_mode(args):
    if args.mode == "mc":
        _need_seed(args)
    return args.mode


def _cmd_agr(args):
    s = load_source(args.source)
    mode = _eval_mode(args)
    if args.load:
        pr = protocol_from_dict(json.loads(Path(args.load).read_text()))
    elif args.p is None:
        raise UsageError("agr needs --p unless a protocol is loaded")
    elif args.ell is None:
        pr = best_agreement(s, args.p)
    else:
        pr = optimize_agreement(s, args.ell, args.p, seed=args.seed or 0)
    ev = eval_agreement(s, pr, mode, args.trials, args.seed)
    if args.save:
        Path(args.save).write_text(dumps(pr.to_dict()) + "\n")
    out = {"cost": ev.cost, "success": ev.success, "protocol": pr.to_dict()}
    if args.p is not None:
        out["certificates"] = certified_lower_bounds(s, args.p)
    return out


def _cmd_col(args):
    s = load_source(args.source)
    mode = _eval_mode(args)
    if args.load:
        pr = protocol_from_dict(json.loads(Path(args.load).read_text()))
    elif args.construction == "birthday":
        pr = birthday_collision(args.n, args.k or math.isqrt(args.n - 1) + 1, s)
    elif args.construction == "symmetrize":
        pr = symmetrize(s, args.n, args.s_param)
    else:
        pr = collision_from_agreement(best_agreement(s, 1.0 / args.n), args.n, s=s)
    if args.amplify > 1:
        pr = amplify_collision(pr, args.amplify)
    ev = eval_collision(s, pr, mode, args.trials, args.seed)
    if args.save:
        Path(args.save).write_text(dumps(pr.to_dict()) + "\n")
    out = {"n": pr.n, "max_out": pr.max_out, "min_per_i": ev.min_prob, "min_per_i_low": ev.min_prob_low,
           "per_i": ev.per_i, "protocol": pr.to_dict()}
    if mode == "mc":
        out["max_out_seen"] = ev.max_out_seen
        out["empty_rate"] = ev.empty_rate
        if args.construction == "symmetrize":
            out["uniformity_pvalue"] = uniformity_pvalue(ev.pick_counts)
    if args.extract:
        ext = agreement_from_collision(s, pr, mode, trials=args.trials, seed=args.seed)
        out["extracted_agreement"] = {"coordinate": ext.i_star, "cost": ext.cost, "success": ext.success}
    return out


def _cmd_smp(args):
    s = load_source(args.source) if args.source else None
    if args.what == "eq":
        pr = equality_protocol(s, args.n)
        out = {"protocol": pr.name, "accounting": pr.accounting(), "witness": pr.info["witness"],
               "t": pr.info["t"]}
        if args.trials:
            _need_seed(args)
            succ = run_smp(s, pr, args.x, args.y, args.trials, args.seed)
            out.update(estimate=succ, error=_error_report(succ))
        return out
    if args.what == "gapip":
        m = _gapip_m(args.n, args.m)
        pr = gapip_naive_protocol(args.n, m)
        out = {"protocol": pr.name, "accounting": pr.accounting(), "R": pr.info["R"]}
        if args.trials:
            _need_seed(args)
            out["estimate"] = run_gapip(args.n, m, args.trials, args.seed, args.b)
        return out
    if args.base != "eq-perf":
        raise UsageError(f"unknown base protocol {args.base!r}; available: eq-perf")
    table = args.table_size or TABLE_FACTOR * args.n
    base = reduce_randomness(eq_inner_product(args.n, 3), table, args.seed or 0)
    if s is None:
        s = PERFECT
    pr = simulate_with_collision(s, base, args.eps, args.votes)
    out = {"protocol": pr.name, "accounting": pr.accounting(), "info": pr.info}
    if args.trials:
        _need_seed(args)
        succ = run_smp(s, pr, args.x, args.y, args.trials, args.seed)
        out.update(estimate=succ, error=_error_report(succ))
    return out


def _cmd_bounds(args):
    if args.what == "hyp":
        return {"value": hyp_lower_bound(args.p, args.q, args.z)}
    if args.what == "cor":
        cor = args.cor if args.cor is not None else max_correlation(load_source(args.source))
        return {"value": cor_lower_bound(args.z, cor), "cor": cor}
    if args.what == "sigma":
        return verify_sigma_cor(args.m, args.b)
    if args.what == "shift":
        return verify_cor_to_agr_shift(load_source(args.source), load_source(args.sigma), args.z)
    if args.what == "certificates":
        return {"certificates": certified_lower_bounds(load_source(args.source), args.z)}
    s = load_source(args.source)
    if args.what == "oracle":
        res = brute_force_col(s, args.n, args.p, args.ell, args.kmax)
        return {"best_size": res.best_size, "best_protocol": res.best_protocol.to_dict(), "searched": res.searched,
                "note": FIXED_ELL_NOTE}
    n_values = [int(v) for v in args.n.split(",")]
    _need_seed(args)
    res = scaling_experiment(s, n_values, args.seed)
    if args.out:
        write_scaling_csv(res, args.out)
    return dict(res.to_dict(), note=FIXED_ELL_NOTE)


def _cmd_experiment(args):
    raw = Path(args.config).read_bytes()
    cfg = validate_config(raw)
    if args.out:
        cfg.output_path = args.out
        cfg.output_format = "csv" if args.out.endswith(".csv") else "json"
    rep = run_experiment(cfg)
    return rep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrsim", description="Shared-randomness protocol simulator.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def seeded(p, trials=0):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=trials)

    p = sub.add_parser("source", help="describe or sample a source")
    p.add_argument("spec", help="standard name such as disj or bsc(0.2), or a JSON file")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_source)

    p = sub.add_parser("measure", help="correlation, entropy or hypercontractivity")
    p.add_argument("what", choices=["cor", "entropy", "hc"])
    p.add_argument("--source", required=True)
    p.add_argument("--q", type=float, default=3.0)
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--random", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_measure)

    p = sub.add_parser("agr", help="build and evaluate an agreement protocol")
    p.add_argument("--source", required=True)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--load")
    p.add_argument("--save")
    seeded(p, 100_000)
    p.set_defaults(fn=_cmd_agr)

    p = sub.add_parser("col", help="build and evaluate a collision protocol")
    p.add_argument("--source", required=True)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--construction", choices=["agreement", "birthday", "symmetrize"], default="agreement")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--amplify", type=int, default=1)
    p.add_argument("--s-param", type=float, default=0.125)
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--extract", action="store_true", help="also extract an agreement protocol")
    p.add_argument("--load")
    p.add_argument("--save")
    seeded(p, 100_000)
    p.set_defaults(fn=_cmd_col)

    p = sub.add_parser("smp", help="simultaneous-message protocols")
    p.add_argument("what", choices=["eq", "gapip", "simulate"])
    p.add_argument("--source", default=None)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=None, help="block length (default 8*ceil(log2 n), at most 63)")
    p.add_argument("--b", type=int, choices=[0, 1], default=None)
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--y", type=int, default=1)
    p.add_argument("--base", default="eq-perf")
    p.add_argument("--eps", type=float, default=1 / 3)
    p.add_argument("--votes", type=int, default=3)
    p.add_argument("--table-size", type=int, default=None, help="default 64*n")
    seeded(p)
    p.set_defaults(fn=_cmd_smp)

    p = sub.add_parser("bounds", help="lower-bound formulas, oracle and scaling runs")
    p.add_argument("what", choices=["hyp", "cor", "sigma", "shift", "certificates", "oracle", "scaling"])
    p.add_argument("--source")
    p.add_argument("--sigma", help="second source for the shift check")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--q", type=float, default=3.0)
    p.add_argument("--z", type=float, default=0.5)
    p.add_argument("--cor", type=float, default=None)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--b", type=int, default=0)
    p.add_argument("--n", default="2")
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--kmax", type=int, default=2)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="report path (.json) or table path (.csv)")
    p.set_defaults(fn=_cmd_experiment)
    return ap


def _fix_bounds_args(args):
    if args.command != "bounds":
        return
    if args.what in ("oracle",):
        args.n = int(args.n)
    if args.what in ("oracle", "scaling", "cor", "shift", "certificates") and not args.source \
            and not (args.what == "cor" and args.cor is not None):
        raise UsageError(f"bounds {args.what} needs --source")
    if args.what == "shift" and not args.sigma:
        raise UsageError("bounds shift needs --sigma")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _fix_bounds_args(args)
        result = args.fn(args)
    except UsageError as exc:
        print(f"corrsim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(dumps({"error": "config", "problems": [{"field": f, "message": m} for f, m in exc.problems]}))
        return EXIT_INPUT
    except CapacityError as exc:
        print(dumps({"error": "capacity", "what": exc.what, "size": exc.size, "budget": exc.budget}))
        return EXIT_CAPACITY
    except InvariantViolation as exc:
        print(dumps({"error": "invariant", "message": str(exc)}))
        return EXIT_CHECK
    except (ValueError, OSError) as exc:
        print(dumps({"error": "input", "message": str(exc)}))
        return EXIT_INPUT
    except CorrsimError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_OTHER
    print(dumps(result))
    if isinstance(result, RunReport) and not result.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
