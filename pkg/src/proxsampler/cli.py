"""Command-line front end: plan, sample, verify-rgo, verify-conc, benchmark.

Exit codes: 0 when every check passes, 2 when a check fails or a run hits a
numeric failure, 1 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
import time
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import concentration, metrics, potentials, sampler, stepsize
from .checks import MAX_MEAN_PROPOSALS, rgo_check
from .config import ConfigError, RunConfig, load_config
from .proxmap import default_s
from .rgo import ProxBudgetError, RgoGiveUp, RgoNumericError

COMMANDS = ("plan", "sample", "verify-rgo", "verify-conc", "benchmark")
EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, checks: Sequence[str]):
        super().__init__("failed checks: " + ", ".join(checks))
        self.checks = list(checks)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxsampler", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--seed", type=int, help="override the root seed from the config")
    parser.add_argument("--out", help="output directory (overrides output_dir in the config)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on this)")
    return parser


# ---------------------------------------------------------------------------
# CSV output


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, cfg: RunConfig, header: Sequence[str], rows: Iterable[Sequence[Any]],
              extra_comments: Sequence[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={cfg.digest} seed={cfg.seed}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _key_values(path: Path, cfg: RunConfig, items: Sequence[tuple[str, Any]]) -> None:
    write_csv(path, cfg, ("key", "value"), items)


# ---------------------------------------------------------------------------
# helpers


def _potential(cfg: RunConfig) -> potentials.Potential:
    return potentials.build(cfg.target, **cfg.target_params)


def _assumption(cfg: RunConfig):
    if cfg.assumption is None:
        raise ConfigError("this command needs an [assumption] section")
    a = dict(cfg.assumption)
    return stepsize.REGIMES[a.pop("regime")](**a)


def _plan(cfg: RunConfig, p: potentials.Potential) -> stepsize.Plan:
    if cfg.delta is None:
        raise ConfigError("this command needs 'delta'")
    try:
        return stepsize.plan_run(p, _assumption(cfg), cfg.delta, cfg.metric, cfg.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _vector(values, d: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros(d)
    if len(values) != d:
        raise ConfigError(f"{name} must have {d} entries, got {len(values)}")
    return np.asarray(values, dtype=float)


def _fail_if(failed: dict[str, bool]) -> None:
    bad = [name for name, ok in failed.items() if not ok]
    if bad:
        raise CheckFailed(bad)


# ---------------------------------------------------------------------------
# commands


def cmd_plan(cfg: RunConfig, out: Path, jobs: int) -> None:
    p = _potential(cfg)
    plan = _plan(cfg, p)
    record = [("regime", plan.regime), ("eta", plan.eta), ("T", plan.t_steps), ("zeta", plan.zeta),
              ("delta", plan.delta), ("metric", plan.metric), ("mode", plan.mode), ("s", plan.s),
              ("rounds", plan.rounds)]
    for key, value in record:
        print(f"{key} = {fmt(value)}")
    write_csv(out / "plan.csv", cfg, [k for k, _ in record], [[v for _, v in record]])
    _fail_if(stepsize.check_plan(p, plan))


def cmd_sample(cfg: RunConfig, out: Path, jobs: int) -> None:
    p = _potential(cfg)
    plan = _plan(cfg, p)
    sec = cfg.section("sample")
    if sec["prox_tol"] is not None:
        if plan.mode != "exact":
            raise ConfigError("prox_tol applies to exact mode only")
        plan = dataclasses.replace(plan, s=sec["prox_tol"])
    x0 = _vector(sec["x0"], p.dim, "x0")
    started = time.perf_counter()
    trace = sampler.run_proximal_sampler(p, plan, x0, cfg.seed, sec["record_stride"], sec["chains"], jobs,
                                         max_proposals=sec["max_proposals"])
    wall = time.perf_counter() - started
    rows = []
    for k, step in enumerate(trace.steps):
        props = trace.proposals[step - 1] / trace.n_chains if step > 0 else 0.0
        iters = trace.prox_iters[step - 1] if step > 0 else 0
        rows.append([int(step), *trace.samples[k, 0], float(props), int(iters)])
    header = ["step", *[f"x{i}" for i in range(p.dim)], "proposals", "prox_iters"]
    write_csv(out / "trace.csv", cfg, header, rows)

    final = trace.final
    items: list[tuple[str, Any]] = [
        ("chains", trace.n_chains), ("T", plan.t_steps), ("eta", plan.eta), ("zeta", plan.zeta),
        ("mode", plan.mode), ("mean_proposals", trace.mean_proposals),
        ("max_prox_iters", int(trace.prox_iters.max()) if trace.t_steps else 0),
        ("max_residual_ratio", trace.max_residual_ratio),
        ("evaluations_per_chain", trace.evaluations_per_chain()),
    ]
    items += [(f"mean_x{i}", float(v)) for i, v in enumerate(final.mean(axis=0))]
    if final.shape[0] > 1:
        items += [(f"var_x{i}", float(v)) for i, v in enumerate(final.var(axis=0, ddof=1))]
    checks = {"mean_proposals": trace.t_steps == 0 or trace.mean_proposals <= MAX_MEAN_PROPOSALS}
    if plan.s is not None:
        checks["prox_residual"] = trace.max_residual_ratio <= 1.0
    items += [(f"pass_{k}", v) for k, v in checks.items()]
    _key_values(out / "summary.csv", cfg, items)
    # Wall time varies between runs, so it is kept out of the reproducible CSVs.
    (out / "timing.txt").write_text(f"wall_seconds = {wall:.3f}\n", encoding="utf-8")
    _fail_if(checks)


def cmd_verify_rgo(cfg: RunConfig, out: Path, jobs: int) -> None:
    p = _potential(cfg)
    sec = cfg.section("rgo")
    mode = sec["mode"] or cfg.mode
    y = _vector(sec["y"], p.dim, "y")
    eta = stepsize.eta_for(p, sec["zeta"], "TV", mode)
    s = sec["s"]
    if mode == "approx" and s is None:
        s = min(default_s(sp, p.dim) for sp in p.specs)
    rep = rgo_check(p, y, eta, sec["zeta"], sec["n_draws"], cfg.seed, mode, s, jobs)
    mz = float(np.max(np.abs(rep.moments.mean_z))) if rep.moments is not None else float("nan")
    vz = float(np.max(np.abs(rep.moments.var_z))) if rep.moments is not None else float("nan")
    header = ["n_draws", "mode", "eta", "zeta", "mean_proposals", "p99_proposals", "max_abs_mean_z",
              "max_abs_var_z", "tv_coord0", "tv_threshold"]
    row = [rep.n_draws, mode, rep.eta, sec["zeta"], rep.mean_proposals, rep.p99_proposals, mz, vz,
           rep.tv_coord0, rep.tv_threshold]
    header += [f"pass_{k}" for k in rep.checks] + ["pass"]
    row += list(rep.checks.values()) + [rep.passed]
    write_csv(out / "rgo_report.csv", cfg, header, [row])
    _fail_if(rep.checks)


def cmd_verify_conc(cfg: RunConfig, out: Path, jobs: int) -> None:
    p = _potential(cfg)
    sec = cfg.section("conc")
    specs = p.specs
    if sec["alpha"] is not None or sec["l_alpha"] is not None:
        if p.is_composite:
            raise ConfigError("alpha / l_alpha overrides apply to single-component targets")
        base = p.spec
        specs = [potentials.SemiSmoothSpec(base.alpha if sec["alpha"] is None else sec["alpha"],
                                           base.l_alpha if sec["l_alpha"] is None else sec["l_alpha"])]
    try:
        query = concentration.BoundQuery(sec["variant"], tuple(specs), p.dim, sec["eta"], sec["epsilon"],
                                         sec["s_offset"], None, sec["rate_scale"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    m = _vector(sec["m"], p.dim, "m")
    rep = concentration.verify_bound(query, p, m, sec["r_grid"], sec["n_samples"], cfg.seed, jobs,
                                     quantiles=sec["quantiles"])
    rows = zip(rep.r_grid, rep.empirical, rep.ci_upper, rep.bound, rep.dominated)
    note = (f"n={rep.n_samples} plug_in_mean={fmt(rep.mean_estimate)} mean_se={fmt(rep.mean_se)} "
            f"half_split_gap={fmt(rep.half_split_gap)} variant={rep.variant} rate_scale={fmt(sec['rate_scale'])}")
    write_csv(out / "tail_report.csv", cfg, ("r", "empirical", "ci_upper", "bound", "dominated"), rows, [note])
    expected = sec["expect"] == "dominated"
    _fail_if({"dominance" if expected else "control_violation": rep.overall == expected})


def cmd_benchmark(cfg: RunConfig, out: Path, jobs: int) -> None:
    p = _potential(cfg)
    plan = _plan(cfg, p)
    sec = cfg.section("benchmark")
    x0 = _vector(sec["x0"], p.dim, "x0")
    try:
        ref = sampler.reference_samples(p, sec["n_ref"], cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    trace = sampler.run_proximal_sampler(p, plan, x0, cfg.seed, plan.t_steps or 1, sec["chains"], jobs)
    budget = trace.evaluations_per_chain()
    eta_b = sec["baseline_eta"] or 0.1 / sum(sp.l_alpha for sp in p.specs)

    def w2(final):
        est = metrics.w2_empirical_assignment(final, ref, seed=cfg.seed, bootstrap=metrics.BOOTSTRAP_RESAMPLES)
        return est.value, est.bootstrap_ci[0], est.bootstrap_ci[1]

    rows = [["proximal", plan.eta, plan.t_steps, budget, *w2(trace.final), 1.0]]
    methods = ["ULA"] + (["MALA"] if all(sp.alpha == 1.0 for sp in p.specs) else [])
    for method in methods:
        per_step = 1 if method == "ULA" else 2
        steps = int(budget // per_step)
        bt = sampler.run_baseline(method, p, eta_b, steps, x0, cfg.seed, sec["chains"], record_stride=max(steps, 1))
        rows.append([method, eta_b, steps, steps * per_step, *w2(bt.final), bt.accept_rate])
    header = ("method", "eta", "steps", "evaluations_per_chain", "w2", "w2_lo", "w2_hi", "accept_rate")
    write_csv(out / "baselines.csv", cfg, header, rows)
    _fail_if({"finite_w2": all(math.isfinite(r[4]) for r in rows)})


HANDLERS = {
    "plan": cmd_plan,
    "sample": cmd_sample,
    "verify-rgo": cmd_verify_rgo,
    "verify-conc": cmd_verify_conc,
    "benchmark": cmd_benchmark,
}


def run_command(argv: Sequence[str]) -> int:
    try:
        args = build_parser().parse_args(list(argv))
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise UsageError("--seed must lie in [0, 2^64)")
            cfg.seed = args.seed
        out = Path(args.out if args.out is not None else cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, out, args.jobs)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as exc:
        print(f"check failed: {', '.join(exc.checks)}", file=sys.stderr)
        return EXIT_CHECK
    except (sampler.SamplerError, RgoGiveUp, RgoNumericError, ProxBudgetError, stepsize.PlanningError,
            concentration.GradientAtMeanError, FloatingPointError) as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
