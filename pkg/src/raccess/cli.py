"""Command-line front end.

Subcommands mirror the workflow: ``rates`` computes each loop's delivery
requirement, ``optimize`` designs the access policies, ``simulate``
replays designed policies at slot level, and ``pipeline`` chains all
three into one report. All artifacts land in ``--out`` (or the config's
``output_dir``) with deterministic full-precision formatting.

Exit codes: 0 success, 2 config/parse error, 3 infeasible performance
contract, 4 optimizer divergence or non-convergence, 5 unstable
simulation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .channel import MonteCarlo, Quadrature, link_success_probability
from .config import ConfigError, parse_config
from .control import InfeasibleContractError, compute_success_requirement, steady_state_cost_bound
from .optimizer import DivergenceError, ProblemInstance, run_algorithm1
from .policy import AccessPolicy
from .serialize import fmt, write_csv, write_json
from .simulate import SimConfig, UnstableSimulationError, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGED = 4
EXIT_UNSTABLE = 5

POLICIES_SCHEMA_VERSION = 1


def _out_dir(args, cfg):
    out = args.out if args.out is not None else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _requirements(cfg):
    reqs = []
    for i, system in enumerate(cfg.systems):
        try:
            reqs.append(compute_success_requirement(system, tol=cfg.requirement_tol))
        except InfeasibleContractError as exc:
            raise InfeasibleContractError(f"loop {i}: {exc}") from exc
    return np.asarray(reqs)


def _instance(cfg, targets):
    return ProblemInstance(
        systems=cfg.systems,
        channels=cfg.channels,
        collision=cfg.collision,
        tx_powers=cfg.tx_powers,
        success_targets=targets,
    )


def _expectation_mode(cfg, override):
    mode = cfg.optimizer.expectation_mode if override is None else override
    if mode in ("mc", "monte_carlo"):
        return MonteCarlo(samples=cfg.optimizer.mc_samples, seed=cfg.optimizer.seed)
    return Quadrature()


def _write_rates(out, targets):
    write_csv(
        os.path.join(out, "rates.csv"),
        ["system", "requirement"],
        [(i, float(c)) for i, c in enumerate(targets)],
    )


def _policies_doc(result, inst, link):
    return {
        "schema_version": POLICIES_SCHEMA_VERSION,
        "policies": [p.to_dict() for p in result.policies],
        "duals": {
            "lambda": [float(v) for v in result.state.lam],
            "nu": [[float(v) for v in row] for row in result.state.nu],
        },
        "converged": bool(result.converged),
        "periods": int(result.periods),
        "objective": float(result.trace.rows[-1][2]) if len(result.trace) else None,
        "success_targets": [float(c) for c in inst.success_targets],
        "link_success": [float(v) for v in link],
    }


def load_policies(path):
    """Read a policies JSON file back into AccessPolicy objects."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read policies: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict) or "policies" not in doc:
        raise ConfigError(f"{path}: expected an object with a 'policies' list")
    if doc.get("schema_version") != POLICIES_SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version must be {POLICIES_SCHEMA_VERSION}"
        )
    try:
        return [AccessPolicy.from_dict(d) for d in doc["policies"]]
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_rates(args):
    cfg = parse_config(args.config)
    targets = _requirements(cfg)
    out = _out_dir(args, cfg)
    print("system  requirement")
    for i, c in enumerate(targets):
        print(f"{i:<7d} {fmt(c)}")
    _write_rates(out, targets)
    return EXIT_OK


def _optimize(cfg, args):
    """Shared by cmd_optimize and cmd_pipeline; returns everything written."""
    targets = _requirements(cfg)
    inst = _instance(cfg, targets)
    mode = _expectation_mode(cfg, getattr(args, "mode", None))
    seed = cfg.optimizer.seed if getattr(args, "seed", None) is None else args.seed
    result = run_algorithm1(
        inst,
        schedule=cfg.optimizer.schedule,
        mode=mode,
        stop=cfg.optimizer.stop,
        seed=seed,
        box=cfg.optimizer.box,
    )
    link = [
        link_success_probability(result.policies, cfg.channels, cfg.collision, i)
        for i in range(inst.m)
    ]
    return targets, inst, result, link


def _write_optimize(out, result, inst, link):
    result.trace.to_csv(os.path.join(out, "trace.csv"))
    write_json(os.path.join(out, "policies.json"), _policies_doc(result, inst, link))


def _print_optimize(result, inst, link):
    status = "converged" if result.converged else "did not converge"
    print(f"optimizer {status} after {result.periods} periods")
    for i, pol in enumerate(result.policies):
        desc = (
            f"threshold {fmt(pol.threshold)}"
            if pol.kind == "threshold"
            else f"constant rate {fmt(pol.rate)}"
        )
        print(
            f"loop {i}: {desc}, delivery {fmt(link[i])} "
            f"(requirement {fmt(inst.success_targets[i])})"
        )


def cmd_optimize(args):
    cfg = parse_config(args.config)
    out = _out_dir(args, cfg)
    targets, inst, result, link = _optimize(cfg, args)
    _write_rates(out, targets)
    _write_optimize(out, result, inst, link)
    _print_optimize(result, inst, link)
    if not result.converged:
        print("error: optimizer did not converge within max_periods", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _simulate(cfg, policies, args):
    horizon = cfg.simulation.horizon if getattr(args, "horizon", None) is None else args.horizon
    seed = cfg.simulation.seed if getattr(args, "seed", None) is None else args.seed
    targets = _requirements(cfg)
    inst = _instance(cfg, targets)
    try:
        sim_cfg = SimConfig(
            instance=inst,
            policies=tuple(policies),
            horizon=horizon,
            seed=seed,
            burn_in=cfg.simulation.burn_in,
            thin=cfg.simulation.thin,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return inst, run_simulation(sim_cfg)


def _write_metrics(out, inst, metrics):
    rows = []
    for i in range(inst.m):
        rows.append(
            (
                i,
                float(metrics.empirical_cost[i]),
                float(metrics.empirical_tx_rate[i]),
                float(metrics.empirical_success_rate[i]),
                steady_state_cost_bound(inst.systems[i]),
            )
        )
    write_csv(
        os.path.join(out, "metrics.csv"),
        [
            "system",
            "empirical_cost",
            "empirical_tx_rate",
            "empirical_success_rate",
            "cost_bound",
        ],
        rows,
    )
    if metrics.trajectory is not None:
        write_csv(
            os.path.join(out, "trajectory.csv"),
            ["slot", "system", "v", "tx", "gamma"],
            metrics.trajectory,
        )


def _print_metrics(inst, metrics):
    print(
        f"simulated {metrics.horizon} slots "
        f"(burn-in {metrics.burn_in}, backend {_backend()})"
    )
    for i in range(inst.m):
        print(
            f"loop {i}: cost {fmt(metrics.empirical_cost[i])} "
            f"(bound {fmt(steady_state_cost_bound(inst.systems[i]))}), "
            f"tx rate {fmt(metrics.empirical_tx_rate[i])}, "
            f"delivery rate {fmt(metrics.empirical_success_rate[i])}"
        )


def _backend():
    from . import _kernels

    return _kernels.backend_name()


def cmd_simulate(args):
    cfg = parse_config(args.config)
    out = _out_dir(args, cfg)
    policies = load_policies(args.policies)
    if len(policies) != cfg.m:
        raise ConfigError(
            f"{args.policies}: {len(policies)} policies for {cfg.m} loops"
        )
    inst, metrics = _simulate(cfg, policies, args)
    _write_metrics(out, inst, metrics)
    _print_metrics(inst, metrics)
    return EXIT_OK


def cmd_pipeline(args):
    cfg = parse_config(args.config)
    out = _out_dir(args, cfg)
    targets, inst, result, link = _optimize(cfg, args)
    _write_rates(out, targets)
    _write_optimize(out, result, inst, link)
    _print_optimize(result, inst, link)
    if not result.converged:
        print("error: optimizer did not converge within max_periods", file=sys.stderr)
        return EXIT_DIVERGED
    sim_inst, metrics = _simulate(cfg, result.policies, args)
    _write_metrics(out, sim_inst, metrics)
    _print_metrics(sim_inst, metrics)
    report = {
        "requirements": [float(c) for c in targets],
        "policies": [p.to_dict() for p in result.policies],
        "link_success": [float(v) for v in link],
        "converged": bool(result.converged),
        "periods": int(result.periods),
        "empirical_cost": [float(v) for v in metrics.empirical_cost],
        "empirical_tx_rate": [float(v) for v in metrics.empirical_tx_rate],
        "empirical_success_rate": [float(v) for v in metrics.empirical_success_rate],
        "cost_bounds": [steady_state_cost_bound(s) for s in cfg.systems],
        "horizon": int(metrics.horizon),
        "burn_in": int(metrics.burn_in),
    }
    write_json(os.path.join(out, "report.json"), report)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="raccess",
        description="Design and simulate channel-aware random access for control loops",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rates = sub.add_parser("rates", help="per-loop delivery requirements")
    p_rates.add_argument("config")
    p_rates.add_argument("--out", default=None)
    p_rates.set_defaults(func=cmd_rates)

    p_opt = sub.add_parser("optimize", help="design access policies")
    p_opt.add_argument("config")
    p_opt.add_argument("--mode", choices=["quadrature", "mc"], default=None)
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.add_argument("--out", default=None)
    p_opt.set_defaults(func=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="slot-level simulation of given policies")
    p_sim.add_argument("config")
    p_sim.add_argument("--policies", required=True)
    p_sim.add_argument("--horizon", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_pipe = sub.add_parser("pipeline", help="rates, optimize, then simulate")
    p_pipe.add_argument("config")
    p_pipe.add_argument("--mode", choices=["quadrature", "mc"], default=None)
    p_pipe.add_argument("--seed", type=int, default=None)
    p_pipe.add_argument("--out", default=None)
    p_pipe.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except UnstableSimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
