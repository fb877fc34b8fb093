"""Command-line interface: ``dpergm {release,fit,evaluate,experiment,oracle}``.

Exit codes: 0 success, 1 user error, 2 convergence failure, 3 I/O error.
Diagnostics are written before a nonzero exit.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from .estimation import ConvergenceWarning, EstimationConfig, FitResult, derive_seed, fit
from .evaluation import kl_divergence, kl_exact
from .graph import empty_graph, read_edgelist, write_covariates, write_edgelist
from .harness import ExperimentConfig, _coerce, read_config, run_experiment
from .model import MAX_ENUM_NODES, ModelSpec
from .privacy import PrivacyParams, pi_for_epsilon, read_sidecar, release, write_sidecar
from .sampler import SamplerConfig

EXIT_USER, EXIT_CONVERGENCE, EXIT_IO = 1, 2, 3


class ConvergenceFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _privacy_args(p, multi=False):
    g = p.add_mutually_exclusive_group()
    nargs = "+" if multi else None
    g.add_argument("--pi", type=float, nargs=nargs, help="symmetric flip probability")
    g.add_argument("--epsilon", type=float, nargs=nargs, help="edge privacy level")
    if not multi:
        p.add_argument("--p00", type=float, help="probability a non-edge is kept")
        p.add_argument("--p11", type=float, help="probability an edge is kept")


def _mc_args(p):
    p.add_argument("--config", help="key = value file with dotted keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--draws", type=int, help="retained draws per chain (sampler.n_draws)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpergm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("release", help="release perturbed copies of a graph")
    p.add_argument("graph")
    p.add_argument("--covariates")
    _privacy_args(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="fit an ERGM to a graph")
    p.add_argument("graph")
    p.add_argument("--covariates")
    p.add_argument("--model", default="edges")
    p.add_argument("--method", default="naive",
                   choices=["naive", "missing", "mple", "exact", "exact_missing"])
    p.add_argument("--sidecar", help="release parameters written by 'release'")
    _privacy_args(p)
    _mc_args(p)
    p.add_argument("--out", required=True, help="fit record file")

    p = sub.add_parser("evaluate", help="KL divergence between two fit records")
    p.add_argument("fit_x")
    p.add_argument("fit_y")
    p.add_argument("--graph", help="graph supplying covariates and chain start")
    p.add_argument("--covariates")
    _mc_args(p)
    p.add_argument("--out", help="write the result here as key = value lines")

    p = sub.add_parser("experiment", help="run the release/fit/evaluate grid")
    p.add_argument("--graph")
    p.add_argument("--covariates")
    p.add_argument("--model")
    _privacy_args(p, multi=True)
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int)
    _mc_args(p)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("oracle", help="exact fits by enumeration (n <= 5)")
    p.add_argument("graph")
    p.add_argument("--covariates")
    p.add_argument("--model", default="edges")
    _privacy_args(p)
    p.add_argument("--out")
    return parser


# ---------------------------------------------------------------------------


def _params_from(args, required=False):
    if getattr(args, "p00", None) is not None or getattr(args, "p11", None) is not None:
        if args.pi is not None or args.epsilon is not None:
            raise ValueError("--p00/--p11 cannot be combined with --pi or --epsilon")
        if args.p00 is None or args.p11 is None:
            raise ValueError("--p00 and --p11 must be given together")
        return PrivacyParams(args.p00, args.p11)
    if args.pi is not None:
        return PrivacyParams.symmetric(args.pi)
    if args.epsilon is not None:
        return PrivacyParams.from_epsilon(args.epsilon)
    if required:
        raise ValueError("privacy parameters required: --pi, --epsilon or --p00/--p11")
    return None


def _mc_configs(args):
    values = read_config(args.config) if getattr(args, "config", None) else {}
    groups = {"sampler": {}, "estimation": {}}
    for key, value in values.items():
        section, _, name = key.partition(".")
        if section in groups:
            groups[section][name] = value
    scfg = SamplerConfig(**_coerce(SamplerConfig, groups["sampler"]))
    ecfg = EstimationConfig(**_coerce(EstimationConfig, groups["estimation"]))
    if args.seed is not None:
        scfg = replace(scfg, seed=args.seed)
    if args.draws is not None:
        scfg = replace(scfg, n_draws=args.draws)
    return scfg, ecfg


def _write_kv(path, items: dict):
    Path(path).write_text("".join(f"{k} = {json.dumps(v)}\n" for k, v in items.items()))


def cmd_release(args):
    params = _params_from(args, required=True)
    if args.count < 1:
        raise ValueError("--count must be >= 1")
    x, labels = read_edgelist(args.graph, args.covariates)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if x.covariates:
        write_covariates(x, out / "covariates.csv", labels)
    for k in range(args.count):
        seed = derive_seed(args.seed, k)
        y = release(x, params, seed=seed)
        stem = f"release_{k:03d}"
        write_edgelist(y, out / f"{stem}.edgelist")
        write_sidecar(out / f"{stem}.sidecar", params, seed, x.n,
                      master_seed=args.seed, index=k)
    print(f"wrote {args.count} release(s) to {out} (epsilon = {params.epsilon:.6g})")
    return 0


def cmd_fit(args):
    y, _ = read_edgelist(args.graph, args.covariates)
    spec = ModelSpec(args.model)
    params = _params_from(args)
    if args.sidecar:
        if params is not None:
            raise ValueError("--sidecar cannot be combined with explicit privacy flags")
        params, _ = read_sidecar(args.sidecar)
    if args.method in ("missing", "exact_missing") and params is None:
        raise ValueError(f"method {args.method!r} needs a privacy sidecar or privacy flags")
    scfg, ecfg = _mc_configs(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        res = fit(y, spec, args.method, params, ecfg, scfg)
    res.write(args.out)
    print(_summary(res))
    if not res.converged:
        raise ConvergenceFailure(res.diagnostics.get("message", "fit did not converge"))
    return 0


def _summary(res: FitResult) -> str:
    lines = [f"method {res.method}, converged {res.converged}, iterations {res.iterations}"]
    for k, lab in enumerate(res.labels):
        se = "" if res.std_errors is None else f"  ({res.std_errors[k]:.4f})"
        lines.append(f"  {lab:24s} {res.theta[k]: .4f}{se}")
    return "\n".join(lines)


def cmd_evaluate(args):
    fx, fy = FitResult.read(args.fit_x), FitResult.read(args.fit_y)
    if fx.model != fy.model or fx.n != fy.n:
        raise ValueError("fit records differ in model or node count")
    spec = ModelSpec(fx.model)
    if args.graph:
        g, _ = read_edgelist(args.graph, args.covariates)
    elif spec.attributes:
        raise ValueError("model has nodematch terms; pass --graph and --covariates")
    else:
        g = empty_graph(fx.n)
    scfg, _ = _mc_configs(args)
    kl, se = kl_divergence(fx.theta, fy.theta, spec, g, scfg, return_se=True)
    items = {"kl": kl, "kl_se": se, "method": "exact" if g.n <= MAX_ENUM_NODES else "mcmc",
             "fit_x": str(args.fit_x), "fit_y": str(args.fit_y), "seed": scfg.seed,
             "n_draws": scfg.n_draws}
    if args.out:
        _write_kv(args.out, items)
    print(f"KL = {kl:.6g} (MC se {se:.3g})")
    return 0


def experiment_config(args) -> ExperimentConfig:
    values = read_config(args.config) if args.config else {}
    flags = {
        "experiment.graph": args.graph, "experiment.covariates": args.covariates,
        "experiment.model": args.model, "experiment.replicates": args.replicates,
        "experiment.workers": args.workers, "experiment.seed": args.seed,
        "experiment.out": args.out, "sampler.n_draws": args.draws,
    }
    if args.pi is not None:
        flags["experiment.pis"] = tuple(args.pi)
    elif args.epsilon is not None:
        flags["experiment.pis"] = tuple(pi_for_epsilon(e) for e in args.epsilon)
    values.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentConfig.from_mapping(values)


def cmd_experiment(args):
    cfg = experiment_config(args)
    if cfg.out is None:
        raise ValueError("an output directory is required (--out or experiment.out)")
    try:
        res = run_experiment(cfg)
    except RuntimeError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    print(f"{len(res.records)} records written to {cfg.out}")
    for (pi, method), c in sorted(res.failures.items()):
        print(f"  excluded {c} failed {method} fit(s) at pi={pi}")
    return 0


def cmd_oracle(args):
    g, _ = read_edgelist(args.graph, args.covariates)
    if g.n > MAX_ENUM_NODES:
        raise ValueError(f"oracle enumerates graphs and needs n <= {MAX_ENUM_NODES}, got {g.n}")
    spec = ModelSpec(args.model)
    params = _params_from(args)
    items = {}
    naive = fit(g, spec, "exact")
    _add_fit(items, "exact", naive)
    results = [naive]
    if params is not None:
        miss = fit(g, spec, "exact_missing", params)
        _add_fit(items, "exact_missing", miss)
        results.append(miss)
        if naive.converged and miss.converged:
            items["kl.exact_missing"] = kl_exact(naive.theta, miss.theta, spec, g.n,
                                                 g.covariates)
    if args.out:
        _write_kv(args.out, items)
    for k, v in items.items():
        print(f"{k} = {json.dumps(v)}")
    bad = [r for r in results if not r.converged]
    if bad:
        raise ConvergenceFailure("; ".join(
            f"{r.method}: {r.diagnostics.get('message', 'no finite maximiser')}" for r in bad
        ))
    return 0


def _add_fit(items, prefix, res):
    items[f"{prefix}.converged"] = bool(res.converged)
    for k, lab in enumerate(res.labels):
        items[f"{prefix}.estimate.{lab}"] = float(res.theta[k])
    if not res.converged:
        items[f"{prefix}.message"] = res.diagnostics.get("message", "")
        if "divergence_direction" in res.diagnostics:
            items[f"{prefix}.divergence_direction"] = res.diagnostics["divergence_direction"]


COMMANDS = {
    "release": cmd_release, "fit": cmd_fit, "evaluate": cmd_evaluate,
    "experiment": cmd_experiment, "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConvergenceFailure as exc:
        print(f"dpergm: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (OSError, UnicodeDecodeError) as exc:
        print(f"dpergm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"dpergm: error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
