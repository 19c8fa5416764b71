"""Batch command-line front end.

Subcommands: score, compare, decompose, fit, verify, sample.  Forecasts
arrive as JSON Lines (one record per instance), observations in a parallel
file keyed by line number.  Every run writes a single JSON report object to
stdout; diagnostics go to stderr.  Exit codes: 0 success, 1 validation
error, 2 numeric failure.

Rule specs are compact strings parsed by a small grammar:

    crps[:fair|empirical]          ensemble or normal records
    log | quadratic | brier | spherical | pseudospherical:alpha=A
    energy:beta=B[,variant]        vector ensembles
    variogram:p=P                  vector ensembles
    ds                             mvnormal records or ensembles (moments)
    gaussian:lambda=L[,variant]    kernel score on ensembles
    laplacian:lambda=L[,variant]   kernel score on ensembles
    tw:base=<kernel spec>,t=T      threshold-weighted kernel score
    hyvarinen[:oracle=mix2]        normal records, or the built-in mixture

The tw base must be a single-parameter kernel spec; t comes last.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import evaluation, local, propriety
from .estimation import fit_conditional_min_score, fit_min_score
from .kernels import kernel_from_spec, kernel_score_exact
from .model import (
    Categorical,
    Ensemble,
    MultivariateNormal,
    Normal,
    NumericFailure,
    ValidationError,
    forecast_sample,
    parse_forecast,
    parse_observation,
)
from .multivariate import (
    dawid_sebastiani,
    dawid_sebastiani_from_ensemble,
    energy_score,
    variogram_score,
)
from .specs import parse_spec, spec_float
from .univariate import (
    brier_binary,
    crps_ensemble,
    crps_normal,
    log_score,
    pseudospherical_score,
    quadratic_score,
    tw_crps,
)

log = logging.getLogger("scorelab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise ValidationError(message)


def _read_lines(path: str) -> list[str]:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {path}")
    return [line for line in p.read_text().splitlines() if line.strip()]


def _load_forecasts(path: str):
    return [parse_forecast(line) for line in _read_lines(path)]


def _load_observations(path: str):
    return [parse_observation(line) for line in _read_lines(path)]


def _variant_of(params: dict, default: str = "fair") -> str:
    flags = params.get("_flags", [])
    variant = params.get("variant", flags[0] if flags else default)
    if variant not in ("fair", "empirical"):
        raise ValidationError(f"unknown variant {variant!r}")
    return variant


def build_scorer(spec: str):
    """Resolve a rule spec to (canonical string, score(forecast, obs))."""
    name, params = parse_spec(spec)

    if name == "crps":
        variant = _variant_of(params)

        def scorer(f, y):
            if isinstance(f, Ensemble):
                return crps_ensemble(f.members, y, weights=f.weights, variant=variant)
            if isinstance(f, Normal):
                return crps_normal(f.mu, f.sigma, y)
            raise ValidationError("crps needs ensemble or normal records")

        return f"crps:{variant}", scorer

    if name == "log":
        return "log", lambda f, y: log_score(f, y)
    if name == "quadratic":
        return "quadratic", lambda f, y: quadratic_score(f, y)
    if name == "brier":
        def scorer(f, y):
            if not isinstance(f, Categorical) or f.n_classes != 2:
                raise ValidationError("brier needs binary categorical records")
            return brier_binary(float(f.probs[1]), y)
        return "brier", scorer
    if name in ("spherical", "pseudospherical"):
        alpha = spec_float(params, "alpha", 2.0 if name == "spherical" else None)
        def scorer(f, y, _a=alpha):
            if not isinstance(f, Categorical):
                raise ValidationError("pseudospherical needs categorical records")
            return pseudospherical_score(f, y, alpha=_a)
        return f"pseudospherical:alpha={alpha:g}", scorer

    if name == "energy":
        beta = spec_float(params, "beta", 1.0)
        alpha = spec_float(params, "alpha", 2.0) if "alpha" in params else None
        variant = _variant_of(params)
        def scorer(f, y, _b=beta, _a=alpha, _v=variant):
            if not isinstance(f, Ensemble):
                raise ValidationError("energy score needs ensemble records")
            return energy_score(f.members, y, beta=_b, weights=f.weights, variant=_v,
                                norm_alpha=_a)
        canonical = f"energy:beta={beta:g},{variant}"
        if alpha is not None:
            canonical = f"energy:beta={beta:g},alpha={alpha:g},{variant}"
        return canonical, scorer

    if name == "variogram":
        p = spec_float(params, "p", 0.5)
        def scorer(f, y, _p=p):
            if not isinstance(f, Ensemble):
                raise ValidationError("variogram score needs ensemble records")
            return variogram_score(f.members, y, p=_p, weights=f.weights)
        return f"variogram:p={p:g}", scorer

    if name == "ds":
        def scorer(f, y):
            if isinstance(f, MultivariateNormal):
                return dawid_sebastiani(f.mean, f.cov, y)
            if isinstance(f, Ensemble):
                return dawid_sebastiani_from_ensemble(f.members, y)
            raise ValidationError("ds needs mvnormal or ensemble records")
        return "ds", scorer

    if name in ("gaussian", "laplacian", "tw"):
        variant = _variant_of(params.copy())
        params.pop("variant", None)
        params.pop("_flags", None)
        canonical = name if not params else name + ":" + ",".join(
            f"{k}={v}" for k, v in params.items()
        )
        kernel = kernel_from_spec(canonical if params else f"{name}")
        def scorer(f, y, _k=kernel, _v=variant):
            if not isinstance(f, Ensemble):
                raise ValidationError("kernel scores need ensemble records")
            return kernel_score_exact(_k, f, y, _v)
        return f"{canonical},{variant}", scorer

    if name == "hyvarinen":
        oracle_name = params.get("oracle")
        if oracle_name is None:
            def scorer(f, y):
                if not isinstance(f, Normal):
                    raise ValidationError("hyvarinen needs normal records (or oracle=mix2)")
                return local.hyvarinen_score(local.normal_oracle(f.mu, f.sigma), y)
            return "hyvarinen", scorer
        if oracle_name == "mix2":
            oracle = local.two_normal_mixture_oracle()
            return "hyvarinen:oracle=mix2", lambda f, y: local.hyvarinen_score(oracle, y)
        raise ValidationError(f"unknown oracle {oracle_name!r}; built-ins: mix2")

    raise ValidationError(f"unknown rule {spec!r}")


def _emit(report: dict) -> None:
    sys.stdout.write(json.dumps(report) + "\n")


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


# ---------------------------------------------------------------------------
# subcommands

def _cmd_score(args) -> dict:
    canonical, scorer = build_scorer(args.rule)
    obs = _load_observations(args.obs)
    needs_forecasts = not canonical.startswith("hyvarinen:oracle=")
    if needs_forecasts:
        if args.forecasts is None:
            raise ValidationError("score needs --forecasts for this rule")
        forecasts = _load_forecasts(args.forecasts)
        if len(forecasts) != len(obs):
            raise ValidationError(
                f"line mismatch: {len(forecasts)} forecasts vs {len(obs)} observations"
            )
    else:
        forecasts = [None] * len(obs)
    if not obs:
        raise ValidationError("empty input")
    values = [scorer(f, y) for f, y in zip(forecasts, obs)]
    scores = [v.value for v in values]
    mean = math.inf if math.inf in scores else math.fsum(scores) / len(scores)
    report = {"command": "score", "rule": canonical, "n": len(scores),
              "scores": scores, "mean": mean}
    quasi = _quasi_norm_flag(canonical)
    if quasi is not None:
        report["quasi_norm"] = quasi
    return report


def _quasi_norm_flag(canonical: str) -> bool | None:
    # alpha < 1 is only a quasi-norm; surface that in the report metadata
    if not canonical.startswith("energy:") or "alpha=" not in canonical:
        return None
    alpha = float(canonical.split("alpha=")[1].split(",")[0])
    return alpha < 1.0


def _cmd_compare(args) -> dict:
    canonical, scorer = build_scorer(args.rule)
    fa = _load_forecasts(args.forecasts_a)
    fb = _load_forecasts(args.forecasts_b)
    obs = _load_observations(args.obs)
    if not (len(fa) == len(fb) == len(obs)):
        raise ValidationError("compare needs aligned forecast and observation files")
    report = evaluation.compare(scorer, fa, fb, obs)
    return {"command": "compare", "rule": canonical, **_jsonable(report)}


def _cmd_decompose(args) -> dict:
    forecasts = _load_forecasts(args.forecasts)
    obs = _load_observations(args.obs)
    report = evaluation.corp_decompose(forecasts, obs, rule=args.rule, bins=args.bins)
    return {"command": "decompose", "rule": args.rule, "bins": args.bins,
            **_jsonable(report)}


def _cmd_fit(args) -> dict:
    lines = _read_lines(args.data)
    if args.conditional:
        xs, ys = [], []
        for line in lines:
            parts = line.split(",")
            if len(parts) != 2:
                raise ValidationError("conditional fit needs 'x,y' per line")
            try:
                xs.append(float(parts[0]))
                ys.append(float(parts[1]))
            except ValueError as exc:
                raise ValidationError(f"bad data line {line!r}") from exc
        result = fit_conditional_min_score(np.array(xs), np.array(ys), rule=args.rule,
                                           seed=args.seed)
        params = {"a": result.params[0], "b": result.params[1], "sigma": result.params[2]}
    else:
        try:
            data = np.array([float(line) for line in lines])
        except ValueError as exc:
            raise ValidationError(f"bad data file: {exc}") from exc
        result = fit_min_score(data, family=args.family, rule=args.rule, seed=args.seed)
        params = {"mu": result.params[0], "sigma": result.params[1]}
    return {"command": "fit", "family": args.family, "rule": args.rule,
            "conditional": bool(args.conditional), "params": _jsonable(params),
            "objective": result.objective, "iterations": result.iterations,
            "converged": result.converged}


def _cmd_verify(args) -> dict:
    check = args.check
    if check == "propriety":
        report = propriety.propriety_scan(args.rule, n_classes=args.n_classes,
                                          grid_step=args.grid_step)
    elif check == "concavity":
        report = propriety.concavity_scan(args.rule, n_classes=args.n_classes,
                                          trials=args.trials, seed=args.seed)
    elif check == "invariance":
        report = propriety.invariance_check(args.rule, args.transform,
                                            instances=args.instances, seed=args.seed,
                                            expected_degree=args.degree)
    elif check == "symmetry":
        report = propriety.symmetry_metric_check(args.rule, triples=args.trials,
                                                 seed=args.seed)
    elif check == "crps-rep":
        report = propriety.crps_representation_check(instances=args.instances,
                                                     seed=args.seed)
    elif check == "spectral":
        report = propriety.spectral_proportionality_check(args.rule, pairs=args.pairs,
                                                          seed=args.seed)
    else:
        raise ValidationError(f"unknown check {check!r}")
    return {"command": "verify", "check": check, **_jsonable(report)}


def _cmd_sample(args) -> dict:
    forecasts = _load_forecasts(args.forecasts)
    out = []
    for i, f in enumerate(forecasts):
        draws = forecast_sample(f, args.m, args.seed + i)
        out.append(_jsonable(np.asarray(draws)))
    return {"command": "sample", "m": args.m, "seed": args.seed, "samples": out}


def _build_parser() -> _Parser:
    parser = _Parser(prog="scorelab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score forecasts against observations")
    p.add_argument("--rule", required=True)
    p.add_argument("--forecasts")
    p.add_argument("--obs", required=True)
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("compare", help="compare two forecast files by mean score")
    p.add_argument("--rule", required=True)
    p.add_argument("--forecasts-a", required=True)
    p.add_argument("--forecasts-b", required=True)
    p.add_argument("--obs", required=True)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("decompose", help="miscalibration/discrimination/uncertainty split")
    p.add_argument("--rule", default="brier", choices=["brier", "quadratic"])
    p.add_argument("--forecasts", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--bins", type=int, default=None)
    p.set_defaults(fn=_cmd_decompose)

    p = sub.add_parser("fit", help="minimum-score parameter estimation")
    p.add_argument("--family", default="normal", choices=["normal"])
    p.add_argument("--rule", default="log", choices=["log", "crps"])
    p.add_argument("--data", required=True)
    p.add_argument("--conditional", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("verify", help="run a property scan and report")
    p.add_argument("--rule", default="brier")
    p.add_argument("--check", required=True,
                   choices=["propriety", "concavity", "invariance", "symmetry",
                            "crps-rep", "spectral"])
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--n-classes", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--transform", default="scale",
                   choices=["scale", "translate", "rotate"])
    p.add_argument("--degree", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("sample", help="draw seeded samples from forecast records")
    p.add_argument("--forecasts", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_sample)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        report = args.fn(args)
    except ValidationError as exc:
        log.error("validation: %s", exc)
        return 1
    except NumericFailure as exc:
        log.error("numeric: %s", exc)
        return 2
    _emit(report)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
