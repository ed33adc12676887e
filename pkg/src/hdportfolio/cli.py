"""Command-line front end.

Subcommands: ``simulate-size``, ``simulate-power``, ``simulate-roc``,
``verify-theory``, ``test`` and ``analyze``. Every run writes the result file
next to a manifest (``<out>.manifest.json``) containing the fully resolved
configuration, the library version and the seed, which is sufficient to
reproduce the run. Flags override values from an optional JSON config file.

Exit codes: 0 on success, 1 when the analysis itself fails (or a validation
run does not pass), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import HDPortfolioError
from .hdtest import (
    LinearHypothesis,
    shrinkage_ci,
    test_mahalanobis,
    test_mahalanobis_hd,
    test_shrinkage,
    test_shrinkage_tilde,
)
from .ingest import load_returns, rolling_analysis
from .montecarlo import (
    TEST_IDS,
    ScenarioConfig,
    empirical_size,
    power_curve,
    roc_curve,
    verify_theory,
)
from .portfolio import PortfolioWeights
from .shrinkage import OmegaVariant
from .statcore import sample_moments

SCHEMA_VERSION = "1"


def _default_workers() -> int:
    env = os.environ.get("HDPORTFOLIO_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    return data


def _resolve(defaults: dict, file_cfg: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicitly passed flags."""
    resolved = dict(defaults)
    for key, value in file_cfg.items():
        if key in resolved:
            resolved[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _write_manifest(out_base: str, command: str, resolved: dict) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "library_version": __version__,
        "config": resolved,
        "seed": resolved.get("seed"),
    }
    with open(out_base + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_report(report, out_base: str, fmt: str) -> None:
    if fmt in ("json", "both"):
        report.write_json(out_base + ".json")
    if fmt in ("csv", "both"):
        report.write_csv(out_base + ".csv")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", required=True,
                        help="output base path (extensions are appended)")
    parser.add_argument("--format", choices=("json", "csv", "both"), default="json")
    parser.add_argument("--config", help="optional JSON config file; flags win")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: HDPORTFOLIO_WORKERS or cores)")
    parser.add_argument("--verbose", action="store_true")


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--test", required=True, choices=TEST_IDS, dest="test_id")
    parser.add_argument("--p", type=int, default=None)
    parser.add_argument("--c", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--k", type=int, default=None,
                        help="restriction block size (t-l / t-l-c only)")
    parser.add_argument("--reps", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--level", type=float, default=None, help="nominal test level")
    parser.add_argument("--condition-index", type=float, default=None, dest="condition_index")


_SCENARIO_DEFAULTS = {
    "p": 100, "c": 0.3, "gamma": 5.0, "k": None, "reps": 5000, "seed": 0,
    "level": 0.05, "condition_index": 450.0,
}


def _scenario_from(resolved: dict, shift_a: float = 0.08) -> ScenarioConfig:
    return ScenarioConfig(
        p=int(resolved["p"]), c=float(resolved["c"]), gamma=float(resolved["gamma"]),
        condition_index=float(resolved["condition_index"]),
        replications=int(resolved["reps"]), seed=int(resolved["seed"]),
        nominal_level=float(resolved["level"]),
        k=None if resolved["k"] is None else int(resolved["k"]),
        shift_a=shift_a,
    )


def _cmd_simulate_size(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    resolved = _resolve(_SCENARIO_DEFAULTS, file_cfg, args)
    resolved["test"] = args.test_id
    config = _scenario_from(resolved)
    report = empirical_size(args.test_id, config, workers=args.workers or _default_workers())
    _write_report(report, args.out, args.format)
    _write_manifest(args.out, "simulate-size", resolved)
    if args.verbose:
        print(f"empirical size: {report.empirical_size:.6f} "
              f"({report.failures} failed replications)")
    return 0


def _cmd_simulate_power(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {**_SCENARIO_DEFAULTS, "kappa_grid": "0,5,10,15,20,25,30,35"}
    resolved = _resolve(defaults, file_cfg, args)
    resolved["test"] = args.test_id
    grid = [float(x) for x in str(resolved["kappa_grid"]).split(",") if x.strip() != ""]
    config = _scenario_from(resolved)
    report = power_curve(args.test_id, config, grid,
                         workers=args.workers or _default_workers())
    _write_report(report, args.out, args.format)
    _write_manifest(args.out, "simulate-power", resolved)
    if args.verbose:
        for a, power in report.power_curve:
            print(f"a={a:.4f}: power={power:.4f}")
    return 0


def _cmd_simulate_roc(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {**_SCENARIO_DEFAULTS, "a": 0.08}
    resolved = _resolve(defaults, file_cfg, args)
    resolved["test"] = args.test_id
    config = _scenario_from(resolved, shift_a=float(resolved["a"]))
    report = roc_curve(args.test_id, config, workers=args.workers or _default_workers())
    _write_report(report, args.out, args.format)
    _write_manifest(args.out, "simulate-roc", resolved)
    if args.verbose:
        print(f"AUC: {report.auc:.4f}")
    return 0


def _cmd_verify_theory(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"p": 100, "c": 0.3, "gamma": 5.0, "reps": 20000, "ks_reps": 10000,
                "seed": 0, "tolerance": None}
    resolved = _resolve(defaults, file_cfg, args)
    config = ScenarioConfig(p=int(resolved["p"]), c=float(resolved["c"]),
                            gamma=float(resolved["gamma"]),
                            replications=int(resolved["reps"]), seed=int(resolved["seed"]))
    tolerance = resolved["tolerance"]
    report = verify_theory(config, workers=args.workers or _default_workers(),
                           ks_replications=int(resolved["ks_reps"]),
                           tolerance=None if tolerance is None else float(tolerance))
    report.write_json(args.out + ".json")
    _write_manifest(args.out, "verify-theory", resolved)
    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: error ratio {check.ratio:.4g}")
    return 0 if report.all_passed else 1


def _load_weights(source: str, p: int) -> PortfolioWeights:
    if source == "equal":
        return PortfolioWeights.equally_weighted(p)
    values = np.loadtxt(source, delimiter=None, dtype=np.float64).ravel()
    return PortfolioWeights(values)


def _cmd_test(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"gamma": 5.0, "level": 0.95, "k": None, "w0": "equal"}
    resolved = _resolve(defaults, file_cfg, args)
    dataset = load_returns(args.data)
    panel = dataset.returns.T  # assets x time
    moments = sample_moments(panel)
    gamma = float(resolved["gamma"])
    level = float(resolved["level"])
    beta = 1.0 - level
    w0 = _load_weights(resolved["w0"], moments.p)
    out: dict = {"schema_version": SCHEMA_VERSION, "test": args.test_id,
                 "p": moments.p, "n": moments.n, "gamma": gamma, "level": level}
    if args.test_id in ("t-alpha", "t-alpha-tilde"):
        variant = OmegaVariant.HAT if args.test_id == "t-alpha" else OmegaVariant.TILDE
        runner = test_shrinkage if args.test_id == "t-alpha" else test_shrinkage_tilde
        result = runner(moments, w0, gamma)
        ci = shrinkage_ci(moments, w0, gamma, level=level, variant=variant)
        out.update(statistic=result.statistic, dist="normal",
                   p_value=result.p_value, reject=result.reject_at(beta),
                   alpha_hat=ci.center, ci_lo=ci.lower, ci_hi=ci.upper)
    else:
        if resolved["k"] is None:
            raise HDPortfolioError("restriction tests need --k")
        k = int(resolved["k"])
        hyp = LinearHypothesis.first_k_weights(w0.w[:k], moments.p)
        runner = test_mahalanobis if args.test_id == "t-l" else test_mahalanobis_hd
        result = runner(moments, hyp, gamma)
        out.update(statistic=result.statistic, dist=f"chi2({result.df})",
                   p_value=result.p_value, reject=result.reject_at(beta))
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(args.out, "test", {**resolved, "data": args.data,
                                       "test": args.test_id, "seed": None})
    if args.verbose:
        print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {"p": 100, "c": 0.3, "gamma": 5.0, "level": 0.95, "target": "equal"}
    resolved = _resolve(defaults, file_cfg, args)
    dataset = load_returns(args.returns, allow_missing=args.allow_missing)
    target = resolved["target"]
    if target == "equal":
        target_arg: str | np.ndarray = "equally_weighted"
    else:
        target_arg = np.loadtxt(target, dtype=np.float64).ravel()
    result = rolling_analysis(dataset, p=int(resolved["p"]), c=float(resolved["c"]),
                              gamma=float(resolved["gamma"]), target=target_arg,
                              level=float(resolved["level"]),
                              workers=args.workers or _default_workers())
    if args.format in ("json", "both"):
        result.write_json(args.out + ".json")
    if args.format in ("csv", "both"):
        result.write_csv(args.out + ".csv")
    _write_manifest(args.out, "analyze", {**resolved, "returns": args.returns,
                                          "seed": None})
    if args.verbose:
        print(f"{len(result.records)} windows ({result.valid_count} valid)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdportfolio",
        description="Inference for expected-utility optimal portfolios in high dimensions")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_size = sub.add_parser("simulate-size", help="empirical size under the exact null")
    _add_scenario_flags(p_size)
    _add_common(p_size)
    p_size.set_defaults(func=_cmd_simulate_size)

    p_power = sub.add_parser("simulate-power", help="power against mean-shift alternatives")
    _add_scenario_flags(p_power)
    p_power.add_argument("--kappa-grid", dest="kappa_grid", default=None,
                         help="comma-separated shift multipliers (a = 0.01 * kappa)")
    _add_common(p_power)
    p_power.set_defaults(func=_cmd_simulate_power)

    p_roc = sub.add_parser("simulate-roc", help="ROC curve at a fixed alternative")
    _add_scenario_flags(p_roc)
    p_roc.add_argument("--a", type=float, default=None, help="fixed mean shift (default 0.08)")
    _add_common(p_roc)
    p_roc.set_defaults(func=_cmd_simulate_roc)

    p_verify = sub.add_parser("verify-theory", help="validate the asymptotic results")
    p_verify.add_argument("--p", type=int, default=None)
    p_verify.add_argument("--c", type=float, default=None)
    p_verify.add_argument("--gamma", type=float, default=None)
    p_verify.add_argument("--reps", type=int, default=None)
    p_verify.add_argument("--ks-reps", type=int, default=None, dest="ks_reps")
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--tolerance", type=float, default=None,
                          help="override the error-ratio bound for every check")
    _add_common(p_verify)
    p_verify.set_defaults(func=_cmd_verify_theory)

    p_test = sub.add_parser("test", help="run one test on a returns file")
    p_test.add_argument("--data", required=True, help="wide returns CSV")
    p_test.add_argument("--w0", default=None, help="'equal' or a weights file")
    p_test.add_argument("--test", required=True, choices=TEST_IDS, dest="test_id")
    p_test.add_argument("--gamma", type=float, default=None)
    p_test.add_argument("--k", type=int, default=None)
    p_test.add_argument("--level", type=float, default=None, help="confidence level")
    _add_common(p_test)
    p_test.set_defaults(func=_cmd_test)

    p_an = sub.add_parser("analyze", help="rolling-window empirical analysis")
    p_an.add_argument("--returns", required=True, help="wide returns CSV")
    p_an.add_argument("--p", type=int, default=None)
    p_an.add_argument("--c", type=float, default=None)
    p_an.add_argument("--gamma", type=float, default=None)
    p_an.add_argument("--target", default=None, help="'equal' or a weights file")
    p_an.add_argument("--level", type=float, default=None)
    p_an.add_argument("--allow-missing", action="store_true")
    _add_common(p_an)
    p_an.set_defaults(func=_cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (HDPortfolioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
