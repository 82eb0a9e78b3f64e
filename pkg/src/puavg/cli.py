"""Command-line front end.

Subcommands: ``simulate`` (scenario batches), ``fit`` (manifest-driven
pipeline producing a model directory), ``predict``, ``evaluate``, and
``weights``.  Exit codes: 0 success, 2 malformed input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io
from .averaging import averaged_coefficients, build_bank, solve_weights
from .data import DomainDataset, pu_constant
from .errors import DataError, NumericalError
from .estimation import FitOptions, L1Options, fit_mle
from .folds import make_folds
from .likelihoods import Objective, pu_mean_nll
from .links import sigmoid
from .metrics import EvalReport, auc, auc_adj, confusion_metrics
from .simulate import METHODS, CaseResult, case_config, run_case


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="puavg",
        description="Multi-source model averaging for positive-unlabeled data")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a synthetic scenario batch")
    sim.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    sim.add_argument("--n", type=int, nargs="+", default=[400, 800, 1600])
    sim.add_argument("--pl", type=float, nargs="+", default=[0.3, 0.4])
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--folds", type=int, default=5)
    sim.add_argument("--n-test", type=int, default=500)
    sim.add_argument("--out", required=True)

    fit = sub.add_parser("fit", help="fit all manifest domains and solve weights")
    fit.add_argument("--manifest", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--standardize", action="store_true",
                     help="z-score features using target-domain statistics")

    pred = sub.add_parser("predict", help="per-row class probabilities")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", help="score a labeled or PU test file")
    ev.add_argument("--model", required=True)
    ev.add_argument("--test", required=True)
    ev.add_argument("--pi1", type=float, default=None)
    ev.add_argument("--threshold", type=float, default=None)
    ev.add_argument("--out", required=True)

    wt = sub.add_parser("weights", help="print the weight allocation")
    wt.add_argument("--model", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "fit": _cmd_fit,
        "predict": _cmd_predict,
        "evaluate": _cmd_evaluate,
        "weights": _cmd_weights,
    }[args.command]
    try:
        return handler(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


# -- simulate -----------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = case_config(args.case, n_grid=tuple(args.n), pl_grid=tuple(args.pl),
                      reps=args.reps, n_test=args.n_test, k=args.folds,
                      seed=args.seed)
    payload = {"case": cfg.case, "n_grid": list(cfg.n_grid),
               "pl_grid": list(cfg.pl_grid), "reps": cfg.reps,
               "n_test": cfg.n_test, "k": cfg.k, "seed": cfg.seed,
               "threshold": cfg.threshold, "kl_eval_size": cfg.kl_eval_size,
               "link": cfg.link,
               "domains": [[d.domain_id, d.role, d.scheme, d.beta_name]
                           for d in cfg.domains]}
    hash_ = io.config_hash(payload)
    result = run_case(cfg)

    os.makedirs(args.out, exist_ok=True)
    io.write_json(os.path.join(args.out, "config.json"),
                  {**payload, "config_hash": hash_})
    _write_metric_files(args.out, cfg, result, hash_)
    io.write_json(os.path.join(args.out, "summary.json"),
                  _summarize(cfg, result, hash_))
    if result.batch_failed:
        raise NumericalError(
            f"{len(result.failures)} of "
            f"{len(result.failures) + len(result.reports)} replications failed")
    return 0


def _write_metric_files(out_dir: str, cfg, result: CaseResult, hash_: str):
    metric_rows = []
    weight_rows = []
    domain_ids = [d.domain_id for d in cfg.domains]
    for rep in result.reports:
        for method in METHODS:
            r = rep.method_reports[method]
            metric_rows.append([rep.n, rep.p_l, rep.rep, method, r.acc, r.auc,
                                r.auc_adj, r.tpr, r.fpr, r.rkl])
        weight_rows.append([rep.n, rep.p_l, rep.rep,
                            *[float(w) for w in rep.weights],
                            rep.uninformative_weight_sum, rep.kl_ratio])
    io.write_metric_rows(
        os.path.join(out_dir, "metrics.csv"),
        ["n", "p_l", "rep", "method", "acc", "auc", "auc_adj", "tpr", "fpr",
         "rkl"], metric_rows, hash_, cfg.seed)
    io.write_metric_rows(
        os.path.join(out_dir, "weights.csv"),
        ["n", "p_l", "rep", *[f"w_{d}" for d in domain_ids],
         "uninformative_weight_sum", "kl_ratio"], weight_rows, hash_, cfg.seed)


def _quartiles(values) -> dict:
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if len(values) == 0:
        return {"median": float("nan"), "iqr_low": float("nan"),
                "iqr_high": float("nan")}
    q25, med, q75 = np.percentile(values, [25, 50, 75])
    return {"median": float(med), "iqr_low": float(q25), "iqr_high": float(q75)}


def _summarize(cfg, result: CaseResult, hash_: str) -> dict:
    scenarios = []
    for n in cfg.n_grid:
        for pl in cfg.pl_grid:
            reps = [r for r in result.reports if r.n == n and r.p_l == pl]
            if not reps:
                continue
            methods = {}
            for method in METHODS:
                methods[method] = {
                    field: _quartiles([getattr(r.method_reports[method], field)
                                       for r in reps])
                    for field in EvalReport.FIELDS}
            entry = {"n": n, "p_l": pl, "n_reports": len(reps),
                     "methods": methods,
                     "mean_weights": [float(v) for v in
                                      np.mean([r.weights for r in reps], axis=0)]}
            if cfg.uninformative:
                entry["uninformative_weight_sum"] = _quartiles(
                    [r.uninformative_weight_sum for r in reps])
            if cfg.track_kl_ratio:
                entry["kl_ratio"] = _quartiles([r.kl_ratio for r in reps])
            scenarios.append(entry)
    return {"config_hash": hash_, "seed": cfg.seed, "case": cfg.case,
            "n_replications": len(result.reports),
            "n_failures": len(result.failures),
            "failures": list(result.failures),
            "batch_failed": result.batch_failed,
            "scenarios": scenarios}


# -- fit ------------------------------------------------------------------------

def _cmd_fit(args) -> int:
    manifest = io.read_manifest(args.manifest)
    standardize = args.standardize or manifest.standardize

    names_ref = None
    loaded = []
    for entry in manifest.domains:
        names, ds = io.load_domain(entry, manifest.base_dir)
        if names_ref is None:
            names_ref = names
        elif names != names_ref:
            raise DataError(
                f"domain {entry.domain_id!r}: feature header {names} does not "
                f"match the first domain's {names_ref}")
        loaded.append((entry, ds))

    target_entry, target_ds = next(
        (e, d) for e, d in loaded if e.role == "target")
    stats = None
    if standardize:
        mean = target_ds.x.mean(axis=0)
        sd = target_ds.x.std(axis=0)
        bad = [names_ref[j] for j in np.flatnonzero(sd < 1e-12)]
        if bad:
            raise DataError(f"cannot standardize constant feature(s): {bad}")
        stats = {"mean": [float(v) for v in mean], "sd": [float(v) for v in sd]}

    def transform(ds: DomainDataset) -> DomainDataset:
        x = ds.x
        if stats is not None:
            x = (x - np.asarray(stats["mean"])) / np.asarray(stats["sd"])
        if manifest.intercept:
            x = np.column_stack([np.ones(len(x)), x])
        return DomainDataset(x=x, scheme=ds.scheme, pi1=ds.pi1, y=ds.y,
                             z=ds.z, domain_id=ds.domain_id,
                             has_intercept_column=manifest.intercept)

    target = transform(target_ds)
    sources = [transform(d) for e, d in loaded if e.role != "target"]

    opts = FitOptions(seed=manifest.seed)
    l1 = L1Options(grid_size=manifest.l1_grid_size,
                   min_ratio=manifest.l1_min_ratio,
                   cv_folds=manifest.l1_cv_folds) if manifest.l1_enabled else None
    folds = make_folds(target, manifest.k, seed=manifest.seed)
    bank = build_bank(target, sources, folds, opts, l1=l1)
    weights = solve_weights(bank, target, folds)
    averaged = averaged_coefficients(weights, bank)

    hash_ = io.config_hash({
        "domains": [[e.domain_id, e.role, e.scheme, e.path, e.pi1, e.p_l]
                    for e in manifest.domains],
        "k": manifest.k, "seed": manifest.seed, "threshold": manifest.threshold,
        "intercept": manifest.intercept, "standardize": standardize,
        "l1": [manifest.l1_enabled, manifest.l1_grid_size,
               manifest.l1_min_ratio, manifest.l1_cv_folds]})

    fits = [(target_entry, bank.target_full)] + \
        [(e, f) for (e, _), f in zip(
            [(e, d) for e, d in loaded if e.role != "target"], bank.sources)]
    model = {
        "format": io.MODEL_FORMAT,
        "config_hash": hash_,
        "seed": manifest.seed,
        "k": manifest.k,
        "threshold": manifest.threshold,
        "intercept": manifest.intercept,
        "feature_names": names_ref,
        "standardize": stats,
        "pi1": target_entry.pi1,
        "b_full": bank.b_full,
        "domains": [{
            "id": e.domain_id, "role": e.role, "scheme": e.scheme,
            "p_l": e.p_l, "coefficients": [float(v) for v in f.beta],
            "converged": bool(f.converged), "objective": float(f.objective),
        } for e, f in fits],
        "weights": {
            "w": [float(v) for v in weights.w],
            "cv_value": float(weights.cv_value),
            "vertex_cv": [float(v) for v in weights.vertex_cv],
            "iters": weights.iters,
            "grad_mapping_norm": float(weights.grad_mapping_norm),
            "start_index": weights.start_index,
        },
        "averaged_coefficients": [float(v) for v in averaged],
        "lambdas": None if bank.lambdas is None else
            [float(v) for v in bank.lambdas],
    }
    io.write_model(args.out, model)
    return 0


# -- predict / evaluate / weights -------------------------------------------------

def _model_design(model: dict, x: np.ndarray) -> np.ndarray:
    if model["standardize"] is not None:
        mean = np.asarray(model["standardize"]["mean"])
        sd = np.asarray(model["standardize"]["sd"])
        x = (x - mean) / sd
    if model["intercept"]:
        x = np.column_stack([np.ones(len(x)), x])
    return x


def _model_scores(model: dict, x: np.ndarray) -> np.ndarray:
    return _model_design(model, x) @ np.asarray(model["averaged_coefficients"])


def _cmd_predict(args) -> int:
    model = io.read_model(args.model)
    x = io.read_feature_csv(args.data, model["feature_names"])
    eta = _model_scores(model, x)
    probs = np.clip(sigmoid(eta), np.nextafter(0.0, 1.0),
                    np.nextafter(1.0, 0.0))
    io.write_predictions(args.out, probs, model["config_hash"], model["seed"])
    return 0


def _cmd_evaluate(args) -> int:
    model = io.read_model(args.model)
    header, _ = io.read_table(args.test)
    has_y = "y" in header
    has_z = "z" in header
    if has_y and has_z:
        raise DataError(f"{args.test}: test file must be labeled (y) or PU "
                        "(z), not both")
    if not has_y and not has_z:
        raise DataError(f"{args.test}:1: no y or z label column found")
    scheme = "binary" if has_y else "pu"
    _, x, y, z = io.read_domain_csv(args.test, scheme)
    eta = _model_scores(model, x)
    scores = sigmoid(eta)
    threshold = model["threshold"] if args.threshold is None else args.threshold

    nan = float("nan")
    if scheme == "binary":
        acc, tpr, fpr = confusion_metrics(scores, y, threshold)
        report = EvalReport(acc=acc, auc=auc(scores, y), auc_adj=nan, tpr=tpr,
                            fpr=fpr, rkl=nan, n_test=len(y), threshold=threshold)
    else:
        pi1 = args.pi1 if args.pi1 is not None else model["pi1"]
        if pi1 is None:
            raise DataError("--pi1 is required to evaluate a PU test file")
        n_l = int(z.sum())
        b = pu_constant(n_l, len(z) - n_l, pi1).b
        test_ds = DomainDataset.pu(
            _model_design(model, x), z, pi1=pi1, domain_id="test")
        obj = Objective.for_dataset(test_ds)
        sup = fit_mle(obj, FitOptions(seed=model["seed"]))
        sup_nll = pu_mean_nll(test_ds.x @ sup.beta, z, b)
        rkl_value = 100.0 * (pu_mean_nll(eta, z, b) - sup_nll)
        report = EvalReport(acc=nan, auc=nan, auc_adj=auc_adj(scores, z, pi1),
                            tpr=nan, fpr=nan, rkl=rkl_value, n_test=len(z),
                            threshold=threshold)
    io.write_json(args.out, {
        "config_hash": model["config_hash"], "seed": model["seed"],
        "scheme": scheme, "n_test": report.n_test,
        "threshold": report.threshold,
        **{f: getattr(report, f) for f in EvalReport.FIELDS}})
    return 0


def _cmd_weights(args) -> int:
    model = io.read_model(args.model)
    w = model["weights"]
    ids = [d["id"] for d in model["domains"]]
    roles = [d["role"] for d in model["domains"]]
    print(f"{'domain':<12} {'role':<8} {'weight':>12} {'vertex_cv':>14}")
    for did, role, wi, vc in zip(ids, roles, w["w"], w["vertex_cv"]):
        print(f"{did:<12} {role:<8} {wi:>12.6f} {vc:>14.8f}")
    print(f"cv_value = {w['cv_value']!r}")
    print(f"solver: iters={w['iters']} start={w['start_index']} "
          f"grad_mapping_norm={w['grad_mapping_norm']:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
