"""The ``concord`` command line tool.

Every subcommand resolves one :class:`RunConfig`, writes its echo to ``<output_dir>/<subcommand>.config.json`` and
then its artifacts. Failures end with a single stderr line::

    concord: error code=<CODE> exit=<n> message=<json-quoted text>
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from ._baselines import default_models
from ._config import RunConfig
from ._errors import ConcordError, ConfigError, DataError
from ._gibbs import ChainBudget, gibbs_run
from ._io import (parse_actuals_csv, parse_estimates_csv, parse_forecast_csv, parse_groups_csv, parse_quantity_list,
                  write_csv, write_estimates_csv, write_json, write_panel_csv, write_point_estimates_csv)
from ._lvbc import LvbcParameters, fit, fit_lambda_grid, ground_truth_parameters, simulate_panel
from ._metrics import REPORT_COLUMNS, EvalReport, bootstrap_report
from ._report import ReportSection, render_html_report
from ._seeding import derive_seed, make_rng
from ._simulation import run_sweep

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

SPLITS = ("train", "valid", "test")


def _build_parser() -> argparse.ArgumentParser:
    # flags that are not given stay out of the namespace, so only explicit flags override the config document
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON run configuration.")
    common.add_argument("--seed", type=int, help="Master seed (overrides the configuration).")
    common.add_argument("--output-dir", dest="output_dir", help="Directory for every artifact of the run.")
    common.add_argument("-v", "--verbose", dest="verbosity", action="count",
                        help="-v for progress, -vv for per-epoch detail.")

    parser = argparse.ArgumentParser(prog="concord",
                                     description="Bayesian consensus estimation from miscalibrated instruments.")
    parser.add_argument("--version", action="version", version=f"concord {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, help=help_text, parents=[common], argument_default=argparse.SUPPRESS)

    generate = add("generate", "Draw train/valid/test panels from the latent-group forwards model.")
    generate.add_argument("--num-instruments", dest="num_instruments", type=int)
    generate.add_argument("--coverage", type=float)

    simulate = add("simulate", "Monte-Carlo RMSE sweep of the closed-form estimators.")
    simulate.add_argument("--delta", type=float)
    simulate.add_argument("--alpha", type=float)
    simulate.add_argument("--beta", type=float)
    simulate.add_argument("--num-quantities", dest="num_quantities", type=int)
    simulate.add_argument("--num-realizations", dest="num_realizations", type=int)
    simulate.add_argument("--instrument-counts", dest="instrument_counts", type=int, nargs="+")
    simulate.add_argument("--kinds", nargs="+")
    simulate.add_argument("--n-jobs", dest="n_jobs", type=int)
    simulate.add_argument("--html", action="store_true", help="Also write an HTML report.")

    fit_parser = add("fit", "Learn LVBC parameters from a training panel.")
    fit_parser.add_argument("--train")
    fit_parser.add_argument("--actuals")
    fit_parser.add_argument("--valid")
    fit_parser.add_argument("--valid-actuals", dest="valid_actuals")
    fit_parser.add_argument("--valid-quantities", dest="valid_quantities",
                            help="Text file of quantity ids held out of the training panel for validation.")
    fit_parser.add_argument("--num-groups", dest="num_groups", type=int)
    fit_parser.add_argument("--lambda-grid", dest="lambda_grid", type=float, nargs="+")
    fit_parser.add_argument("--n-jobs", dest="n_jobs", type=int)

    infer = add("infer", "Gibbs inference of every quantity of a panel.")
    infer.add_argument("--params")
    infer.add_argument("--test")
    infer.add_argument("--lambda0", type=float)
    infer.add_argument("--num-samples", dest="num_samples", type=int)
    infer.add_argument("--burn-in", dest="burn_in", type=int)
    infer.add_argument("--credible-level", dest="credible_level", type=float)
    infer.add_argument("--z-update", dest="z_update", choices=("prior", "conditional"))

    evaluate = add("eval", "Score model predictions with bootstrap confidence intervals.")
    evaluate.add_argument("--predictions", action="append", metavar="MODEL=PATH",
                          help="Prediction file of one model; repeat for several models.")
    evaluate.add_argument("--actuals")
    evaluate.add_argument("--groups")
    evaluate.add_argument("--n-bootstrap", dest="n_bootstrap", type=int)
    evaluate.add_argument("--ci-level", dest="ci_level", type=float)
    evaluate.add_argument("--html", action="store_true", help="Also write an HTML report.")
    return parser


def _prediction_pairs(values: Sequence[str]) -> Dict[str, str]:
    out = {}
    for value in values:
        model, sep, path = value.partition("=")
        if not sep or not model or not path:
            raise ConfigError(f"--predictions expects MODEL=PATH; received {value!r}.")
        out[model] = path
    return out


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def format_error(error: Exception) -> str:
    code = getattr(error, "code", "INTERNAL_ERROR")
    exit_code = getattr(error, "exit_code", 1)
    return f"concord: error code={code} exit={exit_code} message={json.dumps(str(error))}"


def _run_generate(config: RunConfig) -> List[Path]:
    s = config.section
    template = config.ground_truth()
    weights = np.array([g["weight"] for g in s["groups"]], dtype=float)
    groups = make_rng(derive_seed(config.seed, 0)).choice(template.num_groups, size=template.num_instruments,
                                                         p=weights / weights.sum())
    params = ground_truth_parameters(template.instruments, groups, template.alpha, template.beta, template.sigma)

    written = []
    for position, split in enumerate(SPLITS):
        panel, _ = simulate_panel(params, s[f"{split}_quantities"], derive_seed(config.seed, 1, position),
                                  groups=groups, coverage=s["coverage"], quantity_prefix=f"{split}_q")
        path = config.output_dir / f"{split}.csv"
        written += [path, write_panel_csv(panel, path)]

    params.save(config.output_dir / "truth_params.json")
    write_csv(pd.DataFrame({"instrument_id": params.instruments, "group": groups}),
              config.output_dir / "instrument_groups.csv")
    return written + [config.output_dir / "truth_params.json", config.output_dir / "instrument_groups.csv"]


def _run_simulate(config: RunConfig) -> List[Path]:
    s = config.section
    sweep = run_sweep(config.synthetic_config(), s["kinds"], s["n_jobs"])
    out = [config.output_dir / "sweep.csv", config.output_dir / "sweep_details.csv"]
    write_csv(sweep.to_frame(), out[0])
    write_csv(sweep.to_frame(full=True), out[1])
    if s["html"]:
        out.append(config.output_dir / "simulate.html")
        render_html_report(out[-1], "Synthetic estimator sweep",
                           [ReportSection("RMSE by instrument count", sweep.to_frame(full=True),
                                          note="RMSE pooled over all realizations, with its delta-method "
                                               "standard error.")],
                           config.to_dict(), "simulate")
    return out


def _training_panels(config: RunConfig):
    s = config.section
    panel = parse_forecast_csv(config.path("train"), config.path("actuals"))
    if s["valid"] is not None:
        return panel, parse_forecast_csv(config.path("valid"), config.path("valid_actuals"))
    if s["valid_quantities"] is None:
        return panel, None

    held_out = set(parse_quantity_list(config.path("valid_quantities")))
    panel_valid = panel.select_quantities(held_out)
    panel_train = panel.select_quantities([q for q in panel.quantities if q not in held_out])
    if panel_valid.n_entries == 0 or panel_train.n_entries == 0:
        raise DataError(f"Splitting by {config.path('valid_quantities')} leaves an empty training or validation "
                        f"panel.")
    logger.info(f"Held out {panel_valid.n_quantities} quantities for validation.")
    return panel_train, panel_valid


def _run_fit(config: RunConfig) -> List[Path]:
    s = config.section
    panel_train, panel_valid = _training_panels(config)
    hyper = config.hyper_params()
    if s["lambda_grid"] and panel_valid is not None:
        params, report = fit_lambda_grid(panel_train, panel_valid, s["num_groups"], hyper, s["lambda_grid"],
                                         s["pin_reference_group"], s["n_jobs"])
    else:
        if s["lambda_grid"]:
            logger.warning("lambda_grid needs a validation panel; fitting with hyper.prior_strength only.")
        params, report = fit(panel_train, panel_valid, s["num_groups"], hyper, s["pin_reference_group"],
                             s["n_jobs"])

    out = [config.output_dir / "params.json", config.output_dir / "trace.csv",
           config.output_dir / "training_report.json"]
    params.save(out[0])
    write_csv(report.trace_frame(), out[1])
    write_json(report.to_dict(), out[2])
    return out


def _run_infer(config: RunConfig) -> List[Path]:
    s = config.section
    params = LvbcParameters.load(config.path("params"))
    panel = parse_forecast_csv(config.path("test"))
    budget = config.chain_budget()
    chains = gibbs_run(panel, params, s["lambda0"], budget.num_samples, budget.burn_in, budget.seed,
                       budget.credible_level, s["z_update"])
    path = config.output_dir / "estimates.csv"
    write_estimates_csv(chains, path)
    return [path]


def _pipeline_predictions(config: RunConfig):
    p = config.section["pipeline"]
    panels = {split: parse_forecast_csv(config.resolve(p[split])) for split in SPLITS}
    panels["test"].require_actuals("test panel")
    hyper = config.hyper_params(p["hyper"])
    budget = ChainBudget(p["num_samples"], p["burn_in"], config.seed)
    test_inputs = panels["test"].without_actuals()

    predictions = {}
    for model in default_models(p["num_groups"], hyper, p["lambda0"], budget, p["lambda_grid"]):
        if model.name not in p["models"]:
            continue
        logger.info(f"Fitting {model.name}.")
        predictions[model.name] = model.fit(panels["train"], panels["valid"]).predict(test_inputs)
    return predictions, panels["test"].actuals


def _aligned_actuals(model: str, predictions: Mapping[str, float], actuals: Mapping[str, float]) -> Dict[str, float]:
    missing = [q for q in predictions if q not in actuals]
    if missing:
        raise DataError(f"{model}: no actuals for {len(missing)} predicted quantities, e.g. {missing[:5]}.")
    unpredicted = len(actuals) - len(predictions)
    if unpredicted:
        logger.warning(f"{model}: {unpredicted} quantities with actuals have no prediction and are not scored.")
    return {q: actuals[q] for q in predictions}


def _interval_frame(reports: Mapping[str, EvalReport]) -> pd.DataFrame:
    rows = [{"model": model, "metric": metric, "mode": mode, "point": v.point, "ci_low": v.ci_low,
             "ci_high": v.ci_high} for model, report in reports.items() for (metric, mode), v in report.entries.items()]
    return pd.DataFrame(rows, columns=["model", "metric", "mode", "point", "ci_low", "ci_high"])


def _run_eval(config: RunConfig) -> List[Path]:
    s = config.section
    out = []
    if s["pipeline"] is not None:
        predictions, actuals = _pipeline_predictions(config)
        for model, values in predictions.items():
            out.append(config.output_dir / f"predictions_{model}.csv")
            write_point_estimates_csv(values, out[-1])
    else:
        actuals = parse_actuals_csv(config.path("actuals"))
        predictions = {model: parse_estimates_csv(config.resolve(path)) for model, path in s["predictions"].items()}
    groups = parse_groups_csv(config.path("groups")) if s["groups"] is not None else None

    # every model is resampled with the same seed, so the intervals are paired
    reports = {model: bootstrap_report(values, _aligned_actuals(model, values, actuals), groups, s["n_bootstrap"],
                                       s["ci_level"], config.seed)
               for model, values in predictions.items()}
    table = pd.DataFrame([report.to_row(model) for model, report in reports.items()], columns=REPORT_COLUMNS)

    out += [config.output_dir / "report.json", config.output_dir / "report.csv"]
    write_json({model: report.to_dict() for model, report in reports.items()}, out[-2])
    write_csv(table, out[-1])
    if s["html"]:
        out.append(config.output_dir / "eval.html")
        level = f"{100 * s['ci_level']:g}%"
        render_html_report(out[-1], "Consensus model evaluation",
                           [ReportSection("Point metrics", table),
                            ReportSection("Bootstrap intervals", _interval_frame(reports),
                                          note=f"{level} percentile intervals from {s['n_bootstrap']} resamples.")],
                           config.to_dict(), "eval")
    return out


RUNNERS = {
    "generate": _run_generate,
    "simulate": _run_simulate,
    "fit": _run_fit,
    "infer": _run_infer,
    "eval": _run_eval,
}


def run_subcommand(config: RunConfig) -> List[Path]:
    """Write the configuration echo, then run ``config.subcommand``. Returns the artifacts written after the echo."""
    config.write_echo()
    written = RUNNERS[config.subcommand](config)
    for path in written:
        logger.info(f"Wrote {path}.")
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = vars(_build_parser().parse_args(argv))
    subcommand = args.pop("subcommand")
    config_path = args.pop("config", None)
    configure_logging(args.get("verbosity", 0))
    try:
        if "predictions" in args:
            args["predictions"] = _prediction_pairs(args["predictions"])
        config = RunConfig.from_file(config_path, subcommand, args)
        configure_logging(config.verbosity)
        run_subcommand(config)
    except ConcordError as e:
        print(format_error(e), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.debug("Unexpected failure.", exc_info=True)
        print(format_error(e), file=sys.stderr)
        return 1
    return 0
