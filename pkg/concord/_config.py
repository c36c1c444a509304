"""Run configuration: one JSON document per run, with command-line overrides and a resolved echo.

A document has the global keys ``seed``, ``output_dir`` and ``verbosity`` plus one section per subcommand. Unknown keys
anywhere are rejected. Relative paths resolve against the directory of the document (or the working directory when
there is no document). The single ``seed`` feeds every random component of the run.
"""
import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from ._errors import ConfigError, ConcordError
from ._estimators import DEFAULT_LAMBDA0, EstimatorKind
from ._gibbs import Z_UPDATES, ChainBudget
from ._lvbc import DEFAULT_LAMBDA_GRID, HyperParams, LvbcParameters, ground_truth_parameters
from ._simulation import SyntheticConfig
from ._utils import (check_exists, check_non_negative_int, check_positive, check_probability, check_sanity_int,
                     check_seed)

logger = logging.getLogger(__name__)

GLOBAL_DEFAULTS = {"seed": 0, "output_dir": ".", "verbosity": 0}

# seed is global, so it is not part of the hyper block
HYPER_DEFAULTS = {k: v for k, v in HyperParams().to_dict().items() if k != "seed"}

GROUP_DEFAULTS = {"alpha": 1.0, "beta": 0.0, "sigma": 1.0, "weight": 1.0}

SECTION_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "generate": {
        "num_instruments": 50,
        "train_quantities": 400,
        "valid_quantities": 100,
        "test_quantities": 200,
        "coverage": 1.0,
        "groups": [{"alpha": 1.0, "beta": 0.0, "sigma": 0.5, "weight": 0.5},
                   {"alpha": 0.7, "beta": -0.3, "sigma": 0.5, "weight": 0.5}],
    },
    "simulate": {
        **{k: v for k, v in SyntheticConfig().to_dict().items() if k != "seed"},
        "kinds": [k.value for k in EstimatorKind],
        "n_jobs": 1,
        "html": False,
    },
    "fit": {
        "train": None,
        "actuals": None,
        "valid": None,
        "valid_actuals": None,
        "valid_quantities": None,
        "num_groups": 2,
        "pin_reference_group": True,
        "lambda_grid": None,
        "hyper": HYPER_DEFAULTS,
        "n_jobs": 1,
    },
    "infer": {
        "params": None,
        "test": None,
        "lambda0": DEFAULT_LAMBDA0,
        "num_samples": 1000,
        "burn_in": 100,
        "credible_level": 0.95,
        "z_update": "prior",
    },
    "eval": {
        "predictions": None,
        "actuals": None,
        "groups": None,
        "pipeline": None,
        "n_bootstrap": 1000,
        "ci_level": 0.95,
        "html": False,
    },
}

PIPELINE_DEFAULTS = {
    "train": None,
    "valid": None,
    "test": None,
    "num_groups": 2,
    "models": ["NE", "WE", "RE", "BRE", "LVBC"],
    "lambda_grid": list(DEFAULT_LAMBDA_GRID),
    "lambda0": DEFAULT_LAMBDA0,
    "num_samples": 1000,
    "burn_in": 100,
    "hyper": HYPER_DEFAULTS,
}

#: Keys holding file paths, per section.
PATH_KEYS = {
    "fit": ("train", "actuals", "valid", "valid_actuals", "valid_quantities"),
    "infer": ("params", "test"),
    "eval": ("actuals", "groups"),
}
REQUIRED_PATHS = {"fit": ("train",), "infer": ("params", "test")}

MODEL_NAMES = ("NE", "WE", "RE", "BRE", "LVBC")


def _merge(defaults: Mapping, given: Mapping, where: str) -> dict:
    """Overlay ``given`` on ``defaults``; unknown keys raise ``ConfigError``."""
    if not isinstance(given, Mapping):
        raise ConfigError(f"{where} must be a JSON object; received {type(given).__name__}.")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"Unknown key(s) {unknown} in {where}; allowed: {sorted(defaults)}.")
    out = copy.deepcopy(dict(defaults))
    for key, value in given.items():
        if key == "hyper" and value is not None:
            out[key] = _merge(HYPER_DEFAULTS, value, f"{where}.hyper")
        elif key == "pipeline" and value is not None:
            out[key] = _merge(PIPELINE_DEFAULTS, value, f"{where}.pipeline")
        elif key == "groups" and where == "generate":
            if not isinstance(value, list) or not value:
                raise ConfigError("generate.groups must be a non-empty list of group objects.")
            out[key] = [_merge(GROUP_DEFAULTS, g, f"generate.groups[{i}]") for i, g in enumerate(value)]
        else:
            out[key] = value
    return out


def _check_grid(name: str, grid, optional: bool = False):
    if grid is None and optional:
        return
    if not isinstance(grid, list) or not grid:
        raise ConfigError(f"{name} must be a non-empty list of positive numbers.")
    for value in grid:
        check_positive(name, value)


class RunConfig:
    """Resolved configuration of one subcommand run.

    Parameters
    ----------
    subcommand : str
        One of ``generate``, ``simulate``, ``fit``, ``infer``, ``eval``.
    document : dict, optional
        Parsed JSON document. Sections of other subcommands are checked for unknown keys and otherwise ignored.
    base_dir : str or Path, optional
        Directory that relative paths resolve against. Defaults to the working directory.
    overrides : dict, optional
        Values from command-line flags; ``None`` values are ignored. Global keys (``seed``, ``output_dir``,
        ``verbosity``) may be mixed in.
    """
    def __init__(self,
                 subcommand: str,
                 document: Optional[Mapping] = None,
                 base_dir: Optional[Union[str, Path]] = None,
                 overrides: Optional[Mapping] = None):
        if subcommand not in SECTION_DEFAULTS:
            raise ConfigError(f"Unknown subcommand {subcommand!r}.")
        self.subcommand = subcommand
        self.base_dir = Path.cwd() if base_dir is None else Path(base_dir)
        document = {} if document is None else document

        allowed = dict(GLOBAL_DEFAULTS, **{name: {} for name in SECTION_DEFAULTS})
        top = _merge(allowed, document, "the configuration document")
        for name in SECTION_DEFAULTS:
            _merge(SECTION_DEFAULTS[name], top[name], name)

        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        global_overrides = {k: overrides.pop(k) for k in list(overrides) if k in GLOBAL_DEFAULTS}
        section = _merge(SECTION_DEFAULTS[subcommand], top[subcommand], subcommand)
        section = _merge(SECTION_DEFAULTS[subcommand], dict(section, **overrides), f"{subcommand} (command line)")

        self.seed = global_overrides.get("seed", top["seed"])
        self.verbosity = global_overrides.get("verbosity", top["verbosity"])
        output_dir = global_overrides.get("output_dir", top["output_dir"])
        if not isinstance(output_dir, (str, Path)):
            raise ConfigError(f"output_dir must be a path; received {output_dir!r}.")
        self.output_dir = self.resolve(output_dir)
        self.section = section
        self._validate()

    @classmethod
    def from_file(cls, path: Optional[Union[str, Path]], subcommand: str,
                  overrides: Optional[Mapping] = None) -> "RunConfig":
        """Load a JSON document (or use defaults when ``path`` is None) and resolve it for ``subcommand``."""
        if path is None:
            return cls(subcommand, None, None, overrides)
        check_exists(path, "configuration file")
        with open(path, encoding="utf-8") as f:
            try:
                document = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: not valid JSON ({e.msg}, line {e.lineno}).") from e
        return cls(subcommand, document, Path(path).absolute().parent, overrides)

    def __getitem__(self, key: str):
        return self.section[key]

    def resolve(self, path: Optional[Union[str, Path]]) -> Optional[Path]:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else (self.base_dir / p)

    def path(self, key: str, section: Optional[Mapping] = None) -> Optional[Path]:
        return self.resolve((self.section if section is None else section)[key])

    def _fail(self, e: Exception):
        raise ConfigError(f"Invalid {self.subcommand} configuration: {e}") from e

    def _validate(self):
        """Fail fast: build every domain object the run needs and check every referenced path."""
        try:
            for key in REQUIRED_PATHS.get(self.subcommand, ()):
                if self.section[key] is None:
                    raise ConfigError(f"{self.subcommand}.{key} is required.")
            for key in PATH_KEYS.get(self.subcommand, ()):
                if self.section[key] is not None:
                    check_exists(self.path(key), f"{self.subcommand}.{key}")
            check_seed("seed", self.seed)
            check_non_negative_int("verbosity", self.verbosity)
            if self.subcommand == "generate":
                self.ground_truth()
            elif self.subcommand == "simulate":
                self.synthetic_config()
                [EstimatorKind.parse(k) for k in self.section["kinds"]]
                check_sanity_int("n_jobs", self.section["n_jobs"])
            elif self.subcommand == "fit":
                self.hyper_params()
                check_sanity_int("num_groups", self.section["num_groups"])
                check_sanity_int("n_jobs", self.section["n_jobs"])
                _check_grid("lambda_grid", self.section["lambda_grid"], optional=True)
            elif self.subcommand == "infer":
                self.chain_budget()
                if self.section["z_update"] not in Z_UPDATES:
                    raise ConfigError(f"z_update must be one of {Z_UPDATES}.")
            elif self.subcommand == "eval":
                self._validate_eval()
        except (ConcordError, TypeError) as e:
            if isinstance(e, ConfigError):
                raise
            self._fail(e)

    def _validate_eval(self):
        section = self.section
        predictions, pipeline = section["predictions"], section["pipeline"]
        if (predictions is None) == (pipeline is None):
            raise ConfigError("eval needs exactly one of 'predictions' (model -> file) or 'pipeline'.")
        if predictions is not None:
            if not isinstance(predictions, Mapping) or not predictions:
                raise ConfigError("eval.predictions must map model names to prediction files.")
            for model, path in predictions.items():
                check_exists(self.resolve(path), f"eval.predictions.{model}")
            if section["actuals"] is None:
                raise ConfigError("eval.actuals is required with eval.predictions.")
        else:
            for key in ("train", "valid", "test"):
                if pipeline[key] is None:
                    raise ConfigError(f"eval.pipeline.{key} is required.")
                check_exists(self.resolve(pipeline[key]), f"eval.pipeline.{key}")
            unknown = [m for m in pipeline["models"] if m not in MODEL_NAMES]
            if unknown or not pipeline["models"]:
                raise ConfigError(f"eval.pipeline.models must be a non-empty subset of {list(MODEL_NAMES)}.")
            self.hyper_params(pipeline["hyper"])
            check_sanity_int("num_groups", pipeline["num_groups"])
            check_positive("lambda0", pipeline["lambda0"])
            _check_grid("lambda_grid", pipeline["lambda_grid"], optional=True)
            ChainBudget(pipeline["num_samples"], pipeline["burn_in"], self.seed)
        check_sanity_int("n_bootstrap", section["n_bootstrap"])
        if section["n_bootstrap"] < 100:
            raise ConfigError(f"eval.n_bootstrap must be at least 100; received {section['n_bootstrap']}.")
        check_probability("ci_level", section["ci_level"], open_interval=True)

    def ground_truth(self) -> LvbcParameters:
        """Generator parameters of the ``generate`` section, with every instrument provisionally in group 0."""
        s = self.section
        check_sanity_int("num_instruments", s["num_instruments"])
        for key in ("train_quantities", "valid_quantities", "test_quantities"):
            check_sanity_int(key, s[key])
        check_probability("coverage", s["coverage"])
        check_positive("coverage", s["coverage"])
        for group in s["groups"]:
            check_positive("weight", group["weight"])
        instruments = [f"a{j}" for j in range(s["num_instruments"])]
        return ground_truth_parameters(instruments, [0] * len(instruments),
                                       [g["alpha"] for g in s["groups"]],
                                       [g["beta"] for g in s["groups"]],
                                       [g["sigma"] for g in s["groups"]])

    def synthetic_config(self) -> SyntheticConfig:
        values = {k: v for k, v in self.section.items() if k not in ("kinds", "n_jobs", "html")}
        return SyntheticConfig(seed=self.seed, **values)

    def hyper_params(self, block: Optional[Mapping] = None) -> HyperParams:
        block = self.section["hyper"] if block is None else block
        return HyperParams(seed=self.seed, **block)

    def chain_budget(self) -> ChainBudget:
        s = self.section
        return ChainBudget(s["num_samples"], s["burn_in"], self.seed, s["credible_level"])

    def to_dict(self) -> dict:
        """The resolved configuration, with the seed and every default spelled out."""
        section = copy.deepcopy(self.section)
        for key in PATH_KEYS.get(self.subcommand, ()):
            if section[key] is not None:
                section[key] = str(self.path(key))
        if self.subcommand == "eval":
            if section["predictions"] is not None:
                section["predictions"] = {m: str(self.resolve(p)) for m, p in section["predictions"].items()}
            if section["pipeline"] is not None:
                for key in ("train", "valid", "test"):
                    section["pipeline"][key] = str(self.resolve(section["pipeline"][key]))
        return {"subcommand": self.subcommand,
                "seed": self.seed,
                "output_dir": str(self.output_dir),
                "verbosity": self.verbosity,
                self.subcommand: section}

    def write_echo(self) -> Path:
        """Write ``<output_dir>/<subcommand>.config.json`` and return its path."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / f"{self.subcommand}.config.json"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")
        logger.info(f"Wrote resolved configuration to {path}.")
        return path
