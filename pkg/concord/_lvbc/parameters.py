"""Parameters and hyperparameters of the latent-variable consensus model.

Every instrument belongs to one of ``K`` latent groups. Group ``k`` maps a true change ``X`` to readings with mean
``alpha[k, xi] * X + beta[k, xi]`` and standard deviation ``sigma[k]``, where ``xi = 1{X > 0}`` selects the sign
branch. Group 0 is normally pinned to the identity calibration.
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.special import softmax

from .._errors import DataError, InvalidInputError
from .._estimators import DEFAULT_LAMBDA0
from .._utils import (check_positive, check_real, check_sanity_int, check_seed, check_type,
                      check_non_negative_int)

FORMAT_VERSION = 1

VALIDATION_METHODS = ("gibbs", "posterior_mean")


@dataclass(frozen=True)
class HyperParams:
    """Hyperparameters of an LVBC fit.

    Attributes
    ----------
    prior_alpha, prior_beta, prior_sigma : float, default=1.0, 0.0, 2.0
        Centres of the Normal priors on the slopes, offsets and noise scales.
    prior_strength : float, default=1e3
        Weight of the prior penalty in the objective.
    learning_rate : float, default=1e-4
    minibatch_size : int, default=5000
        Entries per optimizer step.
    max_epochs : int, default=1000
    patience : int, default=10
        Validation checks without improvement before a restart stops.
    num_restarts : int, default=10
    seed : int, default=0
    validation_interval : int, default=1
        Epochs between validation checks.
    validation_method : {"gibbs", "posterior_mean"}, default="gibbs"
        How validation estimates are produced: a short Gibbs chain, or the closed-form posterior mean at the most
        likely group of every instrument.
    validation_samples, validation_burn_in : int, default=200, 50
        Chain budget of the Gibbs validation.
    lambda0 : float, default=1e-4
        Prior precision of the quantities during validation inference.
    """
    prior_alpha: float = 1.0
    prior_beta: float = 0.0
    prior_sigma: float = 2.0
    prior_strength: float = 1e3
    learning_rate: float = 1e-4
    minibatch_size: int = 5000
    max_epochs: int = 1000
    patience: int = 10
    num_restarts: int = 10
    seed: int = 0
    validation_interval: int = 1
    validation_method: str = "gibbs"
    validation_samples: int = 200
    validation_burn_in: int = 50
    lambda0: float = DEFAULT_LAMBDA0

    def __post_init__(self):
        check_real("prior_alpha", self.prior_alpha)
        check_real("prior_beta", self.prior_beta)
        check_positive("prior_sigma", self.prior_sigma)
        # zero switches the prior off; the gradient checks rely on that
        check_real("prior_strength", self.prior_strength)
        if self.prior_strength < 0:
            raise InvalidInputError(f"prior_strength must be non-negative. Received {self.prior_strength}.")
        check_positive("learning_rate", self.learning_rate)
        check_sanity_int("minibatch_size", self.minibatch_size)
        check_sanity_int("max_epochs", self.max_epochs)
        check_sanity_int("patience", self.patience)
        check_sanity_int("num_restarts", self.num_restarts)
        check_seed("seed", self.seed)
        check_sanity_int("validation_interval", self.validation_interval)
        if self.validation_method not in VALIDATION_METHODS:
            raise InvalidInputError(f"validation_method must be one of {VALIDATION_METHODS}; "
                                    f"received {self.validation_method!r}.")
        check_sanity_int("validation_samples", self.validation_samples)
        check_non_negative_int("validation_burn_in", self.validation_burn_in)
        if self.validation_burn_in >= self.validation_samples:
            raise InvalidInputError("validation_burn_in must be smaller than validation_samples.")
        check_positive("lambda0", self.lambda0)

    def replace(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(eq=False)
class ParameterGradient:
    """Partial derivatives of the objective, laid out like :class:`LvbcParameters`."""
    alpha: np.ndarray
    beta: np.ndarray
    log_sigma: np.ndarray
    logits: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha.ravel(), self.beta.ravel(), self.log_sigma.ravel(), self.logits.ravel()])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


@dataclass(eq=False)
class LvbcParameters:
    """Group calibrations and per-instrument group logits.

    Attributes
    ----------
    alpha, beta : ndarray of shape (K, 2)
        Slope and offset of every group; column ``xi`` holds the sign branch ``xi``.
    log_sigma : ndarray of shape (K,)
        Log noise scale of every group.
    logits : ndarray of shape (num_instruments, K)
        Group logits of every instrument.
    instruments : list of str
        Instrument id of every logits row.
    pinned : bool
        Whether group 0 is fixed at ``alpha = 1, beta = 0``.
    """
    alpha: np.ndarray
    beta: np.ndarray
    log_sigma: np.ndarray
    logits: np.ndarray
    instruments: list = field(default_factory=list)
    pinned: bool = True

    def __post_init__(self):
        self.alpha = np.array(self.alpha, dtype=float, ndmin=2)
        self.beta = np.array(self.beta, dtype=float, ndmin=2)
        self.log_sigma = np.array(self.log_sigma, dtype=float, ndmin=1)
        self.logits = np.array(self.logits, dtype=float, ndmin=2)
        K = self.log_sigma.size
        if K < 1:
            raise InvalidInputError("At least one group is needed.")
        if self.alpha.shape != (K, 2) or self.beta.shape != (K, 2):
            raise InvalidInputError(f"alpha and beta must have shape ({K}, 2); received {self.alpha.shape} and "
                                    f"{self.beta.shape}.")
        if self.logits.ndim != 2 or self.logits.shape[1] != K:
            raise InvalidInputError(f"logits must have shape (num_instruments, {K}); received {self.logits.shape}.")
        self.instruments = [str(a) for a in self.instruments]
        if not self.instruments:
            self.instruments = [f"a{j}" for j in range(self.logits.shape[0])]
        if len(self.instruments) != self.logits.shape[0]:
            raise InvalidInputError(f"{len(self.instruments)} instrument ids for {self.logits.shape[0]} logits rows.")
        if len(set(self.instruments)) != len(self.instruments):
            raise InvalidInputError("Instrument ids must be unique.")
        check_type("pinned", self.pinned, bool)
        if self.pinned:
            self.apply_pin()

    def __repr__(self):
        return f"<LvbcParameters: K={self.num_groups}, {self.num_instruments} instruments, pinned={self.pinned}>"

    @property
    def num_groups(self) -> int:
        return int(self.log_sigma.size)

    @property
    def num_instruments(self) -> int:
        return int(self.logits.shape[0])

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    @property
    def first_free_group(self) -> int:
        return 1 if self.pinned else 0

    def apply_pin(self):
        self.alpha[0] = 1.0
        self.beta[0] = 0.0

    def responsibilities(self) -> np.ndarray:
        """Softmax of the logits; row ``j`` is the group distribution of instrument ``j``."""
        return softmax(self.logits, axis=1)

    def group_assignments(self) -> np.ndarray:
        """Most likely group of every instrument."""
        return np.argmax(self.logits, axis=1)

    def copy(self) -> "LvbcParameters":
        return LvbcParameters(self.alpha.copy(), self.beta.copy(), self.log_sigma.copy(), self.logits.copy(),
                              list(self.instruments), self.pinned)

    @classmethod
    def initialize(cls,
                   instruments: Sequence[str],
                   num_groups: int,
                   hyper: HyperParams,
                   rng: np.random.Generator,
                   pinned: bool = True) -> "LvbcParameters":
        """Random starting point near the prior.

        Free slopes and offsets are Normal(prior, 0.1), every log noise scale is ``ln(prior_sigma)`` and the logits
        are Normal(0, 0.01).
        """
        check_sanity_int("num_groups", num_groups)
        check_type("hyper", hyper, HyperParams)
        K, A = int(num_groups), len(instruments)
        alpha = rng.normal(hyper.prior_alpha, 0.1, size=(K, 2))
        beta = rng.normal(hyper.prior_beta, 0.1, size=(K, 2))
        log_sigma = np.full(K, np.log(hyper.prior_sigma))
        logits = rng.normal(0.0, 0.01, size=(A, K))
        return cls(alpha, beta, log_sigma, logits, list(instruments), pinned)

    @classmethod
    def identity(cls, instruments: Sequence[str], sigma: float = 1.0) -> "LvbcParameters":
        """Single pinned group with noise scale ``sigma``: every instrument is trusted as is."""
        check_positive("sigma", sigma)
        return cls(np.ones((1, 2)), np.zeros((1, 2)), np.log([sigma]), np.zeros((len(instruments), 1)),
                   list(instruments), True)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "lvbc_parameters",
            "num_groups": self.num_groups,
            "pinned_group": 0 if self.pinned else None,
            "instruments": list(self.instruments),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "log_sigma": self.log_sigma.tolist(),
            "logits": self.logits.tolist(),
        }

    @classmethod
    def from_dict(cls, document: dict) -> "LvbcParameters":
        check_type("document", document, dict)
        version = document.get("format_version")
        if version != FORMAT_VERSION:
            raise DataError(f"Unsupported parameter snapshot format_version {version!r}; expected {FORMAT_VERSION}.")
        try:
            params = cls(alpha=document["alpha"],
                         beta=document["beta"],
                         log_sigma=document["log_sigma"],
                         logits=document["logits"],
                         instruments=document["instruments"],
                         pinned=document["pinned_group"] is not None)
        except KeyError as e:
            raise DataError(f"Parameter snapshot is missing the field {e.args[0]!r}.") from e
        except InvalidInputError as e:
            raise DataError(f"Invalid parameter snapshot: {e}") from e
        if document.get("pinned_group") not in (0, None):
            raise DataError(f"pinned_group must be 0 or null; received {document['pinned_group']!r}.")
        if document.get("num_groups", params.num_groups) != params.num_groups:
            raise DataError("num_groups does not match the shape of the parameter arrays.")
        return params

    def save(self, path: Union[str, Path]):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "LvbcParameters":
        with open(path, encoding="utf-8") as f:
            try:
                document = json.load(f)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: not valid JSON ({e.msg}, line {e.lineno}).") from e
        return cls.from_dict(document)
