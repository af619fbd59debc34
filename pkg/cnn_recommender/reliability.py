"""
Reliability of a score against measured training rates
=======================================================

A score is useful when it orders tasks (or models) the same way a trained
network does.  Two checks are supported, both on measurements supplied by
the user:

* complexity scores of several datasets against the training rate one fixed
  model reaches on each of them;
* ability scores of several models against the training rate each reaches
  on one fixed dataset.

In both cases a higher score should come with a higher rate, so the score is
considered reliable when the rank correlation is positive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.stats import pearsonr, spearmanr

from .errors import InputError, SpecValidationError
from .reports import read_jsonl

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 3


class Observation(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    score: float
    rate: float = Field(ge=0.0, le=1.0)


@dataclass(frozen=True)
class ReliabilityReport:
    observations: Tuple[Observation, ...]
    spearman: float
    spearman_p: float
    pearson: float
    pearson_p: float

    @property
    def positive(self) -> bool:
        return self.spearman > 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": len(self.observations),
            "spearman": round(self.spearman, 6),
            "spearman_p": round(self.spearman_p, 6),
            "pearson": round(self.pearson, 6),
            "pearson_p": round(self.pearson_p, 6),
            "positive": self.positive,
            "observations": [o.model_dump(mode="json") for o in self.observations],
        }


def score_reliability(observations: Sequence[Observation]) -> ReliabilityReport:
    """Rank and linear correlation between score and measured rate.

    Raises
    ------
    InputError
        With fewer than three observations or when scores or rates are all
        equal (the correlation is then undefined).
    """
    obs = tuple(observations)
    if len(obs) < MIN_OBSERVATIONS:
        raise InputError(f"reliability needs at least {MIN_OBSERVATIONS} observations, got {len(obs)}")
    scores = np.array([o.score for o in obs])
    rates = np.array([o.rate for o in obs])
    if np.ptp(scores) == 0:
        raise InputError("all scores are equal; correlation is undefined")
    if np.ptp(rates) == 0:
        raise InputError("all rates are equal; correlation is undefined")
    rho, rho_p = spearmanr(scores, rates)
    r, r_p = pearsonr(scores, rates)
    logger.info("reliability over %d observations: spearman %.4f, pearson %.4f", len(obs), rho, r)
    return ReliabilityReport(obs, float(rho), float(rho_p), float(r), float(r_p))


def load_observations(path: str) -> List[Observation]:
    """Read ``{name, score, rate}`` JSON lines."""
    out = []
    for lineno, record in enumerate(read_jsonl(path), start=1):
        try:
            out.append(Observation.model_validate(record))
        except ValidationError as err:
            first = err.errors()[0]
            loc = ".".join(str(p) for p in first.get("loc", ()))
            raise SpecValidationError(first.get("msg", str(err)), field_path=f"line {lineno}: {loc}") from err
    return out
