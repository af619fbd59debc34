"""
Complexity score of a classification task
=========================================

A fixed, non-learned centroid classifier is run in descriptor space and every
training sample gets a complexity score

    C = D(s, c_own) / (D(s, c_own) + max_{i != own} D(s, c_i)),

with similarity ``D(s, c) = exp(-||s - c||)``.  The task score ``C_all`` is
the mean of the per-sample scores.  Under this convention a *higher* score
means an *easier* task: ``C > 0.5`` exactly when the nearest centroid is the
sample's own class.

Treating every sample as a two-class decision between its own class and the
closest rival rests on the observation that, when the pairwise confusion
regions do not overlap, the error rate of an n-class task grows in
proportion to ``n - 1``.  :func:`simulate_multiclass_error` checks that
claim by Monte-Carlo on equidistant Gaussian classes.

Sums that feed centroids and averages are exactly rounded
(:func:`math.fsum`), so results do not depend on sample order or on how the
work was split between threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .config import MIN_TRIALS
from .descriptor import DESCRIPTOR_VARIANT, FeatureVector, extract_features
from .errors import DatasetError, SimulationError
from .ingest import LabeledDataset

logger = logging.getLogger(__name__)

VectorLike = Union[FeatureVector, np.ndarray, Sequence[float]]

_CHUNK = 1024


def _as_array(vector: VectorLike) -> np.ndarray:
    if isinstance(vector, FeatureVector):
        return vector.values
    return np.asarray(vector, dtype=np.float64)


def _exact_mean(rows: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(col) for col in rows.T]) / rows.shape[0]


@dataclass(frozen=True, eq=False)
class CentroidModel:
    """One mean vector per class."""

    centroids: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.centroids, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise DatasetError("a centroid model needs at least two class centroids")
        if not np.all(np.isfinite(arr)):
            raise DatasetError("centroids must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "centroids", arr)

    @property
    def class_count(self) -> int:
        return int(self.centroids.shape[0])

    def distances(self, vectors: np.ndarray) -> np.ndarray:
        """Euclidean distances from each row of ``vectors`` to every centroid."""
        vectors = np.atleast_2d(vectors)
        diff = vectors[:, None, :] - self.centroids[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))


def fit_centroids(per_class: Sequence[Sequence[VectorLike]]) -> CentroidModel:
    """Arithmetic mean of every class's feature vectors.

    Raises
    ------
    DatasetError
        If a class has no vectors.
    """
    centroids = []
    for cls, vectors in enumerate(per_class):
        if len(vectors) == 0:
            raise DatasetError(f"class {cls} has no feature vectors")
        centroids.append(_exact_mean(np.stack([_as_array(v) for v in vectors])))
    return CentroidModel(np.stack(centroids))


def fit_centroids_from_matrix(features: np.ndarray, labels: Sequence[int], class_count: int) -> CentroidModel:
    labels = np.asarray(labels)
    return fit_centroids([features[labels == cls] for cls in range(class_count)])


def similarity(v: VectorLike, c: VectorLike) -> float:
    """``exp(-||v - c||)``, in ``(0, 1]``."""
    diff = _as_array(v) - _as_array(c)
    return math.exp(-math.sqrt(float(np.dot(diff, diff))))


def _scores_from_distances(own: np.ndarray, rival: np.ndarray) -> np.ndarray:
    # D_own / (D_own + D_rival) == 1 / (1 + exp(d_own - d_rival))
    return expit(rival - own)


def _own_and_rival(dist: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = np.arange(dist.shape[0])
    own = dist[rows, labels]
    masked = dist.copy()
    masked[rows, labels] = np.inf
    rival = np.argmin(masked, axis=1)  # lowest class id on ties
    return own, masked[rows, rival], rival


def sample_complexity(v: VectorLike, own_class: int, model: CentroidModel) -> Tuple[float, int]:
    """Complexity score of one sample and its closest rival class."""
    dist = model.distances(_as_array(v)[None, :])
    own, rival_dist, rival = _own_and_rival(dist, np.array([own_class]))
    return float(_scores_from_distances(own, rival_dist)[0]), int(rival[0])


@dataclass(frozen=True)
class SampleScore:
    sample_id: int
    class_id: int
    c: float
    best_rival_class: int
    centroid_correct: bool


@dataclass(frozen=True)
class ComplexityReport:
    """Per-sample and task-level complexity scores.

    Higher ``c_all`` means an easier task for the centroid classifier.
    """

    per_sample: Tuple[SampleScore, ...]
    c_all: float
    per_class_mean_c: Tuple[float, ...]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def sample_count(self) -> int:
        return len(self.per_sample)

    @property
    def centroid_accuracy(self) -> float:
        """Training accuracy of the nearest-centroid classifier."""
        return sum(s.centroid_correct for s in self.per_sample) / len(self.per_sample)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset": self.metadata.get("dataset", ""),
            "l": self.sample_count,
            "class_count": len(self.per_class_mean_c),
            "c_all": round(self.c_all, 6),
            "per_class_mean_c": [round(v, 6) for v in self.per_class_mean_c],
            "centroid_accuracy": round(self.centroid_accuracy, 6),
            "per_sample": [
                {"id": s.sample_id, "class": s.class_id, "c": s.c, "rival": s.best_rival_class, "correct": s.centroid_correct}
                for s in self.per_sample
            ],
            "descriptor_variant": self.metadata.get("descriptor_variant", DESCRIPTOR_VARIANT),
            "metadata": {k: v for k, v in self.metadata.items() if k not in {"dataset", "descriptor_variant"}},
        }


def score_features(
    features: np.ndarray,
    labels: Sequence[int],
    class_count: int,
    model: Optional[CentroidModel] = None,
    sample_ids: Optional[Sequence[int]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> ComplexityReport:
    """Score precomputed feature vectors.

    The centroid model is fitted on the same vectors unless ``model`` is given
    (held fixed, for example to score several subsets against one model).
    """
    features = np.asarray(features, dtype=np.float64)
    labels_arr = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels_arr.size:
        raise DatasetError("features must be a (samples, dims) matrix with one label per row")
    if class_count < 2:
        raise DatasetError(f"class_count must be >= 2, got {class_count}")
    if model is None:
        model = fit_centroids_from_matrix(features, labels_arr, class_count)
    elif model.class_count != class_count:
        raise DatasetError(f"model has {model.class_count} centroids, task has {class_count} classes")
    ids = list(range(len(labels_arr))) if sample_ids is None else [int(i) for i in sample_ids]

    scores = np.empty(len(labels_arr))
    rivals = np.empty(len(labels_arr), dtype=np.int64)
    for start in range(0, len(labels_arr), _CHUNK):
        stop = start + _CHUNK
        dist = model.distances(features[start:stop])
        own, rival_dist, rival = _own_and_rival(dist, labels_arr[start:stop])
        scores[start:stop] = _scores_from_distances(own, rival_dist)
        rivals[start:stop] = rival

    per_sample = tuple(
        SampleScore(ids[i], int(labels_arr[i]), float(scores[i]), int(rivals[i]), bool(scores[i] > 0.5))
        for i in range(len(labels_arr))
    )
    c_all = math.fsum(scores) / len(scores)
    per_class = tuple(
        math.fsum(scores[labels_arr == cls]) / max(1, int(np.sum(labels_arr == cls))) for cls in range(class_count)
    )
    meta = dict(metadata or {})
    meta.setdefault("l", len(per_sample))
    return ComplexityReport(per_sample, c_all, per_class, meta)


def dataset_complexity(
    dataset: LabeledDataset,
    workers: Optional[int] = None,
    features: Optional[np.ndarray] = None,
) -> ComplexityReport:
    """Describe every sample, fit centroids and compute ``C_all``.

    ``features`` reuses an already extracted descriptor matrix (one row per
    sample, in dataset order).
    """
    dataset.require_complete()
    if features is None:
        features = extract_features(dataset, workers=workers)
    elif len(features) != len(dataset.labels):
        raise DatasetError(f"{len(features)} descriptor rows for {len(dataset.labels)} samples")
    metadata = {
        "dataset": dataset.name,
        "descriptor_variant": DESCRIPTOR_VARIANT,
        "source": dataset.metadata.get("source"),
        "native_size_kept": True,
    }
    report = score_features(features, dataset.labels, dataset.class_count, metadata=metadata)
    logger.info("%s: C_all=%.6f over %d samples", dataset.name, report.c_all, report.sample_count)
    return report


# ----------------------------------------------------------------------------
# Two-class conversion check


def simplex_centers(class_count: int, edge: float) -> np.ndarray:
    """Vertices of a regular simplex with side ``edge`` in ``class_count - 1`` dims."""
    vertices = np.eye(class_count) * (edge / math.sqrt(2.0))
    centred = vertices - vertices.mean(axis=0)
    _, _, vt = np.linalg.svd(centred)
    return centred @ vt[: class_count - 1].T


@dataclass(frozen=True)
class SimulationResult:
    separation: float
    sigma: float
    trials: int
    seed: int
    error_rates: Dict[int, float]
    standard_errors: Dict[int, float]
    ratios: Dict[int, Optional[float]]
    analytic_two_class: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "separation": self.separation,
            "sigma": self.sigma,
            "trials_per_class": self.trials,
            "seed": self.seed,
            "analytic_two_class_error": self.analytic_two_class,
            "classes": [
                {
                    "n": n,
                    "error_rate": self.error_rates[n],
                    "standard_error": self.standard_errors[n],
                    "ratio_to_two_class": self.ratios[n],
                    "proportional_prediction": n - 1,
                }
                for n in sorted(self.error_rates)
            ],
        }


def _nearest_center_errors(centers: np.ndarray, sigma: float, trials: int, rng: np.random.Generator) -> int:
    errors = 0
    n, dims = centers.shape
    for cls in range(n):
        remaining = trials
        while remaining:
            batch = min(remaining, 100_000)
            samples = centers[cls] + sigma * rng.standard_normal((batch, dims))
            diff = samples[:, None, :] - centers[None, :, :]
            predicted = np.argmin(np.sum(diff * diff, axis=-1), axis=1)
            errors += int(np.count_nonzero(predicted != cls))
            remaining -= batch
    return errors


def simulate_multiclass_error(
    class_counts: Union[int, Sequence[int]],
    center_separation: float,
    sigma: float,
    trials: int = MIN_TRIALS,
    seed: int = 0,
) -> SimulationResult:
    """Monte-Carlo error rate of nearest-centre classification.

    Class centres form a regular simplex with edge ``center_separation``; each
    class draws ``trials`` isotropic Gaussian samples of standard deviation
    ``sigma``.  The two-class rate is always simulated so every ``e_n`` can be
    reported relative to ``e_2``.  Each ``n`` uses its own stream derived from
    ``seed``, so a rate does not depend on which other ``n`` were requested.
    """
    counts = [class_counts] if isinstance(class_counts, int) else list(class_counts)
    if not counts or any(n < 2 for n in counts):
        raise SimulationError("class counts must all be >= 2")
    if trials < MIN_TRIALS:
        raise SimulationError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    if sigma < 0 or center_separation <= 0:
        raise SimulationError("sigma must be >= 0 and center_separation > 0")

    rates: Dict[int, float] = {}
    errors: Dict[int, float] = {}
    for n in sorted(set(counts) | {2}):
        rng = np.random.default_rng([seed, n])
        wrong = _nearest_center_errors(simplex_centers(n, center_separation), sigma, trials, rng)
        total = n * trials
        rate = wrong / total
        rates[n] = rate
        errors[n] = math.sqrt(rate * (1.0 - rate) / total)
        logger.debug("n=%d: %d/%d misclassified", n, wrong, total)

    base = rates[2]
    ratios = {n: (rates[n] / base if base > 0 else None) for n in rates}
    analytic = float(norm.cdf(-center_separation / (2.0 * sigma))) if sigma > 0 else 0.0
    return SimulationResult(center_separation, sigma, trials, seed, rates, errors, ratios, analytic)
