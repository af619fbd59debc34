"""
Matching and recommendation
===========================

This module links the two scores and turns them into a choice:

* **fit_matching** – fits ``χ = m(C_all)`` from calibration pairs (tasks whose
  just-sufficient model is known).  ``m`` is kept monotone non-increasing: a
  higher complexity score means an easier task, so less ability is needed.
  Two kinds are offered, a least-squares line and an isotonic
  (pool-adjacent-violators) fit.  Outside the calibrated range ``m`` is
  clamped to its end values.
* **recommend** – picks the candidate with the smallest ability score at or
  above ``m(C_all) · (1 + margin)``; the margin deliberately aims slightly
  above the just-sufficient model, since the best-generalizing model usually
  overfits a little.
* **fit_performance_curve / predict_rate** – a two-anchor curve
  ``r(t) = a + b · ln t`` relating validation rate to forward time, so
  models between (or around) two trained anchors can be compared without
  training them.
* **balance_models** – applies that curve to a candidate table to find the
  fastest model above a rate or the most accurate model within a time budget.

Calibration pairs and curve anchors come from files supplied by the user:
producing them requires training, which this toolkit does not do.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .ability import AbilityParams, ability_score
from .archgen import CnnSpec, NamedSpec, export_spec, spec_macs, spec_sort_key
from .config import DEFAULT_CURVE_POINTS, DEFAULT_MARGIN
from .errors import CurveError, InputError, MatchingError, SpecValidationError
from .reports import read_json, read_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

MatchingKind = Literal["linear", "isotonic-decreasing"]


class CalibrationPair(BaseModel):
    """One calibration task: its complexity score and just-sufficient ability."""

    model_config = ConfigDict(frozen=True)

    task: str = ""
    c_all: float = Field(gt=0.0, lt=1.0)
    chi_optimal: float


PairLike = Union[CalibrationPair, Tuple[float, float]]


class MatchingFunction(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: MatchingKind
    slope: Optional[float] = None
    intercept: Optional[float] = None
    breakpoints: Tuple[Tuple[float, float], ...] = ()
    c_min: float
    c_max: float
    calibration_pairs: Tuple[CalibrationPair, ...] = ()

    def __call__(self, c_all: float) -> float:
        return self.evaluate(c_all)

    def evaluate(self, c_all: float) -> float:
        """Required ability for ``c_all``; clamped outside the calibrated range."""
        c = min(max(float(c_all), self.c_min), self.c_max)
        if self.kind == "linear":
            return self.intercept + self.slope * c
        xs = [p[0] for p in self.breakpoints]
        ys = [p[1] for p in self.breakpoints]
        return float(np.interp(c, xs, ys))


def _as_pairs(pairs: Sequence[PairLike]) -> List[CalibrationPair]:
    out = []
    for p in pairs:
        if isinstance(p, CalibrationPair):
            out.append(p)
        else:
            c_all, chi = p
            out.append(CalibrationPair(c_all=c_all, chi_optimal=chi))
    return out


def pool_adjacent_violators(values: Sequence[float], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.ones_like(values) if weights is None else np.asarray(weights, dtype=np.float64)
    # each block: [weighted sum, total weight, element count]
    blocks: List[List[float]] = []
    for v, w in zip(values, weights):
        blocks.append([v * w, w, 1])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] > blocks[-1][0] / blocks[-1][1]:
            s, wt, n = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += wt
            blocks[-1][2] += n
    fitted = [b[0] / b[1] for b in blocks for _ in range(int(b[2]))]
    return np.asarray(fitted)


def fit_matching(pairs: Sequence[PairLike], kind: MatchingKind = "linear") -> MatchingFunction:
    """Fit the monotone non-increasing matching function.

    Raises
    ------
    MatchingError
        With fewer than two pairs or two distinct ``C_all`` values, or when
        a linear fit rises with ``C_all``.
    """
    calib = _as_pairs(pairs)
    if len(calib) < 2:
        raise MatchingError(f"matching needs at least 2 calibration pairs, got {len(calib)}")
    x = np.array([p.c_all for p in calib])
    y = np.array([p.chi_optimal for p in calib])
    if np.unique(x).size < 2:
        raise MatchingError("calibration pairs need at least two distinct C_all values")
    c_min, c_max = float(x.min()), float(x.max())

    if kind == "linear":
        dx = x - x.mean()
        slope = float(np.dot(dx, y - y.mean()) / np.dot(dx, dx))
        intercept = float(y.mean() - slope * x.mean())
        if slope > 0:
            raise MatchingError(
                f"linear fit has positive slope {slope:.6g}: required ability would rise as tasks get easier; "
                "check the calibration pairs or use the isotonic fit"
            )
        logger.info("linear matching: chi = %.6f %+.6f * C_all", intercept, slope)
        return _checked(
            MatchingFunction(
                kind=kind, slope=slope, intercept=intercept, c_min=c_min, c_max=c_max, calibration_pairs=tuple(calib)
            )
        )
    if kind != "isotonic-decreasing":
        raise InputError(f"unknown matching kind {kind!r}")

    # duplicate C_all values are pooled into one weighted point
    xs, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    sums = np.zeros(xs.size)
    np.add.at(sums, inverse, y)
    means = sums / counts
    fitted = -pool_adjacent_violators(-means, counts)
    logger.info("isotonic matching over %d breakpoints", xs.size)
    return _checked(
        MatchingFunction(
            kind=kind,
            breakpoints=tuple((float(a), float(b)) for a, b in zip(xs, fitted)),
            c_min=c_min,
            c_max=c_max,
            calibration_pairs=tuple(calib),
        )
    )


def _checked(m: MatchingFunction, grid_points: int = 257) -> MatchingFunction:
    grid = np.linspace(m.c_min, m.c_max, grid_points)
    values = np.array([m(c) for c in grid])
    if not np.all(np.isfinite(values)):
        raise MatchingError("matching function is not finite over the calibrated range")
    if np.any(np.diff(values) > 1e-9):
        raise MatchingError("fitted matching function is not non-increasing")
    return m


def load_calibration_pairs(path: str) -> List[CalibrationPair]:
    """Read ``{task, c_all, chi_optimal}`` JSON lines."""
    pairs = []
    for lineno, record in enumerate(read_jsonl(path), start=1):
        try:
            pairs.append(CalibrationPair.model_validate(record))
        except ValidationError as err:
            first = err.errors()[0]
            loc = ".".join(str(p) for p in first.get("loc", ()))
            raise SpecValidationError(first.get("msg", str(err)), field_path=f"line {lineno}: {loc}") from err
    return pairs


def save_calibration_pairs(path: str, pairs: Sequence[CalibrationPair]) -> None:
    write_jsonl(path, [p.model_dump(mode="json") for p in pairs])


def save_matching(path: str, m: MatchingFunction) -> None:
    write_json(path, m.model_dump(mode="json"))


def load_matching(path: str) -> MatchingFunction:
    try:
        return MatchingFunction.model_validate(read_json(path))
    except ValidationError as err:
        raise SpecValidationError(str(err)) from err


# ----------------------------------------------------------------------------
# Recommendation


@dataclass(frozen=True)
class ScoredCandidate:
    name: str
    spec: CnnSpec
    chi: float
    macs: int

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "chi": self.chi, "macs": self.macs, "spec": export_spec(self.spec)}


def score_candidates(
    candidates: Sequence[Union[CnnSpec, NamedSpec]],
    params: AbilityParams,
    use_published: bool = False,
) -> List[ScoredCandidate]:
    """Ability score of every candidate.

    With ``use_published`` a table entry's own ``chi`` replaces the computed
    score when present.
    """
    scored = []
    for item in candidates:
        entry = item if isinstance(item, NamedSpec) else NamedSpec(item.label(), item)
        chi = entry.chi if use_published and entry.chi is not None else ability_score(entry.spec, params)
        scored.append(ScoredCandidate(entry.name, entry.spec, chi, spec_macs(entry.spec)))
    return scored


def _selection_key(candidate: ScoredCandidate) -> Tuple[Any, ...]:
    return (candidate.macs, spec_sort_key(candidate.spec), candidate.name)


def recommend_from_scores(target: float, scored: Sequence[ScoredCandidate]) -> Tuple[ScoredCandidate, bool]:
    """Smallest χ at or above ``target``; the largest χ (flagged) if none qualifies.

    Ties are broken by fewer MACs, then spec order.  Returns
    ``(chosen, undershoot)``.
    """
    if not scored:
        raise InputError("the candidate list is empty")
    qualifying = [c for c in scored if c.chi >= target]
    if qualifying:
        return min(qualifying, key=lambda c: (c.chi,) + _selection_key(c)), False
    chosen = min(scored, key=lambda c: (-c.chi,) + _selection_key(c))
    logger.warning("no candidate reaches chi %.4f; returning the strongest (%s, chi %.4f)", target, chosen.name, chosen.chi)
    return chosen, True


def suggest_small_anchor(chosen: ScoredCandidate, scored: Sequence[ScoredCandidate]) -> Optional[ScoredCandidate]:
    """Cheapest candidate of the chosen model's width family with fewer MACs.

    It serves as the second, smaller model to train for the performance curve.
    """
    spec = chosen.spec
    family = [
        c
        for c in scored
        if c.spec.base_maps == spec.base_maps
        and c.spec.n_down == spec.n_down
        and c.spec.input_channels == spec.input_channels
        and c.spec.downsample_kind == spec.downsample_kind
        and c.macs < chosen.macs
    ]
    return min(family, key=_selection_key) if family else None


@dataclass(frozen=True)
class Recommendation:
    chosen: ScoredCandidate
    c_all: float
    matched_chi: float
    margin: float
    target_chi: float
    undershoot: bool
    table: Tuple[ScoredCandidate, ...]
    small_anchor: Optional[ScoredCandidate] = None

    @property
    def chosen_chi(self) -> float:
        return self.chosen.chi

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c_all": round(self.c_all, 6),
            "matched_chi": self.matched_chi,
            "margin": self.margin,
            "target_chi": self.target_chi,
            "chosen_chi": self.chosen.chi,
            "undershoot": self.undershoot,
            "chosen": self.chosen.to_dict(),
            "small_anchor": self.small_anchor.to_dict() if self.small_anchor else None,
            "candidates": [c.to_dict() for c in self.table],
        }


def recommend(
    c_all: float,
    candidates: Sequence[Union[CnnSpec, NamedSpec, ScoredCandidate]],
    params: AbilityParams,
    m: MatchingFunction,
    margin: float = DEFAULT_MARGIN,
) -> Recommendation:
    """Recommend the candidate matching a task of complexity ``c_all``."""
    if margin < 0:
        raise InputError(f"margin must be >= 0, got {margin}")
    if not candidates:
        raise InputError("the candidate list is empty")
    plain = iter(score_candidates([c for c in candidates if not isinstance(c, ScoredCandidate)], params))
    scored = [c if isinstance(c, ScoredCandidate) else next(plain) for c in candidates]
    matched = m(c_all)
    target = matched * (1.0 + margin)
    chosen, undershoot = recommend_from_scores(target, scored)
    table = tuple(sorted(scored, key=lambda c: (c.chi,) + _selection_key(c)))
    return Recommendation(
        chosen=chosen,
        c_all=c_all,
        matched_chi=matched,
        margin=margin,
        target_chi=target,
        undershoot=undershoot,
        table=table,
        small_anchor=suggest_small_anchor(chosen, scored),
    )


# ----------------------------------------------------------------------------
# Performance curve


@dataclass(frozen=True)
class PerformanceCurve:
    """``r(t) = min(1, a + b ln t)`` through two ``(time, rate)`` anchors."""

    a: float
    b: float
    anchors: Tuple[Tuple[float, float], Tuple[float, float]]

    def raw(self, t: float) -> float:
        return self.a + self.b * math.log(t)


def _check_anchor(anchor: Tuple[float, float]) -> Tuple[float, float]:
    t, r = float(anchor[0]), float(anchor[1])
    if not math.isfinite(t) or t <= 0:
        raise CurveError(f"anchor time must be positive, got {t}")
    if not 0.0 <= r <= 1.0:
        raise CurveError(f"anchor rate must lie in [0, 1], got {r}")
    return t, r


def fit_performance_curve(anchor_small: Tuple[float, float], anchor_large: Tuple[float, float]) -> PerformanceCurve:
    """Solve for ``(a, b)`` exactly through both anchors (order-insensitive)."""
    first, second = sorted([_check_anchor(anchor_small), _check_anchor(anchor_large)])
    (t1, r1), (t2, r2) = first, second
    if t1 == t2:
        raise CurveError(f"anchors need distinct forward times, both are {t1}")
    b = (r2 - r1) / (math.log(t2) - math.log(t1))
    a = r1 - b * math.log(t1)
    return PerformanceCurve(a, b, (first, second))


def predict_rate(curve: PerformanceCurve, t: float) -> float:
    """Predicted validation rate at forward time ``t``, clipped to [0, 1]."""
    if not t > 0:
        raise CurveError(f"forward time must be positive, got {t}")
    return min(1.0, max(0.0, curve.raw(t)))


def sample_curve(
    curve: PerformanceCurve,
    points: int = DEFAULT_CURVE_POINTS,
    t_min: Optional[float] = None,
    t_max: Optional[float] = None,
) -> List[Tuple[float, float, int]]:
    """Rows ``(t, rate, is_anchor)`` on a log grid plus the two anchors, sorted by ``t``."""
    if points < 2:
        raise CurveError(f"need at least 2 grid points, got {points}")
    (t1, _), (t2, _) = curve.anchors
    lo = t1 / 4.0 if t_min is None else t_min
    hi = t2 * 4.0 if t_max is None else t_max
    if not 0 < lo < hi:
        raise CurveError(f"invalid grid range [{lo}, {hi}]")
    rows = [(float(t), predict_rate(curve, float(t)), 0) for t in np.geomspace(lo, hi, points)]
    rows.extend((t, r, 1) for t, r in curve.anchors)
    return sorted(rows, key=lambda row: (row[0], row[2]))


def estimate_forward_time(spec: CnnSpec, throughput: float) -> float:
    """Forward time in seconds at ``throughput`` MACs per second."""
    if not throughput > 0:
        raise InputError(f"throughput must be positive, got {throughput}")
    return spec_macs(spec) / throughput


@dataclass(frozen=True)
class BalanceRow:
    name: str
    macs: int
    chi: float
    forward_time: float
    predicted_rate: float


@dataclass(frozen=True)
class BalanceTable:
    rows: Tuple[BalanceRow, ...]
    fastest_meeting_rate: Optional[BalanceRow]
    best_within_time: Optional[BalanceRow]


def balance_models(
    curve: PerformanceCurve,
    scored: Sequence[ScoredCandidate],
    throughput: float,
    min_rate: Optional[float] = None,
    max_time: Optional[float] = None,
) -> BalanceTable:
    """Trade accuracy against speed across ``scored`` using ``curve``."""
    rows = []
    for cand in scored:
        t = estimate_forward_time(cand.spec, throughput)
        rows.append(BalanceRow(cand.name, cand.macs, cand.chi, t, predict_rate(curve, t)))
    rows.sort(key=lambda r: (r.forward_time, r.name))
    fastest = None
    if min_rate is not None:
        meeting = [r for r in rows if r.predicted_rate >= min_rate]
        fastest = meeting[0] if meeting else None
    best = None
    if max_time is not None:
        within = [r for r in rows if r.forward_time <= max_time]
        best = max(within, key=lambda r: (r.predicted_rate, -r.forward_time)) if within else None
    return BalanceTable(tuple(rows), fastest, best)
