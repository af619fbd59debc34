"""
Ability score of a generated CNN
================================

The ability score is the product of a structure term and a depth correction:

    χ = f(spec) · g(N)
    f(spec) = a0 + a1 · log10(total MACs)
    g(N)    = min(1, 2 / (1 + exp(gamma · max(0, N - n0))))

``f`` grows with the amount of computation.  ``g`` equals 1 up to ``n0``
layers and then decays, modelling the vanishing-gradient penalty of very
deep plain networks; for ``gamma > 0`` it gives χ a maximum over depth.

``a0`` and ``a1`` are calibrated by least squares against published
``(model, χ)`` anchors while ``n0`` and ``gamma`` stay configuration: the
anchors are all shallow, so they carry no information about the penalty.
Only the ranking of the anchors is expected to be reproduced, not their
absolute values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from importlib import resources
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.special import expit

from .archgen import CnnSpec, NamedSpec, make_spec, spec_macs
from .config import CEILING_SCAN_LIMIT, DEFAULT_GAMMA, DEFAULT_INPUT_CHANNELS, DEFAULT_N0, DownsampleKind
from .errors import CalibrationError, InputError, NoCeilingError, SpecValidationError
from .reports import read_json, write_json

logger = logging.getLogger(__name__)

QShape = Literal["balanced", "front"]


class CalibrationAssumptions(BaseModel):
    """Counting conventions the coefficients were fitted under."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    input_channels: int = Field(default=DEFAULT_INPUT_CHANNELS, ge=1)
    downsample_kind: DownsampleKind = "pooling"
    head: bool = True


class AbilityParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    a0: float
    a1: float = Field(gt=0)
    n0: float = Field(default=DEFAULT_N0, gt=0)
    gamma: float = Field(default=DEFAULT_GAMMA, ge=0)
    provenance: Literal["fitted", "default"] = "default"
    assumptions: CalibrationAssumptions = Field(default_factory=CalibrationAssumptions)
    residuals: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _fitted_has_residuals(self) -> "AbilityParams":
        if self.provenance == "fitted" and not self.residuals:
            raise ValueError("fitted params must list one residual per anchor")
        return self


def depth_factor(n_conv: int, params: AbilityParams) -> float:
    """``g(N)``: 1 up to ``n0`` layers, decaying beyond."""
    excess = max(0.0, n_conv - params.n0)
    return min(1.0, 2.0 * float(expit(-params.gamma * excess)))


def structure_score(spec: CnnSpec, params: AbilityParams) -> float:
    """``f(spec) = a0 + a1 * log10(MACs)``."""
    macs = spec_macs(spec, include_head=params.assumptions.head)
    assert macs > 0, "a valid spec always performs computation"
    return params.a0 + params.a1 * math.log10(macs)


def ability_score(spec: CnnSpec, params: AbilityParams) -> float:
    """Ability score χ of ``spec``."""
    return structure_score(spec, params) * depth_factor(spec.n_conv, params)


def calibrate(
    anchors: Sequence[Tuple[CnnSpec, float]],
    n0: float = DEFAULT_N0,
    gamma: float = DEFAULT_GAMMA,
    include_head: bool = True,
) -> AbilityParams:
    """Least-squares fit of ``(a0, a1)`` with ``g`` held fixed.

    Minimizes ``Σ (χ_i - g_i · (a0 + a1 · x_i))²`` with ``x_i`` the log10 MAC
    count of anchor ``i``, solving the 2×2 normal equations exactly.

    Raises
    ------
    CalibrationError
        With fewer than two anchors, when every anchor has the same MAC count,
        or when the fit does not increase with computation (``a1 <= 0``).
    """
    if len(anchors) < 2:
        raise CalibrationError(f"calibration needs at least 2 anchors, got {len(anchors)}")
    unit = AbilityParams(a0=0.0, a1=1.0, n0=n0, gamma=gamma)
    macs = [spec_macs(spec, include_head=include_head) for spec, _ in anchors]
    if len(set(macs)) < 2:
        raise CalibrationError("degenerate design: every anchor has the same MAC count")

    x = np.log10(np.asarray(macs, dtype=np.float64))
    g = np.array([depth_factor(spec.n_conv, unit) for spec, _ in anchors])
    y = np.array([float(chi) for _, chi in anchors])
    design = np.column_stack([g, g * x])
    a0, a1 = np.linalg.solve(design.T @ design, design.T @ y)
    if a1 <= 0:
        raise CalibrationError(f"fitted slope a1={a1:.6g} is not positive; ability would fall with computation")
    residuals = y - design @ np.array([a0, a1])

    first = anchors[0][0]
    assumptions = CalibrationAssumptions(
        input_channels=first.input_channels, downsample_kind=first.downsample_kind, head=include_head
    )
    logger.info("calibrated a0=%.6f a1=%.6f over %d anchors (max |residual| %.4f)", a0, a1, len(anchors), np.abs(residuals).max())
    return AbilityParams(
        a0=float(a0),
        a1=float(a1),
        n0=n0,
        gamma=gamma,
        provenance="fitted",
        assumptions=assumptions,
        residuals=tuple(float(r) for r in residuals),
    )


def calibrate_table(table: Sequence[NamedSpec], n0: float = DEFAULT_N0, gamma: float = DEFAULT_GAMMA) -> AbilityParams:
    """Calibrate on table entries that carry a published ``chi``."""
    anchors = [(entry.spec, entry.chi) for entry in table if entry.chi is not None]
    return calibrate(anchors, n0=n0, gamma=gamma)


def q_for_depth(n_conv: int, n_down: int, shape: QShape = "balanced") -> Tuple[int, ...]:
    """Spread ``n_conv`` layers over ``n_down`` sections.

    ``balanced`` gives the remainder to the deepest sections, ``front`` to the
    shallowest ones.
    """
    if n_conv < n_down:
        raise InputError(f"{n_conv} layers cannot fill {n_down} sections")
    base, extra = divmod(n_conv, n_down)
    q = [base] * n_down
    targets = range(n_down - extra, n_down) if shape == "balanced" else range(extra)
    for i in targets:
        q[i] += 1
    return tuple(q)


@dataclass(frozen=True)
class CeilingResult:
    depth: int
    chi: float
    spec: CnnSpec
    scan: Tuple[Tuple[int, float], ...]


def ability_ceiling(
    params: AbilityParams,
    base_maps: int,
    n_down: int,
    q_shape: QShape = "balanced",
    limit: int = CEILING_SCAN_LIMIT,
) -> CeilingResult:
    """Maximum χ over depth for one width family.

    Depth is scanned from ``n_down`` to ``limit`` layers, distributed by
    :func:`q_for_depth`; the shallowest depth wins ties.

    Raises
    ------
    NoCeilingError
        If ``gamma == 0``: χ then grows without bound.
    """
    if params.gamma == 0:
        raise NoCeilingError("gamma is 0: the depth correction is disabled and the ability score has no maximum")
    scan: List[Tuple[int, float]] = []
    best: Optional[Tuple[int, float, CnnSpec]] = None
    for depth in range(n_down, limit + 1):
        spec = make_spec(
            base_maps,
            n_down,
            q_for_depth(depth, n_down, q_shape),
            input_channels=params.assumptions.input_channels,
            downsample_kind=params.assumptions.downsample_kind,
        )
        chi = ability_score(spec, params)
        scan.append((depth, chi))
        if best is None or chi > best[1]:
            best = (depth, chi, spec)
    assert best is not None
    return CeilingResult(best[0], best[1], best[2], tuple(scan))


def params_from_document(document: dict) -> AbilityParams:
    try:
        return AbilityParams.model_validate(document)
    except ValidationError as err:
        first = err.errors()[0]
        path = ".".join(str(p) for p in first.get("loc", ())) or None
        raise SpecValidationError(first.get("msg", str(err)), field_path=path) from err


def load_params(path: str) -> AbilityParams:
    return params_from_document(read_json(path))


def save_params(path: str, params: AbilityParams) -> None:
    write_json(path, params.model_dump(mode="json"))


def load_default_params() -> AbilityParams:
    """Params shipped with the package, fitted to the published models."""
    text = resources.files("cnn_recommender.data").joinpath("default_params.json").read_text(encoding="utf-8")
    return AbilityParams.model_validate_json(text)
