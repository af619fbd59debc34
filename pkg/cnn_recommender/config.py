"""Defaults, run configuration and logging setup.

The constants below are the documented defaults of the toolkit.  The
pydantic models describe configuration that travels with results: every
report written by the command-line front end embeds the resolved
:class:`RunConfig` of its run.
"""

from __future__ import annotations

import logging
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Recommendation margin over the matched ability score ("a little bit higher").
DEFAULT_MARGIN = 0.05

# Depth correction g(N): threshold and steepness.
DEFAULT_N0 = 50.0
DEFAULT_GAMMA = 0.05

# Fixed generation parameters.
INPUT_SIDE = 52
KERNEL_SIDE = 3
DEFAULT_INPUT_CHANNELS = 3
DEFAULT_CLASS_COUNT = 10

MIN_TRIALS = 10000
CEILING_SCAN_LIMIT = 512
DEFAULT_CURVE_POINTS = 50

# ITU-R BT.601 luma weights.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

DownsampleKind = Literal["pooling", "strided-conv"]
QPattern = Literal["uniform-1", "uniform", "nondecreasing", "all"]
DatasetFormat = Literal["idx", "cifar", "dir", "synth"]


class CandidateConstraints(BaseModel):
    """Ranges searched by :func:`cnn_recommender.archgen.enumerate_candidates`.

    The defaults cover every generated model of the published table: widths
    16 and 64 are included, depths up to four sections with at most four
    layers per section, and non-decreasing layer distributions.
    """

    model_config = ConfigDict(frozen=True)

    base_maps: Tuple[int, ...] = (16, 32, 64, 128)
    n_down: Tuple[int, ...] = (1, 2, 3, 4, 5)
    max_per_section: int = Field(default=4, ge=1)
    q_pattern: QPattern = "nondecreasing"
    input_channels: int = Field(default=DEFAULT_INPUT_CHANNELS, ge=1)
    downsample_kind: DownsampleKind = "pooling"
    class_count: int = Field(default=DEFAULT_CLASS_COUNT, ge=2)
    max_macs: Optional[int] = Field(default=None, ge=1)

    @field_validator("base_maps", "n_down")
    @classmethod
    def _positive_values(cls, values: Tuple[int, ...]) -> Tuple[int, ...]:
        if not values:
            raise ValueError("range must not be empty")
        if any(v < 1 for v in values):
            raise ValueError("range values must be >= 1")
        return tuple(sorted(set(values)))


class RunConfig(BaseModel):
    """Resolved configuration of one command-line run."""

    model_config = ConfigDict(frozen=True)

    command: str
    inputs: List[str] = Field(default_factory=list)
    dataset_format: Optional[DatasetFormat] = None
    class_count: Optional[int] = None
    max_per_class: Optional[int] = None
    descriptor_variant: Optional[str] = None
    workers: Optional[int] = None
    constraints: Optional[CandidateConstraints] = None
    params_path: Optional[str] = None
    calibration_path: Optional[str] = None
    candidates_path: Optional[str] = None
    matching_kind: Optional[str] = None
    margin: Optional[float] = Field(default=None, ge=0.0)
    seed: Optional[int] = None
    options: dict = Field(default_factory=dict)
    out: Optional[str] = None
    tool_version: str

    @model_validator(mode="after")
    def _seed_for_stochastic_runs(self) -> "RunConfig":
        stochastic = self.command in {"synth", "validate-2class"} or self.dataset_format == "synth"
        if stochastic and self.seed is None:
            raise ValueError(f"command {self.command!r} needs a seed")
        return self


def setup_logging(verbose: bool = False) -> None:
    """Route log records to stderr through a rich handler."""
    from rich.console import Console
    from rich.logging import RichHandler

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
