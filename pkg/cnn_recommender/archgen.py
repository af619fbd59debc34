"""
Rule-based CNN generation
=========================

Generated networks share a fixed frame: 52×52 input, 3×3 convolutions with
stride 1 and padding 1, 3×3 stride-2 max pooling, ReLU.  Four parameters vary:

* ``S`` (``base_maps``) – feature maps of the first convolutional layer;
* ``M`` (``n_down``) – number of down-sampling layers;
* ``q`` – convolutional layers in each of the ``M`` sections;
* ``N`` (``n_conv``) – total convolutional layers, always ``sum(q)``.

Section ``i`` (1-based) has ``S·2^(i-1)`` feature maps; every down-sampling
layer halves the spatial side with ceiling rounding (52→26→13→7→4→2).  A
down-sampling layer is either max pooling (channels unchanged; the next
section's first convolution doubles them) or a stride-2 convolution that
doubles the channels itself.  A global-average-pool + fully-connected head
closes the network.

Specs are immutable pydantic models, so they are hashable, compare by value
and round-trip through JSON.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import (
    DEFAULT_CLASS_COUNT,
    DEFAULT_INPUT_CHANNELS,
    INPUT_SIDE,
    KERNEL_SIDE,
    CandidateConstraints,
    DownsampleKind,
)
from .errors import InputError, SpecValidationError
from .reports import write_csv

logger = logging.getLogger(__name__)

HEAD_KINDS = ("global-pool", "fully-connected")

# name, S, q, published ability score
REFERENCE_MODELS: Tuple[Tuple[str, int, Tuple[int, ...], float], ...] = (
    ("Model-1", 16, (1, 1, 1), 5.41),
    ("Model-2", 16, (1, 1, 1, 1), 5.44),
    ("Model-3", 64, (1, 1, 1, 1), 6.04),
    ("Model-4", 64, (1, 1, 2, 2), 6.12),
    ("Model-5", 64, (2, 2, 2, 2), 6.34),
    ("Model-6", 64, (3, 3, 3, 4), 6.53),
)


def section_sides(input_side: int, n_down: int) -> List[int]:
    """Spatial side entering each section, followed by the side entering the head."""
    sides = [input_side]
    for _ in range(n_down):
        sides.append(math.ceil(sides[-1] / 2))
    return sides


class HeadSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    class_count: int = Field(default=DEFAULT_CLASS_COUNT, ge=2)


class CnnSpec(BaseModel):
    """A generated architecture: ``(N, S, M, q)`` plus the fixed frame."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_conv: int = Field(ge=1)
    base_maps: int = Field(ge=1)
    n_down: int = Field(ge=1)
    q: Tuple[int, ...]
    input_side: int = Field(default=INPUT_SIDE, ge=KERNEL_SIDE)
    input_channels: int = Field(default=DEFAULT_INPUT_CHANNELS, ge=1)
    downsample_kind: DownsampleKind = "pooling"
    head: HeadSpec = Field(default_factory=HeadSpec)

    @field_validator("q")
    @classmethod
    def _check_q(cls, q: Tuple[int, ...]) -> Tuple[int, ...]:
        if not q:
            raise ValueError("q must not be empty")
        if any(v < 1 for v in q):
            raise ValueError(f"every section needs at least one layer, got {list(q)}")
        return q

    @model_validator(mode="after")
    def _check_rules(self) -> "CnnSpec":
        if len(self.q) != self.n_down:
            raise ValueError(f"q has {len(self.q)} sections but n_down is {self.n_down}")
        if sum(self.q) != self.n_conv:
            raise ValueError(f"n_conv is {self.n_conv} but q sums to {sum(self.q)}")
        sides = section_sides(self.input_side, self.n_down)
        if min(sides[:-1]) < KERNEL_SIDE:
            raise ValueError(
                f"{self.n_down} down-sampling layers shrink a {self.input_side}px input below "
                f"{KERNEL_SIDE}px before the last section (sides {sides})"
            )
        return self

    def widths(self) -> List[int]:
        return [self.base_maps * 2**i for i in range(self.n_down)]

    def label(self) -> str:
        q = ",".join(str(v) for v in self.q)
        return f"N={self.n_conv} S={self.base_maps} M={self.n_down} q=({q})"


def _field_path(err: ValidationError) -> Tuple[str, str]:
    first = err.errors()[0]
    path = ".".join(str(part) for part in first.get("loc", ())) or None
    return first.get("msg", str(err)), path


def make_spec(
    base_maps: int,
    n_down: Optional[int],
    q: Sequence[int],
    *,
    input_side: int = INPUT_SIDE,
    input_channels: int = DEFAULT_INPUT_CHANNELS,
    downsample_kind: DownsampleKind = "pooling",
    class_count: int = DEFAULT_CLASS_COUNT,
) -> CnnSpec:
    """Build a spec, deriving ``N = sum(q)``.

    ``n_down`` may be ``None`` to take ``len(q)``.

    Raises
    ------
    SpecValidationError
        For an empty ``q``, non-positive entries, a ``q``/``n_down`` length
        mismatch or too many down-sampling layers for the input side.
    """
    q = tuple(int(v) for v in q)
    try:
        return CnnSpec(
            n_conv=sum(q),
            base_maps=base_maps,
            n_down=len(q) if n_down is None else n_down,
            q=q,
            input_side=input_side,
            input_channels=input_channels,
            downsample_kind=downsample_kind,
            head=HeadSpec(class_count=class_count),
        )
    except ValidationError as err:
        raise SpecValidationError(*_field_path(err)) from err


@dataclass(frozen=True)
class LayerDescriptor:
    kind: str
    in_channels: int
    out_channels: int
    in_side: int
    out_side: int
    kernel: Optional[int]
    stride: int
    padding: int
    macs: int
    params: int
    section: int

    @property
    def is_head(self) -> bool:
        return self.kind in HEAD_KINDS


def _conv(in_ch: int, out_ch: int, side: int, stride: int, section: int) -> LayerDescriptor:
    out_side = math.ceil(side / stride)
    k2 = KERNEL_SIDE * KERNEL_SIDE
    return LayerDescriptor(
        kind="conv",
        in_channels=in_ch,
        out_channels=out_ch,
        in_side=side,
        out_side=out_side,
        kernel=KERNEL_SIDE,
        stride=stride,
        padding=1,
        macs=out_side * out_side * out_ch * in_ch * k2,
        params=out_ch * (in_ch * k2 + 1),
        section=section,
    )


def expand_layers(spec: CnnSpec, class_count: Optional[int] = None) -> List[LayerDescriptor]:
    """Concrete layer list of ``spec``, head included."""
    classes = spec.head.class_count if class_count is None else class_count
    layers: List[LayerDescriptor] = []
    channels = spec.input_channels
    side = spec.input_side
    for section, (width, depth) in enumerate(zip(spec.widths(), spec.q), start=1):
        for _ in range(depth):
            layers.append(_conv(channels, width, side, 1, section))
            channels = width
        if spec.downsample_kind == "pooling":
            out_side = math.ceil(side / 2)
            layers.append(
                LayerDescriptor("pool", channels, channels, side, out_side, KERNEL_SIDE, 2, 1, 0, 0, section)
            )
        else:
            layers.append(_conv(channels, 2 * channels, side, 2, section))
            out_side = layers[-1].out_side
            channels *= 2
        side = out_side
    last = spec.n_down + 1
    layers.append(LayerDescriptor("global-pool", channels, channels, side, 1, None, 1, 0, 0, 0, last))
    layers.append(
        LayerDescriptor("fully-connected", channels, classes, 1, 1, None, 1, 0, channels * classes, channels * classes + classes, last)
    )
    return layers


def count_macs(layers: Iterable[LayerDescriptor], include_head: bool = True) -> int:
    """Total multiply-accumulates; pooling counts as zero."""
    return sum(layer.macs for layer in layers if include_head or not layer.is_head)


def count_params(layers: Iterable[LayerDescriptor], include_head: bool = True) -> int:
    """Total weights, biases included."""
    return sum(layer.params for layer in layers if include_head or not layer.is_head)


@lru_cache(maxsize=4096)
def spec_macs(spec: CnnSpec, include_head: bool = True) -> int:
    return count_macs(expand_layers(spec), include_head=include_head)


def spec_sort_key(spec: CnnSpec) -> Tuple[Any, ...]:
    """Lexicographic order used for enumeration and tie-breaks."""
    return (
        spec.base_maps,
        spec.n_down,
        spec.q,
        spec.input_channels,
        spec.downsample_kind,
        spec.input_side,
        spec.head.class_count,
    )


def _q_patterns(n_down: int, max_per_section: int, pattern: str) -> Iterable[Tuple[int, ...]]:
    per_section = range(1, max_per_section + 1)
    if pattern == "uniform-1":
        return [(1,) * n_down]
    if pattern == "uniform":
        return [(k,) * n_down for k in per_section]
    if pattern == "nondecreasing":
        return itertools.combinations_with_replacement(per_section, n_down)
    return itertools.product(per_section, repeat=n_down)


def enumerate_candidates(constraints: Optional[CandidateConstraints] = None) -> List[CnnSpec]:
    """All valid specs within ``constraints``, in :func:`spec_sort_key` order.

    Combinations that violate the generation rules (for example too many
    down-sampling layers for the input) are skipped.

    Raises
    ------
    InputError
        If no spec survives.
    """
    constraints = constraints or CandidateConstraints()
    specs: List[CnnSpec] = []
    skipped = 0
    for base_maps, n_down in itertools.product(constraints.base_maps, constraints.n_down):
        for q in _q_patterns(n_down, constraints.max_per_section, constraints.q_pattern):
            try:
                spec = make_spec(
                    base_maps,
                    n_down,
                    q,
                    input_channels=constraints.input_channels,
                    downsample_kind=constraints.downsample_kind,
                    class_count=constraints.class_count,
                )
            except SpecValidationError as err:
                skipped += 1
                logger.debug("skipping S=%d M=%d q=%s: %s", base_maps, n_down, q, err)
                continue
            if constraints.max_macs is not None and spec_macs(spec) > constraints.max_macs:
                skipped += 1
                continue
            specs.append(spec)
    if skipped:
        logger.info("enumeration skipped %d invalid or over-budget combinations", skipped)
    if not specs:
        raise InputError("the candidate search space is empty")
    return sorted(specs, key=spec_sort_key)


def reference_specs(class_count: int = DEFAULT_CLASS_COUNT) -> List[Tuple[str, CnnSpec, float]]:
    """The published generated models as ``(name, spec, chi)``."""
    return [(name, make_spec(s, len(q), q, class_count=class_count), chi) for name, s, q, chi in REFERENCE_MODELS]


def export_spec(spec: CnnSpec) -> Dict[str, Any]:
    """JSON document of ``spec``."""
    return spec.model_dump(mode="json")


def import_spec(document: Union[str, bytes, Dict[str, Any]]) -> CnnSpec:
    """Validate a spec document; missing optional fields take their defaults.

    Raises
    ------
    SpecValidationError
        Naming the offending field path.
    """
    try:
        if isinstance(document, (str, bytes)):
            return CnnSpec.model_validate_json(document)
        return CnnSpec.model_validate(document)
    except ValidationError as err:
        raise SpecValidationError(*_field_path(err)) from err


def write_layers_csv(path: str, layers: Sequence[LayerDescriptor]) -> None:
    header = ["kind", "in_ch", "out_ch", "in_side", "out_side", "stride", "macs", "params"]
    rows = ([l.kind, l.in_channels, l.out_channels, l.in_side, l.out_side, l.stride, l.macs, l.params] for l in layers)
    write_csv(path, header, rows)


@dataclass(frozen=True)
class NamedSpec:
    """A spec from a table file, optionally carrying a published score."""

    name: str
    spec: CnnSpec
    chi: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"name": self.name, "spec": export_spec(self.spec)}
        if self.chi is not None:
            doc["chi"] = self.chi
        return doc


def parse_spec_table(document: Any) -> List[NamedSpec]:
    """Read a list whose items are spec documents or ``{name, spec, chi}`` wrappers."""
    if isinstance(document, dict):
        document = [document]
    if not isinstance(document, list) or not document:
        raise SpecValidationError("expected a non-empty list of specs")
    table = []
    for idx, item in enumerate(document):
        if not isinstance(item, dict):
            raise SpecValidationError("expected an object", field_path=str(idx))
        if "spec" in item:
            try:
                spec = import_spec(item["spec"])
            except SpecValidationError as err:
                raise SpecValidationError(str(err), field_path=f"{idx}.spec") from err
            chi = item.get("chi")
            table.append(NamedSpec(str(item.get("name", spec.label())), spec, None if chi is None else float(chi)))
        else:
            try:
                spec = import_spec(item)
            except SpecValidationError as err:
                raise SpecValidationError(str(err), field_path=str(idx)) from err
            table.append(NamedSpec(spec.label(), spec))
    return table


def reference_document(class_count: int = DEFAULT_CLASS_COUNT) -> List[Dict[str, Any]]:
    return [NamedSpec(name, spec, chi).to_dict() for name, spec, chi in reference_specs(class_count)]


def load_bundled_table() -> List[NamedSpec]:
    """The published generated models shipped in ``data/reference_models.json``."""
    text = resources.files("cnn_recommender.data").joinpath("reference_models.json").read_text(encoding="utf-8")
    return parse_spec_table(json.loads(text))
