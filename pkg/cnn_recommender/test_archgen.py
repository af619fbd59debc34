import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnn_recommender.archgen import (
    CnnSpec,
    count_macs,
    count_params,
    enumerate_candidates,
    expand_layers,
    export_spec,
    import_spec,
    load_bundled_table,
    make_spec,
    parse_spec_table,
    section_sides,
    spec_macs,
    reference_document,
    reference_specs,
    write_layers_csv,
)
from cnn_recommender.config import CandidateConstraints
from cnn_recommender.errors import InputError, SpecValidationError

specs = st.builds(
    lambda s, q, channels, kind, classes: make_spec(
        s, None, q, input_channels=channels, downsample_kind=kind, class_count=classes
    ),
    st.sampled_from([8, 16, 24, 32, 64]),
    st.lists(st.integers(1, 4), min_size=1, max_size=5),
    st.integers(1, 4),
    st.sampled_from(["pooling", "strided-conv"]),
    st.integers(2, 20),
)


def _loop_macs(spec):
    """Convolution MACs counted layer by layer."""
    side, channels, total = spec.input_side, spec.input_channels, 0
    for i, depth in enumerate(spec.q):
        width = spec.base_maps * 2**i
        for _ in range(depth):
            total += side * side * width * channels * 9
            channels = width
        if spec.downsample_kind == "strided-conv":
            side = math.ceil(side / 2)
            total += side * side * (2 * channels) * channels * 9
            channels *= 2
        else:
            side = math.ceil(side / 2)
    return total


def test_model1_convolution_macs():
    name, spec, _ = reference_specs()[0]
    assert name == "Model-1"
    layers = expand_layers(spec)
    assert count_macs(layers, include_head=False) == 7_398_144
    # head: global pooling is free, the 64 -> 10 classifier costs 640
    assert count_macs(layers) == 7_398_784
    assert count_params(layers, include_head=False) == 448 + 4640 + 18496
    assert count_params(layers) == 448 + 4640 + 18496 + 650


def test_reference_mac_counts():
    expected = [7_398_784, 11_012_096, 162_160_640, 377_446_400, 576_806_912, 1_107_058_688]
    assert [spec_macs(spec) for _, spec, _ in reference_specs()] == expected


@settings(max_examples=20, deadline=None)
@given(specs)
def test_mac_count_matches_layer_loop(spec):
    assert count_macs(expand_layers(spec), include_head=False) == _loop_macs(spec)


def _variant(spec, base_maps=None, q=None):
    return make_spec(
        spec.base_maps if base_maps is None else base_maps,
        None,
        spec.q if q is None else q,
        input_channels=spec.input_channels,
        downsample_kind=spec.downsample_kind,
        class_count=spec.head.class_count,
    )


@settings(max_examples=30, deadline=None)
@given(specs)
def test_extra_layer_raises_cost(spec):
    layers = expand_layers(spec)
    for i in range(spec.n_down):
        deeper = expand_layers(_variant(spec, q=spec.q[:i] + (spec.q[i] + 1,) + spec.q[i + 1 :]))
        assert count_macs(deeper) > count_macs(layers)
        assert count_params(deeper) > count_params(layers)


@settings(max_examples=30, deadline=None)
@given(specs)
def test_section_widths_double(spec):
    for layer in expand_layers(spec):
        if layer.kind == "conv" and layer.stride == 1:
            assert layer.out_channels == spec.base_maps * 2 ** (layer.section - 1)


@settings(max_examples=30, deadline=None)
@given(specs)
def test_doubling_base_maps_quadruples_hidden_conv_macs(spec):
    def hidden(s):
        return sum([layer.macs for layer in expand_layers(s) if layer.kind == "conv"][1:])

    assert hidden(_variant(spec, base_maps=2 * spec.base_maps)) == 4 * hidden(spec)


def test_section_sides_use_ceiling():
    assert section_sides(52, 5) == [52, 26, 13, 7, 4, 2]


def test_strided_downsampling_doubles_channels():
    spec = make_spec(16, 2, (1, 1), downsample_kind="strided-conv")
    layers = expand_layers(spec)
    kinds = [layer.kind for layer in layers]
    assert kinds == ["conv", "conv", "conv", "conv", "global-pool", "fully-connected"]
    assert layers[1].stride == 2 and layers[1].out_channels == 32 and layers[1].out_side == 26
    assert layers[-1].in_channels == 64


def test_too_many_downsamplings_rejected():
    make_spec(16, 5, (1, 1, 1, 1, 1))
    with pytest.raises(SpecValidationError):
        make_spec(16, 6, (1,) * 6)


def test_inconsistent_spec_rejected():
    with pytest.raises(SpecValidationError):
        make_spec(16, 3, (1, 1))
    with pytest.raises(SpecValidationError) as info:
        import_spec({"n_conv": 2, "base_maps": 16, "n_down": 2, "q": [1, 0]})
    assert info.value.field_path == "q"


def test_import_fills_defaults_and_rejects_unknown_fields():
    spec = import_spec('{"n_conv": 3, "base_maps": 16, "n_down": 3, "q": [1, 1, 1]}')
    assert spec == reference_specs()[0][1]
    with pytest.raises(SpecValidationError):
        import_spec({"n_conv": 3, "base_maps": 16, "n_down": 3, "q": [1, 1, 1], "dropout": 0.5})


@settings(max_examples=100, deadline=None)
@given(specs)
def test_spec_json_round_trip(spec):
    assert import_spec(json.dumps(export_spec(spec))) == spec


def test_default_candidates_cover_reference_models():
    candidates = enumerate_candidates()
    assert len(candidates) == len(set(candidates))
    for _, spec, _ in reference_specs():
        assert spec in candidates
    assert all(isinstance(c, CnnSpec) for c in candidates)


def test_enumeration_respects_mac_budget():
    constraints = CandidateConstraints(base_maps=(16,), n_down=(3,), max_per_section=2, max_macs=10_000_000)
    candidates = enumerate_candidates(constraints)
    assert candidates
    assert all(spec_macs(c) <= 10_000_000 for c in candidates)
    with pytest.raises(InputError):
        enumerate_candidates(CandidateConstraints(base_maps=(16,), n_down=(6,)))


def test_bundled_table_matches_generated_table():
    bundled = load_bundled_table()
    generated = parse_spec_table(reference_document())
    assert [(e.name, e.spec, e.chi) for e in bundled] == [(e.name, e.spec, e.chi) for e in generated]
    assert [e.chi for e in bundled] == [5.41, 5.44, 6.04, 6.12, 6.34, 6.53]


def test_spec_table_reports_item_path():
    with pytest.raises(SpecValidationError, match="1.spec"):
        parse_spec_table([reference_document()[0], {"name": "bad", "spec": {"n_conv": 1}}])


def test_layers_csv(tmp_path):
    path = tmp_path / "layers.csv"
    write_layers_csv(str(path), expand_layers(reference_specs()[0][1]))
    lines = path.read_text().splitlines()
    assert lines[0] == "kind,in_ch,out_ch,in_side,out_side,stride,macs,params"
    assert lines[1] == "conv,3,16,52,52,1,1168128,448"
    assert len(lines) == 1 + 8
