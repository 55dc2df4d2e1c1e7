import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longctx.errors import ConfigurationError, InvalidDimensionError, InvalidInputError
from longctx.mrope import (
    DimensionLayout,
    Image,
    Position3D,
    Text,
    Video,
    apply_mrope,
    assign_positions,
    mrope_score,
    parse_span,
)
from longctx.rotary import apply_rotary, make_basis

from oracles import dense_mrope, enumerate_positions


def test_layout_ranges():
    lay = DimensionLayout.for_head_dim(128)
    assert lay.granularity == 8
    assert lay.temporal_blocks == range(0, 16)
    assert lay.height_blocks == range(16, 40)
    assert lay.width_blocks == range(40, 64)
    assert lay.total_blocks == 64
    ids = lay.segment_ids()
    assert list(np.bincount(ids)) == [16, 24, 24]


@pytest.mark.parametrize("head_dim", [8, 24, 100])
def test_layout_requires_multiple_of_16(head_dim):
    with pytest.raises(InvalidDimensionError):
        DimensionLayout.for_head_dim(head_dim)


@pytest.mark.parametrize(
    "spans, expected",
    [
        ([Text(3)], [(0, 0, 0), (1, 1, 1), (2, 2, 2)]),
        ([Image(2, 2)], [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]),
        ([Video(2, 1, 1)], [(0, 0, 0), (1, 0, 0)]),
        ([Text(2), Image(1, 2)], [(0, 0, 0), (1, 1, 1), (2, 2, 2), (2, 2, 3)]),
    ],
)
def test_assign_positions_examples(spans, expected):
    assert assign_positions(spans) == [Position3D(*p) for p in expected]


def _as_tuple(span):
    if isinstance(span, Text):
        return ("text", span.length)
    if isinstance(span, Image):
        return ("image", span.grid_h, span.grid_w)
    return ("video", span.frames, span.grid_h, span.grid_w)


span_strategy = st.one_of(
    st.builds(Text, st.integers(1, 5)),
    st.builds(Image, st.integers(1, 4), st.integers(1, 4)),
    st.builds(Video, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)),
)


@settings(max_examples=200, deadline=None)
@given(st.lists(span_strategy, min_size=1, max_size=6))
def test_assign_positions_matches_enumerator(spans):
    got = assign_positions(spans)
    assert [tuple(p) for p in got] == enumerate_positions([_as_tuple(s) for s in spans])


@settings(max_examples=100, deadline=None)
@given(st.lists(span_strategy, min_size=1, max_size=6))
def test_visual_positions_unique_and_offsets_monotone(spans):
    got = assign_positions(spans)
    start = 0
    prev_max = -1
    for span in spans:
        n = len(enumerate_positions([_as_tuple(span)]))
        chunk = got[start:start + n]
        assert min(min(p) for p in chunk) > prev_max
        if not isinstance(span, Text):
            assert len(set(chunk)) == len(chunk)
        prev_max = max(max(p) for p in chunk)
        start += n


def test_assign_positions_errors():
    with pytest.raises(InvalidInputError):
        assign_positions([])
    with pytest.raises(InvalidInputError):
        assign_positions([Image(0, 2)])


def test_parse_span():
    assert parse_span("text:3") == Text(3)
    assert parse_span("image:2x4") == Image(2, 4)
    assert parse_span("video:5x2x2") == Video(5, 2, 2)
    with pytest.raises(InvalidInputError):
        parse_span("audio:3")
    with pytest.raises(InvalidInputError):
        parse_span("image:2")


def test_apply_mrope_identity_at_origin():
    b = make_basis(32, 10000)
    lay = DimensionLayout.for_head_dim(32)
    v = np.linspace(-1, 1, 32)
    np.testing.assert_array_equal(apply_mrope(b, lay, (0, 0, 0), v), v)


def test_apply_mrope_dense_oracle():
    b = make_basis(16, 10000)
    lay = DimensionLayout(1)
    rng = np.random.default_rng(5)
    for pos in [(1, 2, 3), (7, 0, 4), (100, 250, 3)]:
        v = rng.standard_normal(16)
        np.testing.assert_allclose(apply_mrope(b, lay, pos, v), dense_mrope(b.angles, pos, 1) @ v, atol=1e-13)


def test_apply_mrope_text_is_1d_rope():
    b = make_basis(64, 10000)
    lay = DimensionLayout.for_head_dim(64)
    rng = np.random.default_rng(9)
    for p in assign_positions([Text(40)]):
        v = rng.standard_normal(64)
        np.testing.assert_allclose(apply_mrope(b, lay, p, v), apply_rotary(b, p.i_t, v), atol=1e-12, rtol=0)


def test_apply_mrope_layout_mismatch():
    with pytest.raises(ConfigurationError):
        apply_mrope(make_basis(32, 10000), DimensionLayout(1), (0, 0, 0), np.ones(32))


def test_mrope_score_examples():
    b = make_basis(32, 10000)
    lay = DimensionLayout.for_head_dim(32)
    rng = np.random.default_rng(2)
    q = rng.standard_normal(32)
    q /= np.linalg.norm(q)
    assert mrope_score(b, lay, (4, 5, 6), (4, 5, 6), q, q) == pytest.approx(1.0, abs=1e-14)
    k = rng.standard_normal(32)
    want = (dense_mrope(b.angles, (3, 1, 4), 2) @ q) @ (dense_mrope(b.angles, (1, 5, 9), 2) @ k)
    assert mrope_score(b, lay, (3, 1, 4), (1, 5, 9), q, k) == pytest.approx(want, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    pm=st.tuples(*[st.integers(0, 5000)] * 3),
    pn=st.tuples(*[st.integers(0, 5000)] * 3),
    shift=st.tuples(*[st.integers(0, 10**5)] * 3),
    seed=st.integers(0, 1000),
)
def test_mrope_score_relative_invariance(pm, pn, shift, seed):
    b = make_basis(48, 10000)
    lay = DimensionLayout.for_head_dim(48)
    rng = np.random.default_rng(seed)
    q, k = rng.standard_normal((2, 48))
    s1 = mrope_score(b, lay, pm, pn, q, k)
    s2 = mrope_score(
        b, lay, tuple(a + c for a, c in zip(pm, shift)), tuple(a + c for a, c in zip(pn, shift)), q, k
    )
    assert abs(s1 - s2) < 1e-9
