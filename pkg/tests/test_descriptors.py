import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import reference
from conftest import translated_sequence
from encost import descriptors as D
from encost.errors import DegenerateInputError, DomainError, EmptyInputError
from encost.y4m import from_bytes, write_y4m

E = math.e


def const(c, shape=(64, 64), n=1):
    return [np.full(shape, c, dtype=np.uint8) for _ in range(n)]


# --- Sobel / SI ---------------------------------------------------------

def test_sobel_constant_is_zero():
    assert np.all(D.sobel_magnitude(const(77, (5, 7))[0]) == 0)


def test_sobel_vertical_step():
    delta = 10
    x = np.zeros((6, 8))
    x[:, 4:] = delta
    mag = D.sobel_magnitude(x)
    # the two columns either side of the step see [0,0,delta] / [0,delta,delta]
    np.testing.assert_array_equal(mag[:, 3], 4 * delta)
    np.testing.assert_array_equal(mag[:, 4], 4 * delta)
    np.testing.assert_array_equal(mag[:, [0, 1, 2, 5, 6, 7]], 0)


def test_sobel_offset_invariant(rng):
    x = rng.integers(0, 200, (9, 11))
    np.testing.assert_array_equal(D.sobel_magnitude(x), D.sobel_magnitude(x + 55))


def test_sobel_too_small():
    with pytest.raises(DegenerateInputError):
        D.sobel_magnitude(np.zeros((2, 5)))


def test_si_constant_sequence():
    assert D.spatial_information(const(40, n=3)) == 0


def test_si_rms_of_magnitudes(monkeypatch):
    monkeypatch.setattr(D, "sobel_magnitude", lambda x: np.array([[3.0, 4.0], [0.0, 0.0]]))
    assert D.spatial_information([np.zeros((2, 2))]) == pytest.approx(2.5, abs=0)


def test_si_repeated_frame(rng):
    f = rng.integers(0, 256, (32, 32)).astype(np.uint8)
    assert D.spatial_information([f, f]) == D.spatial_information([f])


def test_si_max_aggregate(rng):
    frames = [rng.integers(0, 256, (16, 16)).astype(np.uint8), const(3, (16, 16))[0]]
    per = [reference.rms(reference.sobel_magnitude(f)) for f in frames]
    assert D.spatial_information(frames, "max") == pytest.approx(max(per), rel=1e-12)
    assert D.spatial_information(frames) == pytest.approx(sum(per) / 2, rel=1e-12)


def test_empty_stream():
    with pytest.raises(EmptyInputError):
        D.spatial_information([])
    with pytest.raises(EmptyInputError):
        D.temporal_information([])


# --- TI -------------------------------------------------------------------

def test_ti_static():
    assert D.temporal_information(const(90, n=4)) == 0


def test_ti_constant_difference():
    assert D.temporal_information(const(10) + const(12)) == 2.0


def test_ti_mean_of_pairs():
    # pair RMS values 1 and 3
    assert D.temporal_information(const(0) + const(1) + const(4)) == 2.0


def test_ti_single_frame_is_zero(rng):
    assert D.temporal_information([rng.integers(0, 256, (8, 8))]) == 0.0


# --- DCT texture ------------------------------------------------------------

def test_reference_basis_matches_direct_dct(rng):
    block = rng.random((8, 8))
    basis = reference.dct_basis(8)
    np.testing.assert_allclose(basis @ block @ basis.T, reference.dct2_direct(block.tolist()),
                               rtol=0, atol=1e-12)


@pytest.mark.parametrize("c", [1, 100, 255])
def test_block_texture_constant_block(c):
    frame = const(c)[0]
    # only the DC coefficient survives: w*c, weighted by exp(|0 - 1|)
    assert D.block_texture(frame, 0) == pytest.approx(E * 32 * c, rel=1e-12)


def test_block_texture_zero_and_nonnegative(rng):
    assert D.block_texture(const(0)[0], 3) == 0
    x = rng.integers(0, 256, (64, 64))
    assert all(D.block_texture(x, k) >= 0 for k in range(4))


def test_block_texture_index_error():
    with pytest.raises(IndexError):
        D.block_texture(const(0)[0], 4)


@pytest.mark.parametrize("w", [16, 32, 64])
def test_block_textures_match_reference(rng, w):
    x = rng.integers(0, 256, (64, 128))
    spec = D.BlockGridSpec(w)
    np.testing.assert_allclose(D.block_textures(x, spec), reference.textures(x, w), rtol=1e-11)
    assert D.block_texture(x, 1, spec) == pytest.approx(reference.textures(x, w)[1], rel=1e-11)


def test_block_grid_spec_validation():
    with pytest.raises(DomainError):
        D.BlockGridSpec(8)
    with pytest.raises(DomainError):
        D.BlockGridSpec(32, 32)


# --- VCA spatial / temporal ------------------------------------------------------

def test_vca_spatial_zero():
    assert D.vca_spatial(const(0, n=2)) == 0


def test_vca_spatial_constant():
    c = 50
    assert D.vca_spatial(const(c, (96, 64), 3)) == pytest.approx(E * c / 32, rel=1e-12)


def test_vca_spatial_partial_blocks_dropped():
    x = np.zeros((70, 40))
    x[:32, :32] = 10
    x[64:, :] = 255  # lies in the partial row only
    assert D.vca_spatial([x]) == pytest.approx(E * 10 / 32 / 2, rel=1e-12)


def test_vca_spatial_repeat_invariant(rng):
    frames = [rng.integers(0, 256, (64, 64)) for _ in range(3)]
    assert D.vca_spatial(frames) == D.vca_spatial(frames + frames)


def test_vca_spatial_too_small():
    with pytest.raises(DegenerateInputError):
        D.vca_spatial([np.zeros((31, 64))])


def test_vca_temporal_static(rng):
    f = rng.integers(0, 256, (64, 64))
    assert D.vca_temporal([f, f, f]) == 0


def test_vca_temporal_alternating():
    c = 80
    frames = const(0) + const(c) + const(0) + const(c)
    assert D.vca_temporal(frames) == pytest.approx(E * c / 32, rel=1e-12)


# --- block variance -------------------------------------------------------------

def test_block_variance_constant():
    assert D.block_variance(const(200, (128, 64), 2)) == 0


def test_block_variance_two_level():
    x = np.zeros((64, 64), np.uint8)
    x[:, 32:] = 255
    assert D.block_variance([x]) == pytest.approx(16256.25 / 64 ** 2, rel=1e-15)


def test_block_variance_shift_invariant(rng):
    x = rng.integers(0, 150, (64, 128))
    assert D.block_variance([x]) == D.block_variance([x + 100])


def test_block_variance_too_small():
    with pytest.raises(DegenerateInputError):
        D.block_variance([np.zeros((63, 200))])


# --- optical flow ------------------------------------------------------------------

def test_flow_static(rng):
    f = rng.integers(0, 256, (64, 64)).astype(np.uint8)
    assert D.optical_flow_displacement([f] * 5) == 0


def test_flow_pair_recovers_translation():
    frames = translated_sequence(2, size=128)
    u, v = D.flow_components(frames[0], frames[1])
    assert u == pytest.approx(2.0, rel=0.2)
    assert v < 0.2


def test_flow_normalised_by_frame_count():
    frames = translated_sequence(4, size=128)
    pairs = [sum(D.flow_components(a, b)) for a, b in zip(frames, frames[1:])]
    assert D.optical_flow_displacement(frames) == pytest.approx(sum(pairs) / 4, rel=1e-12)


# --- ultrafast -------------------------------------------------------------------

def test_ultrafast():
    assert D.ultrafast_complexity(2.0, 100, 100, 10) == pytest.approx(0.02)
    assert D.ultrafast_complexity(1.0, 10, 10, 10) == 1.0
    with pytest.raises(DomainError):
        D.ultrafast_complexity(0.0, 100, 100, 10)
    with pytest.raises(DomainError):
        D.ultrafast_complexity(1.0, 100, 100, 0)


# --- orchestration -------------------------------------------------------------------

def test_analyze_constant_clip():
    c = 100
    ds = D.analyze(const(c, n=10), sequence_id="flat")
    assert ds.frame_count == 10 and (ds.width, ds.height) == (64, 64)
    assert ds.c_s_si == ds.c_t_ti == ds.c_s_var == ds.c_t_vca == ds.c_t_flow == 0
    assert ds.c_s_vca == pytest.approx(E * c / 32, rel=1e-12)
    assert ds.c_ultrafast is None


def test_analyze_selection_and_ultrafast():
    ds = D.analyze(const(5, n=2), which=("si", "ti"), ultrafast_time=4.096)
    assert ds.c_t_flow is None and ds.c_s_vca is None
    assert ds.c_s_si == 0
    assert ds.c_ultrafast == pytest.approx(4.096 * 1000 / (64 * 64 * 2))
    assert set(ds.to_dict()) >= {"si", "ti", "ultrafast"}
    assert "flow" not in ds.to_dict()


def test_analyze_error_names_descriptor():
    with pytest.raises(DegenerateInputError, match="var"):
        D.analyze(const(5, (48, 48)), which=("si", "var"))


def test_analyze_empty():
    with pytest.raises(EmptyInputError):
        D.analyze([])


def test_analyze_from_y4m(tmp_path, rng):
    planes = [rng.integers(0, 256, (64, 96)).astype(np.uint8) for _ in range(3)]
    path = tmp_path / "c.y4m"
    write_y4m(path, planes)
    with open(path, "rb") as fh:
        ds = D.analyze(from_bytes(fh.read()), which=("si", "vca_spatial"))
    assert ds.c_s_si == pytest.approx(reference.si(planes), rel=1e-12)


def test_descriptor_set_round_trip():
    ds = D.analyze(const(9, n=2), which=("si", "var"), sequence_id="s")
    back = D.DescriptorSet.from_dict(ds.to_dict())
    assert back == ds


def test_matches_naive_reference(rng):
    frames = [rng.integers(0, 256, (64, 64)).astype(np.uint8) for _ in range(2)]
    ds = D.analyze(frames, which=("si", "ti", "vca_spatial", "vca_temporal", "var"))
    assert ds.c_s_si == pytest.approx(reference.si(frames), rel=1e-9)
    assert ds.c_t_ti == pytest.approx(reference.ti(frames), rel=1e-9)
    assert ds.c_s_vca == pytest.approx(reference.vca_spatial(frames), rel=1e-9)
    assert ds.c_t_vca == pytest.approx(reference.vca_temporal(frames), rel=1e-9)
    assert ds.c_s_var == pytest.approx(reference.block_variance(frames), rel=1e-9)


# --- properties ------------------------------------------------------------------

frame_lists = st.integers(1, 3).flatmap(
    lambda n: st.lists(arrays(np.uint8, (64, 64), elements=st.integers(0, 200)),
                       min_size=n, max_size=n))
NO_FLOW = ("si", "ti", "vca_spatial", "vca_temporal", "var")


@settings(max_examples=20, deadline=None)
@given(frame_lists)
def test_all_nonnegative(frames):
    ds = D.analyze(frames)
    for name in D.ALL_DESCRIPTORS:
        assert ds.get(name) >= 0


@settings(max_examples=20, deadline=None)
@given(frame_lists, st.integers(1, 55))
def test_dc_shift_invariance(frames, shift):
    a = D.analyze(frames, which=NO_FLOW)
    b = D.analyze([f + np.uint8(shift) for f in frames], which=NO_FLOW)
    assert (a.c_s_si, a.c_t_ti, a.c_s_var) == (b.c_s_si, b.c_t_ti, b.c_s_var)
    assert b.c_t_vca == pytest.approx(a.c_t_vca, rel=1e-9, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(frame_lists, st.randoms(use_true_random=False))
def test_permutation_invariance(frames, rnd):
    shuffled = list(frames)
    rnd.shuffle(shuffled)
    a = D.analyze(frames, which=("si", "vca_spatial", "var"))
    b = D.analyze(shuffled, which=("si", "vca_spatial", "var"))
    assert (a.c_s_si, a.c_s_vca, a.c_s_var) == (b.c_s_si, b.c_s_vca, b.c_s_var)


@settings(max_examples=10, deadline=None)
@given(arrays(np.uint8, (64, 64)), st.integers(2, 5))
def test_repeated_frames_have_zero_temporal(frame, n):
    ds = D.analyze([frame] * n)
    assert ds.c_t_ti == ds.c_t_vca == ds.c_t_flow == 0
