import numpy as np
import pytest

from wtcs.errors import DimensionError
from wtcs.wavelet import (
    SubbandId,
    build_tree_groups,
    canonical_subbands,
    coarse_size,
    dwt_multilevel,
    dwt_single_level,
    flatten,
    idwt_multilevel,
    idwt_single_level,
    subband_side,
    subband_slices,
    unflatten,
)


def test_constant_block_goes_to_ll():
    # 2x2 of ones: LL = 2 (the transform preserves energy, not the mean)
    ll, hl, lh, hh = dwt_single_level(np.ones((2, 2)))
    assert ll[0, 0] == pytest.approx(2.0)
    assert hl[0, 0] == hh[0, 0] == lh[0, 0] == 0.0


def test_single_impulse_spreads_evenly():
    x = np.zeros((2, 2))
    x[0, 0] = 1.0
    ll, hl, lh, hh = dwt_single_level(x)
    assert ll[0, 0] == hl[0, 0] == lh[0, 0] == hh[0, 0] == 0.5


def test_butterfly_signs():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    ll, hl, lh, hh = dwt_single_level(x)
    assert ll[0, 0] == pytest.approx(5.0)          # (1+2+3+4)/2
    assert hl[0, 0] == pytest.approx(-1.0)         # (1-2+3-4)/2
    assert lh[0, 0] == pytest.approx(-2.0)         # (1+2-3-4)/2
    assert hh[0, 0] == pytest.approx(0.0)          # (1-2-3+4)/2


def test_multilevel_constant():
    pyr = dwt_multilevel(np.ones((4, 4)), 2)
    assert pyr.planes[SubbandId(2, "LL")][0, 0] == pytest.approx(4.0)
    for sid in canonical_subbands(2)[1:]:
        assert np.all(pyr.planes[sid] == 0.0)


def test_round_trip_exact(rng):
    for levels in (1, 2, 3):
        x = rng.normal(size=(16, 16))
        back = idwt_multilevel(dwt_multilevel(x, levels))
        assert np.abs(back - x).max() < 1e-12


def test_energy_preserved(rng):
    x = rng.normal(size=(32, 32))
    vec = flatten(dwt_multilevel(x, 3))
    assert np.sum(vec * vec) == pytest.approx(np.sum(x * x), rel=1e-12)


def test_single_level_inverse():
    x = np.random.default_rng(0).normal(size=(8, 8))
    assert np.allclose(idwt_single_level(*dwt_single_level(x)), x, atol=1e-13)


def test_canonical_order():
    order = [str(s) for s in canonical_subbands(2)]
    assert order == ["LL2", "HL2", "LH2", "HH2", "HL1", "LH1", "HH1"]
    assert len(canonical_subbands(3)) == 10


def test_subband_slices_layout():
    layout = subband_slices(8, 2)
    sizes = [sl.stop - sl.start for _, sl in layout]
    assert sizes == [4, 4, 4, 4, 16, 16, 16]
    assert layout[0][1].start == 0
    assert layout[-1][1].stop == 64
    assert coarse_size(8, 2) == 4
    assert subband_side(64, 2) == 16


def test_flatten_round_trip(rng):
    x = rng.normal(size=(16, 16))
    pyr = dwt_multilevel(x, 2)
    vec = flatten(pyr)
    pyr2 = unflatten(vec, 16, 2)
    for sid in canonical_subbands(2):
        assert np.array_equal(pyr.planes[sid], pyr2.planes[sid])


def test_flatten_places_planes_canonically(rng):
    x = rng.normal(size=(8, 8))
    pyr = dwt_multilevel(x, 1)
    vec = flatten(pyr)
    assert np.array_equal(vec[:16], pyr.planes[SubbandId(1, "LL")].ravel())
    assert np.array_equal(vec[16:32], pyr.planes[SubbandId(1, "HL")].ravel())


def test_tree_groups_two_levels_partition_details():
    groups = build_tree_groups(8, 2)
    assert groups.n_groups == 12
    assert groups.indices.shape == (12, 5)
    # every detail coefficient appears exactly once
    flat = np.sort(groups.indices.ravel())
    assert np.array_equal(flat, np.arange(groups.detail_length()))
    assert np.all(groups.parent_levels == 2)


def test_tree_groups_single_level_empty():
    groups = build_tree_groups(8, 1)
    assert groups.n_groups == 0
    assert groups.indices.shape == (0, 5)


def test_tree_groups_three_levels_overlap():
    groups = build_tree_groups(16, 3)
    # parents at levels 3 and 2: 3 orientations x (2*2 + 4*4)
    assert groups.n_groups == 3 * (4 + 16)
    counts = np.bincount(groups.indices.ravel(),
                         minlength=groups.detail_length())
    # level-2 coefficients appear twice (once parent, once child), level-3
    # and level-1 once each
    assert set(counts.tolist()) == {1, 2}
    assert np.sum(counts == 2) == 3 * 16  # the three level-2 planes


def test_tree_group_child_geometry():
    groups = build_tree_groups(8, 2)
    layout = dict(subband_slices(8, 2))
    cs = coarse_size(8, 2)
    hl2 = layout[SubbandId(2, "HL")]
    hl1 = layout[SubbandId(1, "HL")]
    # first group: HL parent at (0,0) -> children (0,0),(0,1),(1,0),(1,1)
    first = groups.indices[0] + cs
    assert first[0] == hl2.start
    side1 = 4
    expect = [hl1.start, hl1.start + 1, hl1.start + side1, hl1.start + side1 + 1]
    assert first[1:].tolist() == expect


@pytest.mark.parametrize("bad", [
    np.ones((3, 3)),     # odd side
    np.ones((4, 6)),     # not square
    np.ones(4),          # not 2-D
])
def test_dwt_rejects_bad_shapes(bad):
    with pytest.raises(DimensionError):
        dwt_single_level(bad)


def test_multilevel_rejects_indivisible():
    with pytest.raises(DimensionError):
        dwt_multilevel(np.ones((12, 12)), 3)  # 12 not divisible by 8
    with pytest.raises(DimensionError):
        dwt_multilevel(np.ones((12, 12)), 1)  # 12 not a power of two


def test_unflatten_rejects_bad_length():
    with pytest.raises(DimensionError):
        unflatten(np.zeros(63), 8, 2)


def test_subband_id_validation():
    with pytest.raises(ValueError):
        SubbandId(0, "LL")
    with pytest.raises(ValueError):
        SubbandId(1, "XX")
    assert SubbandId.parse("HL2") == SubbandId(2, "HL")
