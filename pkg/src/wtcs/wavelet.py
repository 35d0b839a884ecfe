"""Orthonormal 2-D Haar transform, subband bookkeeping, and tree groups.

A square block of side ``n`` (a power of two) is decomposed over ``levels``
dyadic scales.  Each analysis level maps a plane to four half-size planes::

    ll = (a + b + c + d) / 2      hl = (a - b + c - d) / 2
    lh = (a + b - c - d) / 2      hh = (a - b - c + d) / 2

where a, b, c, d are the top-left, top-right, bottom-left, bottom-right
pixels of each 2x2 cell.  The transform matrix is symmetric and orthogonal,
so synthesis applies the same butterfly and energy is preserved exactly.

Canonical subband order: the coarse approximation first, then detail planes
from coarsest to finest, HL before LH before HH within each level.  The
flattened coefficient vector concatenates the planes row-major in that order.

A tree group ties one detail coefficient at level i >= 2 to its four spatial
children at level i - 1 in the same orientation.  Group indices refer to the
detail-only part of the flattened vector (the coarse plane is excluded).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import backend
from .errors import DimensionError

ORIENT_LL = "LL"
ORIENT_HL = "HL"
ORIENT_LH = "LH"
ORIENT_HH = "HH"

#: Orientation -> small integer, used for seed derivation and wire layout.
ORIENT_CODES = {ORIENT_LL: 0, ORIENT_HL: 1, ORIENT_LH: 2, ORIENT_HH: 3}

GROUP_SIZE = 5  # one parent plus its four children


@dataclass(frozen=True)
class SubbandId:
    """Identifies one subband: decomposition level and orientation."""

    level: int
    orientation: str

    def __post_init__(self):
        if self.orientation not in ORIENT_CODES:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")

    def __str__(self):
        return f"{self.orientation}{self.level}"

    @classmethod
    def parse(cls, text):
        """Inverse of ``str``: 'HL2' -> SubbandId(2, 'HL')."""
        return cls(int(text[2:]), text[:2])


@lru_cache(maxsize=None)
def canonical_subbands(levels):
    """Subband identifiers in canonical order for an l-level decomposition."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    out = [SubbandId(levels, ORIENT_LL)]
    for lev in range(levels, 0, -1):
        out.append(SubbandId(lev, ORIENT_HL))
        out.append(SubbandId(lev, ORIENT_LH))
        out.append(SubbandId(lev, ORIENT_HH))
    return tuple(out)


def subband_side(block_size, level):
    """Side length of a subband plane at the given level."""
    return block_size >> level


def _check_block_geometry(block_size, levels):
    if block_size < 2 or (block_size & (block_size - 1)) != 0:
        raise DimensionError(f"block size must be a power of two >= 2, got {block_size}")
    if levels < 1:
        raise DimensionError(f"levels must be >= 1, got {levels}")
    if block_size % (1 << levels) != 0:
        raise DimensionError(
            f"block size {block_size} is not divisible by 2^levels = {1 << levels}"
        )


@dataclass
class SubbandPyramid:
    """Multilevel decomposition of one block: a plane per subband."""

    block_size: int
    levels: int
    planes: dict  # SubbandId -> (side, side) float64 array

    def plane(self, sid):
        return self.planes[sid]

    def copy(self):
        return SubbandPyramid(
            self.block_size,
            self.levels,
            {sid: p.copy() for sid, p in self.planes.items()},
        )


def dwt_single_level(plane):
    """One analysis level; returns (ll, hl, lh, hh) quarter planes."""
    plane = np.ascontiguousarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.shape[0] != plane.shape[1]:
        raise DimensionError(f"expected a square 2-D plane, got shape {plane.shape}")
    side = plane.shape[0]
    if side < 2 or side % 2 != 0:
        raise DimensionError(f"plane side must be even and >= 2, got {side}")
    return backend.dwt_level(plane)


def idwt_single_level(ll, hl, lh, hh):
    """One synthesis level; exact inverse of :func:`dwt_single_level`."""
    parts = [np.ascontiguousarray(p, dtype=np.float64) for p in (ll, hl, lh, hh)]
    shape = parts[0].shape
    if any(p.shape != shape for p in parts) or len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionError("subband planes must be square and identically shaped")
    return backend.idwt_level(*parts)


def dwt_multilevel(block, levels):
    """Full decomposition of a square block into a SubbandPyramid."""
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise DimensionError(f"expected a square block, got shape {block.shape}")
    n = block.shape[0]
    _check_block_geometry(n, levels)
    planes = {}
    current = block
    for lev in range(1, levels + 1):
        ll, hl, lh, hh = dwt_single_level(current)
        planes[SubbandId(lev, ORIENT_HL)] = hl
        planes[SubbandId(lev, ORIENT_LH)] = lh
        planes[SubbandId(lev, ORIENT_HH)] = hh
        current = ll
    planes[SubbandId(levels, ORIENT_LL)] = current
    return SubbandPyramid(n, levels, planes)


def idwt_multilevel(pyramid):
    """Reassemble the spatial block from a SubbandPyramid."""
    n, levels = pyramid.block_size, pyramid.levels
    _check_block_geometry(n, levels)
    expected = set(canonical_subbands(levels))
    if set(pyramid.planes) != expected:
        raise DimensionError("pyramid does not contain the expected subband set")
    current = pyramid.planes[SubbandId(levels, ORIENT_LL)]
    for lev in range(levels, 0, -1):
        side = subband_side(n, lev)
        if current.shape != (side, side):
            raise DimensionError(
                f"plane at level {lev} has shape {current.shape}, expected {(side, side)}"
            )
        current = idwt_single_level(
            current,
            pyramid.planes[SubbandId(lev, ORIENT_HL)],
            pyramid.planes[SubbandId(lev, ORIENT_LH)],
            pyramid.planes[SubbandId(lev, ORIENT_HH)],
        )
    return current


@lru_cache(maxsize=None)
def subband_slices(block_size, levels):
    """Canonical (SubbandId, slice) layout of the flattened vector."""
    _check_block_geometry(block_size, levels)
    out = []
    offset = 0
    for sid in canonical_subbands(levels):
        size = subband_side(block_size, sid.level) ** 2
        out.append((sid, slice(offset, offset + size)))
        offset += size
    assert offset == block_size * block_size
    return tuple(out)


def coarse_size(block_size, levels):
    """Number of coefficients in the coarse approximation plane."""
    return subband_side(block_size, levels) ** 2


def flatten(pyramid):
    """Concatenate subband planes row-major in canonical order."""
    n, levels = pyramid.block_size, pyramid.levels
    vec = np.empty(n * n, dtype=np.float64)
    for sid, sl in subband_slices(n, levels):
        plane = pyramid.planes[sid]
        side = subband_side(n, sid.level)
        if plane.shape != (side, side):
            raise DimensionError(
                f"plane {sid} has shape {plane.shape}, expected {(side, side)}"
            )
        vec[sl] = plane.ravel()
    return vec


def unflatten(vec, block_size, levels):
    """Inverse of :func:`flatten`."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (block_size * block_size,):
        raise DimensionError(
            f"expected a vector of length {block_size * block_size}, got shape {vec.shape}"
        )
    planes = {}
    for sid, sl in subband_slices(block_size, levels):
        side = subband_side(block_size, sid.level)
        planes[sid] = vec[sl].reshape(side, side).copy()
    return SubbandPyramid(block_size, levels, planes)


@dataclass(frozen=True)
class TreeGroups:
    """Parent-child coefficient groups over the detail subbands.

    ``indices`` is (n_groups, 5) int64 into the detail-only flat vector
    (i.e. the flattened vector with the coarse plane stripped); column 0 is
    the parent, columns 1..4 its children in row-major spatial order.
    ``parent_levels`` records each group's parent decomposition level.
    """

    block_size: int
    levels: int
    indices: np.ndarray
    parent_levels: np.ndarray

    @property
    def n_groups(self):
        return self.indices.shape[0]

    def detail_length(self):
        n = self.block_size
        return n * n - coarse_size(n, self.levels)


@lru_cache(maxsize=None)
def build_tree_groups(block_size, levels):
    """Enumerate all parent-child groups for the given block geometry.

    Parents live at levels ``levels .. 2``; a one-level decomposition has no
    groups.  For a parent at spatial position (p, q) the children are the
    2x2 cell (2p..2p+1, 2q..2q+1) of the next finer plane in the same
    orientation.  Groups are enumerated coarsest level first, HL/LH/HH
    within a level, parents row-major — matching the canonical subband
    order.
    """
    _check_block_geometry(block_size, levels)
    ll_size = coarse_size(block_size, levels)
    offsets = {
        sid: sl.start - ll_size
        for sid, sl in subband_slices(block_size, levels)
        if sid.orientation != ORIENT_LL
    }
    rows = []
    parent_levels = []
    for lev in range(levels, 1, -1):
        side_p = subband_side(block_size, lev)
        side_c = subband_side(block_size, lev - 1)
        for orient in (ORIENT_HL, ORIENT_LH, ORIENT_HH):
            off_p = offsets[SubbandId(lev, orient)]
            off_c = offsets[SubbandId(lev - 1, orient)]
            for p in range(side_p):
                for q in range(side_p):
                    rows.append(
                        (
                            off_p + p * side_p + q,
                            off_c + (2 * p) * side_c + 2 * q,
                            off_c + (2 * p) * side_c + 2 * q + 1,
                            off_c + (2 * p + 1) * side_c + 2 * q,
                            off_c + (2 * p + 1) * side_c + 2 * q + 1,
                        )
                    )
                    parent_levels.append(lev)
    if rows:
        indices = np.asarray(rows, dtype=np.int64)
    else:
        indices = np.empty((0, GROUP_SIZE), dtype=np.int64)
    return TreeGroups(
        block_size,
        levels,
        indices,
        np.asarray(parent_levels, dtype=np.int64),
    )
