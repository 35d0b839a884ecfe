"""Block partitioning, seeded sampling operators, measurement, initial estimate.

The image is tiled into n x n blocks (mirror-padded at the bottom/right
edges).  Every block shares one set of per-subband sampling matrices: for
subband s with M_s > 0, A_s is an M_s x n_s^2 matrix whose entries are
drawn i.i.d. standard normal from a seeded SplitMix64/Box-Muller stream and
whose rows are then orthonormalized by modified Gram-Schmidt.  Row
orthonormality makes the transpose the exact pseudo-inverse, so the initial
estimate is simply theta_s = A_s^T y_s.

Everything here is bit-reproducible: the stream, the fill order (row-major),
and the Gram-Schmidt sweep are fixed, and all reductions run through numpy's
deterministic pairwise summation rather than BLAS dot products.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .allocation import MeasurementPlan
from .errors import DimensionError, InfeasiblePlanError, OperatorError
from .rng import standard_normals, subband_seed
from .wavelet import (
    canonical_subbands,
    dwt_multilevel,
    flatten,
    idwt_multilevel,
    subband_side,
    subband_slices,
    unflatten,
)

#: Residual 2-norm below which a Gram-Schmidt sweep declares rank deficiency.
#: Generous enough that honest near-collinearity triggers regeneration well
#: before normalization could amplify rounding noise past the 1e-6
#: orthogonality contract.
_RANK_TOL = 1e-6

_MAX_REGEN_ATTEMPTS = 64


@dataclass
class SamplingOperator:
    """Per-subband row-orthonormal sampling matrices for one plan."""

    plan: MeasurementPlan
    matrices: dict  # SubbandId -> (M_s, n_s^2) float64, only for M_s > 0
    seed: int
    rows_orthonormalized: bool = True
    regenerated: dict = field(default_factory=dict)  # SubbandId -> extra attempts


def _orthonormalize_rows(mat):
    """In-place modified Gram-Schmidt on the rows; None if rank deficient.

    Right-looking sweep: as soon as a row is normalized its component is
    removed from all later rows.  Dot products go through np.sum so the
    reduction order is fixed and independent of BLAS threading.
    """
    m = mat.shape[0]
    for i in range(m):
        nrm = float(np.sqrt(np.sum(mat[i] * mat[i])))
        if not nrm > _RANK_TOL:
            return None
        mat[i] /= nrm
        if i + 1 < m:
            coeffs = np.sum(mat[i + 1 :] * mat[i], axis=1)
            mat[i + 1 :] -= coeffs[:, None] * mat[i]
    return mat


def make_operator(plan):
    """Generate the sampling matrices for a plan, bit-reproducibly.

    Each subband draws M_s * n_s^2 normals from its own sub-seeded stream,
    fills the matrix row-major, and orthonormalizes the rows.  In the
    (measure-zero) event of rank deficiency the whole subband is redrawn
    with the sub-seed incremented; the extra attempts are recorded.
    """
    plan.validate()
    matrices = {}
    regenerated = {}
    for sid in canonical_subbands(plan.levels):
        m_s = plan.counts[sid]
        if m_s == 0:
            continue
        cols = subband_side(plan.block_size, sid.level) ** 2
        if m_s > cols:
            raise InfeasiblePlanError(
                f"{sid}: {m_s} measurements exceed dimension {cols}"
            )
        base = subband_seed(plan.operator_seed, sid)
        for attempt in range(_MAX_REGEN_ATTEMPTS):
            raw = standard_normals((base + attempt) & ((1 << 64) - 1), m_s * cols)
            mat = _orthonormalize_rows(raw.reshape(m_s, cols))
            if mat is not None:
                if attempt:
                    regenerated[sid] = attempt
                matrices[sid] = mat
                break
        else:
            raise OperatorError(
                f"{sid}: rank-deficient after {_MAX_REGEN_ATTEMPTS} attempts"
            )
    return SamplingOperator(
        plan=plan,
        matrices=matrices,
        seed=plan.operator_seed,
        rows_orthonormalized=True,
        regenerated=regenerated,
    )


def operator_digest(operator):
    """SHA-256 over the matrices, canonical subband order, row-major f64 LE."""
    h = hashlib.sha256()
    for sid in canonical_subbands(operator.plan.levels):
        mat = operator.matrices.get(sid)
        if mat is not None:
            h.update(np.ascontiguousarray(mat, dtype="<f8").tobytes())
    return h.hexdigest()


def partition_blocks(image, block_size):
    """Tile an image into n x n blocks, mirror-padding the ragged edges.

    Returns a (J, n, n) array in row-major block order,
    J = ceil(H/n) * ceil(W/n).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise DimensionError(f"expected a nonempty 2-D image, got shape {image.shape}")
    h, w = image.shape
    n = block_size
    bh, bw = ceil(h / n), ceil(w / n)
    padded = np.pad(image, ((0, bh * n - h), (0, bw * n - w)), mode="reflect")
    blocks = padded.reshape(bh, n, bw, n).swapaxes(1, 2).reshape(bh * bw, n, n)
    return np.ascontiguousarray(blocks)


def assemble_blocks(blocks, height, width):
    """Inverse of :func:`partition_blocks`: stitch and crop to height x width."""
    blocks = np.asarray(blocks, dtype=np.float64)
    if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
        raise DimensionError(f"expected (J, n, n) blocks, got shape {blocks.shape}")
    n = blocks.shape[1]
    bh, bw = ceil(height / n), ceil(width / n)
    if blocks.shape[0] != bh * bw:
        raise DimensionError(
            f"got {blocks.shape[0]} blocks, expected {bh * bw} for "
            f"{height}x{width} at block size {n}"
        )
    sheet = blocks.reshape(bh, bw, n, n).swapaxes(1, 2).reshape(bh * n, bw * n)
    return sheet[:height, :width].copy()


@dataclass
class MeasurementSet:
    """All measurements of one image under one plan."""

    plan: MeasurementPlan
    height: int
    width: int
    data: dict  # SubbandId -> (J, M_s) float64, only for M_s > 0

    @property
    def n_blocks(self):
        n = self.plan.block_size
        return ceil(self.height / n) * ceil(self.width / n)


def run_blocks(fn, n_blocks, threads=1):
    """Apply fn(j) for every block index, optionally on a thread pool.

    fn must write its result into a preallocated slot; the schedule never
    affects values, only wall-clock time.
    """
    if threads is None or threads <= 1 or n_blocks <= 1:
        for j in range(n_blocks):
            fn(j)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, range(n_blocks)))


def sample_image(image, plan, operator, threads=1):
    """Measure every block: y_s = A_s . vec(theta_s) per subband."""
    if operator.plan is not plan and operator.plan != plan:
        raise DimensionError("operator was built for a different plan")
    n, levels = plan.block_size, plan.levels
    blocks = partition_blocks(image, n)
    j_total = blocks.shape[0]
    slices = subband_slices(n, levels)
    data = {
        sid: np.empty((j_total, plan.counts[sid]), dtype=np.float64)
        for sid, _ in slices
        if plan.counts[sid] > 0
    }

    def work(j):
        theta = flatten(dwt_multilevel(blocks[j], levels))
        for sid, sl in slices:
            if plan.counts[sid] > 0:
                data[sid][j] = operator.matrices[sid] @ theta[sl]

    run_blocks(work, j_total, threads)
    h, w = np.asarray(image).shape
    return MeasurementSet(plan=plan, height=h, width=w, data=data)


def initial_coefficients(measurements, operator, threads=1):
    """Per-block flattened coefficient estimates theta_s = A_s^T y_s.

    Subbands without measurements come back zero-filled.  Returns a
    (J, n^2) array.
    """
    plan = measurements.plan
    n, levels = plan.block_size, plan.levels
    j_total = measurements.n_blocks
    slices = subband_slices(n, levels)
    thetas = np.zeros((j_total, n * n), dtype=np.float64)

    def work(j):
        for sid, sl in slices:
            if plan.counts[sid] > 0:
                thetas[j, sl] = operator.matrices[sid].T @ measurements.data[sid][j]

    run_blocks(work, j_total, threads)
    return thetas


def synthesize_image(thetas, plan, height, width, threads=1):
    """Turn per-block flat coefficients back into an assembled image."""
    n, levels = plan.block_size, plan.levels
    j_total = thetas.shape[0]
    blocks = np.empty((j_total, n, n), dtype=np.float64)

    def work(j):
        blocks[j] = idwt_multilevel(unflatten(thetas[j], n, levels))

    run_blocks(work, j_total, threads)
    return assemble_blocks(blocks, height, width)


def initial_reconstruct(measurements, operator, threads=1):
    """Linear estimate of the image plus its per-block pyramids."""
    plan = measurements.plan
    thetas = initial_coefficients(measurements, operator, threads)
    image = synthesize_image(
        thetas, plan, measurements.height, measurements.width, threads
    )
    pyramids = [
        unflatten(thetas[j], plan.block_size, plan.levels)
        for j in range(thetas.shape[0])
    ]
    return image, pyramids
