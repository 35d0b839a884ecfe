"""Adaptive per-subband measurement allocation.

Given first/second-order statistics of the absolute wavelet coefficients of
an image, split a global measurement budget M = round(r * n^2) across the
3l+1 subbands of an l-level decomposition:

1. blend a weight W_s = eta * sigma_s + (1 - eta) * mu_s per subband;
2. give the coarse plane its proportional share M_LL = round(W_LL / sum(W) * M),
   capped at Theta = min(floor(cap_fraction * n_LL^2), n_LL^2) — any surplus
   returns to the detail pool;
3. distribute the detail pool proportionally to the subband means alone
   (detail energy, not spread) with largest-remainder rounding, ties broken
   by canonical subband order;
4. apply optional signed bias terms (which must sum to zero), enforce the
   optional per-subband floor, clamp everything into [0, capacity], and
   re-distribute any residue among the subbands that still have headroom.

The result always satisfies sum(M_s) = M exactly.  If every blended weight
is zero (e.g. a constant-zero image) the allocation falls back to weights
proportional to subband size, and the plan records that it did.

Worked example: n = 8, one level, rate 1/4, so M = round(64/4) = 16.
Absolute-coefficient means (8.0, 0.5, 0.5, 0.5) for (LL, HL, LH, HH) with
zero spread give P_LL = 8/9.5 = 16/19, so M_LL = round(16 * 16/19) =
round(13.47) = 13; the remaining 3 measurements split one apiece over the
equal detail means.  Final counts: (13, 1, 1, 1).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import floor

import numpy as np

from .errors import InfeasiblePlanError, PlanError
from .wavelet import ORIENT_LL, SubbandId, canonical_subbands, subband_side

DEFAULT_ETA = 0.5
DEFAULT_CAP_FRACTION = 1.0


@dataclass(frozen=True)
class AllocationConfig:
    """Tuning knobs for the allocation procedure."""

    eta: float = DEFAULT_ETA
    cap_fraction: float = DEFAULT_CAP_FRACTION
    bias: dict = field(default_factory=dict)  # SubbandId -> signed int
    min_per_subband: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise PlanError(f"eta must be in [0, 1], got {self.eta}")
        if not 0.0 < self.cap_fraction <= 1.0:
            raise PlanError(f"cap_fraction must be in (0, 1], got {self.cap_fraction}")
        if self.min_per_subband < 0:
            raise PlanError(f"min_per_subband must be >= 0, got {self.min_per_subband}")
        if self.bias and sum(self.bias.values()) != 0:
            raise PlanError("bias terms must sum to zero")


@dataclass
class SubbandStats:
    """Mean and standard deviation of |coefficient| per subband."""

    block_size: int
    levels: int
    mu: dict  # SubbandId -> float
    sigma: dict  # SubbandId -> float


def subband_stats(pyramids):
    """Pool |coefficient| statistics over all blocks of an image.

    Every pyramid must share the same (block size, levels) geometry.  The
    mean gauges subband energy, the standard deviation its spread; both are
    taken over the absolute values, pooled across blocks.
    """
    if not pyramids:
        raise ValueError("need at least one pyramid to compute statistics")
    n = pyramids[0].block_size
    levels = pyramids[0].levels
    for pyr in pyramids:
        if pyr.block_size != n or pyr.levels != levels:
            raise ValueError("pyramids have inconsistent geometry")
    mu = {}
    sigma = {}
    for sid in canonical_subbands(levels):
        pooled = np.concatenate(
            [np.abs(pyr.planes[sid]).ravel() for pyr in pyramids]
        )
        mu[sid] = float(np.mean(pooled))
        sigma[sid] = float(np.std(pooled))
    return SubbandStats(n, levels, mu, sigma)


@dataclass(frozen=True)
class MeasurementPlan:
    """How many measurements each subband receives."""

    block_size: int
    levels: int
    rate: Fraction
    total: int
    counts: dict  # SubbandId -> int, all 3l+1 subbands present
    operator_seed: int
    degenerate_fallback: bool = False
    rows_orthonormalized: bool = True

    def validate(self):
        n, levels = self.block_size, self.levels
        if not 0 < self.rate <= 1:
            raise PlanError(f"rate must be in (0, 1], got {self.rate}")
        expected = canonical_subbands(levels)
        if set(self.counts) != set(expected):
            raise PlanError("plan does not cover the canonical subband set")
        if sum(self.counts.values()) != self.total:
            raise PlanError("per-subband counts do not sum to the total budget")
        if self.total != measurement_budget(self.rate, n):
            raise PlanError("total budget does not match round(rate * n^2)")
        for sid in expected:
            cap = subband_side(n, sid.level) ** 2
            m = self.counts[sid]
            if not 0 <= m <= cap:
                raise PlanError(f"count {m} for {sid} outside [0, {cap}]")
        return self


def measurement_budget(rate, block_size):
    """Total measurements per block: round(rate * n^2), half away from zero."""
    rate = Fraction(rate)
    num, den = rate.numerator, rate.denominator
    return (2 * num * block_size * block_size + den) // (2 * den)


def _largest_remainder(budget, weights, caps):
    """Integer split of ``budget`` proportional to ``weights`` under ``caps``.

    Classic largest-remainder rounding, with saturation handled by repeated
    passes over the subbands that still have headroom.  Remainder ties go to
    the earliest index (canonical order).  All-zero weights fall back to
    headroom-proportional shares.
    """
    k = len(weights)
    alloc = [0] * k
    if budget > sum(caps):
        raise InfeasiblePlanError(
            f"budget {budget} exceeds total capacity {sum(caps)}"
        )
    while budget > 0:
        active = [i for i in range(k) if alloc[i] < caps[i]]
        if not active:
            raise InfeasiblePlanError("no headroom left while budget remains")
        w = [weights[i] for i in active]
        if sum(w) <= 0.0:
            w = [float(caps[i] - alloc[i]) for i in active]
        wsum = sum(w)
        shares = [budget * wi / wsum for wi in w]
        gave = 0
        fracs = []
        for pos, i in enumerate(active):
            base = min(int(floor(shares[pos])), caps[i] - alloc[i])
            alloc[i] += base
            gave += base
            if alloc[i] < caps[i]:
                fracs.append((-(shares[pos] - floor(shares[pos])), pos, i))
        budget -= gave
        if budget > 0:
            fracs.sort()
            for _, _, i in fracs:
                if budget == 0:
                    break
                alloc[i] += 1
                budget -= 1
        # Any budget still left means some shares saturated; loop again.
    return alloc


def allocate_measurements(stats, block_size, levels, rate, config=None,
                          operator_seed=0):
    """Run the allocation procedure; see the module docstring for the steps."""
    if config is None:
        config = AllocationConfig()
    if stats.block_size != block_size or stats.levels != levels:
        raise PlanError("statistics geometry does not match the requested plan")
    rate = Fraction(rate)
    if not 0 < rate <= 1:
        raise PlanError(f"rate must be in (0, 1], got {rate}")

    subs = canonical_subbands(levels)
    ll_id = subs[0]
    hf_ids = subs[1:]
    caps = {sid: subband_side(block_size, sid.level) ** 2 for sid in subs}
    total = measurement_budget(rate, block_size)

    for sid in subs:
        m, s = stats.mu.get(sid), stats.sigma.get(sid)
        if m is None or s is None:
            raise PlanError(f"statistics missing subband {sid}")
        if not (np.isfinite(m) and np.isfinite(s) and m >= 0 and s >= 0):
            raise PlanError(f"invalid statistics for {sid}: mu={m} sigma={s}")

    weights = {
        sid: config.eta * stats.sigma[sid] + (1.0 - config.eta) * stats.mu[sid]
        for sid in subs
    }
    degenerate = sum(weights.values()) <= 0.0
    if degenerate:
        # No usable signal statistics: weigh subbands by their size instead.
        weights = {sid: float(caps[sid]) for sid in subs}

    theta_cap = min(int(floor(config.cap_fraction * caps[ll_id])), caps[ll_id])

    w_total = sum(weights.values())
    p_ll = weights[ll_id] / w_total
    m_ll = int(floor(p_ll * total + 0.5))  # round half up
    m_ll = min(m_ll, theta_cap)

    hf_budget = total - m_ll
    hf_caps = [caps[sid] for sid in hf_ids]
    if hf_budget > sum(hf_caps):
        # Theta pinned the coarse plane so low the details cannot absorb the rest.
        raise InfeasiblePlanError(
            f"budget {total} infeasible: coarse cap {theta_cap} leaves "
            f"{hf_budget} for details with capacity {sum(hf_caps)}"
        )
    hf_mu = [stats.mu[sid] for sid in hf_ids]
    if not degenerate and sum(hf_mu) <= 0.0 and hf_budget > 0:
        degenerate = True
        hf_mu = [float(c) for c in hf_caps]
    hf_counts = _largest_remainder(hf_budget, hf_mu, hf_caps)

    counts = {ll_id: m_ll}
    counts.update(dict(zip(hf_ids, hf_counts)))

    if config.bias:
        for sid, b in config.bias.items():
            if sid not in counts:
                raise PlanError(f"bias names unknown subband {sid}")
            counts[sid] += int(b)

    # Settle: clamp into [floor, cap] and push the residue to subbands with
    # headroom, proportionally to the blended weights.
    eff_caps = {sid: (theta_cap if sid == ll_id else caps[sid]) for sid in subs}
    floors = {sid: min(config.min_per_subband, eff_caps[sid]) for sid in subs}
    if sum(floors.values()) > total or total > sum(eff_caps.values()):
        raise InfeasiblePlanError(
            "budget cannot satisfy the per-subband floors and caps"
        )
    for sid in subs:
        counts[sid] = min(max(counts[sid], floors[sid]), eff_caps[sid])
    deficit = total - sum(counts.values())
    if deficit > 0:
        order = [sid for sid in subs if counts[sid] < eff_caps[sid]]
        extra = _largest_remainder(
            deficit,
            [weights[sid] for sid in order],
            [eff_caps[sid] - counts[sid] for sid in order],
        )
        for sid, e in zip(order, extra):
            counts[sid] += e
    elif deficit < 0:
        # Take the excess back proportionally to how far each subband sits
        # above its floor, so the trim cannot undershoot anybody's floor.
        order = [sid for sid in subs if counts[sid] > floors[sid]]
        slack = [counts[sid] - floors[sid] for sid in order]
        trim = _largest_remainder(-deficit, [float(s) for s in slack], slack)
        for sid, t in zip(order, trim):
            counts[sid] -= t

    plan = MeasurementPlan(
        block_size=block_size,
        levels=levels,
        rate=rate,
        total=total,
        counts=counts,
        operator_seed=int(operator_seed) & ((1 << 64) - 1),
        degenerate_fallback=degenerate,
    )
    return plan.validate()
