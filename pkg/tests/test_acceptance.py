"""Acceptance gate: one test per shipping criterion, tolerances pinned inline.

Each test prints a single ``ACCEPTANCE <n> PASS`` line with the measured
numbers (visible with ``pytest -s``); under ``pytest -v`` the per-test
PASSED/FAILED status doubles as the pass/fail line.  Runtime budgets are
asserted inside the tests themselves.
"""

import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from wtcs.allocation import (
    AllocationConfig,
    SubbandStats,
    allocate_measurements,
    measurement_budget,
    subband_stats,
)
from wtcs.codec import decode, encode, quantize, write_image
from wtcs.errors import InfeasiblePlanError
from wtcs.metrics import psnr, ssim
from wtcs.sampling import (
    initial_reconstruct,
    make_operator,
    operator_digest,
    partition_blocks,
    sample_image,
)
from wtcs.solver import (
    SolverConfig,
    gradient_step,
    group_shrink,
    objective,
    reconstruct,
    soft_threshold,
)
from wtcs.wavelet import (
    build_tree_groups,
    canonical_subbands,
    coarse_size,
    dwt_multilevel,
    flatten,
    idwt_multilevel,
    subband_slices,
    unflatten,
)

CAMERA_PGM = Path(__file__).resolve().parent / "data" / "camera256.pgm"
REPO_ROOT = Path(__file__).resolve().parents[1]


def test_criterion_01_wavelet_round_trip():
    gen = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_err = 0.0
    worst_energy = 0.0
    for levels in (1, 2, 3):
        for _ in range(100):
            block = gen.normal(size=(64, 64))
            pyr = dwt_multilevel(block, levels)
            back = idwt_multilevel(pyr)
            worst_err = max(worst_err, float(np.abs(back - block).max()))
            e_img = float(np.sum(block * block))
            e_coef = float(np.sum(flatten(pyr) ** 2))
            worst_energy = max(worst_energy, abs(e_coef - e_img) / e_img)
    dt = time.perf_counter() - t0
    assert worst_err < 1e-6
    assert worst_energy < 1e-9
    assert dt < 1.0
    print(f"ACCEPTANCE 1 PASS: 100 blocks x levels 1..3, max abs err "
          f"{worst_err:.3e}, energy rel err {worst_energy:.3e}, {dt:.2f}s")


def test_criterion_02_allocation_budget():
    gen = np.random.default_rng(202)
    t0 = time.perf_counter()
    infeasible = 0
    for _ in range(10_000):
        n = int(gen.choice([8, 16, 32]))
        levels = int(gen.integers(1, 4))
        subs = canonical_subbands(levels)
        stats = SubbandStats(
            n, levels,
            {s: float(gen.uniform(0.0, 5.0)) for s in subs},
            {s: float(gen.uniform(0.0, 2.0)) for s in subs},
        )
        num = int(gen.integers(1, 64))
        den = int(gen.integers(num, 128))
        rate = Fraction(num, den)
        config = AllocationConfig(
            eta=float(gen.uniform(0.0, 1.0)),
            cap_fraction=float(gen.uniform(0.5, 1.0)),
        )
        try:
            plan = allocate_measurements(stats, n, levels, rate, config)
        except InfeasiblePlanError:
            infeasible += 1  # a refusal, never a budget violation
            continue
        assert sum(plan.counts.values()) == plan.total
        assert plan.total == measurement_budget(rate, n)
        for sid, m in plan.counts.items():
            assert 0 <= m <= (n >> sid.level) ** 2

    # worked hand example from the allocation module docstring
    subs = canonical_subbands(1)
    stats = SubbandStats(
        8, 1,
        dict(zip(subs, [8.0, 0.5, 0.5, 0.5])),
        dict(zip(subs, [0.0, 0.0, 0.0, 0.0])),
    )
    plan = allocate_measurements(stats, 8, 1, Fraction(1, 4))
    counts = tuple(plan.counts[s] for s in subs)
    assert counts == (13, 1, 1, 1)
    dt = time.perf_counter() - t0
    assert dt < 5.0
    print(f"ACCEPTANCE 2 PASS: 10^4 draws budget-exact "
          f"({infeasible} infeasible refusals), hand example {counts}, "
          f"{dt:.2f}s")


def test_criterion_03_invertible_case(camera256, tmp_path):
    t0 = time.perf_counter()
    n, levels = 32, 2
    pyrs = [dwt_multilevel(b, levels) for b in partition_blocks(camera256, n)]
    plan = allocate_measurements(subband_stats(pyrs), n, levels,
                                 Fraction(1, 1), operator_seed=11)
    operator = make_operator(plan)
    blob = encode(sample_image(camera256, plan, operator), plan)
    measurements, dec_plan = decode(blob)
    result = reconstruct(measurements, make_operator(dec_plan),
                         SolverConfig(beta=0.0, max_iters=2, rel_tol=1e-300))
    db = psnr(camera256, result.image)
    assert db > 80.0

    out = tmp_path / "round.pgm"
    write_image(result.image, out)
    assert out.read_bytes() == CAMERA_PGM.read_bytes()
    dt = time.perf_counter() - t0
    assert dt < 10.0
    print(f"ACCEPTANCE 3 PASS: rate 1.0 end-to-end {db:.2f} dB before "
          f"rounding, PGM byte-exact, {dt:.2f}s")


def _ternary_min(fn, lo, hi, iters=200):
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if fn(m1) < fn(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def test_criterion_04_prox_oracles():
    gen = np.random.default_rng(404)
    t0 = time.perf_counter()
    worst_soft = 0.0
    for _ in range(1000):
        r = float(gen.normal(0.0, 2.0))
        tau = float(gen.uniform(0.0, 2.0))
        best = _ternary_min(lambda x: 0.5 * (x - r) ** 2 + tau * abs(x),
                            -abs(r) - 1.0, abs(r) + 1.0)
        worst_soft = max(worst_soft,
                         abs(float(soft_threshold([r], tau)[0]) - best))
    worst_group = 0.0
    for _ in range(1000):
        v = gen.normal(0.0, 1.0, size=5)
        tau = float(gen.uniform(0.0, 2.0))
        nrm = float(np.linalg.norm(v))
        s = _ternary_min(lambda m: tau * m + 0.5 * (m - nrm) ** 2,
                         0.0, nrm + 1.0)
        expect = (s / nrm) * v if nrm > 0 else np.zeros(5)
        got = group_shrink(v, tau)
        worst_group = max(worst_group, float(np.abs(got - expect).max()))
    dt = time.perf_counter() - t0
    assert worst_soft < 1e-6
    assert worst_group < 1e-6
    assert dt < 5.0
    print(f"ACCEPTANCE 4 PASS: 10^3 oracles each, soft max dev "
          f"{worst_soft:.2e}, group max dev {worst_group:.2e}, {dt:.2f}s")


def test_criterion_05_gradient_check():
    gen = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(20):
        img = gen.uniform(size=(8, 8))
        pyrs = [dwt_multilevel(b, 1) for b in partition_blocks(img, 8)]
        plan = allocate_measurements(subband_stats(pyrs), 8, 1,
                                     Fraction(1, 2), operator_seed=trial)
        op = make_operator(plan)
        ms = sample_image(img, plan, op)
        y = {sid: ms.data[sid][0] for sid in ms.data}
        theta = gen.normal(size=64)
        z = np.empty((0, 5))
        lam, gamma = 0.4, 0.3
        grad = (theta - gradient_step(theta, z, y, op, lam, gamma)) / gamma

        def smooth(t):
            return objective(t, z, y, op, 0.0, lam)

        h = 1e-6
        fd = np.array([
            (smooth(theta + h * e) - smooth(theta - h * e)) / (2 * h)
            for e in np.eye(64)
        ])
        rel = float(np.linalg.norm(fd - grad) / max(1.0,
                                                    np.linalg.norm(fd)))
        worst = max(worst, rel)
    dt = time.perf_counter() - t0
    assert worst < 1e-4
    assert dt < 5.0
    print(f"ACCEPTANCE 5 PASS: 20 instances n=8 l=1, worst FD rel err "
          f"{worst:.2e}, {dt:.2f}s")


def test_criterion_06_descent_property(camera256):
    t0 = time.perf_counter()
    img = camera256[:128, :128]
    n, levels = 64, 2
    pyrs = [dwt_multilevel(b, levels) for b in partition_blocks(img, n)]
    plan = allocate_measurements(subband_stats(pyrs), n, levels,
                                 Fraction(1, 4), operator_seed=3)
    op = make_operator(plan)
    ms = sample_image(img, plan, op)
    cfg = SolverConfig(step_mode="lipschitz", apply_correction=False,
                       max_iters=200, rel_tol=1e-300)
    res = reconstruct(ms, op, cfg)
    assert res.iterations == 200
    trace = res.objective_trace
    worst_uptick = max(
        (cur - prev) / max(1.0, abs(prev))
        for prev, cur in zip(trace, trace[1:])
    )
    dt = time.perf_counter() - t0
    assert worst_uptick <= 1e-8
    assert dt < 30.0
    print(f"ACCEPTANCE 6 PASS: 200 iterations, worst relative uptick "
          f"{worst_uptick:.3e}, {dt:.2f}s")


def test_criterion_07_tree_sparse_exact_recovery():
    t0 = time.perf_counter()
    n, levels = 64, 2
    groups = build_tree_groups(n, levels)
    gen = np.random.default_rng(2024)
    pick = gen.choice(groups.n_groups, size=8, replace=False)
    cs = coarse_size(n, levels)
    theta_star = np.zeros(n * n)
    for g in pick:
        vals = gen.normal(0.0, 1.0, size=5)
        vals += np.sign(vals) * 0.5  # keep every entry clear of zero
        theta_star[cs + groups.indices[g]] = vals
    block = idwt_multilevel(unflatten(theta_star, n, levels))

    stats = subband_stats([dwt_multilevel(block, levels)])
    plan = allocate_measurements(stats, n, levels, Fraction(1, 2),
                                 operator_seed=5)
    op = make_operator(plan)
    ms = sample_image(block, plan, op)

    # oracle: least squares restricted to the true support recovers the
    # noiseless optimum essentially exactly
    support = np.flatnonzero(theta_star)
    theta_ls = np.zeros(n * n)
    for sid, sl in subband_slices(n, levels):
        if plan.counts[sid] == 0:
            continue
        cols = [j - sl.start for j in support if sl.start <= j < sl.stop]
        if not cols:
            continue
        sol, *_ = np.linalg.lstsq(op.matrices[sid][:, cols],
                                  ms.data[sid][0], rcond=None)
        theta_ls[np.asarray(cols) + sl.start] = sol
    ref_norm = float(np.linalg.norm(theta_star))
    rel_ls = float(np.linalg.norm(theta_ls - theta_star)) / ref_norm
    assert rel_ls < 1e-6

    cfg = SolverConfig(beta=3e-4, lam=0.1, max_iters=2500, rel_tol=1e-14)
    res = reconstruct(ms, op, cfg)
    rel = float(np.linalg.norm(res.thetas[0] - theta_star)) / ref_norm
    dt = time.perf_counter() - t0
    assert rel < 1e-2
    assert dt < 30.0
    print(f"ACCEPTANCE 7 PASS: rel l2 err {rel:.3e} "
          f"({res.iterations} iterations), support-LS oracle {rel_ls:.2e}, "
          f"{dt:.2f}s")


def test_criterion_08_solver_benefit(moon256):
    t0 = time.perf_counter()
    n, levels = 64, 2
    pyrs = [dwt_multilevel(b, levels) for b in partition_blocks(moon256, n)]
    plan = allocate_measurements(subband_stats(pyrs), n, levels,
                                 Fraction(1, 4), operator_seed=0)
    op = make_operator(plan)
    ms = sample_image(moon256, plan, op, threads=1)
    initial, _ = initial_reconstruct(ms, op, threads=1)
    psnr_init = psnr(moon256, initial)
    res = reconstruct(ms, op, SolverConfig(), threads=1)
    psnr_final = psnr(moon256, res.image)
    gain = psnr_final - psnr_init
    dt = time.perf_counter() - t0
    assert gain >= 1.5
    assert dt < 60.0
    print(f"ACCEPTANCE 8 PASS: 25% rate, initial {psnr_init:.4f} dB -> "
          f"final {psnr_final:.4f} dB (gain {gain:.4f} dB, "
          f"{res.iterations} iterations), single-threaded {dt:.2f}s")


def test_criterion_09_reference_numbers_documented():
    readme = (REPO_ROOT / "README.md").read_text(encoding="utf-8")
    # the classical multi-scale baseline is context only, never a gate
    assert "27.00" in readme and "0.8293" in readme
    assert "10%" in readme
    lower = readme.lower()
    assert "not reproduc" in lower or "not be reproduc" in lower
    assert "learned" in lower or "trained" in lower
    print("ACCEPTANCE 9 PASS: README reports the 27.00/0.8293 @ 10% "
          "classical reference as context and marks learned-model numbers "
          "non-reproducible")


def test_criterion_10_codec_round_trips():
    gen = np.random.default_rng(1010)
    t0 = time.perf_counter()
    rates = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1, 1)]
    for i in range(1000):
        levels = 1 + i % 2
        size = 8 if i % 3 else 16
        img = gen.uniform(size=(size, size))
        pyrs = [dwt_multilevel(b, levels) for b in partition_blocks(img, 8)]
        plan = allocate_measurements(subband_stats(pyrs), 8, levels,
                                     rates[i % 4], operator_seed=i)
        op = make_operator(plan)
        blob = encode(sample_image(img, plan, op), plan)
        ms2, plan2 = decode(blob)
        assert encode(ms2, plan2) == blob  # bit-exact re-encode
        assert operator_digest(make_operator(plan2)) == operator_digest(op)
    dt = time.perf_counter() - t0
    assert dt < 10.0
    print(f"ACCEPTANCE 10 PASS: 10^3 encode/decode round trips bit-exact, "
          f"operator digests equal, {dt:.2f}s")


def test_criterion_11_determinism(camera256, tmp_path):
    from wtcs.cli import main

    src = tmp_path / "crop.pgm"
    write_image(camera256[:64, :64], src)
    artifacts = []
    for tag, threads in (("a", "1"), ("b", "1"), ("c", "4")):
        wcs = tmp_path / f"{tag}.wcs"
        pgm = tmp_path / f"{tag}.pgm"
        diag = tmp_path / f"{tag}.csv"
        assert main(["sample", "--in", str(src), "--rate", "1/4",
                     "--block", "16", "--levels", "2", "--seed", "9",
                     "--out", str(wcs), "--threads", threads]) == 0
        assert main(["reconstruct", "--in", str(wcs), "--out", str(pgm),
                     "--iters", "20", "--tol", "1e-300",
                     "--diag", str(diag), "--threads", threads]) == 0
        artifacts.append(
            (wcs.read_bytes(), pgm.read_bytes(), diag.read_bytes())
        )
    assert artifacts[0] == artifacts[1] == artifacts[2]
    print("ACCEPTANCE 11 PASS: bit-identical measurement stream, image, "
          "and diagnostics across repeat runs and --threads 1 vs 4")
