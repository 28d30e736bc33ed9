"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the summary section lists every
criterion) or ``python3 tests/test_acceptance.py``.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from unifgamma import GaussianDrawConfig, SpaceSpec
from unifgamma.families import NOT_UNIF, OperatorFamily, shift_orbit_divergence, unif_gamma_lower
from unifgamma.gamma_norm import ColumnOperator, gamma_norm_sq
from unifgamma.hilbert_sequences import HilbertSequenceSpec, gram
from unifgamma.laplace import gamma_rl_decay, halfplane_scaling, poisson_mass, sector_family
from unifgamma.weiss import (CONSISTENT, WITNESS_FOUND, DiagonalSystem, OffDiagonalSystem,
                             factor_four_identity, half_power_gamma, invariant_measure_quantity,
                             off_diagonal_contrapositive_run, ou_simulate, weiss_equivalence_report)

pytestmark = pytest.mark.acceptance

SQUARES = DiagonalSystem(lambda k: k**2, 1.0, truncation=10_000)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


def test_01_factor_four(record):
    with Timer() as t:
        r = factor_four_identity(SQUARES)
    ok = r.relative_gap <= 1e-12 and t.s < 1
    record(1, ok, f"factor-4 gap {r.relative_gap:.3g}, {t.s:.3f}s")
    assert ok


def test_02_basel_oracles(record):
    with Timer() as t:
        hp = half_power_gamma(SQUARES).value
        inv = invariant_measure_quantity(SQUARES).value
    d1, d2 = abs(hp - math.pi**2 / 6), abs(inv - math.pi**2 / 12)
    ok = d1 <= 1e-4 and d2 <= 5e-5 and t.s < 1
    record(2, ok, f"|S-pi^2/6| = {d1:.6g}, |S-pi^2/12| = {d2:.6g}, {t.s:.3f}s")
    assert ok


def test_03_gram_bounds(record):
    with Timer() as t:
        ps = [gram(HilbertSequenceSpec.power_scaled(0.5, 1.0, 0.0, 0, n - 1)).op_norm_sqrt
              for n in (8, 16, 32, 64, 128, 256, 512)]
        mod = max(gram(HilbertSequenceSpec.modulated(1.0, rho, -h, h)).op_norm_sqrt
                  for rho in (0.0, 0.25, 0.5, 0.9) for h in (4, 16, 64, 128))
    mono = all(b >= a for a, b in zip(ps, ps[1:]))
    ok = mono and max(ps) <= 1 + math.sqrt(2) + 1e-9 and mod <= 1.07547 + 1e-9 and t.s < 30
    record(3, ok, f"power-scaled max {max(ps):.6f} (monotone={mono}), modulated max {mod:.6f}, {t.s:.1f}s")
    assert ok


def test_04_monte_carlo_vs_exact(record):
    rng = np.random.default_rng(20240)
    passed = 0
    with Timer() as t:
        for i in range(50):
            dim, n = int(rng.integers(1, 65)), int(rng.integers(1, 65))
            V = rng.standard_normal((dim, n)) * rng.exponential(1.0, n)
            T = ColumnOperator(V, SpaceSpec.ell(2, "real"))
            exact = gamma_norm_sq(T, method="exact").mean
            est = gamma_norm_sq(T, GaussianDrawConfig(1000 + i, 100_000, 20), method="mc")
            passed += abs(est.mean - exact) <= 4 * est.std_error
    ok = passed >= 48 and t.s < 120
    record(4, ok, f"{passed}/50 within 4 batch SE, {t.s:.1f}s")
    assert ok


def test_05_shift_counterexample(record):
    with Timer() as t:
        blocks = shift_orbit_divergence(20)
    errs = [abs(b.block_value - n**-2 * 2 ** (n / 2)) / (n**-2 * 2 ** (n / 2))
            for n, b in zip(range(1, 21), blocks) if n >= 2]
    sums = [b.partial_sum for b in blocks]
    grows = all(b > a for a, b in zip(sums, sums[1:])) and blocks[19].block_value > blocks[1].block_value
    ok = max(errs) <= 1e-12 and grows and t.s < 1
    record(5, ok, f"max rel err {max(errs):.3g}, block n=20 {blocks[19].block_value:.6g}, "
                  f"partial sum {sums[-1]:.6g}, {t.s:.3f}s")
    assert ok


def test_06_projection_family(record):
    N = 100
    cuts = list(range(1, N + 1))
    with Timer() as t:
        rep = unif_gamma_lower(OperatorFamily.projection_family(N), cuts=cuts)
    tails_ok = all(e.mean == N - c + 1 for c, e in zip(rep.cuts, rep.tail_profile))
    ok = tails_ok and rep.verdict == NOT_UNIF and rep.witness is not None and t.s < 1
    record(6, ok, f"tails exact={tails_ok}, verdict {rep.verdict}, {t.s:.3f}s")
    assert ok


def test_07_halfplane_scaling(record):
    b_grid = 2.0 ** np.arange(-4, 5)
    with Timer() as t:
        res = halfplane_scaling(DiagonalSystem(lambda k: k**2, 1.0, truncation=1000).representable(), b_grid)
    ok = -0.65 <= res["slope"] <= -0.35 and t.s < 60
    record(7, ok, f"log-log slope {res['slope']:.4f}, {t.s:.1f}s")
    assert ok


def test_08_sector_bound(record):
    Phi = DiagonalSystem(lambda k: k**2, 1.0, truncation=1000).representable()
    with Timer() as t:
        _, dyadic = sector_family(Phi, 0.0, -8, 30, q=2.0)
        _, fine = sector_family(Phi, 0.0, -16, 56, q=10 ** (1 / 8))
    cap = (1 + math.sqrt(2)) * math.sqrt(math.pi**2 / 12)
    rel = abs(fine.lower - math.pi**2 / 24) / (math.pi**2 / 24)
    ok = dyadic.norm_lower <= cap + 1e-9 and rel <= 0.1 and t.s < 60
    record(8, ok, f"dyadic norm lower {dyadic.norm_lower:.6f} <= {cap:.6f}, refined lower "
                  f"{fine.lower:.6f} vs pi^2/24 (rel {rel:.4f}), {t.s:.1f}s")
    assert ok


def test_09_rl_decay(record):
    with Timer() as t:
        tab = gamma_rl_decay(SQUARES.representable(), 1.0, np.arange(0, 101))
    dec = bool(np.all(np.diff(tab.values) < 0))
    ok = dec and tab.values[-1] <= 2e-3 and t.s < 1
    record(9, ok, f"strictly decreasing={dec}, value at s=100 {tab.values[-1]:.4g}, {t.s:.3f}s")
    assert ok


def test_10_poisson_normalization(record):
    with Timer() as t:
        devs = [abs(poisson_mass(a) - 1) for a in (0.25, 0.5, 0.75)]
    ok = max(devs) <= 1e-6 and t.s < 1
    record(10, ok, f"max |mass - 1| {max(devs):.3g}, {t.s:.3f}s")
    assert ok


def test_11_ou_consistency(record):
    sys_ = DiagonalSystem(lambda k: k**2, 1.0, truncation=50)
    with Timer() as t:
        r = ou_simulate(sys_, 0.1, 20.0, 10_000, GaussianDrawConfig(0, 10_000, 20), check_fidelity=False)
    z = (r.variances - r.stationary) / r.std_errors
    zt = (r.total - r.stationary.sum()) / r.total_std_error
    ok = np.max(np.abs(z)) <= 3 and abs(zt) <= 3 and t.s < 120
    record(11, ok, f"max |z| per coordinate {np.max(np.abs(z)):.3f}, z of sum {zt:.3f}, {t.s:.1f}s")
    assert ok


def test_12_weiss_corpus(record):
    lams = {"k": lambda k: k, "k^2": lambda k: k**2, "2^k": lambda k: np.exp2(k),
            "k log^2(k+1)": lambda k: k * np.log(k + 1) ** 2}
    betas = {"1": 1.0, "1/sqrt(k)": lambda k: k**-0.5, "1/k": lambda k: 1 / k}
    bad = []
    with Timer() as t:
        for ln, lam in lams.items():
            for bn, beta in betas.items():
                rep = weiss_equivalence_report(DiagonalSystem(lam, beta))
                if rep.verdict != CONSISTENT:
                    bad.append((ln, bn, rep.trends()))
    ok = not bad and t.s < 120
    record(12, ok, f"{12 - len(bad)}/12 CONSISTENT{'' if not bad else ' ' + repr(bad)}, {t.s:.2f}s")
    assert ok


def test_13_off_diagonal_chain(record):
    od = OffDiagonalSystem.diagonal_functional(DiagonalSystem(lambda k: k, 1.0), delta=1.0)
    with Timer() as t:
        traces = off_diagonal_contrapositive_run(od, [2, 5, 10])
    slacks = [s.slack for tr in traces for s in tr.steps]
    found = all(tr.verdict == WITNESS_FOUND for tr in traces)
    wit = all(tr.witness_value >= tr.witness_target for tr in traces)
    ok = found and all(tr.all_hold for tr in traces) and min(slacks) >= 0 and wit and t.s < 60
    record(13, ok, f"min slack {min(slacks):.3g}, K = {[tr.K for tr in traces]}, "
                   f"witness/target {[round(tr.witness_value / tr.witness_target, 6) for tr in traces]}, {t.s:.1f}s")
    assert ok


def test_14_gallery_determinism(record, tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        subprocess.run([sys.executable, "-m", "unifgamma", "gallery", "--seed", "7", "--out", str(d)],
                       check=True, capture_output=True)
        outs.append((d / "gallery.csv").read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    record(14, ok, f"two gallery runs bit-identical={outs[0] == outs[1]} ({len(outs[0])} bytes)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
