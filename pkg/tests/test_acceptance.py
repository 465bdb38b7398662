"""Acceptance suite: one test per criterion, tolerances and time limits pinned below.

A pass/fail line per criterion is printed in the terminal summary.
"""
import json
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from mpmath import mp

from hauslip import cli
from hauslip.estimators import (MetricSample, box_dimension, check_metric_axioms, empirical_lip,
                                empirical_skew, greedy_net, power_rule_check)
from hauslip.exact_linalg import IntegerMatrix, char_poly, eigenvalues, entropy, real_jordan
from hauslip.expansive import (NEVER, adapted_metric, build_rho, doubling_system, frink_metrize,
                               orbit_bound_violations, sample_box_dimension, sample_closure,
                               sandwich_violations, separation_table, weak_triangle_violations)
from hauslip.pipelines import RunConfig, run_expansive, shift_analytic
from hauslip.symbolic import (Subshift, cylinder_dimension, random_point, shift, shift_dist,
                              sft_entropy)
from hauslip.torus_metric import (BlockMetric, analytic_certificate, block_apply, block_norm,
                                  block_norm_np, build_product_metric, build_torus_metric,
                                  real_block, torus_sample, witness_vector)

CAT = [[2, 1], [1, 1]]

# criterion 1
CAT_ENTROPY_TOL = 1e-12
CAT_PRODUCT_TOL = 1e-10
CAT_ETAS = ("0.1", "0.05", "0.01", "0.001")
CAT_TIME = 1.0
# criterion 2
DIAG_TOL = 1e-12
DIAG_ETAS = ("0.001", "0.05", "0.3", "0.9")
DIAG_TIME = 1.0
# criterion 3
DEFECT_ETA = "0.05"
DEFECT_LIP = 2.05
DEFECT_TOL = 1e-12
DEFECT_PAIRS = 100_000
DEFECT_TIME = 5.0
# criterion 4
BOX_ETA = "0.3"
BOX_POINTS = 20_000
BOX_REL_TOL = 0.15
BOX_TIME = 60.0
# criterion 5
GOLDEN_TOL = 0.02
GOLDEN_N_MAX = 15
SHIFT_TIME = 5.0
# criterion 6
FRINK_TIME = 10.0
# criterion 7
TREND_NS = (1, 2, 4, 8)
TREND_TOL = 0.25
TREND_SLACK = 1e-9
TREND_TIME = 30.0
# criterion 8
HD_BOUND_TOL = 0.2
# criterion 9
POWER_GAMMAS = (0.3, 0.5, 0.9)
AXIOM_TRIPLES = 10_000
AXIOM_TOL = 1e-12
POWER_ENTROPY_TOL = 1e-9

FIVE_MATRICES = [CAT, [[2, 0], [0, 3]], [[0, -1], [1, 0]], [[1, 2], [3, 4]],
                 [[0, 0, 1], [1, 0, 1], [0, 1, 0]]]


def spectrum(rows, prec=256):
    return eigenvalues(char_poly(IntegerMatrix.from_rows(rows)), prec)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# 1 ----------------------------------------------------------------------------

@pytest.mark.criterion(1, "cat map: entropy exact, product = h + log(1+eta) for shrinking eta")
def test_criterion_1_cat_certificate():
    with Timer() as t:
        s = spectrum(CAT)
        h = entropy(s)
        rjf = real_jordan(IntegerMatrix.from_rows(CAT), spectrum=s)
        products = {eta: analytic_certificate(build_product_metric(rjf, eta), h).product
                    for eta in CAT_ETAS}
    with mp.workprec(256):
        oracle = mpmath.log((3 + mpmath.sqrt(5)) / 2)
        assert abs(h - oracle) < CAT_ENTROPY_TOL
        for eta, p in products.items():
            assert abs(p - (oracle + mpmath.log(1 + mpmath.mpf(eta)))) < CAT_PRODUCT_TOL
    vals = [products[e] for e in CAT_ETAS]
    assert vals == sorted(vals, reverse=True)
    assert t.elapsed < CAT_TIME


# 2 ----------------------------------------------------------------------------

@pytest.mark.criterion(2, "diag(2,3) and diag(2,5): product = log 6, log 10 for every eta")
@pytest.mark.parametrize("rows, target", [([[2, 0], [0, 3]], 6), ([[2, 0], [0, 5]], 10)])
def test_criterion_2_exact_attainment(rows, target):
    with Timer() as t:
        s = spectrum(rows)
        h = entropy(s)
        rjf = real_jordan(IntegerMatrix.from_rows(rows), spectrum=s)
        products = [analytic_certificate(build_product_metric(rjf, eta), h).product
                    for eta in DIAG_ETAS]
    for p in products:
        assert abs(p - math.log(target)) < DIAG_TOL
    assert abs(h - math.log(target)) < DIAG_TOL
    assert t.elapsed < DIAG_TIME


# 3 ----------------------------------------------------------------------------

@pytest.mark.criterion(3, "2x2 Jordan block lambda=2: empirical Lip <= 2.05, witness attains it")
def test_criterion_3_defective_block():
    with Timer() as t:
        b = BlockMetric(real_block(2, 2), mpmath.mpf(DEFECT_ETA))
        J = np.array([[2.0, 1.0], [0.0, 2.0]])
        rng = np.random.default_rng(0)
        ms = MetricSample(rng.normal(size=(2 * DEFECT_PAIRS, 2)),
                          lambda a, c: block_norm_np(b, a - c),
                          np.arange(2 * DEFECT_PAIRS).reshape(-1, 2))
        lip = empirical_lip(ms, lambda P: P @ J.T)
        v = witness_vector(b)
        ratio = block_norm(b, block_apply(b, v)) / block_norm(b, v)
    assert lip <= DEFECT_LIP + DEFECT_TOL
    assert abs(ratio - DEFECT_LIP) < DEFECT_TOL
    assert t.elapsed < DEFECT_TIME


# 4 ----------------------------------------------------------------------------

@pytest.mark.criterion(4, "cat map, eta=0.3: torus box dimension within 15% of analytic HD")
def test_criterion_4_torus_box_dimension():
    with Timer() as t:
        tm = build_torus_metric(real_jordan(IntegerMatrix.from_rows(CAT)), BOX_ETA)
        rng = np.random.default_rng(0)
        X = rng.integers(0, 2 ** 30, size=(BOX_POINTS, 2)) / 2 ** 30
        fit = box_dimension(torus_sample(tm, X))
    hd = float(tm.pm.analytic_hd)
    oracle = 1 + math.log((3 + math.sqrt(5)) / 2) / math.log(1.3)
    assert abs(hd - oracle) < 1e-12 and abs(hd - 4.67) < 0.01
    print(f"box slope {fit.slope:.3f} vs analytic HD {hd:.3f} in {t.elapsed:.1f}s")
    assert abs(fit.slope - hd) <= BOX_REL_TOL * hd
    assert t.elapsed < BOX_TIME


# 5 ----------------------------------------------------------------------------

@pytest.mark.criterion(5, "full 2-shift dimension 1 and product log 2; golden mean dimension")
def test_criterion_5_shift_equality():
    with Timer() as t:
        full = Subshift.full(2)
        dims = [cylinder_dimension(full, n) for n in range(4, 21)]
        an = shift_analytic(full, GOLDEN_N_MAX)
        golden = cylinder_dimension(Subshift.sft([[1, 1], [1, 0]]), GOLDEN_N_MAX)
    assert all(d == 1.0 for d in dims)
    assert an["product"] == math.log(2) == an["entropy"]
    rho = max(abs(np.linalg.eigvals(np.array([[1.0, 1.0], [1.0, 0.0]]))))
    oracle = math.log(rho) / math.log(2)
    assert abs(oracle - 0.6942) < 1e-4
    assert abs(golden - oracle) < GOLDEN_TOL
    assert t.elapsed < SHIFT_TIME


# 6 ----------------------------------------------------------------------------

@pytest.mark.criterion(6, "doubling map on k/64: Frink sandwich, weak triangle, orbit bounds")
def test_criterion_6_frink_sandwich():
    with Timer() as t:
        sys = doubling_system(Fraction(1, 4))
        s = sample_closure(sys, [Fraction(k, 64) for k in range(64)])
        assert len(s) == 64 and s.closed
        q = build_rho(sys, s, math.sqrt(2), 2)
        fm = frink_metrize(q)
        R, D = q.rho, fm.D
        tri_bad = int((R[:, None, :] > 2 * np.maximum(R[:, :, None], R[None, :, :])
                       * (1 + 1e-12)).sum())
        sandwich_bad = int(((D > R) | (R > 4 * D)).sum())
        max_i = int(q.ntab[q.ntab != NEVER].max())
        orbit = orbit_bound_violations(q, fm, s, max_i)
    assert tri_bad == 0 and weak_triangle_violations(q.ntab, q.alpha) == 0
    assert sandwich_bad == 0 and sandwich_violations(q, fm) == 0
    assert orbit["max_i"] == max_i
    assert orbit["lip_bound"] == 0 and orbit["skew_bound"] == 0
    assert t.elapsed < FRINK_TIME


# 7 and 8 ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def doubling_run():
    with Timer() as t:
        cert, verdict = run_expansive(RunConfig("expansive"),
                                      {"kind": "doubling", "c": "1/4", "n": list(TREND_NS)})
    return cert, verdict, t.elapsed


@pytest.mark.criterion(7, "doubling map: adapted-metric products trend to log 2, 16-factor check")
def test_criterion_7_adapted_trend(doubling_run):
    cert, verdict, elapsed = doubling_run
    emp = cert["empirical"]
    products = emp["products"]
    assert [r["n"] for r in emp["reports"]] == list(TREND_NS)
    assert all(b <= a + TREND_SLACK for a, b in zip(products, products[1:]))
    assert abs(products[-1] - math.log(2)) <= TREND_TOL
    assert all(r["band"]["lip_le_16_skew"] for r in emp["reports"])
    for r in emp["reports"]:
        assert r["band"]["lip"] <= 16 * r["band"]["skew"]
    assert verdict
    assert elapsed < TREND_TIME


@pytest.mark.criterion(8, "doubling map: HD-finiteness bound >= box dimension under D - 0.2")
def test_criterion_8_hd_finite_bound(doubling_run):
    cert, _, _ = doubling_run
    emp = cert["empirical"]
    alpha = cert["analytic"]["alpha"]
    box_D = emp["boxdim_D"]["slope"]
    bounds = emp["reports"][0]["hd_finite_bounds"]
    assert bounds
    for i, b in bounds.items():
        assert alpha ** int(i) / 4 > 1
        assert math.isfinite(b)
        assert b >= box_D - HD_BOUND_TOL


def test_criterion_8_on_full_dyadic_sample():
    sys = doubling_system(Fraction(1, 4))
    s = sample_closure(sys, [Fraction(k, 1024) for k in range(1024)])
    q = build_rho(sys, s, math.sqrt(2), 2, ntab=separation_table(sys, s))
    fm = frink_metrize(q)
    from hauslip.expansive import hd_finite_bounds
    bounds = hd_finite_bounds(sys, q, fm, s, max_i=int(q.ntab[q.ntab != NEVER].max()))
    box_D = sample_box_dimension(fm.D).slope
    assert bounds and all(math.isfinite(b) and b >= box_D - HD_BOUND_TOL for b in bounds.values())


# 9 ----------------------------------------------------------------------------

@pytest.mark.criterion(9, "invariance: relabeling, power rule, metric axioms, entropy of powers")
def test_criterion_9_relabeling():
    tm = build_torus_metric(real_jordan(IntegerMatrix.from_rows(CAT)), "0.3")
    A = np.array(CAT, dtype=float)
    rng = np.random.default_rng(1)
    X = rng.integers(0, 2 ** 30, size=(3000, 2)) / 2 ** 30
    t = rng.integers(0, 2 ** 30, size=2) / 2 ** 30

    def g(P):
        return np.mod(P @ A.T, 1.0)

    def g_moved(P):
        return np.mod(g(np.mod(P - t, 1.0)) + t, 1.0)

    ms = torus_sample(tm, X).with_random_pairs(5000, 2)
    ms2 = torus_sample(tm, np.mod(X + t, 1.0)).with_random_pairs(5000, 2)
    assert (ms.pair_distances() == ms2.pair_distances()).all()
    assert empirical_lip(ms, g) == empirical_lip(ms2, g_moved)
    levels = list(np.quantile(ms.pair_distances(), [0.05, 0.2]))
    assert empirical_skew(ms, g, levels) == empirical_skew(ms2, g_moved, levels)
    for eps in np.quantile(ms.pair_distances(), [0.02, 0.1, 0.4]):
        assert greedy_net(ms, eps) == greedy_net(ms2, eps)

    # symbol relabeling is an isometry of the shift metric
    sub = Subshift.full(3)
    swap = {0: 1, 1: 2, 2: 0}
    pts = [random_point(sub, rng) for _ in range(200)]
    moved = [type(p)(tuple(swap[a] for a in p.preperiod), tuple(swap[a] for a in p.period))
             for p in pts]
    for i in range(0, 200, 2):
        a, b = pts[i], pts[i + 1]
        c, d = moved[i], moved[i + 1]
        assert shift_dist(a, b, 3) == shift_dist(c, d, 3)
        assert shift_dist(shift(a), shift(b), 3) == shift_dist(shift(c), shift(d), 3)


@pytest.mark.criterion(9, "invariance: relabeling, power rule, metric axioms, entropy of powers")
@pytest.mark.parametrize("gamma", POWER_GAMMAS)
def test_criterion_9_power_rule(gamma):
    X = np.random.default_rng(3).uniform(size=(3000, 2))
    ms = MetricSample(X, lambda a, b: np.linalg.norm(a - b, axis=-1))
    rep = power_rule_check(ms, gamma)
    assert rep.counts_match and rep.counts_power == rep.counts_base
    assert len(rep.scales) >= 8


def _metric_samples():
    rng = np.random.default_rng(4)
    out = {}
    cat = real_jordan(IntegerMatrix.from_rows(CAT))
    pm = build_product_metric(cat, "0.3")
    out["product R^2"] = MetricSample(rng.normal(size=(2000, 2)), lambda a, b: pm.dist_np(a - b))
    shear3 = real_jordan(IntegerMatrix.from_rows([[2, 1, 0], [0, 2, 1], [0, 0, 2]]))
    pm3 = build_product_metric(shear3, "0.2")
    out["product R^3 Jordan"] = MetricSample(rng.normal(size=(2000, 3)),
                                             lambda a, b: pm3.dist_np(a - b))
    tm = build_torus_metric(cat, "0.3")
    out["torus"] = torus_sample(tm, rng.integers(0, 2 ** 30, size=(2000, 2)) / 2 ** 30)
    rot = build_torus_metric(real_jordan(IntegerMatrix.from_rows([[0, -1], [1, 0]])), "0.3")
    out["torus rotation"] = torus_sample(rot, rng.uniform(size=(2000, 2)))
    sys = doubling_system(Fraction(1, 4))
    s = sample_closure(sys, [Fraction(k, 256) for k in range(256)])
    q = build_rho(sys, s, math.sqrt(2), 2)
    fm = frink_metrize(q)
    out["frink D"] = MetricSample.from_matrix(fm.D)
    out["adapted d"] = MetricSample.from_matrix(adapted_metric(fm, s, 4).d)
    return out


@pytest.mark.criterion(9, "invariance: relabeling, power rule, metric axioms, entropy of powers")
def test_criterion_9_metric_axioms():
    for name, ms in _metric_samples().items():
        rep = check_metric_axioms(ms, AXIOM_TRIPLES, seed=5, tol=AXIOM_TOL)
        assert rep.ok, (name, rep)
    sub = Subshift.sft([[1, 1], [1, 0]])
    rng = np.random.default_rng(6)
    pts = [random_point(sub, rng) for _ in range(300)]
    idx = rng.integers(0, len(pts), size=(AXIOM_TRIPLES, 3))
    for a, b, c in idx:
        x, y, z = pts[a], pts[b], pts[c]
        dxy = shift_dist(x, y, 2)
        assert dxy == shift_dist(y, x, 2)
        assert (dxy == 0) == (x == y)
        assert shift_dist(x, z, 2) <= dxy + shift_dist(y, z, 2)


@pytest.mark.criterion(9, "invariance: relabeling, power rule, metric axioms, entropy of powers")
@pytest.mark.parametrize("rows", FIVE_MATRICES)
def test_criterion_9_entropy_of_powers(rows):
    A = IntegerMatrix.from_rows(rows)
    h = entropy(spectrum(rows))
    for k in (1, 2, 3):
        hk = entropy(spectrum((A ** k).to_list()))
        assert abs(hk - k * h) < POWER_ENTROPY_TOL


# 10 ---------------------------------------------------------------------------

def _run(args, out):
    code = cli.main(args + ["--out", str(out)])
    with open(out) as fh:
        cert = json.load(fh)
    cert.pop("metadata")
    return code, json.dumps(cert, sort_keys=True, indent=2)


@pytest.mark.criterion(10, "determinism: identical config and seed give identical certificates")
@pytest.mark.parametrize("command, payload, flag", [
    ("torus", CAT, "--matrix"),
    ("torus", [[2, 1, 0], [0, 2, 0], [0, 0, 3]], "--matrix"),
    ("shift", {"r": 2, "kind": "sft", "transitions": [[1, 1], [1, 0]]}, "--subshift"),
    ("expansive", {"kind": "doubling", "c": "1/4"}, "--system"),
    ("expansive", {"kind": "shift", "subshift": {"r": 2, "kind": "full"}, "c": "1/2"}, "--system"),
])
def test_criterion_10_determinism(tmp_path, command, payload, flag):
    inp = tmp_path / "in.json"
    inp.write_text(json.dumps(payload))
    args = [command, flag, str(inp), "--seed", "7"]
    c1, a = _run(args, tmp_path / "a.json")
    c2, b = _run(args, tmp_path / "b.json")
    assert c1 == c2 and c1 in (0, 2)
    assert a == b
    v1, va = _run(["verify", "--cert", str(tmp_path / "a.json"), "--seed", "11"],
                  tmp_path / "va.json")
    v2, vb = _run(["verify", "--cert", str(tmp_path / "a.json"), "--seed", "11"],
                  tmp_path / "vb.json")
    assert v1 == v2 and va == vb
