"""Acceptance suite: one test (and one printed pass/fail line) per criterion.

The statistical criteria (1-5, 8, 10) read cached per-trial CSVs from the
results/ directory at the repository root; regenerate them with the
`lemnilab run` commands in the README if absent.  The analytic criteria
(6, 7) and the structural ones (9, 11) compute everything in-process.
"""

import csv
import json
import math
import os

import numpy as np
import pytest

from lemnilab import kacrice

RESULTS = os.path.join(os.path.dirname(__file__), os.pardir, "results")


def _report(num, name, ok, detail):
    line = "criterion %d [%s] %s: %s" % (num, "PASS" if ok else "FAIL", name, detail)
    print(line)
    assert ok, line


def _trials(experiment, n, subdir=None):
    d = os.path.join(RESULTS, subdir) if subdir else RESULTS
    path = os.path.join(d, "%s_n%d_trials.csv" % (experiment, n))
    if not os.path.exists(path):
        pytest.fail("missing cached results: %s (see README)" % path)
    rows = []
    with open(path) as fh:
        for r in csv.DictReader(fh):
            rows.append(r)
    return rows


def _clean(rows):
    return [r for r in rows if not r["flags"]]


def _summary(name, subdir=None):
    d = os.path.join(RESULTS, subdir) if subdir else RESULTS
    path = os.path.join(d, "%s_summary.json" % name)
    if not os.path.exists(path):
        pytest.fail("missing cached results: %s (see README)" % path)
    with open(path) as fh:
        return json.load(fh)["rows"]


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def test_criterion_01_length():
    details = []
    ok = True
    for n in (9, 25, 49):
        rows = _clean(_trials("length", n))
        mean, se = _mean_stderr([r["length"] for r in rows])
        theory = kacrice.expected_length(n)
        z = (mean - theory) / se
        rel = abs(mean - theory) / theory
        ok = ok and abs(z) < 3 and rel < 0.02 and len(rows) >= 0.999 * 4000
        details.append("n=%d mean=%.4f theory=%.4f z=%.2f rel=%.4f" % (n, mean, theory, z, rel))
    _report(1, "mean spherical length (pi^2/2) sqrt(n)", ok, "; ".join(details))


def test_criterion_02_integral_geometry():
    rows = _clean(_trials("length", 25))
    direct, se_d = _mean_stderr([r["length"] for r in rows])
    cross = np.array([float(r["crossings"]) for r in rows])
    crofton = math.pi * cross.mean()
    se_c = math.pi * cross.std(ddof=1) / math.sqrt(len(cross))
    pooled = math.hypot(se_d, se_c)
    z = (direct - crofton) / pooled
    ok = abs(z) < 3 and len(rows) >= 0.999 * 10_000
    _report(2, "crofton cross-check at n=25", ok,
            "direct=%.4f crofton=%.4f pooled_z=%.2f trials=%d" % (direct, crofton, z, len(rows)))


def test_criterion_03_meridian_tangents():
    c = kacrice.tangent_asymptotic_constant()
    stats = {}
    for n in (25, 50, 100, 200):
        rows = _clean(_trials("tangents", n))
        mean, se = _mean_stderr([float(r["nu"]) / n for r in rows])
        stats[n] = (mean, se, len(rows))
    m200, se200, k200 = stats[200]
    within = abs(m200 - c) / c < 0.10
    monotone = True
    grid = [25, 50, 100, 200]
    for a, b in zip(grid, grid[1:]):
        da = abs(stats[a][0] - c)
        db = abs(stats[b][0] - c)
        pooled = 2 * math.hypot(stats[a][1], stats[b][1])
        if db > da + pooled:
            monotone = False
    ok = within and monotone and all(stats[n][2] >= 0.999 * 2000 for n in grid)
    _report(3, "mean nu/n -> (32-sqrt2)/28", ok,
            "; ".join("n=%d mean=%.4f" % (n, stats[n][0]) for n in grid)
            + "; constant=%.4f within10%%=%s nonincreasing=%s" % (c, within, monotone))


def _frozen_c_low():
    path = os.path.join(RESULTS, "frozen_bands.json")
    if not os.path.exists(path):
        pytest.fail("missing %s with the frozen pilot lower band" % path)
    with open(path) as fh:
        return json.load(fh)["components_c_low"]


def test_criterion_04_component_bounds():
    c_low = _frozen_c_low()
    upper = kacrice.component_upper_constant()
    hard_ok = True
    details = []
    band_ok = True
    for n in (100, 200):
        rows = _trials("components", n)
        b0 = np.array([int(r["b0"]) for r in rows])
        hard_ok = hard_ok and (b0 <= n).all()
        mean = float(np.array([int(r["b0"]) for r in _clean(rows)]).mean()) / n
        band_ok = band_ok and c_low <= mean <= upper * 1.1
        details.append("n=%d mean_b0/n=%.4f" % (n, mean))
    ok = hard_ok and band_ok
    _report(4, "b0 <= n and mean b0/n in [%.2f, %.4f]" % (c_low, upper * 1.1), ok,
            "; ".join(details) + "; hard_bound=%s band=%s" % (hard_ok, band_ok))


def test_criterion_05_morse_inequality():
    bad = total = 0
    for exp, grid in (("tangents", (25, 50, 100, 200)), ("components", (100, 200)),
                      ("length", (9, 25, 49))):
        for n in grid:
            for r in _clean(_trials(exp, n)):
                total += 1
                if int(r["b0"]) > int(r["nu"]) // 2 + int(r["loops"]):
                    bad += 1
    ok = bad == 0 and total > 0
    _report(5, "morse inequality b0 <= nu/2 + loops", ok,
            "%d violations out of %d clean trials" % (bad, total))


def test_criterion_06_kacrice_suite():
    checks = {}
    err = max(
        abs(kacrice.length_density(4)(x2) - kacrice.length_density_quadrature(4, x2))
        for x2 in (0.0, 0.5, 1.0)
    )
    checks["density_inversion"] = (err, 1e-6)
    err = max(
        abs(kacrice.length_constant_quadrature(n) - math.sqrt(n) / 4.0)
        for n in (1, 4, 9, 25)
    )
    checks["C(n)"] = (err, 1e-8)
    rep = kacrice.verify_chain(5)
    checks["s_step"] = (rep["s_step"], 1e-6)
    checks["t_step"] = (rep["t_step_constant_vs_pi2_over_n"], 1e-6)
    checks["u_h1_step"] = (rep["u_h1_step"], 1e-6)
    checks["endpoint"] = (rep["endpoint_rel_err"], 1e-6)
    closed = kacrice.tangent_asymptotic_constant()
    checks["limit_constant"] = (
        abs(kacrice.tangent_asymptotic_quadrature() - closed) / closed, 1e-6)
    ok = all(v <= tol for v, tol in checks.values())
    _report(6, "kac-rice closed forms vs oracles", ok,
            "; ".join("%s=%.2g(tol %g)" % (k, v, t) for k, (v, t) in checks.items()))


def test_criterion_07_char_function_monte_carlo():
    n = 4
    rng = np.random.default_rng(20260823)
    N = 1_000_000
    worst = 0.0
    ok = True
    for _ in range(10):
        s, t = rng.normal(scale=1.0, size=2)
        v0 = (rng.normal(size=N) + 1j * rng.normal(size=N)) / math.sqrt(2)
        v1 = (rng.normal(size=N) + 1j * rng.normal(size=N)) * math.sqrt(n / 2)
        draws = np.exp(1j * (s * np.abs(v0) ** 2 + t * np.real(v0 * np.conj(v1))))
        mc = draws.mean()
        stderr = float(np.sqrt(np.mean(np.abs(draws - mc) ** 2) / N))
        cf = kacrice.char_function(kacrice.length_form(n, s, t), +1)
        zs = abs(mc - cf) / stderr
        worst = max(worst, zs)
        ok = ok and zs < 3
    _report(7, "characteristic function vs 1e6-draw simulation", ok,
            "worst |z| = %.2f over 10 random (s,t)" % worst)


def test_criterion_08_local_arrangements():
    ok = True
    details = []
    for target, subdir in (("(())", "local_1circle"),
                           ("((()))", "local_2nested"),
                           ("(()())", "local_2disjoint")):
        rows = _summary("local-arrangement", subdir)
        by_n = {r["n"]: r for r in rows}
        if set(by_n) != {100, 400}:
            pytest.fail("local-arrangement run for %s lacks n in {100,400}" % target)
        p1, s1 = by_n[100]["estimate"], by_n[100]["stderr"]
        p4, s4 = by_n[400]["estimate"], by_n[400]["stderr"]
        z = abs(p1 - p4) / math.hypot(s1, s4)
        good = p1 > 0 and p4 > 0 and z < 3
        ok = ok and good
        details.append("%s: p100=%.3f p400=%.3f z=%.2f" % (target, p1, p4, z))
    _report(8, "local arrangement probabilities positive and n-stable", ok,
            "; ".join(details))


def test_criterion_09_constructor_round_trip():
    from lemnilab.constructor import all_rooted_trees, certify_nondegenerate, realize, realized_tree
    from lemnilab.topology import Arrangement

    forms = [s for s in all_rooted_trees(6) if s != "()"]
    failures = []
    for s in forms:
        c = realize(Arrangement(s))
        if realized_tree(c) != Arrangement(s) or not certify_nondegenerate(c):
            failures.append(s)
    ok = not failures
    _report(9, "all rooted trees on <= 6 nodes realized", ok,
            "%d/%d round-tripped%s" % (len(forms) - len(failures), len(forms),
                                       "" if ok else "; failed: " + ",".join(failures)))


def test_criterion_10_kostlan_baseline():
    rows = _clean(_trials("kostlan-compare", 50))
    mean, se = _mean_stderr([float(r["nu"]) for r in rows])
    theory = kacrice.kostlan_meridian_expectation(50)
    rel = abs(mean - theory) / theory
    rep = kacrice.verify_kostlan(50)
    ok = rel < 0.10 and len(rows) >= 0.999 * 2000 and rep["corrected_rel_err"] < 1e-8
    _report(10, "kostlan tangents vs (4 sqrt2/pi) sqrt(n(n-1))", ok,
            "mean=%.3f theory=%.3f rel=%.4f density_rel_err=%.2g"
            % (mean, theory, rel, rep["corrected_rel_err"]))


def test_criterion_11_determinism(tmp_path):
    from lemnilab.experiments import ExperimentConfig, run

    ok = True
    details = []
    for exp in ("length", "tangents", "components"):
        blobs = []
        for w in (1, 8):
            out = str(tmp_path / ("%s_w%d" % (exp, w)))
            run(ExperimentConfig(exp, [4], trials=20, seed=7, output_dir=out, workers=w))
            with open(os.path.join(out, "%s_n4_trials.csv" % exp), "rb") as fh:
                blobs.append(fh.read())
        same = blobs[0] == blobs[1]
        ok = ok and same
        details.append("%s=%s" % (exp, "identical" if same else "DIFFERS"))
    _report(11, "byte-identical CSVs under 1 and 8 workers", ok, "; ".join(details))
