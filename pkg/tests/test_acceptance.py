"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (collected in ``RESULTS`` and
printed in the pytest terminal summary) before asserting.  Running this file
as a script prints the same lines.
"""

import itertools
import math
import shutil
from functools import lru_cache

import numpy as np
import pytest

from tribaker.cli import EXIT_OK, main
from tribaker.experiments import qfield_pair
from tribaker.maps import MapSpec, closed_tribaker, open_map, parity_operator
from tribaker.phasespace import field_distance, q_field
from tribaker.scars import scar_modes
from tribaker.shortpo import build_basis, default_npos_sweep, performance, performance_sweep, shortpo_spectrum
from tribaker.spectra import FitError, count_longlived, eig_full, eigenvalues, fwl_fit
from tribaker.symbolic import (enumerate_orbits, escape_rate, orbit_points, primitive_necklace_count,
                               shift_point, survival_probability)

pytestmark = pytest.mark.slow

RESULTS = {}

FWL_BAND = (0.25, 0.38)
LN_3_2 = math.log(1.5)


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def members(family, l):
    if family == "closed":
        return [MapSpec("closed", 0, l)]
    return [MapSpec(family, k, l) for k in range(1, l + 1)]


@lru_cache(maxsize=None)
def exact_eigenvalues(spec):
    return eigenvalues(np.asarray(open_map(spec)))


@lru_cache(maxsize=None)
def sweep(spec):
    return {pt.n_pos: pt.report.P for pt in
            performance_sweep(spec, default_npos_sweep(spec.l), exact_eigenvalues(spec))}


# ---------------------------------------------------------------------------


def test_criterion_1_unitarity_and_parity():
    worst_u, worst_c = 0.0, 0.0
    for l in range(1, 7):
        B = closed_tribaker(l)
        worst_u = max(worst_u, np.abs(B.conj().T @ B - np.eye(3**l)).max())
        R = parity_operator(3**l)
        for family in ("closed", "shift", "intersection"):
            for spec in members(family, l):
                Bt = np.asarray(open_map(spec))
                worst_c = max(worst_c, np.abs(R @ Bt - Bt @ R).max())
    ok = worst_u < 1e-12 and worst_c < 1e-12
    assert record(1, ok, f"max|B^dag B - I| = {worst_u:.2e}, max|[R, B]| = {worst_c:.2e} (l = 1..6)")


def test_criterion_2_family_coincidence():
    same = [np.asarray(open_map(MapSpec("shift", 1, l))).tobytes()
            == np.asarray(open_map(MapSpec("intersection", 1, l))).tobytes() for l in range(1, 7)]
    assert record(2, all(same), f"bit-identical at l = 1..6: {same}")


def brute_necklaces(L):
    seen = set()
    for w in itertools.product((0, 2), repeat=L):
        if any(L % d == 0 and w[:d] * (L // d) == w for d in range(1, L)):
            continue
        seen.add(min(w[i:] + w[:i] for i in range(L)))
    return len(seen)


def test_criterion_3_classical_oracles():
    counts_ok = all(
        brute_necklaces(L) == primitive_necklace_count(L) == sum(1 for o in enumerate_orbits(10) if o.L == L)
        for L in range(1, 11))
    closure_ok = True
    for orbit in enumerate_orbits(10):
        pts = orbit_points(orbit)
        x = pts[0]
        for _ in range(orbit.L):
            x = shift_point(x)
        closure_ok &= x == pts[0]
    rates, curves = {}, {}
    n_samples = 10**6
    for family in ("shift", "intersection"):
        for spec in members(family, 6):
            curve = survival_probability(spec, 24, n_samples, seed=2024, estimator="population")
            curves[spec.label] = dict(curve)
            rates[spec.label] = escape_rate(curve, 2 * spec.k)
    worst = max(abs(r / LN_3_2 - 1) for r in rates.values())
    rates_ok = worst <= 0.05
    # transient: survival at t = 1, 2 for shift k=1 vs k=3, with binomial standard errors
    gaps = []
    for t in (1, 2):
        a, b = curves["shift_k1_l6"][t], curves["shift_k3_l6"][t]
        se = math.sqrt(a * (1 - a) / n_samples + b * (1 - b) / n_samples)
        gaps.append((a - b) / se)
    transient_ok = all(abs(g) > 10 for g in gaps)
    ok = counts_ok and closure_ok and rates_ok and transient_ok
    assert record(3, ok, f"necklaces L<=10 {counts_ok}, closure {closure_ok}, "
                         f"max rate deviation {100 * worst:.2f}% of ln(3/2), "
                         f"shift k=1 vs k=3 gap at t=1,2 = {gaps[0]:.0f}, {gaps[1]:.0f} std errors")


def fwl_exponent(spec_list, gamma_c=0.1):
    samples = [(s.N, count_longlived(exact_eigenvalues(s), gamma_c)) for s in spec_list]
    try:
        return fwl_fit(samples).exponent, samples
    except FitError:
        return None, samples


def _fwl_criterion(n, members_to_fit):
    parts, ok = [], True
    for label, specs in members_to_fit:
        exponent, samples = fwl_exponent(specs)
        counts = [c for _, c in samples]
        if exponent is None:
            ok = False
            parts.append(f"{label}: fit undefined, N_mu(l=4..7) = {counts}")
        else:
            inside = FWL_BAND[0] <= exponent <= FWL_BAND[1]
            ok &= inside
            parts.append(f"{label}: exponent {exponent:.3f}, N_mu = {counts}")
    record(n, ok, "; ".join(parts))
    return ok


@pytest.mark.filterwarnings("ignore:dropping")
def test_criterion_4_fwl_shift():
    ok = _fwl_criterion(4, [(f"shift k={k}", [MapSpec("shift", k, l) for l in range(4, 8)]) for k in (1, 4)])
    assert ok


@pytest.mark.filterwarnings("ignore:dropping")
def test_criterion_5_fwl_intersection():
    ok = _fwl_criterion(5, [(f"intersection k={k}", [MapSpec("intersection", k, l) for l in range(4, 8)])
                            for k in range(1, 5)])
    assert ok


def test_criterion_6_good_regime():
    spec = MapSpec("shift", 1, 5)
    pts = performance_sweep(spec, range(1, 41), exact_eigenvalues(spec), epsilon=1e-3, floor=1e-2)
    hits = [pt.n_pos for pt in pts if pt.report.P >= 0.8]
    best = max(pts, key=lambda p: p.report.P)
    dist = {}
    for k in (1, 3):
        s = MapSpec("shift", k, 5)
        dist[k] = field_distance(*qfield_pair(s, 32, 32, 243, s.l, 1e-8))
    ok = bool(hits) and dist[1] * 3 <= dist[3]
    assert record(6, ok, f"first N_POs with P>=0.8: {hits[0] if hits else None} "
                         f"(best P {best.report.P:.3f} at {best.n_pos}); "
                         f"Q_32 distance k=1 {dist[1]:.4f}, k=3 {dist[3]:.4f}")


def test_criterion_7_performance_collapse():
    parts, ok = [], True
    for l in (5, 6):
        p1 = sweep(MapSpec("shift", 1, l))
        n_star = max(p1, key=lambda n: (p1[n], -n))
        ref = p1[n_star]
        collapse = {}
        for k in range(math.ceil(l / 2), l + 1):
            collapse[k] = max(sweep(MapSpec("shift", k, l)).values())
            ok &= collapse[k] <= ref - 0.4
        inter = {k: sweep(MapSpec("intersection", k, l))[n_star] for k in range(1, l + 1)}
        ok &= all(v >= inter[1] - 0.2 for v in inter.values())
        parts.append(f"l={l}: N*={n_star} P1={ref:.2f}, shift max P "
                     + ",".join(f"k{k}={v:.2f}" for k, v in collapse.items())
                     + "; intersection P(N*) " + ",".join(f"k{k}={v:.2f}" for k, v in inter.items()))
    assert record(7, ok, " | ".join(parts))


def test_criterion_8_property_suite(tmp_path):
    checks = {}
    # eigenpair residuals and biorthogonality
    res_ok, bio_ok = True, True
    for l in (3, 4, 5):
        for family in ("closed", "shift", "intersection"):
            for spec in members(family, l):
                B = np.asarray(open_map(spec))
                sp = eig_full(B)
                nb = np.linalg.norm(B, 2)
                res_ok &= max(sp.residual_right.max(), sp.residual_left.max()) <= 1e-8 * nb
                G = np.abs(sp.left.conj().T @ sp.right)
                sep = np.abs(sp.eigenvalues[:, None] - sp.eigenvalues[None, :]) > 1e-6
                bio_ok &= G[sep].max() <= 1e-8
    checks["residuals"] = res_ok
    checks["biorthogonality"] = bio_ok
    # scar normalization
    norm_ok = True
    for spec in (MapSpec("shift", 1, 5), MapSpec("shift", 3, 5), MapSpec("intersection", 3, 5)):
        U = np.asarray(open_map(spec))
        for orbit in enumerate_orbits(6):
            for m in scar_modes(orbit, U, spec.l):
                c = np.vdot(m.left, m.right)
                nr, nl = np.linalg.norm(m.right), np.linalg.norm(m.left)
                norm_ok &= abs(c.real - 1) <= 1e-10 and abs(c.imag) <= 1e-10 and abs(nr - nl) <= 1e-10 * nr
    checks["scar normalization"] = norm_ok
    # closed-map completeness field
    comp_ok = True
    for l in range(1, 5):
        sp = eig_full(closed_tribaker(l))
        comp_ok &= np.abs(q_field(sp, 3**l, 3**l).values - 1).max() <= 1e-6
    checks["Q_N = 1 field"] = comp_ok
    # P monotone in epsilon
    mono_ok = True
    for spec in (MapSpec("shift", 1, 5), MapSpec("shift", 3, 5)):
        U = np.asarray(open_map(spec))
        approx = shortpo_spectrum(build_basis(spec, 24, U=U), U).eigenvalues
        Ps = [performance(exact_eigenvalues(spec), approx, e).P for e in np.logspace(-5, -1, 9)]
        mono_ok &= all(a <= b for a, b in zip(Ps, Ps[1:]))
    checks["P monotone in epsilon"] = mono_ok
    # determinism of every command
    det_ok = True
    jobs = [["spectrum", "--l", "3", "--k", "1..3"],
            ["fwl", "--family", "intersection", "--l", "3,4", "--gamma-c", "1.5"],
            ["performance", "--l", "4", "--k", "1,2", "--npos", "4,8"],
            ["qfield", "--l", "3", "--npos", "6", "--j", "4", "--grid", "9"],
            ["classical", "--l", "4", "--k", "2", "--n-samples", "20000", "--seed", "5"],
            ["orbits", "--l-max", "6"]]
    for job in jobs:
        snaps = []
        for _ in range(2):
            shutil.rmtree(tmp_path, ignore_errors=True)
            out = tmp_path / "out"
            code = main(job + ["--out-dir", str(out), "--cache-dir", str(tmp_path / "cache")])
            det_ok &= code == EXIT_OK
            snaps.append({str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*"))
                          if p.is_file() and p.name != "run.log"})
        det_ok &= snaps[0] == snaps[1] and len(snaps[0]) > 1
    checks["command determinism"] = det_ok
    ok = all(checks.values())
    assert record(8, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    tests = [test_criterion_1_unitarity_and_parity, test_criterion_2_family_coincidence,
             test_criterion_3_classical_oracles, test_criterion_4_fwl_shift,
             test_criterion_5_fwl_intersection, test_criterion_6_good_regime,
             test_criterion_7_performance_collapse]
    for t in tests:
        try:
            t()
        except AssertionError:
            pass
    with tempfile.TemporaryDirectory() as d:
        try:
            test_criterion_8_property_suite(Path(d))
        except AssertionError:
            pass
    sys.exit(0 if all("PASS" in line for line in RESULTS.values()) else 1)
