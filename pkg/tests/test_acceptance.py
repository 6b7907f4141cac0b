"""Acceptance gate: each test checks one criterion at its stated tolerance.

Each test records a single PASS/FAIL line, and the terminal summary
prints all of them together. Named checks make a failure easy to trace
back to the exact clause that missed.
"""

import math
import time

import numpy as np

from gapcert import bounds, cheeger, spectral
from gapcert.chains import build_fixture, random_form
from gapcert.forms import default_params, uniform_params_for


def _close(x, target, tol):
    return abs(x - target) <= tol


def test_two_point_sharpness(criterion):
    start = time.perf_counter()
    form = build_fixture("TwoState", p=0.5)
    k_half = cheeger.brute_force_constants(form, default_params(form, 0.5)).k
    lam = spectral.lambda1_exact(form).value
    two_sided = bounds.gap_cheeger_bounds(form)["two_sided"].value
    elapsed = time.perf_counter() - start
    checks = {
        "k(1/2) = 2": _close(k_half, 2.0, 1e-12),
        "lambda1 = 2": _close(lam, 2.0, 1e-12),
        "two-sided bound = 2": _close(two_sided, 2.0, 1e-12),
        "runtime < 1 s": elapsed < 1.0,
    }
    assert not criterion(1, checks, elapsed)


def test_small_side_ratio(criterion):
    start = time.perf_counter()
    checks = {}
    for p in (0.1, 0.25, 0.5):
        c = cheeger.brute_force_constants(build_fixture("TwoState", p=p))
        checks[f"k'/k = 1-p at p={p}"] = _close(c.k_prime / c.k, 1 - p, 1e-12)
    assert not criterion(2, checks, time.perf_counter() - start)


def test_constant_rate_sharpness(criterion):
    start = time.perf_counter()
    bd = build_fixture("ConstBD", a=4.0, b=1.0, N=2000)
    small_side = bounds.gap_cheeger_bounds(bd)["small_side"].value
    tilted = bounds.tilted_measure_bounds(bd, "$a + $b")["gap"].value
    lam = spectral.lambda1_exact(bd).value
    elapsed = time.perf_counter() - start
    closed = (math.sqrt(4.0) - math.sqrt(1.0)) ** 2
    checks = {
        "small-side bound = 1": _close(small_side, closed, 1e-10),
        "tilted bound = 1": _close(tilted, closed, 1e-10),
        f"lambda1(2000) in [0.99, 1.0] (got {lam!r})": 0.99 <= lam <= 1.0,
        "runtime < 10 s": elapsed < 10.0,
    }
    assert not criterion(3, checks, elapsed)


def _star_certificates(q0):
    star = build_fixture("Star", q0=q0, m=50)
    p = np.maximum(star.total_rates(), 0.5)
    return (
        spectral.lambda1_exact(star).value,
        bounds.tilted_measure_bounds(star, p)["gap"].value,
        bounds.gap_cheeger_bounds(star)["small_side"].value,
    )


def test_star_sharpness_regimes(criterion):
    start = time.perf_counter()
    lam, tilted, small_side = _star_certificates(0.4)
    _, tilted_2, small_side_2 = _star_certificates(2.0)
    target = 0.5 / (2.0 + math.sqrt(3.0))
    checks = {
        "q0=0.4: lambda1 = 0.5": _close(lam, 0.5, 1e-10),
        "q0=0.4: tilted bound = 0.5": _close(tilted, 0.5, 1e-9),
        "q0=0.4: small-side bound = 0.5": _close(small_side, 0.5, 1e-9),
        "q0=2: tilted bound = 0.5": _close(tilted_2, 0.5, 1e-9),
        f"q0=2: small-side bound = 1/(2(2+sqrt 3)) (got {small_side_2!r})": _close(small_side_2, target, 1e-9),
    }
    assert not criterion(4, checks, time.perf_counter() - start)


def test_polynomial_phase_behavior(criterion):
    start = time.perf_counter()
    lam = {
        g: [spectral.lambda1_exact(build_fixture("PolyBD", gamma=g, N=N)).value for N in (200, 2000)]
        for g in (1.5, 2.0, 2.5)
    }
    ratio = cheeger.birth_death_kprime(build_fixture("PolyBD", gamma=2.0, N=10**5), 0.5).value
    tail = np.sum(1.0 / np.arange(1, 10**5 + 1, dtype=float) ** 2)
    probes = [
        bounds.integrability_probe(build_fixture("PolyBD", gamma=1.5, N=2000), "1 + i^0.25", eps).classification
        for eps in (0.01, 0.1, 1.0)
    ]
    elapsed = time.perf_counter() - start
    checks = {
        "gamma=1.5: lambda1(2000) < lambda1(200)/2": lam[1.5][1] < 0.5 * lam[1.5][0],
        f"gamma=2.0: lambda1(2000) >= 0.9 lambda1(200) (ratio {lam[2.0][1] / lam[2.0][0]:.4f})": lam[2.0][1]
        >= 0.9 * lam[2.0][0],
        "gamma=2.5: lambda1(2000) >= 0.9 lambda1(200)": lam[2.5][1] >= 0.9 * lam[2.5][0],
        "tail ratio at gamma=2, N=1e5": _close(ratio, 1.0 / (math.sqrt(2.0) * tail), 1e-3),
        "probe diverges for eps in {0.01, 0.1, 1}": probes == ["diverges"] * 3,
        "runtime < 60 s": elapsed < 60.0,
    }
    assert not criterion(5, checks, elapsed)


def test_parity_chain(criterion):
    start = time.perf_counter()
    minima = [cheeger.birth_death_kprime(build_fixture("ParityBD", N=N), 0.5).value for N in (10**2, 10**4)]
    drift = bounds.lyapunov_ratio(build_fixture("ParityBD", N=2000), "sqrt(i)", (1, 2000))
    lam = [spectral.lambda1_exact(build_fixture("ParityBD", N=N)).value for N in (200, 2000)]
    elapsed = time.perf_counter() - start
    checks = {
        "tail-ratio minimum drops 10x": minima[0] >= 10 * minima[1],
        "drift ratio negative on window": drift.classification == "negative-on-window",
        "lambda1 >= 0.05 at N=200, 2000": min(lam) >= 0.05,
        "runtime < 30 s": elapsed < 30.0,
    }
    assert not criterion(6, checks, elapsed)


def _lambda1_certificates(form, c):
    n = form.n
    certs = list(bounds.gap_cheeger_bounds(form).values())
    certs += list(bounds.lawler_sokal_bounds(form).values())
    certs += list(bounds.tilted_measure_bounds(form, form.row_mass() / form.pi).values())
    certs.append(bounds.uniform_rate_bound(c.k_prime, bounds.jump_density(form, 0.0), form))
    if n >= 3:
        order = np.argsort(-form.pi, kind="stable")
        certs += list(bounds.gap_sandwich(form, order[:1], order[: n - 1]).values())
    return [cert for cert in certs if cert.target == "lambda1"]


def test_soundness_sweep(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = {"lower <= lambda1 + 1e-9 <= upper": 0, "k/2 <= k' <= k": 0, "k >= lambda1": 0,
                "killing improvement": 0, "small-side improvement": 0}
    for _ in range(200):
        form = random_form(rng, int(rng.integers(2, 13)))
        lam = spectral.lambda1_exact(form).value
        c = cheeger.brute_force_constants(form)
        for cert in _lambda1_certificates(form, c):
            if (cert.direction == "lower" and cert.value > lam + 1e-9) or (
                cert.direction == "upper" and cert.value < lam - 1e-9
            ):
                failures["lower <= lambda1 + 1e-9 <= upper"] += 1
        failures["k/2 <= k' <= k"] += not (c.k / 2 - 1e-12 <= c.k_prime <= c.k + 1e-12)
        failures["k >= lambda1"] += not (c.k >= lam - 1e-9)
        # improvements at the uniform weight r = M
        M = bounds.jump_density(form, 0.5)
        uniform = uniform_params_for(form, M)
        killing = bounds.killing_cheeger_bound(form, uniform).value
        failures["killing improvement"] += killing < bounds.lawler_sokal_bounds(form, M)["killing_lower"].value - 1e-12
        small_side = bounds.gap_cheeger_bounds(form, uniform)["small_side"].value
        failures["small-side improvement"] += small_side < c.k_prime**2 / (2 * M) - 1e-12
    elapsed = time.perf_counter() - start
    checks = {f"{name} ({count} violations)": count == 0 for name, count in failures.items()}
    checks["runtime < 60 s"] = elapsed < 60.0
    assert not criterion(7, checks, elapsed)


def _indicators(n):
    masks = np.arange(1, 2**n)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def test_functional_oracle(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, below = 0.0, 0
    for s in range(20):
        form = random_form(rng, int(rng.integers(3, 11)), killing=s % 2 == 0)
        c = cheeger.brute_force_constants(form)
        ind = _indicators(form.n)
        proper = ind[:-1]
        mins = (
            min(cheeger.functional_h(form, f) for f in ind),
            min(cheeger.functional_k(form, f) for f in proper),
            min(cheeger.functional_kprime(form, f) for f in proper),
        )
        worst = max(worst, *(abs(m - v) for m, v in zip(mins, (c.h, c.k, c.k_prime))))
        for g in rng.standard_normal((100, form.n)):
            below += cheeger.functional_h(form, np.abs(g)) < c.h - 1e-12
            below += cheeger.functional_k(form, g) < c.k - 1e-12
            below += cheeger.functional_kprime(form, g) < c.k_prime - 1e-12
    pi = rng.uniform(size=8)
    pi /= pi.sum()
    duals = [cheeger.mean_deviation_dual(g, pi) for g in rng.standard_normal((100, 8))]
    gap = max(abs(d.deviation - d.pairing) for d in duals)
    checks = {
        f"indicator minimum equals constant (worst {worst:.1e})": worst <= 1e-12,
        "random f never below constant": below == 0,
        "mean-deviation identity": gap <= 1e-12,
        "dual witness at sup-distance 1": all(abs(d.sup_distance - 1.0) <= 1e-12 for d in duals),
    }
    assert not criterion(8, checks, time.perf_counter() - start)

