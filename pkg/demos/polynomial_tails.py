"""Spectral gap of birth-death chains with rates i^gamma.

The gap of the infinite chain is positive exactly when gamma >= 2.  Exact
truncated values fall with the truncation level below that threshold and
settle above it, slowly at gamma = 2 itself.  The Cheeger lower bounds
track the same split.

Run with ``python demos/polynomial_tails.py``.
"""

import warnings

from gapcert import bounds, build_fixture
from gapcert.spectral import lambda1_exact

warnings.simplefilter("ignore")

print(f"{'gamma':>6} {'N':>6} {'lambda1':>12} {'small-side':>12} {'two-sided':>12}")
for gamma in (1.5, 2.0, 2.5, 3.0):
    for N in (200, 2000):
        bd = build_fixture("PolyBD", gamma=gamma, N=N)
        lam = lambda1_exact(bd).value
        cheeger = bounds.gap_cheeger_bounds(bd)
        print(
            f"{gamma:6.1f} {N:6d} {lam:12.5g} "
            f"{cheeger['small_side'].value:12.5g} {cheeger['two_sided'].value:12.5g}"
        )

# the Lyapunov ratio Omega phi / phi for phi = sqrt(i) is what drives the split
for gamma in (2.0, 2.5):
    rep = bounds.lyapunov_ratio(build_fixture("PolyBD", gamma=gamma, N=10), "sqrt(i)", (100, 10000))
    print(f"gamma={gamma}: sup Omega phi / phi on [100, 10000] = {rep.sup:.4f} ({rep.classification})")
