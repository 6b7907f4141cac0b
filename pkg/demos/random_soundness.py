"""Every certificate against the exact eigenvalue on random reversible chains.

This is the same loop ``gapcert verify --random`` runs, written out so the
individual comparisons are visible.

Run with ``python demos/random_soundness.py``.
"""

import warnings

import numpy as np

from gapcert import bounds
from gapcert.chains import random_form
from gapcert.spectral import lambda1_exact

warnings.simplefilter("ignore")

rng = np.random.default_rng(11)
worst = {}
for _ in range(100):
    form = random_form(rng, int(rng.integers(2, 10)))
    lam = lambda1_exact(form).value
    certs = {
        "small-side": bounds.gap_cheeger_bounds(form)["small_side"],
        "two-sided": bounds.gap_cheeger_bounds(form)["two_sided"],
        "lawler-sokal": bounds.lawler_sokal_bounds(form)["gap_lower"],
    }
    for name, cert in certs.items():
        worst[name] = max(worst.get(name, 0.0), cert.value / lam)

for name, ratio in worst.items():
    print(f"{name:<13} largest bound / lambda1 = {ratio:.4f}")
assert all(r <= 1 + 1e-9 for r in worst.values())
