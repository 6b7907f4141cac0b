"""Small chains where the Cheeger-type lower bounds are attained.

Two states, the constant-rate chain and the star all have closed-form gaps,
so each certificate can be compared with the truth.

Run with ``python demos/sharp_examples.py``.
"""

import warnings

import numpy as np

from gapcert import bounds, build_fixture
from gapcert.spectral import lambda1_exact

warnings.simplefilter("ignore")


def show(label, form, certs):
    lam = lambda1_exact(form).value
    print(f"{label}: lambda1 = {lam:.6g}")
    for name, cert in certs.items():
        print(f"  {name:<14} {cert.direction:<5} {cert.value:.6g}  ratio {cert.value / lam:.4f}")


two = build_fixture("TwoState", p=0.5)
show("two states, p = 1/2", two, bounds.gap_cheeger_bounds(two))

const = build_fixture("ConstBD", a=4.0, b=1.0, N=2000)
show("constant rates a=4, b=1", const, bounds.gap_cheeger_bounds(const))

star = build_fixture("Star", q0=0.4, m=200)
p = np.maximum(star.total_rates(), 0.5)
show("star, q0 = 0.4", star, {"tilted": bounds.tilted_measure_bounds(star, p)["gap"]})
