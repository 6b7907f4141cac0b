"""Analysis, verification, sweep and subset commands.

Each command takes a :class:`Problem` (built from a spec file, a named
fixture or a random draw) and returns plain data; ``main`` handles I/O.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import bounds as bd
from ..cheeger import MAX_ENUMERATION, birth_death_kprime, brute_force_constants, cheeger_constants
from ..chains import BirthDeathSpec, LatticeChainSpec, build_fixture, random_form
from ..errors import GapCertError, SpecValidationError, TooManyStates
from ..forms import PathForm
from ..spectral import MAX_DENSE, lambda0_exact, lambda1_exact, truncation_sweep
from .specfile import ChainSpecFile, subset_indices

__all__ = [
    "AnalyzeOptions",
    "Problem",
    "problem_from_spec",
    "problem_from_fixture",
    "random_problems",
    "cmd_analyze",
    "cmd_verify",
    "cmd_sweep",
    "cmd_subsets",
    "SWEEP_COLUMNS",
    "VERIFY_TOL",
]

VERIFY_TOL = 1e-9
SWEEP_COLUMNS = ("param", "N", "lambda1_exact", "small_side_cheeger", "sandwich_lower", "moment_upper")
_TILT_CANDIDATES = 8

# analysis defaults for fixtures that have a natural drift function
_FIXTURE_ANALYSIS = {
    "ParityBD": {"phi": "sqrt(i)", "A": "i<=0", "B": "i<=20"},
    "PolyBD": {"phi": "1 + i^0.25", "eps": (0.01, 0.1, 1.0)},
    "ConstBD": {"p": "$a + $b"},
}


@dataclass(frozen=True)
class AnalyzeOptions:
    alpha: tuple | None = None
    levels: tuple | None = None
    kappa: float = 1.0
    eps: tuple | None = None


@dataclass
class Problem:
    """A chain ready for analysis.

    ``raw`` is what the bound functions receive (a birth-death spec keeps its
    rate expressions); ``obj`` is the finite form-like object behind it.
    """

    label: str
    raw: object
    obj: object
    analysis: dict = field(default_factory=dict)
    family: object = None

    @property
    def n(self) -> int:
        return self.obj.n


def problem_from_spec(spec: ChainSpecFile, label: str = "spec") -> Problem:
    built = spec.build()
    if isinstance(built, BirthDeathSpec):
        return Problem(label, built, built.path_form(), dict(spec.analysis), built)
    if isinstance(built, LatticeChainSpec):
        return Problem(label, built.form(), built.form(), dict(spec.analysis), built)
    return Problem(label, built, built, dict(spec.analysis))


def problem_from_fixture(name: str, **params) -> Problem:
    built = build_fixture(name, **params)
    analysis = dict(_FIXTURE_ANALYSIS.get(name, {}))
    label = name + "".join(f" {k}={v}" for k, v in sorted(params.items()))
    if isinstance(built, BirthDeathSpec):
        return Problem(label, built, built.path_form(), analysis, built)
    return Problem(label, built, built, analysis)


def random_problems(count: int, seed: int, max_n: int = 12) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(2, max_n + 1))
        form = random_form(rng, n)
        out.append(Problem(f"random seed={seed} #{k} n={n}", form, form))
    return out


# analysis ----------------------------------------------------------------


class _Collector:
    """Runs report sections, turning library errors into error entries."""

    def __init__(self):
        self.errors = []

    def run(self, section, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (GapCertError, ValueError, ArithmeticError) as exc:
            self.errors.append({"section": section, "error": type(exc).__name__, "message": str(exc)})
            return None


def _settings(problem: Problem, options: AnalyzeOptions) -> dict:
    a = problem.analysis
    out = {
        "alpha": tuple(options.alpha if options.alpha is not None else a.get("alpha", (0.0, 0.5, 1.0))),
        "levels": tuple(options.levels if options.levels is not None else a.get("levels", ())),
        "eps": tuple(options.eps if options.eps is not None else a.get("eps", ())),
        "kappa": float(options.kappa),
    }
    for key in ("A", "B"):
        out[key] = subset_indices(a[key], problem.n) if key in a else None
    for key in ("phi", "p"):
        out[key] = a.get(key)
    return out


def _exact(problem: Problem, col: _Collector) -> dict:
    obj = problem.obj
    out = {}
    if not isinstance(obj, PathForm) and obj.n > MAX_DENSE and not obj.is_path():
        col.errors.append({"section": "exact", "error": "TooManyStates", "message": f"n={obj.n} exceeds {MAX_DENSE}"})
        return out
    if obj.has_killing:
        res = col.run("exact", lambda0_exact, obj)
        if res is not None:
            out["lambda0"] = {"value": res.value, "method": res.method, "residual": res.residual}
    else:
        out["lambda0"] = {"value": 0.0, "method": "exact", "residual": 0.0}
        res = col.run("exact", lambda1_exact, obj)
        if res is not None:
            out["lambda1"] = {"value": res.value, "method": res.method, "residual": res.residual}
    return out


def _cheeger(problem: Problem, alphas, col: _Collector) -> list:
    rows = []
    for alpha in alphas:
        params = None
        if alpha != 0:
            weights = col.run("cheeger", bd.resolve_weights, problem.obj)
            if weights is None:
                continue
            params = weights[0].with_alpha(alpha)
        c = col.run("cheeger", cheeger_constants, problem.obj, params)
        if c is None:
            continue
        rows.append(
            {
                "alpha": float(alpha),
                "h": c.h,
                "k": c.k,
                "k_prime": c.k_prime,
                "exact": dict(c.exact),
                "method": c.method,
            }
        )
    return rows


def _tilts(problem: Problem, settings: dict, col: _Collector) -> list:
    """Tilted-measure certificates for the user's ``p`` and for ``p = max(q, t)``.

    Every admissible ``p`` gives a valid bound, so trying a few thresholds
    ``t`` from the spread of total rates and keeping the best loses nothing.
    """
    obj = problem.obj
    q = np.exp(obj.log_total_rates()) if isinstance(obj, PathForm) else obj.total_rates()
    q = q[q > 0]
    certs = []
    if settings["p"] is not None:
        res = col.run("tilted", bd.tilted_measure_bounds, problem.raw, settings["p"], kappa=settings["kappa"])
        if res:
            certs += [_tag(c, p="given") for c in res.values()]
    if q.size == 0:
        return certs
    best = {}
    full_q = np.exp(obj.log_total_rates()) if isinstance(obj, PathForm) else obj.total_rates()
    for t in np.unique(np.quantile(q, np.linspace(0.0, 1.0, _TILT_CANDIDATES))):
        p = np.maximum(full_q, t)
        res = col.run("tilted", bd.tilted_measure_bounds, obj, p, kappa=settings["kappa"])
        for key, cert in (res or {}).items():
            if key not in best or cert.value > best[key].value:
                best[key] = _tag(cert, p=f"max(q, {float(t)!r})")
    return certs + [best[k] for k in sorted(best)]


def _tag(cert, **flags):
    return bd.BoundCertificate(cert.target, cert.direction, cert.value, cert.theorem, cert.inputs, {**cert.flags, **flags})


def _prefix_level(idx) -> int | None:
    """``n`` when ``idx`` is ``{0, ..., n}``."""
    if idx is None or idx.size == 0:
        return None
    return int(idx[-1]) if idx[0] == 0 and idx[-1] == idx.size - 1 else None


def _certificates(problem: Problem, settings: dict, cheeger_rows: list, col: _Collector) -> list:
    raw, obj = problem.raw, problem.obj
    A, B, phi = settings["A"], settings["B"], settings["phi"]
    kappa = settings["kappa"]
    certs = []
    ls = col.run("lawler-sokal", bd.lawler_sokal_bounds, raw, kappa=kappa)
    certs += list((ls or {}).values())
    if obj.has_killing:
        c = col.run("cheeger-killing", bd.killing_cheeger_bound, raw)
        certs += [c] if c else []
        certs += _tilts(problem, settings, col)
        if phi is not None and B is not None:
            c = col.run("lyapunov-dirichlet", bd.lyapunov_dirichlet_bound, raw, B, phi)
            certs += [c] if c else []
        return certs
    # without killing lambda0 = 0 is known exactly; its bounds are all vacuous
    certs = [c for c in certs if c.target != "lambda0"]
    g = col.run("cheeger-gap", bd.gap_cheeger_bounds, raw)
    certs += list((g or {}).values())
    plain = next((r for r in cheeger_rows if r["alpha"] == 0.0), None)
    if plain is not None and plain["k_prime"] > 0:
        M = bd.jump_density(obj, 0.0)
        c = col.run("uniform-rate", bd.uniform_rate_bound, plain["k_prime"], M, obj)
        certs += [c] if c else []
    certs += [c for c in _tilts(problem, settings, col) if c.target != "lambda0"]
    if B is not None:
        c = col.run("local-small-side", bd.small_side_from_local, raw, B)
        certs += [c] if c else []
    if A is not None and B is not None:
        s = col.run("sandwich", bd.gap_sandwich, raw, A, B)
        certs += list((s or {}).values())
        if phi is not None:
            s = col.run("lyapunov-gap", bd.lyapunov_gap_bound, raw, phi, A, B)
            certs += list((s or {}).values())
    if isinstance(raw, BirthDeathSpec):
        n = _prefix_level(B)
        if n is not None:
            d = col.run("drift-gap", bd.drift_gap_bound, raw, n)
            certs += list((d or {}).values())
        if phi is not None:
            grid = settings["eps"] or (1e-3, 1e-2, 0.1, 1.0, 10.0)
            c = col.run("moment-upper", bd.moment_upper_bound, raw, phi, eps_grid=grid)
            if c is not None:
                scope = "family" if c.inputs.get("eps_star_source") == "probe" else "instance"
                certs.append(_tag(c, scope=scope))
    return certs


def _ranked(certs: list) -> dict:
    out = {}
    for target in ("lambda0", "lambda1"):
        lower = [c for c in certs if c.target == target and c.direction == "lower"]
        upper = [c for c in certs if c.target == target and c.direction == "upper" and c.flags.get("scope") != "family"]
        if not lower and not upper:
            continue
        entry = {}
        if lower:
            best = max(lower, key=lambda c: c.value)
            entry["best_lower"] = {"value": best.value, "theorem": best.theorem}
        if upper:
            best = min(upper, key=lambda c: c.value)
            entry["best_upper"] = {"value": best.value, "theorem": best.theorem}
        out[target] = entry
    return out


def _drift(problem: Problem, settings: dict, col: _Collector) -> list:
    fam, phi = problem.family, settings["phi"]
    out = []
    if isinstance(fam, BirthDeathSpec):
        window = (1, fam.N)
        r = col.run("drift", bd.normalized_drift, fam, window)
        out += [{"kind": "normalized", **r.to_dict()}] if r else []
        if phi is not None:
            r = col.run("drift", bd.lyapunov_ratio, fam, phi, window)
            out += [{"kind": "lyapunov", **r.to_dict()}] if r else []
    elif isinstance(fam, LatticeChainSpec):
        window = (1, min(fam.L, 200))
        r = col.run("drift", bd.lattice_drift, fam, window)
        out += [{"kind": "lattice", **r.to_dict()}] if r else []
        if phi is not None:
            r = col.run("drift", bd.lyapunov_ratio, fam, phi, window)
            out += [{"kind": "lyapunov", **r.to_dict()}] if r else []
    return out


def _trend(problem: Problem, settings: dict, col: _Collector) -> list:
    fam = problem.family
    if not isinstance(fam, BirthDeathSpec):
        return []
    rows = []
    for N in settings["levels"] or (fam.N,):
        r = col.run("tail-trend", birth_death_kprime, fam.with_level(N), 0.5)
        if r is not None:
            rows.append({"N": int(N), "k_prime_half_lower": r.value, "argmin": int(r.argmin)})
    return rows


def _probes(problem: Problem, settings: dict, col: _Collector) -> list:
    fam, phi = problem.family, settings["phi"]
    if not isinstance(fam, BirthDeathSpec) or phi is None:
        return []
    out = []
    for eps in settings["eps"]:
        r = col.run("probe", bd.integrability_probe, fam, phi, eps)
        out += [r.to_dict()] if r else []
    return out


def cmd_analyze(problem, options: AnalyzeOptions | None = None) -> dict:
    """Full report: exact values, Cheeger constants, certificates and drift.

    Sections that fail record an entry under ``"errors"`` and the rest of
    the report is still produced.
    """
    if isinstance(problem, ChainSpecFile):
        problem = problem_from_spec(problem)
    options = options or AnalyzeOptions()
    col = _Collector()
    settings = _settings(problem, options)
    exact = _exact(problem, col)
    cheeger_rows = _cheeger(problem, settings["alpha"], col)
    certs = _certificates(problem, settings, cheeger_rows, col)
    report = {
        "chain": {"label": problem.label, "n": problem.n, "killing": bool(problem.obj.has_killing)},
        "exact": exact,
        "cheeger": cheeger_rows,
        "certificates": [c.to_dict() for c in certs],
        "ranked": _ranked(certs),
    }
    drift = _drift(problem, settings, col)
    if drift:
        report["drift"] = drift
    trend = _trend(problem, settings, col)
    if trend:
        report["tail_trend"] = trend
    probes = _probes(problem, settings, col)
    if probes:
        report["probes"] = probes
    if settings["levels"] and problem.family is not None:
        rows = col.run("truncation", truncation_sweep, problem.family, settings["levels"])
        if rows:
            report["truncation"] = [
                {"N": r.N, "n": r.n, "lambda1": r.lambda1, "lambda0_without_origin": r.lambda0_without_origin}
                for r in rows
            ]
    report["errors"] = col.errors
    return report


# verification ------------------------------------------------------------


def _check(lines, ok: bool, text: str) -> bool:
    lines.append(("ok   " if ok else "FAIL ") + text)
    return ok


def cmd_verify(problem, options: AnalyzeOptions | None = None, *, tamper=None):
    """Check every certificate against the exact eigenvalue.

    Returns ``(exit_code, lines)``: 0 when every lower bound is at most the
    exact value plus ``VERIFY_TOL`` (relative to ``max(1, value)``) and
    every upper bound at least the exact value minus it, 2 otherwise.
    Certificates about an infinite family (``scope = "family"``) are
    reported but not compared with the truncation.  ``tamper`` receives
    the certificate list and returns the list to check; it exists to
    exercise the failure path.
    """
    if isinstance(problem, ChainSpecFile):
        problem = problem_from_spec(problem)
    options = options or AnalyzeOptions()
    if problem.n > MAX_DENSE:
        raise TooManyStates(f"verification needs n <= {MAX_DENSE}, got {problem.n}")
    col = _Collector()
    settings = _settings(problem, options)
    cheeger_rows = _cheeger(problem, settings["alpha"], col)
    certs = _certificates(problem, settings, cheeger_rows, col)
    if tamper is not None:
        certs = list(tamper(list(certs)))
    obj = problem.obj
    exact = {"lambda0": lambda0_exact(obj).value}
    if not obj.has_killing:
        exact["lambda1"] = lambda1_exact(obj).value
    lines = [f"# {problem.label}: n={problem.n}"]
    lines += [f"# {e['section']}: {e['error']}: {e['message']}" for e in col.errors]
    passed = True
    for c in certs:
        if c.target not in exact:
            lines.append(f"skip {c.theorem} ({c.target} {c.direction} {c.value!r})")
            continue
        if c.flags.get("scope") == "family":
            lines.append(f"skip {c.theorem} ({c.target} {c.direction} {c.value!r}, infinite chain)")
            continue
        value = exact[c.target]
        tol = VERIFY_TOL * max(1.0, abs(value))
        ok = c.value <= value + tol if c.direction == "lower" else c.value >= value - tol
        passed &= _check(lines, ok, f"{c.theorem}: {c.target} {c.direction} {c.value!r} vs exact {value!r}")
    if obj.n <= MAX_ENUMERATION:
        form = obj.to_form() if isinstance(obj, PathForm) else obj
        c = brute_force_constants(form)
        if "lambda1" in exact:
            lam = exact["lambda1"]
            passed &= _check(lines, c.k / 2 <= c.k_prime * (1 + 1e-12) and c.k_prime <= c.k * (1 + 1e-12), f"k/2 <= k' <= k ({c.k!r}, {c.k_prime!r})")
            passed &= _check(lines, c.k >= lam - VERIFY_TOL * max(1.0, lam), f"k >= lambda1 ({c.k!r} vs {lam!r})")
        else:
            lam = exact["lambda0"]
            passed &= _check(lines, c.h >= lam - VERIFY_TOL * max(1.0, lam), f"h >= lambda0 ({c.h!r} vs {lam!r})")
    return (0 if passed else 2), lines


# sweep -------------------------------------------------------------------


def cmd_sweep(problem, param: str, grid, options: AnalyzeOptions | None = None, *, eps_star=None) -> list:
    """Rows of :data:`SWEEP_COLUMNS` over ``grid`` values of ``$param`` and the levels.

    ``moment_upper`` is filled only when ``eps_star`` is given and the
    analysis has a ``phi``.  An empty grid gives no rows.
    """
    if isinstance(problem, ChainSpecFile):
        problem = problem_from_spec(problem)
    fam = problem.family
    if not isinstance(fam, BirthDeathSpec):
        raise SpecValidationError("sweeps need a parameterised birth-death chain")
    options = options or AnalyzeOptions()
    levels = tuple(options.levels if options.levels is not None else problem.analysis.get("levels", (fam.N,)))
    rows = []
    for value in grid:
        for N in levels:
            spec = fam.with_params(**{param: float(value)}).with_level(int(N))
            sub = Problem(problem.label, spec, spec.path_form(), problem.analysis, spec)
            rows.append(_sweep_row(sub, param, float(value), eps_star))
    return rows


def _sweep_row(problem: Problem, param: str, value: float, eps_star) -> dict:
    spec, a = problem.family, problem.analysis
    row = {"param": value, "N": spec.N}
    row["lambda1_exact"] = lambda1_exact(problem.obj).value
    row["small_side_cheeger"] = bd.gap_cheeger_bounds(spec, chained=True)["small_side"].value
    if "A" in a and "B" in a:
        A, B = subset_indices(a["A"], problem.n), subset_indices(a["B"], problem.n)
        try:
            row["sandwich_lower"] = bd.gap_sandwich(spec, A, B)["lower"].value
        except GapCertError:
            row["sandwich_lower"] = None
    if eps_star is not None and "phi" in a:
        row["moment_upper"] = bd.moment_upper_bound(spec, a["phi"], eps_star).value
    return row


# subsets -----------------------------------------------------------------


def cmd_subsets(problem, alpha: float = 0.0) -> dict:
    """``h``, ``k``, ``k'`` of the (modified) form with witnessing subsets."""
    if isinstance(problem, ChainSpecFile):
        problem = problem_from_spec(problem)
    obj = problem.obj
    if obj.n > MAX_ENUMERATION:
        raise TooManyStates(f"subset enumeration needs n <= {MAX_ENUMERATION}, got {obj.n}")
    params = None
    if alpha != 0:
        params = bd.resolve_weights(obj)[0].with_alpha(alpha)
    form = obj.to_form() if isinstance(obj, PathForm) else obj
    c = brute_force_constants(form, params)

    def listed(w):
        return None if w is None else sorted(int(i) for i in w)

    return {
        "chain": {"label": problem.label, "n": obj.n},
        "alpha": float(alpha),
        "h": c.h,
        "k": c.k,
        "k_prime": c.k_prime,
        "witnesses": {"h": listed(c.argmin_h), "k": listed(c.argmin_k), "k_prime": listed(c.argmin_kprime)},
        "notes": list(c.notes),
    }
