"""Chain-spec files: a TOML subset with ``[chain]`` and ``[analysis]`` tables.

Three chain kinds are accepted::

    [chain]                      [chain]                    [chain]
    kind = "explicit"            kind = "birth_death"       kind = "lattice"
    n = 2                        a = "i^$gamma"             d = 2
    pi = [0.5, 0.5]              b = "i^$gamma"             L = 4
    q = [[0, 1, 1.0],            N = 2000                   R = 1
         [1, 0, 1.0]]            b0 = 1.0                   [[chain.rule]]
    d = [0.0, 0.0]               [chain.params]             e = [1, 0]
                                 gamma = 2.0                rate = "1"

``pi`` and ``d`` are optional for explicit chains (``pi`` then comes from
detailed balance).  The optional ``[analysis]`` table holds ``A``, ``B``
(index lists or predicates such as ``"i<=10"``), ``phi`` and ``p``
expressions, and ``alpha``, ``levels`` and ``eps`` lists.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..chains import BirthDeathSpec, LatticeChainSpec
from ..errors import GapCertError, SpecSyntaxError, SpecValidationError
from ..expr import Expr, parse_expr
from ..forms import RateChain, form_from_rates

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ChainSpecFile", "parse_chain_spec", "serialize_chain_spec", "subset_indices"]

KINDS = ("explicit", "birth_death", "lattice")
_CHAIN_KEYS = {
    "explicit": {"kind", "n", "pi", "q", "d"},
    "birth_death": {"kind", "a", "b", "N", "b0", "params"},
    "lattice": {"kind", "d", "L", "R", "rule", "params"},
}
_ANALYSIS_KEYS = {"A", "B", "phi", "p", "alpha", "levels", "eps"}
_PREDICATE = re.compile(r"^\s*i\s*(<=|<|>=|>|==)\s*(\d+)\s*$")


@dataclass(frozen=True)
class ChainSpecFile:
    """Validated contents of a spec file.

    ``chain`` holds the kind-specific fields with expressions parsed into
    trees, so two specs compare equal when they describe the same chain.
    """

    kind: str
    chain: dict
    analysis: dict = field(default_factory=dict)

    def build(self):
        """The chain object: a ``SymmetricJumpForm``, ``BirthDeathSpec`` or ``LatticeChainSpec``."""
        c = self.chain
        if self.kind == "birth_death":
            return BirthDeathSpec(c["a"], c["b"], c["N"], c.get("params", {}), c.get("b0"))
        if self.kind == "lattice":
            rules = {tuple(e): rate for e, rate in c["rule"]}
            return LatticeChainSpec(c["d"], c["L"], c["R"], rules, c.get("params", {}))
        n = c["n"]
        rows, cols, vals = zip(*c["q"]) if c["q"] else ((), (), ())
        q = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        chain = RateChain.from_rates(q, c.get("pi"), c.get("d"))
        return form_from_rates(chain)

    @property
    def n(self) -> int:
        c = self.chain
        if self.kind == "birth_death":
            return c["N"] + 1
        if self.kind == "lattice":
            return (2 * c["L"] + 1) ** c["d"]
        return c["n"]

    def __eq__(self, other):
        if not isinstance(other, ChainSpecFile):
            return NotImplemented
        return (self.kind, _key(self.chain), _key(self.analysis)) == (other.kind, _key(other.chain), _key(other.analysis))

    def __hash__(self):
        return hash((self.kind, repr(_key(self.chain)), repr(_key(self.analysis))))


def _key(value):
    if isinstance(value, dict):
        return tuple(sorted((k, _key(v)) for k, v in value.items()))
    if isinstance(value, (list, tuple)):
        return tuple(_key(v) for v in value)
    return value


def _locate(text: str, table: str, key: str):
    """``(line, column)`` of ``key =`` inside ``[table]``, or the table header."""
    current = None
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*\[\[?\s*([\w.]+)\s*\]\]?", line)
        if m:
            current = m.group(1)
            if current == table and header is None:
                header = (lineno, m.start(1) + 1)
            continue
        if current == table:
            m = re.match(r"^(\s*)" + re.escape(key) + r"\s*=", line)
            if m:
                return lineno, len(m.group(1)) + 1
    return header or (None, None)


class _Checker:
    def __init__(self, text: str):
        self.text = text

    def fail(self, table, key, message):
        line, col = _locate(self.text, table, key)
        raise SpecValidationError(f"[{table}] {key}: {message}", line, col)

    def integer(self, table, data, key, minimum=None):
        v = data.get(key)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(table, key, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(table, key, f"must be at least {minimum}, got {v}")
        return v

    def number(self, table, data, key):
        v = data.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(table, key, f"expected a finite number, got {v!r}")
        return float(v)

    def numbers(self, table, data, key, length=None):
        v = data.get(key)
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            self.fail(table, key, "expected a list of numbers")
        if length is not None and len(v) != length:
            self.fail(table, key, f"expected {length} entries, got {len(v)}")
        if not all(math.isfinite(x) for x in v):
            self.fail(table, key, "entries must be finite")
        return [float(x) for x in v]

    def expression(self, table, data, key, variables=("i",)):
        v = data.get(key)
        if not isinstance(v, str):
            self.fail(table, key, f"expected a quoted expression, got {v!r}")
        try:
            return parse_expr(v, variables)
        except SpecSyntaxError as exc:
            line, col = _locate(self.text, table, key)
            # point into the quoted string on the key's line
            if line is not None:
                raw = self.text.splitlines()[line - 1]
                start = raw.find(v)
                col = (start + exc.column) if start >= 0 and exc.column else col
            raise SpecSyntaxError(f"[{table}] {key}: {exc.args[0]}", line, col) from None

    def params(self, table, data):
        v = data.get("params", {})
        if not isinstance(v, dict):
            self.fail(table, "params", "expected a table of numbers")
        out = {}
        for k, x in v.items():
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                self.fail(f"{table}.params", k, f"expected a finite number, got {x!r}")
            out[k] = float(x)
        return out


def _toml_error(exc, text: str) -> SpecSyntaxError:
    msg = str(exc)
    m = re.search(r"\(at line (\d+), column (\d+)\)", msg)
    if m:
        return SpecSyntaxError(msg[: m.start()].strip(), int(m.group(1)), int(m.group(2)))
    lines = text.splitlines() or [""]
    return SpecSyntaxError(msg.replace("(at end of document)", "").strip(), len(lines), len(lines[-1]) + 1)


def parse_chain_spec(text: str) -> ChainSpecFile:
    """Parse and validate a spec file.

    Raises ``SpecSyntaxError`` for malformed text or expressions and
    ``SpecValidationError`` for well-formed but invalid content; both carry
    the 1-based line and column.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise _toml_error(exc, text) from None
    check = _Checker(text)
    unknown = set(raw) - {"chain", "analysis"}
    if unknown:
        name = sorted(unknown)[0]
        line, col = _locate(text, name, "")
        raise SpecValidationError(f"unknown table [{name}]", line, col)
    if "chain" not in raw:
        raise SpecValidationError("missing [chain] table", 1, 1)
    data = raw["chain"]
    kind = data.get("kind")
    if kind not in KINDS:
        check.fail("chain", "kind", f"expected one of {list(KINDS)}, got {kind!r}")
    for key in data:
        if key not in _CHAIN_KEYS[kind]:
            check.fail("chain", key, f"not a field of a {kind} chain")
    chain = {"explicit": _explicit, "birth_death": _birth_death, "lattice": _lattice}[kind](check, data)
    variables = ("i",) + tuple(f"i{k + 1}" for k in range(chain["d"])) if kind == "lattice" else ("i",)
    analysis = _analysis(check, raw.get("analysis", {}), _size(kind, chain), variables)
    spec = ChainSpecFile(kind, chain, analysis)
    try:
        spec.build()
    except SpecValidationError:
        raise
    except GapCertError as exc:
        line, col = _locate(text, "chain", "kind")
        raise SpecValidationError(f"[chain]: {exc}", line, col) from None
    return spec


def _size(kind, chain) -> int:
    if kind == "birth_death":
        return chain["N"] + 1
    if kind == "lattice":
        return (2 * chain["L"] + 1) ** chain["d"]
    return chain["n"]


def _explicit(check: _Checker, data: dict) -> dict:
    n = check.integer("chain", data, "n", minimum=1)
    out = {"n": n}
    if "pi" in data:
        pi = check.numbers("chain", data, "pi", n)
        if any(x <= 0 for x in pi):
            check.fail("chain", "pi", "entries must be positive")
        out["pi"] = tuple(pi)
    triples = data.get("q")
    if not isinstance(triples, list):
        check.fail("chain", "q", "expected a list of [i, j, rate] triples")
    q = []
    for t in triples:
        if not (isinstance(t, list) and len(t) == 3):
            check.fail("chain", "q", f"entry {t!r} is not an [i, j, rate] triple")
        i, j, rate = t
        if isinstance(i, bool) or isinstance(j, bool) or not isinstance(i, int) or not isinstance(j, int):
            check.fail("chain", "q", f"indices in {t!r} must be integers")
        if not (0 <= i < n and 0 <= j < n):
            check.fail("chain", "q", f"index out of range 0..{n - 1} in {t!r}")
        if i == j:
            check.fail("chain", "q", f"diagonal entry {t!r}")
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not math.isfinite(rate) or rate < 0:
            check.fail("chain", "q", f"negative or non-finite rate in {t!r}")
        q.append((i, j, float(rate)))
    out["q"] = tuple(q)
    if "d" in data:
        d = check.numbers("chain", data, "d", n)
        if any(x < 0 for x in d):
            check.fail("chain", "d", "killing rates must be nonnegative")
        out["d"] = tuple(d)
    return out


def _birth_death(check: _Checker, data: dict) -> dict:
    out = {
        "a": check.expression("chain", data, "a"),
        "b": check.expression("chain", data, "b"),
        "N": check.integer("chain", data, "N", minimum=1),
    }
    if "b0" in data:
        b0 = check.number("chain", data, "b0")
        if b0 <= 0:
            check.fail("chain", "b0", "must be positive")
        out["b0"] = b0
    params = check.params("chain", data)
    if params:
        out["params"] = params
    for key in ("a", "b"):
        missing = out[key].parameters() - set(params)
        if missing:
            check.fail("chain", key, f"unbound parameter ${sorted(missing)[0]}")
    return out


def _lattice(check: _Checker, data: dict) -> dict:
    d = check.integer("chain", data, "d", minimum=1)
    if d > 3:
        check.fail("chain", "d", "lattice dimension must be 1, 2 or 3")
    out = {"d": d, "L": check.integer("chain", data, "L", minimum=1), "R": check.integer("chain", data, "R", minimum=1)}
    rules = data.get("rule")
    if not isinstance(rules, list) or not rules:
        check.fail("chain.rule", "e", "a lattice chain needs at least one [[chain.rule]]")
    variables = ("i",) + tuple(f"i{k + 1}" for k in range(d))
    parsed = []
    for rule in rules:
        e = rule.get("e")
        if not isinstance(e, list) or len(e) != d or any(isinstance(x, bool) or not isinstance(x, int) for x in e):
            check.fail("chain.rule", "e", f"displacement {e!r} must list {d} integers")
        if not 0 < sum(abs(x) for x in e) <= out["R"]:
            check.fail("chain.rule", "e", f"displacement {e!r} is outside the range R={out['R']}")
        parsed.append((tuple(e), check.expression("chain.rule", rule, "rate", variables)))
    out["rule"] = tuple(parsed)
    params = check.params("chain", data)
    if params:
        out["params"] = params
    return out


def _subset(check: _Checker, data: dict, key: str, n: int):
    v = data[key]
    if isinstance(v, str):
        for part in v.split(" and "):
            m = _PREDICATE.match(part)
            if not m:
                check.fail("analysis", key, f"predicate {v!r} is not of the form 'i<=m' (joined by 'and')")
        return v.strip()
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in v):
        check.fail("analysis", key, "expected an index list or a predicate string")
    if any(not 0 <= x < n for x in v):
        check.fail("analysis", key, f"index out of range 0..{n - 1}")
    return tuple(sorted(set(v)))


def _analysis(check: _Checker, data: dict, n: int, variables=("i",)) -> dict:
    if not isinstance(data, dict):
        raise SpecValidationError("[analysis] must be a table")
    out = {}
    for key in data:
        if key not in _ANALYSIS_KEYS:
            check.fail("analysis", key, "unknown analysis field")
    for key in ("A", "B"):
        if key in data:
            out[key] = _subset(check, data, key, n)
    for key in ("phi", "p"):
        if key in data:
            # lattice chains name coordinates i1..id alongside the flat index i
            out[key] = check.expression("analysis", data, key, variables)
    if "alpha" in data:
        alpha = check.numbers("analysis", data, "alpha")
        if any(a not in (0.0, 0.5, 1.0) for a in alpha):
            check.fail("analysis", "alpha", "alpha must be 0, 0.5 or 1")
        out["alpha"] = tuple(alpha)
    if "levels" in data:
        levels = data["levels"]
        if not isinstance(levels, list) or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in levels):
            check.fail("analysis", "levels", "expected a list of positive integers")
        out["levels"] = tuple(levels)
    if "eps" in data:
        eps = check.numbers("analysis", data, "eps")
        if any(e < 0 for e in eps):
            check.fail("analysis", "eps", "entries must be nonnegative")
        out["eps"] = tuple(eps)
    return out


def subset_indices(subset, n: int) -> np.ndarray:
    """Index array of an analysis subset (list or predicate) within ``0..n-1``."""
    idx = np.arange(n)
    if isinstance(subset, str):
        keep = np.ones(n, dtype=bool)
        for part in subset.split(" and "):
            op, m = _PREDICATE.match(part).groups()
            m = int(m)
            keep &= {"<=": idx <= m, "<": idx < m, ">=": idx >= m, ">": idx > m, "==": idx == m}[op]
        return idx[keep]
    return np.asarray([i for i in subset if 0 <= i < n], dtype=int)


# serialisation -----------------------------------------------------------


def _value(v) -> str:
    if isinstance(v, Expr):
        return _string(str(v))
    if isinstance(v, str):
        return _string(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_chain_spec(spec: ChainSpecFile) -> str:
    """Text that parses back to an equal ``ChainSpecFile``."""
    lines = ["[chain]", f"kind = {_value(spec.kind)}"]
    c = spec.chain
    order = {"explicit": ("n", "pi", "q", "d"), "birth_death": ("a", "b", "N", "b0"), "lattice": ("d", "L", "R")}
    for key in order[spec.kind]:
        if key in c:
            value = [list(t) for t in c[key]] if key == "q" else c[key]
            lines.append(f"{key} = {_value(value)}")
    if c.get("params"):
        lines.append("")
        lines.append("[chain.params]")
        lines += [f"{k} = {_value(float(v))}" for k, v in sorted(c["params"].items())]
    for e, rate in c.get("rule", ()):
        lines += ["", "[[chain.rule]]", f"e = {_value(list(e))}", f"rate = {_value(rate)}"]
    if spec.analysis:
        lines += ["", "[analysis]"]
        for key in ("A", "B", "phi", "p", "alpha", "levels", "eps"):
            if key in spec.analysis:
                lines.append(f"{key} = {_value(spec.analysis[key])}")
    return "\n".join(lines) + "\n"
