"""Mamdani fuzzy inference: min conjunction, min implication, max
aggregation, centroid defuzzification on a fixed 1000-point grid.

Also defines the plain-text rulebase file format:

    input  <name> <lo> <hi>
    output <name> <lo> <hi>
    term   <var> <label> tri|trap <p1> <p2> <p3> [<p4>]
    rule   IF <var> IS <term> [AND <var> IS <term> ...] THEN <var> IS <term> [AND ...]

Blank lines and '#' comments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_POINTS = 1000


class RuleBaseError(ValueError):
    """Malformed rulebase: bad shapes, undeclared names, or coverage gaps."""


@dataclass(frozen=True)
class MembershipFunction:
    """Triangular (3 points) or trapezoidal (4 points) membership."""

    label: str
    points: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.points) not in (3, 4):
            raise RuleBaseError(f"term {self.label}: need 3 or 4 breakpoints")
        if any(b < a for a, b in zip(self.points, self.points[1:])):
            raise RuleBaseError(f"term {self.label}: breakpoints must be ascending")

    def mu(self, x):
        """Membership degree; works on scalars and numpy arrays."""
        pts = self.points
        if len(pts) == 3:
            a, b, c = pts
            bl = br = b
        else:
            a, bl, br, c = pts
        x = np.asarray(x, dtype=float)
        up = (x - a) / (bl - a) if bl > a else np.ones_like(x)
        down = (c - x) / (c - br) if c > br else np.ones_like(x)
        out = np.clip(np.minimum(np.minimum(up, down), 1.0), 0.0, 1.0)
        out = np.where((x < a) | (x > c), 0.0, out)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Variable:
    name: str
    lo: float
    hi: float
    terms: dict[str, MembershipFunction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise RuleBaseError(f"variable {self.name}: empty universe")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, GRID_POINTS)

    def clamp(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)


@dataclass(frozen=True)
class Rule:
    antecedents: tuple[tuple[str, str], ...]  # (input var, term) conjunction
    consequents: tuple[tuple[str, str], ...]  # (output var, term)


class RuleBase:
    def __init__(self, inputs: list[Variable], outputs: list[Variable], rules: list[Rule]):
        self.inputs = {v.name: v for v in inputs}
        self.outputs = {v.name: v for v in outputs}
        self.rules = list(rules)
        self._validate()
        # consequent terms sampled once on the output grids
        self._consequent_grid: dict[tuple[str, str], np.ndarray] = {}
        for var in self.outputs.values():
            g = var.grid()
            for label, term in var.terms.items():
                self._consequent_grid[(var.name, label)] = term.mu(g)

    def _validate(self) -> None:
        for rule in self.rules:
            for var, term in rule.antecedents:
                if var not in self.inputs:
                    raise RuleBaseError(f"rule references undeclared input {var!r}")
                if term not in self.inputs[var].terms:
                    raise RuleBaseError(f"input {var!r} has no term {term!r}")
            for var, term in rule.consequents:
                if var not in self.outputs:
                    raise RuleBaseError(f"rule references undeclared output {var!r}")
                if term not in self.outputs[var].terms:
                    raise RuleBaseError(f"output {var!r} has no term {term!r}")
        # no input may fall into a zero-membership gap
        for var in self.inputs.values():
            if not var.terms:
                raise RuleBaseError(f"input {var.name!r} has no terms")
            g = var.grid()
            cover = np.zeros_like(g)
            for term in var.terms.values():
                cover = np.maximum(cover, term.mu(g))
            if cover.min() <= 0.0:
                gap = g[int(np.argmin(cover))]
                raise RuleBaseError(f"input {var.name!r} uncovered near {gap:.4g}")

    def infer(self, crisp_inputs: dict[str, float]) -> dict[str, np.ndarray]:
        """Aggregated output sets (on each output variable's grid)."""
        for name in crisp_inputs:
            if name not in self.inputs:
                raise RuleBaseError(f"undeclared input variable {name!r}")
        clamped = {
            name: self.inputs[name].clamp(value) for name, value in crisp_inputs.items()
        }
        agg = {name: np.zeros(GRID_POINTS) for name in self.outputs}
        for rule in self.rules:
            activation = 1.0
            for var, term in rule.antecedents:
                if var not in clamped:
                    raise RuleBaseError(f"missing input {var!r}")
                activation = min(
                    activation, self.inputs[var].terms[term].mu(clamped[var])
                )
                if activation <= 0.0:
                    break
            if activation <= 0.0:
                continue
            for var, term in rule.consequents:
                clipped = np.minimum(self._consequent_grid[(var, term)], activation)
                np.maximum(agg[var], clipped, out=agg[var])
        return agg


def infer(rulebase: RuleBase, crisp_inputs: dict[str, float]) -> dict[str, np.ndarray]:
    return rulebase.infer(crisp_inputs)


def defuzzify_centroid(mu: np.ndarray, lo: float, hi: float, fallback: float = 0.0) -> float:
    """Area centroid by trapezoidal integration on the variable's grid."""
    grid = np.linspace(lo, hi, len(mu))
    area = np.trapezoid(mu, grid)
    if area < 1e-12:
        return fallback
    return float(np.trapezoid(mu * grid, grid) / area)


def evaluate(
    rulebase: RuleBase, crisp_inputs: dict[str, float], fallbacks: dict[str, float] | None = None
) -> dict[str, float]:
    """infer + defuzzify every output variable."""
    fallbacks = fallbacks or {}
    sets = rulebase.infer(crisp_inputs)
    out = {}
    for name, mu in sets.items():
        var = rulebase.outputs[name]
        out[name] = defuzzify_centroid(mu, var.lo, var.hi, fallbacks.get(name, 0.0))
    return out


def tri(label: str, a: float, b: float, c: float) -> MembershipFunction:
    return MembershipFunction(label, (a, b, c))


def trap(label: str, a: float, b: float, c: float, d: float) -> MembershipFunction:
    return MembershipFunction(label, (a, b, c, d))


# ---------------------------------------------------------------------------
# rulebase text format


def parse_rulebase(text: str) -> RuleBase:
    inputs: dict[str, Variable] = {}
    outputs: dict[str, Variable] = {}
    pending_terms: list[tuple[str, MembershipFunction]] = []
    rules: list[Rule] = []

    def finish_var(raw: Variable, terms: dict[str, MembershipFunction]) -> Variable:
        return Variable(raw.name, raw.lo, raw.hi, terms)

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            keyword = parts[0].lower()
            if keyword in ("input", "output"):
                name, lo, hi = parts[1], float(parts[2]), float(parts[3])
                target = inputs if keyword == "input" else outputs
                if name in inputs or name in outputs:
                    raise RuleBaseError(f"duplicate variable {name!r}")
                target[name] = Variable(name, lo, hi)
            elif keyword == "term":
                var, label, shape = parts[1], parts[2], parts[3].lower()
                pts = tuple(float(p) for p in parts[4:])
                if shape == "tri" and len(pts) == 3:
                    mf = MembershipFunction(label, pts)
                elif shape == "trap" and len(pts) == 4:
                    mf = MembershipFunction(label, pts)
                else:
                    raise RuleBaseError(f"term {label!r}: bad shape/points")
                pending_terms.append((var, mf))
            elif keyword == "rule":
                rules.append(_parse_rule(line))
            else:
                raise RuleBaseError(f"unknown keyword {keyword!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, RuleBaseError):
                raise RuleBaseError(f"line {lineno}: {exc}") from None
            raise RuleBaseError(f"line {lineno}: cannot parse {line!r}") from exc

    for var_name, mf in pending_terms:
        if var_name in inputs:
            inputs[var_name].terms[mf.label] = mf
        elif var_name in outputs:
            outputs[var_name].terms[mf.label] = mf
        else:
            raise RuleBaseError(f"term for undeclared variable {var_name!r}")
    return RuleBase(list(inputs.values()), list(outputs.values()), rules)


def _parse_rule(line: str) -> Rule:
    # rule IF a IS x AND b IS y THEN c IS z [AND d IS q]
    body = line[4:].strip()
    upper = body.upper()
    if not upper.startswith("IF ") or " THEN " not in upper:
        raise RuleBaseError(f"malformed rule {line!r}")
    cut = upper.index(" THEN ")
    if_part = body[3:cut]
    then_part = body[cut + 6 :]

    def parse_clauses(chunk: str) -> tuple[tuple[str, str], ...]:
        clauses = []
        for piece in _split_and(chunk):
            words = piece.split()
            if len(words) != 3 or words[1].upper() != "IS":
                raise RuleBaseError(f"malformed clause {piece!r}")
            clauses.append((words[0], words[2]))
        return tuple(clauses)

    return Rule(parse_clauses(if_part), parse_clauses(then_part))


def _split_and(chunk: str) -> list[str]:
    out, current = [], []
    for word in chunk.split():
        if word.upper() == "AND":
            out.append(" ".join(current))
            current = []
        else:
            current.append(word)
    out.append(" ".join(current))
    return [c for c in out if c]


def rulebase_to_text(rb: RuleBase) -> str:
    lines = []
    for kind, variables in (("input", rb.inputs), ("output", rb.outputs)):
        for var in variables.values():
            lines.append(f"{kind} {var.name} {var.lo:g} {var.hi:g}")
    for variables in (rb.inputs, rb.outputs):
        for var in variables.values():
            for term in var.terms.values():
                shape = "tri" if len(term.points) == 3 else "trap"
                pts = " ".join(f"{p:g}" for p in term.points)
                lines.append(f"term {var.name} {term.label} {shape} {pts}")
    for rule in rb.rules:
        if_part = " AND ".join(f"{v} IS {t}" for v, t in rule.antecedents)
        then_part = " AND ".join(f"{v} IS {t}" for v, t in rule.consequents)
        lines.append(f"rule IF {if_part} THEN {then_part}")
    return "\n".join(lines) + "\n"


def load_rulebase(path: str) -> RuleBase:
    with open(path, "r", encoding="ascii") as fh:
        return parse_rulebase(fh.read())
