"""Hard logic constraints over node states.

A literal ``t:v:i`` is true when node ``v`` of type ``t`` takes label ``i``;
a trailing ``!`` negates it. Text form, one constraint per line::

    AT_MOST_ONE 0:3:1 0:4:1 0:9:1
    IMPLY 0:0:2 1:0:0!

Blank lines and lines starting with ``#`` are ignored when loading a file.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DatasetParseError,
    InvalidArgumentError,
    InvalidConstraintError,
    SearchLimitError,
    UnsatisfiableError,
    UnsupportedFactorError,
)
from .factor_graph import Factor, FactorKind, Literal


@dataclass(frozen=True)
class StateLiteral:
    """``U_{v,i}`` for node ``node`` of type ``type``, possibly negated."""

    type: int
    node: int
    state: int
    negated: bool = False

    def __post_init__(self):
        for name in ("type", "node", "state"):
            value = int(getattr(self, name))
            if value < 0:
                raise InvalidConstraintError(f"literal {name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "negated", bool(self.negated))

    def __str__(self):
        return f"{self.type}:{self.node}:{self.state}{'!' if self.negated else ''}"


@dataclass(frozen=True)
class NodeStateConstraint:
    """A hard factor over node-state literals.

    >>> c = NodeStateConstraint("AT_MOST_ONE", [(0, 1, 2), (0, 5, 2)])
    >>> format_constraint(c)
    'AT_MOST_ONE 0:1:2 0:5:2'
    """

    operator: FactorKind
    literals: tuple[StateLiteral, ...]

    def __post_init__(self):
        operator = FactorKind.parse(self.operator)
        literals = tuple(
            lit if isinstance(lit, StateLiteral) else StateLiteral(*lit)
            for lit in self.literals
        )
        if operator is FactorKind.IMPLY and len(literals) != 2:
            raise InvalidConstraintError(
                f"IMPLY takes exactly 2 literals, got {len(literals)}"
            )
        object.__setattr__(self, "operator", operator)
        object.__setattr__(self, "literals", literals)


def compile(constraints, index):
    """Factors over the indicator variables addressed by ``index``."""
    factors = []
    for c in constraints:
        literals = [
            Literal(index.variable(lit.type, lit.node, lit.state), lit.negated)
            for lit in c.literals
        ]
        try:
            factors.append(Factor(c.operator, literals))
        except InvalidArgumentError as exc:
            raise InvalidConstraintError(f"{format_constraint(c)}: {exc}") from exc
    return factors


def _values(constraint, labeling):
    values = []
    for lit in constraint.literals:
        if lit.type >= len(labeling) or lit.node >= len(labeling[lit.type]):
            raise InvalidConstraintError(f"literal {lit} addresses a missing node")
        values.append((labeling[lit.type][lit.node] == lit.state) != lit.negated)
    return np.array(values, dtype=int)


def _amount(constraint, labeling):
    values = _values(constraint, labeling)
    total = int(values.sum())
    match constraint.operator:
        case FactorKind.XOR:
            return abs(total - 1)
        case FactorKind.AT_MOST_ONE:
            return max(0, total - 1)
        case FactorKind.OR:
            return max(0, 1 - total)
        case FactorKind.IMPLY:
            return max(0, int(values[0] - values[1]))
    raise UnsupportedFactorError(f"cannot evaluate {constraint.operator}")


def violation(constraints, labeling):
    """Total violation: how many literals must flip to satisfy everything."""
    return sum(_amount(c, labeling) for c in constraints)


def violated(constraints, labeling):
    """Indices of the constraints ``labeling`` breaks."""
    return [n for n, c in enumerate(constraints) if _amount(c, labeling)]


def check(constraints, labeling):
    """True when ``labeling`` satisfies every constraint."""
    return not violated(constraints, labeling)


# ------------------------- satisfying search ---------------------------------

SEARCH_LIMIT = 200_000


def _dead(operator, values):
    """True when no completion of the partial ``values`` can satisfy the factor."""
    trues = sum(1 for v in values if v is True)
    unknown = sum(1 for v in values if v is None)
    match operator:
        case FactorKind.XOR:
            return trues > 1 or (trues == 0 and unknown == 0)
        case FactorKind.AT_MOST_ONE:
            return trues > 1
        case FactorKind.OR:
            return trues == 0 and unknown == 0
        case FactorKind.IMPLY:
            return values[0] is True and values[1] is False
    raise UnsupportedFactorError(f"cannot evaluate {operator}")


def _nodes(constraint):
    return list(dict.fromkeys((lit.type, lit.node) for lit in constraint.literals))


def _component(constraints, broken):
    """Constraints sharing nodes, directly or not, with one of ``broken``."""
    by_node = {}
    for n, c in enumerate(constraints):
        for key in _nodes(c):
            by_node.setdefault(key, []).append(n)
    members = list(broken)
    seen = set(members)
    for n in members:
        for key in _nodes(constraints[n]):
            for m in by_node[key]:
                if m not in seen:
                    seen.add(m)
                    members.append(m)
    return members


def search_assignment(constraints, labeling, domain, limit=SEARCH_LIMIT):
    """Relabel constrained nodes so that every constraint holds.

    Depth-first search over the nodes of the constraints connected to a
    violated one; the other nodes keep their labels. ``domain(t, v)`` lists
    the labels tried for a node, in order. Returns ``{(t, v): label}`` for
    the searched nodes, empty when ``labeling`` already satisfies everything.

    Raises :class:`UnsatisfiableError` when the search is exhausted and
    :class:`SearchLimitError` after ``limit`` trial labels.

    >>> cs = [NodeStateConstraint("OR", [(0, 0, 1)]),
    ...       NodeStateConstraint("IMPLY", [(0, 0, 1), (0, 1, 1)])]
    >>> search_assignment(cs, [[0, 0]], lambda t, v: [0, 1])
    {(0, 0): 1, (0, 1): 1}
    """
    broken = violated(constraints, labeling)
    if not broken:
        return {}
    members = _component(constraints, broken)
    nodes = list(dict.fromkeys(key for n in members for key in _nodes(constraints[n])))
    touching = {key: [] for key in nodes}
    for n in members:
        for key in _nodes(constraints[n]):
            touching[key].append(constraints[n])
    assignment = {}
    trials = 0

    def dead(c):
        values = [
            None
            if (lit.type, lit.node) not in assignment
            else (assignment[(lit.type, lit.node)] == lit.state) != lit.negated
            for lit in c.literals
        ]
        return _dead(c.operator, values)

    def extend(depth):
        nonlocal trials
        if depth == len(nodes):
            return True
        key = nodes[depth]
        for label in domain(*key):
            trials += 1
            if trials > limit:
                raise SearchLimitError(
                    f"no satisfying labeling found within {limit} trials over {len(nodes)} nodes"
                )
            assignment[key] = int(label)
            if not any(dead(c) for c in touching[key]) and extend(depth + 1):
                return True
        assignment.pop(key, None)
        return False

    if not extend(0):
        raise UnsatisfiableError(
            f"{len(members)} connected constraints admit no labeling of their {len(nodes)} nodes"
        )
    return assignment


def format_constraint(constraint):
    """One-line text form, ``OPERATOR t:v:i ...``."""
    return " ".join([constraint.operator.name, *(str(lit) for lit in constraint.literals)])


def parse_constraint(line):
    """Inverse of :func:`format_constraint`.

    >>> parse_constraint("IMPLY 0:0:2 1:0:0!").literals[1].negated
    True
    """
    tokens = line.split()
    if not tokens:
        raise InvalidConstraintError("empty constraint")
    literals = []
    for token in tokens[1:]:
        negated = token.endswith("!")
        parts = token.rstrip("!").split(":")
        if len(parts) != 3:
            raise InvalidConstraintError(f"literal {token!r} is not type:node:state")
        try:
            literals.append(StateLiteral(*(int(p) for p in parts), negated))
        except ValueError as exc:
            raise InvalidConstraintError(f"literal {token!r} is not numeric") from exc
    return NodeStateConstraint(tokens[0], tuple(literals))


def save_constraints(constraints, path):
    """Write one constraint per line."""
    text = "".join(format_constraint(c) + "\n" for c in constraints)
    Path(path).write_text(text, encoding="utf-8")


def load_constraints(path):
    """Constraints of a text file; blank and ``#`` lines are skipped."""
    constraints = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetParseError(f"cannot read constraints: {exc}", path) from exc
    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            constraints.append(parse_constraint(line))
        except (InvalidConstraintError, UnsupportedFactorError) as exc:
            raise DatasetParseError(str(exc), path, number) from exc
    return constraints
