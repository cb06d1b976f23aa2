"""Binary factor graphs with hard logic factors and ADMM MAP inference.

A graph holds one real potential per binary variable (the score of setting the
variable to 1) and a list of hard factors over literals. Factors of the same
kind and arity are stored together in a :class:`FactorBlock` so that the
Euclidean projections of the ADMM broadcast step run row-wise on numpy arrays.

>>> graph = FactorGraph.from_factors([2.0, 1.0], [Factor("XOR", [0, 1])])
>>> exhaustive_map(graph)[1]
2.0
"""

import enum
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    CapacityError,
    InvalidArgumentError,
    UnsatisfiableError,
    UnsupportedFactorError,
)

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_VARIABLES = 24
SOFT_KINDS = frozenset({"XOR_OUT", "OR_OUT", "AND_OUT"})
# Iterations between two infeasibility checks of the dual bound.
BOUND_CHECK_EVERY = 10


class FactorKind(enum.Enum):
    """Hard logic factors over binary literals."""

    XOR = "XOR"
    AT_MOST_ONE = "AT_MOST_ONE"
    OR = "OR"
    IMPLY = "IMPLY"

    @classmethod
    def parse(cls, kind):
        """Coerce a kind or its name, rejecting soft and unknown kinds."""
        if isinstance(kind, cls):
            return kind
        name = str(kind).strip().upper()
        if name in SOFT_KINDS:
            raise UnsupportedFactorError(
                f"soft factor {name} is not supported, only hard logic factors"
            )
        try:
            return cls(name)
        except ValueError:
            raise UnsupportedFactorError(f"unsupported factor kind: {kind!r}") from None


class Status(enum.Enum):
    """Outcome of :func:`solve_map`."""

    INTEGRAL = "Integral"
    FRACTIONAL = "Fractional"
    MAX_ITERATIONS = "MaxIterations"


def _check_arity(kind, arity):
    if arity == 0:
        if kind in (FactorKind.XOR, FactorKind.OR):
            raise UnsatisfiableError(f"{kind.value} factor over an empty support")
        raise InvalidArgumentError(f"{kind.value} factor needs at least one literal")
    if kind is FactorKind.IMPLY and arity != 2:
        raise InvalidArgumentError(
            f"IMPLY needs exactly 2 literals (antecedent, consequent), got {arity}"
        )


@dataclass(frozen=True)
class BinaryVariable:
    """Variable ``id`` contributes ``potential`` when set to 1."""

    id: int
    potential: float


@dataclass(frozen=True)
class Literal:
    """A variable or its negation."""

    variable: int
    negated: bool = False


@dataclass(frozen=True)
class Factor:
    """A hard logic factor.

    ``literals`` accepts :class:`Literal` objects, ``(variable, negated)``
    pairs or bare variable ids.
    """

    kind: FactorKind
    literals: tuple[Literal, ...]

    def __post_init__(self):
        kind = FactorKind.parse(self.kind)
        literals = tuple(_as_literal(item) for item in self.literals)
        _check_arity(kind, len(literals))
        ids = [lit.variable for lit in literals]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"duplicate variable in {kind.value} factor")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "literals", literals)

    def is_satisfied(self, assignment):
        """Whether a 0/1 assignment (indexed by variable id) satisfies the factor."""
        values = [
            1 - int(assignment[lit.variable]) if lit.negated else int(assignment[lit.variable])
            for lit in self.literals
        ]
        return bool(_satisfied(self.kind, np.asarray(values)[None, :])[0])


def _as_literal(item):
    if isinstance(item, Literal):
        return item
    if isinstance(item, (tuple, list)):
        return Literal(int(item[0]), bool(item[1]))
    return Literal(int(item))


def _satisfied(kind, values):
    """Row-wise satisfaction of literal values, last axis = literals."""
    total = values.sum(axis=-1)
    if kind is FactorKind.XOR:
        return total == 1
    if kind is FactorKind.AT_MOST_ONE:
        return total <= 1
    if kind is FactorKind.OR:
        return total >= 1
    return values[..., 0] <= values[..., 1]


@dataclass(frozen=True, eq=False)
class FactorBlock:
    """``len(variables)`` factors of one kind sharing the same arity."""

    kind: FactorKind
    variables: np.ndarray
    negated: np.ndarray

    def __post_init__(self):
        kind = FactorKind.parse(self.kind)
        variables = np.array(self.variables, dtype=np.int64, ndmin=2)
        negated = np.array(self.negated, dtype=bool, ndmin=2)
        if variables.ndim != 2 or variables.shape != negated.shape:
            raise InvalidArgumentError(
                f"factor block shapes differ: {variables.shape} vs {negated.shape}"
            )
        _check_arity(kind, variables.shape[1])
        ordered = np.sort(variables, axis=1)
        if np.any(ordered[:, 1:] == ordered[:, :-1]):
            raise InvalidArgumentError(f"duplicate variable in {kind.value} factor")
        variables.setflags(write=False)
        negated.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "negated", negated)

    def __len__(self):
        return self.variables.shape[0]

    @property
    def arity(self):
        """Number of literals per factor."""
        return self.variables.shape[1]

    def factors(self):
        """Expand into :class:`Factor` objects."""
        return [
            Factor(self.kind, tuple(Literal(int(v), bool(n)) for v, n in zip(row, neg)))
            for row, neg in zip(self.variables, self.negated)
        ]

    def satisfied(self, assignment):
        """Boolean mask of satisfied factors; ``assignment`` may be batched."""
        values = np.asarray(assignment)[..., self.variables].astype(np.int64)
        values = np.where(self.negated, 1 - values, values)
        return _satisfied(self.kind, values)


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Binary variables with potentials plus blocks of hard factors.

    Immutable after construction; safe to share between threads.
    """

    potentials: np.ndarray
    blocks: tuple[FactorBlock, ...] = ()

    def __post_init__(self):
        potentials = np.array(self.potentials, dtype=float).reshape(-1)
        if not np.all(np.isfinite(potentials)):
            raise InvalidArgumentError("potentials must be finite")
        potentials.setflags(write=False)
        blocks = tuple(self.blocks)
        n = len(potentials)
        for block in blocks:
            if len(block) and (block.variables.min() < 0 or block.variables.max() >= n):
                raise InvalidArgumentError("literal references a missing variable")
        object.__setattr__(self, "potentials", potentials)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_factors(cls, potentials, factors):
        """Build a graph from a flat list of factors.

        Factors are grouped by (kind, arity) in order of first appearance; the
        :attr:`factors` view lists them block by block.
        """
        groups = {}
        for factor in factors:
            if not isinstance(factor, Factor):
                factor = Factor(*factor)
            key = (factor.kind, len(factor.literals))
            rows = groups.setdefault(key, ([], []))
            rows[0].append([lit.variable for lit in factor.literals])
            rows[1].append([lit.negated for lit in factor.literals])
        blocks = tuple(
            FactorBlock(kind, variables, negated)
            for (kind, _), (variables, negated) in groups.items()
        )
        return cls(potentials, blocks)

    @property
    def num_variables(self):
        return len(self.potentials)

    @property
    def num_factors(self):
        return sum(len(block) for block in self.blocks)

    @property
    def variables(self):
        return [BinaryVariable(i, float(p)) for i, p in enumerate(self.potentials)]

    @property
    def factors(self):
        return [factor for block in self.blocks for factor in block.factors()]

    @cached_property
    def degree(self):
        """Number of factors each variable appears in."""
        degree = np.zeros(self.num_variables, dtype=np.int64)
        for block in self.blocks:
            degree += np.bincount(block.variables.ravel(), minlength=self.num_variables)
        return degree

    def objective(self, assignment):
        """Sum of the potentials of variables set to 1."""
        return float(np.dot(self.potentials, np.asarray(assignment, dtype=float))) + 0.0

    def violated_factors(self, assignment):
        """Indices, in :attr:`factors` order, of factors the assignment breaks."""
        assignment = np.asarray(assignment)
        violated, offset = [], 0
        for block in self.blocks:
            bad = np.flatnonzero(~block.satisfied(assignment))
            violated.extend(int(i) + offset for i in bad)
            offset += len(block)
        return tuple(violated)

    def is_satisfied(self, assignment):
        assignment = np.asarray(assignment)
        return all(block.satisfied(assignment).all() for block in self.blocks)


@dataclass(frozen=True)
class AdmmSettings:
    """Parameters of :func:`solve_map`.

    The solver breaks ties deterministically; ``seed`` travels with the
    settings so that an experiment records one seed for every component.
    """

    penalty: float = 0.1
    max_iterations: int = 1000
    residual_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.penalty > 0:
            raise InvalidArgumentError(f"penalty must be positive, got {self.penalty}")
        if not self.residual_tolerance > 0:
            raise InvalidArgumentError(
                f"residual_tolerance must be positive, got {self.residual_tolerance}"
            )
        if self.max_iterations < 1:
            raise InvalidArgumentError(
                f"max_iterations must be positive, got {self.max_iterations}"
            )


@dataclass(frozen=True, eq=False)
class InferenceResult:
    """Solution of :func:`solve_map`."""

    posteriors: np.ndarray
    assignment: np.ndarray
    relaxed_objective: float
    rounded_objective: float
    status: Status
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    violated_factors: tuple[int, ...] = ()


# ------------------------- projections ---------------------------------------


def _simplex_rows(z, target=1.0):
    """Sort-based projection of every row onto {u >= 0, sum(u) = target}."""
    u = -np.sort(-z, axis=1)
    css = np.cumsum(u, axis=1) - target
    ind = np.arange(1, z.shape[1] + 1)
    cond = u - css / ind > 0
    # 1-based position of the last positive entry
    rho = z.shape[1] - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(z.shape[0]), rho - 1] / rho
    return np.maximum(z - theta[:, None], 0.0)


def _project_rows(kind, z):
    """Project literal-space rows onto the polytope of ``kind``."""
    if kind is FactorKind.XOR:
        return _simplex_rows(z)
    clipped = np.clip(z, 0.0, 1.0)
    if kind is FactorKind.IMPLY:
        active = clipped[:, 0] > clipped[:, 1]
        if active.any():
            both = np.clip(z[active].mean(axis=1), 0.0, 1.0)
            clipped[active] = both[:, None]
        return clipped
    total = clipped.sum(axis=1)
    active = total > 1.0 if kind is FactorKind.AT_MOST_ONE else total < 1.0
    if active.any():
        clipped[active] = _simplex_rows(z[active])
    return clipped


def project_simplex(v, target_sum=1.0):
    """Euclidean projection of ``v`` onto {u >= 0, sum(u) = target_sum}.

    >>> project_simplex([2.0, 0.0]).tolist()
    [1.0, 0.0]
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgumentError("project_simplex needs a non-empty vector")
    if not 0 < target_sum <= v.size:
        raise InvalidArgumentError(f"target_sum must lie in (0, {v.size}], got {target_sum}")
    return _simplex_rows(v[None, :], float(target_sum))[0]


def project_factor_batch(kind, negations, values):
    """Row-wise :func:`project_factor`."""
    kind = FactorKind.parse(kind)
    values = np.asarray(values, dtype=float)
    negations = np.asarray(negations, dtype=bool)
    if values.ndim != 2 or values.shape != negations.shape:
        raise InvalidArgumentError(
            f"negations {negations.shape} and values {values.shape} must match"
        )
    _check_arity(kind, values.shape[1])
    flipped = np.where(negations, 1.0 - values, values)
    projected = _project_rows(kind, flipped)
    return np.where(negations, 1.0 - projected, projected)


def project_factor(kind, negations, v):
    """Project ``v`` onto the polytope of a factor whose literals are negated
    where ``negations`` is true.

    >>> project_factor("AT_MOST_ONE", [False, False], [0.9, 0.9]).tolist()
    [0.5, 0.5]
    """
    v = np.asarray(v, dtype=float)
    negations = np.asarray(negations, dtype=bool)
    if v.shape != negations.shape or v.ndim != 1:
        raise InvalidArgumentError("negations and v must be vectors of equal length")
    return project_factor_batch(kind, negations[None, :], v[None, :])[0]


# ------------------------- ADMM ----------------------------------------------


def _block_maximum(kind, negated, scores):
    """Maximum of a linear function over each factor polytope (its vertices)."""
    lit = np.where(negated, -scores, scores)
    const = np.where(negated, scores, 0.0).sum(axis=1)
    best = lit.max(axis=1)
    if kind is FactorKind.AT_MOST_ONE:
        best = np.maximum(best, 0.0)
    elif kind is FactorKind.OR:
        positive = np.clip(lit, 0.0, None).sum(axis=1)
        best = np.where(positive > 0, positive, best)
    elif kind is FactorKind.IMPLY:
        best = np.maximum.reduce([np.zeros(len(lit)), lit[:, 1], lit[:, 0] + lit[:, 1]])
    return best + const


class _LocalCopies:
    """Per-block local scores, copies and scaled duals."""

    def __init__(self, block, theta, degree, penalty):
        self.block = block
        self.score = theta[block.variables] / (degree[block.variables] * penalty)
        self.dual = np.zeros(block.variables.shape)
        self.local = np.zeros(block.variables.shape)

    def broadcast(self, posteriors):
        z = posteriors[self.block.variables] - self.dual + self.score
        neg = self.block.negated
        projected = _project_rows(self.block.kind, np.where(neg, 1.0 - z, z))
        self.local = np.where(neg, 1.0 - projected, projected)
        return self.local + self.dual

    def update_dual(self, posteriors):
        diff = self.local - posteriors[self.block.variables]
        self.dual += diff
        return float(np.square(diff).sum())

    def bound(self, penalty):
        return float(
            _block_maximum(
                self.block.kind, self.block.negated, penalty * (self.score - self.dual)
            ).sum()
        )


def solve_map(graph, settings=None):
    """Approximate MAP assignment of ``graph`` by consensus ADMM.

    Every factor keeps a local copy of its variables. One iteration projects
    the dual-adjusted local scores onto each factor polytope, averages the
    local copies into the global posteriors and moves the scaled duals by the
    disagreement. ``relaxed_objective`` is the Lagrangian dual bound at the
    final duals, hence an upper bound on every feasible objective; when it
    drops below the least achievable objective the hard factors are
    infeasible and :class:`UnsatisfiableError` is raised.

    Posteriors are rounded at 0.5 (ties to 0). Callers with one-hot block
    structure round by block argmax instead.
    """
    settings = settings or AdmmSettings()
    theta = graph.potentials
    n = graph.num_variables
    tol = settings.residual_tolerance
    penalty = settings.penalty
    degree = graph.degree
    free = degree == 0
    linked = ~free

    posteriors = np.full(n, 0.5)
    posteriors[free] = theta[free] > 0
    copies = [_LocalCopies(b, theta, degree, penalty) for b in graph.blocks if len(b)]
    free_bound = float(np.clip(theta[free], 0.0, None).sum())
    floor = float(np.clip(theta, None, 0.0).sum()) - tol * (1.0 + float(np.abs(theta).sum()))

    def dual_bound():
        return free_bound + sum(c.bound(penalty) for c in copies)

    primal = dual = 0.0
    iterations = 0
    converged = not copies
    while not converged and iterations < settings.max_iterations:
        iterations += 1
        gathered = np.zeros(n)
        for copy in copies:
            gathered += np.bincount(
                copy.block.variables.ravel(),
                weights=copy.broadcast(posteriors).ravel(),
                minlength=n,
            )
        updated = posteriors.copy()
        updated[linked] = gathered[linked] / degree[linked]
        primal = np.sqrt(sum(copy.update_dual(updated) for copy in copies))
        dual = penalty * np.sqrt(float((degree * np.square(updated - posteriors)).sum()))
        posteriors = updated
        converged = primal < tol and dual < tol
        if iterations % BOUND_CHECK_EVERY == 0 and dual_bound() < floor:
            raise UnsatisfiableError(
                f"hard factors are infeasible (dual bound below {floor:.6g} "
                f"after {iterations} iterations)"
            )

    relaxed = dual_bound()
    if relaxed < floor:
        raise UnsatisfiableError(f"hard factors are infeasible (dual bound {relaxed:.6g})")
    assignment = (posteriors > 0.5).astype(np.int8)
    violated = graph.violated_factors(assignment)
    near_integral = bool(np.all(np.minimum(posteriors, 1.0 - posteriors) <= tol))
    if not converged:
        status = Status.MAX_ITERATIONS
    elif near_integral and not violated:
        status = Status.INTEGRAL
    else:
        status = Status.FRACTIONAL
    if violated and status is Status.MAX_ITERATIONS:
        logger.warning(
            "ADMM stopped after %d iterations with %d violated hard factors "
            "(primal residual %.3g)",
            iterations,
            len(violated),
            primal,
        )
    logger.debug(
        "ADMM %s after %d iterations: primal %.3g dual %.3g bound %.6g",
        status.value,
        iterations,
        primal,
        dual,
        relaxed,
    )
    return InferenceResult(
        posteriors=posteriors,
        assignment=assignment,
        relaxed_objective=relaxed,
        rounded_objective=graph.objective(assignment),
        status=status,
        iterations=iterations,
        primal_residual=float(primal),
        dual_residual=float(dual),
        violated_factors=violated,
    )


# ------------------------- exact oracle --------------------------------------


def exhaustive_map(graph):
    """Exact MAP by enumerating all 2**n assignments.

    Ties go to the lexicographically smallest assignment.
    """
    n = graph.num_variables
    if n > MAX_EXHAUSTIVE_VARIABLES:
        raise CapacityError(
            f"exhaustive_map handles at most {MAX_EXHAUSTIVE_VARIABLES} variables, got {n}"
        )
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    total = 1 << n
    chunk = 1 << min(n, 16)
    best, best_value = None, -np.inf
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        candidates = ((codes[:, None] >> shifts) & 1).astype(np.int8)
        values = candidates @ graph.potentials
        feasible = np.ones(len(codes), dtype=bool)
        for block in graph.blocks:
            feasible &= block.satisfied(candidates).all(axis=-1)
        if not feasible.any():
            continue
        values = np.where(feasible, values, -np.inf)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best, best_value = candidates[i].copy(), float(values[i])
    if best is None:
        raise UnsatisfiableError("no assignment satisfies every hard factor")
    return best, best_value + 0.0
