"""Multi-type conditional random fields with linear potentials.

Nodes are partitioned into ``k`` types. Type ``t`` has ``l_t`` labels and a
``d_t``-dimensional node feature; every ordered type pair ``(t, t')`` has its
own ``d_{t,t'}``-dimensional edge feature (0 means the pair carries no edges).
The potential of a labeling ``y`` is::

    sum_t sum_{v in V_t} theta^t[y_v] . phi_t(v)
      + sum_{t,t'} sum_{(v,w) in E_tt'} vartheta^{t,t'}[y_v, y_w] . phi_tt'(v, w)

which equals ``weights.flatten() @ joint_feature(g, y)``.

MAP decoding goes through a binary factor graph with one indicator per
(node, label) and per (edge, label pair), one-hot XOR factors per node and
marginalisation XOR factors per edge.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import constraints as logic
from .errors import (
    DatasetParseError,
    DimensionError,
    InvalidArgumentError,
    InvalidConstraintError,
)
from .factor_graph import FactorBlock, FactorGraph, FactorKind, solve_map

logger = logging.getLogger(__name__)


# ------------------------- schema and values ---------------------------------


@dataclass(frozen=True)
class TypeSchema:
    """Label counts and feature sizes of a k-type graph.

    >>> TypeSchema.build(labels=[11, 2], node_dims=[45, 7], edge_dims={(0, 0): 180}).pairs
    ((0, 0),)
    """

    labels: tuple[int, ...]
    node_dims: tuple[int, ...]
    edge_dims: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        labels = tuple(int(l) for l in self.labels)
        node_dims = tuple(int(d) for d in self.node_dims)
        edge_dims = tuple(tuple(int(d) for d in row) for row in self.edge_dims)
        k = len(labels)
        if k < 1:
            raise InvalidArgumentError("a schema needs at least one node type")
        if any(l < 1 for l in labels):
            raise InvalidArgumentError(f"every type needs at least one label: {labels}")
        if len(node_dims) != k or any(d < 1 for d in node_dims):
            raise InvalidArgumentError(f"need {k} positive node feature sizes: {node_dims}")
        if len(edge_dims) != k or any(len(row) != k for row in edge_dims):
            raise InvalidArgumentError(f"edge feature sizes must form a {k}x{k} table")
        if any(d < 0 for row in edge_dims for d in row):
            raise InvalidArgumentError("edge feature sizes must be non-negative")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "node_dims", node_dims)
        object.__setattr__(self, "edge_dims", edge_dims)

    @classmethod
    def build(cls, labels, node_dims, edge_dims=None):
        """Schema with ``edge_dims`` given as a ``{(t, t'): d}`` mapping."""
        k = len(labels)
        table = [[0] * k for _ in range(k)]
        for (t, u), d in (edge_dims or {}).items():
            if not (0 <= t < k and 0 <= u < k):
                raise InvalidArgumentError(f"type pair {(t, u)} outside 0..{k - 1}")
            table[t][u] = d
        return cls(tuple(labels), tuple(node_dims), tuple(tuple(r) for r in table))

    @property
    def k(self):
        return len(self.labels)

    @property
    def pairs(self):
        """Type pairs that carry edges, in lexicographic order."""
        return tuple(
            (t, u) for t in range(self.k) for u in range(self.k) if self.edge_dims[t][u] > 0
        )

    @property
    def weight_size(self):
        unary = sum(l * d for l, d in zip(self.labels, self.node_dims))
        pairwise = sum(
            self.labels[t] * self.labels[u] * self.edge_dims[t][u] for t, u in self.pairs
        )
        return unary + pairwise

    def header(self):
        """One-line text form: ``k l_1..l_k d_1..d_k d_11 d_12 .. d_kk``."""
        values = [self.k, *self.labels, *self.node_dims]
        values += [d for row in self.edge_dims for d in row]
        return " ".join(str(v) for v in values)

    @classmethod
    def from_header(cls, line):
        """Inverse of :meth:`header`."""
        try:
            values = [int(v) for v in line.split()]
            k = values[0]
            labels = values[1 : 1 + k]
            node_dims = values[1 + k : 1 + 2 * k]
            flat = values[1 + 2 * k :]
        except (ValueError, IndexError) as exc:
            raise InvalidArgumentError(f"bad schema header: {line!r}") from exc
        if k < 1 or len(labels) != k or len(node_dims) != k or len(flat) != k * k:
            raise InvalidArgumentError(f"bad schema header: {line!r}")
        table = tuple(tuple(flat[t * k : (t + 1) * k]) for t in range(k))
        return cls(tuple(labels), tuple(node_dims), table)


def _readonly(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TypedGraphInstance:
    """Input ``x``: per-type node features and per-pair edges with features.

    ``edges[(t, t')]`` is an ``(m, 2)`` array of (source in V_t, target in
    V_t'); ``edge_features[(t, t')]`` is ``(m, d_{t,t'})``. Pairs missing from
    the mappings have no edges.
    """

    schema: TypeSchema
    node_features: tuple[np.ndarray, ...]
    edges: dict = field(default=None)
    edge_features: dict = field(default=None)

    def __post_init__(self):
        schema = self.schema
        if len(self.node_features) != schema.k:
            raise DimensionError(f"expected {schema.k} node feature matrices")
        node_features = []
        for t, matrix in enumerate(self.node_features):
            matrix = np.array(matrix, dtype=float)
            if matrix.size == 0:
                matrix = matrix.reshape(0, schema.node_dims[t])
            if matrix.ndim != 2 or matrix.shape[1] != schema.node_dims[t]:
                raise DimensionError(
                    f"type {t}: node features must be n x {schema.node_dims[t]}, "
                    f"got {matrix.shape}"
                )
            node_features.append(_readonly(matrix))
        counts = [len(m) for m in node_features]

        given_edges = dict(self.edges or {})
        given_features = dict(self.edge_features or {})
        edges, edge_features = {}, {}
        for pair in set(given_edges) | set(given_features):
            t, u = pair
            if not (0 <= t < schema.k and 0 <= u < schema.k):
                raise DimensionError(f"type pair {pair} outside the schema")
            if schema.edge_dims[t][u] == 0 and len(given_edges.get(pair, ())):
                raise DimensionError(f"type pair {pair} has no edge features, so no edges")
        for pair in schema.pairs:
            t, u = pair
            d = schema.edge_dims[t][u]
            e = np.array(given_edges.get(pair, ()), dtype=np.int64).reshape(-1, 2)
            f = np.array(given_features.get(pair, ()), dtype=float)
            if f.size == 0:
                f = f.reshape(0, d)
            if f.ndim != 2 or f.shape != (len(e), d):
                raise DimensionError(
                    f"type pair {pair}: edge features must be {len(e)} x {d}, got {f.shape}"
                )
            if len(e) and (
                e.min() < 0 or e[:, 0].max() >= counts[t] or e[:, 1].max() >= counts[u]
            ):
                raise DimensionError(f"type pair {pair}: edge endpoint out of range")
            edges[pair] = _readonly(e)
            edge_features[pair] = _readonly(f)
        object.__setattr__(self, "node_features", tuple(node_features))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_features", edge_features)

    @property
    def num_nodes(self):
        return tuple(len(m) for m in self.node_features)

    @property
    def num_edges(self):
        return sum(len(e) for e in self.edges.values())

    @cached_property
    def structure(self):
        """Variable layout and XOR blocks of the binarised graph."""
        return _build_structure(self)


@dataclass(frozen=True, eq=False)
class Labeling:
    """Per-type label vectors, 0-based."""

    labels: tuple[np.ndarray, ...]

    def __post_init__(self):
        labels = tuple(
            _readonly(np.array(v, dtype=np.int64).reshape(-1)) for v in self.labels
        )
        object.__setattr__(self, "labels", labels)

    def __getitem__(self, t):
        return self.labels[t]

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, Labeling) or len(self) != len(other):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.labels, other.labels))

    __hash__ = None

    def __repr__(self):
        return f"Labeling({[v.tolist() for v in self.labels]})"

    @property
    def shape(self):
        return tuple(len(v) for v in self.labels)

    def flat(self):
        return np.concatenate(self.labels) if self.labels else np.zeros(0, np.int64)

    def concatenate(self, other):
        """Labeling of the disjoint union of two instances."""
        if len(self) != len(other):
            raise DimensionError("labelings have different numbers of types")
        return Labeling(tuple(np.concatenate([a, b]) for a, b in zip(self, other)))


@dataclass(frozen=True, eq=False)
class Weights:
    """Unary blocks ``theta^t`` (l_t x d_t) and pairwise blocks
    ``vartheta^{t,t'}`` (l_t x l_t' x d_tt') for every pair carrying edges."""

    schema: TypeSchema
    unary: tuple[np.ndarray, ...]
    pairwise: dict

    def __post_init__(self):
        schema = self.schema
        unary = tuple(np.array(b, dtype=float) for b in self.unary)
        if len(unary) != schema.k or any(
            b.shape != (l, d) for b, l, d in zip(unary, schema.labels, schema.node_dims)
        ):
            raise DimensionError("unary weight blocks do not match the schema")
        pairwise = {}
        for t, u in schema.pairs:
            shape = (schema.labels[t], schema.labels[u], schema.edge_dims[t][u])
            block = np.array(self.pairwise.get((t, u), np.zeros(shape)), dtype=float)
            if block.shape != shape:
                raise DimensionError(f"pairwise block {(t, u)} must be {shape}")
            pairwise[(t, u)] = block
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "pairwise", pairwise)

    @classmethod
    def zeros(cls, schema):
        """The all-zero model of ``schema``."""
        unary = tuple(np.zeros((l, d)) for l, d in zip(schema.labels, schema.node_dims))
        return cls(schema, unary, {})

    @property
    def size(self):
        return self.schema.weight_size

    def flatten(self):
        """Unary blocks in type order, then pairwise blocks by (t, t')."""
        parts = [b.ravel() for b in self.unary]
        parts += [self.pairwise[pair].ravel() for pair in self.schema.pairs]
        return np.concatenate(parts) if parts else np.zeros(0)

    @classmethod
    def unflatten(cls, schema, vector):
        """Inverse of :meth:`flatten`."""
        vector = np.asarray(vector, dtype=float).reshape(-1)
        if len(vector) != schema.weight_size:
            raise DimensionError(
                f"expected {schema.weight_size} weights, got {len(vector)}"
            )
        offset = 0
        unary = []
        for l, d in zip(schema.labels, schema.node_dims):
            unary.append(vector[offset : offset + l * d].reshape(l, d).copy())
            offset += l * d
        pairwise = {}
        for t, u in schema.pairs:
            shape = (schema.labels[t], schema.labels[u], schema.edge_dims[t][u])
            size = int(np.prod(shape))
            pairwise[(t, u)] = vector[offset : offset + size].reshape(shape).copy()
            offset += size
        return cls(schema, tuple(unary), pairwise)

    def __eq__(self, other):
        if not isinstance(other, Weights):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.flatten(), other.flatten())

    __hash__ = None


def save_weights(weights, path):
    """Write the schema header then one weight per line."""
    lines = [weights.schema.header()]
    lines += [repr(float(v)) for v in weights.flatten()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_weights(path):
    """Weights of a model file written by :func:`save_weights`."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetParseError(f"cannot read model: {exc}", path) from exc
    if not lines:
        raise DatasetParseError("empty model file", path, 1)
    try:
        schema = TypeSchema.from_header(lines[0])
    except InvalidArgumentError as exc:
        raise DatasetParseError(str(exc), path, 1) from exc
    values = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DatasetParseError(f"not a number: {line!r}", path, number) from None
    if len(values) != schema.weight_size:
        raise DatasetParseError(
            f"expected {schema.weight_size} weights, found {len(values)}", path, len(lines)
        )
    return Weights.unflatten(schema, values)


def _conform(g, y=None, w=None):
    if w is not None and w.schema != g.schema:
        raise DimensionError("weights and instance use different schemas")
    if y is None:
        return
    if y.shape != g.num_nodes:
        raise DimensionError(f"labeling shape {y.shape} != node counts {g.num_nodes}")
    for t, labels in enumerate(y):
        if len(labels) and (labels.min() < 0 or labels.max() >= g.schema.labels[t]):
            raise DimensionError(f"type {t}: labels outside 0..{g.schema.labels[t] - 1}")


def disjoint_union(a, b):
    """Instance holding ``a`` followed by ``b``, with ``b``'s nodes shifted."""
    if a.schema != b.schema:
        raise DimensionError("instances use different schemas")
    shift = a.num_nodes
    nodes = tuple(np.vstack([x, z]) for x, z in zip(a.node_features, b.node_features))
    edges, features = {}, {}
    for t, u in a.schema.pairs:
        moved = b.edges[(t, u)] + np.array([shift[t], shift[u]])
        edges[(t, u)] = np.vstack([a.edges[(t, u)], moved])
        features[(t, u)] = np.vstack([a.edge_features[(t, u)], b.edge_features[(t, u)]])
    return TypedGraphInstance(a.schema, nodes, edges, features)


# ------------------------- potential and features ----------------------------


def potential(g, y, w):
    """Score of labeling ``y`` on instance ``g`` under weights ``w``."""
    _conform(g, y, w)
    total = 0.0
    for t, features in enumerate(g.node_features):
        total += float(np.einsum("ij,ij->", w.unary[t][y[t]], features))
    for (t, u), edges in g.edges.items():
        block = w.pairwise[(t, u)][y[t][edges[:, 0]], y[u][edges[:, 1]]]
        total += float(np.einsum("ij,ij->", block, g.edge_features[(t, u)]))
    return total


def joint_feature(g, y):
    """Feature map ``phi(x, y)`` aligned with :meth:`Weights.flatten`."""
    _conform(g, y)
    schema = g.schema
    parts = []
    for t, features in enumerate(g.node_features):
        onehot = np.eye(schema.labels[t])[y[t]]
        parts.append((onehot.T @ features).ravel())
    for t, u in schema.pairs:
        edges = g.edges[(t, u)]
        cells = schema.labels[t] * schema.labels[u]
        index = y[t][edges[:, 0]] * schema.labels[u] + y[u][edges[:, 1]]
        onehot = np.eye(cells)[index]
        parts.append((onehot.T @ g.edge_features[(t, u)]).ravel())
    return np.concatenate(parts)


def param_count_naive(schema):
    """Parameters of one model over the concatenated label sets.

    >>> param_count_naive(TypeSchema.build(labels=[11, 2], node_dims=[1, 1]))
    195
    """
    total = sum(schema.labels)
    return schema.k * total + total * total


def param_count_typed(schema, with_feature_dims):
    """Parameters of the typed model.

    Without feature sizes this counts label blocks over every type pair; with
    them it counts actual weights and skips pairs that carry no edges.

    >>> snake = TypeSchema.build(labels=[11], node_dims=[45], edge_dims={(0, 0): 180})
    >>> param_count_typed(snake, with_feature_dims=True)
    22275
    """
    if not with_feature_dims:
        return sum(schema.labels) + sum(l * m for l in schema.labels for m in schema.labels)
    return schema.weight_size


# ------------------------- binarisation --------------------------------------


@dataclass(frozen=True)
class BlockIndex:
    """Where the indicator variables of each node and edge live.

    Node variables come first, type by type, node by node, label by label;
    edge variables follow pair by pair, edge by edge, label pair row-major.
    """

    labels: tuple[int, ...]
    num_nodes: tuple[int, ...]
    node_offsets: tuple[int, ...]
    edge_offsets: dict
    num_variables: int

    @property
    def num_node_variables(self):
        return sum(n * l for n, l in zip(self.num_nodes, self.labels))

    def node_range(self, t, v):
        """Variable ids of the one-hot block of node ``v`` of type ``t``."""
        start = self.node_offsets[t] + v * self.labels[t]
        return range(start, start + self.labels[t])

    def variable(self, t, v, i):
        """Id of ``U_{v,i}`` for node ``v`` of type ``t``."""
        if not 0 <= t < len(self.labels):
            raise InvalidConstraintError(f"node type {t} does not exist")
        if not 0 <= v < self.num_nodes[t]:
            raise InvalidConstraintError(f"type {t} has no node {v}")
        if not 0 <= i < self.labels[t]:
            raise InvalidConstraintError(
                f"state {i} outside 0..{self.labels[t] - 1} for type {t}"
            )
        return self.node_offsets[t] + v * self.labels[t] + i

    def edge_variable(self, pair, e, i, j):
        """Id of ``U_{v,w,i,j}`` for edge ``e`` of type pair ``pair``."""
        width = self.labels[pair[1]]
        return self.edge_offsets[pair] + (e * self.labels[pair[0]] + i) * width + j


@dataclass(frozen=True, eq=False)
class _Structure:
    index: BlockIndex
    blocks: tuple[FactorBlock, ...]


def _build_structure(g):
    schema = g.schema
    labels = schema.labels
    node_offsets, offset = [], 0
    for n, l in zip(g.num_nodes, labels):
        node_offsets.append(offset)
        offset += n * l
    edge_offsets = {}
    for t, u in schema.pairs:
        edge_offsets[(t, u)] = offset
        offset += len(g.edges[(t, u)]) * labels[t] * labels[u]
    index = BlockIndex(labels, g.num_nodes, tuple(node_offsets), edge_offsets, offset)

    blocks = []
    for t, (n, l) in enumerate(zip(g.num_nodes, labels)):
        if n:
            ids = node_offsets[t] + np.arange(n * l).reshape(n, l)
            blocks.append(FactorBlock(FactorKind.XOR, ids, np.zeros(ids.shape, bool)))
    for (t, u), edges in g.edges.items():
        m = len(edges)
        if not m:
            continue
        lt, lu = labels[t], labels[u]
        ids = edge_offsets[(t, u)] + np.arange(m * lt * lu).reshape(m, lt, lu)
        # U_{v,i} = sum_j U_{v,w,i,j}
        source = node_offsets[t] + edges[:, 0, None] * lt + np.arange(lt)
        rows = np.concatenate([ids, source[:, :, None]], axis=2).reshape(m * lt, lu + 1)
        # U_{w,j} = sum_i U_{v,w,i,j}
        target = node_offsets[u] + edges[:, 1, None] * lu + np.arange(lu)
        cols = np.concatenate([ids.transpose(0, 2, 1), target[:, :, None]], axis=2)
        cols = cols.reshape(m * lu, lt + 1)
        for variables in (rows, cols):
            negated = np.zeros(variables.shape, bool)
            negated[:, -1] = True
            blocks.append(FactorBlock(FactorKind.XOR, variables, negated))
    return _Structure(index, tuple(blocks))


def _potentials(g, w, node_bonus=None):
    parts = []
    for t, features in enumerate(g.node_features):
        parts.append((features @ w.unary[t].T).ravel())
    node_scores = np.concatenate(parts)
    if node_bonus is not None:
        node_scores = node_scores + node_bonus
    parts = [node_scores]
    for (t, u), edges in g.edges.items():
        if len(edges):
            block = w.pairwise[(t, u)].reshape(-1, g.schema.edge_dims[t][u])
            parts.append((g.edge_features[(t, u)] @ block.T).ravel())
    return np.concatenate(parts)


def unroll(g, w, constraints=(), node_bonus=None):
    """Binary pairwise factor graph of ``g`` plus its :class:`BlockIndex`.

    ``node_bonus`` is added to the potentials of the node indicators (used
    for loss augmentation).
    """
    _conform(g, w=w)
    structure = g.structure
    potentials = _potentials(g, w, node_bonus)
    blocks = structure.blocks
    if constraints:
        extra = logic.compile(constraints, structure.index)
        blocks = blocks + FactorGraph.from_factors(potentials, extra).blocks
    return FactorGraph(potentials, blocks), structure.index


def indicator_assignment(g, y):
    """Binary assignment of the unrolled graph induced by labeling ``y``."""
    _conform(g, y)
    index = g.structure.index
    x = np.zeros(index.num_variables, dtype=np.int8)
    for t, labels in enumerate(y):
        x[index.node_offsets[t] + np.arange(len(labels)) * index.labels[t] + labels] = 1
    for (t, u), edges in g.edges.items():
        e = np.arange(len(edges))
        pair_label = y[t][edges[:, 0]] * index.labels[u] + y[u][edges[:, 1]]
        cells = index.labels[t] * index.labels[u]
        x[index.edge_offsets[(t, u)] + e * cells + pair_label] = 1
    return x


def round_labeling(posteriors, index):
    """Per-node argmax over each one-hot block; ties go to the lower label."""
    labels = []
    for t, (n, l) in enumerate(zip(index.num_nodes, index.labels)):
        start = index.node_offsets[t]
        block = np.asarray(posteriors[start : start + n * l]).reshape(n, l)
        labels.append(block.argmax(axis=1))
    return Labeling(tuple(labels))


@dataclass(frozen=True, eq=False)
class Decoding:
    """A decoded labeling with the inference result behind it."""

    labeling: Labeling
    result: object
    repaired: bool = False


def _repair(labeling, posteriors, index, constraints):
    """Min-conflict search moving constrained nodes to their next-best labels.

    Every accepted move strictly lowers the total violation, so the greedy
    phase ends. When no single move improves, a complete search over the
    nodes of the still violated constraints takes over; it raises
    :class:`UnsatisfiableError` only when no labeling of those nodes exists.
    """
    current = [np.array(v) for v in labeling]
    amount = logic.violation(constraints, Labeling(tuple(current)))
    while amount:
        best = None
        for c in logic.violated(constraints, Labeling(tuple(current))):
            for lit in constraints[c].literals:
                t, v = lit.type, lit.node
                scores = posteriors[list(index.node_range(t, v))]
                here = current[t][v]
                for i in np.argsort(-scores, kind="stable"):
                    if i == here:
                        continue
                    current[t][v] = i
                    trial = logic.violation(constraints, Labeling(tuple(current)))
                    current[t][v] = here
                    key = (trial, float(scores[here] - scores[i]), t, v, int(i))
                    if trial < amount and (best is None or key < best):
                        best = key
        if best is None:
            logger.debug("greedy repair stalled at violation %d, searching", amount)
            return _search_repair(current, posteriors, index, constraints)
        amount, _, t, v, i = best
        current[t][v] = i
    return Labeling(tuple(current))


def _search_repair(current, posteriors, index, constraints):
    states = {}
    for c in constraints:
        for lit in c.literals:
            states.setdefault((lit.type, lit.node), set()).add(lit.state)

    def domain(t, v):
        # labels no literal names are interchangeable; one stands for all
        scores = posteriors[list(index.node_range(t, v))]
        order = [int(i) for i in np.argsort(-scores, kind="stable")]
        named = states[(t, v)]
        here = int(current[t][v])
        spare = here if here not in named else next((i for i in order if i not in named), None)
        labels = [i for i in order if i in named or i == spare]
        return sorted(labels, key=lambda i: i != here)

    for (t, v), label in logic.search_assignment(constraints, current, domain).items():
        current[t][v] = label
    return Labeling(tuple(current))


def _decode(g, w, settings, constraints, node_bonus=None):
    graph, index = unroll(g, w, constraints, node_bonus)
    result = solve_map(graph, settings)
    labeling = round_labeling(result.posteriors, index)
    repaired = False
    if constraints and not logic.check(constraints, labeling):
        labeling = _repair(labeling, result.posteriors, index, constraints)
        repaired = True
        logger.debug("repaired rounded labeling to satisfy %d constraints", len(constraints))
    return Decoding(labeling, result, repaired)


def decode(g, w, settings=None, constraints=()):
    """MAP labeling of ``g`` with the solver result; see :func:`predict`."""
    return _decode(g, w, settings, tuple(constraints))


def predict(g, w, settings=None, constraints=()):
    """MAP labeling of ``g``, satisfying ``constraints`` when given."""
    return decode(g, w, settings, constraints).labeling


def _hamming_bonus(g, gold):
    _conform(g, gold)
    parts = [
        (1.0 - np.eye(l)[labels]).ravel() for l, labels in zip(g.schema.labels, gold)
    ]
    return np.concatenate(parts)


def loss_augmented_decode(g, w, gold, settings=None):
    """Maximiser of ``potential(g, y, w) + hamming(y, gold)`` with its result."""
    return _decode(g, w, settings, (), _hamming_bonus(g, gold))


def loss_augmented_predict(g, w, gold, settings=None):
    """Labeling part of :func:`loss_augmented_decode`."""
    return loss_augmented_decode(g, w, gold, settings).labeling
