import numpy as np
import pytest

from typed_crf.errors import (
    CapacityError,
    InvalidArgumentError,
    UnsatisfiableError,
    UnsupportedFactorError,
)
from typed_crf.factor_graph import (
    AdmmSettings,
    Factor,
    FactorBlock,
    FactorGraph,
    FactorKind,
    Literal,
    Status,
    exhaustive_map,
    project_factor,
    project_factor_batch,
    project_simplex,
    solve_map,
)


def feasible(kind, negations, u, tol=1e-9):
    x = np.where(negations, 1.0 - u, u)
    if np.any(x < -tol) or np.any(x > 1.0 + tol):
        return False
    total = x.sum()
    if kind is FactorKind.XOR:
        return abs(total - 1.0) <= tol * len(x)
    if kind is FactorKind.AT_MOST_ONE:
        return total <= 1.0 + tol
    if kind is FactorKind.OR:
        return total >= 1.0 - tol
    return x[0] <= x[1] + tol


def grid(kind, n, steps=100):
    """Points of the literal-space polytope on a 1/steps grid."""
    axes = np.meshgrid(*[np.arange(steps + 1)] * n, indexing="ij")
    ints = np.stack(axes, axis=-1).reshape(-1, n)
    total = ints.sum(axis=1)
    keep = {
        FactorKind.XOR: total == steps,
        FactorKind.AT_MOST_ONE: total <= steps,
        FactorKind.OR: total >= steps,
    }.get(kind)
    if kind is FactorKind.IMPLY:
        keep = ints[:, 0] <= ints[:, 1]
    return ints[keep] / steps


def random_factor(rng, n):
    kind = list(FactorKind)[rng.integers(len(FactorKind))]
    arity = 2 if kind is FactorKind.IMPLY else int(rng.integers(1, min(4, n) + 1))
    variables = rng.choice(n, size=arity, replace=False)
    negated = rng.random(arity) < 0.3
    return Factor(kind, [Literal(int(v), bool(b)) for v, b in zip(variables, negated)])


def random_graph(rng):
    n = int(rng.integers(2, 13))
    potentials = rng.uniform(-2.0, 2.0, size=n)
    factors = [random_factor(rng, n) for _ in range(rng.integers(0, 7))]
    return FactorGraph.from_factors(potentials, factors)


# ------------------------- projections ---------------------------------------


@pytest.mark.parametrize(
    "v, expected",
    [([0.5, 0.5], [0.5, 0.5]), ([2.0, 0.0], [1.0, 0.0]), ([0.2, 0.2], [0.5, 0.5])],
)
def test_project_simplex_examples(v, expected):
    assert np.allclose(project_simplex(v), expected, atol=1e-12)


def test_project_simplex_target_sum():
    assert np.allclose(project_simplex([1.0, 1.0, 1.0], target_sum=2.0), [2 / 3] * 3)


@pytest.mark.parametrize("v, target", [([], 1.0), ([1.0], 2.0), ([1.0], 0.0)])
def test_project_simplex_rejects_bad_input(v, target):
    with pytest.raises(InvalidArgumentError):
        project_simplex(v, target)


def test_project_factor_examples():
    assert np.allclose(project_factor("AT_MOST_ONE", [False, False], [-1, -2]), [0, 0])
    assert np.allclose(project_factor("AT_MOST_ONE", [False, False], [0.9, 0.9]), [0.5, 0.5])
    # first literal flipped to 0.1, projected with 0.8 onto the simplex, flipped back
    assert np.allclose(project_factor("XOR", [True, False], [0.9, 0.8]), [0.85, 0.85])


def test_project_factor_imply_and_or():
    assert np.allclose(project_factor("IMPLY", [False, False], [0.9, 0.1]), [0.5, 0.5])
    assert np.allclose(project_factor("IMPLY", [False, False], [0.2, 0.7]), [0.2, 0.7])
    assert np.allclose(project_factor("OR", [False, False], [0.1, 0.3]), [0.4, 0.6])


def test_soft_factor_kinds_are_rejected():
    for kind in ("XOR_OUT", "OR_OUT", "AND_OUT", "NAND"):
        with pytest.raises(UnsupportedFactorError):
            project_factor(kind, [False], [0.5])
    with pytest.raises(UnsupportedFactorError):
        Factor("AND_OUT", [0, 1])


@pytest.mark.parametrize("kind", list(FactorKind))
def test_projection_is_idempotent_and_feasible(rng, kind):
    for _ in range(200):
        n = 2 if kind is FactorKind.IMPLY else int(rng.integers(1, 7))
        v = rng.uniform(-3.0, 3.0, size=n)
        negations = rng.random(n) < 0.5
        once = project_factor(kind, negations, v)
        assert feasible(kind, negations, once)
        assert np.allclose(project_factor(kind, negations, once), once, atol=1e-9)


@pytest.mark.parametrize("kind", list(FactorKind))
@pytest.mark.parametrize("n", [2, 3])
def test_projection_beats_every_grid_point(rng, kind, n):
    if kind is FactorKind.IMPLY and n != 2:
        pytest.skip("IMPLY is binary")
    points = grid(kind, n)
    for _ in range(10):
        v = rng.uniform(-1.5, 2.5, size=n)
        negations = rng.random(n) < 0.5
        candidates = np.where(negations, 1.0 - points, points)
        best = np.square(candidates - v).sum(axis=1).min()
        projected = project_factor(kind, negations, v)
        assert np.square(projected - v).sum() <= best + 1e-12


def test_project_factor_batch_matches_rows(rng):
    values = rng.uniform(-2, 2, size=(5, 3))
    negations = rng.random((5, 3)) < 0.5
    batch = project_factor_batch("OR", negations, values)
    for row, neg, got in zip(values, negations, batch):
        assert np.allclose(project_factor("OR", neg, row), got)


# ------------------------- graph construction --------------------------------


def test_factor_invariants():
    with pytest.raises(InvalidArgumentError):
        Factor("XOR", [0, 0])
    with pytest.raises(InvalidArgumentError):
        Factor("IMPLY", [0, 1, 2])
    with pytest.raises(InvalidArgumentError):
        Factor("AT_MOST_ONE", [])
    with pytest.raises(UnsatisfiableError):
        Factor("XOR", [])


def test_graph_rejects_missing_variables():
    with pytest.raises(InvalidArgumentError):
        FactorGraph.from_factors([0.0, 1.0], [Factor("OR", [0, 2])])


def test_from_factors_groups_blocks_and_keeps_factors():
    factors = [
        Factor("XOR", [0, 1]),
        Factor("IMPLY", [(1, True), 2]),
        Factor("XOR", [(2, True), 0]),
    ]
    graph = FactorGraph.from_factors([1.0, 2.0, 3.0], factors)
    assert len(graph.blocks) == 2
    assert graph.num_factors == 3
    assert graph.factors == [factors[0], factors[2], factors[1]]
    assert graph.degree.tolist() == [2, 2, 2]
    assert [v.potential for v in graph.variables] == [1.0, 2.0, 3.0]


def test_violated_factors_and_block_satisfaction():
    graph = FactorGraph.from_factors([0.0, 0.0], [Factor("XOR", [0, 1])])
    assert graph.violated_factors([1, 1]) == (0,)
    assert graph.violated_factors([0, 1]) == ()
    block = FactorBlock("AT_MOST_ONE", [[0, 1]], [[False, True]])
    assert block.satisfied(np.array([[1, 0], [1, 1], [0, 0]])).ravel().tolist() == [
        False,
        True,
        True,
    ]


def test_admm_settings_validation():
    with pytest.raises(InvalidArgumentError):
        AdmmSettings(penalty=0.0)
    with pytest.raises(InvalidArgumentError):
        AdmmSettings(residual_tolerance=0.0)
    with pytest.raises(InvalidArgumentError):
        AdmmSettings(max_iterations=0)


# ------------------------- exhaustive oracle ---------------------------------


def test_exhaustive_map_examples():
    assignment, value = exhaustive_map(FactorGraph([-1.0]))
    assert assignment.tolist() == [0] and value == 0.0
    assignment, value = exhaustive_map(
        FactorGraph.from_factors([0.0, 0.0, 5.0], [Factor("XOR", [0, 1, 2])])
    )
    assert assignment.tolist() == [0, 0, 1] and value == 5.0
    assignment, value = exhaustive_map(
        FactorGraph.from_factors([3.0, -1.0], [Factor("IMPLY", [0, 1])])
    )
    assert assignment.tolist() == [1, 1] and value == 2.0


def test_exhaustive_map_breaks_ties_lexicographically():
    graph = FactorGraph.from_factors([1.0, 1.0], [Factor("XOR", [0, 1])])
    assert exhaustive_map(graph)[0].tolist() == [0, 1]


def test_exhaustive_map_limits():
    with pytest.raises(CapacityError):
        exhaustive_map(FactorGraph(np.zeros(25)))
    graph = FactorGraph.from_factors([0.0], [Factor("XOR", [0]), Factor("XOR", [(0, True)])])
    with pytest.raises(UnsatisfiableError):
        exhaustive_map(graph)


# ------------------------- ADMM ----------------------------------------------


def test_solve_map_free_variable():
    result = solve_map(FactorGraph([1.0]))
    assert result.assignment.tolist() == [1]
    assert result.rounded_objective == 1.0
    assert result.status is Status.INTEGRAL


def test_solve_map_single_xor(admm):
    graph = FactorGraph.from_factors([2.0, 1.0], [Factor("XOR", [0, 1])])
    result = solve_map(graph, admm)
    assert result.assignment.tolist() == [1, 0]
    assert result.rounded_objective == 2.0
    assert result.status is Status.INTEGRAL
    assert result.violated_factors == ()


def test_solve_map_detects_contradiction():
    graph = FactorGraph.from_factors([0.0], [Factor("XOR", [0]), Factor("XOR", [(0, True)])])
    with pytest.raises(UnsatisfiableError):
        solve_map(graph)


def test_solve_map_reports_max_iterations():
    graph = FactorGraph.from_factors(
        [1.0, 1.0, 1.0], [Factor("XOR", [0, 1]), Factor("XOR", [1, 2]), Factor("OR", [0, 2])]
    )
    result = solve_map(graph, AdmmSettings(max_iterations=1))
    assert result.status is Status.MAX_ITERATIONS
    assert result.iterations == 1


def test_solve_map_against_exhaustive_oracle(rng, admm):
    integral = 0
    for _ in range(200):
        graph = random_graph(rng)
        try:
            _, best = exhaustive_map(graph)
        except UnsatisfiableError:
            continue
        result = solve_map(graph, admm)
        assert np.all((result.posteriors >= -1e-9) & (result.posteriors <= 1 + 1e-9))
        assert result.assignment.tolist() == (result.posteriors > 0.5).astype(int).tolist()
        assert result.relaxed_objective >= best - 1e-6
        if result.status is Status.INTEGRAL:
            integral += 1
            assert graph.is_satisfied(result.assignment)
            assert abs(result.rounded_objective - best) <= 1e-6
            assert result.rounded_objective <= result.relaxed_objective + 1e-6 * (
                1 + abs(result.relaxed_objective)
            )
    assert integral > 0
