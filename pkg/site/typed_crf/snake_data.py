"""Snake and Hidden Snake grid-labeling data.

A snake is a self-avoiding walk of ten cells drawn on a background grid.
Every cell shows the direction of the next cell; the head repeats the last
move. Labels count the cells from the tail (1) to the head (10), background
is 0. A Hidden Snake dataset mixes snakes with images where one cell was
recoloured so that no snake remains, all of whose pixels are background.
"""

import enum
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constraints import NodeStateConstraint
from .crf_model import Labeling, TypedGraphInstance, TypeSchema
from .errors import DatasetParseError, DimensionError, InvalidArgumentError
from .factor_graph import FactorKind

logger = logging.getLogger(__name__)

SNAKE_LENGTH = 10
NUM_LABELS = SNAKE_LENGTH + 1


class Color(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    BG = 4

    @property
    def code(self):
        return "UDLR."[self]

    @classmethod
    def from_code(cls, code):
        return cls("UDLR.".index(code))


DIRECTIONS = (Color.UP, Color.DOWN, Color.LEFT, Color.RIGHT)
STEP = {
    Color.UP: (-1, 0),
    Color.DOWN: (1, 0),
    Color.LEFT: (0, -1),
    Color.RIGHT: (0, 1),
}
_STEPS = np.array([STEP[c] for c in DIRECTIONS])


class ImageLabel(enum.Enum):
    SNAKE = "S"
    NO_SNAKE = "N"

    @property
    def index(self):
        """Label of the image node: 0 for Snake, 1 for NoSnake."""
        return 0 if self is ImageLabel.SNAKE else 1


# self, N, NE, E, SE, S, SW, W, NW
NEIGHBOURHOOD = ((0, 0), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
NODE_DIM = len(Color) * len(NEIGHBOURHOOD)
EDGE_DIM = 4 * NODE_DIM
IMAGE_DIM = 7

SINGLE_TYPE_SCHEMA = TypeSchema.build(
    labels=[NUM_LABELS], node_dims=[NODE_DIM], edge_dims={(0, 0): EDGE_DIM}
)
TYPED_SCHEMA = TypeSchema.build(
    labels=[NUM_LABELS, 2],
    node_dims=[NODE_DIM, IMAGE_DIM],
    edge_dims={(0, 0): EDGE_DIM, (0, 1): NODE_DIM},
)


@dataclass(frozen=True, eq=False)
class SnakeImage:
    """Colour grid (values of :class:`Color`) and label grid (0..10)."""

    colors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        colors = np.array(self.colors, dtype=np.int8)
        labels = np.array(self.labels, dtype=np.int64)
        if colors.ndim != 2 or colors.shape != labels.shape or colors.size == 0:
            raise DimensionError(
                f"colour and label grids must be equal non-empty 2-D grids, "
                f"got {colors.shape} and {labels.shape}"
            )
        if colors.min() < 0 or colors.max() > Color.BG:
            raise InvalidArgumentError("colour grid holds values outside the palette")
        if labels.min() < 0 or labels.max() >= NUM_LABELS:
            raise InvalidArgumentError(f"labels must lie in 0..{NUM_LABELS - 1}")
        colors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "labels", labels)

    @property
    def height(self):
        return self.colors.shape[0]

    @property
    def width(self):
        return self.colors.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SnakeImage):
            return NotImplemented
        return np.array_equal(self.colors, other.colors) and np.array_equal(
            self.labels, other.labels
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class HiddenSnakeSample:
    """An image with its image-level label (``None`` when unknown)."""

    image: SnakeImage
    image_label: ImageLabel | None = ImageLabel.SNAKE

    def __eq__(self, other):
        if not isinstance(other, HiddenSnakeSample):
            return NotImplemented
        return self.image == other.image and self.image_label == other.image_label

    __hash__ = None


# ------------------------- generation ----------------------------------------


def _walk(moves):
    positions = [(0, 0)]
    for move in moves:
        dr, dc = STEP[Color(move)]
        r, c = positions[-1]
        positions.append((r + dr, c + dc))
    return positions


def snake_from_moves(moves):
    """Image of the walk making ``moves``, cropped with a one-cell margin.

    >>> img = snake_from_moves([Color.RIGHT] * 9)
    >>> (img.height, img.width), img.labels[1].tolist()
    ((3, 12), [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 0])
    """
    moves = [Color(m) for m in moves]
    if len(moves) != SNAKE_LENGTH - 1 or Color.BG in moves:
        raise InvalidArgumentError(f"a snake takes {SNAKE_LENGTH - 1} direction moves")
    positions = np.array(_walk(moves))
    if len({tuple(p) for p in positions}) != SNAKE_LENGTH:
        raise InvalidArgumentError("the walk crosses itself")
    positions = positions - positions.min(axis=0) + 1
    height, width = positions.max(axis=0) + 2
    colors = np.full((height, width), Color.BG, dtype=np.int8)
    labels = np.zeros((height, width), dtype=np.int64)
    for number, ((r, c), color) in enumerate(zip(positions, [*moves, moves[-1]]), start=1):
        colors[r, c] = color
        labels[r, c] = number
    return SnakeImage(colors, labels)


def generate_snake(seed):
    """Uniform self-avoiding walk of ten cells, by rejection.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, including
    a ``Generator`` which is then advanced.
    """
    rng = np.random.default_rng(seed)
    while True:
        moves = rng.integers(0, len(DIRECTIONS), size=SNAKE_LENGTH - 1)
        positions = np.cumsum(np.vstack([[0, 0], _STEPS[moves]]), axis=0)
        if len(np.unique(positions, axis=0)) == SNAKE_LENGTH:
            return snake_from_moves(moves)


def contains_snake(colors):
    """Whether the grid shows exactly one ten-cell snake and nothing else.

    >>> contains_snake(snake_from_moves([Color.DOWN] * 9).colors)
    True
    """
    colors = np.asarray(colors)
    cells = np.argwhere(colors != Color.BG)
    if len(cells) != SNAKE_LENGTH:
        return False
    height, width = colors.shape
    for start in map(tuple, cells):
        path = [start]
        seen = {start}
        while len(path) < SNAKE_LENGTH:
            r, c = path[-1]
            dr, dc = STEP[Color(colors[r, c])]
            nxt = (r + dr, c + dc)
            if not (0 <= nxt[0] < height and 0 <= nxt[1] < width):
                break
            if colors[nxt] == Color.BG or nxt in seen:
                break
            path.append(nxt)
            seen.add(nxt)
        if len(path) == SNAKE_LENGTH and colors[path[-1]] == colors[path[-2]]:
            return True
    return False


def corrupt_cell(img, position, color):
    """Recolour one snake cell; ``None`` when a snake survives the change."""
    r, c = position
    color = Color(color)
    if img.labels[r, c] == 0:
        raise InvalidArgumentError(f"cell {position} is not a snake cell")
    if color is Color.BG or color == img.colors[r, c]:
        raise InvalidArgumentError(f"{color.name} is not another direction colour")
    colors = img.colors.copy()
    colors[r, c] = color
    if contains_snake(colors):
        return None
    return HiddenSnakeSample(
        SnakeImage(colors, np.zeros_like(img.labels)), ImageLabel.NO_SNAKE
    )


def corrupt(img, seed):
    """Recolour a uniformly chosen snake cell with one of the other three
    directions; ``None`` when the result still contains a snake."""
    rng = np.random.default_rng(seed)
    cells = np.argwhere(img.labels > 0)
    r, c = cells[rng.integers(len(cells))]
    others = [d for d in DIRECTIONS if d != img.colors[r, c]]
    return corrupt_cell(img, (r, c), others[rng.integers(len(others))])


def build_snake_dataset(n, seed):
    """``n`` snakes labelled Snake."""
    rng = np.random.default_rng(seed)
    return [HiddenSnakeSample(generate_snake(rng), ImageLabel.SNAKE) for _ in range(n)]


def build_hidden_dataset(n, seed):
    """``n`` snakes, each followed by its corrupted copy when that survives."""
    rng = np.random.default_rng(seed)
    samples = []
    discarded = 0
    for _ in range(n):
        img = generate_snake(rng)
        samples.append(HiddenSnakeSample(img, ImageLabel.SNAKE))
        hidden = corrupt(img, rng)
        if hidden is None:
            discarded += 1
        else:
            samples.append(hidden)
    logger.info(
        "hidden snake dataset: %d snakes, %d corrupted kept, %d discarded",
        n,
        n - discarded,
        discarded,
    )
    return samples


# ------------------------- features ------------------------------------------


def featurize_pixels(img):
    """Node features, grid edges and edge features of every pixel.

    Nodes are numbered row-major. Horizontal edges come first, then vertical
    ones; the source is the left or upper cell. Edge features are the blocks
    ``[top, bottom, left, right]`` of which a horizontal edge fills
    left/right and a vertical edge top/bottom.
    """
    h, w = img.colors.shape
    padded = np.pad(img.colors, 1, constant_values=Color.BG)
    onehot = np.eye(len(Color))[padded]
    blocks = [onehot[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in NEIGHBOURHOOD]
    nodes = np.concatenate(blocks, axis=2).reshape(h * w, NODE_DIM)

    ids = np.arange(h * w).reshape(h, w)
    horizontal = np.column_stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()])
    vertical = np.column_stack([ids[:-1, :].ravel(), ids[1:, :].ravel()])
    edges = np.vstack([horizontal, vertical]).astype(np.int64)

    features = np.zeros((len(edges), EDGE_DIM))
    split = len(horizontal)
    features[:split, 2 * NODE_DIM : 3 * NODE_DIM] = nodes[horizontal[:, 0]]
    features[:split, 3 * NODE_DIM :] = nodes[horizontal[:, 1]]
    features[split:, :NODE_DIM] = nodes[vertical[:, 0]]
    features[split:, NODE_DIM : 2 * NODE_DIM] = nodes[vertical[:, 1]]
    return nodes, edges, features


def featurize_image(img):
    """Bounding box height and width of the non-background area, then the
    number of cells of each colour.

    >>> featurize_image(snake_from_moves([Color.RIGHT] * 9)).tolist()
    [1.0, 10.0, 0.0, 0.0, 0.0, 10.0, 26.0]
    """
    cells = np.argwhere(img.colors != Color.BG)
    if len(cells):
        extent = cells.max(axis=0) - cells.min(axis=0) + 1
    else:
        extent = np.zeros(2)
    counts = np.bincount(img.colors.ravel(), minlength=len(Color))
    return np.concatenate([extent, counts]).astype(float)


def build_single_type_instance(img):
    """Grid CRF instance of ``img`` with its pixel labels."""
    if isinstance(img, HiddenSnakeSample):
        img = img.image
    nodes, edges, features = featurize_pixels(img)
    g = TypedGraphInstance(
        SINGLE_TYPE_SCHEMA, (nodes,), {(0, 0): edges}, {(0, 0): features}
    )
    return g, Labeling((img.labels.ravel(),))


def build_typed_instance(sample):
    """Grid CRF plus one image node linked to every pixel.

    Pixel-to-image edges carry the pixel's own features.
    """
    img = sample.image
    nodes, edges, features = featurize_pixels(img)
    to_image = np.column_stack([np.arange(len(nodes)), np.zeros(len(nodes), np.int64)])
    g = TypedGraphInstance(
        TYPED_SCHEMA,
        (nodes, featurize_image(img)[None, :]),
        {(0, 0): edges, (0, 1): to_image},
        {(0, 0): features, (0, 1): nodes},
    )
    image_label = sample.image_label.index if sample.image_label is not None else 0
    return g, Labeling((img.labels.ravel(), [image_label]))


def make_constraints(sample):
    """At most one pixel per snake label 1..10."""
    img = sample.image if isinstance(sample, HiddenSnakeSample) else sample
    pixels = range(img.colors.size)
    return [
        NodeStateConstraint(FactorKind.AT_MOST_ONE, tuple((0, v, s) for v in pixels))
        for s in range(1, NUM_LABELS)
    ]


# ------------------------- files ---------------------------------------------


def _format_record(sample):
    img = sample.image
    tag = sample.image_label.value if sample.image_label is not None else "?"
    lines = [f"{img.height} {img.width} {tag}"]
    lines += ["".join(Color(v).code for v in row) for row in img.colors]
    lines += [" ".join(str(v) for v in row) for row in img.labels]
    return "\n".join(lines) + "\n"


def _write(samples, path):
    Path(path).write_text("\n".join(_format_record(s) for s in samples), encoding="utf-8")


def _read(path, allow_unknown):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetParseError(f"cannot read dataset: {exc}", path) from exc
    samples = []
    number = 0

    def take():
        nonlocal number
        if number >= len(lines):
            raise DatasetParseError("unexpected end of file inside a record", path, number + 1)
        number += 1
        return lines[number - 1]

    while number < len(lines):
        if not lines[number].strip():
            number += 1
            continue
        header = take().split()
        tags = {"S", "N", "?"} if allow_unknown else {"S", "N"}
        if len(header) != 3 or not all(v.isdigit() for v in header[:2]) or header[2] not in tags:
            raise DatasetParseError(f"bad record header {' '.join(header)!r}", path, number)
        height, width = int(header[0]), int(header[1])
        if height < 1 or width < 1:
            raise DatasetParseError("image dimensions must be positive", path, number)
        colors = []
        for _ in range(height):
            row = take().strip()
            if len(row) != width or any(ch not in "UDLR." for ch in row):
                raise DatasetParseError(f"bad colour row {row!r}", path, number)
            colors.append([Color.from_code(ch) for ch in row])
        labels = []
        for _ in range(height):
            row = take().split()
            if len(row) != width or not all(v.isdigit() and int(v) < NUM_LABELS for v in row):
                raise DatasetParseError(f"bad label row {' '.join(row)!r}", path, number)
            labels.append([int(v) for v in row])
        image_label = None if header[2] == "?" else ImageLabel(header[2])
        samples.append(HiddenSnakeSample(SnakeImage(colors, labels), image_label))
    return samples


def save_dataset(samples, path):
    """Write records ``H W S|N``, colour rows, label rows, blank separators."""
    _write(samples, path)


def load_dataset(path):
    """Samples of a dataset file; every image label must be known."""
    return _read(path, allow_unknown=False)


def save_predictions(samples, path):
    """Like :func:`save_dataset`; an unknown image label is written ``?``."""
    _write(samples, path)


def load_predictions(path):
    """Like :func:`load_dataset` but image labels may be ``?``."""
    return _read(path, allow_unknown=True)
