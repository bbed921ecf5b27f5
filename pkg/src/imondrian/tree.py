"""Randomized hierarchical binary partition trees with streaming insertion.

Each tree recursively cuts the smallest axis-aligned box around the points
in a node. A cut carries a *split time* drawn from an exponential clock
whose rate is the box's linear dimension (the sum of its side lengths).
Split times increase from root to leaf, and that ordering is what makes
in-place insertion possible: a streamed point lying outside a node's box
can win the race against the node's recorded time and splice a new internal
node *above* it, instead of only growing the tree at the leaves.

Nodes live in a growable structure-of-arrays arena addressed by integer
index; ``NO_NODE`` (-1) marks an absent link. A node is a leaf iff it has
no left child, and leaves always carry an infinite split time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBoxError, DimensionMismatchError

NO_NODE = -1


def _as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate a single point: 1-D, finite, optionally of a fixed dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a single point, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise DimensionMismatchError(
            f"point has {arr.size} coordinates, expected {dim}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("point coordinates must be finite")
    return arr


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Validate a point set as a float (n, d) array.

    A 1-D sequence is treated as n one-dimensional points. Ragged input
    raises DimensionMismatchError; non-finite values raise ValueError.
    """
    try:
        arr = np.asarray(points, dtype=float)
    except (ValueError, TypeError) as exc:
        raise DimensionMismatchError(
            "points do not share a single dimensionality"
        ) from exc
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected an (n, d) point set, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("point set must be nonempty")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"points have dimension {arr.shape[1]}, expected {dim}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("point coordinates must be finite")
    return arr


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by per-dimension lower and upper bounds."""

    dim_min: np.ndarray
    dim_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.dim_min, dtype=float)
        hi = np.asarray(self.dim_max, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionMismatchError("bounds must be 1-D vectors of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("dim_min must not exceed dim_max")
        object.__setattr__(self, "dim_min", lo)
        object.__setattr__(self, "dim_max", hi)

    @property
    def dim(self) -> int:
        return self.dim_min.size

    @property
    def linear_dimension(self) -> float:
        """Sum of side lengths; the rate of the split-time clock."""
        return float((self.dim_max - self.dim_min).sum())

    def contains(self, x) -> bool:
        x = as_point(x, self.dim)
        return bool(np.all(x >= self.dim_min) and np.all(x <= self.dim_max))


def smallest_block(points) -> BoundingBox:
    """Tightest axis-aligned box around a nonempty point set."""
    pts = as_points(points)
    return BoundingBox(pts.min(axis=0), pts.max(axis=0))


def _draw_split(
    bmin: np.ndarray,
    bmax: np.ndarray,
    widths: np.ndarray,
    rate: float,
    rng: np.random.Generator,
) -> tuple[float, int, float]:
    """Draw (e, q, p) for a box with positive linear dimension ``rate``."""
    scale = 1.0 / rate
    e = rng.exponential(scale)
    while e == 0.0:
        e = rng.exponential(scale)
    cuts = np.cumsum(widths)
    u = rng.random() * rate
    q = int(np.searchsorted(cuts, u, side="right"))
    if q >= widths.size or widths[q] <= 0.0:
        # float roundoff pushed u onto/past a boundary; take the last usable dim
        q = int(np.flatnonzero(widths > 0.0)[-1])
    lo = float(bmin[q])
    hi = float(bmax[q])
    p = float(rng.uniform(lo, hi))
    if p <= lo:
        # uniform() includes its lower endpoint; a cut at the boundary would
        # leave one side empty
        p = hi
    return float(e), q, p


def sample_split(bbox: BoundingBox, rng: np.random.Generator | int | None = None):
    """Sample a cut for a box: waiting time, dimension, and cut value.

    The waiting time is Exp(rate = linear dimension), the dimension is drawn
    proportionally to side lengths, and the value uniformly within the chosen
    side. Raises DegenerateBoxError when every side has zero length.
    """
    gen = _as_generator(rng)
    widths = bbox.dim_max - bbox.dim_min
    rate = float(widths.sum())
    if rate <= 0.0:
        raise DegenerateBoxError("box has zero linear dimension; nothing to split")
    return _draw_split(bbox.dim_min, bbox.dim_max, widths, rate, gen)


class MondrianTree:
    """Arena-backed partition tree over d-dimensional points.

    Parallel arrays store one field per node: split dimension/value/time,
    child and parent links, subtree population, and the smallest box of the
    points the node was built from (enlarged as streamed points pass
    through). The tree owns its random generator so that a (seed, data)
    pair fully determines every structure it will ever grow into.
    """

    __slots__ = (
        "dim",
        "rng",
        "root",
        "size",
        "split_dim",
        "split_val",
        "split_time",
        "left",
        "right",
        "parent",
        "population",
        "box_min",
        "box_max",
    )

    def __init__(self, dim: int, rng: np.random.Generator | int | None = None, capacity: int = 64):
        if dim < 1:
            raise ValueError(f"dimensionality must be >= 1, got {dim}")
        capacity = max(int(capacity), 1)
        self.dim = int(dim)
        self.rng = _as_generator(rng)
        self.root = NO_NODE
        self.size = 0
        self.split_dim = np.full(capacity, -1, dtype=np.int32)
        self.split_val = np.zeros(capacity)
        self.split_time = np.full(capacity, np.inf)
        self.left = np.full(capacity, NO_NODE, dtype=np.int32)
        self.right = np.full(capacity, NO_NODE, dtype=np.int32)
        self.parent = np.full(capacity, NO_NODE, dtype=np.int32)
        self.population = np.zeros(capacity, dtype=np.int64)
        self.box_min = np.zeros((capacity, dim))
        self.box_max = np.zeros((capacity, dim))

    # -- arena ---------------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self.left.size

    def _grow(self) -> None:
        old = self.capacity
        new = max(2 * old, 8)
        ext = new - old
        self.split_dim = np.concatenate([self.split_dim, np.full(ext, -1, dtype=np.int32)])
        self.split_val = np.concatenate([self.split_val, np.zeros(ext)])
        self.split_time = np.concatenate([self.split_time, np.full(ext, np.inf)])
        self.left = np.concatenate([self.left, np.full(ext, NO_NODE, dtype=np.int32)])
        self.right = np.concatenate([self.right, np.full(ext, NO_NODE, dtype=np.int32)])
        self.parent = np.concatenate([self.parent, np.full(ext, NO_NODE, dtype=np.int32)])
        self.population = np.concatenate([self.population, np.zeros(ext, dtype=np.int64)])
        self.box_min = np.concatenate([self.box_min, np.zeros((ext, self.dim))])
        self.box_max = np.concatenate([self.box_max, np.zeros((ext, self.dim))])

    def _new_node(self) -> int:
        if self.size == self.capacity:
            self._grow()
        idx = self.size
        self.size += 1
        return idx

    # -- views ---------------------------------------------------------------

    def is_leaf(self, node: int) -> bool:
        return self.left[node] == NO_NODE

    @property
    def node_count(self) -> int:
        return self.size

    @property
    def leaf_count(self) -> int:
        return int(np.count_nonzero(self.left[: self.size] == NO_NODE))

    @property
    def internal_count(self) -> int:
        return self.size - self.leaf_count

    def bbox(self, node: int) -> BoundingBox:
        return BoundingBox(self.box_min[node].copy(), self.box_max[node].copy())


def fit_tree(points, tau_parent: float = 0.0, rng: np.random.Generator | int | None = None) -> MondrianTree:
    """Build a tree on a nonempty point set by recursive random cuts.

    A node holding more than one point and a box with positive linear
    dimension draws (e, q, p); its split time is the parent's time plus e,
    and the points are partitioned into {x : x[q] < p} and {x : x[q] >= p}.
    Anything else terminates as a leaf (so a block of identical points
    becomes a leaf carrying the whole block's population). The root's
    parent time is ``tau_parent`` (0 for a fresh tree).
    """
    X = as_points(points)
    n, d = X.shape
    gen = _as_generator(rng)
    tree = MondrianTree(d, gen, capacity=2 * n - 1)
    # explicit stack, preorder (node, then left subtree, then right subtree)
    stack: list[tuple[np.ndarray, int, bool, float]] = [
        (np.arange(n), NO_NODE, False, float(tau_parent))
    ]
    while stack:
        idx, parent, is_right, tau = stack.pop()
        node = tree._new_node()
        tree.parent[node] = parent
        if parent == NO_NODE:
            tree.root = node
        elif is_right:
            tree.right[parent] = node
        else:
            tree.left[parent] = node
        sub = X[idx]
        bmin = sub.min(axis=0)
        bmax = sub.max(axis=0)
        tree.box_min[node] = bmin
        tree.box_max[node] = bmax
        tree.population[node] = idx.size
        widths = bmax - bmin
        rate = float(widths.sum())
        if idx.size > 1 and rate > 0.0:
            e, q, p = _draw_split(bmin, bmax, widths, rate, gen)
            t = tau + e
            tree.split_dim[node] = q
            tree.split_val[node] = p
            tree.split_time[node] = t
            go_left = sub[:, q] < p
            stack.append((idx[~go_left], node, True, t))
            stack.append((idx[go_left], node, False, t))
        # else: leaf; allocation defaults (no children, infinite time) stand
    return tree


def path_length(x, tree: MondrianTree) -> int:
    """Number of edges from the root to the leaf the point routes to.

    Routing matches the construction rule: left iff x[q] < p.
    """
    pt = as_point(x, tree.dim)
    node = tree.root
    edges = 0
    while tree.left[node] != NO_NODE:
        q = tree.split_dim[node]
        if pt[q] < tree.split_val[node]:
            node = tree.left[node]
        else:
            node = tree.right[node]
        edges += 1
    return edges


def path_lengths(tree: MondrianTree, points) -> np.ndarray:
    """Vectorized ``path_length`` for an (n, d) batch; returns int64 depths.

    All points descend one level per pass, so the work is proportional to
    the total routed path length rather than n * node_count.
    """
    X = as_points(points, tree.dim)
    n = X.shape[0]
    cur = np.full(n, tree.root, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    alive = np.flatnonzero(tree.left[cur] != NO_NODE)
    while alive.size:
        nodes = cur[alive]
        go_left = X[alive, tree.split_dim[nodes]] < tree.split_val[nodes]
        cur[alive] = np.where(go_left, tree.left[nodes], tree.right[nodes])
        depth[alive] += 1
        alive = alive[tree.left[cur[alive]] != NO_NODE]
    return depth


def extend_tree(tree: MondrianTree, x_new, rng: np.random.Generator | int | None = None) -> MondrianTree:
    """Insert one point, possibly splicing a new internal node mid-tree.

    Descending from the root, each node draws a waiting time from an
    exponential clock whose rate is the point's total deviation from the
    node's box. If the parent's time plus that draw beats the node's own
    split time, a new internal node (cutting between box and point) is
    spliced above it with a fresh single-point leaf as sibling; otherwise
    the node's box is enlarged to admit the point, its population is
    incremented, and the descent continues along the routing rule. A point
    inside the box has rate zero - the clock never fires - so descent
    continues, and reaching a leaf that already contains the point absorbs
    it (population bump only).

    Uses the tree's own generator unless ``rng`` is given. Mutates in place
    and returns the tree.
    """
    x = as_point(x_new, tree.dim)
    gen = tree.rng if rng is None else _as_generator(rng)
    if tree.root == NO_NODE:
        raise ValueError("cannot extend an empty tree")
    node = tree.root
    tau = 0.0
    while True:
        dev_lower = np.maximum(tree.box_min[node] - x, 0.0)
        dev_upper = np.maximum(x - tree.box_max[node], 0.0)
        rates = dev_lower + dev_upper
        rate = float(rates.sum())
        if rate > 0.0:
            e = gen.exponential(1.0 / rate)
            while e == 0.0:
                e = gen.exponential(1.0 / rate)
        else:
            e = np.inf
        if tau + e < tree.split_time[node]:
            _splice_above(tree, node, x, tau + e, rates, rate, gen)
            return tree
        tree.box_min[node] = np.minimum(tree.box_min[node], x)
        tree.box_max[node] = np.maximum(tree.box_max[node], x)
        tree.population[node] += 1
        if tree.left[node] == NO_NODE:
            return tree  # duplicate of the leaf's point: absorbed
        tau = float(tree.split_time[node])
        if x[tree.split_dim[node]] < tree.split_val[node]:
            node = int(tree.left[node])
        else:
            node = int(tree.right[node])


def _splice_above(
    tree: MondrianTree,
    node: int,
    x: np.ndarray,
    time: float,
    rates: np.ndarray,
    rate: float,
    gen: np.random.Generator,
) -> None:
    cuts = np.cumsum(rates)
    u = gen.random() * rate
    q = int(np.searchsorted(cuts, u, side="right"))
    if q >= rates.size or rates[q] <= 0.0:
        q = int(np.flatnonzero(rates > 0.0)[-1])
    above = x[q] > tree.box_max[node, q]
    if above:
        lo = float(tree.box_max[node, q])
        hi = float(x[q])
    else:
        lo = float(x[q])
        hi = float(tree.box_min[node, q])
    p = float(gen.uniform(lo, hi))
    if p <= lo:
        # a cut exactly on the interval's lower end would misroute one side
        p = hi

    old_parent = int(tree.parent[node])
    internal = tree._new_node()
    leaf = tree._new_node()

    tree.box_min[leaf] = x
    tree.box_max[leaf] = x
    tree.population[leaf] = 1
    tree.parent[leaf] = internal

    tree.split_dim[internal] = q
    tree.split_val[internal] = p
    tree.split_time[internal] = time
    tree.box_min[internal] = np.minimum(tree.box_min[node], x)
    tree.box_max[internal] = np.maximum(tree.box_max[node], x)
    tree.population[internal] = tree.population[node] + 1
    tree.parent[internal] = old_parent
    if above:
        tree.left[internal] = node
        tree.right[internal] = leaf
    else:
        tree.left[internal] = leaf
        tree.right[internal] = node
    tree.parent[node] = internal

    if old_parent == NO_NODE:
        tree.root = internal
    elif tree.left[old_parent] == node:
        tree.left[old_parent] = internal
    else:
        tree.right[old_parent] = internal


def structurally_equal(a: MondrianTree, b: MondrianTree) -> bool:
    """Exact structural equality: same shape, links, populations, and
    bit-identical split values, times, and boxes."""
    if a.dim != b.dim or a.size != b.size or a.root != b.root:
        return False
    n = a.size
    return (
        np.array_equal(a.split_dim[:n], b.split_dim[:n])
        and np.array_equal(a.split_val[:n], b.split_val[:n])
        and np.array_equal(a.split_time[:n], b.split_time[:n])
        and np.array_equal(a.left[:n], b.left[:n])
        and np.array_equal(a.right[:n], b.right[:n])
        and np.array_equal(a.parent[:n], b.parent[:n])
        and np.array_equal(a.population[:n], b.population[:n])
        and np.array_equal(a.box_min[:n], b.box_min[:n])
        and np.array_equal(a.box_max[:n], b.box_max[:n])
    )
