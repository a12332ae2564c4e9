"""Log-linear model families and their design matrices.

Three families are supported: two-way independence, the all-two-way
interaction model for three-way tables, and the beta model for random
graphs (sufficient statistic = degree sequence).  A family plus an
optional set of structural zeros determines a 0/1 design matrix whose
columns are cells (or node pairs) in lexicographic order; structural
zeros are realized by deleting the corresponding columns, so every
vector in the reduced coordinate space obeys the zero constraints by
construction.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._exact import exact_matvec, integer_rank
from .errors import (
    ContractViolation,
    DegenerateDataError,
    FitError,
    SizingError,
    ValidationError,
)

INDEPENDENCE = "independence"
ALL_TWO_WAY = "all_two_way"
BETA_MODEL = "beta_model"

_FAMILIES = (INDEPENDENCE, ALL_TWO_WAY, BETA_MODEL)

MAX_COLUMNS = 100_000


@dataclass(frozen=True)
class ModelSpec:
    """A model family, its dimensions, and its structural zeros.

    ``shape`` is ``(rows, cols)`` for independence, ``(d1, d2, d3)``
    for the all-two-way model, and ``(n_nodes,)`` for the beta model.
    ``structural_zeros`` holds flat indices into the lexicographic
    cell (or node-pair) order of the full problem.
    """

    family: str
    shape: tuple
    structural_zeros: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown model family {self.family!r}")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(
            self, "structural_zeros", frozenset(int(i) for i in self.structural_zeros)
        )
        want = 1 if self.family == BETA_MODEL else (2 if self.family == INDEPENDENCE else 3)
        if len(self.shape) != want:
            raise ValidationError(
                f"{self.family} expects {want} dimension(s), got {self.shape}"
            )
        if any(s < 2 for s in self.shape):
            raise ValidationError("all dimensions must be at least 2")
        d = self.full_dim
        for idx in self.structural_zeros:
            if not 0 <= idx < d:
                raise ValidationError(f"structural zero index {idx} out of range 0..{d - 1}")

    @property
    def full_dim(self):
        """Number of cells before structural-zero deletion."""
        if self.family == BETA_MODEL:
            n = self.shape[0]
            return n * (n - 1) // 2
        return int(np.prod(self.shape))

    def cell_labels(self):
        """All cell/edge labels of the full problem, lexicographic."""
        if self.family == BETA_MODEL:
            n = self.shape[0]
            return [(i, j) for i in range(n) for j in range(i + 1, n)]
        return [tuple(ix) for ix in np.ndindex(*self.shape)]


def independence(rows, cols, structural_zeros=()):
    return ModelSpec(INDEPENDENCE, (rows, cols), frozenset(structural_zeros))


def all_two_way(d1, d2, d3, structural_zeros=()):
    return ModelSpec(ALL_TWO_WAY, (d1, d2, d3), frozenset(structural_zeros))


def beta_model(n_nodes, structural_zeros=()):
    return ModelSpec(BETA_MODEL, (n_nodes,), frozenset(structural_zeros))


@dataclass(frozen=True)
class DesignMatrix:
    """0/1 marginal map of a model family.

    ``entries`` is the n x d integer matrix taking a (reduced) count
    vector to its sufficient statistics.  ``column_labels`` names the
    surviving cells in lexicographic order; ``removed_labels`` records
    the columns deleted for structural zeros.
    """

    entries: np.ndarray
    rank: int
    column_labels: tuple
    removed_labels: tuple = ()

    @property
    def n_rows(self):
        return self.entries.shape[0]

    @property
    def n_cols(self):
        return self.entries.shape[1]

    def marginals(self, counts):
        counts = np.asarray(counts)
        if counts.shape != (self.n_cols,):
            raise ContractViolation(
                f"count vector has length {counts.shape}, expected {self.n_cols}"
            )
        return self.entries @ counts

    def embed_full(self, reduced):
        """Re-insert zeros at removed cells, restoring full-length order."""
        reduced = np.asarray(reduced)
        full_labels = sorted(self.column_labels + self.removed_labels)
        pos = {lab: k for k, lab in enumerate(full_labels)}
        out = np.zeros(len(full_labels), dtype=reduced.dtype)
        for k, lab in enumerate(self.column_labels):
            out[pos[lab]] = reduced[k]
        return out


def build_design_matrix(spec, max_columns=MAX_COLUMNS):
    """Design matrix of ``spec`` with structural-zero columns deleted."""
    if spec.full_dim > max_columns:
        raise SizingError(
            f"{spec.full_dim} columns exceeds the configured maximum {max_columns}"
        )
    labels = spec.cell_labels()
    if spec.family == INDEPENDENCE:
        r, c = spec.shape
        n = r + c
        col = lambda lab: (lab[0], r + lab[1])
    elif spec.family == ALL_TWO_WAY:
        d1, d2, d3 = spec.shape
        n = d1 * d2 + d1 * d3 + d2 * d3
        # Row layout: (i,j) margins, then (i,k), then (j,k).
        col = lambda lab: (
            lab[0] * d2 + lab[1],
            d1 * d2 + lab[0] * d3 + lab[2],
            d1 * d2 + d1 * d3 + lab[1] * d3 + lab[2],
        )
    else:
        n = spec.shape[0]
        col = lambda lab: lab

    keep = [k for k in range(len(labels)) if k not in spec.structural_zeros]
    removed = tuple(labels[k] for k in sorted(spec.structural_zeros))
    mat = np.zeros((n, len(keep)), dtype=np.int64)
    for out_j, k in enumerate(keep):
        for row in col(labels[k]):
            mat[row, out_j] = 1
    return DesignMatrix(
        entries=mat,
        rank=integer_rank(mat),
        column_labels=tuple(labels[k] for k in keep),
        removed_labels=removed,
    )


@dataclass(frozen=True)
class ObservedData:
    """Reduced count vector plus its marginals under a design matrix."""

    counts: np.ndarray
    marginals: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.counts) < 0):
            raise ValidationError("observed counts must be nonnegative")


def observe_table(spec, design, table):
    """Build ObservedData from a full table (array of ``spec.shape``)."""
    flat = np.asarray(table, dtype=np.int64).reshape(-1)
    if flat.size != spec.full_dim:
        raise ValidationError(
            f"table has {flat.size} cells, model expects {spec.full_dim}"
        )
    for idx in spec.structural_zeros:
        if flat[idx] != 0:
            raise ValidationError(
                f"cell {idx} is a structural zero but has observed count {flat[idx]}"
            )
    keep = [k for k in range(spec.full_dim) if k not in spec.structural_zeros]
    reduced = flat[keep]
    return ObservedData(counts=reduced, marginals=design.marginals(reduced))


def observe_graph(spec, design, edges):
    """Build ObservedData from 0-based node-pair multiplicities."""
    n = spec.shape[0]
    labels = spec.cell_labels()
    flat_index = {lab: k for k, lab in enumerate(labels)}
    flat = np.zeros(len(labels), dtype=np.int64)
    for i, j in edges:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"bad edge ({i}, {j}) for {n} nodes")
        flat[flat_index[(min(i, j), max(i, j))]] += 1
    return observe_table(spec, design, flat)


def _table_margin_axes(spec):
    if spec.family == INDEPENDENCE:
        return [(0,), (1,)]
    return [(0, 1), (0, 2), (1, 2)]


def _ipf(spec, full_counts, tol, max_iter):
    """Iterative proportional fitting toward the family's margins.

    Structural-zero cells start at 0 and stay there because scaling
    never resurrects a zero.  Returns the fitted full table.
    """
    shape = spec.shape
    observed = np.asarray(full_counts, dtype=float).reshape(shape)
    axes_groups = _table_margin_axes(spec)
    ndim = len(shape)
    targets = []
    for group in axes_groups:
        other = tuple(ax for ax in range(ndim) if ax not in group)
        targets.append(observed.sum(axis=other))

    fitted = np.ones(shape, dtype=float)
    for idx in spec.structural_zeros:
        fitted.reshape(-1)[idx] = 0.0

    gap = math.inf
    for _ in range(max_iter):
        for group, target in zip(axes_groups, targets):
            other = tuple(ax for ax in range(ndim) if ax not in group)
            current = fitted.sum(axis=other)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(current > 0, target / np.where(current > 0, current, 1.0), 0.0)
            expand = [slice(None) if ax in group else None for ax in range(ndim)]
            fitted = fitted * ratio[tuple(expand)]
        gap = 0.0
        for group, target in zip(axes_groups, targets):
            other = tuple(ax for ax in range(ndim) if ax not in group)
            gap = max(gap, float(np.max(np.abs(fitted.sum(axis=other) - target))))
        if gap <= tol:
            return fitted
    raise FitError(
        f"IPF did not reach margin gap {tol} within {max_iter} sweeps", last_gap=gap
    )


def _fit_beta(spec, full_counts, tol, max_iter, damping=0.5):
    """Damped fixed-point MLE of the beta model.

    Works on node weights through the edge-probability map
    p_ij = exp(b_i + b_j) / (1 + exp(b_i + b_j)); each sweep nudges
    b_i by half of log(degree_i / expected_degree_i).
    """
    n = spec.shape[0]
    labels = spec.cell_labels()
    flat = np.asarray(full_counts, dtype=float)
    allowed = np.ones((n, n), dtype=bool)
    np.fill_diagonal(allowed, False)
    for idx in spec.structural_zeros:
        i, j = labels[idx]
        allowed[i, j] = allowed[j, i] = False

    adj = np.zeros((n, n), dtype=float)
    for k, (i, j) in enumerate(labels):
        adj[i, j] = adj[j, i] = flat[k]
    degrees = adj.sum(axis=1)

    CAP = 40.0
    beta = np.zeros(n)
    zero_deg = degrees == 0
    beta[zero_deg] = -CAP

    gap = math.inf
    for _ in range(max_iter):
        logits = np.clip(beta[:, None] + beta[None, :], -CAP, CAP)
        probs = np.where(allowed, 1.0 / (1.0 + np.exp(-logits)), 0.0)
        exp_deg = probs.sum(axis=1)
        gap = float(np.max(np.abs(exp_deg - degrees)))
        if gap <= tol:
            return probs
        live = ~zero_deg & (exp_deg > 0)
        beta[live] += damping * (np.log(degrees[live]) - np.log(exp_deg[live]))
        beta = np.clip(beta, -CAP, CAP)
        beta[zero_deg] = -CAP
    raise FitError(
        f"beta-model fit did not reach degree gap {tol} within {max_iter} iterations",
        last_gap=gap,
    )


def fit_expected_counts(spec, data, tol=1e-8, max_iter=10_000):
    """Expected cell counts under ``spec`` matching the observed margins.

    Independence uses the closed form row*col/total when there are no
    structural zeros, otherwise IPF over row and column margins; the
    all-two-way model always uses IPF over its three margins; the beta
    model uses a damped fixed-point iteration.  The result lives in
    the reduced coordinate space of the design matrix.
    """
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    counts = np.asarray(data.counts, dtype=np.int64)
    if counts.sum() == 0:
        raise DegenerateDataError("all observed counts are zero")

    keep = [k for k in range(spec.full_dim) if k not in spec.structural_zeros]
    full = np.zeros(spec.full_dim, dtype=float)
    full[keep] = counts

    if spec.family == INDEPENDENCE and not spec.structural_zeros:
        table = full.reshape(spec.shape)
        fitted = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
    elif spec.family == BETA_MODEL:
        probs = _fit_beta(spec, full, tol, max_iter)
        fitted_flat = np.array([probs[i, j] for i, j in spec.cell_labels()])
        return fitted_flat[keep]
    else:
        fitted = _ipf(spec, full, tol, max_iter)
    return fitted.reshape(-1)[keep]


def chi_square_statistic(observed, expected):
    """Pearson goodness-of-fit statistic.

    Cells with expected count 0 contribute nothing when the observed
    count is also 0, and force the +inf sentinel otherwise (the model
    rules out a cell that was observed).
    """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise ContractViolation("observed and expected lengths differ")
    if np.any(expected < 0):
        raise ContractViolation("expected counts must be nonnegative")
    zero = expected == 0
    if np.any(observed[zero] > 0):
        return math.inf
    dev = observed[~zero] - expected[~zero]
    return float(np.sum(dev * dev / expected[~zero]))


def chi_square_many(points, expected):
    """Vectorized Pearson statistic for a (m, d) block of fiber points."""
    pts = np.asarray(points, dtype=float)
    expected = np.asarray(expected, dtype=float)
    zero = expected == 0
    out = np.zeros(len(pts))
    if zero.any():
        bad = pts[:, zero].sum(axis=1) > 0
        out[bad] = math.inf
    dev = pts[:, ~zero] - expected[~zero]
    out += np.sum(dev * dev / expected[~zero], axis=1)
    return out


# ------------------------------------------------------------------
# File formats
# ------------------------------------------------------------------

def read_table_csv(path):
    """Read a contingency table: header ``dims=d1xd2[xd3]``, then cells.

    Cells are nonnegative integers in lexicographic (row-major) order,
    spread over any number of comma-separated lines.
    """
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("dims="):
            raise ValidationError(
                "table CSV must start with a header line 'dims=d1xd2[xd3]'"
            )
        try:
            dims = tuple(int(p) for p in header[len("dims="):].split("x"))
        except ValueError:
            raise ValidationError(
                "table CSV must start with a header line 'dims=d1xd2[xd3]'"
            ) from None
        if len(dims) not in (2, 3) or any(s < 2 for s in dims):
            raise ValidationError(f"unsupported table dimensions {dims}")
        cells = []
        for row in csv.reader(fh):
            cells.extend(int(v) for v in row if v.strip() != "")
    if len(cells) != int(np.prod(dims)):
        raise ValidationError(
            f"table body has {len(cells)} cells, header promises {int(np.prod(dims))}"
        )
    if any(v < 0 for v in cells):
        raise ValidationError("table cells must be nonnegative")
    return dims, np.array(cells, dtype=np.int64)


def write_table_csv(path, dims, cells):
    with open(path, "w", newline="") as fh:
        fh.write("dims=" + "x".join(str(s) for s in dims) + "\n")
        writer = csv.writer(fh)
        flat = list(np.asarray(cells).reshape(-1))
        width = dims[-1]
        for start in range(0, len(flat), width):
            writer.writerow(int(v) for v in flat[start:start + width])


def read_edge_list(path):
    """Read an edge list of 1-based ``i j`` pairs; returns 0-based edges."""
    edges = []
    max_id = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or line.lstrip().startswith("#"):
                continue
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 'i j' pair")
            i, j = (int(p) for p in parts)
            if i < 1 or j < 1 or i == j:
                raise ValidationError(f"{path}:{lineno}: node ids are 1-based and distinct")
            edges.append((i - 1, j - 1))
            max_id = max(max_id, i, j)
    if not edges:
        raise ValidationError(f"{path}: no edges found")
    return edges, max_id


def verify_marginals(design, point, marginals):
    """Exact check that ``design @ point == marginals`` (Python ints)."""
    got = exact_matvec(design.entries, point)
    want = [int(v) for v in marginals]
    return got == want
