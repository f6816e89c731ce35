"""Bellman solvers on a discretized belief grid.

The scheduling problem reduces to a stopping problem whose state is the
belief ``pi`` that the change has occurred.  Stopping costs
``lambda_f * (1 - pi)``; continuing for one slot costs ``pi`` plus the
observation bill plus the expected cost-to-go at the updated belief.
Three continuation rules are covered:

* ``control_m``   - pick the awake count ``m`` each slot,
* ``control_q``   - pick a wake probability ``q`` each slot, each sensor
                    waking independently (the count is Binomial(n, q)),
* ``open_loop``   - a fixed wake probability, never revised,
* ``fixed_m``     - a constant awake count (the degenerate control_m).

Everything expensive lives in the map ``J -> E[J(next belief)]`` for each
awake count ``m``.  On a fixed grid with piecewise-linear interpolation
that map is linear in the grid values, so it is assembled once as a
matrix per ``m`` and value iteration is a handful of mat-vecs per sweep.

For equal-variance Gaussian observations the ``m`` awake samples enter
the posterior only through their sum ``s``, whose marginal is the
two-component mixture ``t * N(m*mu1, m*sigma^2) + (1-t) * N(m*mu0,
m*sigma^2)`` with ``t`` the predicted belief.  Two constructions of the
expectation map are provided:

* ``exact``      - closed form: a piecewise-linear value function
                   integrates against each mixture component as Gaussian
                   CDF differences, segment by segment, with no
                   quadrature parameter at all;
* ``quadrature`` - 129-node Gauss-Legendre per mixture component over
                   mean +/- 8 standard deviations.

``monte_carlo`` covers density pairs with no scalar sufficient statistic
(seeded, 10^5 draws, compressed to a histogram of the joint likelihood
ratio).  Discrete observation alphabets enter through the same atom
interface; see the oracle module.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.special import expit, ndtr

from .belief import EPS
from .model import Problem, SensorModel

DEFAULT_GRID_SIZE = 1001
DEFAULT_QUAD_NODES = 129
QUAD_SPAN_SIGMAS = 8.0
DEFAULT_Q_GRID_SIZE = 101
Q_REFINE_POINTS = 21
DEFAULT_MAX_ITERS = 10_000
TOLERANCE_SCALE = 1e-6
MC_DRAWS = 100_000
MC_BINS = 4096

# Stopping wins ties within this margin, and argmin ties resolve toward
# the smaller m or q.
TIE_BREAK = 1e-12

STRATEGIES = ("control_m", "control_q", "open_loop", "fixed_m")


class ConvergenceError(RuntimeError):
    """Raised when value iteration exhausts max_iters; carries the last delta."""

    def __init__(self, message: str, iterations: int, last_delta: float):
        super().__init__(message)
        self.iterations = iterations
        self.last_delta = last_delta


@dataclass(frozen=True)
class BeliefGrid:
    """Strictly increasing belief nodes spanning [0, 1]."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if not (pts[0] == 0.0 and pts[-1] == 1.0):
            raise ValueError("grid must span [0, 1] exactly")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, size: int = DEFAULT_GRID_SIZE) -> "BeliefGrid":
        if size < 2:
            raise ValueError(f"grid size must be >= 2, got {size}")
        return cls(np.linspace(0.0, 1.0, size))

    @property
    def size(self) -> int:
        return self.points.size

    def interpolate(self, values: np.ndarray, pi) -> np.ndarray:
        """Piecewise-linear interpolation of grid values at ``pi``."""
        return np.interp(pi, self.points, values)

    def nearest_index(self, pi: float) -> int:
        idx = int(np.searchsorted(self.points, pi))
        if idx == 0:
            return 0
        if idx >= self.size:
            return self.size - 1
        if pi - self.points[idx - 1] <= self.points[idx] - pi:
            return idx - 1
        return idx


@dataclass
class ValueFunction:
    """Cost-to-go sampled on a belief grid, interpolated linearly between."""

    grid: BeliefGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise ValueError(
                f"values shape {vals.shape} does not match grid size {self.grid.size}"
            )
        scale = 1.0 + float(np.max(np.abs(vals)))
        if abs(vals[-1]) > 1e-9 * scale:
            raise ValueError(
                f"value at belief 1 must be 0 (stopping there is free), got {vals[-1]!r}"
            )
        self.values = vals

    def __call__(self, pi):
        return np.interp(pi, self.grid.points, self.values)


@dataclass(frozen=True)
class SolveReport:
    """What value iteration did: sweep count, final residual, wall time."""

    strategy: str
    iterations: int
    final_sup_norm_delta: float
    wall_seconds: float
    grid_size: int
    tolerance: float
    sup_norm_deltas: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class LikelihoodAtoms:
    """Discrete approximations of the joint log-likelihood-ratio law.

    For each awake count ``m`` the slot's joint likelihood ratio ``L`` has
    one law under the pre-change regime and another under post.  Each is
    represented by nodes and weights: ``sum(w0[m]) ~ 1`` and
    ``sum(w0[m][k] * h(llr0[m][k]))`` approximates the pre-change mean of
    ``h(L)``.  Index 0 is empty (no observation, pure prediction).
    """

    n: int
    llr0: tuple
    w0: tuple
    llr1: tuple
    w1: tuple

    def __post_init__(self) -> None:
        for name in ("llr0", "w0", "llr1", "w1"):
            arrs = getattr(self, name)
            if len(arrs) != self.n + 1:
                raise ValueError(f"{name} must have n + 1 = {self.n + 1} entries")


def _logit_array(x: np.ndarray) -> np.ndarray:
    xc = np.clip(x, EPS, 1.0 - EPS)
    return np.log(xc) - np.log1p(-xc)


def _stable_ndtr_diff(z_lo: np.ndarray, z_hi: np.ndarray) -> np.ndarray:
    """Phi(z_hi) - Phi(z_lo) without cancellation in either tail."""
    with np.errstate(invalid="ignore"):
        use_upper = (z_lo + z_hi) > 0
    upper = ndtr(-z_lo) - ndtr(-z_hi)
    lower = ndtr(z_hi) - ndtr(z_lo)
    return np.clip(np.where(use_upper, upper, lower), 0.0, None)


def _llr_coefficients(model: SensorModel, m: int) -> tuple[float, float]:
    """Joint log likelihood ratio of an m-sensor slot as a*s + b."""
    var = model.sigma0 * model.sigma0
    a = (model.mu1 - model.mu0) / var
    b = -m * (model.mu1**2 - model.mu0**2) / (2.0 * var)
    return a, b


def binomial_weights(n: int, q: float) -> np.ndarray:
    """Probability of each awake count when ``n`` sensors wake i.i.d. w.p. ``q``."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValueError(f"n must be an integer >= 1, got {n!r}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    return _binomial_table(n, np.asarray([q], dtype=float))[0]


def _binomial_table(n: int, q: np.ndarray) -> np.ndarray:
    """Binomial pmf over counts 0..n for each entry of ``q`` (last axis)."""
    m = np.arange(n + 1)
    comb = np.array([math.comb(n, k) for k in m], dtype=float)
    qq = q[..., None]
    with np.errstate(invalid="ignore"):
        table = comb * qq**m * (1.0 - qq) ** (n - m)
    return table


def gauss_legendre_atoms(
    model: SensorModel,
    n: int,
    num_nodes: int = DEFAULT_QUAD_NODES,
    span: float = QUAD_SPAN_SIGMAS,
) -> LikelihoodAtoms:
    """Gauss-Legendre nodes for the sufficient-statistic mixture.

    Requires equal variances: the m-sensor slot then acts through the
    sample sum ``s`` with per-regime law ``N(m * mu, m * sigma^2)``, and
    each regime's expectation is integrated on ``m*mu +/- span*sqrt(m)*sigma``.
    """
    if not model.equal_variance:
        raise ValueError("no scalar sufficient statistic: sigma0 != sigma1")
    x, w = leggauss(num_nodes)
    sigma = model.sigma0
    llr0, w0, llr1, w1 = [np.empty(0)], [np.empty(0)], [np.empty(0)], [np.empty(0)]
    for m in range(1, n + 1):
        a, b = _llr_coefficients(model, m)
        sd = math.sqrt(m) * sigma
        for mu, llrs, wts in (
            (model.mu0, llr0, w0),
            (model.mu1, llr1, w1),
        ):
            center = m * mu
            half = span * sd
            s = center + half * x
            z = (s - center) / sd
            dens = np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
            llrs.append(a * s + b)
            wts.append(w * half * dens)
    return LikelihoodAtoms(n=n, llr0=tuple(llr0), w0=tuple(w0), llr1=tuple(llr1), w1=tuple(w1))


def monte_carlo_atoms(
    model,
    n: int,
    draws: int = MC_DRAWS,
    bins: int = MC_BINS,
    seed: int = 0,
) -> LikelihoodAtoms:
    """Sampled law of the joint log likelihood ratio, histogram-compressed.

    The fallback for density pairs with no scalar sufficient statistic.
    ``model`` only needs ``sample(regime, size, rng)`` and
    ``log_likelihood_ratio(x)``.  Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    llr0, w0, llr1, w1 = [np.empty(0)], [np.empty(0)], [np.empty(0)], [np.empty(0)]
    for m in range(1, n + 1):
        for regime, llrs, wts in (("pre", llr0, w0), ("post", llr1, w1)):
            x = np.asarray(model.sample(regime, draws * m, rng)).reshape(draws, m)
            totals = np.sum(model.log_likelihood_ratio(x), axis=1)
            counts, edges = np.histogram(totals, bins=bins)
            centers = 0.5 * (edges[:-1] + edges[1:])
            keep = counts > 0
            llrs.append(centers[keep])
            wts.append(counts[keep] / float(draws))
    return LikelihoodAtoms(n=n, llr0=tuple(llr0), w0=tuple(w0), llr1=tuple(llr1), w1=tuple(w1))


def _interp_matrix(grid: BeliefGrid, query: np.ndarray) -> sparse.csr_matrix:
    """Sparse matrix Q with (Q @ values) == interp(values, query)."""
    pts = grid.points
    g = grid.size
    idx = np.clip(np.searchsorted(pts, query, side="right") - 1, 0, g - 2)
    step = pts[idx + 1] - pts[idx]
    frac = np.clip((query - pts[idx]) / step, 0.0, 1.0)
    rows = np.repeat(np.arange(query.size), 2)
    cols = np.stack([idx, idx + 1], axis=1).ravel()
    data = np.stack([1.0 - frac, frac], axis=1).ravel()
    return sparse.csr_matrix((data, (rows, cols)), shape=(query.size, g))


def _exact_row(
    model: SensorModel,
    grid_points: np.ndarray,
    interior_logits: np.ndarray,
    t: float,
    m: int,
) -> np.ndarray:
    """One row of the closed-form expectation matrix for awake count m.

    Splits the observation-sum axis at the preimages of the grid nodes;
    on each segment the interpolated value function is affine in the
    posterior, and ``posterior * mixture density`` integrates to the
    post-regime component mass, so every term is a pair of normal CDF
    differences.
    """
    g = grid_points.size
    row = np.zeros(g)
    if t >= 1.0 - EPS:
        row[-1] = 1.0
        return row
    a, b = _llr_coefficients(model, m)
    l0 = math.log(max(t, EPS)) - math.log1p(-max(t, EPS))
    cuts = (interior_logits - l0 - b) / a
    if a > 0:
        bounds = np.concatenate(([-np.inf], cuts, [np.inf]))
    else:
        bounds = np.concatenate(([np.inf], cuts, [-np.inf]))
    lo = np.minimum(bounds[:-1], bounds[1:])
    hi = np.maximum(bounds[:-1], bounds[1:])
    sd = math.sqrt(m) * model.sigma0
    d_pre = _stable_ndtr_diff((lo - m * model.mu0) / sd, (hi - m * model.mu0) / sd)
    d_post = _stable_ndtr_diff((lo - m * model.mu1) / sd, (hi - m * model.mu1) / sd)
    mass = t * d_post + (1.0 - t) * d_pre
    post_mass = t * d_post
    step = np.diff(grid_points)
    upper = (post_mass - grid_points[:-1] * mass) / step
    row[:-1] += mass - upper
    row[1:] += upper
    return row


class ExpectationOperator:
    """Linear maps ``values -> E[J(next belief)]``, one per awake count.

    Rows are indexed by the current-belief grid; the one-step change
    hazard is folded in, so applying matrix ``m`` to grid values gives
    the whole slot: predict, observe ``m`` sensors, interpolate.
    """

    def __init__(
        self,
        grid: BeliefGrid,
        p: float,
        n: int,
        method: str,
        matrices: list,
        model=None,
        atoms: LikelihoodAtoms | None = None,
    ):
        self.grid = grid
        self.p = p
        self.n = n
        self.method = method
        self._matrices = matrices
        self._model = model
        self._atoms = atoms
        self.predicted = grid.points + (1.0 - grid.points) * p
        self._interp0 = _interp_matrix(grid, self.predicted)

    def apply(self, m: int, values: np.ndarray) -> np.ndarray:
        """E[J(next belief) | current grid beliefs, m sensors awake]."""
        if not 0 <= m <= self.n:
            raise ValueError(f"awake count m={m} outside 0..{self.n}")
        if m == 0:
            return np.interp(self.predicted, self.grid.points, values)
        return self._matrices[m] @ values

    def apply_all(self, values: np.ndarray) -> np.ndarray:
        out = np.empty((self.n + 1, self.grid.size))
        out[0] = np.interp(self.predicted, self.grid.points, values)
        for m in range(1, self.n + 1):
            out[m] = self._matrices[m] @ values
        return out

    def combined(self, weights: np.ndarray) -> np.ndarray:
        """Dense matrix for a fixed mixture over awake counts."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.n + 1,):
            raise ValueError(f"need {self.n + 1} weights, got shape {weights.shape}")
        g = self.grid.size
        acc = np.zeros((g, g))
        if weights[0] != 0.0:
            acc += weights[0] * self._interp0.toarray()
        for m in range(1, self.n + 1):
            if abs(weights[m]) < 1e-16:
                continue
            mat = self._matrices[m]
            acc += weights[m] * (mat.toarray() if sparse.issparse(mat) else mat)
        return acc

    def point(self, values: np.ndarray, pi: float, m: int) -> float:
        """Single-belief evaluation, consistent with the grid rows."""
        if not 0.0 <= pi <= 1.0:
            raise ValueError(f"belief must lie in [0, 1], got {pi!r}")
        if not 0 <= m <= self.n:
            raise ValueError(f"awake count m={m} outside 0..{self.n}")
        t = pi + (1.0 - pi) * self.p
        if m == 0:
            return float(np.interp(t, self.grid.points, values))
        if self.method == "exact":
            interior = _logit_array(self.grid.points[1:-1])
            row = _exact_row(self._model, self.grid.points, interior, t, m)
            return float(row @ values)
        if t >= 1.0 - EPS:
            return float(values[-1])
        l0 = math.log(t) - math.log1p(-t)
        total = 0.0
        for weight, llrs, wts in (
            (t, self._atoms.llr1[m], self._atoms.w1[m]),
            (1.0 - t, self._atoms.llr0[m], self._atoms.w0[m]),
        ):
            post = expit(l0 + llrs)
            total += weight * float(
                np.dot(wts, np.interp(post, self.grid.points, values))
            )
        return total


def _operator_from_atoms(
    atoms: LikelihoodAtoms, grid: BeliefGrid, p: float, method: str, model=None
) -> ExpectationOperator:
    pts = grid.points
    g = grid.size
    t = pts + (1.0 - pts) * p
    l0 = _logit_array(t)
    matrices: list = [None]
    for m in range(1, atoms.n + 1):
        mats = []
        for factor, llrs, wts in (
            (t, atoms.llr1[m], atoms.w1[m]),
            (1.0 - t, atoms.llr0[m], atoms.w0[m]),
        ):
            post = expit(l0[:, None] + llrs[None, :])
            idx = np.clip(np.searchsorted(pts, post, side="right") - 1, 0, g - 2)
            step = pts[idx + 1] - pts[idx]
            frac = np.clip((post - pts[idx]) / step, 0.0, 1.0)
            w = factor[:, None] * wts[None, :]
            rows = np.repeat(np.arange(g), llrs.size)
            data = np.concatenate([(w * (1.0 - frac)).ravel(), (w * frac).ravel()])
            cols = np.concatenate([idx.ravel(), idx.ravel() + 1])
            mats.append(
                sparse.csr_matrix(
                    (data, (np.concatenate([rows, rows]), cols)), shape=(g, g)
                )
            )
        matrices.append((mats[0] + mats[1]).tocsr())
    return ExpectationOperator(grid, p, atoms.n, method, matrices, model=model, atoms=atoms)


def _exact_operator(model: SensorModel, n: int, grid: BeliefGrid, p: float) -> ExpectationOperator:
    pts = grid.points
    g = grid.size
    t = pts + (1.0 - pts) * p
    interior = _logit_array(pts[1:-1])
    matrices: list = [None]
    for m in range(1, n + 1):
        mat = np.empty((g, g))
        for i in range(g):
            mat[i] = _exact_row(model, pts, interior, t[i], m)
        matrices.append(mat)
    return ExpectationOperator(grid, p, n, "exact", matrices, model=model)


def build_expectation_operator(
    problem: Problem,
    grid: BeliefGrid,
    method: str | None = None,
    *,
    quad_nodes: int = DEFAULT_QUAD_NODES,
    span: float = QUAD_SPAN_SIGMAS,
    mc_draws: int = MC_DRAWS,
    mc_bins: int = MC_BINS,
    mc_seed: int = 0,
) -> ExpectationOperator:
    """Assemble the per-awake-count expectation maps for ``problem``.

    ``method`` is ``exact``, ``quadrature``, or ``monte_carlo``; by
    default the closed form is used when the model is an equal-variance
    Gaussian pair and the Monte Carlo fallback otherwise.
    """
    model = problem.model
    reducible = isinstance(model, SensorModel) and model.equal_variance
    if method is None:
        method = "exact" if reducible else "monte_carlo"
    if method in ("exact", "quadrature") and not reducible:
        raise ValueError(
            "no scalar sufficient statistic: use the monte_carlo method"
        )
    if method == "exact":
        return _exact_operator(model, problem.n, grid, problem.prior.p)
    if method == "quadrature":
        atoms = gauss_legendre_atoms(model, problem.n, quad_nodes, span)
        return _operator_from_atoms(atoms, grid, problem.prior.p, "quadrature", model=model)
    if method == "monte_carlo":
        atoms = monte_carlo_atoms(model, problem.n, mc_draws, mc_bins, mc_seed)
        return _operator_from_atoms(atoms, grid, problem.prior.p, "monte_carlo", model=model)
    raise ValueError(f"unknown expectation method {method!r}")


def operator_from_atoms(
    atoms: LikelihoodAtoms, grid: BeliefGrid, p: float
) -> ExpectationOperator:
    """Expectation maps from externally supplied likelihood-ratio atoms."""
    return _operator_from_atoms(atoms, grid, p, "atoms")


# ---------------------------------------------------------------------------
# Bellman operators


class ControlDecision(NamedTuple):
    value: float
    best: float
    stop: bool


def _check_value_function(J: ValueFunction, problem: Problem) -> None:
    if not isinstance(J, ValueFunction):
        raise TypeError("J must be a ValueFunction")


def _require_operator(
    J: ValueFunction, problem: Problem, operator: ExpectationOperator | None
) -> ExpectationOperator:
    if operator is None:
        return build_expectation_operator(problem, J.grid)
    if operator.grid.size != J.grid.size or operator.n != problem.n:
        raise ValueError("operator does not match the value function grid or n")
    return operator


def expected_future_cost(
    J: ValueFunction,
    pi: float,
    m: int,
    problem: Problem,
    *,
    operator: ExpectationOperator | None = None,
) -> float:
    """E[J(next belief)] when ``m`` of ``n`` sensors observe the next slot.

    Args:
        J: Cost-to-go on a belief grid.
        pi: Current belief.
        m: Awake count for the coming slot, 0 <= m <= n.
        problem: Instance supplying the hazard and densities.
        operator: Prebuilt expectation maps to reuse, optional.

    Raises:
        ValueError: If ``m`` exceeds the sensor count.
    """
    _check_value_function(J, problem)
    if not (isinstance(m, (int, np.integer)) and 0 <= m <= problem.n):
        raise ValueError(f"awake count m={m!r} outside 0..{problem.n}")
    operator = _require_operator(J, problem, operator)
    return operator.point(J.values, float(pi), int(m))


def bellman_control_m(
    J: ValueFunction,
    pi: float,
    problem: Problem,
    *,
    operator: ExpectationOperator | None = None,
) -> ControlDecision:
    """One Bellman step at ``pi`` choosing the awake count directly.

    Returns the backed-up value, the minimizing count (0 when stopping),
    and whether stopping is optimal.  Ties between counts resolve toward
    fewer sensors; ties between stopping and continuing resolve to stop.
    """
    _check_value_function(J, problem)
    operator = _require_operator(J, problem, operator)
    pi = float(pi)
    lam_s = problem.costs.lambda_s
    best_m, best_cont = 0, math.inf
    for m in range(problem.n + 1):
        cont = lam_s * m + operator.point(J.values, pi, m)
        if cont < best_cont - TIE_BREAK:
            best_m, best_cont = m, cont
    stop_cost = problem.costs.lambda_f * (1.0 - pi)
    continue_cost = pi + best_cont
    if stop_cost <= continue_cost + TIE_BREAK:
        return ControlDecision(stop_cost, 0, True)
    return ControlDecision(continue_cost, best_m, False)


def _refine_q(
    lo: np.ndarray, hi: np.ndarray, n: int, lam_s: float, B: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Dense search between the bracketing coarse q values (vector form)."""
    steps = np.linspace(0.0, 1.0, Q_REFINE_POINTS)
    qs = lo[None, :] + steps[:, None] * (hi - lo)[None, :]
    table = _binomial_table(n, qs)
    cont = lam_s * n * qs + np.einsum("rgm,mg->rg", table, B)
    pick = np.argmin(cont, axis=0)
    cols = np.arange(qs.shape[1])
    return qs[pick, cols], cont[pick, cols]


def bellman_control_q(
    J: ValueFunction,
    pi: float,
    problem: Problem,
    q_grid: Sequence[float],
    *,
    operator: ExpectationOperator | None = None,
) -> ControlDecision:
    """One Bellman step at ``pi`` choosing a wake probability from ``q_grid``.

    The grid minimum is refined once by a dense pass over the bracketing
    interval.  Ties resolve toward smaller ``q``; the stop/continue tie
    resolves to stop.

    Raises:
        ValueError: On an empty ``q_grid`` or values outside [0, 1].
    """
    _check_value_function(J, problem)
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.size == 0:
        raise ValueError("q_grid must not be empty")
    if np.any((q_grid < 0.0) | (q_grid > 1.0)):
        raise ValueError("q_grid values must lie in [0, 1]")
    operator = _require_operator(J, problem, operator)
    pi = float(pi)
    n, lam_s = problem.n, problem.costs.lambda_s
    B = np.array([operator.point(J.values, pi, m) for m in range(n + 1)])
    coarse = lam_s * n * q_grid + _binomial_table(n, q_grid) @ B
    j = int(np.argmin(coarse))
    lo = q_grid[max(j - 1, 0)]
    hi = q_grid[min(j + 1, q_grid.size - 1)]
    q_ref, cont_ref = _refine_q(
        np.asarray([lo]), np.asarray([hi]), n, lam_s, B[:, None]
    )
    best_q, best_cont = float(q_ref[0]), float(cont_ref[0])
    if coarse[j] < best_cont - TIE_BREAK:
        best_q, best_cont = float(q_grid[j]), float(coarse[j])
    stop_cost = problem.costs.lambda_f * (1.0 - pi)
    continue_cost = pi + best_cont
    if stop_cost <= continue_cost + TIE_BREAK:
        return ControlDecision(stop_cost, 0.0, True)
    return ControlDecision(continue_cost, best_q, False)


def bellman_open_loop(
    J: ValueFunction,
    pi: float,
    problem: Problem,
    q: float,
    *,
    operator: ExpectationOperator | None = None,
) -> float:
    """One Bellman step at ``pi`` under a fixed wake probability ``q``."""
    _check_value_function(J, problem)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    operator = _require_operator(J, problem, operator)
    pi = float(pi)
    n, lam_s = problem.n, problem.costs.lambda_s
    weights = binomial_weights(n, q)
    cont = lam_s * n * q + sum(
        weights[m] * operator.point(J.values, pi, m)
        for m in range(n + 1)
        if weights[m] >= 1e-16
    )
    stop_cost = problem.costs.lambda_f * (1.0 - pi)
    return min(stop_cost, pi + cont)


# ---------------------------------------------------------------------------
# Value iteration


@dataclass(frozen=True)
class BellmanMaps:
    """One synchronous sweep: backed-up values plus per-point decisions."""

    new_values: np.ndarray
    continue_values: np.ndarray
    best_action: np.ndarray | None


def _sweep(
    values: np.ndarray,
    problem: Problem,
    operator: ExpectationOperator,
    strategy: str,
    *,
    q_grid: np.ndarray | None = None,
    combined: np.ndarray | None = None,
    fixed_cost: float = 0.0,
    coarse_table: np.ndarray | None = None,
) -> BellmanMaps:
    pts = operator.grid.points
    lam_s = problem.costs.lambda_s
    n = problem.n
    stop_cost = problem.costs.lambda_f * (1.0 - pts)
    if strategy in ("open_loop", "fixed_m"):
        cont = fixed_cost + combined @ values
        best: np.ndarray | None = None
    elif strategy == "control_m":
        B = operator.apply_all(values)
        table = B + lam_s * np.arange(n + 1)[:, None]
        cont = table.min(axis=0)
        best = table.argmin(axis=0)
    elif strategy == "control_q":
        B = operator.apply_all(values)
        coarse = lam_s * n * q_grid[:, None] + coarse_table @ B
        j = np.argmin(coarse, axis=0)
        lo = q_grid[np.maximum(j - 1, 0)]
        hi = q_grid[np.minimum(j + 1, q_grid.size - 1)]
        q_ref, cont_ref = _refine_q(lo, hi, n, lam_s, B)
        cols = np.arange(pts.size)
        coarse_best = coarse[j, cols]
        take_coarse = coarse_best < cont_ref - TIE_BREAK
        cont = np.where(take_coarse, coarse_best, cont_ref)
        best = np.where(take_coarse, q_grid[j], q_ref)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    continue_values = pts + cont
    new_values = np.minimum(stop_cost, continue_values)
    return BellmanMaps(new_values, continue_values, best)


def _strategy_setup(
    problem: Problem,
    operator: ExpectationOperator,
    strategy: str,
    q: float | None,
    fixed_m: int | None,
    q_grid: np.ndarray | None,
    q_grid_size: int,
) -> dict:
    n = problem.n
    lam_s = problem.costs.lambda_s
    if strategy == "control_m":
        return {}
    if strategy == "control_q":
        if q_grid is None:
            q_grid = np.linspace(0.0, 1.0, q_grid_size)
        else:
            q_grid = np.asarray(q_grid, dtype=float)
            if q_grid.size == 0:
                raise ValueError("q_grid must not be empty")
        return {"q_grid": q_grid, "coarse_table": _binomial_table(n, q_grid)}
    if strategy == "open_loop":
        if q is None or not 0.0 <= q <= 1.0:
            raise ValueError(f"open_loop needs a wake probability q in [0, 1], got {q!r}")
        return {
            "combined": operator.combined(binomial_weights(n, q) if q > 0 else _one_hot(n, 0)),
            "fixed_cost": lam_s * n * q,
        }
    if strategy == "fixed_m":
        if fixed_m is None or not 0 <= fixed_m <= n:
            raise ValueError(f"fixed_m needs an awake count in 0..{n}, got {fixed_m!r}")
        return {
            "combined": operator.combined(_one_hot(n, fixed_m)),
            "fixed_cost": lam_s * fixed_m,
        }
    raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")


def _one_hot(n: int, m: int) -> np.ndarray:
    w = np.zeros(n + 1)
    w[m] = 1.0
    return w


def _resolve_grid(grid) -> BeliefGrid:
    if grid is None:
        return BeliefGrid.uniform(DEFAULT_GRID_SIZE)
    if isinstance(grid, BeliefGrid):
        return grid
    if isinstance(grid, (int, np.integer)):
        return BeliefGrid.uniform(int(grid))
    return BeliefGrid(np.asarray(grid, dtype=float))


def value_iteration(
    problem: Problem,
    strategy: str,
    grid=None,
    tolerance: float | None = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    *,
    q: float | None = None,
    fixed_m: int | None = None,
    q_grid: np.ndarray | None = None,
    q_grid_size: int = DEFAULT_Q_GRID_SIZE,
    operator: ExpectationOperator | None = None,
    method: str | None = None,
) -> tuple[ValueFunction, SolveReport]:
    """Iterate the Bellman operator to its fixed point on a belief grid.

    Starts from the stopping cost ``lambda_f * (1 - pi)`` (the horizon-zero
    value) and sweeps synchronously until the sup-norm change drops below
    ``tolerance`` (default ``1e-6 * lambda_f``).  Iterates decrease
    monotonically, so the fixed point is approached from above.

    Args:
        problem: The instance to solve.
        strategy: One of control_m, control_q, open_loop, fixed_m.
        grid: BeliefGrid, point count, or None for the 1001-point default.
        tolerance: Sup-norm stopping threshold.
        max_iters: Sweep budget.
        q: Wake probability (open_loop only).
        fixed_m: Constant awake count (fixed_m only).
        q_grid: Wake probability search grid (control_q; default 101 uniform).
        q_grid_size: Size of the default control_q search grid.
        operator: Prebuilt expectation maps to reuse across solves.
        method: Expectation construction when building the operator here.

    Returns:
        The converged ValueFunction and a SolveReport.

    Raises:
        ConvergenceError: If max_iters sweeps do not reach tolerance; the
            exception carries the last sup-norm delta.
    """
    grid = _resolve_grid(grid)
    if operator is None:
        operator = build_expectation_operator(problem, grid, method)
    elif operator.grid.size != grid.size or operator.n != problem.n:
        raise ValueError("operator does not match the requested grid or n")
    if tolerance is None:
        tolerance = TOLERANCE_SCALE * problem.costs.lambda_f
    if not tolerance > 0:
        raise ValueError(f"tolerance must be > 0, got {tolerance!r}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters!r}")
    setup = _strategy_setup(problem, operator, strategy, q, fixed_m, q_grid, q_grid_size)
    start = time.perf_counter()
    values = problem.costs.lambda_f * (1.0 - grid.points)
    deltas = []
    for iteration in range(1, max_iters + 1):
        maps = _sweep(values, problem, operator, strategy, **setup)
        delta = float(np.max(np.abs(maps.new_values - values)))
        deltas.append(delta)
        values = maps.new_values
        if delta < tolerance:
            report = SolveReport(
                strategy=strategy,
                iterations=iteration,
                final_sup_norm_delta=delta,
                wall_seconds=time.perf_counter() - start,
                grid_size=grid.size,
                tolerance=tolerance,
                sup_norm_deltas=tuple(deltas),
            )
            return ValueFunction(grid, values), report
    raise ConvergenceError(
        f"value iteration did not reach tolerance {tolerance:g} after "
        f"{max_iters} sweeps (last sup-norm delta {deltas[-1]:g})",
        iterations=max_iters,
        last_delta=deltas[-1],
    )


def solve_finite_horizon(
    problem: Problem,
    sweeps: int,
    strategy: str = "control_m",
    grid=None,
    *,
    q: float | None = None,
    fixed_m: int | None = None,
    q_grid: np.ndarray | None = None,
    q_grid_size: int = DEFAULT_Q_GRID_SIZE,
    operator: ExpectationOperator | None = None,
    method: str | None = None,
) -> ValueFunction:
    """Exactly ``sweeps`` Bellman applications to the stopping cost.

    The result is the optimal cost when the scheduler must declare within
    ``sweeps`` slots.  Zero sweeps returns the stopping cost itself.
    """
    if sweeps < 0:
        raise ValueError(f"sweeps must be >= 0, got {sweeps!r}")
    grid = _resolve_grid(grid)
    if operator is None:
        operator = build_expectation_operator(problem, grid, method)
    setup = _strategy_setup(problem, operator, strategy, q, fixed_m, q_grid, q_grid_size)
    values = problem.costs.lambda_f * (1.0 - grid.points)
    for _ in range(sweeps):
        values = _sweep(values, problem, operator, strategy, **setup).new_values
    return ValueFunction(grid, values)


def bellman_maps(
    J: ValueFunction,
    problem: Problem,
    strategy: str,
    *,
    q: float | None = None,
    fixed_m: int | None = None,
    q_grid: np.ndarray | None = None,
    q_grid_size: int = DEFAULT_Q_GRID_SIZE,
    operator: ExpectationOperator | None = None,
) -> BellmanMaps:
    """One sweep over the whole grid, exposing the per-point decisions.

    Policy extraction applies this to a converged value function to read
    off the continuation values and minimizing actions.
    """
    operator = _require_operator(J, problem, operator)
    setup = _strategy_setup(problem, operator, strategy, q, fixed_m, q_grid, q_grid_size)
    return _sweep(J.values, problem, operator, strategy, **setup)
