"""B-spline / NURBS spaces on open knot vectors, Greville collocation grids,
and the collocation operator matrices (values, first and second arc-length
derivatives) used by the beam engine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SplineSpaceError(ValueError):
    """Invalid knot vector, degree, or weights."""


def make_open_uniform_knots(p: int, n_basis: int) -> np.ndarray:
    """Open knot vector on [0, 1] with uniformly spaced interior knots.

    The first and last knots are repeated ``p + 1`` times so the basis is
    interpolatory at both ends; ``n_basis - p - 1`` interior knots are placed
    uniformly.
    """
    if p < 1:
        raise SplineSpaceError(f"degree must be >= 1, got {p}")
    if n_basis < p + 1:
        raise SplineSpaceError(
            f"need at least p+1 = {p + 1} basis functions, got {n_basis}"
        )
    n_int = n_basis - p - 1
    interior = np.arange(1, n_int + 1, dtype=float) / (n_int + 1)
    return np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])


@dataclass(frozen=True)
class SplineSpace:
    """A univariate NURBS space of degree ``p`` on an open knot vector.

    ``weights`` default to 1, which makes the space a plain B-spline space;
    the paper's benchmarks never need rational weights but the evaluation
    path supports them.
    """

    p: int
    knots: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if self.p < 1:
            raise SplineSpaceError(f"degree must be >= 1, got {self.p}")
        if knots.ndim != 1 or knots.size < 2 * (self.p + 1):
            raise SplineSpaceError("knot vector too short for the degree")
        if np.any(np.diff(knots) < 0):
            raise SplineSpaceError("knot vector must be non-decreasing")
        p = self.p
        if not (np.all(knots[: p + 1] == knots[0]) and np.all(knots[-(p + 1):] == knots[-1])):
            raise SplineSpaceError("knot vector must be open (end multiplicity p+1)")
        if knots.size > 2 * (p + 1):
            if knots[p + 1] == knots[0] or knots[-(p + 2)] == knots[-1]:
                raise SplineSpaceError("end knot multiplicity exceeds p+1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.n_basis,):
                raise SplineSpaceError("weights length must equal the basis count")
            if np.any(w <= 0.0):
                raise SplineSpaceError("weights must be strictly positive")
            object.__setattr__(self, "weights", w)

    @property
    def n_basis(self) -> int:
        return self.knots.size - self.p - 1

    @property
    def is_rational(self) -> bool:
        return self.weights is not None and not np.allclose(self.weights, 1.0)


@dataclass(frozen=True)
class CollocationGrid:
    """Collocation abscissae in [0, 1], one per basis function."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if np.any(np.diff(pts) <= 0):
            raise SplineSpaceError("collocation points must be strictly increasing")

    @property
    def n_points(self) -> int:
        return self.points.size


def find_span(knots: np.ndarray, p: int, u: float) -> int:
    """Index i such that knots[i] <= u < knots[i+1] (clamped at the right end)."""
    n = knots.size - p - 2
    if u >= knots[n + 1]:
        return n
    if u <= knots[p]:
        return p
    return int(np.searchsorted(knots, u, side="right") - 1)


def _bspline_ders(knots, p, u, span, nders):
    """Non-vanishing B-spline basis functions and derivatives at ``u``.

    Returns an array ``ders[k, j]`` with the k-th derivative of basis
    function ``span - p + j``. Standard knot-insertion-free recurrence with
    the derivative triangle (the inverted-difference tables ``ndu``).
    """
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((nders + 1, p + 1))
    ders[0, :] = ndu[:, p]
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nders + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, nders + 1):
        ders[k, :] *= fac
        fac *= p - k
    return ders


def eval_basis(space: SplineSpace, u: float, max_derivative: int = 0):
    """Values (and parametric derivatives up to order 2) of the nonzero basis
    functions at ``u``.

    Returns ``(first_index, ders)`` where ``ders[k, j]`` is the k-th
    derivative of function ``first_index + j``. Rational (NURBS) correction
    is applied through the quotient rule when the space carries weights.
    """
    if not (0.0 <= u <= 1.0):
        raise SplineSpaceError(f"parameter {u} outside [0, 1]")
    if not (0 <= max_derivative <= 2):
        raise SplineSpaceError("derivative order must be 0, 1 or 2")
    p = self_p = space.p
    span = find_span(space.knots, p, u)
    ders = _bspline_ders(space.knots, p, u, span, max_derivative)
    first = span - self_p
    if space.weights is None:
        return first, ders

    w = space.weights[first: first + p + 1]
    N = ders * w  # weighted basis and derivatives
    W = N.sum(axis=1)  # W, W', W''
    R = np.zeros_like(ders)
    R[0] = N[0] / W[0]
    if max_derivative >= 1:
        R[1] = (N[1] - R[0] * W[1]) / W[0]
    if max_derivative >= 2:
        R[2] = (N[2] - 2.0 * R[1] * W[1] - R[0] * W[2]) / W[0]
    return first, R


def basis_row(space: SplineSpace, u: float, derivative: int = 0) -> np.ndarray:
    """Dense row of all basis function values (or derivatives) at ``u``."""
    first, ders = eval_basis(space, u, derivative)
    row = np.zeros(space.n_basis)
    row[first: first + space.p + 1] = ders[derivative]
    return row


def greville_abscissae(space: SplineSpace) -> CollocationGrid:
    """Greville (knot-average) collocation points, one per basis function."""
    p, knots = space.p, space.knots
    pts = np.array([knots[j + 1: j + p + 1].mean() for j in range(space.n_basis)])
    return CollocationGrid(points=pts)


@dataclass(frozen=True)
class CollocationOperators:
    """Collocation matrices of basis values and arc-length derivatives.

    ``D0 @ ctrl`` interpolates control values at the collocation points,
    ``D1``/``D2`` produce first/second arc-length derivatives there. The
    parametric-derivative forms are kept because the lumped mass blocks are
    built from them (geometry-free rows); ``point_derivative`` maps
    point values, rather than control values, to their arc-length derivative
    (used for the curvature field, which lives at the collocation points).
    """

    D0: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    D1_param: np.ndarray
    D2_param: np.ndarray
    jacobian: np.ndarray  # per-point |dx/du|, s-derivative = u-derivative / jacobian
    point_derivative: np.ndarray = field(repr=False, default=None)
    _lu_D0: tuple = field(repr=False, default=None, compare=False)

    @property
    def n(self) -> int:
        return self.D0.shape[0]

    def fit_pointwise(self, values: np.ndarray) -> np.ndarray:
        """Control values whose interpolation matches ``values`` at the grid."""
        import scipy.linalg as sla

        return sla.lu_solve(self._lu_D0, values)


def collocation_operators(space: SplineSpace, grid: CollocationGrid,
                          reference_jacobian) -> CollocationOperators:
    """Assemble D0/D1/D2, one row per collocation point.

    ``reference_jacobian`` is |dx/du|: a scalar for straight references
    (the beam length) or one value per collocation point for curved ones.
    Second derivatives assume a per-point-constant parameterization speed,
    which is exact for straight (and piecewise straight) references.
    """
    import scipy.linalg as sla

    nb = space.n_basis
    if grid.n_points != nb:
        raise SplineSpaceError("grid size must match the basis count")
    jac = np.broadcast_to(np.asarray(reference_jacobian, dtype=float),
                          (nb,)).copy()
    if np.any(jac <= 0.0) or not np.all(np.isfinite(jac)):
        raise SplineSpaceError("reference jacobian must be finite and positive")

    D0 = np.zeros((nb, nb))
    D1p = np.zeros((nb, nb))
    D2p = np.zeros((nb, nb))
    for i, u in enumerate(grid.points):
        first, ders = eval_basis(space, float(u), 2)
        sl = slice(first, first + space.p + 1)
        D0[i, sl] = ders[0]
        D1p[i, sl] = ders[1]
        D2p[i, sl] = ders[2]
    D1 = D1p / jac[:, None]
    D2 = D2p / (jac[:, None] ** 2)
    lu = sla.lu_factor(D0)
    point_der = sla.lu_solve(lu, D1.T, trans=1).T  # D1 @ inv(D0)
    return CollocationOperators(D0=D0, D1=D1, D2=D2, D1_param=D1p, D2_param=D2p,
                                jacobian=jac, point_derivative=point_der,
                                _lu_D0=lu)
