"""B-spline / NURBS curves: basis evaluation with derivatives, Greville
abscissae, curve evaluation, arc-length conversion and curve interpolation.

Only what a collocation discretization of a 1D strong form needs: basis values
and derivatives up to second order at arbitrary parameters in [0, 1], plus the
parametric-to-arc-length chain rule driven by the initial geometry Jacobian.
"""

from __future__ import annotations

import numpy as np

#: Jacobians below this are treated as a degenerate parameterization.
MIN_JACOBIAN = 1.0e-12


class KnotVector:
    """Open (clamped) knot vector on [0, 1].

    Parameters
    ----------
    degree : int
        Polynomial degree p >= 1.
    knots : array_like
        Nondecreasing knots with the first and last value repeated p+1 times.
    """

    def __init__(self, degree: int, knots):
        self.degree = int(degree)
        self.knots = np.asarray(knots, dtype=float)
        p = self.degree
        if p < 1:
            raise ValueError("degree must be >= 1")
        if np.any(np.diff(self.knots) < 0.0):
            raise ValueError("knots must be nondecreasing")
        if len(self.knots) < 2 * (p + 1):
            raise ValueError("knot vector too short for degree")
        if (np.any(self.knots[: p + 1] != self.knots[0])
                or np.any(self.knots[-(p + 1):] != self.knots[-1])):
            raise ValueError("knot vector must be clamped (open)")
        interior = self.knots[p + 1:-(p + 1)]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if np.any(counts > p):
                raise ValueError("interior knot multiplicity exceeds degree")

    @property
    def n(self) -> int:
        """Number of basis functions / control points."""
        return len(self.knots) - self.degree - 1

    @property
    def u_min(self) -> float:
        return float(self.knots[0])

    @property
    def u_max(self) -> float:
        return float(self.knots[-1])

    @classmethod
    def open_uniform(cls, degree: int, n: int) -> "KnotVector":
        """Clamped knot vector with n basis functions and uniform interior knots."""
        if n < degree + 1:
            raise ValueError("need at least degree+1 control points")
        interior = np.linspace(0.0, 1.0, n - degree + 1)[1:-1]
        knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
        return cls(degree, knots)


def find_span(kv: KnotVector, u: float) -> int:
    """Index i with knots[i] <= u < knots[i+1] (last nonempty span at u = u_max)."""
    p = kv.degree
    U = kv.knots
    n = kv.n
    if u >= U[n]:
        return n - 1
    if u <= U[p]:
        return p
    return int(np.searchsorted(U, u, side="right") - 1)


def _bspline_ders(kv: KnotVector, u: float, max_deriv: int) -> tuple[int, np.ndarray]:
    """Nonzero B-spline basis functions and derivatives at u.

    Returns ``(first, ders)`` where ``ders[k, j]`` is the k-th derivative of
    basis function ``first + j`` (j = 0..p).  Standard knot-difference
    recursion over the triangular table of divided differences.
    """
    p = kv.degree
    U = kv.knots
    i = find_span(kv, u)
    nd = min(max_deriv, p)

    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - U[i + 1 - j]
        right[j] = U[i + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((max_deriv + 1, p + 1))
    ders[0, :] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nd + 1):
            d = 0.0
            rk, pk = r - k, p - k
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
    for k in range(1, nd + 1):
        ders[k, :] *= fac
        fac *= p - k
    return i - p, ders


def basis_eval(kv: KnotVector, u: float, max_deriv: int = 0,
               weights: np.ndarray | None = None) -> tuple[int, np.ndarray]:
    """Nonzero basis functions and u-derivatives at ``u`` up to ``max_deriv``.

    With ``weights`` the rational basis is returned (quotient rule, derivatives
    up to order 2); otherwise the plain B-spline basis.

    Returns
    -------
    (first, ders)
        ``ders[k, j]`` is the k-th derivative of basis ``first + j``.
    """
    if not kv.u_min <= u <= kv.u_max:
        raise ValueError(f"parameter {u} outside [{kv.u_min}, {kv.u_max}]")
    if max_deriv > kv.degree:
        raise ValueError("derivative order exceeds degree")
    if weights is None:
        return _bspline_ders(kv, u, max_deriv)
    if max_deriv > 2:
        raise ValueError("rational derivatives implemented up to order 2")
    first, N = _bspline_ders(kv, u, max_deriv)
    w = np.asarray(weights, dtype=float)[first:first + kv.degree + 1]
    A = N * w  # weighted numerators, same layout as N
    W = A.sum(axis=1)
    R = np.zeros_like(A)
    R[0] = A[0] / W[0]
    if max_deriv >= 1:
        R[1] = (A[1] - R[0] * W[1]) / W[0]
    if max_deriv >= 2:
        R[2] = (A[2] - 2.0 * R[1] * W[1] - R[0] * W[2]) / W[0]
    return first, R


def greville(kv: KnotVector) -> np.ndarray:
    """Greville abscissae (knot averages), one collocation point per basis."""
    p = kv.degree
    U = kv.knots
    return np.array([U[i + 1:i + p + 1].mean() for i in range(kv.n)])


def basis_matrices(kv: KnotVector, us, max_deriv: int = 0,
                   weights: np.ndarray | None = None) -> list[np.ndarray]:
    """Dense collocation matrices ``B_k`` with ``B_k[i, j] = d^k R_j (us[i])``."""
    us = np.atleast_1d(np.asarray(us, dtype=float))
    mats = [np.zeros((len(us), kv.n)) for _ in range(max_deriv + 1)]
    for i, u in enumerate(us):
        first, ders = basis_eval(kv, u, max_deriv, weights)
        for k in range(max_deriv + 1):
            mats[k][i, first:first + kv.degree + 1] = ders[k]
    return mats


class NurbsCurve:
    """Weighted spline curve in R^3 defined by a clamped knot vector."""

    def __init__(self, kv: KnotVector, points, weights=None):
        self.kv = kv
        self.points = np.asarray(points, dtype=float)
        if self.points.shape != (kv.n, 3):
            raise ValueError(f"expected {kv.n} control points of dimension 3")
        if weights is None:
            self.weights = np.ones(kv.n)
        else:
            self.weights = np.asarray(weights, dtype=float)
            if self.weights.shape != (kv.n,):
                raise ValueError("one weight per control point required")
            if np.any(self.weights <= 0.0):
                raise ValueError("weights must be positive")

    @property
    def is_rational(self) -> bool:
        return not np.allclose(self.weights, 1.0)

    def eval(self, u: float, max_deriv: int = 0) -> np.ndarray:
        """Position and parametric derivatives, shape (max_deriv+1, 3)."""
        w = self.weights if self.is_rational else None
        first, R = basis_eval(self.kv, u, max_deriv, w)
        return R @ self.points[first:first + self.kv.degree + 1]

    def eval_many(self, us, max_deriv: int = 0) -> list[np.ndarray]:
        """Evaluate at many parameters; returns [c, c_u, ...] arrays (len(us), 3)."""
        w = self.weights if self.is_rational else None
        mats = basis_matrices(self.kv, us, max_deriv, w)
        return [B @ self.points for B in mats]

    def jacobian(self, u: float) -> float:
        """Parametric-to-arc-length Jacobian J(u) = ||c,_u||."""
        J = float(np.linalg.norm(self.eval(u, 1)[1]))
        if J <= MIN_JACOBIAN:
            raise ValueError(f"degenerate parameterization at u = {u}")
        return J

    def arc_length(self, a: float | None = None, b: float | None = None,
                   gauss_order: int = 16) -> float:
        """Curve length by per-span Gauss quadrature of the Jacobian."""
        a = self.kv.u_min if a is None else a
        b = self.kv.u_max if b is None else b
        xg, wg = np.polynomial.legendre.leggauss(gauss_order)
        spans = np.unique(np.clip(self.kv.knots, a, b))
        total = 0.0
        for lo, hi in zip(spans[:-1], spans[1:]):
            if hi <= lo:
                continue
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            us = mid + half * xg
            total += half * np.dot(wg, [self.jacobian(u) for u in us])
        return float(total)


def arclength_derivatives(c0: NurbsCurve, u: float) -> tuple[float, float]:
    """Jacobian J(u) = ||c0,_u|| and its parametric derivative J,_u."""
    d = c0.eval(u, 2)
    J = float(np.linalg.norm(d[1]))
    if J <= MIN_JACOBIAN:
        raise ValueError(f"degenerate parameterization at u = {u}")
    J_u = float(np.dot(d[1], d[2]) / J)
    return J, J_u


def to_arclength(f_u: np.ndarray, f_uu: np.ndarray, J: float,
                 J_u: float) -> tuple[np.ndarray, np.ndarray]:
    """Convert parametric derivatives of any field to arc-length derivatives."""
    f_s = f_u / J
    f_ss = f_uu / J ** 2 - f_u * J_u / J ** 3
    return f_s, f_ss


def interpolate_curve(params, points, kv: KnotVector) -> NurbsCurve:
    """Interpolating B-spline curve through ``points`` at ``params``.

    The parameters must be the Greville abscissae of ``kv`` (one sample per
    basis function), which keeps the collocation matrix well conditioned.
    """
    params = np.asarray(params, dtype=float)
    points = np.asarray(points, dtype=float)
    if len(params) != kv.n:
        raise ValueError(f"need exactly {kv.n} samples, got {len(params)}")
    if not np.allclose(params, greville(kv), atol=1.0e-12):
        raise ValueError("sample parameters must be the Greville abscissae")
    B = basis_matrices(kv, params, 0)[0]
    try:
        ctrl = np.linalg.solve(B, points)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular interpolation matrix") from exc
    return NurbsCurve(kv, ctrl)


def line_curve(start, end, degree: int, n: int) -> NurbsCurve:
    """Straight segment with control points at the Greville abscissae."""
    kv = KnotVector.open_uniform(degree, n)
    g = greville(kv)
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    return NurbsCurve(kv, start + g[:, None] * (end - start))


def interpolate_function(fn, degree: int, n: int) -> NurbsCurve:
    """Interpolate an analytic curve ``fn: u in [0,1] -> R^3`` at Greville points."""
    kv = KnotVector.open_uniform(degree, n)
    g = greville(kv)
    return interpolate_curve(g, np.array([fn(u) for u in g]), kv)
