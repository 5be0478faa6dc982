"""Per-node proximal subproblems and operator norms.

Each node of the resource allocation problem owns a convex cost, a coupling
block of the global affine constraint, and a proximal weight. For quadratic
least-squares costs the proximal subproblem is a strictly convex QP solved
in closed form through one Cholesky factorization (cached per penalty, since
the system matrix never changes across iterations). A generic smooth convex
objective can be plugged in instead and is solved by a damped Newton loop.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize


class SingularSubproblemError(RuntimeError):
    """The proximal system matrix was not positive definite."""


@dataclass(eq=False)
class QuadraticObjective:
    """Least-squares cost ``0.5 * ||design @ x - target||^2`` (always convex)."""

    design: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.target = np.atleast_1d(np.asarray(self.target, dtype=float))
        if self.design.shape[0] != self.target.shape[0]:
            raise ValueError("design rows must match target length")

    @property
    def dimension(self):
        return self.design.shape[1]

    def value(self, x):
        r = self.design @ x - self.target
        return 0.5 * float(r @ r)

    def gradient(self, x):
        return self.design.T @ (self.design @ x - self.target)

    def hessian(self, x=None):
        return self.design.T @ self.design


@dataclass(eq=False)
class LocalProblem:
    """One node's data: objective, coupling block, and proximal weight.

    ``prox_weight`` is either a positive scalar ``tau`` (meaning ``tau * I``)
    or a full symmetric matrix. The objective must expose ``value`` and
    ``gradient``; ``hessian`` enables the Newton path for non-quadratic
    costs.
    """

    objective: object
    coupling: np.ndarray
    prox_weight: object
    _solve_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.coupling = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        if not np.isscalar(self.prox_weight):
            self.prox_weight = np.asarray(self.prox_weight, dtype=float)

    @property
    def dimension(self):
        return self.coupling.shape[1]

    @property
    def constraint_dim(self):
        return self.coupling.shape[0]

    @property
    def prox_is_scalar(self):
        return np.isscalar(self.prox_weight)

    @property
    def prox_matrix(self):
        if self.prox_is_scalar:
            return float(self.prox_weight) * np.eye(self.dimension)
        return self.prox_weight

    def prox_apply(self, v):
        """``P @ v`` without materializing ``P`` in the scalar case."""
        if self.prox_is_scalar:
            return float(self.prox_weight) * v
        return self.prox_weight @ v

    def prox_quadratic(self, v):
        """``v.T @ P @ v``."""
        return float(v @ self.prox_apply(v))

    def prox_min_eigenvalue(self):
        if self.prox_is_scalar:
            return float(self.prox_weight)
        return float(np.linalg.eigvalsh(self.prox_weight).min())

    def _factorization(self, rho):
        key = float(rho)
        cached = self._solve_cache.get(key)
        if cached is None:
            h = (
                self.objective.hessian(None)
                + self.prox_matrix
                + rho * self.coupling.T @ self.coupling
            )
            try:
                cached = scipy.linalg.cho_factor(h)
            except scipy.linalg.LinAlgError as exc:
                raise SingularSubproblemError(
                    "proximal system is not positive definite; check the "
                    "proximal weight and problem rank"
                ) from exc
            self._solve_cache[key] = cached
        return cached


def prox_step(problem, x_prev, residual_estimate, dual, rho):
    """Exact minimizer of one node's proximal subproblem.

    Minimizes ``f(x) + 0.5 * ||x - x_prev||_P^2
    + (rho/2) * ||A x - A x_prev + residual_estimate + dual / rho||^2``.

    For a quadratic objective the normal equations
    ``(C'C + P + rho A'A) x = C'e + P x_prev
    + rho A'(A x_prev - residual_estimate - dual / rho)``
    are solved through a cached Cholesky factorization; other objectives fall
    back to a damped Newton loop driven to gradient norm 1e-9.

    The function is pure: identical inputs give bit-identical outputs.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    x_prev = np.asarray(x_prev, dtype=float)
    a = problem.coupling
    shift = a @ x_prev - np.asarray(residual_estimate, float) - np.asarray(dual, float) / rho
    if isinstance(problem.objective, QuadraticObjective):
        obj = problem.objective
        rhs = obj.design.T @ obj.target + problem.prox_apply(x_prev) + rho * (a.T @ shift)
        return scipy.linalg.cho_solve(problem._factorization(rho), rhs)
    return _newton_prox(problem, x_prev, shift, rho)


def _newton_prox(problem, x_prev, shift, rho, grad_tol=1e-9, max_iter=200):
    # Damped Newton on the full subproblem; the prox and penalty terms make
    # it strongly convex whenever the prox weight is positive definite.
    a = problem.coupling
    obj = problem.objective

    def total_value(x):
        pen = a @ x - shift
        return (
            obj.value(x)
            + 0.5 * problem.prox_quadratic(x - x_prev)
            + 0.5 * rho * float(pen @ pen)
        )

    def total_gradient(x):
        return obj.gradient(x) + problem.prox_apply(x - x_prev) + rho * (a.T @ (a @ x - shift))

    if not hasattr(obj, "hessian"):
        res = scipy.optimize.minimize(
            total_value, x_prev, jac=total_gradient, method="L-BFGS-B",
            options={"gtol": grad_tol, "maxiter": 10_000},
        )
        return np.asarray(res.x, dtype=float)

    x = x_prev.astype(float).copy()
    for _ in range(max_iter):
        g = total_gradient(x)
        if float(np.linalg.norm(g)) <= grad_tol:
            break
        h = obj.hessian(x) + problem.prox_matrix + rho * (a.T @ a)
        try:
            step = -scipy.linalg.cho_solve(scipy.linalg.cho_factor(h), g)
        except scipy.linalg.LinAlgError as exc:
            raise SingularSubproblemError("Newton system not positive definite") from exc
        t = 1.0
        base = total_value(x)
        slope = float(g @ step)
        while t > 1e-12 and total_value(x + t * step) > base + 1e-4 * t * slope:
            t *= 0.5
        x = x + t * step
    return x


def spectral_norm(a, tol=1e-10, max_iter=100_000):
    """Largest singular value via power iteration on the Gram matrix.

    Deterministic: starts from the normalized all-ones vector and restarts
    with fixed alternatives if that start lies in the null space. Stops when
    the squared-norm estimate changes by a relative ``tol``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0 or not a.any():
        return 0.0
    n = a.shape[1]
    starts = [
        np.ones(n),
        1.0 + np.arange(n),
        np.random.default_rng(0).standard_normal(n),
    ]
    for v0 in starts:
        v = v0 / np.linalg.norm(v0)
        if not (a @ v).any():
            continue  # start lies in the null space; try the next one
        est = 0.0
        for _ in range(max_iter):
            u = a @ v
            new_est = float(u @ u)
            if abs(new_est - est) <= tol * new_est:
                return float(np.sqrt(new_est))
            est = new_est
            w = a.T @ u  # nonzero: u is in range(A), never orthogonal to it
            v = w / np.linalg.norm(w)
        return float(np.sqrt(est))
    raise RuntimeError("power iteration failed to find a nonzero direction")
