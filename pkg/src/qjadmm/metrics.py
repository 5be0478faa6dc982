"""Ground-truth oracle and scalar diagnostics for the coupled problem.

The resource allocation problem couples per-node convex costs through one
affine equality constraint. For quadratic costs the saddle point is the
solution of a linear KKT system, computed here by block elimination; all
convergence diagnostics (Lagrangian gaps, merit distances, the ergodic
bound constant) are measured against that saddle point.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class SingularKktError(RuntimeError):
    """The KKT system of the coupled problem is singular."""


class IndefiniteWeightError(ValueError):
    """A requested weighted norm has an indefinite weight matrix."""


@dataclass(eq=False)
class SaddlePoint:
    """Primal-dual solution of the coupled problem plus its solve residual."""

    x_star: list = field(repr=False)
    lambda_star: np.ndarray = field(repr=False)
    nu_residual: float = 0.0


def coupling_residual(x_list, problems, b):
    """Global constraint violation ``sum_i A_i x_i - b``."""
    total = -np.asarray(b, dtype=float)
    for prob, x in zip(problems, x_list):
        total = total + prob.coupling @ x
    return total


def kkt_oracle(problems, b):
    """Solve the coupled quadratic program exactly by block elimination.

    Eliminates each ``x_i = (C_i'C_i)^{-1} (C_i'e_i - A_i' lam)`` and solves
    the Schur complement system
    ``sum_i A_i (C_i'C_i)^{-1} A_i' lam = sum_i A_i (C_i'C_i)^{-1} C_i'e_i - b``
    for the multiplier, then back-substitutes.

    Requires each ``C_i'C_i`` invertible (or at least a nonsingular aggregate
    system); raises :class:`SingularKktError` otherwise.
    """
    b = np.asarray(b, dtype=float)
    m = b.shape[0]
    schur = np.zeros((m, m))
    rhs = -b.copy()
    partial = []
    for prob in problems:
        obj = prob.objective
        gram = obj.hessian(None)
        try:
            factor = scipy.linalg.cho_factor(gram)
        except scipy.linalg.LinAlgError as exc:
            raise SingularKktError("a node's quadratic term is singular") from exc
        u = scipy.linalg.cho_solve(factor, obj.design.T @ obj.target)
        v = scipy.linalg.cho_solve(factor, prob.coupling.T)
        schur += prob.coupling @ v
        rhs += prob.coupling @ u
        partial.append((u, v))
    try:
        lam = scipy.linalg.solve(schur, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularKktError("the aggregate KKT system is singular") from exc

    x_star = [u - v @ lam for u, v in partial]
    feas = float(np.linalg.norm(coupling_residual(x_star, problems, b)))
    stat = max(
        float(np.linalg.norm(prob.objective.gradient(x) + prob.coupling.T @ lam))
        for prob, x in zip(problems, x_star)
    )
    return SaddlePoint(x_star=x_star, lambda_star=lam, nu_residual=max(feas, stat))


def lagrangian(x_list, lam, problems, b):
    """Sum of node costs plus the multiplier-weighted coupling violation."""
    value = sum(prob.objective.value(x) for prob, x in zip(problems, x_list))
    return float(value + np.asarray(lam, float) @ coupling_residual(x_list, problems, b))


def augmented_lagrangian(x_list, lam, problems, b, rho):
    """Lagrangian plus the quadratic penalty ``(rho/2) ||sum A_i x_i - b||^2``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    residual = coupling_residual(x_list, problems, b)
    return lagrangian(x_list, lam, problems, b) + 0.5 * rho * float(residual @ residual)


def _coupling_quadratic(prob, v):
    av = prob.coupling @ v
    return float(av @ av)


def merit_distance(x_list, dual, saddle, problems, config):
    """Weighted squared distance of an iterate to the saddle point.

    ``sum_i ||x_i - x_i*||^2_{P_i + rho A_i'A_i} + (1/(gamma rho))
    ||dual - lambda*||^2``: the quantity the exact parallel splitting drives
    monotonically down, and down up to a quantization-proportional slack
    when transmissions are quantized.
    """
    total = 0.0
    for prob, x, x_opt in zip(problems, x_list, saddle.x_star):
        d = x - x_opt
        total += prob.prox_quadratic(d) + config.rho * _coupling_quadratic(prob, d)
    dual_diff = np.asarray(dual, float) - saddle.lambda_star
    total += float(dual_diff @ dual_diff) / (config.gamma * config.rho)
    return float(total)


def ergodic_gap_constant(init_vars, saddle, problems, config):
    """Initial-distance constant of the averaged-gap bound.

    ``0.5 sum_i ||x_i^init - x_i*||^2_{rho A_i'A_i + P_i}
    + (1/(2 gamma rho)) ||dual^init - lambda*||^2``. The running average of
    Lagrangian gaps is bounded by this constant over the iteration count,
    plus a term proportional to the quantization level.

    The dual term uses the first node's initial multiplier estimate; under
    the default common initialization all nodes agree.
    """
    total = 0.0
    for prob, var, x_opt in zip(problems, init_vars, saddle.x_star):
        d = np.asarray(var.x, float) - x_opt
        total += 0.5 * (config.rho * _coupling_quadratic(prob, d) + prob.prox_quadratic(d))
    dual_diff = np.asarray(init_vars[0].dual, float) - saddle.lambda_star
    total += float(dual_diff @ dual_diff) / (2.0 * config.gamma * config.rho)
    return float(total)


def weighted_successive_diff(x_curr, x_next, problems, config, epsilons=None):
    """Half-sum of successive-iterate differences in discounted weights.

    Node ``i`` is weighted by ``rho A_i'A_i + P_i - (rho/eps_i) A_i'A_i``;
    each ``eps_i`` must be positive and keep the weight positive
    semidefinite (checked; :class:`IndefiniteWeightError` otherwise). The
    running average of these quantities inherits the same bound as the
    averaged Lagrangian gap.
    """
    n = len(problems)
    if epsilons is None:
        epsilons = [1.0] * n
    total = 0.0
    for prob, x0, x1, eps in zip(problems, x_curr, x_next, epsilons):
        if eps <= 0:
            raise ValueError("epsilons must be positive")
        gram = prob.coupling.T @ prob.coupling
        weight = config.rho * (1.0 - 1.0 / eps) * gram + prob.prox_matrix
        eigs = np.linalg.eigvalsh(weight)
        if eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])):
            raise IndefiniteWeightError(
                f"weight matrix indefinite for eps={eps}; choose a larger value"
            )
        d = np.asarray(x1, float) - np.asarray(x0, float)
        total += 0.5 * float(d @ weight @ d)
    return float(total)


def l1_error(x_list, saddle):
    """Summed per-node l1 distance to the optimal solution."""
    return float(
        sum(np.abs(np.asarray(x, float) - x_opt).sum() for x, x_opt in zip(x_list, saddle.x_star))
    )
