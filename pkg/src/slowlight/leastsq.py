"""Damped least squares with analytic Jacobians.

Shared by the spectral and time-domain fitters: a plain Levenberg-Marquardt
damping schedule, deterministic for fixed inputs, with covariance-based
parameter uncertainties at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitConvergenceError


@dataclass
class LMResult:
    params: np.ndarray
    covariance: np.ndarray  # sigma^2 (J^T J)^-1 at the optimum
    cost: float  # sum of squared residuals
    n_iter: int
    cost_history: list

    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))


def levenberg_marquardt(
    residual,
    jacobian,
    p0,
    max_iter: int = 200,
    rel_tol: float = 1e-10,
    damping0: float = 1e-3,
) -> LMResult:
    """Minimise ||residual(p)||^2.

    ``residual(p)`` returns the residual vector, ``jacobian(p)`` its m x n
    Jacobian.  Convergence is declared when the relative cost decrease of
    an accepted step falls below ``rel_tol``; exceeding ``max_iter`` raises
    FitConvergenceError carrying the best parameters seen.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = np.asarray(residual(p), dtype=float)
    cost = float(r @ r)
    lam = damping0
    history = [cost]

    for it in range(1, max_iter + 1):
        jac = np.asarray(jacobian(p), dtype=float)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        for _ in range(50):  # grow damping until a step is accepted
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-30))
            try:
                step = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = p + step
            r_new = np.asarray(residual(p_new), dtype=float)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            raise FitConvergenceError(
                f"no downhill step found after damping at iteration {it}",
                best_params=p,
                residual_norm=np.sqrt(cost),
                cost_history=history,
            )
        decrease = (cost - cost_new) / max(cost, 1e-300)
        p, r, cost = p_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-15)
        if decrease < rel_tol:
            return LMResult(
                params=p,
                covariance=_covariance(jacobian(p), r),
                cost=cost,
                n_iter=it,
                cost_history=history,
            )
    raise FitConvergenceError(
        f"did not converge in {max_iter} iterations "
        f"(last relative decrease {decrease:.3e})",
        best_params=p,
        residual_norm=np.sqrt(cost),
        cost_history=history,
    )


def _covariance(jac: np.ndarray, r: np.ndarray) -> np.ndarray:
    m, n = jac.shape
    dof = max(m - n, 1)
    sigma2 = float(r @ r) / dof
    jtj = jac.T @ jac
    try:
        return sigma2 * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        return np.full((n, n), np.nan)
