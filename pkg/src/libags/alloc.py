"""Gap-score allocation: how much synthetic mass each candidate deserves.

Each candidate j gets ``G_j = max(0, sqrt(r_j / lambda) - coverage_j)``:
importance opens the budget, existing real coverage closes it. The
multiplier lambda is the unique value at which the total allocated mass
hits the requested target; since the total is continuous and strictly
decreasing in lambda wherever it is positive, bisection solves it. The
search runs in log(lambda) space, which keeps extreme coverage scales
(tiny or astronomically large density estimates) inside float range.

``continuous_allocation_oracle`` is a deliberately independent solver for
the same allocation problem on a binned domain, used by the verification
suite to confirm that the closed form above actually minimizes the
inverse-evidence objective it is derived from. It is not a product path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoPositiveImportance, OracleConvergenceError, ValidationError

BISECT_REL_TOL = 1e-6
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class AllocationSolution:
    lambda_: float
    gap_scores: np.ndarray
    total_mass: float
    target_mass: float


def gap_score(r_j: float, coverage_j: float, lambda_: float) -> float:
    """Clipped allocation score for one candidate."""
    if lambda_ <= 0:
        raise ValidationError(f"lambda must be positive, got {lambda_}")
    return max(0.0, np.sqrt(r_j / lambda_) - coverage_j)


def _mass_at(log_lambda: float, log_r, coverage) -> tuple:
    """Total allocated mass and per-candidate scores at exp(log_lambda)."""
    scores = np.exp(0.5 * (log_r - log_lambda)) - coverage
    np.maximum(scores, 0.0, out=scores)
    return float(scores.sum()), scores


def solve_lambda(r, coverage, target_mass: float) -> AllocationSolution:
    """Find lambda so the summed clipped scores equal ``target_mass``.

    The initial bracket is ``[min_pos_r / (max(coverage) + target)^2,
    max_r * 1e6]`` and is widened when an endpoint does not yet straddle
    the target. Terminates when the mass is within 1e-6 relative.
    """
    r = np.asarray(r, dtype=np.float64)
    coverage = np.asarray(coverage, dtype=np.float64)
    if r.shape != coverage.shape or r.ndim != 1:
        raise ValidationError("r and coverage must be vectors of equal length")
    if np.any(r < 0) or np.any(coverage < 0):
        raise ValidationError("r and coverage must be nonnegative")
    if target_mass <= 0:
        raise ValidationError(f"target_mass must be positive, got {target_mass}")
    positive = r > 0
    if not np.any(positive):
        raise NoPositiveImportance("all candidate importances are zero")

    # Work in log space; r == 0 rows contribute nothing at any lambda.
    log_r = np.full(r.shape, -np.inf)
    log_r[positive] = np.log(r[positive])
    tol = BISECT_REL_TOL * target_mass

    lo = np.log(r[positive].min()) - 2.0 * np.log(coverage.max() + target_mass)
    hi = np.log(r.max() * 1e6)
    mass_lo, scores = _mass_at(lo, log_r, coverage)
    for _ in range(200):
        if mass_lo >= target_mass - tol:
            break
        lo -= 45.0
        mass_lo, scores = _mass_at(lo, log_r, coverage)
    if abs(mass_lo - target_mass) <= tol:
        return AllocationSolution(float(np.exp(lo)), scores, mass_lo, float(target_mass))
    mass_hi, scores = _mass_at(hi, log_r, coverage)
    for _ in range(200):
        if mass_hi <= target_mass + tol:
            break
        hi += 45.0
        mass_hi, scores = _mass_at(hi, log_r, coverage)
    if abs(mass_hi - target_mass) <= tol:
        return AllocationSolution(float(np.exp(hi)), scores, mass_hi, float(target_mass))

    mid, mass_mid, scores = lo, mass_lo, scores
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        mass_mid, scores = _mass_at(mid, log_r, coverage)
        if abs(mass_mid - target_mass) <= tol:
            break
        if mass_mid > target_mass:
            lo = mid
        else:
            hi = mid
    return AllocationSolution(float(np.exp(mid)), scores, mass_mid, float(target_mass))


def _project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, y.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(y - theta, 0.0)


def continuous_allocation_oracle(r_bins, p_bins, n: int, m: int, grid: int = 200_000) -> np.ndarray:
    """Minimize the binned inverse-evidence objective by projected gradient.

    The domain is split into ``len(r_bins)`` equal bins of width
    ``1/len(r_bins)``; ``p_bins`` must satisfy ``sum(p_bins) * width == 1``.
    Returns the optimal allocation density per bin (``sum(q) * width == 1``).
    ``grid`` caps the number of projected-gradient iterations; steps use
    backtracking from an inverse-curvature scale, shrinking as iterates
    approach the minimizer, and the loop exits at first-order stationarity.
    """
    r = np.asarray(r_bins, dtype=np.float64)
    p = np.asarray(p_bins, dtype=np.float64)
    if r.shape != p.shape or r.ndim != 1 or r.size < 1:
        raise ValidationError("r_bins and p_bins must be vectors of equal length")
    if np.any(r < 0) or np.any(p < 0):
        raise ValidationError("r_bins and p_bins must be nonnegative")
    width = 1.0 / r.size
    if abs(p.sum() * width - 1.0) > 1e-9:
        raise ValidationError("p_bins must integrate to 1 over the unit domain")
    if np.any(p == 0):
        raise ValidationError("oracle requires strictly positive real density per bin")
    if not np.any(r > 0):
        return np.ones(r.size)  # objective is identically zero; return the uniform density

    # Optimize over s = q * width, the per-bin mass on the standard simplex.
    def objective(s):
        return float((width * r / (n * p + (m / width) * s)).sum())

    def gradient(s):
        return -m * r / (n * p + (m / width) * s) ** 2

    curvature = (2.0 * m * m * r / (width * (n * p) ** 3)).max()
    step = 1.0 / curvature if curvature > 0 else 1.0
    s = np.full(r.size, 1.0 / r.size)
    value = objective(s)
    stalled = 0
    for _ in range(grid):
        g = gradient(s)
        mu = g.min()
        if (g[s > 1e-12] - mu).max(initial=0.0) < 1e-8 * max(1.0, abs(mu)):
            return s / width
        trial_step = step
        for _ in range(200):
            s_new = _project_simplex(s - trial_step * g)
            value_new = objective(s_new)
            if value_new <= value + 1e-4 * float(g @ (s_new - s)) or bool((s_new == s).all()):
                break
            trial_step *= 0.5
        # At float resolution the projection stops moving; that iterate is
        # stationary to machine precision even if the residual test is not met.
        stalled = stalled + 1 if bool((s_new == s).all()) else 0
        if stalled >= 3:
            return s / width
        s, value, step = s_new, value_new, min(trial_step * 1.3, 1e6 / max(curvature, 1e-12))
    raise OracleConvergenceError(f"projected gradient did not reach stationarity in {grid} iterations")
