"""Executable forms of the estimator-rate and control-error-bound results.

* parameter-estimate variance decays like 1/N in the number of sample
  paths (checked by log-log regression over a grid of N),
* the probability that the estimated optimal action (a ratio of two
  correlated normal estimators) misses the true optimum by more than eta
  is bounded by a Chebyshev-plus-normal-tail expression,
* the quadratic g(u) = u^2 sigma2^2 - 2 u sigma12 + sigma1^2 that drives
  the bound, and the weighted sample mean projection it is applied to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import SingularDesignError
from .estimation import RatioMoments
from .rng import make_rng

# ---------------------------------------------------------------------------
# g(u) and the weighted sample mean
# ---------------------------------------------------------------------------


def g_variance_function(moments: RatioMoments, u) -> float | np.ndarray:
    """g(u) = u^2 sigma2^2 - 2 u sigma12 + sigma1^2."""
    u = np.asarray(u, dtype=float)
    out = u**2 * moments.sigma2**2 - 2.0 * u * moments.sigma12 + moments.sigma1**2
    return float(out) if out.ndim == 0 else out


def g_argmin(moments: RatioMoments) -> float:
    """Minimizer of g: sigma12 / sigma2^2 (set dg/du = 0 and solve)."""
    return moments.sigma12 / moments.sigma2**2


def g_min(moments: RatioMoments) -> float:
    """Minimum of g: (sigma2^2 sigma1^2 - sigma12^2) / sigma2^2."""
    return (moments.sigma2**2 * moments.sigma1**2 - moments.sigma12**2) / moments.sigma2**2


def weighted_sample_mean(trajectory_features, K, U) -> float:
    """Projection of offline actions onto the online feature direction:

        ubar = k0' (K'K)^{-1} K' U.
    """
    k0 = np.atleast_1d(np.asarray(trajectory_features, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    U = np.asarray(U, dtype=float).ravel()
    gram = K.T @ K
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularDesignError("K'K is singular")
    return float(k0 @ np.linalg.solve(gram, K.T @ U))


# ---------------------------------------------------------------------------
# Control-error probability bound
# ---------------------------------------------------------------------------


@dataclass
class BoundConfig:
    """One scalar y = b*u + c + e setting for the bound battery."""

    b: float
    c: float
    sigma: float
    y_star: float
    n_offline: int
    action_spread: float = 1.0
    name: str = ""


@dataclass
class BoundReport:
    eta: float
    bound_action: float
    bound_output: float
    empirical_freq_action: float
    empirical_freq_output: float
    n_trials: int
    moments: RatioMoments | None = None

    def satisfied(self, n_se: float = 3.0) -> bool:
        """Empirical frequency within bound + n_se binomial standard errors."""
        ok = True
        for freq, bound in (
            (self.empirical_freq_action, self.bound_action),
            (self.empirical_freq_output, self.bound_output),
        ):
            if bound >= 1.0:  # vacuous bound, trivially satisfied
                continue
            se = np.sqrt(max(freq * (1.0 - freq), 1.0 / self.n_trials) / self.n_trials)
            ok = ok and freq <= bound + n_se * se
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "eta": float(self.eta),
            "bound_action": float(self.bound_action),
            "bound_output": float(self.bound_output),
            "empirical_freq_action": float(self.empirical_freq_action),
            "empirical_freq_output": float(self.empirical_freq_output),
            "n_trials": int(self.n_trials),
            "vacuous_action": bool(self.bound_action >= 1.0),
            "vacuous_output": bool(self.bound_output >= 1.0),
            "satisfied": self.satisfied(),
        }


def bound_moments(config: BoundConfig, X: np.ndarray) -> RatioMoments:
    """Exact sampling moments of (y* - c_hat, b_hat) for a fixed design X=[u, 1]."""
    cov = config.sigma**2 * np.linalg.inv(X.T @ X)
    return RatioMoments(
        mu1=config.y_star - config.c,
        mu2=config.b,
        sigma1=float(np.sqrt(cov[1, 1])),
        sigma2=float(np.sqrt(cov[0, 0])),
        sigma12=-float(cov[1, 0]),
    )


def analytic_bounds(moments: RatioMoments, eta: float) -> tuple[float, float]:
    """Both lines of the control-error bound at threshold eta."""
    m = moments
    num = m.sigma2**2 * m.sigma1**2 - m.sigma12**2
    tail = 2.0 * norm.cdf(-abs(m.mu2) / m.sigma2)
    return (
        num / (m.mu2 * m.sigma2 * eta) ** 2 + tail,
        num / (m.sigma2 * eta) ** 2 + tail,
    )


def theorem2_bound_check(
    config: BoundConfig, eta: float, n_trials: int, seed: int
) -> BoundReport:
    """Monte Carlo exceedance frequencies versus the analytic bounds.

    Each trial redraws the observation noise on a fixed offline design,
    refits (b, c) by least squares, and forms the estimated optimal
    action u_hat = (y* - c_hat)/b_hat.  The action line checks
    |u_hat - u*| > eta; the output line checks the induced mean output
    error |b (u_hat - u*)| > eta.
    """
    rng = make_rng(seed, tag="theorem2")
    u = (rng.random(config.n_offline) - 0.5) * 2.0 * config.action_spread
    X = np.column_stack([u, np.ones_like(u)])
    moments = bound_moments(config, X)
    proj = np.linalg.solve(X.T @ X, X.T)  # (2, n)
    noise = rng.standard_normal((n_trials, config.n_offline)) * config.sigma
    theta_hat = np.array([config.b, config.c]) + noise @ proj.T  # (n_trials, 2)
    u_hat = (config.y_star - theta_hat[:, 1]) / theta_hat[:, 0]
    u_star = (config.y_star - config.c) / config.b
    err_action = np.abs(u_hat - u_star)
    err_output = np.abs(config.b) * err_action
    bound_action, bound_output = analytic_bounds(moments, eta)
    return BoundReport(
        eta=eta,
        bound_action=bound_action,
        bound_output=bound_output,
        empirical_freq_action=float(np.mean(err_action > eta)),
        empirical_freq_output=float(np.mean(err_output > eta)),
        n_trials=n_trials,
        moments=moments,
    )


DEFAULT_BOUND_BATTERY: list[BoundConfig] = [
    BoundConfig(b=-1.8, c=91.7, sigma=1.0, y_star=90.0, n_offline=200, action_spread=2.0, name="dri-etch"),
    BoundConfig(b=-1.8, c=91.7, sigma=1.0, y_star=90.0, n_offline=800, action_spread=2.0, name="dri-etch-large-n"),
    BoundConfig(b=2.5, c=10.0, sigma=0.5, y_star=12.0, n_offline=600, action_spread=1.0, name="small-gain"),
    BoundConfig(b=2.5, c=10.0, sigma=2.0, y_star=12.0, n_offline=1200, action_spread=1.5, name="noisy"),
    BoundConfig(b=0.9, c=-3.0, sigma=1.0, y_star=-2.55, n_offline=800, action_spread=3.0, name="wide-design"),
    BoundConfig(b=5.0, c=0.0, sigma=1.0, y_star=4.0, n_offline=150, action_spread=1.0, name="few-samples"),
    BoundConfig(b=-0.7, c=5.0, sigma=0.3, y_star=4.0, n_offline=600, action_spread=1.5, name="neg-gain"),
    BoundConfig(b=1.0, c=0.0, sigma=1.0, y_star=1.0, n_offline=2500, action_spread=1.0, name="unit"),
    BoundConfig(b=3.0, c=100.0, sigma=4.0, y_star=95.0, n_offline=500, action_spread=2.0, name="large-offset"),
    BoundConfig(b=-2.2, c=50.0, sigma=1.5, y_star=48.0, n_offline=250, action_spread=2.5, name="mixed"),
]


# ---------------------------------------------------------------------------
# Estimator-variance rate check
# ---------------------------------------------------------------------------


@dataclass
class RateReport:
    n_grid: list[int]
    variances: np.ndarray  # (len(n_grid), p)
    slopes: np.ndarray  # (p,)
    slope_se: np.ndarray  # (p,)
    bias_mean: np.ndarray  # (p,)
    bias_se: np.ndarray  # (p,)

    def bias_ci_covers_zero(self, n_se: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.bias_mean) <= n_se * self.bias_se))

    def to_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid),
            "variances": self.variances.tolist(),
            "slopes": self.slopes.tolist(),
            "slope_se": self.slope_se.tolist(),
            "bias_mean": self.bias_mean.tolist(),
            "bias_se": self.bias_se.tolist(),
        }


def theorem1_rate_check(
    n_grid,
    replications: int,
    seed: int,
    a: float = 91.7,
    b: float = -1.8,
    sigma: float = 1.0,
    periods: int = 80,
    action_spread: float = 1.0,
) -> RateReport:
    """Empirical var(theta_hat - theta) versus the number of sample paths N.

    Simulates N paths of ``periods`` samples from y = a + b*u + e with
    uniformly spread actions, fits (a, b) per replication, and regresses
    log variance on log N.  A slope of -1 is the expected 1/N decay.
    """
    rng = make_rng(seed, tag="theorem1")
    n_grid = [int(n) for n in n_grid]
    variances = np.empty((len(n_grid), 2))
    all_bias = []
    for i, n_paths in enumerate(n_grid):
        n = n_paths * periods
        u = (rng.random((replications, n)) - 0.5) * 2.0 * action_spread
        e = rng.standard_normal((replications, n)) * sigma
        y = a + b * u + e
        ubar = u.mean(axis=1, keepdims=True)
        ybar = y.mean(axis=1, keepdims=True)
        su = np.sum((u - ubar) ** 2, axis=1)
        b_hat = np.sum((u - ubar) * (y - ybar), axis=1) / su
        a_hat = ybar.ravel() - b_hat * ubar.ravel()
        est = np.column_stack([a_hat - a, b_hat - b])
        variances[i] = est.var(axis=0, ddof=1)
        all_bias.append(est)
    bias = np.vstack(all_bias)
    logn = np.log(np.asarray(n_grid, dtype=float))
    slopes = np.empty(2)
    slope_se = np.empty(2)
    for j in range(2):
        if np.all(variances[:, j] == 0.0):
            slopes[j] = 0.0
            slope_se[j] = 0.0
            continue
        logv = np.log(variances[:, j])
        A = np.column_stack([logn, np.ones_like(logn)])
        coef, res, _, _ = np.linalg.lstsq(A, logv, rcond=None)
        slopes[j] = coef[0]
        dof = max(len(n_grid) - 2, 1)
        s2 = (res[0] / dof) if res.size else 0.0
        slope_se[j] = float(np.sqrt(s2 * np.linalg.inv(A.T @ A)[0, 0]))
    return RateReport(
        n_grid=n_grid,
        variances=variances,
        slopes=slopes,
        slope_se=slope_se,
        bias_mean=bias.mean(axis=0),
        bias_se=bias.std(axis=0, ddof=1) / np.sqrt(bias.shape[0]),
    )
