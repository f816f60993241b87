"""Run-to-run control policies behind one stateful contract.

Five controllers: EWMA and GHR benchmarks, the model-based RL controller
(alternating refit / action optimization with learning across paths),
the optimize-after-parameter-estimation baseline, and the policy
gradient search controller driven by a fitted output distribution.

One-shot policies implement ``next_action``/``observe`` and are driven
by :func:`r2rcontrol.processes.simulate_path`; controllers that iterate
several trial actions inside a period implement ``run_path`` and talk
to the simulator directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConfigError, PeriodAbortError
from .estimation import LinearModelFit, PgsDistributionParams, fit_pgs_params
from .processes import ProcessModel, QuadraticCmpProcess, SamplePath, simulate_path
from .rng import make_rng

log = logging.getLogger(__name__)


@dataclass
class ControllerConfig:
    """Hyperparameters shared across the controller families."""

    y_star: np.ndarray | float = 0.0
    epsilon: float = 1.0  # parameter-convergence threshold
    eta: float = 1.0  # action-convergence threshold
    alpha_step: float = 0.05  # policy-gradient step size
    max_inner_iters: int = 20
    lambda_ewma: float = 0.3
    ghr_c: float = 20.0
    ghr_s: float = 19.0
    u_init: np.ndarray | None = None
    action_low: float = -1e6
    action_high: float = 1e6
    guard_bound: float = 1e6
    model_family: str = "linear"  # approximate family for the RL controller
    variance_form: str = "time_linear"
    explore_scale: float = 1.0  # dither while the pooled design is uninformative
    explore_min_samples: int = 0  # 0 -> 3 * n_features
    n_offline_paths: int = 100
    offline_action_spread: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0 or self.eta <= 0 or self.alpha_step <= 0:
            raise ConfigError("convergence thresholds and step size must be positive")
        if self.max_inner_iters < 1:
            raise ConfigError("max_inner_iters must be >= 1")
        if not 0.0 <= self.lambda_ewma <= 1.0:
            raise ConfigError("lambda_ewma must lie in [0, 1]")
        self.y_star = np.atleast_1d(np.asarray(self.y_star, dtype=float))


class Controller:
    """Observe the latest output, emit the next action."""

    def reset(self, model: ProcessModel) -> None:
        pass

    def next_action(self, y_prev: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError

    def observe(self, t: int, u: np.ndarray, y: np.ndarray) -> None:
        pass


class NullController(Controller):
    """u = 0 every period (the no-control baseline)."""

    def reset(self, model):
        self._u = np.zeros(model.control_dim)

    def next_action(self, y_prev, t):
        return self._u


class LinearOracleController(Controller):
    """Exact compensation for a known linear model: solve B u = y* - A - delta*t."""

    def __init__(self, A, B, delta, y_star):
        self.A = np.atleast_1d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.delta = np.atleast_1d(np.asarray(delta, dtype=float))
        self.y_star = np.atleast_1d(np.asarray(y_star, dtype=float))

    def next_action(self, y_prev, t):
        rhs = self.y_star - self.A - self.delta * t
        u, *_ = np.linalg.lstsq(self.B, rhs, rcond=None)
        return u


class RandomActionController(Controller):
    """Seeded random exploration actions; used to generate offline datasets."""

    def __init__(self, spread: float = 1.0, tag: str = "random-action"):
        self.spread = float(spread)
        self.tag = tag

    def reset(self, model):
        self._rng = make_rng(model.seed, tag=self.tag)
        self._dim = model.control_dim

    def next_action(self, y_prev, t):
        return self._rng.normal(0.0, self.spread, size=self._dim)


class EwmaController(Controller):
    """Single-EWMA intercept filter with known gain matrix.

    a_hat_t = lambda*(y_t - B u_t) + (1 - lambda)*a_hat_{t-1};
    the next action is the minimum-norm solution of B u = y* - a_hat.
    """

    def __init__(self, B, y_star, lambda_ewma: float = 0.3, a_init=None):
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        if np.linalg.matrix_rank(self.B) < self.B.shape[0]:
            raise ConfigError("gain matrix has no right inverse")
        self.y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
        self.lam = float(lambda_ewma)
        self.a_init = None if a_init is None else np.atleast_1d(np.asarray(a_init, dtype=float))
        self._pinv = np.linalg.pinv(self.B)

    def reset(self, model):
        if self.a_init is not None:
            self.a_hat = self.a_init.copy()
        else:
            self.a_hat = np.zeros(model.output_dim)

    def next_action(self, y_prev, t):
        return self._pinv @ (self.y_star - self.a_hat)

    def observe(self, t, u, y):
        self.a_hat = self.lam * (y - self.B @ u) + (1.0 - self.lam) * self.a_hat


class GhrController(Controller):
    """Harmonic-discount EWMA variant for scalar processes.

    The discount weight at period t is lambda_t = c/(t + s); c = 0 gives a
    dead-reckoned controller and s -> infinity recovers the frozen filter.
    """

    def __init__(self, b: float, y_star: float, c: float = 20.0, s: float = 19.0, a_init: float = 0.0):
        if b == 0.0:
            raise ConfigError("process gain b must be nonzero")
        self.b = float(b)
        self.y_star = float(np.atleast_1d(y_star)[0])
        self.c = float(c)
        self.s = float(s)
        self.a_init = float(a_init)

    def reset(self, model):
        self.a_hat = self.a_init

    def next_action(self, y_prev, t):
        return np.array([(self.y_star - self.a_hat) / self.b])

    def observe(self, t, u, y):
        lam = self.c / (t + self.s)
        lam = min(max(lam, 0.0), 1.0)
        self.a_hat = lam * (float(y[0]) - self.b * float(u[0])) + (1.0 - lam) * self.a_hat


# ---------------------------------------------------------------------------
# Model-based RL controller (learning by doing)
# ---------------------------------------------------------------------------


class _PooledFit:
    """Incremental Gram accumulator for pooled least squares."""

    def __init__(self, n_features: int, n_outputs: int):
        self.gram = np.zeros((n_features, n_features))
        self.xty = np.zeros((n_features, n_outputs))
        self.n = 0

    def add(self, x: np.ndarray, y: np.ndarray) -> None:
        self.gram += np.outer(x, x)
        self.xty += np.outer(x, y)
        self.n += 1

    def solve(self) -> tuple[np.ndarray, bool]:
        gram = self.gram
        p = gram.shape[0]
        ridged = False
        try:
            theta = np.linalg.solve(gram, self.xty)
            if not np.all(np.isfinite(theta)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            ridged = True
            lam = 1e-8 * max(np.trace(gram), 1.0) / p
            theta = np.linalg.solve(gram + lam * np.eye(p), self.xty)
        # near-singular pooled designs behave like rank-deficient ones
        if not ridged and np.linalg.cond(gram) > 1e12:
            ridged = True
        return theta, ridged


def _quad_objective(theta: np.ndarray, y_star: np.ndarray, t: int):
    """Squared target miss of the fitted quadratic family and its gradient."""

    def fun(u):
        f = QuadraticCmpProcess.quad_features(u)
        x = np.concatenate([f, [float(t)]])
        pred = x @ theta
        r = pred - y_star
        # gradient of features wrt u
        u1, u2, u3 = u
        jac_f = np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [2 * u1, 0.0, 0.0],
                [0.0, 2 * u2, 0.0],
                [0.0, 0.0, 2 * u3],
                [u2, u1, 0.0],
                [u3, 0.0, u1],
                [0.0, u3, u2],
            ]
        )
        jac_pred = jac_f.T @ theta[:-1]  # (3, m_y)
        return float(r @ r), 2.0 * jac_pred @ r

    return fun


_QUAD_STENCIL = np.array(
    [
        [0.0, 0.0, 0.0],
        [0.5, 0.5, 0.5],
        [-0.5, -0.5, -0.5],
        [1.0, -1.0, 0.0],
        [-1.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
)


def rl_alg1_action_optimize(
    theta: np.ndarray,
    y_star: np.ndarray,
    t: int,
    model_family: str,
    bounds: tuple[float, float],
    warm_start: np.ndarray | None = None,
    control_dim: int | None = None,
) -> np.ndarray:
    """Minimize the fitted model's squared target miss over the action box.

    Linear family: closed-form minimum-norm solve; quadratic family:
    bounded L-BFGS from a warm start plus a fixed multistart stencil with
    first-found tie-breaking.
    """
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    lo, hi = bounds
    if model_family == "linear":
        # theta rows: intercept, control coefficients, drift slope
        theta2 = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta2.shape[0] == 1:
            theta2 = theta2.T
        m_u = theta2.shape[0] - 2
        A_hat = theta2[0]
        B_hat = theta2[1 : 1 + m_u].T
        delta_hat = theta2[-1]
        rhs = y_star - A_hat - delta_hat * t
        u, *_ = np.linalg.lstsq(B_hat, rhs, rcond=None)
        return np.clip(u, lo, hi)
    if model_family == "quadratic":
        fun = _quad_objective(theta, y_star, t)
        starts = []
        if warm_start is not None:
            starts.append(np.clip(np.asarray(warm_start, dtype=float), lo, hi))
        starts.extend(np.clip(_QUAD_STENCIL, lo, hi))
        best_u, best_val = None, np.inf
        box = [(lo, hi)] * 3
        for x0 in starts:
            res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=box)
            if res.fun < best_val - 1e-12:
                best_val = res.fun
                best_u = res.x
        return np.asarray(best_u)
    raise ConfigError(f"unknown model family {model_family!r}")


def _linear_features(u: np.ndarray, t: int) -> np.ndarray:
    return np.concatenate([[1.0], u, [float(t)]])


def _quadratic_features(u: np.ndarray, t: int) -> np.ndarray:
    return np.concatenate([QuadraticCmpProcess.quad_features(u), [float(t)]])


class RlAlg1Controller:
    """Model-based RL controller: alternate refit and action optimization.

    The pooled dataset persists across sample paths (the approximate
    families here are time-independent, with t entering as a regressor),
    so later paths start from an already-informed fit.  While the pooled
    design is still uninformative, trial actions are dithered around the
    warm start by a seeded exploration stream.
    """

    def __init__(self, config: ControllerConfig, control_dim: int, output_dim: int):
        self.config = config
        self.control_dim = control_dim
        self.output_dim = output_dim
        if config.model_family == "linear":
            self._features = _linear_features
            self.n_features = control_dim + 2
        elif config.model_family == "quadratic":
            if control_dim != 3:
                raise ConfigError("quadratic family expects 3 control variables")
            self._features = _quadratic_features
            self.n_features = 11
        else:
            raise ConfigError(f"unknown model family {config.model_family!r}")
        self.pool = _PooledFit(self.n_features, output_dim)
        self.theta = np.zeros((self.n_features, output_dim))
        self.paths_run = 0
        self.diagnostics: dict = {}
        min_explore = config.explore_min_samples or 3 * self.n_features
        self._min_explore = min_explore

    def _warm_start(self) -> np.ndarray:
        if self.config.u_init is not None:
            return np.atleast_1d(np.asarray(self.config.u_init, dtype=float))
        return np.zeros(self.control_dim)

    def _optimize(self, t: int, warm: np.ndarray) -> np.ndarray:
        return rl_alg1_action_optimize(
            self.theta,
            self.config.y_star,
            t,
            self.config.model_family,
            (self.config.action_low, self.config.action_high),
            warm_start=warm,
        )

    def run_path(self, model: ProcessModel, seed: int) -> SamplePath:
        cfg = self.config
        explore_rng = make_rng(seed, tag="alg1-explore")
        us, ys = [], []
        inner_counts = []
        converged_flags = []
        u_warm = self._warm_start()
        for t in range(1, model.T + 1):
            u_k = u_warm.copy()
            y = model.step(u_k, t)
            self.pool.add(self._features(u_k, t), y)
            converged = False
            for k in range(cfg.max_inner_iters):
                theta_prev = self.theta
                self.theta, ridged = self.pool.solve()
                if ridged or self.pool.n < self._min_explore:
                    u_next = u_k + explore_rng.normal(
                        0.0, cfg.explore_scale, size=self.control_dim
                    )
                    u_next = np.clip(u_next, cfg.action_low, cfg.action_high)
                else:
                    u_next = self._optimize(t, u_k)
                y = model.step(u_next, t)
                self.pool.add(self._features(u_next, t), y)
                theta_step = float(np.linalg.norm(self.theta - theta_prev))
                action_step = float(np.linalg.norm(u_next - u_k))
                u_k = u_next
                if theta_step < cfg.epsilon and action_step < cfg.eta:
                    converged = True
                    break
            if not converged:
                log.debug("period %d: inner loop hit max_inner_iters, using last iterate", t)
            model.commit()
            inner_counts.append(k + 1)
            converged_flags.append(converged)
            us.append(u_k)
            ys.append(y)
            u_warm = u_k
        self.paths_run += 1
        self.diagnostics = {
            "inner_iterations": inner_counts,
            "converged": converged_flags,
            "pooled_samples": self.pool.n,
            "paths_run": self.paths_run,
        }
        return SamplePath(u=np.array(us), y=np.array(ys), d=None, y0=model.y0, seed=seed)

    def fit_snapshot(self) -> LinearModelFit:
        theta, ridged = self.pool.solve()
        gram = self.pool.gram
        p = gram.shape[0]
        if ridged:
            gram = gram + 1e-8 * max(np.trace(gram), 1.0) / p * np.eye(p)
        return LinearModelFit(
            theta_hat=theta,
            residual_variance=0.0,
            gram_inv=np.linalg.inv(gram),
            n_samples=self.pool.n,
            ridged=ridged,
        )


class OapeController:
    """Optimize-after-parameter-estimation baseline.

    Fits the model family once from randomly-actioned offline paths, then
    controls every period with the frozen fit (no learning by doing).
    """

    def __init__(self, config: ControllerConfig, control_dim: int, output_dim: int):
        self.config = config
        self._rl = RlAlg1Controller(config, control_dim, output_dim)
        self.fitted = False

    def learn(self, model: ProcessModel, n_paths: int, seed: int) -> None:
        policy = RandomActionController(self.config.offline_action_spread, tag="oape-offline")
        for i in range(n_paths):
            path = simulate_path(model, policy, seed=make_rng(seed, replication=i, tag="oape-seed").integers(2**63))
            for t in range(1, path.horizon + 1):
                self._rl.pool.add(self._rl._features(path.u[t - 1], t), path.y[t - 1])
        self._rl.theta, self._ridged = self._rl.pool.solve()
        self.fitted = True

    def run_path(self, model: ProcessModel, seed: int) -> SamplePath:
        if not self.fitted:
            raise ConfigError("OAPE controller must learn before running")
        us, ys = [], []
        warm = None
        for t in range(1, model.T + 1):
            u = self._rl._optimize(t, warm if warm is not None else np.zeros(model.control_dim))
            y = model.step(u, t)
            model.commit()
            us.append(u)
            ys.append(y)
            warm = u
        return SamplePath(u=np.array(us), y=np.array(ys), d=None, y0=model.y0, seed=seed)


# ---------------------------------------------------------------------------
# Policy gradient search controller
# ---------------------------------------------------------------------------


class RlPgsController:
    """Online policy gradient search against a fitted output distribution.

    Per period the action is iterated by u <- u - alpha * C(y) * d/du log
    p(y; u), each step re-observing the process at the current action,
    until the action increment falls below eta.  Divergent iterates halve
    the step size; five failed halvings abort the period.
    """

    def __init__(self, config: ControllerConfig, params: PgsDistributionParams | None = None):
        self.config = config
        self.params = params
        self.offline_store: list[SamplePath] = []
        self.diagnostics: dict = {}

    def learn_offline(self, model: ProcessModel, n_paths: int, seed: int) -> None:
        """Populate the offline store with random-action paths and fit (beta, gamma)."""
        policy = RandomActionController(self.config.offline_action_spread, tag="pgs-offline")
        for i in range(n_paths):
            path_seed = int(make_rng(seed, replication=i, tag="pgs-seed").integers(2**63))
            self.offline_store.append(simulate_path(model, policy, path_seed))
        self.params = fit_pgs_params(self.offline_store, self.config.variance_form)

    def run_path(self, model: ProcessModel, seed: int) -> SamplePath:
        if self.params is None:
            raise ConfigError("PGS controller needs fitted distribution parameters")
        cfg = self.config
        y_star = float(cfg.y_star[0])
        us, ys = [], []
        inner_counts = []
        u_prev = 0.0
        y_prev = float(model.y0[0])
        u_warm = u_prev if cfg.u_init is None else float(np.atleast_1d(cfg.u_init)[0])
        for t in range(1, model.T + 1):
            alpha = cfg.alpha_step
            halvings = 0
            while True:  # restart the period from the warm start on divergence
                u_k = u_warm
                y = float(model.step(np.array([u_k]), t)[0])
                diverged = False
                for k in range(cfg.max_inner_iters):
                    cost = (y - y_star) ** 2
                    grad = cost * self.params.score_u(y, y_prev, u_k, u_prev, t)
                    u_next = u_k - alpha * grad
                    if abs(u_next) > cfg.guard_bound:
                        diverged = True
                        break
                    if abs(u_next - u_k) < cfg.eta:
                        break
                    u_k = u_next
                    y = float(model.step(np.array([u_k]), t)[0])
                if not diverged:
                    break
                halvings += 1
                if halvings > 5:
                    raise PeriodAbortError(
                        f"period {t}: iterates diverged after 5 step-size halvings"
                    )
                alpha /= 2.0
            model.commit()
            inner_counts.append(k + 1)
            us.append([u_k])
            ys.append([y])
            u_prev = u_k
            y_prev = y
            u_warm = u_k
        path = SamplePath(u=np.array(us), y=np.array(ys), d=None, y0=model.y0, seed=seed)
        self.offline_store.append(path)
        self.diagnostics = {"inner_iterations": inner_counts}
        return path


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def controller_from_config(cfg: dict, model: ProcessModel, y_star) -> Controller | RlAlg1Controller | OapeController | RlPgsController:
    """Build a controller from a config mapping with a ``kind`` key."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    known = {f for f in ControllerConfig.__dataclass_fields__}
    extra = {k: v for k, v in cfg.items() if k not in known}
    base = ControllerConfig(y_star=y_star, **{k: v for k, v in cfg.items() if k in known})
    if kind == "null":
        return NullController()
    if kind == "oracle":
        p = model.params
        return LinearOracleController(p.A, p.B, p.delta, y_star)
    if kind == "random":
        return RandomActionController(base.offline_action_spread)
    if kind == "ewma":
        p = model.params
        return EwmaController(p.B, y_star, base.lambda_ewma, a_init=extra.get("a_init", p.A))
    if kind == "ghr":
        p = model.params
        return GhrController(p.b, y_star, base.ghr_c, base.ghr_s, a_init=extra.get("a_init", p.a))
    if kind == "rl_alg1":
        return RlAlg1Controller(base, model.control_dim, model.output_dim)
    if kind == "oape":
        return OapeController(base, model.control_dim, model.output_dim)
    if kind == "rl_pgs":
        return RlPgsController(base)
    raise ConfigError(f"unknown controller kind {kind!r}")
