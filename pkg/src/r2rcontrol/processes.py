"""Seeded stochastic simulators for the five process families.

Each simulator is a single-threaded state machine over integer periods
t = 1..T.  ``step(u, t)`` draws the period-t output from the committed
state at t-1 without advancing; ``commit()`` promotes the most recent
draw to the committed state.  Controllers that iterate several trial
actions within one period call ``step`` repeatedly and ``commit`` once.

Families:

* ``LinearCmpProcess``   -- y_t = A + B u_t + delta*t + w_t (CMP, 2 outputs, 4 actions)
* ``ArimaProcess``       -- scalar y_t = a + b u_t + d_t with ARIMA(1,1,1) disturbance
* ``QuadraticCmpProcess``-- two full-quadratic responses in 3 actions plus linear drift
* ``WienerProcess``      -- drift + diffusion random walk, additive control channel
* ``GammaProcess``       -- non-negative gamma increments, additive control channel
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, HorizonError
from .rng import make_rng

DEFAULT_CONTROL_GAIN = -1.0


@dataclass
class SamplePath:
    """One complete T-period trajectory of actions, outputs, disturbances."""

    u: np.ndarray  # (T, m_u)
    y: np.ndarray  # (T, m_y)
    d: np.ndarray | None  # (T,) or None when the family has no scalar disturbance
    y0: np.ndarray  # (m_y,)
    seed: int

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.u.shape[0] != self.y.shape[0]:
            raise DimensionError("action and output records must cover the same periods")
        self.y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))

    @property
    def horizon(self) -> int:
        return self.y.shape[0]


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


def _check_psd(mat: np.ndarray, name: str) -> None:
    if not np.allclose(mat, mat.T):
        raise ConfigError(f"{name} must be symmetric")
    eigvals = np.linalg.eigvalsh(mat)
    if eigvals.min() < -1e-10 * max(1.0, abs(eigvals).max()):
        raise ConfigError(f"{name} must be positive semidefinite")


@dataclass
class LinearCmpParams:
    A: np.ndarray
    B: np.ndarray
    delta: np.ndarray
    Lambda: np.ndarray
    T: int = 30

    def __post_init__(self):
        self.A = np.atleast_1d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        self.Lambda = np.atleast_2d(np.asarray(self.Lambda, dtype=float))
        m_y = self.A.shape[0]
        if self.B.shape[0] != m_y or self.delta.shape[0] != m_y:
            raise DimensionError("A, B, delta must share the output dimension")
        if self.Lambda.shape != (m_y, m_y):
            raise DimensionError("Lambda must be m_y x m_y")
        _check_psd(self.Lambda, "Lambda")
        if self.T < 1:
            raise ConfigError("horizon T must be >= 1")


@dataclass
class ArimaProcessParams:
    a: float
    b: float
    phi: float
    theta: float
    sigma: float
    T: int = 80

    def __post_init__(self):
        if not (0.0 < self.phi < 1.0 and 0.0 < self.theta < 1.0):
            raise ConfigError("phi and theta must lie strictly inside (0, 1)")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.T < 1:
            raise ConfigError("horizon T must be >= 1")


@dataclass
class QuadraticCmpParams:
    coeffs1: np.ndarray  # intercept, 3 linear, 3 square, 3 cross
    coeffs2: np.ndarray
    drift1: float
    drift2: float
    noise1: float
    noise2: float
    T: int = 30

    def __post_init__(self):
        self.coeffs1 = np.asarray(self.coeffs1, dtype=float)
        self.coeffs2 = np.asarray(self.coeffs2, dtype=float)
        if self.coeffs1.shape != (10,) or self.coeffs2.shape != (10,):
            raise DimensionError("quadratic responses need 10 coefficients each")
        if self.noise1 <= 0 or self.noise2 <= 0:
            raise ConfigError("noise std devs must be positive")
        if self.T < 1:
            raise ConfigError("horizon T must be >= 1")


@dataclass
class WienerParams:
    y0: float
    v: float
    sigma: float
    T: int = 80
    control_gain: float = DEFAULT_CONTROL_GAIN

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.T < 1:
            raise ConfigError("horizon T must be >= 1")


@dataclass
class GammaParams:
    alpha: float
    beta: float
    y0: float = 90.0
    T: int = 80
    control_gain: float = DEFAULT_CONTROL_GAIN
    # The printed increment density uses beta as a rate (mean = alpha/beta).
    # Set False to reinterpret beta as a scale (mean = alpha*beta).
    beta_is_rate: bool = True

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha and beta must be positive")
        if self.T < 1:
            raise ConfigError("horizon T must be >= 1")

    @property
    def scale(self) -> float:
        return 1.0 / self.beta if self.beta_is_rate else self.beta

    @property
    def mean_increment(self) -> float:
        return self.alpha * self.scale


# ---------------------------------------------------------------------------
# Simulators
# ---------------------------------------------------------------------------


class ProcessModel:
    """Stateful simulator contract: draw y_t for a trial action, commit once."""

    control_dim: int
    output_dim: int
    family: str

    def __init__(self, horizon: int, y0: np.ndarray):
        self.T = int(horizon)
        self.y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        self._rng = make_rng(0, tag=self.family)
        self.seed = 0
        self.reset(0)

    def reset(self, seed: int) -> None:
        self.seed = int(seed)
        self._rng = make_rng(self.seed, tag=self.family)
        self.period = 0
        self.y_committed = self.y0.copy()
        self.u_committed = np.zeros(self.control_dim)
        self._pending = None
        self._reset_state()

    def _reset_state(self) -> None:  # family-specific disturbance state
        pass

    def _check_step(self, u: np.ndarray, t: int) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.control_dim,):
            raise DimensionError(
                f"action has length {u.shape[0]}, process expects {self.control_dim}"
            )
        if not np.all(np.isfinite(u)):
            raise DimensionError("action entries must be finite")
        if not 1 <= t <= self.T:
            raise HorizonError(f"period {t} outside horizon 1..{self.T}")
        if t != self.period + 1:
            raise HorizonError(
                f"next step must be period {self.period + 1}, got {t}"
            )
        return u

    def step(self, u, t: int) -> np.ndarray:
        """Draw y_t from the committed t-1 state; repeatable, does not advance."""
        u = self._check_step(u, t)
        y, state = self._draw(u, t)
        self._pending = (u, y, state)
        return y

    def commit(self) -> np.ndarray:
        """Promote the latest draw to the committed state, advancing one period."""
        if self._pending is None:
            raise HorizonError("no pending draw to commit")
        u, y, state = self._pending
        self.period += 1
        self.y_committed = y.copy()
        self.u_committed = u.copy()
        self._commit_state(state)
        self._pending = None
        return y

    # family-specific -------------------------------------------------------

    def _draw(self, u: np.ndarray, t: int):
        raise NotImplementedError

    def _commit_state(self, state) -> None:
        pass

    @property
    def last_disturbance(self) -> float | None:
        return None


class LinearCmpProcess(ProcessModel):
    """Linear CMP model: y_t = A + B u_t + delta*t + w_t."""

    family = "linear_cmp"

    def __init__(self, params: LinearCmpParams, y0=None):
        self.params = params
        self.output_dim = params.A.shape[0]
        self.control_dim = params.B.shape[1]
        # symmetric PSD factor so non-diagonal Lambda is accepted
        vals, vecs = np.linalg.eigh(params.Lambda)
        self._noise_factor = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))
        if y0 is None:
            y0 = params.A.copy()
        super().__init__(params.T, y0)

    def _draw(self, u, t):
        p = self.params
        w = self._noise_factor @ self._rng.standard_normal(self.output_dim)
        y = p.A + p.B @ u + p.delta * t + w
        return y, None


class ArimaProcess(ProcessModel):
    """Scalar linear process with ARIMA(1,1,1) disturbance.

    d_t = d_{t-1} + dd_t,  dd_t = phi*dd_{t-1} + w_t - theta*w_{t-1},
    with d_0 = dd_0 = w_0 = 0 and y_t = a + b u_t + d_t.
    """

    family = "arima"
    control_dim = 1
    output_dim = 1

    def __init__(self, params: ArimaProcessParams, y0=None):
        self.params = params
        if y0 is None:
            y0 = np.array([params.a])
        super().__init__(params.T, y0)

    def _reset_state(self):
        self._d = 0.0
        self._dd = 0.0
        self._w = 0.0

    def _draw(self, u, t):
        p = self.params
        w = self._rng.normal(0.0, p.sigma)
        dd = p.phi * self._dd + w - p.theta * self._w
        d = self._d + dd
        y = np.array([p.a + p.b * u[0] + d])
        return y, (d, dd, w)

    def _commit_state(self, state):
        self._d, self._dd, self._w = state

    @property
    def last_disturbance(self):
        return self._d


class QuadraticCmpProcess(ProcessModel):
    """Two quadratic responses in three control variables with linear drift."""

    family = "quadratic_cmp"
    control_dim = 3
    output_dim = 2

    def __init__(self, params: QuadraticCmpParams, y0=None):
        self.params = params
        if y0 is None:
            y0 = np.array([params.coeffs1[0], params.coeffs2[0]])
        super().__init__(params.T, y0)

    @staticmethod
    def quad_features(u: np.ndarray) -> np.ndarray:
        """[1, u1, u2, u3, u1^2, u2^2, u3^2, u1 u2, u1 u3, u2 u3]"""
        u1, u2, u3 = u
        return np.array(
            [1.0, u1, u2, u3, u1 * u1, u2 * u2, u3 * u3, u1 * u2, u1 * u3, u2 * u3]
        )

    def mean_response(self, u: np.ndarray, t: int) -> np.ndarray:
        f = self.quad_features(np.asarray(u, dtype=float))
        p = self.params
        return np.array(
            [f @ p.coeffs1 + p.drift1 * t, f @ p.coeffs2 + p.drift2 * t]
        )

    def _draw(self, u, t):
        p = self.params
        eps = self._rng.standard_normal(2) * np.array([p.noise1, p.noise2])
        return self.mean_response(u, t) + eps, None


class WienerProcess(ProcessModel):
    """Random drift process y_t = y_0 + v t + sigma B(t).

    Control shifts the observed increment additively:
    y_t = y_{t-1} + v + sigma*(B(t)-B(t-1)) + control_gain*(u_t - u_{t-1}).
    """

    family = "wiener"
    control_dim = 1
    output_dim = 1

    def __init__(self, params: WienerParams, y0=None):
        self.params = params
        if y0 is None:
            y0 = np.array([params.y0])
        super().__init__(params.T, y0)

    def _draw(self, u, t):
        p = self.params
        inc = p.v + p.sigma * self._rng.standard_normal()
        y = self.y_committed + inc + p.control_gain * (u - self.u_committed)
        return y, None


class GammaProcess(ProcessModel):
    """Monotone degradation with gamma-distributed increments.

    Uncontrolled increments are Gamma(alpha, scale); control shifts the
    observed output by control_gain*(u_t - u_{t-1}) per period.
    """

    family = "gamma"
    control_dim = 1
    output_dim = 1

    def __init__(self, params: GammaParams, y0=None):
        self.params = params
        if y0 is None:
            y0 = np.array([params.y0])
        super().__init__(params.T, y0)

    def _draw(self, u, t):
        p = self.params
        inc = self._rng.gamma(p.alpha, p.scale)
        y = self.y_committed + inc + p.control_gain * (u - self.u_committed)
        return y, None


# ---------------------------------------------------------------------------
# Path generation and disturbance utilities
# ---------------------------------------------------------------------------


def simulate_path(model: ProcessModel, policy, seed: int) -> SamplePath:
    """Run one full T-period trajectory under ``policy``.

    Identical (model, policy, seed) triples produce bit-identical paths.
    Controllers that manage their own within-period iterations expose
    ``run_path``; everything else follows the observe/act loop.
    """
    model.reset(seed)
    if hasattr(policy, "run_path"):
        return policy.run_path(model, seed)
    policy.reset(model)
    us, ys, ds = [], [], []
    y_prev = model.y0.copy()
    for t in range(1, model.T + 1):
        u = np.atleast_1d(np.asarray(policy.next_action(y_prev, t), dtype=float))
        y = model.step(u, t)
        model.commit()
        policy.observe(t, u, y)
        us.append(u)
        ys.append(y)
        ds.append(model.last_disturbance)
        y_prev = y
    d = None if ds[0] is None else np.asarray(ds, dtype=float)
    return SamplePath(u=np.array(us), y=np.array(ys), d=d, y0=model.y0, seed=seed)


def arima_disturbance_stream(params: ArimaProcessParams, seed: int) -> np.ndarray:
    """ARIMA(1,1,1) disturbance path d_1..d_T with zero initial conditions."""
    rng = make_rng(seed, tag="arima-disturbance")
    w = rng.normal(0.0, params.sigma, size=params.T)
    d = np.empty(params.T)
    dd_prev = 0.0
    w_prev = 0.0
    d_prev = 0.0
    for t in range(params.T):
        dd = params.phi * dd_prev + w[t] - params.theta * w_prev
        d[t] = d_prev + dd
        dd_prev, w_prev, d_prev = dd, w[t], d[t]
    return d


def arima_output_variance(
    params: ArimaProcessParams, t: int, form: str = "exact"
) -> float:
    """Closed-form var(y_t) of the uncontrolled ARIMA(1,1,1) output.

    ``form="exact"`` sums the squared moving-average weights of d_t:
        var = sigma^2 * sum_{k=0}^{t-1} (1 + (phi-theta)(1-phi^k)/(1-phi))^2,
    which reduces to t*sigma^2 when phi = theta (random walk).

    ``form="independent_increments"`` is the Brownian-motion-style
    approximation that sums per-increment variances only:
        var = sigma^2 * (sum_{i=1}^{t-1} (t-i) (phi^{i-1}(phi-theta))^2 + t).
    It drops the positive cross-covariances between increments and
    understates the exact variance whenever phi != theta.
    """
    phi, theta, sigma = params.phi, params.theta, params.sigma
    if form == "exact":
        k = np.arange(t)
        coef = 1.0 + (phi - theta) * (1.0 - phi**k) / (1.0 - phi)
        return float(sigma**2 * np.sum(coef**2))
    if form == "independent_increments":
        i = np.arange(1, t)
        s = np.sum((t - i) * (phi ** (i - 1) * (phi - theta)) ** 2)
        return float(sigma**2 * (s + t))
    raise ConfigError(f"unknown variance form {form!r}")


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

_PARAM_CLASSES = {
    "linear_cmp": (LinearCmpParams, LinearCmpProcess),
    "arima": (ArimaProcessParams, ArimaProcess),
    "quadratic_cmp": (QuadraticCmpParams, QuadraticCmpProcess),
    "wiener": (WienerParams, WienerProcess),
    "gamma": (GammaParams, GammaProcess),
}


def process_from_config(cfg: dict) -> ProcessModel:
    """Build a simulator from a config mapping with a ``family`` key."""
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    if family not in _PARAM_CLASSES:
        raise ConfigError(f"unknown process family {family!r}")
    y0 = cfg.pop("y0_vector", None)
    param_cls, model_cls = _PARAM_CLASSES[family]
    try:
        params = param_cls(**cfg)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {family}: {exc}") from exc
    return model_cls(params, y0=y0)
