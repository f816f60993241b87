import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from r2rcontrol.errors import ConfigError, DimensionError, HorizonError
from r2rcontrol.processes import (
    ArimaProcess,
    ArimaProcessParams,
    GammaParams,
    GammaProcess,
    LinearCmpParams,
    LinearCmpProcess,
    QuadraticCmpParams,
    QuadraticCmpProcess,
    WienerParams,
    WienerProcess,
    arima_disturbance_stream,
    arima_output_variance,
    process_from_config,
    simulate_path,
)
from r2rcontrol.controllers import NullController, RandomActionController


CMP_A = [-138.21, -627.32]
CMP_B = [[5.018, -0.665, 16.34, 0.845], [13.67, 19.95, 27.52, 5.25]]
CMP_DELTA = [-17.0, -1.5]
CMP_LAMBDA = [[665.64, 0.0], [0.0, 5.29]]


def cmp_params(noise=True, T=30):
    lam = CMP_LAMBDA if noise else np.zeros((2, 2))
    return LinearCmpParams(A=CMP_A, B=CMP_B, delta=CMP_DELTA, Lambda=lam, T=T)


def test_linear_cmp_noiseless_first_step():
    model = LinearCmpProcess(cmp_params(noise=False))
    model.reset(seed=1)
    y = model.step(np.zeros(4), 1)
    assert np.allclose(y, [-155.21, -628.82], atol=1e-12)


def test_linear_cmp_mean_is_affine_in_action():
    model = LinearCmpProcess(cmp_params(noise=False))
    model.reset(seed=0)
    u = np.array([1.0, -2.0, 0.5, 3.0])
    y = model.step(u, 1)
    expected = np.asarray(CMP_A) + np.asarray(CMP_B) @ u + np.asarray(CMP_DELTA)
    assert np.allclose(y, expected)


def test_step_redraw_is_repeatable_and_commit_advances():
    model = LinearCmpProcess(cmp_params())
    model.reset(seed=7)
    u = np.zeros(4)
    y1 = model.step(u, 1)
    y2 = model.step(u, 1)  # re-draw from the same committed state
    assert y1.shape == y2.shape
    model.commit()
    assert model.period == 1
    y3 = model.step(u, 2)
    assert y3.shape == (2,)


def test_step_validates_dimension_and_period():
    model = LinearCmpProcess(cmp_params())
    model.reset(seed=3)
    with pytest.raises(DimensionError):
        model.step(np.zeros(3), 1)
    with pytest.raises(HorizonError):
        model.step(np.zeros(4), 2)  # must be period 1 first
    with pytest.raises(HorizonError):
        model.step(np.zeros(4), 0)
    model.step(np.zeros(4), 1)
    model.commit()
    with pytest.raises(HorizonError):
        model.commit()  # nothing pending


def test_same_seed_same_path():
    model = LinearCmpProcess(cmp_params())
    p1 = simulate_path(model, NullController(), seed=99)
    p2 = simulate_path(model, NullController(), seed=99)
    assert np.array_equal(p1.y, p2.y)
    p3 = simulate_path(model, NullController(), seed=100)
    assert not np.array_equal(p1.y, p3.y)


def test_sample_path_shapes_and_horizon():
    model = LinearCmpProcess(cmp_params(T=5))
    path = simulate_path(model, NullController(), seed=1)
    assert path.u.shape == (5, 4)
    assert path.y.shape == (5, 2)
    assert path.horizon == 5


def test_param_validation():
    with pytest.raises(DimensionError):
        LinearCmpParams(A=[0.0], B=CMP_B, delta=CMP_DELTA, Lambda=CMP_LAMBDA)
    with pytest.raises(DimensionError):
        LinearCmpParams(A=CMP_A, B=CMP_B, delta=CMP_DELTA, Lambda=np.eye(3))
    with pytest.raises(ConfigError):
        LinearCmpParams(A=CMP_A, B=CMP_B, delta=CMP_DELTA, Lambda=CMP_LAMBDA, T=0)
    with pytest.raises(ConfigError):
        WienerParams(y0=90.0, v=0.5, sigma=0.0)
    with pytest.raises(ConfigError):
        GammaParams(alpha=0.0, beta=1.0)


# --- ARIMA ------------------------------------------------------------------


def arima_params(**kw):
    base = dict(a=91.7, b=-1.8, phi=0.6, theta=0.5, sigma=1.0, T=80)
    base.update(kw)
    return ArimaProcessParams(**base)


def test_arima_disturbance_stream_matches_recursion():
    p = arima_params(T=10)
    d = arima_disturbance_stream(p, seed=5)
    assert d.shape == (10,)
    # differences follow the stationary ARMA recursion: increments shrink
    # toward the innovation scale, so everything must stay finite and real
    assert np.all(np.isfinite(d))


def test_arima_variance_reduces_to_random_walk_when_phi_equals_theta():
    p = arima_params(phi=0.4, theta=0.4, sigma=1.3)
    for t in (1, 7, 40):
        assert arima_output_variance(p, t) == pytest.approx(t * 1.3**2, rel=1e-12)


def test_arima_variance_exact_exceeds_independent_increment_form():
    p = arima_params()
    for t in (5, 20, 80):
        exact = arima_output_variance(p, t, form="exact")
        indep = arima_output_variance(p, t, form="independent_increments")
        assert exact > indep


def test_arima_variance_monte_carlo_small():
    p = arima_params(T=20)
    n = 20000
    d20 = np.array([arima_disturbance_stream(p, seed=i)[-1] for i in range(n)])
    v_emp = d20.var(ddof=1)
    v_exact = arima_output_variance(p, 20)
    se = v_emp * np.sqrt(2.0 / (n - 1))
    assert abs(v_emp - v_exact) < 4 * se


def test_arima_process_mean_structure():
    p = arima_params(sigma=1e-12, T=4)
    model = ArimaProcess(p)
    model.reset(seed=0)
    y = model.step(np.array([2.0]), 1)
    # without noise the first-period output is a + b*u
    assert y[0] == pytest.approx(91.7 - 1.8 * 2.0, abs=1e-6)


# --- quadratic CMP ----------------------------------------------------------


QUAD_C1 = [2756.5, 547.6, 616.3, -126.7, -1109.5, -286.1, 989.1, -52.9, -156.9, -550.3]
QUAD_C2 = [746.3, 62.3, 128.6, -152.1, -289.7, -32.1, 237.7, -28.9, -122.1, -140.6]


def quad_params(noise=True):
    n1, n2 = (60.0, 30.0) if noise else (1e-300, 1e-300)
    return QuadraticCmpParams(
        coeffs1=QUAD_C1, coeffs2=QUAD_C2, drift1=-10.0, drift2=1.5,
        noise1=n1, noise2=n2, T=30,
    )


def test_quad_features_layout():
    u = np.array([2.0, 3.0, 5.0])
    f = QuadraticCmpProcess.quad_features(u)
    assert np.allclose(f, [1, 2, 3, 5, 4, 9, 25, 6, 10, 15])


def test_quadratic_mean_response_matches_polynomial():
    model = QuadraticCmpProcess(quad_params())
    u = np.array([0.3, -0.7, 1.1])
    t = 4
    f = QuadraticCmpProcess.quad_features(u)
    expect = np.array([f @ np.asarray(QUAD_C1) - 10.0 * t, f @ np.asarray(QUAD_C2) + 1.5 * t])
    assert np.allclose(model.mean_response(u, t), expect)


# --- Wiener and gamma -------------------------------------------------------


def test_wiener_increment_moments():
    p = WienerParams(y0=90.0, v=0.66, sigma=1.0, T=1)
    model = WienerProcess(p)
    draws = []
    for seed in range(4000):
        model.reset(seed)
        draws.append(model.step(np.zeros(1), 1)[0] - 90.0)
    draws = np.array(draws)
    assert draws.mean() == pytest.approx(0.66, abs=0.06)
    assert draws.var(ddof=1) == pytest.approx(1.0, rel=0.12)


def test_gamma_rate_vs_scale_interpretation():
    rate = GammaParams(alpha=0.36, beta=0.64, beta_is_rate=True)
    scale = GammaParams(alpha=0.36, beta=0.64, beta_is_rate=False)
    assert rate.mean_increment == pytest.approx(0.36 / 0.64)
    assert scale.mean_increment == pytest.approx(0.36 * 0.64)
    assert rate.scale == pytest.approx(1.0 / 0.64)


def test_gamma_increments_nonnegative_without_control():
    model = GammaProcess(GammaParams(alpha=0.36, beta=0.64, y0=90.0, T=40))
    path = simulate_path(model, NullController(), seed=11)
    inc = np.diff(np.concatenate([[90.0], path.y[:, 0]]))
    assert np.all(inc >= 0.0)


def test_control_shifts_wiener_output_additively():
    p = WienerParams(y0=90.0, v=0.66, sigma=1.0, T=1, control_gain=-1.0)
    m1, m2 = WienerProcess(p), WienerProcess(p)
    m1.reset(seed=21)
    m2.reset(seed=21)
    y_zero = m1.step(np.zeros(1), 1)[0]
    y_ctl = m2.step(np.array([2.5]), 1)[0]
    assert y_ctl == pytest.approx(y_zero - 2.5, abs=1e-9)


# --- config plumbing --------------------------------------------------------


def test_process_from_config_families():
    cfgs = {
        "linear_cmp": dict(family="linear_cmp", A=CMP_A, B=CMP_B, delta=CMP_DELTA,
                           Lambda=CMP_LAMBDA, T=30),
        "arima": dict(family="arima", a=91.7, b=-1.8, phi=0.6, theta=0.5, sigma=1.0, T=80),
        "wiener": dict(family="wiener", y0=90.0, v=0.66, sigma=1.0, T=80),
        "gamma": dict(family="gamma", alpha=0.36, beta=0.64, y0=90.0, T=80),
    }
    for family, cfg in cfgs.items():
        model = process_from_config(cfg)
        assert model.family == family


def test_process_from_config_unknown_family():
    with pytest.raises(ConfigError):
        process_from_config({"family": "brownian-bridge"})


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31), spread=st.floats(0.1, 3.0))
def test_random_policy_paths_are_finite_and_reproducible(seed, spread):
    model = WienerProcess(WienerParams(y0=90.0, v=0.66, sigma=1.0, T=12))
    policy = RandomActionController(spread)
    p1 = simulate_path(model, policy, seed)
    p2 = simulate_path(model, policy, seed)
    assert np.array_equal(p1.y, p2.y)
    assert np.array_equal(p1.u, p2.u)
    assert np.all(np.isfinite(p1.y))
