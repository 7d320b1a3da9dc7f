import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from qlan._linalg import to_dense, unvec, vec
from qlan.errors import DegenerateMean, StepTooLarge, ValidationError
from qlan.fisher import homodyne_coefficients
from qlan.model import SIGMA_MINUS, custom_model, evaluate, two_level_model
from qlan.superop import lindblad_schrodinger
from qlan.trajectories import (TrajectoryConfig, empirical_lan_check, normality_stat,
                               plug_in_estimator, simulate_counting, simulate_homodyne)

EXCITED = np.diag([1.0, 0.0]).astype(complex)
GROUND = np.diag([0.0, 1.0]).astype(complex)


@pytest.fixture(scope="module")
def point():
    return evaluate(two_level_model(1), 2.0)


def jump(t, n, seed=1, dt=0.005, **kw):
    return TrajectoryConfig(t_final=t, dt=dt, seed=seed, n_traj=n, scheme="jump", **kw)


def diffusive(t, n, seed=1, dt=0.005, **kw):
    return TrajectoryConfig(t_final=t, dt=dt, seed=seed, n_traj=n, scheme="diffusive", **kw)


def test_dark_channel_never_clicks():
    m = custom_model(np.zeros((2, 2)), [SIGMA_MINUS + 0.5 * SIGMA_MINUS.T, np.zeros((2, 2))])
    recs = simulate_counting(evaluate(m, 0.0), jump(5.0, 50, channel=1, rho0=EXCITED))
    assert all(r.n_counts == 0 for r in recs)


def test_vacuum_homodyne_is_white_noise():
    m = custom_model(np.zeros((2, 2)), [SIGMA_MINUS])
    t, n = 4.0, 2000
    recs = simulate_homodyne(evaluate(m, 0.0), diffusive(t, n, rho0=GROUND, centering=0.0))
    z = np.array([r.raw for r in recs])
    assert abs(z.mean()) < 4 * np.sqrt(t / n)
    assert z.var(ddof=1) == pytest.approx(t, abs=4 * t * np.sqrt(2 / n))


def test_mean_count_rate(point):
    t, n = 20.0, 500
    counts = np.array([r.n_counts for r in simulate_counting(point, jump(t, n))]) / t
    assert abs(counts.mean() - 1.0) < 3 * counts.std(ddof=1) / np.sqrt(n)


def test_mean_current(point):
    t, n = 20.0, 500
    cur = np.array([r.raw for r in simulate_homodyne(point, diffusive(t, n))]) / t
    assert abs(cur.mean() - 2 / 3) < 3 * cur.std(ddof=1) / np.sqrt(n)


@pytest.mark.parametrize("scheme", ["jump", "diffusive"])
def test_average_conditional_state_follows_semigroup(point, scheme):
    n, t = 1000, 1.0
    cfg = TrajectoryConfig(t_final=t, dt=0.005, seed=3, n_traj=n, scheme=scheme, rho0=EXCITED)
    sim = simulate_counting if scheme == "jump" else simulate_homodyne
    avg = np.mean([r.final_state for r in sim(point, cfg)], axis=0)
    G = to_dense(lindblad_schrodinger(point).matrix)
    exact = unvec(sla.expm(t * G) @ vec(EXCITED), 2)
    assert np.max(np.abs(avg - exact)) < 4 / np.sqrt(n)


def test_records_depend_only_on_seed_and_index(point):
    a = simulate_homodyne(point, diffusive(2.0, 300, seed=7))
    b = simulate_homodyne(point, diffusive(2.0, 600, seed=7), n_jobs=2)
    assert [r.raw for r in a] == [r.raw for r in b[:300]]
    c = simulate_homodyne(point, diffusive(2.0, 300, seed=8))
    assert [r.raw for r in a] != [r.raw for r in c]


def test_step_halving_is_consistent(point):
    t, n = 10.0, 1000
    a = np.array([r.n_counts for r in simulate_counting(point, jump(t, n, seed=1, dt=0.01 / 2))])
    b = np.array([r.n_counts for r in simulate_counting(point, jump(t, n, seed=2, dt=0.005 / 2))])
    se = np.sqrt((a.var() + b.var()) / n)
    assert abs(a.mean() - b.mean()) < 4 * se


def test_step_bound(point):
    with pytest.raises(StepTooLarge):
        simulate_counting(point, jump(1.0, 10, dt=0.05))


def test_config_validation():
    with pytest.raises(ValidationError):
        TrajectoryConfig(t_final=-1.0, dt=0.01, seed=0, n_traj=1)
    with pytest.raises(ValidationError):
        TrajectoryConfig(t_final=1.0, dt=2.0, seed=0, n_traj=1)
    with pytest.raises(ValidationError):
        TrajectoryConfig(t_final=1.0, dt=0.1, seed=0, n_traj=0)
    with pytest.raises(ValidationError):
        TrajectoryConfig(t_final=1.0, dt=0.1, seed=0, n_traj=1, scheme="heterodyne")


def test_channel_out_of_range(point):
    with pytest.raises(ValidationError):
        simulate_counting(point, jump(1.0, 1, channel=2))


def test_zero_mean_refuses_estimator(point):
    recs = simulate_counting(point, jump(1.0, 5))
    with pytest.raises(DegenerateMean):
        plug_in_estimator(recs, 0.0, 2.0, 1.0)


def test_plug_in_estimator_unbiased_at_reference(point):
    t, n = 20.0, 1000
    h = homodyne_coefficients(two_level_model(1), 2.0, 0.0, 0)
    recs = simulate_homodyne(point, diffusive(t, n, seed=11, centering=h.drift))
    est = plug_in_estimator(recs, h.mu_h, 2.0, t)
    se = est["theta_hats"].std(ddof=1) / np.sqrt(n)
    assert abs(est["bias"]) < 4 * se
    check = empirical_lan_check(recs, h.mu_h, h.V_h, 0.0, t)
    assert abs(check["mean_z"]) < 4 * check["mean_z_se"]
    with pytest.raises(ValidationError):
        empirical_lan_check(recs[:100], h.mu_h, h.V_h, 0.0, t)


def test_count_statistics_become_gaussian(point):
    stats = []
    for t in (1.0, 4.0, 32.0):
        recs = simulate_counting(point, jump(t, 1000, seed=5))
        stats.append(normality_stat(np.array([r.y_centered for r in recs]) / np.sqrt(t)))
    assert stats[0] > stats[1] > stats[2]


@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_normality_stat_small_for_gaussian_sample(m, s):
    z = np.random.default_rng(0).normal(m, s, 4000)
    assert normality_stat(z) < 0.06
