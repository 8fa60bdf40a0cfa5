import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radreact import trajectories
from radreact.errors import ExtrapolationError, HistoryTooShortError, SingularPointError
from radreact.geom import minkowski_dot
from radreact.worldline import ParticleProps, Worldline, retarded_batch, retarded_data, wavefront_chart

from conftest import massless_circle, random_timelike_velocity

UNIT = ParticleProps(1.0, 1.0)
PHOTONLIKE = ParticleProps(1.0, 0.0, massless=True)


def uniform_root(x0, u, y):
    """Closed-form causal root of (y - x0 - u tau)^2 = 0 for unit timelike u."""
    d = y - x0
    du = minkowski_dot(d, u)
    disc = np.sqrt(du**2 + minkowski_dot(d, d))
    tau = -du - disc
    return tau, disc


def test_straight_line_midpoints_reproduced():
    u0 = np.array([1.25, 0.75, 0.0, 0.0])
    tau = np.linspace(0, 9, 10)
    w = trajectories.uniform(UNIT, [0.6, 0, 0], tau)
    mids = 0.5 * (tau[1:] + tau[:-1])
    for m in mids:
        pt = w.interpolate(m)
        assert np.allclose(pt.z, u0 * m, rtol=0, atol=1e-14 * 10)
        assert np.allclose(pt.u, u0, atol=1e-14)


def test_knot_query_is_bitwise():
    tau = np.linspace(0, 3, 31)
    w = trajectories.circular(UNIT, 1.0, 0.5, tau)
    pt = w.interpolate(tau[7])
    assert np.array_equal(pt.z, w.z[7]) and np.array_equal(pt.u, w.u[7]) and np.array_equal(pt.a, w.a[7])


def test_circular_interpolation_is_sixth_order():
    radius, beta = 1.0, 0.5
    errors = []
    for h in (0.2, 0.1, 0.05):
        tau = np.arange(0.0, 6.0 + h / 2, h)
        w = trajectories.circular(UNIT, radius, beta, tau)
        probe = tau[:-1] + 0.37 * h
        z, _, _ = w.evaluate(probe)
        exact = trajectories.circular_kinematics(probe, radius, beta)[0]
        errors.append(np.max(np.abs(z - exact)))
    assert errors[0] / errors[1] >= 32
    assert errors[1] / errors[2] >= 32


def test_interpolated_normalisation_drift_small():
    tau = np.linspace(0, 10, 401)
    w = trajectories.circular(UNIT, 1.0, 0.5, tau)
    assert w.normalization_drift() < 1e-8


def test_out_of_range_query_raises():
    w = trajectories.uniform(UNIT, [0.1, 0, 0], np.linspace(0, 1, 5))
    with pytest.raises(ExtrapolationError):
        w.interpolate(1.5)


def test_append_requires_advancing_knots():
    w = Worldline(4, UNIT)
    w.append(0.0, [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0])
    with pytest.raises(ValueError):
        w.append(0.0, [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0])
    w.append(1.0, [1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0])
    w.freeze()
    with pytest.raises(RuntimeError):
        w.append(2.0, [2, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0])


def test_csv_round_trip_keeps_properties_and_chain():
    tau = np.linspace(0, 2, 11)
    w = trajectories.circular(ParticleProps(0.3, 2.0, mu=-1.0), 1.0, 0.4, tau, dim=6)
    buf = io.StringIO()
    w.to_csv(buf)
    buf.seek(0)
    back = Worldline.from_csv(buf)
    assert back.particle == w.particle and back.dim == 6
    assert np.array_equal(back.z, w.z) and np.array_equal(back.dda, w.dda)


def test_static_charge_retarded_data():
    w = trajectories.uniform(UNIT, [0, 0, 0], np.linspace(-20, 5, 26))
    y = np.array([3.0, 1.0, 2.0, -2.0])
    rd = retarded_data(w, y)
    assert rd.s == pytest.approx(0.0, abs=1e-12)
    assert rd.r == pytest.approx(3.0, rel=1e-12)
    assert np.allclose(rd.k, [1, 1 / 3, 2 / 3, -2 / 3], atol=1e-12)


def test_uniform_motion_matches_quadratic_root(rng):
    for _ in range(200):
        u = random_timelike_velocity(rng)
        x0 = rng.normal(size=4)
        w = trajectories.uniform(UNIT, u[1:] / u[0], np.linspace(-60, 20, 81), origin=x0)
        y = x0 + u * rng.uniform(-2, 5) + np.r_[0.0, rng.normal(size=3) * 3]
        tau, r = uniform_root(x0, u, y)
        rd = retarded_data(w, y)
        assert abs(rd.s - tau) <= 1e-12 * max(1.0, abs(tau))
        assert abs(rd.r - r) <= 1e-12 * max(1.0, r)
        assert abs(minkowski_dot(rd.k, rd.k)) < 1e-9
        assert np.allclose(rd.r * rd.k, y - (x0 + u * rd.s), atol=1e-9)


def test_point_before_history_is_rejected():
    w = trajectories.uniform(UNIT, [0, 0, 0], np.linspace(0, 5, 6))
    with pytest.raises(HistoryTooShortError):
        retarded_data(w, [1.0, 5.0, 0, 0])


def test_point_on_worldline_is_rejected():
    w = trajectories.uniform(UNIT, [0, 0, 0], np.linspace(0, 5, 6))
    with pytest.raises(SingularPointError):
        retarded_data(w, [2.0, 0, 0, 0])


def test_massless_forward_ray_flags_zero_distance():
    # on a curved null orbit the tangent ray from z(s0) meets no earlier point
    w = massless_circle()
    s0 = 1.0
    pt = w.interpolate(s0)
    y = pt.z + 2.5 * pt.u
    rd = retarded_data(w, y)
    assert rd.on_ray and rd.r == 0.0
    assert rd.s == pytest.approx(s0, abs=1e-6)
    assert np.allclose(rd.k, pt.u, atol=1e-6)


def test_chart_backward_direction_gives_twice_the_radius():
    w = trajectories.uniform(PHOTONLIKE, [0, 0, 1], np.linspace(-20, 20, 41))
    t, s = 6.0, 1.0
    rd = retarded_data(w, wavefront_chart(w, t, s, np.pi, 0.7))
    assert rd.r == pytest.approx(2 * (t - s), rel=1e-12)


def test_chart_requires_emission_before_t():
    w = trajectories.uniform(PHOTONLIKE, [0, 0, 1], np.linspace(-5, 5, 11))
    with pytest.raises(ValueError):
        wavefront_chart(w, 1.0, 1.0, 0.5, 0.0)


@given(st.floats(0.05, np.pi - 1e-3), st.floats(0, 2 * np.pi), st.floats(-30, 15))
def test_massless_chart_distance_formula(theta, phi, s):
    w = massless_circle()
    t = 20.0
    rd = retarded_data(w, wavefront_chart(w, t, s, theta, phi))
    assert rd.s == pytest.approx(s, abs=1e-10)
    assert rd.r == pytest.approx((t - s) * (1 - np.cos(theta)), rel=1e-9, abs=1e-10)


def test_chart_round_trip_ten_thousand_samples():
    rng = np.random.default_rng(7)
    w = massless_circle()
    t = 20.0
    s = rng.uniform(-35.0, 19.0, 10_000)
    theta = np.arccos(rng.uniform(-1.0, 0.999, 10_000))
    phi = rng.uniform(0, 2 * np.pi, 10_000)
    Y = wavefront_chart(w, t, s, theta, phi)
    batch = retarded_batch(w, Y)
    assert np.max(np.abs(batch.s - s)) < 1e-10
