import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radreact.conformal import (
    ConformalMap,
    _fd_jacobian,
    conformal_audit,
    conformality_defect,
    dilate,
    equation_residual,
    omega_matrix,
    random_admissible_state,
    sct_denominator,
    special_conformal,
    transform_field,
    transform_massless_state,
)
from radreact.geom import field_tensor, metric, minkowski_dot

ETA = metric(4)


def test_dilatation_examples():
    x = np.array([1.0, 0, 0, 1.0])
    assert np.array_equal(dilate(x, 0.0), x)
    assert np.allclose(dilate(x, np.log(2.0)), [2, 0, 0, 2], rtol=1e-15)
    assert minkowski_dot(dilate(x, 0.7), dilate(x, 0.7)) == 0.0


def test_zero_parameter_sct_is_identity():
    x = np.array([0.3, -1.2, 0.5, 2.0])
    assert np.array_equal(special_conformal(x, np.zeros(4)), x)
    assert sct_denominator(x, np.zeros(4)) == 1.0
    assert np.allclose(omega_matrix(x, np.zeros(4)), np.eye(4), atol=1e-15)


def test_sct_singular_point_raises():
    b = np.array([0.0, 1.0, 0, 0])
    x = np.array([0.0, -1.0, 0, 0])  # D = 1 - 2 + 1 = 0
    with pytest.raises(ZeroDivisionError):
        special_conformal(x, b)


def test_nullity_preserved_on_many_null_vectors():
    rng = np.random.default_rng(3)
    n = rng.normal(size=(10_000, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    scale = rng.uniform(0.1, 3.0, 10_000)
    X = np.column_stack([scale, scale[:, None] * n])
    worst = 0.0
    for x in X:
        b = 0.1 * rng.normal(size=4)
        if abs(sct_denominator(x, b)) < 0.1:
            continue
        xp = special_conformal(dilate(x, rng.uniform(-1, 1)), b)
        worst = max(worst, abs(minkowski_dot(xp, xp)) / (xp @ xp))
    assert worst < 1e-10


@given(st.integers(0, 2**31 - 1))
def test_sct_inverse_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=4)
    b = 0.2 * rng.normal(size=4)
    if abs(sct_denominator(x, b)) < 0.1:
        return
    xp = special_conformal(x, b)
    if abs(sct_denominator(xp, -b)) < 0.1:
        return
    assert np.allclose(special_conformal(xp, -b), x, rtol=1e-10, atol=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_jacobian_is_conformal_and_matches_differences(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=4)
    x[0] += 3.0 * np.sign(x[0])  # keep away from the light cone
    b = 0.2 * rng.normal(size=4)
    cmap = ConformalMap(float(rng.uniform(-0.5, 0.5)), b)
    if abs(cmap.denominator(x)) < 0.2:
        return
    J = cmap.jacobian(x)
    kappa = cmap.scale(x)
    assert np.max(np.abs(J.T @ ETA @ J - kappa**2 * ETA)) <= 1e-9 * kappa**2
    assert conformality_defect(omega_matrix(dilate(x, cmap.theta), b)) < 1e-9
    J_fd = _fd_jacobian(cmap.apply, x, step=1e-4)
    assert np.max(np.abs(J - J_fd)) <= 1e-6 * np.max(np.abs(J))


def test_light_cone_fallback_is_still_conformal():
    x = np.array([1.0, 0.6, 0.8, 0.0])  # null
    b = np.array([0.05, 0.1, -0.02, 0.03])
    assert conformality_defect(omega_matrix(x, b)) < 1e-7


def test_field_transformations():
    F = field_tensor([1.0, -0.5, 0.2], [0.3, 0.0, 2.0])
    assert np.array_equal(transform_field(np.zeros((4, 4)), np.eye(4)), np.zeros((4, 4)))
    theta = 0.4
    J = ConformalMap(theta, np.zeros(4)).jacobian(np.array([0.5, 1.0, 0, 0]))
    assert np.allclose(transform_field(F, J), np.exp(-2 * theta) * F, rtol=1e-14)


def test_massless_state_stays_null_under_the_map():
    rng = np.random.default_rng(11)
    F, v, _ = random_admissible_state(rng)
    cmap = ConformalMap(0.3, np.array([0.1, -0.05, 0.08, 0.02]))
    x = np.array([0.4, 0.2, -0.3, 0.1])
    xp, vp, ep = transform_massless_state(cmap, x, v, 1.5)
    assert abs(minkowski_dot(vp, vp)) < 1e-12 * (vp @ vp)
    assert ep == pytest.approx(cmap.denominator(x) ** 2 * np.exp(-0.6) * 1.5)


@given(st.integers(0, 2**31 - 1))
def test_transformed_massless_equation_holds(seed):
    rng = np.random.default_rng(seed)
    F, v, _ = random_admissible_state(rng)
    cmap = ConformalMap(float(rng.uniform(-0.5, 0.5)), 0.2 * rng.normal(size=4))
    x0 = rng.normal(size=4)
    if abs(cmap.denominator(x0)) < 0.1:
        return
    assert equation_residual(F, x0, v, 1.3, float(rng.normal()), cmap) < 1e-9


def test_wrong_multiplier_scaling_breaks_the_equation():
    # keeping e unscaled must violate the transformed equation
    rng = np.random.default_rng(5)
    F, v, lam = random_admissible_state(rng)
    cmap = ConformalMap(0.2, np.array([0.15, 0.1, -0.1, 0.05]))
    x0 = np.array([0.3, 0.1, 0.2, -0.4])
    from radreact.conformal import _image_line
    from radreact.geom import raise_first

    xp, vp, ap, D, dD = _image_line(cmap, x0, v, 0.0)
    J = cmap.jacobian(x0)
    rhs = raise_first(transform_field(F, J)) @ (J @ v)
    lhs = lam * vp + 1.0 * ap  # e = 1, de/ds = q lam with q = 1, no rescaling
    assert np.max(np.abs(lhs - rhs)) > 1e-3 * np.max(np.abs(rhs))


def test_small_audit_is_clean():
    result = conformal_audit(n_states=50, seed=2)
    assert result.max_residual < 1e-9
    assert result.max_omega_defect < 1e-9
    assert result.max_jacobian_mismatch < 1e-6
