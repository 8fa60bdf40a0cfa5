import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radreact import dynamics, trajectories
from radreact.dynamics import ExternalField, admissibility, find_null_eigenvectors, particle_momentum_4d
from radreact.geom import field_tensor, minkowski_dot, raise_first
from radreact.worldline import ParticleProps, WorldlinePoint

finite = st.floats(-4, 4, allow_nan=False)
field3 = arrays(float, 3, elements=finite)


def rest_point(a):
    return WorldlinePoint(0.0, np.zeros(4), np.array([1.0, 0, 0, 0]), np.asarray(a, dtype=float))


def test_momentum_without_acceleration_is_m_u():
    u = np.array([1.25, 0.75, 0, 0])
    pt = WorldlinePoint(0.0, np.zeros(4), u, np.zeros(4))
    assert np.array_equal(particle_momentum_4d(pt, 0.7, 2.0), 2.0 * u)


def test_momentum_rest_frame_schott_term():
    p = particle_momentum_4d(rest_point([0, 0.4, 0, 0]), 1.5, 2.0)
    assert np.allclose(p, [2.0, -(2 / 3) * 1.5**2 * 0.4, 0, 0])


@pytest.mark.parametrize("mode", ["direct", "reduced"])
def test_free_motion_stays_straight(mode):
    u0 = np.array([1.25, 0.75, 0, 0])
    run = dynamics.run_ld4(ParticleProps(0.5, 1.0), np.zeros(4), u0, ExternalField.zero(), 10.0, mode=mode, a0=np.zeros(4))
    assert run.verdict is None
    assert np.allclose(run.state.z, u0 * 10.0, rtol=1e-12)
    norms = run.max_norms()
    assert max(norms["em_balance"], norms["am_residual"], norms["mass_drift"]) < 1e-12


def test_unknown_mode_and_missing_initial_acceleration():
    with pytest.raises(ValueError):
        dynamics.run_ld4(ParticleProps(1.0, 1.0), np.zeros(4), [1, 0, 0, 0], ExternalField.zero(), 1.0, mode="sideways")
    with pytest.raises(ValueError):
        dynamics.run_ld4(ParticleProps(1.0, 1.0), np.zeros(4), [1, 0, 0, 0], ExternalField.zero(), 1.0, mode="direct")


def test_abraham_vector_vanishes_on_hyperbola():
    g = 0.9
    z, u, a, da, _ = trajectories.hyperbolic_kinematics(np.linspace(-2, 2, 9), g)
    aa = minkowski_dot(a, a)
    assert np.allclose(da - aa[:, None] * u, 0.0, atol=1e-13)


def test_direct_mode_follows_hyperbola():
    E = 0.8
    run = dynamics.run_ld4(ParticleProps(1.0, 1.0), np.zeros(4), [1, 0, 0, 0], ExternalField.uniform_em([E, 0, 0]), 2.0, mode="direct", a0=[0, E, 0, 0], h0=1e-3)
    z, u, _, _, _ = trajectories.hyperbolic_kinematics(run.state.tau, E)
    assert np.allclose(run.state.u, u, rtol=1e-8)
    assert np.allclose(run.state.z, z, rtol=1e-8, atol=1e-9)


def test_mass_shell_and_angular_identity_in_magnetic_field():
    run = dynamics.run_ld4(ParticleProps(0.2, 1.0), np.zeros(4), [1.25, 0.75, 0, 0], ExternalField.uniform_em(B=[0, 0, 1.0]), 20.0, mode="reduced")
    norms = run.max_norms()
    assert norms["mass_drift"] < 1e-8
    assert norms["am_residual"] < 1e-10
    # radiation takes energy: the orbit slows down
    assert run.state.u[0] < 1.25


def test_runaway_growth_rate():
    e, m = 0.3, 1.0
    run = dynamics.run_ld4(ParticleProps(e, m), np.zeros(4), [1, 0, 0, 0], ExternalField.zero(), 100.0, mode="direct", a0=[0, 1e-8, 0, 0], h0=1e-3)
    assert run.verdict is not None and run.verdict.reason
    assert run.verdict.growth_rate == pytest.approx(3 * m / (2 * e**2), rel=0.02)
    assert run.state.tau < 100.0


def test_reduced_mode_has_no_runaway():
    run = dynamics.run_ld4(ParticleProps(0.3, 1.0), np.zeros(4), [1, 0, 0, 0], ExternalField.zero(), 5.0, mode="reduced")
    assert run.verdict is None
    assert np.max(np.abs(run.state.a)) == 0.0


def test_sixd_free_motion_is_straight():
    u0 = np.r_[1.0, np.zeros(5)]
    run = dynamics.run_sixd(ParticleProps(0.3, 1.0, mu=-1.0), np.zeros(6), u0, ExternalField.zero(6), 5.0)
    assert run.verdict is None
    assert np.allclose(run.state.z, 5.0 * u0, rtol=1e-12)
    norms = run.max_norms()
    assert norms["em_balance"] < 1e-12 and norms["em_residual"] < 1e-12


def test_sixd_rigid_particle_conserves_momentum():
    particle = ParticleProps(0.0, 1.0, mu=-2.0)
    run = dynamics.run_sixd(particle, np.zeros(6), np.r_[1.0, np.zeros(5)], ExternalField.zero(6), 3.0, a0=np.r_[0, 0.1, 0, 0.05, 0, 0], h0=1e-3)
    p = [dynamics.particle_momentum_6d(rep_pt, 0.0, 1.0, -2.0) for rep_pt in (run.worldline.point(0), run.worldline.point(len(run.worldline) - 1))]
    assert np.max(np.abs(p[1] - p[0])) < 1e-9 * np.max(np.abs(p[0]))
    assert np.max(np.abs(run.state.a)) > 0.01  # it really moves non-inertially


def test_null_eigenvectors_of_zero_field_are_degenerate():
    system = find_null_eigenvectors(np.zeros((4, 4)))
    assert system.degenerate and len(system) == 0


def test_null_eigenvectors_of_electric_field():
    E = 1.7
    system = find_null_eigenvectors(field_tensor([0, 0, E]))
    lams = [lam for lam, _ in system]
    assert lams == pytest.approx([E, -E])
    assert np.allclose(system[0][1], [1, 0, 0, 1])
    assert np.allclose(system[1][1], [1, 0, 0, -1])


def test_null_field_has_single_poynting_eigenvector():
    system = find_null_eigenvectors(field_tensor([2.0, 0, 0], [0, 2.0, 0]))
    assert len(system) == 1
    lam, v = system[0]
    assert lam == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(v, [1, 0, 0, 1])


@given(field3, field3, st.floats(0.1, 10))
def test_null_eigenpairs_are_genuine_and_scale(E, B, c):
    F = field_tensor(E, B)
    system = find_null_eigenvectors(F)
    if np.max(np.abs(F)) == 0:
        assert system.degenerate
        return
    M = raise_first(F)
    for lam, v in system:
        assert v[0] == 1.0
        assert abs(minkowski_dot(v, v)) < 1e-8
        assert np.linalg.norm(M @ v - lam * v) <= 1e-8 * np.linalg.norm(F)
    scaled = find_null_eigenvectors(c * F)
    assert len(scaled) == len(system)
    for (l1, v1), (l2, v2) in zip(system, scaled):
        assert l2 == pytest.approx(c * l1, rel=1e-9, abs=1e-9 * c * np.linalg.norm(F))


def test_generic_field_has_two_real_null_directions(rng):
    for _ in range(50):
        F = field_tensor(rng.normal(size=3), rng.normal(size=3))
        assert len(find_null_eigenvectors(F)) == 2


def test_massless_in_zero_field_is_straight():
    run = dynamics.run_massless(ParticleProps(0.7, 0.0, massless=True, lagrange_multiplier_e0=2.0), np.zeros(4), [0, 1, 0], ExternalField.zero(), 3.0, 0.5)
    assert run.admissible
    assert np.allclose(run.multipliers(), 2.0)
    assert np.allclose(run.states[-1].z, [3.0, 0, 3.0, 0])


def test_massless_along_null_field_keeps_velocity():
    q = 0.7
    run = dynamics.run_massless(ParticleProps(q, 0.0, massless=True), np.zeros(4), [0, 0, 1], ExternalField.null_crossed(2.0), 5.0, 0.1)
    assert run.admissible
    assert all(np.array_equal(s.v, [0, 0, 1]) for s in run.states)
    assert np.max(np.abs(run.multipliers() - 1.0)) < 1e-8


def test_massless_multiplier_grows_linearly_in_electric_field():
    q, E = 0.7, 1.5
    run = dynamics.run_massless(ParticleProps(q, 0.0, massless=True), np.zeros(4), [0, 0, 1], ExternalField.uniform_em([0, 0, E]), 3.0, 0.1)
    assert run.admissible
    assert np.max(np.abs(run.multipliers() - (1.0 + q * E * run.times()))) < 1e-8


def test_generic_field_is_inadmissible(rng):
    F = field_tensor(rng.normal(size=3), rng.normal(size=3))
    report = admissibility(F, np.array([1.0, 0, 0, 1.0]))
    assert not report.admissible
    assert len(report.eigensystem) == 2
    run = dynamics.run_massless(ParticleProps(1.0, 0.0, massless=True), np.zeros(4), [0, 0, 1], ExternalField.constant(F), 1.0, 0.1)
    assert not run.admissible and len(run.states) == 1


def test_neutral_pair_moves_inertially():
    props = (ParticleProps(0.0, 1.0), ParticleProps(0.0, 2.0))
    u1 = np.array([1.25, 0.75, 0, 0])
    run = dynamics.run_two_charge(props, [np.zeros(4), np.array([0, 0, 5.0, 0])], [u1, np.array([1.0, 0, 0, 0])], 5.0, h0=0.1)
    p0, p1 = run.system.particle(0), run.system.particle(1)
    assert np.allclose(p0["z"], u1 * 5.0 / 1.25, rtol=1e-12)
    assert np.allclose(p1["z"], [5.0, 0, 5.0, 0], rtol=1e-12)
    assert run.max_norms()["audit"] < 1e-12


def _light_heavy_run(light_charge, heavy_mass):
    props = (ParticleProps(1.0, heavy_mass), ParticleProps(light_charge, 1.0))
    u_light = np.array([1.0482848367219182, 0.31448545101657545, 0, 0])
    return dynamics.run_two_charge(props, [np.zeros(4), np.array([0, -5.0, 1.5, 0])], [np.array([1.0, 0, 0, 0]), u_light], 8.0, prehistory=20.0, h0=0.05)


def test_two_charge_audit_at_weak_coupling():
    norms = _light_heavy_run(-0.05, 1e4).max_norms()
    momentum_scale = 1e4 * 1.0 + 1.0 * 1.0482848367219182
    assert norms["audit"] / momentum_scale < 10 * 1e-10
    assert norms["mass_drift"] < 1e-8
    assert norms["am_residual"] < 1e-10


def test_order_reduction_residual_is_fourth_order_in_charge():
    strong = _light_heavy_run(-0.3, 50.0).max_norms()["em_residual"]
    weak = _light_heavy_run(-0.15, 50.0).max_norms()["em_residual"]
    assert strong / weak == pytest.approx(16.0, rel=0.1)
