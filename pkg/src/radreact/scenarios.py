"""Scenario runners behind the command-line interface.

Each runner takes a validated configuration :class:`Section`, writes its
artefacts to an output directory and returns a summary dictionary together
with an exit code: 0 for a clean run, 2 for a physics verdict (runaway,
inadmissible massless state), while configuration or numerical failures raise.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from radreact import conformal, dynamics, radiation, trajectories
from radreact.config import Section, parse_config
from radreact.config import dump_config as _dump
from radreact.dynamics import ExternalField, JsonlTelemetry
from radreact.errors import ConfigError
from radreact.geom import electric_magnetic
from radreact.worldline import ParticleProps

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2


def _audit(value, threshold, passed=None) -> dict:
    value = float(value)
    ok = bool(value <= threshold) if passed is None else bool(passed)
    return {"value": value, "threshold": float(threshold), "pass": ok}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _field(cfg: Section | None, dim: int, seed: int) -> ExternalField:
    if cfg is None:
        return ExternalField.zero(dim)
    kind = cfg.require("type", str)
    if kind == "zero":
        fld = ExternalField.zero(dim)
    elif kind == "uniform":
        if dim != 4:
            raise cfg.error("uniform E/B fields are 4D; use type: tensor in 6D", "type")
        fld = ExternalField.uniform_em(cfg.get("E", np.zeros(3), "vector"), cfg.get("B", np.zeros(3), "vector"))
    elif kind == "null_crossed":
        fld = ExternalField.null_crossed(cfg.get("strength", 1.0, float))
    elif kind == "coulomb":
        fld = ExternalField.coulomb(cfg.require("charge", float), cfg.get("center", np.zeros(3), "vector"))
    elif kind == "tensor":
        F = cfg.require("F", "matrix")
        if F.shape != (dim, dim):
            raise cfg.error(f"tensor must be {dim}x{dim}", "F")
        if not np.allclose(F, -F.T):
            raise cfg.error("tensor must be antisymmetric", "F")
        fld = ExternalField.constant(F)
    elif kind == "tabulated":
        times = cfg.require("times", "vector")
        tensors = np.asarray(cfg.require("tensors"), dtype=float)
        if tensors.shape != (len(times), dim, dim):
            raise cfg.error(f"expected {len(times)} tensors of shape {dim}x{dim}", "tensors")
        try:
            fld = ExternalField.tabulated(times, tensors)
        except ValueError as exc:
            raise cfg.error(str(exc), "tensors") from None
    elif kind == "random":
        rng = np.random.default_rng(cfg.get("seed", seed, int))
        fld = ExternalField.uniform_em(rng.normal(size=3), rng.normal(size=3))
        fld.description = "random uniform field"
    else:
        raise cfg.error(f"unknown field type {kind!r}", "type")
    cfg.check_unknown()
    return fld


def _particle(cfg: Section, dim: int) -> ParticleProps:
    try:
        p = ParticleProps(
            charge=cfg.require("charge", float),
            mass=cfg.get("mass", 0.0 if cfg.get("massless", False, bool) else 1.0, float),
            mu=cfg.get("mu", 0.0, float),
            massless=cfg.get("massless", False, bool),
            lagrange_multiplier_e0=cfg.get("e0", 1.0, float),
        )
        p.check_dim(dim)
    except ValueError as exc:
        raise cfg.error(str(exc)) from None
    cfg.check_unknown()
    return p


def _vec(cfg: Section, key, dim, default=None):
    v = cfg.get(key, None, "vector")
    if v is None:
        if default is None:
            raise cfg.error(f"missing required key {key!r}")
        return np.array(default, dtype=float)
    if len(v) != dim:
        raise cfg.error(f"expected {dim} components", key)
    return v


def _tolerances(root: Section, tolerance):
    tol = root.section("tolerances")
    rtol = tol.get("rtol", 1e-10, float) if tol else 1e-10
    atol = tol.get("atol", 1e-12, float) if tol else 1e-12
    if tol:
        tol.check_unknown()
    if tolerance is not None:
        rtol = float(tolerance)
    return rtol, atol


def _steps(root: Section):
    st = root.section("step")
    h0 = st.get("h0", 1e-2, float) if st else 1e-2
    h_max = st.get("h_max", np.inf, float) if st else np.inf
    if st:
        st.check_unknown()
    return h0, h_max


def _displacement_relative(z_a, z_b, z_ref_start):
    scale = max(float(np.max(np.abs(z_b - z_ref_start))), 1e-300)
    return float(np.max(np.abs(z_a - z_b)) / scale)


# -- runners -----------------------------------------------------------------


def run_ld4_single(root: Section, out: Path, tolerance, seed):
    checks = root.section("checks")
    prescribed = root.section("prescribed")
    if prescribed is not None:
        return _run_prescribed(root, prescribed, out)
    particle = _particle(root.sections("particles", True)[0], 4)
    init = root.sections("initial_states", True)[0]
    z0 = _vec(init, "z", 4, np.zeros(4))
    u0 = _vec(init, "u", 4)
    a0 = init.get("a", None, "vector")
    init.check_unknown()
    fld = _field(root.section("external_field"), 4, seed)
    mode = root.get("mode", "reduced", str)
    if mode not in ("direct", "reduced", "direct-third-order", "reduced-order"):
        raise root.error(f"unknown mode {mode!r}", "mode")
    duration = root.require("duration", float)
    rtol, atol = _tolerances(root, tolerance)
    h0, h_max = _steps(root)
    factor = root.get("runaway_factor", 1e6, float)
    if a0 is None and dynamics._mode(mode) == "direct":
        # start on the order-reduced branch; the runaway mode is then seeded only at second order
        a0 = dynamics.ll_acceleration(particle.charge, particle.mass, fld, z0, u0 / np.sqrt(u0[0] ** 2 - u0[1:] @ u0[1:]))
    with JsonlTelemetry(out / "telemetry.jsonl") as tel:
        run = dynamics.run_ld4(particle, z0, u0, fld, duration, mode=mode, a0=a0, h0=h0, rtol=rtol, atol=atol, h_max=h_max, runaway_factor=factor, telemetry=tel)
    run.worldline.to_csv(out / "trajectory.csv")
    norms = run.max_norms()
    e, m = particle.charge, particle.mass
    audits = {
        "mass_constancy": _audit(norms["mass_drift"], 1e-8),
        "angular_momentum_identity": _audit(norms["am_residual"], 1e-10),
        "velocity_norm": _audit(norms["velocity_norm_drift"], 1e-9),
    }
    summary = {
        "field": fld.description,
        "mode": mode,
        "steps": len(run.reports),
        "tau_final": run.state.tau,
        "balance": norms,
        "radiated": {"p_rad": run.state.p_rad, "energy": float(run.state.p_rad[0]), "work": run.state.work},
    }
    if checks is not None:
        if checks.get("hyperbola", False, bool):
            E, B = electric_magnetic(fld(z0))
            if np.any(B != 0) or np.any(u0[1:] != 0):
                raise checks.error("hyperbola check needs a pure electric field and a charge at rest", "hyperbola")
            g = e * np.linalg.norm(E) / m
            zh, _, _, _, _ = trajectories.hyperbolic_kinematics(run.worldline.tau, g)
            nE = E / np.linalg.norm(E)
            exact = np.column_stack([zh[:, 0], np.outer(zh[:, 1], nE)]) + z0
            dev = np.max(np.abs(run.worldline.z - exact), axis=1) / np.maximum(1.0, np.max(np.abs(exact), axis=1))
            audits["hyperbola_deviation"] = _audit(np.max(dev), 1e-8)
            summary["rapidity_final"] = float(g * run.worldline.tau[-1])
        if checks.get("compare_modes", False, bool):
            other = "reduced" if dynamics._mode(mode) == "direct" else "direct"
            a_other = a0 if a0 is not None else dynamics.ll_acceleration(e, m, fld, z0, u0 / np.sqrt(u0[0] ** 2 - u0[1:] @ u0[1:]))
            run2 = dynamics.run_ld4(particle, z0, u0, fld, run.worldline.tau[-1], mode=other, a0=a_other, h0=h0, rtol=rtol, atol=atol, runaway_factor=factor)
            z2, u2, _ = run2.worldline.evaluate(run.worldline.tau)
            rel_z = _displacement_relative(run.worldline.z, z2, z0)
            rel_u = float(np.max(np.abs(run.worldline.u - u2)) / max(np.max(np.abs(u2 - u2[0])), 1e-300))
            audits["mode_agreement"] = _audit(max(rel_z, rel_u), 1e-6)
            summary["mode_comparison"] = {"other_mode": other, "position_relative": rel_z, "velocity_relative": rel_u, "tau0": 2 * e**2 / (3 * m)}
        checks.check_unknown()
    summary["audits"] = audits
    if run.verdict is not None:
        summary["verdict"] = {"type": "runaway", **run.verdict.as_dict()}
        return summary, EXIT_VERDICT
    return summary, EXIT_OK


def _run_prescribed(root: Section, pres: Section, out: Path):
    particle = _particle(root.sections("particles", True)[0], 4)
    kind = pres.require("type", str)
    if kind != "circular":
        raise pres.error(f"unsupported prescribed trajectory {kind!r}", "type")
    radius = pres.require("radius", float)
    beta = pres.require("beta", float)
    factor = pres.get("sphere_radius_factor", 1000.0, float)
    n_theta = pres.get("n_theta", 48, int)
    n_phi = pres.get("n_phi", 96, int)
    pres.check_unknown()
    res = larmor_flux_check(particle, radius, beta, factor, n_theta, n_phi)
    res["worldline"].to_csv(out / "trajectory.csv")
    (out / "telemetry.jsonl").write_text(json.dumps(_jsonable({k: v for k, v in res.items() if k != "worldline"})) + "\n", encoding="utf-8")
    summary = {
        "prescribed": "circular",
        "radius": radius,
        "beta": beta,
        "larmor_energy_per_period": res["larmor"],
        "sphere_energy_per_period": res["flux"],
        "sphere_radius": res["R"],
        "audits": {
            "larmor_vs_sphere_flux": _audit(res["relative"], 5e-3),
            "mass_constancy": _audit(res["mass_drift"], 1e-8),
            "angular_momentum_identity": _audit(res["am_residual"], 1e-10),
        },
        "radiated": {"energy": res["larmor"]},
    }
    return summary, EXIT_OK


def larmor_flux_check(particle: ParticleProps, radius: float, beta: float, factor: float = 1000.0, n_theta: int = 48, n_phi: int = 96) -> dict:
    """Energy radiated in one orbit: worldline Larmor integral vs sphere flux."""
    g = 1.0 / np.sqrt(1.0 - beta**2)
    R = factor * radius
    period_lab = 2.0 * np.pi * radius / beta
    period_tau = period_lab / g
    knots_per_period = 96
    tau_lo = -(R + 2 * radius + period_lab) / g - period_tau
    tau_hi = 2.0 * period_tau
    n = int(np.ceil((tau_hi - tau_lo) / period_tau * knots_per_period)) + 1
    tau = np.linspace(tau_lo, tau_hi, n)
    w = trajectories.circular(particle, radius, beta, tau)
    e, m = particle.charge, particle.mass
    # Larmor energy over one proper period starting at tau = 0
    sub = trajectories.circular(particle, radius, beta, np.linspace(0.0, period_tau, knots_per_period + 1))
    larmor = radiation.accumulate(sub, lambda k: radiation.larmor_rate_4d(k, e)).total[0]
    t0 = R
    flux = radiation.time_integrated_flux((w,), t0, t0 + period_lab, R, n_theta, n_phi, 8, order=8)[0]
    p = dynamics.particle_momentum_4d(sub, e, m)
    from radreact.geom import minkowski_dot, wedge

    mass_drift = float(np.max(np.abs(-minkowski_dot(p, sub.u) - m)))
    am = float(np.max(np.abs(wedge(sub.u, p) + (2.0 / 3.0) * e**2 * wedge(sub.u, sub.a))))
    return {"larmor": float(larmor), "flux": float(flux), "relative": abs(flux - larmor) / abs(larmor), "R": R, "worldline": w, "mass_drift": mass_drift, "am_residual": am}


def run_sixd_single(root: Section, out: Path, tolerance, seed):
    particle = _particle(root.sections("particles", True)[0], 6)
    init = root.sections("initial_states", True)[0]
    z0 = _vec(init, "z", 6, np.zeros(6))
    u0 = _vec(init, "u", 6)
    kw = {k: _vec(init, k, 6, np.zeros(6)) for k in ("a", "da", "dda")}
    init.check_unknown()
    fld = _field(root.section("external_field"), 6, seed)
    duration = root.require("duration", float)
    rtol, atol = _tolerances(root, tolerance)
    h0, h_max = _steps(root)
    factor = root.get("runaway_factor", 1e6, float)
    with JsonlTelemetry(out / "telemetry.jsonl") as tel:
        run = dynamics.run_sixd(particle, z0, u0, fld, duration, a0=kw["a"], da0=kw["da"], dda0=kw["dda"], h0=h0, rtol=rtol, atol=atol, h_max=h_max, runaway_factor=factor, telemetry=tel)
    run.worldline.to_csv(out / "trajectory.csv")
    norms = run.max_norms()
    scale = max(particle.mass, max((np.max(np.abs(r.p_part)) for r in run.reports), default=0.0), float(np.max(np.abs(run.state.work))))
    audits = {
        "energy_momentum_balance": _audit(norms["em_balance"] / scale, 10 * rtol),
        "velocity_norm": _audit(norms["velocity_norm_drift"], 1e-9),
    }
    summary = {
        "field": fld.description,
        "mu": particle.mu,
        "steps": len(run.reports),
        "tau_final": run.state.tau,
        "balance": norms,
        "balance_scale": scale,
        "radiated": {"p_rad": run.state.p_rad, "energy": float(run.state.p_rad[0]), "work": run.state.work},
        "audits": audits,
    }
    if len(run.worldline) > 2 and particle.charge != 0:
        totals = radiation.radiated_totals(run.worldline)
        summary["radiated"]["p_rad_quadrature"] = totals.p_rad
        summary["radiated"]["M_rad_quadrature"] = totals.M_rad
    if run.verdict is not None:
        summary["verdict"] = {"type": "runaway", **run.verdict.as_dict()}
        return summary, EXIT_VERDICT
    return summary, EXIT_OK


def run_two_charge(root: Section, out: Path, tolerance, seed):
    parts = root.sections("particles", True)
    inits = root.sections("initial_states", True)
    if len(parts) != 2 or len(inits) != 2:
        raise root.error("two_charge needs exactly two particles and two initial states", "particles")
    props = [_particle(p, 4) for p in parts]
    z0, u0 = [], []
    for init in inits:
        z0.append(_vec(init, "z", 4, np.zeros(4)))
        u0.append(_vec(init, "u", 4))
        init.check_unknown()
    duration = root.require("duration", float)
    prehistory = root.get("prehistory", 20.0, float)
    rtol, atol = _tolerances(root, tolerance)
    h0, _ = _steps(root)
    checks = root.section("checks")
    with JsonlTelemetry(out / "telemetry.jsonl") as tel:
        run = dynamics.run_two_charge(props, z0, u0, duration, prehistory=prehistory, h0=h0, rtol=rtol, atol=atol, telemetry=tel)
    for tag, w in zip("ab", run.worldlines):
        w.to_csv(out / f"trajectory_{tag}.csv")
    norms = run.max_norms()
    scale = sum(p.mass * float(np.max(np.abs(w.u[:, 0]))) for p, w in zip(props, run.worldlines))
    audits = {
        "total_momentum_audit": _audit(norms["audit"] / scale, 10 * rtol),
        "mass_constancy": _audit(norms["mass_drift"], 1e-8),
        "angular_momentum_identity": _audit(norms["am_residual"], 1e-10),
    }
    summary = {"steps": len(run.reports), "t_final": run.system.t, "balance": norms, "audit_scale": scale}
    summary["radiated"] = {
        "p_rad": [run.system.particle(i)["p_rad"] for i in range(2)],
        "work_mutual": [run.system.particle(i)["work"] for i in range(2)],
    }
    if checks is not None:
        if checks.get("coulomb_limit", False, bool):
            heavy, light = (0, 1) if props[0].mass >= props[1].mass else (1, 0)
            wl = run.worldlines[light]
            zc = z0[heavy][1:]
            fld = ExternalField.coulomb(props[heavy].charge, zc)
            mask = wl.tau >= 0
            ref = dynamics.run_ld4(props[light], wl.z[mask][0], wl.u[mask][0], fld, wl.tau[-1], mode="reduced", h0=h0, rtol=rtol, atol=atol)
            zr, _, _ = ref.worldline.evaluate(wl.tau[mask])
            straight = wl.z[mask][0] + np.outer(wl.tau[mask], wl.u[mask][0])
            deflection = max(float(np.max(np.abs(zr - straight))), 1e-300)
            rel = float(np.max(np.abs(wl.z[mask] - zr))) / deflection
            audits["coulomb_limit"] = _audit(rel, 0.01)
            summary["coulomb_limit"] = {"mass_ratio": props[heavy].mass / props[light].mass, "relative_to_deflection": rel}
        checks.check_unknown()
    summary["audits"] = audits
    return summary, EXIT_OK


def run_massless(root: Section, out: Path, tolerance, seed):
    particle = _particle(root.sections("particles", True)[0], 4)
    if not particle.massless:
        raise root.error("massless_admissibility needs a massless particle", "particles")
    init = root.sections("initial_states", True)[0]
    z0 = _vec(init, "z", 4, np.zeros(4))
    v0 = _vec(init, "v", 3)
    init.check_unknown()
    fld = _field(root.section("external_field"), 4, seed)
    duration = root.require("duration", float)
    h = root.get("h", 0.1, float)
    with JsonlTelemetry(out / "telemetry.jsonl") as tel:
        run = dynamics.run_massless(particle, z0, v0, fld, duration, h, telemetry=tel)
    run.worldline(particle).to_csv(out / "trajectory.csv")
    summary = {"field": fld.description, "steps": len(run.reports), "admissible": run.admissible}
    if not run.admissible:
        summary["verdict"] = {"type": "inadmissible", **run.reports[-1].as_dict()}
        return summary, EXIT_VERDICT
    t = run.times() - run.times()[0]
    lam = run.reports[-1].eigenvalue if run.reports else 0.0
    drift = float(np.max(np.abs(run.multipliers() - particle.lagrange_multiplier_e0 - particle.charge * lam * t)))
    vdev = float(max(np.max(np.abs(s.v - run.states[0].v)) for s in run.states))
    summary["eigenvalue"] = lam
    summary["multiplier_final"] = float(run.multipliers()[-1])
    summary["audits"] = {"multiplier_drift": _audit(drift, 1e-8), "velocity_constant": _audit(vdev, 1e-12)}
    summary["eigensystem"] = [{"lambda": lam_, "v": v.tolist()} for lam_, v in dynamics.find_null_eigenvectors(fld(z0))]
    return summary, EXIT_OK


def run_divergence_scan(root: Section, out: Path, tolerance, seed):
    p = root.section("arc", True)
    q = p.require("charge", float)
    omega = p.get("omega", 2.0, float)
    amp = p.get("amplitude", 0.3, float)
    p.check_unknown()
    cutoffs = root.get("cutoffs", [0.05, 0.08, 0.12, 0.2, 0.3, 0.5], "vector")
    res = root.section("resolution")
    n_s = res.get("n_s", 64, int) if res else 64
    n_x = res.get("n_x", 48, int) if res else 48
    n_phi = res.get("n_phi", 32, int) if res else 32
    if res:
        res.check_unknown()
    result = divergence_check(q, omega, amp, cutoffs, n_s=n_s, n_x=n_x, n_phi=n_phi)
    result["scan"].to_csv(out / "divergence_scan.csv")
    result["worldline"].to_csv(out / "trajectory.csv")
    (out / "telemetry.jsonl").write_text("".join(json.dumps({"cutoff": r.cutoff, "energy": r.energy, "momentum": r.momentum.tolist(), "error_estimate": r.error_estimate}) + "\n" for r in result["scan"].rows), encoding="utf-8")
    summary = {k: v for k, v in result.items() if k not in ("scan", "worldline", "fit")}
    return summary, EXIT_OK


def divergence_check(q, omega, amp, cutoffs, *, n_s=64, n_x=48, n_phi=32) -> dict:
    """Scan a massless arc and compare fitted coefficients with the closed forms."""
    w = trajectories.massless_arc(q, omega, amp, 10.0, 4001)
    period = 2.0 * np.pi / omega
    scan = radiation.massless_divergence_scan(w, period + 5.0, cutoffs, n_s=n_s, n_x=n_x, n_phi=n_phi, s_range=(0.0, period))
    fit = radiation.fit_divergence(scan)
    I = trajectories.massless_arc_acceleration_integral(amp, omega)
    xg, wg = np.polynomial.legendre.leggauss(64)
    s = 0.5 * period * (xg + 1.0)
    rate = amp * omega * np.sin(0.5 * omega * s) ** 2
    psi = 0.5 * amp * (omega * s - np.sin(omega * s))
    V = 0.5 * period * np.einsum("k,k,kj->j", wg, rate**2, np.column_stack([np.sin(psi), np.zeros_like(s), np.cos(psi)]))
    half_q2 = 0.5 * q**2
    expect = {
        "energy_divergent": half_q2 * I,
        "energy_constant": -(q**2) * I / 16.0,
        "momentum_constant": half_q2 * V * 3.0 / 8.0,
        "momentum_inverse": -half_q2 * V,
        "momentum_divergent": half_q2 * V,
    }
    got = {
        "energy_divergent": fit.energy_divergent,
        "energy_constant": fit.energy_constant,
        "momentum_constant": fit.momentum_constant,
        "momentum_inverse": fit.momentum_inverse,
        "momentum_divergent": fit.momentum_divergent,
    }
    rel = {}
    for k in expect:
        ev, gv = np.atleast_1d(expect[k]), np.atleast_1d(got[k])
        rel[k] = float(np.max(np.abs(gv - ev)) / np.max(np.abs(ev)))
    audits = {
        "divergent_coefficient": _audit(rel["energy_divergent"], 0.01),
        "finite_energy_constant": _audit(rel["energy_constant"], 0.03),
        "momentum_structure": _audit(max(rel["momentum_constant"], rel["momentum_inverse"], rel["momentum_divergent"]), 0.03),
    }
    return {
        "acceleration_integral": I,
        "fitted": got,
        "expected": expect,
        "relative_errors": rel,
        "audits": audits,
        "scan": scan,
        "fit": fit,
        "worldline": w,
    }


def run_interference(root: Section, out: Path, tolerance, seed):
    fb = root.section("flyby")
    kw = {}
    if fb is not None:
        for key in ("beta", "kick", "timescale", "impact", "t_span"):
            if key in fb:
                kw[key] = fb.get(key, None, float)
        if "charges" in fb:
            kw["charges"] = tuple(fb.get("charges", None, "vector"))
        if "n_knots" in fb:
            kw["n_knots"] = fb.get("n_knots", None, int)
        fb.check_unknown()
    window = root.get("window", [-20.0, 20.0], "vector")
    radius = root.get("sphere_radius", 2000.0, float)
    res = root.section("resolution")
    n_theta = res.get("n_theta", 32, int) if res else 32
    n_phi = res.get("n_phi", 64, int) if res else 64
    panel = res.get("panel_width", 2.0, float) if res else 2.0
    if res:
        res.check_unknown()
    result = interference_check(window, radius, n_theta, n_phi, panel, **kw)
    for tag, w in zip("ab", result.pop("worldlines")):
        w.to_csv(out / f"trajectory_{tag}.csv")
    (out / "telemetry.jsonl").write_text(json.dumps(_jsonable(result)) + "\n", encoding="utf-8")
    return result, EXIT_OK


def interference_check(window, radius, n_theta=32, n_phi=64, panel_width=2.0, **flyby) -> dict:
    """Sphere flux of the interference field at ``R`` and ``2R`` vs mutual work."""
    flyby.setdefault("t_span", 400.0)
    flyby.setdefault("n_knots", 16001)
    wa, wb = trajectories.flyby_pair(**flyby)
    t_lo, t_hi = float(window[0]), float(window[1])
    c1 = radiation.interference_flux_check(wa, wb, t_hi, radius, t_start=t_lo, n_theta=n_theta, n_phi=n_phi, panel_width=panel_width)
    c2 = radiation.interference_flux_check(wa, wb, t_hi, 2 * radius, t_start=t_lo, n_theta=n_theta, n_phi=n_phi, panel_width=panel_width)
    change = abs(c2.flux[0] - c1.flux[0])
    quad_err = max(c1.flux_error[0], c2.flux_error[0])
    return {
        "flux_R": c1.flux,
        "flux_2R": c2.flux,
        "work": c1.work,
        "flux_error_R": c1.flux_error,
        "flux_error_2R": c2.flux_error,
        "work_error": c1.work_error,
        "sphere_radius": radius,
        "flux_vs_work_discrepancy": c1.discrepancy,
        "radius_doubling_change": change,
        "audits": {
            "flux_vs_work": _audit(c1.discrepancy, 0.02),
            "shape_independence": _audit(change, quad_err),
        },
        "worldlines": (wa, wb),
    }


def run_conformal(root: Section, out: Path, tolerance, seed):
    n = root.get("n_states", 1000, int)
    s = root.get("seed", seed if seed is not None else 0, int)
    res = conformal.conformal_audit(n, s, b_scale=root.get("b_scale", 0.2, float), theta_scale=root.get("theta_scale", 0.5, float))
    summary = {
        **res.as_dict(),
        "seed": s,
        "audits": {
            "equation_residual": _audit(res.max_residual, 1e-9),
            "omega_conformality": _audit(res.max_omega_defect, 1e-9),
        },
    }
    (out / "telemetry.jsonl").write_text(json.dumps(_jsonable(summary)) + "\n", encoding="utf-8")
    return summary, EXIT_OK


RUNNERS = {
    "ld4_single": run_ld4_single,
    "sixd_single": run_sixd_single,
    "two_charge": run_two_charge,
    "massless_admissibility": run_massless,
    "divergence_scan": run_divergence_scan,
    "interference_audit": run_interference,
    "conformal_audit": run_conformal,
}


def run_section(root: Section, out_dir, *, tolerance=None, seed=None, preset: str | None = None):
    """Run a parsed configuration; returns ``(summary, exit_code)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = root.require("kind", str)
    root.get("description", "", str)
    root.get("output", None)
    summary, code = RUNNERS[kind](root, out, tolerance, seed)
    root.check_unknown()
    summary = {"kind": kind, "preset": preset, "tolerance": tolerance, "seed": seed, **summary}
    if "audits" in summary:
        summary["all_audits_pass"] = all(a["pass"] for a in summary["audits"].values())
    summary.setdefault("verdict", None)
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2), encoding="utf-8")
    return _jsonable(summary), code


# -- preset gallery ---------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "free": {
        "description": "Free charge: straight worldline, no radiation, all balance residuals at round-off.",
        "kind": "ld4_single",
        "particles": [{"charge": 0.5, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1.25, 0.75, 0, 0]}],
        "duration": 10.0,
        "mode": "reduced",
    },
    "hyperbolic": {
        "description": "Uniform electric field: the radiation-reaction force vanishes on the hyperbola, so third-order motion reproduces it over five rapidity e-folds.",
        "kind": "ld4_single",
        "particles": [{"charge": 1.0, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1, 0, 0, 0], "a": [0, 1, 0, 0]}],
        "external_field": {"type": "uniform", "E": [1.0, 0, 0]},
        "duration": 5.0,
        "mode": "direct",
        "step": {"h0": 1e-3},
        "checks": {"hyperbola": True},
    },
    "circular": {
        "description": "Circular orbit at half light speed: worldline Larmor energy per turn against the retarded field flux through a sphere a thousand orbit radii away.",
        "kind": "ld4_single",
        "particles": [{"charge": 1.0, "mass": 1.0}],
        "prescribed": {"type": "circular", "radius": 1.0, "beta": 0.5, "sphere_radius_factor": 1000.0},
    },
    "weak_coupling": {
        "description": "Weak coupling in crossed uniform fields: third-order and order-reduced motion agree to second order in the classical radius over a window of a few runaway times.",
        "kind": "ld4_single",
        "particles": [{"charge": 0.01, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1.0, 0, 0, 0]}],
        "external_field": {"type": "uniform", "E": [0.5, 0, 0], "B": [0, 0, 1.0]},
        "duration": 1.0e-3,
        "mode": "direct",
        "step": {"h0": 1e-6},
        "checks": {"compare_modes": True},
    },
    "runaway": {
        "description": "Free third-order motion with a tiny initial acceleration: the self-accelerating mode grows exponentially and is reported as a runaway verdict.",
        "kind": "ld4_single",
        "particles": [{"charge": 0.3, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1, 0, 0, 0], "a": [0, 1e-8, 0, 0]}],
        "duration": 100.0,
        "mode": "direct",
        "step": {"h0": 1e-3},
    },
    "two_charge": {
        "description": "Light charge scattered by a heavy one through retarded mutual fields: total momentum bookkeeping and the static Coulomb limit.",
        "kind": "two_charge",
        "particles": [{"charge": 1.0, "mass": 1.0e4}, {"charge": -0.05, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1, 0, 0, 0]}, {"z": [0, -10, 2, 0], "u": [1.0482848367219182, 0.31448545101657545, 0, 0]}],
        "duration": 20.0,
        "prehistory": 30.0,
        "step": {"h0": 0.05},
        "checks": {"coulomb_limit": True},
    },
    "flyby": {
        "description": "Two prescribed charges passing each other: interference energy through distant spheres equals minus the mutual Lorentz-force work, independent of the sphere radius.",
        "kind": "interference_audit",
        "flyby": {"beta": 0.5, "kick": 0.3, "timescale": 2.0, "impact": 4.0, "charges": [1.0, -1.0]},
        "window": [-20.0, 20.0],
        "sphere_radius": 2000.0,
    },
    "null_field_massless": {
        "description": "Massless charge along the Poynting direction of a null crossed field: a real null eigenvector, so it propagates with constant velocity.",
        "kind": "massless_admissibility",
        "particles": [{"charge": 0.7, "massless": True, "e0": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "v": [0, 0, 1]}],
        "external_field": {"type": "null_crossed", "strength": 2.0},
        "duration": 5.0,
        "h": 0.1,
    },
    "electric_massless": {
        "description": "Massless charge along a uniform electric field: eigenvalue qE drives the multiplier linearly while the velocity stays fixed.",
        "kind": "massless_admissibility",
        "particles": [{"charge": 0.7, "massless": True, "e0": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "v": [0, 0, 1]}],
        "external_field": {"type": "uniform", "E": [0, 0, 1.5]},
        "duration": 3.0,
        "h": 0.1,
    },
    "generic_field_massless": {
        "description": "Massless charge in a generic uniform field: its velocity is not a null eigenvector, so the state is inadmissible.",
        "kind": "massless_admissibility",
        "particles": [{"charge": 0.7, "massless": True}],
        "initial_states": [{"z": [0, 0, 0, 0], "v": [0, 0, 1]}],
        "external_field": {"type": "random", "seed": 1},
        "duration": 3.0,
        "h": 0.1,
    },
    "divergence_scan": {
        "description": "Massless charge turning briefly: field energy outside a forward cone diverges as the inverse square of (1 - cos of the cone angle).",
        "kind": "divergence_scan",
        "arc": {"charge": 0.8, "omega": 2.0, "amplitude": 0.3},
        "cutoffs": [0.05, 0.08, 0.12, 0.2, 0.3, 0.5],
    },
    "conformal_audit": {
        "description": "Massless equation of motion under random dilatations and special conformal maps, with the field as a 2-form and the multiplier rescaled.",
        "kind": "conformal_audit",
        "n_states": 1000,
    },
    "sixd_balance": {
        "description": "Six-dimensional charge in a uniform field: integrated energy-momentum balance of the higher-derivative equation (negative mu keeps growth slow).",
        "kind": "sixd_single",
        "particles": [{"charge": 0.3, "mass": 1.0, "mu": -1.0}],
        "initial_states": [{"z": [0, 0, 0, 0, 0, 0], "u": [1, 0, 0, 0, 0, 0]}],
        "external_field": {
            "type": "tensor",
            "F": [
                [0, -0.3, 0, 0, 0, 0],
                [0.3, 0, 0, 0, 0, 0],
                [0, 0, 0, 0.2, 0, 0],
                [0, 0, -0.2, 0, 0, 0],
                [0, 0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0, 0],
            ],
        },
        "duration": 10.0,
        "step": {"h0": 1e-3},
    },
    "sixd_rigid": {
        "description": "Six-dimensional neutral rigid particle: with zero charge only mass and mu remain and the particle momentum is conserved.",
        "kind": "sixd_single",
        "particles": [{"charge": 0.0, "mass": 1.0, "mu": -2.0}],
        "initial_states": [{"z": [0, 0, 0, 0, 0, 0], "u": [1, 0, 0, 0, 0, 0], "a": [0, 0.1, 0, 0.05, 0, 0]}],
        "duration": 5.0,
        "step": {"h0": 1e-3},
    },
}


def preset_section(name: str) -> Section:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; run list-presets to see the gallery")
    return parse_config(_dump(PRESETS[name]), f"<preset {name}>")


def preset_text(name: str) -> str:
    return _dump(PRESETS[name])


def field_from_config(data: dict, dim: int = 4, seed: int = 0) -> ExternalField:
    """Build an external field from a plain mapping (used by tests and notebooks)."""
    return _field(parse_config(_dump({"kind": "ld4_single", "external_field": data}), "<field>").section("external_field"), dim, seed)

