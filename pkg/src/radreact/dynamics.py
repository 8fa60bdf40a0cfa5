"""Equations of motion with radiation reaction and their balance bookkeeping.

Integrators here share one adaptive Dormand-Prince driver and one convention:
every accepted step yields a new state plus a :class:`BalanceReport`.  Besides
the kinematic chain, each state carries two accumulators, the radiated
momentum ``p_rad = int (rate) dtau`` and the external impulse
``work = int F_ext dtau``, so the integrated balance

    p_part(tau) - p_part(tau_start) + p_rad - work

can be audited at every step without a second pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from radreact.errors import RunawayError, StepSizeUnderflowError
from radreact.fields import lw_fields_4d
from radreact.geom import apply_tensor, field_tensor, metric, minkowski_dot, raise_first, wedge
from radreact.radiation import SIXD_P
from radreact.rk import DormandPrince
from radreact.worldline import ParticleProps, Worldline, WorldlinePoint

EIG_TOL = 1e-9
LORENTZ_CAP = 1e6  # u0 beyond this is treated as a runaway
DIRECT = "direct"
REDUCED = "reduced"
_MODES = {"direct": DIRECT, "direct-third-order": DIRECT, "reduced": REDUCED, "reduced-order": REDUCED}


def _mode(name: str) -> str:
    try:
        return _MODES[name]
    except KeyError:
        raise ValueError(f"unknown mode {name!r}; expected one of {sorted(_MODES)}") from None


def _dot(v, w) -> float:
    return float(minkowski_dot(v, w))


def _normalize(u):
    return u / np.sqrt(-_dot(u, u))


# -- external fields ---------------------------------------------------------


@dataclass
class ExternalField:
    """Prescribed field ``F_{mu nu}(x)`` (all-lower) with a text description."""

    F: Callable[[np.ndarray], np.ndarray]
    description: str = ""
    dim: int = 4
    uniform: bool = False
    fd_step: float = 1e-4

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.F(np.asarray(x, dtype=float)), dtype=float)

    def mixed(self, x) -> np.ndarray:
        return raise_first(self(x))

    def derivative(self, x, u) -> np.ndarray:
        """Directional derivative ``u^l d_l F`` (central differences unless uniform)."""
        if self.uniform:
            return np.zeros((self.dim, self.dim))
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        eps = self.fd_step * max(1.0, float(np.linalg.norm(x[1:])))
        return (self(x + eps * u) - self(x - eps * u)) / (2.0 * eps)

    @classmethod
    def zero(cls, dim: int = 4) -> "ExternalField":
        Z = np.zeros((dim, dim))
        return cls(lambda x: Z, "no external field", dim=dim, uniform=True)

    @classmethod
    def constant(cls, F, description: str = "uniform field") -> "ExternalField":
        F = np.array(F, dtype=float)
        if not np.allclose(F, -F.T, atol=0.0, rtol=0.0):
            raise ValueError("external field tensor must be antisymmetric")
        return cls(lambda x: F, description, dim=F.shape[0], uniform=True)

    @classmethod
    def uniform_em(cls, E=(0.0, 0.0, 0.0), B=(0.0, 0.0, 0.0)) -> "ExternalField":
        return cls.constant(field_tensor(E, B), f"uniform E={list(map(float, E))} B={list(map(float, B))}")

    @classmethod
    def null_crossed(cls, strength: float = 1.0) -> "ExternalField":
        """``E = s x``, ``B = s y``: a null field whose Poynting direction is ``+z``."""
        fld = cls.uniform_em((strength, 0.0, 0.0), (0.0, strength, 0.0))
        fld.description = f"null crossed field |E|=|B|={strength}, E x B along +z"
        return fld

    @classmethod
    def coulomb(cls, charge: float, center=(0.0, 0.0, 0.0)) -> "ExternalField":
        c = np.asarray(center, dtype=float)

        def F(x):
            d = x[1:] - c
            r = np.linalg.norm(d)
            return field_tensor(charge * d / r**3)

        return cls(F, f"Coulomb field of charge {charge} at rest at {c.tolist()}")

    @classmethod
    def tabulated(cls, times, tensors) -> "ExternalField":
        """Spatially uniform field, piecewise-linear in laboratory time."""
        times = np.asarray(times, dtype=float)
        tensors = np.asarray(tensors, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ValueError("tabulated times must increase")
        if not np.allclose(tensors, -np.swapaxes(tensors, -1, -2)):
            raise ValueError("tabulated tensors must be antisymmetric")

        def F(x):
            t = np.clip(x[0], times[0], times[-1])
            j = min(max(int(np.searchsorted(times, t)), 1), len(times) - 1)
            w = (t - times[j - 1]) / (times[j] - times[j - 1])
            return (1 - w) * tensors[j - 1] + w * tensors[j]

        return cls(F, f"tabulated uniform field on t in [{times[0]}, {times[-1]}]", dim=tensors.shape[-1])


# -- reports -----------------------------------------------------------------


@dataclass
class BalanceReport:
    """Balance residuals at one accepted step.

    ``em_residual`` is the pointwise balance ``dp_part/dtau + rate - F_ext``;
    ``em_balance`` its integral from the start of the run, built from the
    accumulated radiated momentum and external impulse.
    """

    tau: float
    em_residual: np.ndarray
    am_residual: np.ndarray
    mass_drift: float
    velocity_norm_drift: float
    em_balance: np.ndarray
    p_part: np.ndarray
    h: float = 0.0

    def norms(self) -> dict:
        return {
            "em_residual": float(np.max(np.abs(self.em_residual))),
            "em_balance": float(np.max(np.abs(self.em_balance))),
            "am_residual": float(np.max(np.abs(self.am_residual))),
            "mass_drift": float(self.mass_drift),
            "velocity_norm_drift": float(self.velocity_norm_drift),
        }

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in self.norms().values())


@dataclass
class ParticleState:
    """Kinematic chain of one particle plus its balance accumulators."""

    tau: float
    z: np.ndarray
    u: np.ndarray
    a: np.ndarray
    da: np.ndarray | None = None
    dda: np.ndarray | None = None
    p_rad: np.ndarray | None = None
    work: np.ndarray | None = None
    p_start: np.ndarray | None = None
    h: float = 1e-2
    err_prev: float = 1e-4

    def __post_init__(self):
        for name in ("z", "u", "a", "da", "dda"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.array(v, dtype=float))
        d = len(self.z)
        if self.p_rad is None:
            self.p_rad = np.zeros(d)
        if self.work is None:
            self.work = np.zeros(d)

    @property
    def dim(self) -> int:
        return len(self.z)

    def point(self) -> WorldlinePoint:
        return WorldlinePoint(self.tau, self.z.copy(), self.u.copy(), self.a.copy(), None if self.da is None else self.da.copy(), None if self.dda is None else self.dda.copy())


@dataclass
class RunawayVerdict:
    """Measured self-acceleration of a direct-mode solution."""

    tau: float
    acceleration: float
    growth_rate: float
    e_folding_time: float
    expected_growth_rate: float | None
    reason: str

    def as_dict(self) -> dict:
        return {k: (None if v is None else (v if isinstance(v, str) else float(v))) for k, v in self.__dict__.items()}


@dataclass
class Run:
    worldline: Worldline
    reports: list
    state: ParticleState
    verdict: RunawayVerdict | None = None

    def max_norms(self) -> dict:
        keys = ("em_residual", "em_balance", "am_residual", "mass_drift", "velocity_norm_drift")
        out = {k: 0.0 for k in keys}
        for rep in self.reports:
            for k, v in rep.norms().items():
                out[k] = max(out[k], v)
        return out


class JsonlTelemetry:
    """Append one JSON record per accepted step to a file."""

    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")

    def __call__(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def telemetry_record(step: int, state: ParticleState, report: BalanceReport, **extra) -> dict:
    rec = {
        "step": step,
        "tau": state.tau,
        "h": report.h,
        "z": state.z.tolist(),
        "u": state.u.tolist(),
        "a": state.a.tolist(),
        "residuals": report.norms(),
    }
    rec.update(extra)
    return rec


# -- 4D Lorentz-Dirac ----------------------------------------------------------


def particle_momentum_4d(pt, e: float, m: float) -> np.ndarray:
    """Renormalised particle momentum ``m u - (2/3) e^2 a``."""
    return m * np.asarray(pt.u, dtype=float) - (2.0 / 3.0) * e**2 * np.asarray(pt.a, dtype=float)


def _force(e, field: ExternalField, z, u):
    return e * apply_tensor(field(z), u)


def ll_acceleration(e: float, m: float, field: ExternalField, z, u) -> np.ndarray:
    """Order-reduced acceleration ``f/m + tau0 (fdot/m - (f.f/m^2) u)``, ``tau0 = 2e^2/(3m)``."""
    M = field.mixed(z)
    f = e * (M @ u)
    if e == 0.0:
        return f / m
    tau0 = 2.0 * e**2 / (3.0 * m)
    fdot = e * (raise_first(field.derivative(z, u)) @ u + M @ f / m)
    return f / m + tau0 * (fdot / m - _dot(f, f) / m**2 * u)


def _ld_report(e, m, state: ParticleState, f, da, raw_norm, h) -> BalanceReport:
    u, a = state.u, state.a
    c = (2.0 / 3.0) * e**2
    p = m * u - c * a
    em_residual = m * a - c * da + c * _dot(a, a) * u - f
    return BalanceReport(
        tau=state.tau,
        em_residual=em_residual,
        am_residual=wedge(u, p) + c * wedge(u, a),
        mass_drift=abs(-_dot(p, u) - m),
        velocity_norm_drift=raw_norm,
        em_balance=p - state.p_start + state.p_rad - state.work,
        p_part=p,
        h=h,
    )


def _ll_jerk(e, m, field, z, u, a):
    """Derivative of the order-reduced acceleration along the trajectory."""
    eps = 1e-4 / max(1.0, u[0])
    ap = ll_acceleration(e, m, field, z + eps * u, u + eps * a)
    am = ll_acceleration(e, m, field, z - eps * u, u - eps * a)
    return (ap - am) / (2.0 * eps)


def lorentz_dirac_step(
    state: ParticleState,
    e: float,
    m: float,
    F_ext: ExternalField,
    h: float | None = None,
    mode: str = REDUCED,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    h_max: float = np.inf,
    runaway_factor: float = 1e6,
    a_reference: float | None = None,
):
    """One adaptive step of the 4D Lorentz-Dirac equation; returns ``(state, report)``.

    ``mode`` selects the third-order equation (``"direct"``) or the
    Landau-Lifshitz substitution (``"reduced"``).  In direct mode a runaway
    raises :class:`RunawayError` once ``sqrt(a.a)`` exceeds ``runaway_factor``
    times ``a_reference`` (defaults to the larger of the initial acceleration
    and ``|F_ext|/m``) or the step size collapses.
    """
    mode = _mode(mode)
    d = state.dim
    if d != 4:
        raise ValueError("lorentz_dirac_step integrates 4D particles")
    direct = mode == DIRECT and e != 0.0
    c = (2.0 / 3.0) * e**2
    if state.p_start is None:
        state = replace(state, p_start=m * state.u - c * state.a)

    def rhs(t, y):
        z, u = y[:d], y[d : 2 * d]
        f = _force(e, F_ext, z, u)
        if direct:
            a = y[2 * d : 3 * d]
            da = (m * a - f) / c + _dot(a, a) * u
            return np.concatenate([u, a, da, c * _dot(a, a) * u, f])
        a = ll_acceleration(e, m, F_ext, z, u)
        return np.concatenate([u, a, c * _dot(a, a) * u, f])

    parts = [state.z, state.u] + ([state.a] if direct else []) + [state.p_rad, state.work]
    y0 = np.concatenate(parts)
    dp = DormandPrince(rhs, rtol, atol, h_max=h_max)
    dp._err_prev = state.err_prev
    try:
        res = dp.step(state.tau, y0, state.h if h is None else h)
    except StepSizeUnderflowError as exc:
        if direct:
            verdict = RunawayVerdict(state.tau, float(np.sqrt(abs(_dot(state.a, state.a)))), np.nan, np.nan, 3 * m / (2 * e**2), "step-size underflow")
            raise RunawayError(str(exc), verdict) from exc
        raise

    y = res.y
    z, u_raw = y[:d], y[d : 2 * d]
    raw_norm = abs(_dot(u_raw, u_raw) + 1.0)
    u = _normalize(u_raw)
    off = 2 * d
    if direct:
        a = y[off : off + d]
        a = a + _dot(a, u) * u
        off += d
    else:
        a = ll_acceleration(e, m, F_ext, z, u)
    new = replace(
        state,
        tau=res.t,
        z=z,
        u=u,
        a=a,
        p_rad=y[off : off + d].copy(),
        work=y[off + d : off + 2 * d].copy(),
        h=res.h_next,
        err_prev=dp._err_prev,
    )
    f = _force(e, F_ext, z, u)
    if direct:
        da = (m * a - f) / c + _dot(a, a) * u
    else:
        da = _ll_jerk(e, m, F_ext, z, u, a)
    report = _ld_report(e, m, new, f, da, raw_norm, res.h)

    if direct:
        ref = a_reference
        if ref is None:
            ref = max(np.sqrt(abs(_dot(state.a, state.a))), np.linalg.norm(f) / m, 1e-300)
        acc = np.sqrt(abs(_dot(a, a)))
        if acc > runaway_factor * ref or u[0] > LORENTZ_CAP:
            verdict = RunawayVerdict(new.tau, acc, np.nan, np.nan, 3 * m / (2 * e**2), "acceleration growth")
            err = RunawayError(f"runaway at tau={new.tau:.6g}: |a| grew to {acc:.3e}", verdict)
            err.state, err.report = new, report
            raise err
    return new, report


def fit_growth(tau, acc) -> tuple[float, float]:
    """Least-squares exponential rate of ``acc(tau)``; returns ``(rate, 1/rate)``."""
    tau = np.asarray(tau, dtype=float)
    acc = np.asarray(acc, dtype=float)
    keep = acc > 0
    if keep.sum() < 3:
        return np.nan, np.nan
    rate = np.polyfit(tau[keep], np.log(acc[keep]), 1)[0]
    return float(rate), float(1.0 / rate) if rate != 0 else np.inf


def _emit(telemetry, step, state, report, **extra):
    if telemetry is not None:
        telemetry(telemetry_record(step, state, report, **extra))


def run_ld4(
    particle: ParticleProps,
    z0,
    u0,
    F_ext: ExternalField,
    tau_end: float,
    *,
    mode: str = REDUCED,
    a0=None,
    tau_start: float = 0.0,
    h0: float = 1e-2,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    h_max: float = np.inf,
    runaway_factor: float = 1e6,
    max_steps: int = 1_000_000,
    telemetry: Callable[[dict], None] | None = None,
) -> Run:
    """Integrate a 4D massive charge from ``tau_start`` to ``tau_end``.

    A runaway in direct mode ends the run early with ``verdict`` set; the
    growth rate is fitted on the recorded acceleration history.
    """
    e, m = particle.charge, particle.mass
    mode = _mode(mode)
    u0 = _normalize(np.asarray(u0, dtype=float))
    z0 = np.asarray(z0, dtype=float)
    if mode == DIRECT and a0 is None:
        raise ValueError("direct mode needs an initial acceleration")
    a_init = ll_acceleration(e, m, F_ext, z0, u0) if a0 is None else np.asarray(a0, dtype=float)
    a_init = a_init + _dot(a_init, u0) * u0
    state = ParticleState(tau_start, z0, u0, a_init, h=h0)
    state.p_start = m * state.u - (2.0 / 3.0) * e**2 * state.a
    w = Worldline(4, particle)
    w.append(state.tau, state.z, state.u, state.a)
    f0 = _force(e, F_ext, z0, u0)
    ref = max(np.sqrt(abs(_dot(a_init, a_init))), np.linalg.norm(f0) / m, 1e-300)
    reports = []
    verdict = None
    for step in range(max_steps):
        if state.tau >= tau_end:
            break
        h = min(state.h, tau_end - state.tau)
        try:
            state, rep = lorentz_dirac_step(state, e, m, F_ext, h, mode, rtol=rtol, atol=atol, h_max=h_max, runaway_factor=runaway_factor, a_reference=ref)
        except RunawayError as exc:
            verdict = exc.verdict
            if getattr(exc, "state", None) is not None:
                state, rep = exc.state, exc.report
                w.append(state.tau, state.z, state.u, state.a)
                reports.append(rep)
                _emit(telemetry, step, state, rep, verdict="runaway")
            acc = np.sqrt(np.abs(np.einsum("ij,ij->i", w.a @ metric(4), w.a)))
            rate, efold = fit_growth(w.tau, acc)
            verdict.growth_rate, verdict.e_folding_time = rate, efold
            break
        w.append(state.tau, state.z, state.u, state.a)
        reports.append(rep)
        _emit(telemetry, step, state, rep)
    return Run(worldline=w.freeze(), reports=reports, state=state, verdict=verdict)


# -- 6D higher-derivative equation -------------------------------------------------


def particle_momentum_6d(pt, e: float, m: float, mu: float) -> np.ndarray:
    """Renormalised 6D particle momentum."""
    u, a, da, dda = (np.asarray(v, dtype=float) for v in (pt.u, pt.a, pt.da, pt.dda))
    A = _dot(a, a)
    dA = 2.0 * _dot(a, da)
    return m * u + mu * (-da + 1.5 * A * u) + e**2 * (0.8 * dda - 1.6 * dA * u - (64 / 35) * A * a)


def _sixd_rate_vec(e, u, a, da):
    c1, c2, c3, c4 = SIXD_P
    A = _dot(a, a)
    return e**2 * (c1 * _dot(da, da) * u + c2 * A * da + c3 * a * (2.0 * _dot(a, da)) + c4 * A**2 * u)


def sixd_highest(e, m, mu, f, u, a, da, dda):
    """Solve the 6D equation for its highest derivative.

    With ``e != 0`` returns ``d(dda)/dtau``; in the rigid case ``e = 0`` the
    equation is second order in ``a`` and the return value is ``dda`` itself.
    """
    A = _dot(a, a)
    dA = 2.0 * _dot(a, da)
    if e == 0.0:
        if mu == 0.0:
            raise ValueError("6D equation needs e != 0 or mu != 0")
        return (m * a + 1.5 * mu * (dA * u + A * a) - f) / mu
    ddA = 2.0 * (_dot(da, da) + _dot(a, dda))
    rhs = (
        f
        - _sixd_rate_vec(e, u, a, da)
        - m * a
        - mu * (-dda + 1.5 * dA * u + 1.5 * A * a)
        + e**2 * (1.6 * (ddA * u + dA * a) + (64 / 35) * (dA * a + A * da))
    )
    return rhs / (0.8 * e**2)


def _project_chain(u, a, da, dda):
    """Restore the constraints implied by ``u.u = -1`` along the chain."""
    u = _normalize(u)
    a = a + _dot(a, u) * u
    A = _dot(a, a)
    da = da + (_dot(da, u) + A) * u
    if dda is not None:
        dda = dda + (_dot(dda, u) + 3.0 * _dot(a, da)) * u
    return u, a, da, dda


def sixd_step(
    state: ParticleState,
    e: float,
    m: float,
    mu: float,
    F_ext: ExternalField,
    h: float | None = None,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    h_max: float = np.inf,
    runaway_factor: float = 1e6,
    a_reference: float = 1.0,
):
    """One adaptive step of the 6D equation; returns ``(state, report)``.

    The state is the chain ``(z, u, a, da, dda)``.  For ``e = 0`` (rigid
    particle) ``dda`` is slaved to the lower derivatives.
    """
    d = state.dim
    if d != 6:
        raise ValueError("sixd_step integrates 6D particles")
    rigid = e == 0.0
    if state.da is None:
        state = replace(state, da=np.zeros(d))
    if state.dda is None:
        state = replace(state, dda=np.zeros(d))
    if rigid:
        f0 = _force(e, F_ext, state.z, state.u)
        state = replace(state, dda=sixd_highest(e, m, mu, f0, state.u, state.a, state.da, None))
    if state.p_start is None:
        state = replace(state, p_start=particle_momentum_6d(state, e, m, mu))

    def rhs(t, y):
        z, u, a, da = (y[i * d : (i + 1) * d] for i in range(4))
        f = _force(e, F_ext, z, u)
        if rigid:
            dda = sixd_highest(e, m, mu, f, u, a, da, None)
            tail = [dda]
            rate = np.zeros(d)
        else:
            dda = y[4 * d : 5 * d]
            tail = [dda, sixd_highest(e, m, mu, f, u, a, da, dda)]
            rate = _sixd_rate_vec(e, u, a, da)
        return np.concatenate([u, a, da] + tail + [rate, f])

    chain = [state.z, state.u, state.a, state.da] + ([] if rigid else [state.dda])
    y0 = np.concatenate(chain + [state.p_rad, state.work])
    dp = DormandPrince(rhs, rtol, atol, h_max=h_max)
    dp._err_prev = state.err_prev
    try:
        res = dp.step(state.tau, y0, state.h if h is None else h)
    except StepSizeUnderflowError as exc:
        verdict = RunawayVerdict(state.tau, float(np.sqrt(abs(_dot(state.a, state.a)))), np.nan, np.nan, None, "step-size underflow")
        raise RunawayError(str(exc), verdict) from exc
    y = res.y
    n = len(chain)
    parts = [y[i * d : (i + 1) * d] for i in range(n)]
    z, u_raw, a, da = parts[:4]
    raw_norm = abs(_dot(u_raw, u_raw) + 1.0)
    u, a, da, dda = _project_chain(u_raw, a, da, None if rigid else parts[4])
    f = _force(e, F_ext, z, u)
    if rigid:
        dda = sixd_highest(e, m, mu, f, u, a, da, None)
    new = replace(
        state,
        tau=res.t,
        z=z,
        u=u,
        a=a,
        da=da,
        dda=dda,
        p_rad=y[n * d : (n + 1) * d].copy(),
        work=y[(n + 1) * d : (n + 2) * d].copy(),
        h=res.h_next,
        err_prev=dp._err_prev,
    )
    p = particle_momentum_6d(new, e, m, mu)
    # pointwise balance with dp_part/dtau assembled from the chain
    A = _dot(a, a)
    dA = 2.0 * _dot(a, da)
    if rigid:
        pdot = m * a + mu * (-dda + 1.5 * dA * u + 1.5 * A * a)
    else:
        ddda = sixd_highest(e, m, mu, f, u, a, da, dda)
        ddA = 2.0 * (_dot(da, da) + _dot(a, dda))
        pdot = m * a + mu * (-dda + 1.5 * dA * u + 1.5 * A * a) + e**2 * (0.8 * ddda - 1.6 * (ddA * u + dA * a) - (64 / 35) * (dA * a + A * da))
    rate = np.zeros(d) if rigid else _sixd_rate_vec(e, u, a, da)
    report = BalanceReport(
        tau=new.tau,
        em_residual=pdot + rate - f,
        am_residual=np.zeros((d, d)),
        mass_drift=abs(-_dot(p, u) - m),
        velocity_norm_drift=raw_norm,
        em_balance=p - new.p_start + new.p_rad - new.work,
        p_part=p,
        h=res.h,
    )
    acc = np.sqrt(abs(A))
    if acc > runaway_factor * a_reference or u[0] > LORENTZ_CAP:
        verdict = RunawayVerdict(new.tau, acc, np.nan, np.nan, None, "acceleration growth")
        err = RunawayError(f"6D runaway at tau={new.tau:.6g}: |a| grew to {acc:.3e}", verdict)
        err.state, err.report = new, report
        raise err
    return new, report


def run_sixd(
    particle: ParticleProps,
    z0,
    u0,
    F_ext: ExternalField,
    tau_end: float,
    *,
    a0=None,
    da0=None,
    dda0=None,
    h0: float = 1e-2,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    h_max: float = np.inf,
    runaway_factor: float = 1e6,
    max_steps: int = 1_000_000,
    telemetry: Callable[[dict], None] | None = None,
) -> Run:
    """Integrate a 6D charge; unspecified derivatives of the chain start at zero."""
    d = 6
    e, m, mu = particle.charge, particle.mass, particle.mu
    zeros = np.zeros(d)
    u, a, da, dda = _project_chain(
        np.asarray(u0, dtype=float),
        zeros if a0 is None else np.asarray(a0, dtype=float),
        zeros if da0 is None else np.asarray(da0, dtype=float),
        zeros if dda0 is None else np.asarray(dda0, dtype=float),
    )
    state = ParticleState(0.0, np.asarray(z0, dtype=float), u, a, da, dda, h=h0)
    f0 = _force(e, F_ext, state.z, u)
    ref = max(np.sqrt(abs(_dot(a, a))), np.linalg.norm(f0) / m, 1e-12)
    w = Worldline(d, particle, chain=True)
    reports, verdict = [], None
    first = True
    for step in range(max_steps):
        if state.tau >= tau_end:
            break
        try:
            state, rep = sixd_step(state, e, m, mu, F_ext, min(state.h, tau_end - state.tau), rtol=rtol, atol=atol, h_max=h_max, runaway_factor=runaway_factor, a_reference=ref)
        except RunawayError as exc:
            verdict = exc.verdict
            if getattr(exc, "state", None) is not None:
                state, rep = exc.state, exc.report
                w.append(state.tau, state.z, state.u, state.a, state.da, state.dda)
                reports.append(rep)
            acc = np.sqrt(np.abs(np.einsum("ij,ij->i", w.a @ metric(d), w.a))) if len(w) else np.array([])
            if len(w) > 3:
                verdict.growth_rate, verdict.e_folding_time = fit_growth(w.tau, acc)
            break
        if first:
            # knot at tau=0 with the (possibly slaved) initial chain
            s0 = ParticleState(0.0, np.asarray(z0, dtype=float), u, a, da, dda if e != 0 else sixd_highest(e, m, mu, f0, u, a, da, None))
            w.append(s0.tau, s0.z, s0.u, s0.a, s0.da, s0.dda)
            first = False
        w.append(state.tau, state.z, state.u, state.a, state.da, state.dda)
        reports.append(rep)
        _emit(telemetry, step, state, rep)
    return Run(worldline=w.freeze(), reports=reports, state=state, verdict=verdict)


# -- massless charges ------------------------------------------------------------------


@dataclass
class NullEigensystem:
    """Real eigenvalues of ``F^mu_nu`` with null eigenvectors (``v^0 = 1``), descending."""

    pairs: list
    degenerate: bool = False

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


def _null_directions(basis: np.ndarray, tol: float) -> list:
    """Null vectors inside the span of the (orthonormal, Euclidean) columns of ``basis``."""
    eta = metric(basis.shape[0])
    Q = basis.T @ eta @ basis
    n = basis.shape[1]
    if n == 1:
        return [basis[:, 0]] if abs(Q[0, 0]) <= tol else []
    q, V = np.linalg.eigh(Q)
    out = []
    if n == 2:
        lo, hi = q
        if lo < -tol and hi > tol:
            for sign in (1.0, -1.0):
                c = V[:, 0] * np.sqrt(hi) + sign * V[:, 1] * np.sqrt(-lo)
                out.append(basis @ c)
        elif abs(lo) <= tol and hi > tol:
            out.append(basis @ V[:, 0])
        elif abs(hi) <= tol and lo < -tol:
            out.append(basis @ V[:, 1])
    return out


def find_null_eigenvectors(F, tol: float = EIG_TOL) -> NullEigensystem:
    """Real eigenpairs of ``F^mu_nu`` whose eigenvector is null.

    ``F`` is an all-lower antisymmetric 4D tensor.  Candidate eigenvalues come
    from the field invariants; eigenspaces from an SVD null space.  A zero
    field returns ``degenerate=True`` with no pairs.
    """
    F = np.asarray(F, dtype=float)
    if F.shape != (4, 4):
        raise ValueError("find_null_eigenvectors expects a 4x4 field tensor")
    scale = float(np.max(np.abs(F)))
    if scale == 0.0:
        return NullEigensystem([], degenerate=True)
    M = raise_first(F) / scale
    Fn = F / scale
    E = -Fn[0, 1:]
    B = np.array([Fn[2, 3], Fn[3, 1], Fn[1, 2]])
    diff = E @ E - B @ B
    eb = E @ B
    root = np.hypot(diff, 2.0 * eb)
    lam_r = np.sqrt(max(0.0, 0.5 * (diff + root)))
    lam_i = np.sqrt(max(0.0, 0.5 * (-diff + root)))
    candidates = [lam_r, -lam_r] if lam_r > tol else []
    if lam_i <= tol or lam_r <= tol:
        candidates.append(0.0)
    pairs = []
    for lam in candidates:
        _, s, Vt = np.linalg.svd(M - lam * np.eye(4))
        kernel = Vt[s <= max(tol, 1e-8) * max(1.0, s[0])].T
        if kernel.shape[1] == 0:
            kernel = Vt[-1:].T
        for v in _null_directions(kernel, 1e-8):
            if abs(v[0]) < 1e-12:
                continue
            v = v / v[0]
            resid = np.linalg.norm(M @ v - lam * v) / np.linalg.norm(v)
            if resid <= max(tol, 1e-8) * 10:
                pairs.append((float(lam * scale), v))
    pairs.sort(key=lambda p: -p[0])
    return NullEigensystem(pairs)


@dataclass
class MasslessState:
    """Null worldline parametrised by laboratory time: ``u = (1, v)`` with ``|v| = 1``."""

    t: float
    z: np.ndarray
    v: np.ndarray
    e: float = 1.0

    def __post_init__(self):
        self.z = np.array(self.z, dtype=float)
        self.v = np.array(self.v, dtype=float)
        n = np.linalg.norm(self.v)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("massless velocity must be a unit 3-vector")

    @property
    def u(self) -> np.ndarray:
        return np.concatenate([[1.0], self.v])


@dataclass
class MasslessReport:
    t: float
    admissible: bool
    eigenvalue: float
    residual: float
    eigensystem: NullEigensystem | None = None
    multiplier_rate: float = 0.0

    def as_dict(self) -> dict:
        d = {
            "t": self.t,
            "admissible": self.admissible,
            "eigenvalue": self.eigenvalue,
            "residual": self.residual,
            "multiplier_rate": self.multiplier_rate,
        }
        if self.eigensystem is not None:
            d["degenerate_field"] = self.eigensystem.degenerate
            d["null_eigenpairs"] = [{"lambda": lam, "v": v.tolist()} for lam, v in self.eigensystem]
        return d


def admissibility(F, u, q: float = 1.0, t: float = 0.0, tol: float = EIG_TOL) -> MasslessReport:
    """Is ``u`` a real null eigenvector of ``F^mu_nu``, to ``||F u - lam u|| / ||F|| <= tol``."""
    F = np.asarray(F, dtype=float)
    norm = float(np.linalg.norm(F))
    if norm == 0.0:
        return MasslessReport(t, True, 0.0, 0.0, NullEigensystem([], degenerate=True), 0.0)
    w = raise_first(F) @ u
    lam = float(w[0] / u[0])
    resid = float(np.linalg.norm(w - lam * u) / (norm * np.linalg.norm(u)))
    ok = resid <= tol
    system = None if ok else find_null_eigenvectors(F)
    return MasslessReport(t, ok, lam, resid, system, q * lam if ok else 0.0)


def massless_step(state: MasslessState, q: float, F_ext: ExternalField, h: float, *, tol: float = EIG_TOL):
    """Advance a massless charge by laboratory time ``h``; returns ``(state, report)``.

    The velocity is frozen and the multiplier follows ``de/dt = q lam(z(t))``
    (five-point Gauss-Legendre along the straight segment).  If ``u`` is not a
    null eigenvector at either end of the segment, the state is returned
    unchanged with ``admissible=False``.
    """
    u = state.u
    start = admissibility(F_ext(state.z), u, q, state.t, tol)
    if not start.admissible:
        return state, start
    x, wq = np.polynomial.legendre.leggauss(5)
    lam = []
    for xi in x:
        rep = admissibility(F_ext(state.z + 0.5 * h * (xi + 1.0) * u), u, q, state.t, tol)
        if not rep.admissible:
            return state, rep
        lam.append(rep.eigenvalue)
    end = admissibility(F_ext(state.z + h * u), u, q, state.t + h, tol)
    if not end.admissible:
        return state, end
    de = q * 0.5 * h * float(np.dot(wq, lam))
    new = MasslessState(state.t + h, state.z + h * u, state.v, state.e + de)
    return new, end


@dataclass
class MasslessRun:
    states: list
    reports: list
    admissible: bool

    def multipliers(self) -> np.ndarray:
        return np.array([s.e for s in self.states])

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def worldline(self, particle: ParticleProps) -> Worldline:
        n = len(self.states)
        z = np.array([s.z for s in self.states])
        u = np.array([s.u for s in self.states])
        return Worldline.from_arrays(self.times(), z, u, np.zeros((n, 4)), particle)


def run_massless(particle: ParticleProps, z0, v0, F_ext: ExternalField, t_end: float, h: float, *, t0: float = 0.0, telemetry=None) -> MasslessRun:
    """Step a massless charge until ``t_end`` or the first inadmissible point."""
    state = MasslessState(t0, np.asarray(z0, dtype=float), np.asarray(v0, dtype=float), particle.lagrange_multiplier_e0)
    states, reports = [state], []
    step = 0
    while state.t < t_end - 1e-15:
        hh = min(h, t_end - state.t)
        state, rep = massless_step(state, particle.charge, F_ext, hh)
        reports.append(rep)
        if telemetry is not None:
            telemetry({"step": step, "t": state.t, "z": state.z.tolist(), "e": state.e, **rep.as_dict()})
        if not rep.admissible:
            return MasslessRun(states, reports, False)
        states.append(state)
        step += 1
    return MasslessRun(states, reports, True)


# -- two charges -------------------------------------------------------------------

_PACK = 17  # z(4) u(4) tau(1) p_rad(4) work(4)


@dataclass
class TwoChargeSystem:
    """Two 4D charges advanced together in laboratory time."""

    props: tuple
    worldlines: list
    t: float
    y: np.ndarray
    p_start: list
    h: float = 1e-2
    err_prev: float = 1e-4
    rtol: float = 1e-10
    atol: float = 1e-12
    audit: list = field(default_factory=list)

    def particle(self, i: int) -> dict:
        blk = self.y[i * _PACK : (i + 1) * _PACK]
        return {"z": blk[0:4], "u": blk[4:8], "tau": blk[8], "p_rad": blk[9:13], "work": blk[13:17]}

    def separation(self) -> float:
        return float(np.linalg.norm(self.particle(0)["z"][1:] - self.particle(1)["z"][1:]))


def _mutual_kinematics(props, worldlines, i, z, u, want_jerk=False):
    """Force on ``i`` from the other charge and the order-reduced acceleration."""
    pa = props[i]
    wb = worldlines[1 - i]
    e, m = pa.charge, pa.mass
    if e == 0.0 or wb.particle.charge == 0.0:
        zero = np.zeros(4)
        return zero, zero, (zero if want_jerk else None)
    sep = float(np.linalg.norm(z[1:] - wb.z[-1, 1:]))
    eps = 1e-4 * max(sep, 1e-3)

    def ll(zz, uu):
        P = np.array([zz, zz + eps * uu, zz - eps * uu])
        f_all, _ = lw_fields_4d(wb, P)
        M = raise_first(f_all)
        f = e * (M[0] @ uu)
        tau0 = 2.0 * e**2 / (3.0 * m)
        dM = (M[1] - M[2]) / (2.0 * eps)
        fdot = e * (dM @ uu + M[0] @ f / m)
        return f, f / m + tau0 * (fdot / m - _dot(f, f) / m**2 * uu)

    f, a = ll(z, u)
    jerk = None
    if want_jerk:
        s = 1e-4
        _, ap = ll(z + s * u, u + s * a)
        _, am = ll(z - s * u, u - s * a)
        jerk = (ap - am) / (2.0 * s)
    return f, a, jerk


def two_charge_system(
    props,
    z0,
    u0,
    *,
    t0: float = 0.0,
    prehistory: float = 20.0,
    prehistory_knots: int = 16,
    h0: float = 1e-2,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> TwoChargeSystem:
    """Set up two charges at laboratory time ``t0`` with inertial pre-histories.

    Each charge is given a straight-line past of laboratory length
    ``prehistory`` so that retarded times exist from the first step.
    """
    props = tuple(props)
    wls = []
    zs, us = [], []
    for p, z, u in zip(props, z0, u0):
        p.check_dim(4)
        z = np.asarray(z, dtype=float).copy()
        z[0] = t0
        u = _normalize(np.asarray(u, dtype=float))
        w = Worldline(4, p)
        dtau = prehistory / u[0]
        for s in np.linspace(-dtau, 0.0, prehistory_knots, endpoint=False):
            w.append(s, z + s * u, u, np.zeros(4))
        wls.append(w)
        zs.append(z)
        us.append(u)
    y = np.zeros(2 * _PACK)
    p_start = []
    for i in range(2):
        _, a, _ = _mutual_kinematics(props, wls, i, zs[i], us[i])
        wls[i].append(0.0, zs[i], us[i], a)
        y[i * _PACK : i * _PACK + 4] = zs[i]
        y[i * _PACK + 4 : i * _PACK + 8] = us[i]
        p_start.append(props[i].mass * us[i] - (2.0 / 3.0) * props[i].charge ** 2 * a)
    return TwoChargeSystem(props, wls, t0, y, p_start, h=h0, rtol=rtol, atol=atol)


def two_charge_step(system: TwoChargeSystem, h: float | None = None, *, max_fraction: float = 0.5):
    """Advance both charges one shared laboratory-time step.

    Forces use only the stored histories, so the step is capped at
    ``max_fraction`` of the current separation.  Returns
    ``(system, [report_a, report_b], audit)`` where ``audit`` is the summed
    integrated balance of both particles.
    """
    props, wls = system.props, system.worldlines

    def rhs(t, Y):
        out = np.empty_like(Y)
        for i in range(2):
            blk = Y[i * _PACK : (i + 1) * _PACK]
            z, u = blk[0:4], blk[4:8]
            f, a, _ = _mutual_kinematics(props, wls, i, z, u)
            e = props[i].charge
            out[i * _PACK : (i + 1) * _PACK] = np.concatenate(
                [u / u[0], a / u[0], [1.0 / u[0]], (2.0 / 3.0) * e**2 * _dot(a, a) * u / u[0], f / u[0]]
            )
        return out

    def project(Y):
        Y = Y.copy()
        for i in range(2):
            sl = slice(i * _PACK + 4, i * _PACK + 8)
            Y[sl] = _normalize(Y[sl])
        return Y

    cap = max_fraction * system.separation()
    dp = DormandPrince(rhs, system.rtol, system.atol, h_max=cap)
    dp._err_prev = system.err_prev
    trial = system.h if h is None else h
    res = dp.step(system.t, system.y, min(trial, cap))
    raw = [abs(_dot(res.y[i * _PACK + 4 : i * _PACK + 8], res.y[i * _PACK + 4 : i * _PACK + 8]) + 1.0) for i in range(2)]
    Y = project(res.y)
    system.t, system.y, system.h, system.err_prev = res.t, Y, res.h_next, dp._err_prev

    reports = []
    kin = []
    for i in range(2):
        blk = system.particle(i)
        f, a, jerk = _mutual_kinematics(props, wls, i, blk["z"], blk["u"], want_jerk=True)
        kin.append((blk, a))
        e, m = props[i].charge, props[i].mass
        c = (2.0 / 3.0) * e**2
        u = blk["u"]
        p = m * u - c * a
        reports.append(
            BalanceReport(
                tau=float(blk["tau"]),
                em_residual=m * a - c * jerk + c * _dot(a, a) * u - f,
                am_residual=wedge(u, p) + c * wedge(u, a),
                mass_drift=abs(-_dot(p, u) - m),
                velocity_norm_drift=raw[i],
                em_balance=p - system.p_start[i] + blk["p_rad"] - blk["work"],
                p_part=p,
                h=res.h,
            )
        )
    for i, (blk, a) in enumerate(kin):
        wls[i].append(float(blk["tau"]), blk["z"].copy(), blk["u"].copy(), a)
    audit = reports[0].em_balance + reports[1].em_balance
    system.audit.append(audit)
    return system, reports, audit


@dataclass
class TwoChargeRun:
    system: TwoChargeSystem
    reports: list
    audit: np.ndarray

    @property
    def worldlines(self):
        return self.system.worldlines

    def max_norms(self) -> dict:
        out: dict = {}
        for pair in self.reports:
            for rep in pair:
                for k, v in rep.norms().items():
                    out[k] = max(out.get(k, 0.0), v)
        out["audit"] = float(np.max(np.abs(self.audit))) if len(self.audit) else 0.0
        return out


def run_two_charge(
    props,
    z0,
    u0,
    t_end: float,
    *,
    t0: float = 0.0,
    prehistory: float = 20.0,
    h0: float = 1e-2,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_steps: int = 1_000_000,
    telemetry=None,
) -> TwoChargeRun:
    """Integrate two mutually coupled charges from ``t0`` to ``t_end`` (laboratory time)."""
    system = two_charge_system(props, z0, u0, t0=t0, prehistory=prehistory, h0=h0, rtol=rtol, atol=atol)
    reports, audits = [], []
    for step in range(max_steps):
        if system.t >= t_end - 1e-14:
            break
        system, reps, audit = two_charge_step(system, min(system.h, t_end - system.t))
        reports.append(reps)
        audits.append(audit)
        if telemetry is not None:
            telemetry(
                {
                    "step": step,
                    "t": system.t,
                    "h": reps[0].h,
                    "particles": [
                        {"z": system.particle(i)["z"].tolist(), "u": system.particle(i)["u"].tolist(), "residuals": reps[i].norms()}
                        for i in range(2)
                    ],
                    "audit": np.asarray(audit).tolist(),
                }
            )
    for w in system.worldlines:
        w.freeze()
    return TwoChargeRun(system, reports, np.array(audits))


__all__ = [
    "BalanceReport",
    "ExternalField",
    "JsonlTelemetry",
    "MasslessReport",
    "MasslessState",
    "NullEigensystem",
    "ParticleState",
    "Run",
    "RunawayVerdict",
    "TwoChargeSystem",
    "admissibility",
    "find_null_eigenvectors",
    "fit_growth",
    "ll_acceleration",
    "lorentz_dirac_step",
    "massless_step",
    "particle_momentum_4d",
    "particle_momentum_6d",
    "run_ld4",
    "run_massless",
    "run_sixd",
    "run_two_charge",
    "sixd_highest",
    "sixd_step",
    "two_charge_step",
    "two_charge_system",
]

