"""Radiated energy-momentum: rates, worldline integrals and sphere fluxes.

Single-charge rates (4D Larmor, 6D momentum and angular-momentum) are local in
the worldline data and vectorise over leading axes.  Flux checks integrate the
stress-energy tensor of retarded fields through large spheres, or over the
wavefront chart of a massless charge.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from radreact.errors import HistoryTooShortError
from radreact.fields import interference_stress_energy, lw_fields_4d, stress_energy
from radreact.geom import apply_tensor, minkowski_dot, wedge
from radreact.worldline import Worldline, chart_frame

# 6D radiated-momentum coefficients: (da.da) u, (a.a) da, a d(a.a)/dtau, (a.a)^2 u
SIXD_P = (4 / 5, -6 / 35, 3 / 7, 2.0)
# intrinsic angular-momentum coefficients: a ^ da, (a.a) u ^ a
SIXD_M = (4 / 5, 64 / 35)


@dataclass
class Kinematics:
    """Batch of worldline data; duck-types with :class:`WorldlinePoint`."""

    tau: np.ndarray
    z: np.ndarray
    u: np.ndarray
    a: np.ndarray
    da: np.ndarray | None = None


@dataclass
class Quadrature:
    total: np.ndarray
    error: np.ndarray
    cumulative: np.ndarray
    knots: np.ndarray


@dataclass
class RadiatedTotals:
    p_rad: np.ndarray | None = None
    M_rad: np.ndarray | None = None
    p_int: np.ndarray | None = None
    work_mutual: list = field(default_factory=list)
    error: dict = field(default_factory=dict)


def _dot(v, w):
    return np.atleast_1d(minkowski_dot(v, w))[..., None] if np.ndim(v) > 1 else minkowski_dot(v, w)


def larmor_rate_4d(pt, e: float) -> np.ndarray:
    """Radiated 4-momentum per unit proper time, ``(2/3) e^2 (a.a) u``."""
    a = np.asarray(pt.a, dtype=float)
    return (2.0 / 3.0) * e**2 * _dot(a, a) * np.asarray(pt.u, dtype=float)


def _need_jerk(pt):
    if getattr(pt, "da", None) is None:
        raise ValueError("6D rates need the jerk da = d(a)/dtau")


def sixd_rate(pt, e: float) -> np.ndarray:
    """6D radiated 6-momentum per unit proper time (the integrand ``e^2 P``)."""
    _need_jerk(pt)
    u, a, da = (np.asarray(v, dtype=float) for v in (pt.u, pt.a, pt.da))
    aa = _dot(a, a)
    c1, c2, c3, c4 = SIXD_P
    return e**2 * (c1 * _dot(da, da) * u + c2 * aa * da + c3 * a * (2.0 * _dot(a, da)) + c4 * aa**2 * u)


def sixd_angular_rate(pt, e: float) -> np.ndarray:
    """6D radiated angular momentum per unit proper time (orbital + intrinsic)."""
    _need_jerk(pt)
    z, u, a, da = (np.asarray(v, dtype=float) for v in (pt.z, pt.u, pt.a, pt.da))
    aa = _dot(a, a)
    m1, m2 = SIXD_M
    orbital = wedge(z, sixd_rate(pt, e))
    intrinsic = m1 * wedge(a, da) + m2 * aa[..., None] * wedge(u, a) if np.ndim(aa) else m1 * wedge(a, da) + m2 * aa * wedge(u, a)
    return orbital + e**2 * intrinsic


def knot_kinematics(w: Worldline, tau) -> Kinematics:
    tau = np.asarray(tau, dtype=float)
    if w.chain:
        z, u, a, da = w.evaluate(tau, with_chain=True)
    else:
        z, u, a = w.evaluate(tau)
        da = None
    return Kinematics(tau, z, u, a, da)


def _simpson_panels(w: Worldline, rate_op, tau):
    mid = 0.5 * (tau[:-1] + tau[1:])
    q1 = 0.5 * (tau[:-1] + mid)
    q3 = 0.5 * (mid + tau[1:])
    f = {}
    for name, pts in (("k", tau), ("m", mid), ("q1", q1), ("q3", q3)):
        vals = np.asarray(rate_op(knot_kinematics(w, pts)))
        if not np.all(np.isfinite(vals)):
            raise ArithmeticError("non-finite radiation rate on the worldline")
        f[name] = vals
    h = np.diff(tau).reshape((-1,) + (1,) * (f["k"].ndim - 1))
    coarse = h / 6.0 * (f["k"][:-1] + 4.0 * f["m"] + f["k"][1:])
    fine = h / 12.0 * (f["k"][:-1] + 4.0 * f["q1"] + 2.0 * f["m"] + 4.0 * f["q3"] + f["k"][1:])
    return fine + (fine - coarse) / 15.0, np.abs(fine - coarse) / 15.0


def accumulate(w: Worldline, rate_op, tau_end: float | None = None) -> Quadrature:
    """Integrate ``rate_op`` over the stored history by composite Simpson on the knots.

    Each knot interval is integrated with one and with two Simpson panels; the
    Richardson-extrapolated sum is returned together with ``sum |S2 - S1| / 15``
    as the error estimate.  ``rate_op`` receives a :class:`Kinematics` batch.
    """
    tau = w.tau
    if tau_end is not None:
        tau = np.append(tau[tau < tau_end], tau_end)
    panels, err = _simpson_panels(w, rate_op, tau)
    cumulative = np.concatenate([np.zeros((1,) + panels.shape[1:]), np.cumsum(panels, axis=0)])
    return Quadrature(total=cumulative[-1], error=np.sum(err, axis=0), cumulative=cumulative, knots=tau)


def radiated_totals(w: Worldline) -> RadiatedTotals:
    """Accumulated radiated momentum (and 6D angular momentum) over the stored history."""
    e = w.particle.charge
    if w.dim == 4:
        q = accumulate(w, lambda k: larmor_rate_4d(k, e))
        return RadiatedTotals(p_rad=q.total, error={"p_rad": q.error})
    qp = accumulate(w, lambda k: sixd_rate(k, e))
    qm = accumulate(w, lambda k: sixd_angular_rate(k, e))
    return RadiatedTotals(p_rad=qp.total, M_rad=qm.total, error={"p_rad": qp.error, "M_rad": qm.error})


# -- two charges -------------------------------------------------------------


def lorentz_force_from(wb: Worldline, z, u, charge: float) -> np.ndarray:
    """Force ``charge * f_b^mu_nu u^nu`` from the retarded field of ``wb`` (batched)."""
    z = np.atleast_2d(z)
    f, _ = lw_fields_4d(wb, z)
    return charge * apply_tensor(f, np.atleast_2d(u))


def mutual_force(wa: Worldline, wb: Worldline, tau_a: float) -> np.ndarray:
    """Lorentz force exerted on particle ``a`` at ``tau_a`` by the field of ``b``."""
    pt = wa.interpolate(tau_a)
    try:
        return lorentz_force_from(wb, pt.z, pt.u, wa.particle.charge)[0]
    except HistoryTooShortError as exc:
        raise HistoryTooShortError(f"history of the source is too short at tau_a={tau_a}: {exc}") from exc


def mutual_work(wa: Worldline, wb: Worldline, tau_end: float | None = None) -> Quadrature:
    """``int F_ba dtau_a`` over the history of ``a`` (the field of ``b`` acting on ``a``)."""
    e = wa.particle.charge
    return accumulate(wa, lambda k: lorentz_force_from(wb, k.z, k.u, e), tau_end=tau_end)


def sphere_nodes(n_theta: int, n_phi: int):
    """Gauss-Legendre product rule on the unit sphere: ``(nhat, weights)``."""
    xc, wc = np.polynomial.legendre.leggauss(n_theta)
    xp, wp = np.polynomial.legendre.leggauss(n_phi)
    phi = np.pi * (xp + 1.0)
    wp = np.pi * wp
    ct, ph = np.meshgrid(xc, phi, indexing="ij")
    st = np.sqrt(1.0 - ct**2)
    nhat = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
    weights = (wc[:, None] * wp[None, :]).ravel()
    return nhat, weights


def sphere_flux(worldlines, t: float, R: float, n_theta: int = 64, n_phi: int = 128, *, center=None, interference: bool = False) -> np.ndarray:
    """Outward 4-momentum flux ``dp^nu/dt`` through the sphere of radius ``R`` at time ``t``.

    With one worldline the full stress-energy of its field is used; with two and
    ``interference=True`` only the interference tensor of the pair.
    """
    nhat, wts = sphere_nodes(n_theta, n_phi)
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    Y = np.empty((len(nhat), 4))
    Y[:, 0] = t
    Y[:, 1:] = c + R * nhat
    fs = [lw_fields_4d(w, Y)[0] for w in worldlines]
    if interference:
        if len(fs) != 2:
            raise ValueError("interference flux needs exactly two worldlines")
        T = interference_stress_energy(fs[0], fs[1])
    else:
        T = stress_energy(sum(fs))
    # dp^nu/dt = \oint T^{i nu} n_i dS
    flux_density = np.einsum("ni,niv->nv", nhat, T[:, 1:, :])
    return R**2 * np.einsum("n,nv->v", wts, flux_density)


# -- flux checks -------------------------------------------------------------


@dataclass
class FluxCheck:
    flux: np.ndarray
    work: np.ndarray
    flux_error: np.ndarray
    work_error: np.ndarray
    window: tuple

    @property
    def discrepancy(self) -> float:
        """Relative mismatch of the time components."""
        return float(abs(self.flux[0] - self.work[0]) / max(abs(self.work[0]), 1e-300))


def _gl_panels(lo, hi, n_panels, order):
    x, wq = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wq[None, :]).ravel()
    return nodes, weights


def time_integrated_flux(worldlines, t_lo, t_hi, R, n_theta, n_phi, n_panels, order=6, *, interference=False):
    nodes, weights = _gl_panels(t_lo, t_hi, n_panels, order)
    vals = np.array([sphere_flux(worldlines, t, R, n_theta, n_phi, interference=interference) for t in nodes])
    return weights @ vals


def interference_flux_check(
    wa: Worldline,
    wb: Worldline,
    t: float,
    R_sphere: float,
    *,
    t_start: float | None = None,
    n_theta: int = 64,
    n_phi: int = 128,
    n_panels: int | None = None,
    panel_width: float = 1.0,
) -> FluxCheck:
    """Interference momentum escaping through a sphere vs the mutual Lorentz-force work.

    Emission is considered over the laboratory window ``[t_start, t]``; the
    interference flux through the sphere of radius ``R_sphere`` is integrated
    over the arrival window of that emission.  ``work`` is
    ``-sum_a int F_ba dtau_a`` over the emission window, so the two agree when
    the bound interference terms at the window ends coincide.  Error estimates
    compare against a half-resolution evaluation in angle and time.
    """
    if t_start is None:
        t_start = max(wa.z[0, 0], wb.z[0, 0])
    extent = max(np.max(np.linalg.norm(w.z[:, 1:], axis=-1)[(w.z[:, 0] >= t_start) & (w.z[:, 0] <= t)]) for w in (wa, wb))
    lo = t_start + R_sphere - extent
    hi = t + R_sphere + extent
    if n_panels is None:
        n_panels = max(8, int(np.ceil((hi - lo) / panel_width)))
    fine = time_integrated_flux((wa, wb), lo, hi, R_sphere, n_theta, n_phi, n_panels, interference=True)
    coarse = time_integrated_flux((wa, wb), lo, hi, R_sphere, n_theta // 2, n_phi // 2, n_panels // 2, interference=True)

    work = np.zeros(4)
    work_err = np.zeros(4)
    for a_line, b_line in ((wa, wb), (wb, wa)):
        tau_lo, tau_hi = _tau_window(a_line, t_start, t)
        q = _window_integral(a_line, lambda k, e=a_line.particle.charge, src=b_line: lorentz_force_from(src, k.z, k.u, e), tau_lo, tau_hi)
        work -= q.total
        work_err += q.error
    return FluxCheck(flux=fine, work=work, flux_error=np.abs(fine - coarse), work_error=work_err, window=(lo, hi))


def _tau_window(w: Worldline, t_lo: float, t_hi: float):
    taus = []
    for t_target in (t_lo, t_hi):
        j = np.searchsorted(w.z[:, 0], t_target)
        j = min(max(j, 1), len(w) - 1)
        lo_tau, hi_tau = w.tau[j - 1], w.tau[j]
        for _ in range(80):
            mid = 0.5 * (lo_tau + hi_tau)
            if w.lab_time_of(mid) < t_target:
                lo_tau = mid
            else:
                hi_tau = mid
        taus.append(0.5 * (lo_tau + hi_tau))
    return taus


def _window_integral(w: Worldline, rate_op, tau_lo: float, tau_hi: float) -> Quadrature:
    tau = w.tau
    inner = tau[(tau > tau_lo) & (tau < tau_hi)]
    grid = np.concatenate([[tau_lo], inner, [tau_hi]])
    panels, err = _simpson_panels(w, rate_op, grid)
    cumulative = np.concatenate([np.zeros((1,) + panels.shape[1:]), np.cumsum(panels, axis=0)])
    return Quadrature(total=cumulative[-1], error=np.sum(err, axis=0), cumulative=cumulative, knots=grid)


def emitted_energy_check(w: Worldline, t: float, R: float, n_theta: int = 64, n_phi: int = 128):
    """Sphere-flux power of a single charge at time ``t`` and radius ``R``."""
    return sphere_flux((w,), t, R, n_theta, n_phi)


# -- massless divergence scan -----------------------------------------------------------


@dataclass
class ScanRow:
    cutoff: float
    energy: float
    momentum: np.ndarray
    error_estimate: float


@dataclass
class DivergenceScan:
    rows: list
    no_divergence: bool = False

    def table(self) -> np.ndarray:
        return np.array([[r.cutoff, r.energy, *r.momentum, r.error_estimate] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cutoff", "energy", "px", "py", "pz", "error_estimate"])
            for row in self.table():
                writer.writerow([f"{v:.17g}" for v in row])


def _chart_integral(w: Worldline, t: float, theta_min: float, n_s: int, n_x: int, n_phi: int, s_lo: float, s_hi: float):
    """``int T^{0 nu} d^3x`` over the part of ``Sigma_t`` with polar angle > theta_min."""
    s_nodes, s_w = _gl_panels(s_lo, s_hi, max(1, n_s // 16), 16)
    x_min = 1.0 - np.cos(theta_min)
    xi, xw = np.polynomial.legendre.leggauss(n_x)
    lo, hi = np.log(x_min), np.log(2.0)
    xi = 0.5 * (hi - lo) * xi + 0.5 * (hi + lo)
    xw = 0.5 * (hi - lo) * xw
    x = np.exp(xi)
    # d(theta) sin(theta) = dx = x dxi
    xw = xw * x
    cos_t = 1.0 - x
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    pw = 2.0 * np.pi / n_phi

    z, u, _, rot = chart_frame(w, s_nodes)
    total = np.zeros(4)
    nloc = np.stack(
        [sin_t[:, None] * np.cos(phi)[None, :], sin_t[:, None] * np.sin(phi)[None, :], np.broadcast_to(cos_t[:, None], (n_x, n_phi))],
        axis=-1,
    ).reshape(-1, 3)
    ang_w = np.repeat(xw, n_phi) * pw
    for j in range(len(s_nodes)):
        lapse = t - z[j, 0]
        n_lab = nloc @ rot[j].T
        Y = np.empty((len(n_lab), 4))
        Y[:, 0] = t
        Y[:, 1:] = z[j, 1:] + lapse * n_lab
        f, batch = lw_fields_4d(w, Y, on_ray="nan")
        T = stress_energy(f)
        # Jacobian of (s, theta, phi) -> x on Sigma_t is lapse * r * sin(theta);
        # sin(theta) is absorbed in the x-substitution weights.
        jac = lapse * batch.r
        total += s_w[j] * np.einsum("n,nv->v", ang_w * jac, T[:, 0, :])
    return total


def massless_divergence_scan(
    w: Worldline,
    t: float,
    theta_min_list,
    *,
    n_s: int = 64,
    n_x: int = 48,
    n_phi: int = 32,
    s_range: tuple | None = None,
) -> DivergenceScan:
    """Field energy-momentum on ``Sigma_t`` outside cones of half-angle ``theta_min``.

    The cone is taken about the emission-time velocity of each wavefront.  The
    emission interval ``s_range`` defaults to the span of knots with nonzero
    acceleration before ``t``; the field vanishes off the forward ray
    elsewhere.  Error estimates compare with a half-resolution grid.
    """
    if not w.particle.massless:
        raise ValueError("divergence scan needs a massless worldline")
    before = w.tau < t
    active = before & np.any(w.a != 0.0, axis=1)
    if s_range is None and not np.any(active):
        rows = [ScanRow(float(c), 0.0, np.zeros(3), 0.0) for c in theta_min_list]
        return DivergenceScan(rows=rows, no_divergence=True)
    if s_range is None:
        idx = np.flatnonzero(active)
        s_lo = w.tau[max(idx[0] - 1, 0)]
        s_hi = min(w.tau[min(idx[-1] + 1, len(w) - 1)], t)
    else:
        s_lo, s_hi = s_range
    rows = []
    for cutoff in theta_min_list:
        fine = _chart_integral(w, t, cutoff, n_s, n_x, n_phi, s_lo, s_hi)
        coarse = _chart_integral(w, t, cutoff, max(16, n_s // 2), n_x // 2, n_phi // 2, s_lo, s_hi)
        rows.append(ScanRow(float(cutoff), float(fine[0]), fine[1:].copy(), float(np.max(np.abs(fine - coarse)))))
    return DivergenceScan(rows=rows)


@dataclass
class DivergenceFit:
    energy_constant: float
    energy_divergent: float
    momentum_constant: np.ndarray
    momentum_inverse: np.ndarray
    momentum_divergent: np.ndarray


def fit_divergence(scan: DivergenceScan) -> DivergenceFit:
    """Least-squares fit ``E = A + B / (2 x^2)`` and ``p = C0 + C1 / x + C2 / (2 x^2)``, ``x = 1 - cos(theta_min)``."""
    tab = scan.table()
    x = 1.0 - np.cos(tab[:, 0])
    basis_e = np.column_stack([np.ones_like(x), 1.0 / (2.0 * x**2)])
    (A, B), *_ = np.linalg.lstsq(basis_e, tab[:, 1], rcond=None)
    basis_p = np.column_stack([np.ones_like(x), 1.0 / x, 1.0 / (2.0 * x**2)])
    coef, *_ = np.linalg.lstsq(basis_p, tab[:, 2:5], rcond=None)
    return DivergenceFit(float(A), float(B), coef[0], coef[1], coef[2])
