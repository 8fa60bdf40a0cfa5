"""Closed-form and prescribed worldlines used as oracles and scenario inputs."""

from __future__ import annotations

import numpy as np

from radreact.worldline import ParticleProps, Worldline


def _embed(cols, dim):
    """Stack the given leading columns and pad with zeros to ``dim``."""
    arr = np.stack(cols, axis=-1)
    if arr.shape[-1] < dim:
        arr = np.concatenate([arr, np.zeros(arr.shape[:-1] + (dim - arr.shape[-1],))], axis=-1)
    return arr


def circular_kinematics(tau, radius: float, beta: float, dim: int = 4):
    """``(z, u, a, da, dda)`` for uniform circular motion in the x-y plane.

    ``beta`` is the orbital speed; lab angular velocity is ``beta / radius``.
    """
    tau = np.asarray(tau, dtype=float)
    g = 1.0 / np.sqrt(1.0 - beta**2)
    w = g * beta / radius  # angle rate per unit proper time
    ph = w * tau
    c, s = np.cos(ph), np.sin(ph)
    zero = np.zeros_like(tau)
    z = _embed([g * tau, radius * c, radius * s], dim)
    u = _embed([np.full_like(tau, g), -radius * w * s, radius * w * c], dim)
    a = _embed([zero, -radius * w**2 * c, -radius * w**2 * s], dim)
    da = _embed([zero, radius * w**3 * s, -radius * w**3 * c], dim)
    dda = _embed([zero, radius * w**4 * c, radius * w**4 * s], dim)
    return z, u, a, da, dda


def circular(particle: ParticleProps, radius: float, beta: float, tau, dim: int = 4, *, chain: bool | None = None) -> Worldline:
    z, u, a, da, dda = circular_kinematics(tau, radius, beta, dim)
    chain = dim == 6 if chain is None else chain
    return Worldline.from_arrays(tau, z, u, a, particle, da=da if chain else None, dda=dda if chain else None)


def hyperbolic_kinematics(tau, g: float, dim: int = 4):
    """Uniform proper acceleration ``g`` along x, starting at rest at the origin."""
    tau = np.asarray(tau, dtype=float)
    ch, sh = np.cosh(g * tau), np.sinh(g * tau)
    z = _embed([sh / g, (ch - 1.0) / g], dim)
    u = _embed([ch, sh], dim)
    a = _embed([g * sh, g * ch], dim)
    da = _embed([g**2 * ch, g**2 * sh], dim)
    dda = _embed([g**3 * sh, g**3 * ch], dim)
    return z, u, a, da, dda


def hyperbolic(particle: ParticleProps, g: float, tau, dim: int = 4) -> Worldline:
    z, u, a, da, dda = hyperbolic_kinematics(tau, g, dim)
    chain = dim == 6
    return Worldline.from_arrays(tau, z, u, a, particle, da=da if chain else None, dda=dda if chain else None)


def uniform(particle: ParticleProps, velocity, tau, origin=None, dim: int = 4) -> Worldline:
    """Inertial motion with 3-velocity ``velocity`` (massive) or unit direction (massless)."""
    tau = np.asarray(tau, dtype=float)
    v = np.zeros(dim - 1)
    v[: len(velocity)] = velocity
    if particle.massless:
        u0 = np.concatenate([[1.0], v / np.linalg.norm(v)])
    else:
        g = 1.0 / np.sqrt(1.0 - v @ v)
        u0 = g * np.concatenate([[1.0], v])
    x0 = np.zeros(dim) if origin is None else np.asarray(origin, dtype=float)
    z = x0 + tau[:, None] * u0
    u = np.broadcast_to(u0, z.shape).copy()
    zero = np.zeros_like(z)
    chain = dim == 6
    return Worldline.from_arrays(tau, z, u, zero, particle, da=zero if chain else None, dda=zero if chain else None)


def lab_time_worldline(particle: ParticleProps, t, position, velocity, acceleration, *, gl_order: int = 8) -> Worldline:
    """Massive worldline from a lab-time parametrisation ``x(t)``.

    ``position``, ``velocity`` and ``acceleration`` map lab time to 3-vectors
    (arrays of shape ``(n, 3)``).  Proper time is integrated interval by
    interval with Gauss-Legendre quadrature of ``sqrt(1 - v^2)``.
    """
    t = np.asarray(t, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(gl_order)
    mids = 0.5 * (t[1:] + t[:-1])
    half = 0.5 * np.diff(t)
    nodes = (mids[:, None] + half[:, None] * xg).ravel()
    vn = velocity(nodes)
    dtau = np.sum(np.sqrt(1.0 - np.sum(vn**2, axis=-1)).reshape(len(mids), gl_order) * wg, axis=1) * half
    tau = np.concatenate([[0.0], np.cumsum(dtau)])
    # place tau = 0 at t = 0 when the grid straddles it
    if t[0] < 0.0 < t[-1]:
        j = int(np.searchsorted(t, 0.0))
        if t[j] == 0.0:
            tau = tau - tau[j]
        else:
            seg = np.linspace(t[j - 1], 0.0, 2)
            piece = _tau_piece(seg, velocity, xg, wg)
            tau = tau - (tau[j - 1] + piece)
    x, v, acc = position(t), velocity(t), acceleration(t)
    g = 1.0 / np.sqrt(1.0 - np.sum(v**2, axis=-1))
    gdot = g**3 * np.sum(v * acc, axis=-1)  # d(gamma)/dt
    z = np.column_stack([t, x])
    u = g[:, None] * np.column_stack([np.ones_like(t), v])
    dudt = gdot[:, None] * np.column_stack([np.ones_like(t), v]) + g[:, None] * np.column_stack([np.zeros_like(t), acc])
    a = g[:, None] * dudt
    return Worldline.from_arrays(tau, z, u, a, particle)


def _tau_piece(seg, velocity, xg, wg):
    mid, half = 0.5 * (seg[0] + seg[1]), 0.5 * (seg[1] - seg[0])
    nodes = mid + half * xg
    return float(np.sum(np.sqrt(1.0 - np.sum(velocity(nodes) ** 2, axis=-1)) * wg) * half)



def flyby_pair(
    beta: float = 0.5,
    kick: float = 0.3,
    timescale: float = 2.0,
    impact: float = 4.0,
    charges=(1.0, -1.0),
    t_span: float = 20.0,
    n_knots: int = 2001,
):
    """Two prescribed charges passing each other, mirror images through the x axis.

    Particle ``a`` follows ``(beta t, impact/2 + kick T ln cosh(t/T), 0)``, particle
    ``b`` the point reflection of that path in the x-y plane.  Both paths are
    invariant under ``(t, x) -> (-t, -x)``; accelerations decay like
    ``exp(-2|t|/T)`` so the emission is confined to ``|t| <~ few T``.
    """
    if beta**2 + kick**2 >= 1.0:
        raise ValueError("beta^2 + kick^2 must stay below 1")
    T = timescale
    t = np.linspace(-t_span, t_span, n_knots)
    out = []
    for sign, q in zip((1.0, -1.0), charges):

        def position(tt, s=sign):
            tt = np.asarray(tt, dtype=float)
            return np.column_stack([s * beta * tt, s * (0.5 * impact + kick * T * np.log(np.cosh(tt / T))), np.zeros_like(tt)])

        def velocity(tt, s=sign):
            tt = np.asarray(tt, dtype=float)
            return np.column_stack([s * beta * np.ones_like(tt), s * kick * np.tanh(tt / T), np.zeros_like(tt)])

        def acceleration(tt, s=sign):
            tt = np.asarray(tt, dtype=float)
            return np.column_stack([np.zeros_like(tt), s * kick / T / np.cosh(tt / T) ** 2, np.zeros_like(tt)])

        out.append(lab_time_worldline(ParticleProps(q, 1.0), t, position, velocity, acceleration))
    return tuple(out)


def massless_arc(charge: float, omega: float, amplitude: float, s_span: float, n_knots: int = 4001, *, e0: float = 1.0) -> Worldline:
    """Massless charge with a brief transverse turn, parametrised by lab time.

    The direction turns in the x-z plane at the rate
    ``amplitude * omega * sin^2(omega s / 2)`` for ``0 < s < 2 pi / omega`` and
    is frozen outside that window, so the path is straight before and after.
    """
    particle = ParticleProps(charge, 0.0, massless=True, lagrange_multiplier_e0=e0)
    s = np.linspace(-s_span, s_span, n_knots)
    period = 2.0 * np.pi / omega
    win = np.clip(s, 0.0, period)
    psi = amplitude * 0.5 * (win - np.sin(omega * win) / omega) * omega
    rate = np.where((s > 0) & (s < period), amplitude * omega * np.sin(0.5 * omega * s) ** 2, 0.0)
    n = np.column_stack([np.sin(psi), np.zeros_like(s), np.cos(psi)])
    dn = np.column_stack([np.cos(psi), np.zeros_like(s), -np.sin(psi)]) * rate[:, None]
    # position: integrate the direction with high-order quadrature on each interval
    xg, wg = np.polynomial.legendre.leggauss(8)
    mids = 0.5 * (s[1:] + s[:-1])
    half = 0.5 * np.diff(s)
    nodes = (mids[:, None] + half[:, None] * xg).ravel()
    wn = np.clip(nodes, 0.0, period)
    psn = amplitude * 0.5 * (wn - np.sin(omega * wn) / omega) * omega
    dirs = np.column_stack([np.sin(psn), np.zeros_like(psn), np.cos(psn)]).reshape(len(mids), 8, 3)
    steps = np.einsum("ikj,k->ij", dirs, wg) * half[:, None]
    x = np.concatenate([np.zeros((1, 3)), np.cumsum(steps, axis=0)])
    j0 = int(np.argmin(np.abs(s)))
    x = x - x[j0] - s[j0] * n[j0]
    z = np.column_stack([s, x])
    u = np.column_stack([np.ones_like(s), n])
    a = np.column_stack([np.zeros_like(s), dn])
    return Worldline.from_arrays(s, z, u, a, particle)


def massless_arc_acceleration_integral(amplitude: float, omega: float) -> float:
    """``int a.a ds`` for :func:`massless_arc` (closed form)."""
    # a.a = rate^2, rate = A w sin^2(w s/2); int_0^{2pi/w} sin^4 = (3/8)(2 pi / w)
    return amplitude**2 * omega**2 * 0.375 * 2.0 * np.pi / omega
