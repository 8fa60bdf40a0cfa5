"""Retarded (Lienard-Wiechert) potentials, field strengths and stress-energy tensors.

Field strengths are all-lower antisymmetric arrays ``f_{mu nu}``.  In 4D the
massive field is the usual bound (1/r^2) plus radiative (1/r) pair; a massless
charge carries only the radiative part.  In 6D the field strength is the exact
exterior derivative of the potential

    A_mu = e [a_mu / r^2 + u_mu (1 + r a_k) / r^3],

differentiated through the retarded time with ``d_mu s = -k_mu``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from radreact.errors import RaySingularityError
from radreact.geom import lower, metric, minkowski_dot, raise_both, raise_first, wedge
from radreact.worldline import RetardedBatch, RetardedData, Worldline, retarded_batch

FOUR_PI = 4.0 * np.pi


@dataclass
class FieldSample:
    y: np.ndarray
    f: np.ndarray
    retarded: RetardedData
    source_id: int = 0


def _raise_on_ray(batch: RetardedBatch, Y: np.ndarray) -> None:
    if np.any(batch.on_ray):
        i = int(np.flatnonzero(batch.on_ray)[0])
        raise RaySingularityError(
            f"field point {Y[i]} lies on the forward ray of the massless source",
            k=batch.k[i].copy(),
            s=float(batch.s[i]),
        )


def lw_fields_4d(w: Worldline, Y, *, on_ray: str = "raise"):
    """Vectorised 4D field strength at points ``Y``; returns ``(f, batch)``.

    With ``on_ray="nan"`` ray-singular points of a massless source get NaN
    fields instead of raising.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    batch = retarded_batch(w, Y)
    if on_ray == "raise":
        _raise_on_ray(batch, Y)
    e = w.particle.charge
    r = np.where(batch.on_ray, np.nan, batch.r)[:, None, None]
    kl = lower(batch.k)
    ul = lower(batch.u)
    al = lower(batch.a)
    uk = wedge(ul, kl)
    f = e * (wedge(al, kl) + batch.a_k[:, None, None] * uk) / r
    if not w.particle.massless:
        f = f + e * uk / r**2
    return f, batch


def lw_field_4d(w: Worldline, y, source_id: int = 0) -> FieldSample:
    """Retarded field of a 4D charge at the single point ``y``."""
    y = np.asarray(y, dtype=float)
    f, batch = lw_fields_4d(w, y[None, :])
    return FieldSample(y=y, f=f[0], retarded=batch.item(0), source_id=source_id)


def lw_potential_4d(w: Worldline, Y) -> np.ndarray:
    """All-lower potential ``A_mu = e u_mu / r`` (massive source)."""
    batch = retarded_batch(w, np.atleast_2d(Y))
    return w.particle.charge * lower(batch.u) / batch.r[:, None]


def lw_potential_6d(w: Worldline, Y) -> np.ndarray:
    """All-lower 6D potential ``e [a_mu / r^2 + u_mu (1 + r a_k) / r^3]``."""
    batch = retarded_batch(w, np.atleast_2d(Y))
    r = batch.r[:, None]
    return w.particle.charge * (lower(batch.a) / r**2 + lower(batch.u) * (1.0 + r * batch.a_k[:, None]) / r**3)


def _sixd_gradient(batch: RetardedBatch, e: float):
    """``d_mu A_nu`` of the 6D potential and its leading 1/r^2 field."""
    r = batch.r[:, None]
    a_k = batch.a_k[:, None]
    k = lower(batch.k)
    u = lower(batch.u)
    a = lower(batch.a)
    da = lower(batch.da)
    da_k = np.atleast_1d(minkowski_dot(batch.da, batch.k))[:, None]
    dr = -u + k * (1.0 + r * a_k)
    dak = -da_k * k + (a - a_k * dr) / r

    def outer(p, q):
        return p[:, :, None] * q[:, None, :]

    rr = r[:, :, None]
    G = (
        -outer(k, da) / rr**2
        - 2.0 * outer(dr, a) / rr**3
        - outer(k, a) * (1.0 / rr**3 + a_k[:, :, None] / rr**2)
        + outer(-3.0 * dr / r**4 + dak / r**2 - 2.0 * a_k * dr / r**3, u)
    )
    X = -da - 3.0 * a_k * a - (da_k + 3.0 * a_k**2) * u
    leading = wedge(k, X) / rr**2
    return e * G, e * leading


def lw_fields_6d(w: Worldline, Y, *, leading: bool = False):
    """Vectorised 6D field strength; with ``leading`` also the 1/r^2 radiative part."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    batch = retarded_batch(w, Y, with_chain=True)
    G, lead = _sixd_gradient(batch, w.particle.charge)
    f = G - np.swapaxes(G, -1, -2)
    if leading:
        return f, lead, batch
    return f, batch


def lw_field_6d(w: Worldline, y, source_id: int = 0) -> FieldSample:
    """Retarded 6D field strength at ``y`` (needs a worldline with stored jerk)."""
    y = np.asarray(y, dtype=float)
    f, batch = lw_fields_6d(w, y[None, :])
    return FieldSample(y=y, f=f[0], retarded=batch.item(0), source_id=source_id)


def _as_field(sample) -> np.ndarray:
    return sample.f if isinstance(sample, FieldSample) else np.asarray(sample, dtype=float)


def stress_energy(sample) -> np.ndarray:
    """``T^{mu nu}`` with ``4 pi T = f^{mu l} f^nu_l - (1/4) eta^{mu nu} f^{kl} f_{kl}``.

    Accepts a :class:`FieldSample` or an all-lower field array (batched).
    """
    F = _as_field(sample)
    eta = metric(F.shape[-1])
    Fu = raise_both(F)
    M = raise_first(F)
    term = Fu @ np.swapaxes(M, -1, -2)
    inv = np.sum(Fu * F, axis=(-1, -2))
    return (term - 0.25 * eta * inv[..., None, None]) / FOUR_PI


def interference_stress_energy(s1, s2) -> np.ndarray:
    """Cross term of the stress-energy tensor of the summed fields of two charges."""
    if isinstance(s1, FieldSample) and isinstance(s2, FieldSample):
        if not np.array_equal(s1.y, s2.y):
            raise ValueError("interference tensor needs both fields at the same point")
    F1 = _as_field(s1)
    F2 = _as_field(s2)
    eta = metric(F1.shape[-1])
    F1u, F2u = raise_both(F1), raise_both(F2)
    M1, M2 = raise_first(F1), raise_first(F2)
    term = F1u @ np.swapaxes(M2, -1, -2) + F2u @ np.swapaxes(M1, -1, -2)
    inv = np.sum(F1u * F2, axis=(-1, -2)) + np.sum(F2u * F1, axis=(-1, -2))
    return (term - 0.25 * eta * inv[..., None, None]) / FOUR_PI


def dump_grid(path, Y, f, T=None) -> None:
    """Write field samples as CSV: ``y0..y3``, upper-triangle ``f``, optionally ``T``."""
    Y = np.atleast_2d(Y)
    f = np.asarray(f).reshape(len(Y), 4, 4)
    iu = np.triu_indices(4, 1)
    cols = [f"y{i}" for i in range(4)] + [f"f{i}{j}" for i, j in zip(*iu)]
    rows = [np.asarray(Y), f[:, iu[0], iu[1]]]
    if T is not None:
        T = np.asarray(T).reshape(len(Y), 4, 4)
        it = np.triu_indices(4)
        cols += [f"T{i}{j}" for i, j in zip(*it)]
        rows.append(T[:, it[0], it[1]])
    data = np.column_stack(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in data:
            writer.writerow([f"{v:.17g}" for v in row])
