"""Dilatations, special conformal transformations and the massless-charge audit.

A special conformal transformation (SCT) with parameter ``b`` maps

    x -> (x + b x^2) / D(x),    D(x) = 1 + 2 b.x + b^2 x^2.

It is inversion, translation by ``b``, inversion; its Jacobian is ``Omega / D``
with ``Omega = I(x') I(x)`` a Lorentz matrix built from the inversion
reflections ``I(y) = 1 - 2 y y^T eta / y^2``.  A dilatation ``x -> e^theta x``
is applied first in the composite map used by the audit.

The audit checks that the massless equation in momentum form,
``d(e z')/ds = q F^mu_nu z'^nu``, keeps holding after the composite map when
the field transforms as a 2-form and the multiplier as
``e -> D^2 e^{-2 theta} e``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from radreact.geom import metric, minkowski_dot, raise_first

LIGHTCONE_GUARD = 1e-6


def dilate(x, theta: float) -> np.ndarray:
    return np.exp(theta) * np.asarray(x, dtype=float)


def sct_denominator(x, b) -> float:
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(1.0 + 2.0 * minkowski_dot(b, x) + minkowski_dot(b, b) * minkowski_dot(x, x))


def special_conformal(x, b) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    D = sct_denominator(x, b)
    if abs(D) < 1e-14:
        raise ZeroDivisionError("point is mapped to infinity by the special conformal transformation")
    return (x + b * minkowski_dot(x, x)) / D


def inversion_reflection(y) -> np.ndarray:
    """``I^mu_nu = delta - 2 y^mu y_nu / y^2``; a Lorentz reflection for non-null ``y``."""
    y = np.asarray(y, dtype=float)
    eta = metric(len(y))
    return np.eye(len(y)) - 2.0 * np.outer(y, eta @ y) / minkowski_dot(y, y)


def _fd_jacobian(fn, x, step=1e-5):
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        dx = np.zeros(n)
        dx[j] = step
        J[:, j] = (-fn(x + 2 * dx) + 8 * fn(x + dx) - 8 * fn(x - dx) + fn(x - 2 * dx)) / (12 * step)
    return J


def omega_matrix(x, b) -> np.ndarray:
    """Lorentz part of the SCT Jacobian at ``x``.

    Uses the product of inversion reflections; within ``LIGHTCONE_GUARD`` of
    either light cone (where the reflections are singular) falls back to a
    finite-difference Jacobian times ``D``.
    """
    x = np.asarray(x, dtype=float)
    xp = special_conformal(x, b)
    scale = max(1.0, float(np.dot(x, x)))
    if abs(minkowski_dot(x, x)) > LIGHTCONE_GUARD * scale and abs(minkowski_dot(xp, xp)) > LIGHTCONE_GUARD * max(1.0, float(np.dot(xp, xp))):
        return inversion_reflection(xp) @ inversion_reflection(x)
    return sct_denominator(x, b) * _fd_jacobian(lambda y: special_conformal(y, b), x)


def conformality_defect(Omega) -> float:
    """``max |Omega^T eta Omega - eta|``."""
    eta = metric(Omega.shape[0])
    return float(np.max(np.abs(Omega.T @ eta @ Omega - eta)))


@dataclass(frozen=True)
class ConformalMap:
    """Dilatation by ``theta`` followed by the SCT with parameter ``b``."""

    theta: float
    b: np.ndarray

    def apply(self, x) -> np.ndarray:
        return special_conformal(dilate(x, self.theta), self.b)

    def denominator(self, x) -> float:
        return sct_denominator(dilate(x, self.theta), self.b)

    def jacobian(self, x) -> np.ndarray:
        xd = dilate(x, self.theta)
        return np.exp(self.theta) * omega_matrix(xd, self.b) / sct_denominator(xd, self.b)

    def scale(self, x) -> float:
        """Conformal factor ``kappa`` with ``J^T eta J = kappa^2 eta``."""
        return float(np.exp(self.theta) / self.denominator(x))


def transform_field(F, J) -> np.ndarray:
    """All-lower 2-form pushed forward by a map with Jacobian ``J``."""
    Jinv = np.linalg.inv(J)
    return Jinv.T @ np.asarray(F, dtype=float) @ Jinv


def transform_massless_state(cmap: ConformalMap, x, zdot, e: float):
    """Image ``(x', zdot', e')`` of a massless state; the curve parameter is unchanged."""
    J = cmap.jacobian(x)
    return cmap.apply(x), J @ np.asarray(zdot, dtype=float), cmap.denominator(x) ** 2 * np.exp(-2.0 * cmap.theta) * e


def _image_line(cmap: ConformalMap, x0, v, s):
    """Image of ``x0 + s v`` (``v`` null) and its first two parameter derivatives.

    On a null line both ``x^2`` and ``D`` are linear in ``s``, so the image is
    a ratio of linear functions and its derivatives are exact.
    """
    k = np.exp(cmap.theta)
    p0, p1 = k * np.asarray(x0, dtype=float), k * np.asarray(v, dtype=float)
    b = np.asarray(cmap.b, dtype=float)
    x = p0 + s * p1
    sq0 = minkowski_dot(p0, p0) + 2.0 * s * minkowski_dot(p0, p1)
    dsq = 2.0 * minkowski_dot(p0, p1)
    N = x + b * sq0
    dN = p1 + b * dsq
    D = 1.0 + 2.0 * minkowski_dot(b, x) + minkowski_dot(b, b) * sq0
    dD = 2.0 * minkowski_dot(b, p1) + minkowski_dot(b, b) * dsq
    xp = N / D
    vp = (dN * D - N * dD) / D**2
    ap = -2.0 * dD / D * vp
    return xp, vp, ap, D, dD


def equation_residual(F, x0, v, e: float, q: float, cmap: ConformalMap, s: float = 0.0) -> float:
    """Relative residual of the transformed massless equation at parameter ``s``.

    The original state moves along ``x0 + s v`` with ``de/ds = q lambda`` where
    ``F v = lambda v``.  The image velocity and acceleration come from the
    exact rational image curve; the right-hand side uses the pushed-forward
    field and the Jacobian.
    """
    v = np.asarray(v, dtype=float)
    M = raise_first(np.asarray(F, dtype=float))
    lam = float((M @ v)[0] / v[0])
    e_s = e + q * lam * s
    x = np.asarray(x0, dtype=float) + s * v
    xp, vp, ap, D, dD = _image_line(cmap, x0, v, s)
    f2 = np.exp(-2.0 * cmap.theta)
    e_img = D**2 * f2 * e_s
    de_img = f2 * (2.0 * D * dD * e_s + D**2 * q * lam)
    lhs = de_img * vp + e_img * ap
    J = cmap.jacobian(x)
    Fp = transform_field(F, J)
    rhs = q * raise_first(Fp) @ (J @ v)
    scale = max(np.max(np.abs(de_img * vp)), np.max(np.abs(e_img * ap)), np.max(np.abs(rhs)), 1e-300)
    return float(np.max(np.abs(lhs - rhs)) / scale)


@dataclass
class AuditResult:
    n_states: int
    max_residual: float
    max_omega_defect: float
    max_jacobian_mismatch: float
    skipped: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def random_admissible_state(rng: np.random.Generator):
    """Random uniform field with a real null eigenvector; returns ``(F, v, lambda)``."""
    from radreact.dynamics import find_null_eigenvectors
    from radreact.geom import field_tensor

    while True:
        F = field_tensor(rng.normal(size=3), rng.normal(size=3))
        pairs = find_null_eigenvectors(F).pairs
        if pairs:
            lam, v = pairs[rng.integers(len(pairs))]
            return F, v, lam


def conformal_audit(n_states: int = 1000, seed: int = 0, *, b_scale: float = 0.2, theta_scale: float = 0.5) -> AuditResult:
    """Residual of the massless equation after random dilatation + SCT pairs."""
    rng = np.random.default_rng(seed)
    worst_res = worst_omega = worst_jac = 0.0
    skipped = 0
    done = 0
    while done < n_states:
        F, v, _ = random_admissible_state(rng)
        x0 = rng.normal(size=4)
        cmap = ConformalMap(float(rng.uniform(-theta_scale, theta_scale)), b_scale * rng.normal(size=4))
        s = float(rng.uniform(-0.5, 0.5))
        x = x0 + s * v
        D = cmap.denominator(x)
        if abs(D) < 0.1:
            skipped += 1
            continue
        e = float(rng.uniform(0.5, 2.0))
        q = float(rng.normal())
        worst_res = max(worst_res, equation_residual(F, x0, v, e, q, cmap, s))
        xd = dilate(x, cmap.theta)
        worst_omega = max(worst_omega, conformality_defect(omega_matrix(xd, cmap.b)))
        J_fd = _fd_jacobian(cmap.apply, x, step=1e-4)
        J = cmap.jacobian(x)
        worst_jac = max(worst_jac, float(np.max(np.abs(J - J_fd)) / np.max(np.abs(J))))
        done += 1
    return AuditResult(n_states, worst_res, worst_omega, worst_jac, skipped)
