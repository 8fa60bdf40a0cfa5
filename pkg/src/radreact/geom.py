"""Minkowski algebra in 4 and 6 dimensions.

Vectors are plain ``numpy`` arrays whose last axis holds the components, index 0
being time.  Rank-2 tensors are ``(..., d, d)`` arrays stored with both indices
lowered; mixed forms are produced on demand with :func:`raise_first`.  The
metric is mostly-plus, ``diag(-1, +1, ..., +1)``, and every function broadcasts
over leading axes.
"""

from __future__ import annotations

import numpy as np

from radreact.errors import DimensionError

DIMENSIONS = (4, 6)


def metric(dim: int = 4) -> np.ndarray:
    """Return the mostly-plus metric ``diag(-1, 1, ..., 1)``."""
    if dim not in DIMENSIONS:
        raise DimensionError(f"unsupported spacetime dimension {dim}")
    eta = np.eye(dim)
    eta[0, 0] = -1.0
    return eta


def vector(*components) -> np.ndarray:
    """Build a Lorentz vector, checking dimension and finiteness."""
    if len(components) == 1:
        v = np.array(components[0], dtype=float)
    else:
        v = np.array(components, dtype=float)
    _check_dim(v)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


def _check_dim(*arrays: np.ndarray) -> int:
    dims = {a.shape[-1] for a in arrays}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")
    (dim,) = dims
    if dim not in DIMENSIONS:
        raise DimensionError(f"unsupported spacetime dimension {dim}")
    return dim


def minkowski_dot(v, w) -> np.ndarray | float:
    """Inner product ``-v0*w0 + sum_i vi*wi``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_dim(v, w)
    out = np.sum(v[..., 1:] * w[..., 1:], axis=-1) - v[..., 0] * w[..., 0]
    return float(out) if np.ndim(out) == 0 else out


def lower(v) -> np.ndarray:
    """Lower (or raise) the index of a vector; the metric is its own inverse."""
    v = np.array(v, dtype=float)
    v[..., 0] = -v[..., 0]
    return v


def wedge(v, w) -> np.ndarray:
    """Antisymmetric tensor ``v^mu w^nu - v^nu w^mu``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_dim(v, w)
    outer = v[..., :, None] * w[..., None, :]
    return outer - np.swapaxes(outer, -1, -2)


def raise_first(F) -> np.ndarray:
    """Mixed form ``F^mu_nu`` from the all-lower tensor (flips the sign of row 0)."""
    F = np.array(F, dtype=float)
    F[..., 0, :] = -F[..., 0, :]
    return F


def raise_both(F) -> np.ndarray:
    """All-upper form ``F^{mu nu}`` from the all-lower tensor."""
    F = raise_first(F)
    F[..., :, 0] = -F[..., :, 0]
    return F


def apply_tensor(F, v) -> np.ndarray:
    """Contract ``F^mu_nu v^nu`` for an all-lower tensor ``F``."""
    F = np.asarray(F, dtype=float)
    v = np.asarray(v, dtype=float)
    if F.shape[-1] != v.shape[-1] or F.shape[-2] != v.shape[-1]:
        raise DimensionError(f"tensor of shape {F.shape[-2:]} cannot act on {v.shape[-1]}-vector")
    _check_dim(v)
    return np.einsum("...ij,...j->...i", raise_first(F), v)


def field_tensor(E=(0.0, 0.0, 0.0), B=(0.0, 0.0, 0.0)) -> np.ndarray:
    """All-lower 4D field strength for electric field ``E`` and magnetic field ``B``.

    With ``A_mu = (-phi, A)`` one has ``F_{0i} = -E_i`` and ``F_{ij} = eps_{ijk} B_k``.
    """
    E = np.asarray(E, dtype=float)
    B = np.asarray(B, dtype=float)
    F = np.zeros(E.shape[:-1] + (4, 4))
    F[..., 0, 1:] = -E
    F[..., 1:, 0] = E
    F[..., 1, 2] = B[..., 2]
    F[..., 2, 1] = -B[..., 2]
    F[..., 2, 3] = B[..., 0]
    F[..., 3, 2] = -B[..., 0]
    F[..., 3, 1] = B[..., 1]
    F[..., 1, 3] = -B[..., 1]
    return F


def electric_magnetic(F) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`field_tensor`."""
    F = np.asarray(F, dtype=float)
    E = -F[..., 0, 1:]
    B = np.stack([F[..., 2, 3], F[..., 3, 1], F[..., 1, 2]], axis=-1)
    return E, B


def is_antisymmetric(F, tol: float = 0.0) -> bool:
    F = np.asarray(F, dtype=float)
    return bool(np.all(np.abs(F + np.swapaxes(F, -1, -2)) <= tol))


def rotation_to_axis(v3) -> np.ndarray:
    """Spacetime matrix whose spatial block is the rotation taking z-hat onto ``v3``.

    ``Omega[0, mu] = Omega[mu, 0] = delta_{mu 0}``.  The rotation is the minimal
    one about ``z x v3``; the antipodal case rotates by pi about the x-axis.
    """
    v3 = np.asarray(v3, dtype=float)
    norm = np.linalg.norm(v3)
    if not norm > 0.0:
        raise ValueError("rotation_to_axis needs a nonzero vector")
    n = v3 / norm
    c = n[2]
    R = np.eye(3)
    if c <= -1.0 + 1e-15 and np.hypot(n[0], n[1]) < 1e-15:
        R = np.diag([1.0, -1.0, -1.0])
    else:
        # Rodrigues formula for axis z x n, written without dividing by sin.
        kx, ky = -n[1], n[0]
        K = np.array([[0.0, 0.0, ky], [0.0, 0.0, -kx], [-ky, kx, 0.0]])
        R = np.eye(3) + K + (K @ K) / (1.0 + c)
    Omega = np.eye(4)
    Omega[1:, 1:] = R
    return Omega


def rotations_to_axes(v3) -> np.ndarray:
    """Vectorised :func:`rotation_to_axis` over a ``(..., 3)`` array (spatial blocks only)."""
    v3 = np.asarray(v3, dtype=float)
    n = v3 / np.linalg.norm(v3, axis=-1, keepdims=True)
    c = n[..., 2]
    kx, ky = -n[..., 1], n[..., 0]
    zero = np.zeros_like(c)
    K = np.stack(
        [
            np.stack([zero, zero, ky], axis=-1),
            np.stack([zero, zero, -kx], axis=-1),
            np.stack([-ky, kx, zero], axis=-1),
        ],
        axis=-2,
    )
    antipodal = c <= -1.0 + 1e-15
    denom = np.where(antipodal, 1.0, 1.0 + c)
    R = np.eye(3) + K + (K @ K) / denom[..., None, None]
    if np.any(antipodal):
        R[antipodal] = np.diag([1.0, -1.0, -1.0])
    return R
