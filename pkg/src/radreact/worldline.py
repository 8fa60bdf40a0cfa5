"""Worldlines: proper-time-stamped kinematic records, interpolation and retarded times.

A :class:`Worldline` stores knots ``(tau, z, u, a[, da, dda])`` and interpolates
position with a piecewise quintic Hermite polynomial built from ``z, u, a``, so
the interpolant is C2 and reproduces the stored velocity and acceleration at
every knot.  When the derivative chain ``da, dda`` is stored (6D dynamics) the
acceleration is additionally interpolated from ``a, da, dda``.

Massless worldlines are parametrised by laboratory time, so ``u = (1, v)`` with
``|v| = 1``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from radreact.errors import (
    DimensionError,
    ExtrapolationError,
    HistoryTooShortError,
    SingularPointError,
)
from radreact.geom import DIMENSIONS, minkowski_dot, rotations_to_axes

NORM_TOL = 1e-9
ROOT_RTOL = 1e-12
RAY_RTOL = 1e-10


@dataclass(frozen=True)
class ParticleProps:
    """Charge, renormalised mass and (6D) higher-derivative constant of a particle.

    ``lagrange_multiplier_e0`` is the initial value of the einbein multiplier of a
    massless charge; for massive particles it is unused.
    """

    charge: float
    mass: float = 1.0
    mu: float = 0.0
    massless: bool = False
    lagrange_multiplier_e0: float = 1.0

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be non-negative")
        if self.massless and self.mass != 0:
            raise ValueError("a massless particle must have mass = 0")
        if not self.massless and self.mass == 0:
            raise ValueError("a massive particle needs mass > 0")

    def check_dim(self, dim: int) -> None:
        if self.massless and dim != 4:
            raise DimensionError("massless charges exist only in 4D")
        if dim != 6 and self.mu != 0:
            raise DimensionError("mu is a 6D constant")


@dataclass
class WorldlinePoint:
    tau: float
    z: np.ndarray
    u: np.ndarray
    a: np.ndarray
    da: np.ndarray | None = None
    dda: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.z.shape[-1]

    def normalization_drift(self, massless: bool = False) -> float:
        """``|u.u + 1|`` for massive points, ``|u.u|`` for massless ones."""
        uu = minkowski_dot(self.u, self.u)
        return abs(uu) if massless else abs(uu + 1.0)


@dataclass
class RetardedData:
    """Retarded time ``s``, distance ``r``, null direction ``k`` and ``a.k``.

    ``on_ray`` flags the massless ray singularity (``r = 0``); there ``k`` is
    replaced by the emission-time velocity direction.
    """

    s: float
    r: float
    k: np.ndarray
    a_k: float
    on_ray: bool = False


@dataclass
class RetardedBatch:
    """Vectorised retarded data plus the source kinematics at the retarded times."""

    s: np.ndarray
    r: np.ndarray
    k: np.ndarray
    a_k: np.ndarray
    z: np.ndarray
    u: np.ndarray
    a: np.ndarray
    da: np.ndarray | None = None
    on_ray: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __len__(self):
        return len(self.s)

    def item(self, i: int) -> RetardedData:
        return RetardedData(
            s=float(self.s[i]),
            r=float(self.r[i]),
            k=self.k[i].copy(),
            a_k=float(self.a_k[i]),
            on_ray=bool(self.on_ray[i]),
        )


def _hermite_basis(x: np.ndarray, order: int) -> np.ndarray:
    """Quintic Hermite basis (H0..H5) or its first/second/third x-derivative."""
    x2 = x * x
    x3 = x2 * x
    x4 = x3 * x
    x5 = x4 * x
    if order == 0:
        rows = [
            1 - 10 * x3 + 15 * x4 - 6 * x5,
            x - 6 * x3 + 8 * x4 - 3 * x5,
            0.5 * (x2 - 3 * x3 + 3 * x4 - x5),
            10 * x3 - 15 * x4 + 6 * x5,
            -4 * x3 + 7 * x4 - 3 * x5,
            0.5 * (x3 - 2 * x4 + x5),
        ]
    elif order == 1:
        rows = [
            -30 * x2 + 60 * x3 - 30 * x4,
            1 - 18 * x2 + 32 * x3 - 15 * x4,
            0.5 * (2 * x - 9 * x2 + 12 * x3 - 5 * x4),
            30 * x2 - 60 * x3 + 30 * x4,
            -12 * x2 + 28 * x3 - 15 * x4,
            0.5 * (3 * x2 - 8 * x3 + 5 * x4),
        ]
    elif order == 2:
        rows = [
            -60 * x + 180 * x2 - 120 * x3,
            -36 * x + 96 * x2 - 60 * x3,
            0.5 * (2 - 18 * x + 36 * x2 - 20 * x3),
            60 * x - 180 * x2 + 120 * x3,
            -24 * x + 84 * x2 - 60 * x3,
            0.5 * (6 * x - 24 * x2 + 20 * x3),
        ]
    elif order == 3:
        one = np.ones_like(x)
        rows = [
            -60 * one + 360 * x - 360 * x2,
            -36 * one + 192 * x - 180 * x2,
            0.5 * (-18 * one + 72 * x - 60 * x2),
            60 * one - 360 * x + 360 * x2,
            -24 * one + 168 * x - 180 * x2,
            0.5 * (6 * one - 48 * x + 60 * x2),
        ]
    else:
        raise ValueError(order)
    return np.stack(rows, axis=0)


def _hermite(p0, v0, a0, p1, v1, a1, h, x, order):
    """d^order/dtau^order of the quintic Hermite interpolant on one interval."""
    H = _hermite_basis(x, order)[..., None]
    hh = h[:, None]
    val = (
        H[0] * p0
        + hh * H[1] * v0
        + hh**2 * H[2] * a0
        + H[3] * p1
        + hh * H[4] * v1
        + hh**2 * H[5] * a1
    )
    return val / hh**order


class Worldline:
    """Append-only trajectory record with quintic Hermite interpolation.

    Build one with :meth:`from_arrays`, or create an empty line and
    :meth:`append` knots during integration.  Call :meth:`freeze` before sharing
    it with field evaluations running concurrently.
    """

    def __init__(self, dim: int, particle: ParticleProps, *, chain: bool = False, capacity: int = 256):
        if dim not in DIMENSIONS:
            raise DimensionError(f"unsupported spacetime dimension {dim}")
        particle.check_dim(dim)
        self.dim = dim
        self.particle = particle
        self.chain = chain
        self._n = 0
        self._frozen = False
        self._alloc(max(capacity, 2))

    def _alloc(self, cap):
        d = self.dim
        old = getattr(self, "_tau", None)
        new_tau = np.empty(cap)
        new = {name: np.empty((cap, d)) for name in self._names()}
        if old is not None:
            new_tau[: self._n] = self._tau[: self._n]
            for name in self._names():
                new[name][: self._n] = getattr(self, "_" + name)[: self._n]
        self._tau = new_tau
        for name, arr in new.items():
            setattr(self, "_" + name, arr)

    def _names(self):
        return ("z", "u", "a", "da", "dda") if self.chain else ("z", "u", "a")

    @classmethod
    def from_arrays(cls, tau, z, u, a, particle: ParticleProps, da=None, dda=None) -> "Worldline":
        tau = np.asarray(tau, dtype=float)
        z = np.asarray(z, dtype=float)
        chain = da is not None
        w = cls(z.shape[-1], particle, chain=chain, capacity=len(tau))
        if chain and dda is None:
            raise ValueError("da and dda must be given together")
        w._check_monotone(tau, z)
        n = len(tau)
        w._tau[:n] = tau
        w._z[:n] = z
        w._u[:n] = u
        w._a[:n] = a
        if chain:
            w._da[:n] = da
            w._dda[:n] = dda
        w._n = n
        return w

    @staticmethod
    def _check_monotone(tau, z):
        if len(tau) > 1 and (np.any(np.diff(tau) <= 0) or np.any(np.diff(z[:, 0]) <= 0)):
            raise ValueError("worldline knots must have strictly increasing tau and z0")

    def append(self, tau, z, u, a, da=None, dda=None) -> None:
        if self._frozen:
            raise RuntimeError("worldline is frozen")
        if self._n and (tau <= self._tau[self._n - 1] or z[0] <= self._z[self._n - 1, 0]):
            raise ValueError("appended knot must advance tau and z0")
        if self._n == len(self._tau):
            self._alloc(2 * len(self._tau))
        i = self._n
        self._tau[i] = tau
        self._z[i] = z
        self._u[i] = u
        self._a[i] = a
        if self.chain:
            self._da[i] = da
            self._dda[i] = dda
        self._n += 1

    def freeze(self) -> "Worldline":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def __len__(self):
        return self._n

    @property
    def tau(self) -> np.ndarray:
        return self._tau[: self._n]

    @property
    def z(self) -> np.ndarray:
        return self._z[: self._n]

    @property
    def u(self) -> np.ndarray:
        return self._u[: self._n]

    @property
    def a(self) -> np.ndarray:
        return self._a[: self._n]

    @property
    def da(self) -> np.ndarray | None:
        return self._da[: self._n] if self.chain else None

    @property
    def dda(self) -> np.ndarray | None:
        return self._dda[: self._n] if self.chain else None

    @property
    def tau_range(self) -> tuple[float, float]:
        return float(self._tau[0]), float(self._tau[self._n - 1])

    def point(self, i: int) -> WorldlinePoint:
        return WorldlinePoint(
            tau=float(self.tau[i]),
            z=self.z[i].copy(),
            u=self.u[i].copy(),
            a=self.a[i].copy(),
            da=None if not self.chain else self.da[i].copy(),
            dda=None if not self.chain else self.dda[i].copy(),
        )

    def _locate(self, tau: np.ndarray) -> np.ndarray:
        t = self.tau
        if np.any(tau < t[0]) or np.any(tau > t[-1]):
            raise ExtrapolationError(f"tau outside stored range [{t[0]}, {t[-1]}]")
        return np.clip(np.searchsorted(t, tau, side="right") - 1, 0, self._n - 2)

    def evaluate(self, tau, idx=None, *, with_chain: bool = False):
        """Vectorised interpolation; returns ``(z, u, a)`` or ``(z, u, a, da)``.

        ``u`` and ``a`` are the first and second derivatives of the position
        interpolant.  With ``with_chain`` the jerk ``da`` is taken from the
        acceleration interpolant built on ``(a, da, dda)`` (6D lines only).
        """
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if self._n < 2:
            raise ExtrapolationError("worldline needs at least two knots")
        if idx is None:
            idx = self._locate(tau)
        t0 = self.tau[idx]
        h = self.tau[idx + 1] - t0
        x = (tau - t0) / h
        args = (self.z[idx], self.u[idx], self.a[idx], self.z[idx + 1], self.u[idx + 1], self.a[idx + 1], h, x)
        z = _hermite(*args, 0)
        u = _hermite(*args, 1)
        a = _hermite(*args, 2)
        if not with_chain:
            return z, u, a
        if not self.chain:
            raise ValueError("worldline has no stored derivative chain")
        cargs = (self.a[idx], self.da[idx], self.dda[idx], self.a[idx + 1], self.da[idx + 1], self.dda[idx + 1], h, x)
        return z, u, _hermite(*cargs, 0), _hermite(*cargs, 1)

    def interpolate(self, tau: float) -> WorldlinePoint:
        """Kinematic record at ``tau``; stored knots are returned unchanged."""
        tau = float(tau)
        lo, hi = self.tau_range
        if tau < lo or tau > hi:
            raise ExtrapolationError(f"tau={tau} outside stored range [{lo}, {hi}]")
        j = int(np.searchsorted(self.tau, tau))
        if j < self._n and self.tau[j] == tau:
            return self.point(j)
        if self.chain:
            z, u, _, _ = self.evaluate(tau, with_chain=True)
            idx = self._locate(np.array([tau]))
            h = self.tau[idx + 1] - self.tau[idx]
            x = (tau - self.tau[idx]) / h
            cargs = (self.a[idx], self.da[idx], self.dda[idx], self.a[idx + 1], self.da[idx + 1], self.dda[idx + 1], h, x)
            a = _hermite(*cargs, 0)
            da = _hermite(*cargs, 1)
            dda = _hermite(*cargs, 2)
            return WorldlinePoint(tau, z[0], u[0], a[0], da[0], dda[0])
        z, u, a = self.evaluate(tau)
        return WorldlinePoint(tau, z[0], u[0], a[0])

    def lab_time_of(self, tau):
        """Laboratory time ``z0(tau)``."""
        z, _, _ = self.evaluate(tau)
        out = z[:, 0]
        return float(out[0]) if np.ndim(tau) == 0 else out

    def normalization_drift(self, samples_per_interval: int = 4) -> float:
        """Largest ``|u.u + 1|`` (massive) or ``|u.u|`` (massless) between knots."""
        frac = (np.arange(1, samples_per_interval + 1) / (samples_per_interval + 1))
        t = self.tau
        taus = (t[:-1, None] + frac[None, :] * np.diff(t)[:, None]).ravel()
        _, u, _ = self.evaluate(taus)
        uu = minkowski_dot(u, u)
        target = 0.0 if self.particle.massless else -1.0
        return float(np.max(np.abs(uu - target)))

    # -- serialisation ---------------------------------------------------

    def columns(self) -> list[str]:
        cols = ["tau"]
        for name in self._names():
            cols += [f"{name}{i}" for i in range(self.dim)]
        return cols

    def to_csv(self, path_or_buf) -> None:
        """Write knots as CSV; particle properties go in ``# key=value`` header lines."""
        p = self.particle
        header = [
            f"dim={self.dim}",
            f"charge={p.charge!r}",
            f"mass={p.mass!r}",
            f"mu={p.mu!r}",
            f"massless={p.massless}",
            f"lagrange_multiplier_e0={p.lagrange_multiplier_e0!r}",
        ]
        data = np.column_stack([self.tau] + [getattr(self, n) for n in self._names()])
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write(",".join(self.columns()) + "\n")
        np.savetxt(buf, data, delimiter=",", fmt="%.17g")
        text = buf.getvalue()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", encoding="utf-8") as fh:
                fh.write(text)

    @classmethod
    def from_csv(cls, path_or_buf) -> "Worldline":
        if hasattr(path_or_buf, "read"):
            text = path_or_buf.read()
        else:
            with open(path_or_buf, encoding="utf-8") as fh:
                text = fh.read()
        meta = {}
        lines = text.splitlines()
        body_start = 0
        for body_start, line in enumerate(lines):
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        dim = int(meta["dim"])
        particle = ParticleProps(
            charge=float(meta["charge"]),
            mass=float(meta["mass"]),
            mu=float(meta.get("mu", 0.0)),
            massless=meta.get("massless", "False") == "True",
            lagrange_multiplier_e0=float(meta.get("lagrange_multiplier_e0", 1.0)),
        )
        cols = lines[body_start].split(",")
        data = np.loadtxt(io.StringIO("\n".join(lines[body_start + 1 :])), delimiter=",", ndmin=2)
        chain = f"da0" in cols
        block = {}
        for j, name in enumerate(("z", "u", "a", "da", "dda") if chain else ("z", "u", "a")):
            block[name] = data[:, 1 + j * dim : 1 + (j + 1) * dim]
        return cls.from_arrays(
            data[:, 0], block["z"], block["u"], block["a"], particle,
            da=block.get("da"), dda=block.get("dda"),
        )


def sample_worldline(tau, kinematics, particle: ParticleProps, *, chain: bool = False) -> Worldline:
    """Tabulate a closed-form trajectory ``kinematics(tau) -> (z, u, a[, da, dda])``."""
    tau = np.asarray(tau, dtype=float)
    out = kinematics(tau)
    if chain:
        z, u, a, da, dda = out
        return Worldline.from_arrays(tau, z, u, a, particle, da=da, dda=dda)
    z, u, a = out[:3]
    return Worldline.from_arrays(tau, z, u, a, particle)


# -- retarded time -----------------------------------------------------------


def _light_cone_gap(y, z):
    """``g = (y0 - z0) - |y - z|`` together with the spatial separation."""
    dx = y[..., 1:] - z[..., 1:]
    dist = np.sqrt(np.sum(dx * dx, axis=-1))
    return (y[..., 0] - z[..., 0]) - dist, dist


def retarded_batch(w: Worldline, Y, *, with_chain: bool = False, max_iter: int = 100) -> RetardedBatch:
    """Retarded data for an array of field points ``Y`` of shape ``(N, d)``.

    The causal root of ``g(s) = (y0 - z0(s)) - |y - z(s)|`` is bracketed on the
    knot grid by bisection (``g`` decreases along causal worldlines) and then
    polished with bracketed Newton iterations on the Hermite interpolant.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[-1] != w.dim:
        raise DimensionError(f"field point of dimension {Y.shape[-1]} vs worldline {w.dim}")
    n = len(w)
    N = len(Y)
    zk = w.z
    g_first, _ = _light_cone_gap(Y, zk[0])
    if np.any(g_first <= 0):
        bad = np.flatnonzero(g_first <= 0)[0]
        raise HistoryTooShortError(f"field point {Y[bad]} lies outside the future cone of the stored history")
    g_last, dist_last = _light_cone_gap(Y, zk[-1])
    if np.any(g_last > 0):
        bad = np.flatnonzero(g_last > 0)[0]
        raise ExtrapolationError(f"retarded time of {Y[bad]} is later than the last stored knot")

    lo = np.zeros(N, dtype=int)
    hi = np.full(N, n - 1)
    while True:
        active = hi - lo > 1
        if not np.any(active):
            break
        mid = (lo + hi) // 2
        gm, _ = _light_cone_gap(Y, zk[mid])
        pos = gm > 0
        lo = np.where(active & pos, mid, lo)
        hi = np.where(active & ~pos, mid, hi)

    idx = lo
    t0 = w.tau[idx]
    h = w.tau[idx + 1] - t0
    xl = np.zeros(N)
    xr = np.ones(N)
    gl = _light_cone_gap(Y, zk[idx])[0]
    gr = _light_cone_gap(Y, zk[idx + 1])[0]
    # Initial guess from linear interpolation of g between the bracketing knots.
    x = np.clip(gl / (gl - gr), 0.0, 1.0)
    x = np.where(np.isfinite(x), x, 0.5)
    done = np.zeros(N, dtype=bool)
    zero_right = gr == 0
    x[zero_right] = 1.0
    done |= zero_right
    for _ in range(max_iter):
        z, u, _ = w.evaluate(t0 + x * h, idx)
        g, dist = _light_cone_gap(Y, z)
        scale = np.maximum(Y[:, 0] - z[:, 0], 1e-300)
        dx = Y[:, 1:] - z[:, 1:]
        nhat_u = np.sum(dx * u[:, 1:], axis=-1) / np.where(dist > 0, dist, 1.0)
        dg = (-u[:, 0] + nhat_u) * h
        pos = g > 0
        xl = np.where(pos & ~done, x, xl)
        xr = np.where(~pos & ~done, x, xr)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - g / dg
        bad = ~np.isfinite(xn) | (xn <= xl) | (xn >= xr) | (dg >= 0)
        xn = np.where(bad, 0.5 * (xl + xr), xn)
        step = np.abs(xn - x) * h
        conv = (np.abs(g) <= 4e-16 * scale) | (step <= 2e-16 * np.maximum(1.0, np.abs(t0 + x * h)))
        conv |= (xr - xl) * h <= 1e-16 * np.maximum(1.0, np.abs(t0))
        x = np.where(done | conv, x, xn)
        done |= conv
        if np.all(done):
            break

    s = t0 + x * h
    if with_chain:
        z, u, a, da = w.evaluate(s, idx, with_chain=True)
    else:
        z, u, a = w.evaluate(s, idx)
        da = None
    g, dist = _light_cone_gap(Y, z)
    lapse = Y[:, 0] - z[:, 0]
    if np.any(lapse <= 1e-14 * np.maximum(1.0, np.abs(Y[:, 0]))):
        bad = np.flatnonzero(lapse <= 1e-14 * np.maximum(1.0, np.abs(Y[:, 0])))[0]
        raise SingularPointError(f"field point {Y[bad]} lies on the worldline")
    if np.any(np.abs(g) > ROOT_RTOL * lapse):
        bad = np.flatnonzero(np.abs(g) > ROOT_RTOL * lapse)[0]
        raise ArithmeticError(f"retarded root did not converge for {Y[bad]} (g={g[bad]})")
    R = Y - z
    r = -minkowski_dot(R, u)
    r = np.atleast_1d(r)
    on_ray = r <= RAY_RTOL * lapse
    safe_r = np.where(on_ray, 1.0, r)
    k = R / safe_r[:, None]
    if np.any(on_ray):
        k[on_ray] = u[on_ray] / u[on_ray, :1]
    a_k = np.atleast_1d(minkowski_dot(a, k))
    return RetardedBatch(s=s, r=np.where(on_ray, 0.0, r), k=k, a_k=a_k, z=z, u=u, a=a, da=da, on_ray=on_ray)


def retarded_data(w: Worldline, y) -> RetardedData:
    """Causal light-cone root and retarded distance for a single field point."""
    return retarded_batch(w, np.asarray(y, dtype=float)[None, :]).item(0)


# -- wavefront chart -----------------------------------------------------------


def chart_frame(w: Worldline, s):
    """Emission point, velocity and the rotation taking z-hat onto the velocity direction."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    z, u, a = w.evaluate(s)
    v = u[:, 1:]
    speed = np.linalg.norm(v, axis=-1)
    rot = np.broadcast_to(np.eye(3), (len(s), 3, 3)).copy()
    moving = speed > 0
    if np.any(moving):
        rot[moving] = rotations_to_axes(v[moving])
    return z, u, a, rot


def wavefront_chart(w: Worldline, t, s, theta, phi) -> np.ndarray:
    """Point ``z(s) + (t - s) Omega n`` on the wavefront sphere emitted at ``s``.

    For lines parametrised by proper time the sphere radius is ``t - z0(s)``,
    which reduces to ``t - s`` for massless lines (laboratory-time parameter).

    ``n = (1, cos(phi) sin(theta), sin(phi) sin(theta), cos(theta))`` and
    ``Omega`` rotates the laboratory z-axis onto the emission-time velocity.
    Scalars give a single 4-vector; arrays broadcast and give ``(..., 4)``.
    """
    t, s, theta, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, s, theta, phi)))
    if w.dim != 4:
        raise DimensionError("wavefront chart is defined in 4D")
    shape = s.shape
    z, _, _, rot = chart_frame(w, s.ravel())
    lapse = t.ravel() - z[:, 0]
    if np.any(lapse <= 0):
        raise ValueError("wavefront chart needs z0(s) < t")
    st = np.sin(theta.ravel())
    nvec = np.stack([np.cos(phi.ravel()) * st, np.sin(phi.ravel()) * st, np.cos(theta.ravel())], axis=-1)
    x = np.empty((len(lapse), 4))
    x[:, 0] = t.ravel()
    x[:, 1:] = z[:, 1:] + lapse[:, None] * np.einsum("nij,nj->ni", rot, nvec)
    x = x.reshape(shape + (4,))
    return x
