"""Dormand-Prince 5(4) embedded Runge-Kutta stepping with PI step-size control."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from radreact.errors import ExtrapolationError, StepSizeUnderflowError

# Dormand & Prince (1980), RK5(4)7M.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4

ORDER = 5


@dataclass
class StepResult:
    t: float
    y: np.ndarray
    h: float
    h_next: float
    error: float
    rejected: int


class DormandPrince:
    """Adaptive single-step driver.

    ``rhs(t, y)`` returns ``dy/dt``.  ``project(y)``, if given, is applied to
    every accepted solution (constraint enforcement).  The controller is the
    PI rule ``h *= safety * err**(-alpha) * err_prev**beta``.
    """

    alpha = 0.7 / ORDER
    beta = 0.4 / ORDER

    def __init__(
        self,
        rhs: Callable[[float, np.ndarray], np.ndarray],
        rtol: float = 1e-10,
        atol: float = 1e-12,
        *,
        h_min: float = 1e-14,
        h_max: float = np.inf,
        safety: float = 0.9,
        project: Callable[[np.ndarray], np.ndarray] | None = None,
        max_rejects: int = 60,
    ):
        self.rhs = rhs
        self.rtol = rtol
        self.atol = atol
        self.h_min = h_min
        self.h_max = h_max
        self.safety = safety
        self.project = project
        self.max_rejects = max_rejects
        self._err_prev = 1e-4

    def attempt(self, t: float, y: np.ndarray, h: float):
        """One trial step; returns ``(y5, scaled error norm)``."""
        k = np.empty((7, y.size))
        k[0] = self.rhs(t, y)
        for i in range(1, 7):
            yi = y + h * (np.asarray(A[i]) @ k[:i])
            k[i] = self.rhs(t + C[i] * h, yi)
        y5 = y + h * (B5 @ k)
        err = h * (E @ k)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y5))
        return y5, float(np.sqrt(np.mean((err / scale) ** 2)))

    def step(self, t: float, y: np.ndarray, h: float) -> StepResult:
        """Take one accepted step starting with trial size ``h``."""
        y = np.asarray(y, dtype=float)
        rejected = 0
        h = min(h, self.h_max)
        while True:
            if abs(h) < self.h_min:
                raise StepSizeUnderflowError(f"step size {h:.3e} below minimum at t={t:.6g}")
            try:
                y_new, err = self.attempt(t, y, h)
                ok = np.all(np.isfinite(y_new)) and np.isfinite(err)
            except (ArithmeticError, FloatingPointError, ExtrapolationError):
                ok, err = False, np.inf
            if ok and err <= 1.0:
                break
            rejected += 1
            if rejected > self.max_rejects:
                raise StepSizeUnderflowError(f"too many rejected steps at t={t:.6g}")
            factor = 0.2 if not np.isfinite(err) else max(0.2, self.safety * err ** (-1.0 / ORDER))
            h *= factor
        err = max(err, 1e-10)
        factor = self.safety * err ** (-self.alpha) * self._err_prev**self.beta
        factor = min(5.0, max(0.2, factor))
        if rejected:
            factor = min(factor, 1.0)
        self._err_prev = err
        if self.project is not None:
            y_new = self.project(y_new)
        return StepResult(t=t + h, y=y_new, h=h, h_next=min(h * factor, self.h_max), error=err, rejected=rejected)
