"""Kernel functions, the jackknife transform and the scaling sequence."""
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import CalibrationError, QuadratureError

SQRT2 = math.sqrt(2.0)


def quartic_kernel(x):
    """Quartic (biweight) kernel (15/16)(1 - x^2)^2 on [-1, 1]; works on scalars and arrays."""
    x = np.asarray(x, dtype=float)
    v = 1.0 - x * x
    out = np.where(np.abs(x) <= 1.0, 0.9375 * v * v, 0.0)
    return float(out) if out.ndim == 0 else out


def quartic_derivative(x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= 1.0, -3.75 * x * (1.0 - x * x), 0.0)
    return float(out) if out.ndim == 0 else out


def integrate(f: Callable, breakpoints: Sequence[float], tol: float = 1e-8) -> float:
    """Adaptive quadrature over the pieces between ``breakpoints``.

    Raises QuadratureError when the reported error bound exceeds ``tol``.
    """
    pts = sorted(breakpoints)
    total, err = 0.0, 0.0
    g = lambda x: float(f(x))
    for a, b in zip(pts[:-1], pts[1:]):
        val, e = quad(g, a, b, epsabs=tol / 10, epsrel=0.0, limit=200)
        total += val
        err += e
    if not err <= tol:
        raise QuadratureError(f"quadrature error bound {err:.3g} exceeds {tol:g}")
    return total


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel on [-1, 1] together with the norms the thresholds need.

    ``norm_convention`` selects how the L2 norms of the jackknife kernel are
    integrated: ``"full"`` over [-1, 1] (default) or ``"half"`` over [0, 1].
    """

    name: str
    evaluate: Callable
    derivative: Callable
    breakpoints: tuple = (-1.0, 0.0, 1.0)
    norm_convention: str = "full"
    support_radius: float = 1.0
    l2_norm_K: float = field(init=False)
    l2_norm_Kstar: float = field(init=False)
    l2_norm_Kstar_deriv: float = field(init=False)

    def __post_init__(self):
        if self.norm_convention not in ("full", "half"):
            raise ValueError(f"unknown norm convention {self.norm_convention!r}")
        nk, ns, nd = kernel_norms(self.evaluate, self.derivative, self.breakpoints, self.norm_convention)
        object.__setattr__(self, "l2_norm_K", nk)
        object.__setattr__(self, "l2_norm_Kstar", ns)
        object.__setattr__(self, "l2_norm_Kstar_deriv", nd)

    def __call__(self, x):
        return self.evaluate(x)

    def jackknife(self, x):
        return jackknife_kernel(self, x)

    def jackknife_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return 4.0 * self.derivative(SQRT2 * x) - self.derivative(x)

    @property
    def is_quartic(self) -> bool:
        return self.name == "quartic"


def jackknife_kernel(spec: KernelSpec, x):
    """K*(x) = 2 sqrt(2) K(sqrt(2) x) - K(x)."""
    x = np.asarray(x, dtype=float)
    out = 2.0 * SQRT2 * np.asarray(spec.evaluate(SQRT2 * x)) - np.asarray(spec.evaluate(x))
    return float(out) if out.ndim == 0 else out


def kernel_norms(
    evaluate: Callable,
    derivative: Callable,
    breakpoints: Sequence[float] = (-1.0, 0.0, 1.0),
    convention: str = "full",
):
    """Return (||K||_2, ||K*||_2, ||(K*)'||_2) by adaptive Simpson quadrature.

    ``convention="half"`` integrates the jackknife norms over [0, 1] only.
    """
    half = 1.0 / SQRT2
    pts = sorted(set(list(breakpoints) + [-half, half]))

    def kstar(x):
        return 2.0 * SQRT2 * evaluate(SQRT2 * x) - evaluate(x)

    def kstar_d(x):
        return 4.0 * derivative(SQRT2 * x) - derivative(x)

    star_pts = pts if convention == "full" else [p for p in pts if p >= 0.0]
    nk = integrate(lambda x: np.asarray(evaluate(x)) ** 2, pts)
    ns = integrate(lambda x: kstar(x) ** 2, star_pts)
    nd = integrate(lambda x: kstar_d(x) ** 2, star_pts)
    for v in (nk, ns, nd):
        if not v > 0:
            raise QuadratureError("kernel norm is not positive")
    return math.sqrt(nk), math.sqrt(ns), math.sqrt(nd)


@functools.lru_cache(maxsize=None)
def quartic(norm_convention: str = "full") -> KernelSpec:
    return KernelSpec("quartic", quartic_kernel, quartic_derivative, norm_convention=norm_convention)


def scaling_sequence(T: float, h: float, spec: Optional[KernelSpec] = None) -> float:
    """l_n = sqrt(2 log(T ||(K*)'||_2 / (2 pi h ||K*||_2)))."""
    spec = spec or quartic()
    if T < 1 or not h > 0:
        raise CalibrationError(f"invalid horizon/bandwidth T={T}, h={h}")
    arg = T * spec.l2_norm_Kstar_deriv / (2.0 * math.pi * h * spec.l2_norm_Kstar)
    if arg <= 1.0:
        raise CalibrationError(f"log argument {arg:.6g} <= 1: bandwidth {h} too large for T={T}")
    return math.sqrt(2.0 * math.log(arg))
