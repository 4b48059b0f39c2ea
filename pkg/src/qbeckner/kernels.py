"""Scalar kernels and their divided differences.

One-variable kernels drive the functional calculus (matrix functions,
weighted inner products); two-variable kernels drive double operator sums.
All power-difference quotients are evaluated through ``expm1``/``log1p`` so
they stay accurate when the two arguments nearly coincide, and every kernel
carries an exact degenerate branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation

# Degenerate-pair threshold for divided differences: below this relative
# separation the derivative branch is used (balances cancellation error
# against derivative-branch bias at double precision).
SAME_TOL = 1e-9

# Wider window inside which partial derivatives of divided differences use
# their midpoint Taylor expansion instead of the quotient-rule formula.
NEAR_TOL = 1e-6


def _rel_scale(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))


def _is_same(x: np.ndarray, y: np.ndarray, tol: float = SAME_TOL) -> np.ndarray:
    return np.abs(x - y) <= tol * _rel_scale(x, y)


def stable_powdiff(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(x^a - y^a) / (x - y) for x, y > 0, with the a*m^(a-1) degenerate rule.

    Computed as hi^a * expm1(a*log1p((lo-hi)/hi)) / (lo-hi), which is free of
    subtractive cancellation for any separation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    same = _is_same(x, y)
    m = 0.5 * (x + y)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        diff = lo - hi
        ell = np.log1p(np.where(same, 0.0, diff) / np.where(hi > 0, hi, 1.0))
        far = hi**a * np.expm1(a * ell) / np.where(same, 1.0, diff)
        deg = a * m ** (a - 1.0) if a != 1.0 else np.ones_like(m)
    return np.where(same, deg, far)


def stable_powm1(a: float, x: np.ndarray) -> np.ndarray:
    """x^a - 1 for x > 0, accurate near x = 1."""
    return np.expm1(a * np.log(x))


# ---------------------------------------------------------------------------
# One-variable kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel1:
    """A scalar function with optional derivatives and a positivity domain.

    ``domain_min`` is the largest value that must stay strictly below the
    spectrum (``-inf`` disables the check); ``allow_boundary`` admits
    eigenvalues equal to ``domain_min``.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d3f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain_min: float = -np.inf
    allow_boundary: bool = True
    params: dict = field(default_factory=dict)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.f(np.asarray(x, dtype=float))

    def check_domain(self, eigenvalues: np.ndarray) -> None:
        lo = float(np.min(eigenvalues))
        if self.allow_boundary:
            ok = lo >= self.domain_min
        else:
            ok = lo > self.domain_min
        if not ok:
            raise DomainViolation(
                f"kernel {self.name}: eigenvalue {lo:.3e} outside domain "
                f"(min {self.domain_min}, boundary allowed: {self.allow_boundary})"
            )


def identity_kernel() -> Kernel1:
    return Kernel1("identity", f=lambda x: x, df=lambda x: np.ones_like(x),
                   d2f=lambda x: np.zeros_like(x), d3f=lambda x: np.zeros_like(x))


def constant_kernel(c: float = 1.0) -> Kernel1:
    return Kernel1("constant", f=lambda x: np.full_like(x, c),
                   df=lambda x: np.zeros_like(x), params={"c": c})


def power_kernel(a: float) -> Kernel1:
    """x^a on (0, inf); the boundary x = 0 is admitted when a >= 0."""
    a = float(a)
    return Kernel1(
        f"power({a})",
        f=lambda x: x**a,
        df=lambda x: a * x ** (a - 1.0),
        d2f=lambda x: a * (a - 1.0) * x ** (a - 2.0),
        d3f=lambda x: a * (a - 1.0) * (a - 2.0) * x ** (a - 3.0),
        domain_min=0.0,
        allow_boundary=a >= 0.0,
        params={"a": a},
    )


def log_kernel() -> Kernel1:
    return Kernel1("log", f=np.log, df=lambda x: 1.0 / x,
                   d2f=lambda x: -1.0 / x**2, d3f=lambda x: 2.0 / x**3,
                   domain_min=0.0, allow_boundary=False)


def exp_kernel() -> Kernel1:
    return Kernel1("exp", f=np.exp, df=np.exp, d2f=np.exp, d3f=np.exp)


def shifted_log_kernel(s: float) -> Kernel1:
    """g_s(x) = log(x + s)."""
    s = float(s)
    return Kernel1(
        f"log(x+{s})",
        f=lambda x: np.log(x + s),
        df=lambda x: 1.0 / (x + s),
        d2f=lambda x: -1.0 / (x + s) ** 2,
        d3f=lambda x: 2.0 / (x + s) ** 3,
        domain_min=-s,
        allow_boundary=False,
        params={"s": s},
    )


def fp_kernel(p: float) -> Kernel1:
    """f_p(x) = x^(p-1) / (p-1), the convex power driving the p-calculus."""
    p = float(p)
    a = p - 1.0
    return Kernel1(
        f"fp({p})",
        f=lambda x: x**a / a,
        df=lambda x: x ** (a - 1.0),
        d2f=lambda x: (a - 1.0) * x ** (a - 2.0),
        d3f=lambda x: (a - 1.0) * (a - 2.0) * x ** (a - 3.0),
        domain_min=0.0,
        allow_boundary=a >= 1.0,
        params={"p": p},
    )


def kappa_alpha_kernel(alpha: float) -> Kernel1:
    """Power-difference mean kernel on (0, inf), normalized to kappa(1) = 1.

    kappa_alpha(x) = [alpha/(alpha-1)] * (x^(alpha-1) - 1)/(x^alpha - 1),
    with the alpha in {0, 1} and x -> 1 limits filled in analytically.
    """
    alpha = float(alpha)

    def f(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ell = np.log(x)
        near = np.abs(ell) < 1e-8
        safe = np.where(near, 1.0, ell)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if alpha == 0.0:
                far = -np.expm1(-safe) / safe
            elif alpha == 1.0:
                far = safe / np.expm1(safe)
            else:
                far = (alpha / (alpha - 1.0)) * np.expm1((alpha - 1.0) * safe) / np.expm1(alpha * safe)
        return np.where(near, 1.0 - 0.5 * ell, far)

    return Kernel1(f"kappa({alpha})", f=f, domain_min=0.0, allow_boundary=False,
                   params={"alpha": alpha})


def phi_p_kernel(p: float) -> Kernel1:
    """phi_p(x) = (x - x^(1/p)) / ((p-1)(x^(1/p) - 1)) on (0, inf).

    Implemented from its own defining quotient (not via the power-difference
    identity) so the two stay independent cross-checks.
    """
    p = float(p)

    def f(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ell = np.log(x)
        near = np.abs(ell) < 1e-8
        safe = np.where(near, 1.0, ell)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (x ** (1.0 / p) / (p - 1.0)) * np.expm1((1.0 - 1.0 / p) * safe) / np.expm1(safe / p)
        return np.where(near, 1.0 + 0.5 * ell, far)

    return Kernel1(f"phi({p})", f=f, domain_min=0.0, allow_boundary=False,
                   params={"p": p})


# ---------------------------------------------------------------------------
# Two-variable kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel2:
    """A two-variable scalar kernel with optional partial derivatives.

    ``f``, ``dx`` and ``dy`` are vectorized over broadcastable arrays and are
    responsible for their own degenerate branches.
    """

    name: str
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    dy: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    domain_min: float = -np.inf
    allow_boundary: bool = True
    params: dict = field(default_factory=dict)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.f(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def check_domain(self, eigenvalues: np.ndarray) -> None:
        lo = float(np.min(eigenvalues))
        ok = lo >= self.domain_min if self.allow_boundary else lo > self.domain_min
        if not ok:
            raise DomainViolation(
                f"kernel {self.name}: eigenvalue {lo:.3e} outside domain"
            )


def as_kernel2(fn: Callable, name: str = "custom") -> Kernel2:
    if isinstance(fn, Kernel2):
        return fn
    return Kernel2(name, f=lambda x, y: np.asarray(fn(x, y), dtype=float))


def product_kernel(kx: Kernel1, ky: Kernel1) -> Kernel2:
    """Separable kernel f(x, y) = kx(x) * ky(y)."""
    return Kernel2(
        f"{kx.name}*{ky.name}",
        f=lambda x, y: kx.f(x) * ky.f(y),
        dx=(lambda x, y: kx.df(x) * ky.f(y)) if kx.df else None,
        dy=(lambda x, y: kx.f(x) * ky.df(y)) if ky.df else None,
        domain_min=max(kx.domain_min, ky.domain_min),
        allow_boundary=kx.allow_boundary and ky.allow_boundary,
    )


def divided_difference(k: Kernel1) -> Kernel2:
    """First divided difference k^[1](x, y) of a one-variable kernel.

    The value uses the derivative rule when |x - y| <= SAME_TOL * scale; the
    partial derivatives switch to the midpoint Taylor branch inside the wider
    NEAR_TOL window, where the quotient formulas start to cancel.
    """

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        same = _is_same(x, y)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (k.f(x) - k.f(y)) / np.where(same, 1.0, x - y)
        return np.where(same, k.df(m), far)

    def dx(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _is_same(x, y, NEAR_TOL)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (k.df(x) - f(x, y)) / np.where(near, 1.0, x - y)
        taylor = 0.5 * k.d2f(m) + (x - y) * k.d3f(m) / 12.0
        return np.where(near, taylor, far)

    def dy(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _is_same(x, y, NEAR_TOL)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (f(x, y) - k.df(y)) / np.where(near, 1.0, x - y)
        taylor = 0.5 * k.d2f(m) - (x - y) * k.d3f(m) / 12.0
        return np.where(near, taylor, far)

    return Kernel2(f"{k.name}^[1]", f=f,
                   dx=dx if (k.d2f and k.d3f) else None,
                   dy=dy if (k.d2f and k.d3f) else None,
                   domain_min=k.domain_min, allow_boundary=k.allow_boundary,
                   params=dict(k.params))


def fp_divdiff_kernel(p: float) -> Kernel2:
    """f_p^[1](x, y), the divided difference of x^(p-1)/(p-1), on (0, inf)."""
    p = float(p)
    a = p - 1.0

    def f(x, y):
        return stable_powdiff(a, x, y) / a

    def _fpp(m):
        return (a - 1.0) * m ** (a - 2.0)

    def _fppp(m):
        return (a - 1.0) * (a - 2.0) * m ** (a - 3.0)

    def dx(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _is_same(x, y, NEAR_TOL)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (x ** (a - 1.0) - f(x, y)) / np.where(near, 1.0, x - y)
        taylor = 0.5 * _fpp(m) + (x - y) * _fppp(m) / 12.0
        return np.where(near, taylor, far)

    def dy(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _is_same(x, y, NEAR_TOL)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (f(x, y) - y ** (a - 1.0)) / np.where(near, 1.0, x - y)
        taylor = 0.5 * _fpp(m) - (x - y) * _fppp(m) / 12.0
        return np.where(near, taylor, far)

    return Kernel2(f"fp_dd({p})", f=f, dx=dx, dy=dy, domain_min=0.0,
                   allow_boundary=False, params={"p": p})


def theta_p_kernel(p: float) -> Kernel2:
    """theta_p(x, y) = (p-1)(x - y)/(x^(p-1) - y^(p-1)), equal to x^(2-p) on
    the diagonal. This is the reciprocal of f_p^[1] and defines the metric
    multiplication kernel."""
    p = float(p)
    a = p - 1.0

    def f(x, y):
        return a / stable_powdiff(a, x, y)

    def dx(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _is_same(x, y, NEAR_TOL)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # quotient rule on (p-1)(x-y)/D with D = x^a - y^a
            D = np.where(near, 1.0, x - y) * stable_powdiff(a, x, y)
            far = a * (D - (x - y) * a * x ** (a - 1.0)) / D**2
        taylor = (-(p - 2.0) / 2.0) * m ** (1.0 - p) \
            - (p - 2.0) * (p - 3.0) / 12.0 * m ** (-p) * (x - y)
        return np.where(near, taylor, far)

    def dy(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _is_same(x, y, NEAR_TOL)
        m = 0.5 * (x + y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            D = np.where(near, 1.0, x - y) * stable_powdiff(a, x, y)
            far = a * (-D + (x - y) * a * y ** (a - 1.0)) / D**2
        taylor = (-(p - 2.0) / 2.0) * m ** (1.0 - p) \
            + (p - 2.0) * (p - 3.0) / 12.0 * m ** (-p) * (x - y)
        return np.where(near, taylor, far)

    return Kernel2(f"theta({p})", f=f, dx=dx, dy=dy, domain_min=0.0,
                   allow_boundary=False, params={"p": p})


def theta_log_kernel() -> Kernel2:
    """Logarithmic mean (x - y)/(log x - log y), equal to x on the diagonal."""

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        same = _is_same(x, y)
        m = 0.5 * (x + y)
        hi = np.maximum(x, y)
        lo = np.minimum(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = np.log1p(np.where(same, 0.0, lo - hi) / hi)
            far = (lo - hi) / np.where(same, 1.0, ell)
        return np.where(same, m, far)

    return Kernel2("theta_log", f=f, domain_min=0.0, allow_boundary=False)
