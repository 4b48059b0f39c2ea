"""Weighted norms, power operators, entropies, divergences and variances.

The sigma-weighted p-norm is ||X||_{p,sigma} = tr(|sigma^(1/2p) X sigma^(1/2p)|^p)^(1/p);
everything else in this module is built on top of it and the weighted kernel
inner products from :mod:`qbeckner.linalg`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import SingularState, ZeroExponent
from .kernels import Kernel1, kappa_alpha_kernel, log_kernel

SUPPORT_TOL = 1e-12
P_ONE_BRANCH = 1e-4  # |p-1| below this uses the analytic p -> 1 limits


@dataclass(frozen=True)
class DivergenceValue:
    value: float
    kind: str
    param: float | None = None

    def __float__(self) -> float:
        return self.value


def _clamp(value: float, floor: float = 1e-10) -> float:
    if value < -floor:
        return value  # caller decides; genuine negativity is a bug upstream
    return max(value, 0.0)


def _sigma_power(sigma: np.ndarray, s: float) -> np.ndarray:
    w, U = la.herm_eigh(sigma)
    if s < 0 and np.min(w) <= 0:
        raise SingularState("negative power of a singular state")
    return (U * np.maximum(w, 0.0) ** s) @ U.conj().T


def weighted_p_norm(X: np.ndarray, sigma: np.ndarray, p: float) -> float:
    """sigma-weighted p-(quasi)norm; p = inf gives the operator norm."""
    if np.isinf(p):
        return float(np.max(np.linalg.svd(np.asarray(X, dtype=complex),
                                          compute_uv=False)))
    if p <= 0:
        raise ZeroExponent("p must be positive")
    la.check_full_rank(sigma)
    half = _sigma_power(sigma, 1.0 / (2.0 * p))
    A = half @ X @ half
    sv = np.linalg.svd(A, compute_uv=False)
    return float(np.sum(sv**p) ** (1.0 / p))


def relative_density(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Gamma_sigma^{-1}(rho) = sigma^(-1/2) rho sigma^(-1/2)."""
    ihalf = _sigma_power(sigma, -0.5)
    return ihalf @ rho @ ihalf


def power_operator(X: np.ndarray, sigma: np.ndarray, q: float, p: float) -> np.ndarray:
    """I_{q,p}(X) = Gamma^(-1/q)(|Gamma^(1/p) X|^(p/q))."""
    if p == 0 or q == 0:
        raise ZeroExponent("power operator needs nonzero exponents")
    la.check_full_rank(sigma)
    gp = _sigma_power(sigma, 1.0 / (2.0 * p))
    gq = _sigma_power(sigma, -1.0 / (2.0 * q))
    inner = la.abs_power(gp @ X @ gp, p / q)
    return gq @ inner @ gq


def entropy_functional(X: np.ndarray, sigma: np.ndarray, p: float) -> float:
    """Ent_{p,sigma}(X) for X >= 0 and p >= 1: the weighted-norm entropy

    tr(A^p (log A^p - log sigma)) - ||X||^p log ||X||^p with A = Gamma^(1/p) X.
    """
    la.check_full_rank(sigma)
    half = _sigma_power(sigma, 1.0 / (2.0 * p))
    A = half @ X @ half
    a, V = la.herm_eigh(A)
    a = np.maximum(a, 0.0)
    pos = a > 0.0
    norm_p = float(np.sum(a**p))
    # tr(A^p log A^p) = p * sum a^p log a
    term1 = p * float(np.sum(a[pos] ** p * np.log(a[pos])))
    log_sigma = la.matrix_function(sigma, log_kernel())
    Ap = (V * a**p) @ V.conj().T
    term2 = float(np.real(np.trace(Ap @ log_sigma)))
    ent = term1 - term2 - (norm_p * np.log(norm_p) if norm_p > 0 else 0.0)
    return _clamp(ent)


def _support_restrict(rho: np.ndarray, sigma: np.ndarray):
    """Project both states onto the support of sigma; None if rho leaks out."""
    w, U = la.herm_eigh(sigma)
    keep = w > SUPPORT_TOL
    if np.all(keep):
        return rho, sigma
    P = U[:, keep]
    leak = la.frob(rho - P @ (P.conj().T @ rho @ P) @ P.conj().T)
    if leak > 1e-10:
        return None
    return P.conj().T @ rho @ P, P.conj().T @ sigma @ P


def umegaki(rho: np.ndarray, sigma: np.ndarray) -> float:
    """tr(rho log rho - rho log sigma), +inf on support violation."""
    restricted = _support_restrict(rho, sigma)
    if restricted is None:
        return np.inf
    rho, sigma = restricted
    r, _ = la.herm_eigh(rho)
    r = np.maximum(r, 0.0)
    pos = r > 0.0
    s_log = la.matrix_function(sigma, log_kernel())
    return float(np.sum(r[pos] * np.log(r[pos])) - np.real(np.trace(rho @ s_log)))


def relative_entropies(rho: np.ndarray, sigma: np.ndarray, kind: str,
                       p: float | None = None) -> DivergenceValue:
    """Umegaki, sandwiched Renyi of order p, or max-relative entropy."""
    restricted = _support_restrict(rho, sigma)
    if restricted is None:
        return DivergenceValue(np.inf, kind, p)
    rho_r, sigma_r = restricted
    if kind == "umegaki":
        return DivergenceValue(_clamp(umegaki(rho_r, sigma_r)), kind)
    if kind == "sandwiched":
        if p is None or p <= 0 or p == 1.0:
            raise ValueError("sandwiched entropy needs p in (0,1) or (1,inf)")
        if np.isinf(p):
            return relative_entropies(rho, sigma, "max")
        phat = p / (p - 1.0)
        val = phat * np.log(weighted_p_norm(relative_density(rho_r, sigma_r),
                                            sigma_r, p))
        return DivergenceValue(_clamp(val) if p > 1 else val, kind, p)
    if kind == "max":
        rel = relative_density(rho_r, sigma_r)
        val = float(np.log(np.max(np.linalg.eigvalsh(la.herm(rel)))))
        return DivergenceValue(val, kind)
    raise ValueError(f"unknown relative entropy kind {kind!r}")


def p_divergence(rho: np.ndarray, sigma: np.ndarray, p: float) -> DivergenceValue:
    """Normalized noncommutative L_p divergence

    F_{p,sigma}(rho) = (||Gamma^{-1} rho||_{p,sigma}^p - 1) / (p (p - 1)),
    interpolating the variance (p = 2) and relative entropy (p -> 1).
    """
    if abs(p - 1.0) < P_ONE_BRANCH:
        restricted = _support_restrict(rho, sigma)
        if restricted is None:
            return DivergenceValue(np.inf, "p_divergence", p)
        return DivergenceValue(_clamp(umegaki(*restricted)), "p_divergence", p)
    restricted = _support_restrict(rho, sigma)
    if restricted is None:
        return DivergenceValue(np.inf, "p_divergence", p)
    rho_r, sigma_r = restricted
    norm = weighted_p_norm(relative_density(rho_r, sigma_r), sigma_r, p)
    val = (norm**p - 1.0) / (p * (p - 1.0))
    return DivergenceValue(_clamp(val), "p_divergence", p)


def variance(X: np.ndarray, sigma: np.ndarray) -> float:
    """Var_sigma(X) = ||X||_{2,sigma}^2 - ||X||_{1,sigma}^2."""
    return _clamp(weighted_p_norm(X, sigma, 2.0) ** 2
                  - weighted_p_norm(X, sigma, 1.0) ** 2)


def q_variance(Y: np.ndarray, sigma: np.ndarray, q: float) -> float:
    """Var_{q,sigma}(Y) = ||Y||_{2,sigma}^2 - ||Y||_{q,sigma}^2 for q in [1,2)."""
    if not 1.0 <= q < 2.0:
        raise ValueError("q must lie in [1, 2)")
    return _clamp(weighted_p_norm(Y, sigma, 2.0) ** 2
                  - weighted_p_norm(Y, sigma, q) ** 2)


def chi2_divergence(rho: np.ndarray, sigma: np.ndarray,
                    kernel: Kernel1) -> DivergenceValue:
    """Quadratic divergence <rho - sigma, R_sigma^{-1} kappa(Delta)(rho - sigma)>.

    ``kernel`` must be a normalized operator-convex mean kernel such as
    ``kappa_alpha_kernel``.
    """
    restricted = _support_restrict(rho, sigma)
    if restricted is None:
        return DivergenceValue(np.inf, f"chi2[{kernel.name}]")
    rho_r, sigma_r = restricted
    w, U = la.herm_eigh(sigma_r)
    D = U.conj().T @ (rho_r - sigma_r) @ U
    ratios = w[:, None] / w[None, :]
    weights = kernel.f(ratios) / w[None, :]
    val = float(np.real(np.sum(weights * np.abs(D) ** 2)))
    return DivergenceValue(_clamp(val), f"chi2[{kernel.name}]")


def chi2_power_difference(rho: np.ndarray, sigma: np.ndarray, p: float) -> DivergenceValue:
    """chi^2 divergence with the power-difference kernel of exponent 1/p."""
    return chi2_divergence(rho, sigma, kappa_alpha_kernel(1.0 / p))


def sandwich_constants(sigma: np.ndarray, p: float, c: float):
    """Constants (k_p(c), C(sigma)) of the two-sided chi^2 comparison.

    k_p(c) = (c^p - 1 - p(c-1)) / (p (c-1)^2 (p-1)), evaluated by series for
    c near 1 (the limit is 1/2 for every p); C(sigma) = 1 / sigma_min.
    """
    w = np.linalg.eigvalsh(la.herm(sigma))
    if np.min(w) < la.FULL_RANK_FLOOR:
        raise SingularState("sandwich constants need a full-rank state")
    h = c - 1.0
    if abs(h) < 1e-6:
        kp = 0.5 + (p - 2.0) * h / 6.0 + (p - 2.0) * (p - 3.0) * h * h / 24.0
    else:
        kp = (c**p - 1.0 - p * h) / (p * h * h * (p - 1.0))
    return float(kp), float(1.0 / np.min(w))
