"""p-Dirichlet forms, entropy production, and the carre du champ calculus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import entropy as ent
from . import linalg as la
from .errors import NotPsd, NotSymmetric, SingularState
from .kernels import fp_divdiff_kernel, log_kernel
from .semigroup import DbcLindbladian

P_ONE_BRANCH = ent.P_ONE_BRANCH
NEG_TOL = 1e-9


@dataclass(frozen=True)
class DirichletValue:
    value: float
    p: float
    route: str

    def __float__(self) -> float:
        return self.value


def _check_psd(X: np.ndarray) -> None:
    w = np.linalg.eigvalsh(la.herm(X))
    if np.min(w) < -1e-10 * max(1.0, np.max(np.abs(w))):
        raise NotPsd(f"argument has eigenvalue {np.min(w):.3e}")


def _finalize(value: float, p: float, route: str) -> DirichletValue:
    if not np.isfinite(value):
        raise NotPsd(f"Dirichlet form is not finite: {value}")
    if value < -NEG_TOL * max(1.0, abs(value)):
        raise NotPsd(f"Dirichlet form came out negative: {value:.3e}")
    return DirichletValue(max(value, 0.0), p, route)


def dirichlet_form(L: DbcLindbladian, X: np.ndarray, p: float) -> DirichletValue:
    """Entropy-production form E_{p,L}(X) for X >= 0 and p >= 1.

    For p > 1 this is -(phat p / 4) <I_{phat,p}(X), L X>_KMS with
    phat = p/(p-1); at p = 1 (|p-1| below the branch cut) the analytic limit
    -(1/4) <log Gamma X - log sigma, L X>_KMS is used instead.
    """
    _check_psd(X)
    LX = L.apply(X)
    if abs(p - 1.0) < P_ONE_BRANCH:
        # log(Gamma_sigma X) with an eigenvalue floor: boundary zeros of X
        # contribute 0 * log 0 terms that are paired against L X below.
        GX = la.herm(L.sigma_power(0.5) @ X @ L.sigma_power(0.5))
        g, Vg = la.herm_eigh(GX)
        g = np.maximum(g, 1e-300)
        log_GX = (Vg * np.log(g)) @ Vg.conj().T
        log_sigma = la.matrix_function(L.sigma, log_kernel())
        val = -0.25 * np.real(la.kms_inner(log_GX - log_sigma, LX, L.sigma))
        return _finalize(float(val), p, "definition")
    phat = p / (p - 1.0)
    I_phat_p = ent.power_operator(X, L.sigma, phat, p)
    val = -(phat * p / 4.0) * np.real(la.kms_inner(I_phat_p, LX, L.sigma))
    return _finalize(float(val), p, "definition")


def dirichlet_form_representation(L: DbcLindbladian, X: np.ndarray,
                                  p: float) -> DirichletValue:
    """Jump-wise divided-difference representation of E_{p,L}; needs X > 0."""
    L.require_jumps()
    w = np.linalg.eigvalsh(la.herm(X))
    if np.min(w) <= 0:
        raise NotPsd("representation route needs strictly positive X")
    half = L.sigma_power(1.0 / (2.0 * p))
    GX = la.herm(half @ X @ half)
    fp = fp_divdiff_kernel(p)
    total = 0.0
    for j, (V, omega) in enumerate(L.jumps):
        dX = V @ X - X @ V
        C = half @ dX @ half
        A = np.exp(omega / (2.0 * p)) * GX
        B = np.exp(-omega / (2.0 * p)) * GX
        total += np.real(la.hs_inner(C, la.double_sum_apply(fp, A, B, C)))
    val = (p * p / 4.0) * total
    return _finalize(float(val), p, "representation")


def representation_check(L: DbcLindbladian, X: np.ndarray, p: float) -> float:
    """Relative gap between the defining and jump-representation routes."""
    d_def = dirichlet_form(L, X, p).value
    d_rep = dirichlet_form_representation(L, X, p).value
    return abs(d_def - d_rep) / (1.0 + d_def)


def entropy_production(L: DbcLindbladian, rho: np.ndarray, p: float) -> float:
    """(4/p^2) E_{p,L}(Gamma^{-1} rho) = -d/dt F_{p,sigma}(rho_t) at t = 0."""
    w = np.linalg.eigvalsh(la.herm(rho))
    if np.min(w) < la.FULL_RANK_FLOOR:
        raise SingularState("entropy production needs a full-rank state")
    X = ent.relative_density(rho, L.sigma)
    return (4.0 / p**2) * dirichlet_form(L, X, p).value


def _check_symmetric(L: DbcLindbladian) -> None:
    d = L.d
    if la.frob(L.sigma - np.eye(d) / d) > 1e-10:
        raise NotSymmetric("carre du champ machinery needs sigma = I/d")


def carre_du_champ(L: DbcLindbladian, X: np.ndarray, Y: np.ndarray | None = None,
                   order: int = 1) -> np.ndarray:
    """Gradient form of a symmetric semigroup.

    order 1: Gamma(X, Y) = (L(X†Y) - X† L(Y) - (L X)† Y) / 2
    order 2: Gamma_2(X, Y) = -(Gamma(X, L Y) + Gamma(L X, Y) - L Gamma(X, Y)) / 2
    """
    _check_symmetric(L)
    if Y is None:
        Y = X
    if order == 1:
        Xd = X.conj().T
        return 0.5 * (L.apply(Xd @ Y) - Xd @ L.apply(Y) - L.apply(X).conj().T @ Y)
    if order == 2:
        G = carre_du_champ(L, X, Y, order=1)
        return -0.5 * (carre_du_champ(L, X, L.apply(Y), order=1)
                       + carre_du_champ(L, L.apply(X), Y, order=1)
                       - L.apply(G))
    raise ValueError("order must be 1 or 2")
