"""Dense Hermitian linear algebra, superoperators, and double operator sums.

Conventions used throughout the package:

* superoperators are (d^2 x d^2) complex matrices acting on column-stacked
  vectorizations, so ``vec(A X B) = kron(B.T, A) @ vec(X)``;
* eigenvalues are returned ascending;
* sums over eigenprojection pairs run in a fixed (i outer, k inner) order,
  so results are reproducible run to run.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .errors import DomainViolation, NonHermitian, NotPsd, SingularState
from .kernels import Kernel1, Kernel2, SAME_TOL, as_kernel2

HERM_TOL = 1e-12
PSD_FLOOR = 1e-10
FULL_RANK_FLOOR = 1e-12


def herm(A: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A†)/2."""
    return 0.5 * (A + A.conj().T)


def hermiticity_residual(A: np.ndarray) -> float:
    return float(np.max(np.abs(A - A.conj().T)))


def check_hermitian(A: np.ndarray, tol: float = HERM_TOL) -> None:
    scale = 1.0 + float(np.max(np.abs(A))) if A.size else 1.0
    if hermiticity_residual(A) > tol * scale:
        raise NonHermitian(
            f"symmetry residual {hermiticity_residual(A):.3e} exceeds {tol:.1e} * {scale:.3e}"
        )


def herm_eigh(A: np.ndarray, check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    A = np.asarray(A, dtype=complex)
    if check:
        check_hermitian(A)
    w, V = np.linalg.eigh(herm(A))
    return w, V


def matrix_function(A: np.ndarray, k: Kernel1) -> np.ndarray:
    """Apply the scalar kernel k to a Hermitian matrix through its spectrum."""
    w, V = herm_eigh(A)
    k.check_domain(w)
    return (V * k.f(w)) @ V.conj().T


def matrix_power_hermitian(A: np.ndarray, r: float) -> np.ndarray:
    """A^r for Hermitian PSD A (strictly PD required when r < 0)."""
    w, V = herm_eigh(A)
    if r < 0 and np.min(w) <= 0:
        raise DomainViolation(f"negative power {r} of a singular matrix")
    w = np.maximum(w, 0.0) if r >= 0 else w
    return (V * w**r) @ V.conj().T


def abs_power(A: np.ndarray, r: float) -> np.ndarray:
    """|A|^r via the spectrum of |A| = (A†A)^(1/2).

    Hermitian inputs use |eigenvalues| directly and general inputs the
    singular values, so the dynamic range is never squared; forming A†A
    first underflows for the large power chains of the p < 1 branches.
    """
    A = np.asarray(A, dtype=complex)
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if hermiticity_residual(A) <= 1e-12 * (1.0 + scale):
        w, V = herm_eigh(herm(A), check=False)
        s = np.abs(w)
    else:
        _, s, vh = np.linalg.svd(A)
        V = vh.conj().T
        s = s[::-1].copy()
        V = V[:, ::-1]
    if r < 0 and np.min(s) <= 0.0:
        raise DomainViolation(f"negative power {r} of a singular modulus")
    return (V * s**r) @ V.conj().T


def psd_project(A: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Clamp eigenvalues in (-floor, 0) to zero; deeper negatives are errors."""
    w, V = herm_eigh(A)
    if np.min(w) < -floor:
        raise NotPsd(f"eigenvalue {np.min(w):.3e} below -{floor:.1e}")
    w = np.maximum(w, 0.0)
    return (V * w) @ V.conj().T


def check_density(rho: np.ndarray, trace_tol: float = 1e-10,
                  eig_floor: float = PSD_FLOOR) -> None:
    check_hermitian(rho)
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise NotPsd(f"trace {np.trace(rho).real} deviates from 1")
    w = np.linalg.eigvalsh(herm(rho))
    if np.min(w) < -eig_floor:
        raise NotPsd(f"state eigenvalue {np.min(w):.3e} below -{eig_floor:.1e}")


def check_full_rank(sigma: np.ndarray, floor: float = FULL_RANK_FLOOR) -> None:
    w = np.linalg.eigvalsh(herm(sigma))
    if np.min(w) < floor:
        raise SingularState(f"minimum eigenvalue {np.min(w):.3e} below {floor:.1e}")


# ---------------------------------------------------------------------------
# Vectorization and superoperators (column-stacking convention)
# ---------------------------------------------------------------------------


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X, dtype=complex).flatten(order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v).ravel()
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def apply_super(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    return unvec(S @ vec(X), X.shape[0])


def left_super(A: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X."""
    A = np.asarray(A, dtype=complex)
    return np.kron(np.eye(A.shape[0]), A)


def right_super(B: np.ndarray) -> np.ndarray:
    """Superoperator of X -> X B."""
    B = np.asarray(B, dtype=complex)
    return np.kron(B.T, np.eye(B.shape[0]))


def sandwich_super(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X B."""
    return np.kron(np.asarray(B, dtype=complex).T, np.asarray(A, dtype=complex))


def modular_super(sigma: np.ndarray) -> np.ndarray:
    """Modular operator X -> sigma X sigma^{-1} for full-rank sigma."""
    check_full_rank(sigma)
    sigma_inv = matrix_power_hermitian(sigma, -1.0)
    return sandwich_super(sigma, sigma_inv)


def gamma_power_super(sigma: np.ndarray, s: float) -> np.ndarray:
    """Weighting operator X -> sigma^{s/2} X sigma^{s/2} (s = 1 is Gamma_sigma)."""
    check_full_rank(sigma)
    half = matrix_power_hermitian(sigma, s / 2.0)
    return sandwich_super(half, half)


def gamma_apply(sigma_half_power: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Apply X -> P X P for a precomputed matrix power P = sigma^(s/2)."""
    return sigma_half_power @ X @ sigma_half_power


def j_kernel_super(sigma: np.ndarray, k: Kernel1) -> np.ndarray:
    """Weighted kernel operator R_sigma f(Delta_sigma) as a superoperator."""
    check_full_rank(sigma)
    w, V = herm_eigh(sigma)
    ratios = w[:, None] / w[None, :]
    k.check_domain(ratios.ravel())
    weights = k.f(ratios) * w[None, :]
    return _schur_super(weights, V, V)


# ---------------------------------------------------------------------------
# Double operator sums (Schur multipliers)
# ---------------------------------------------------------------------------


def _schur_weights(k2: Kernel2, wA: np.ndarray, wB: np.ndarray) -> np.ndarray:
    k2.check_domain(np.concatenate([wA, wB]))
    return np.asarray(k2.f(wA[:, None], wB[None, :]), dtype=float)


def double_sum_apply(k2, A: np.ndarray, B: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Sum_{i,k} f(a_i, b_k) P_i X Q_k over the eigenprojections of A and B."""
    k2 = as_kernel2(k2)
    wA, VA = herm_eigh(A)
    wB, VB = herm_eigh(B)
    F = _schur_weights(k2, wA, wB)
    Xt = VA.conj().T @ X @ VB
    return VA @ (F * Xt) @ VB.conj().T


def _schur_super(F: np.ndarray, VA: np.ndarray, VB: np.ndarray) -> np.ndarray:
    d = VA.shape[0]
    W = np.kron(VB.conj(), VA)
    return (W * F.flatten(order="F")) @ W.conj().T


def double_sum_super(k2, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Superoperator matrix of the Schur multiplier f(A, B)."""
    k2 = as_kernel2(k2)
    wA, VA = herm_eigh(A)
    wB, VB = herm_eigh(B)
    F = _schur_weights(k2, wA, wB)
    return _schur_super(F, VA, VB)


def partial_dd_tensor(k2: Kernel2, which: int, wA: np.ndarray,
                      wB: np.ndarray) -> np.ndarray:
    """Weight tensor of a partial divided difference of a two-variable kernel.

    which=1: W[a,b,c] = (f(wA_a, wB_c) - f(wA_b, wB_c)) / (wA_a - wA_b),
             falling back to d/dx f at the midpoint for degenerate pairs.
    which=2: W[a,b,c] = (f(wA_a, wB_b) - f(wA_a, wB_c)) / (wB_b - wB_c),
             falling back to d/dy f at the midpoint.
    """
    if which == 1:
        x = wA[:, None, None]
        xp = wA[None, :, None]
        y = wB[None, None, :]
        same = np.abs(x - xp) <= SAME_TOL * np.maximum(1.0, np.maximum(np.abs(x), np.abs(xp)))
        with np.errstate(divide="ignore", invalid="ignore"):
            far = (k2.f(x, y) - k2.f(xp, y)) / np.where(same, 1.0, x - xp)
        if k2.dx is None:
            raise DomainViolation(f"kernel {k2.name} has no d/dx rule")
        deg = k2.dx(0.5 * (x + xp), y)
        return np.where(same, deg, far)
    if which == 2:
        x = wA[:, None, None]
        y = wB[None, :, None]
        yp = wB[None, None, :]
        same = np.abs(y - yp) <= SAME_TOL * np.maximum(1.0, np.maximum(np.abs(y), np.abs(yp)))
        with np.errstate(divide="ignore", invalid="ignore"):
            far = (k2.f(x, y) - k2.f(x, yp)) / np.where(same, 1.0, y - yp)
        if k2.dy is None:
            raise DomainViolation(f"kernel {k2.name} has no d/dy rule")
        deg = k2.dy(x, 0.5 * (y + yp))
        return np.where(same, deg, far)
    raise ValueError("which must be 1 or 2")


def partial_divdiff_apply(k2: Kernel2, which: int, A: np.ndarray, B: np.ndarray,
                          X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Triple operator sum of a partial divided difference applied to (X, Y).

    which=1 evaluates (d1 f)((A, A), B)[X, Y]; which=2 evaluates
    (d2 f)(A, (B, B))[X, Y].
    """
    wA, VA = herm_eigh(A)
    wB, VB = herm_eigh(B)
    k2.check_domain(np.concatenate([wA, wB]))
    W = partial_dd_tensor(k2, which, wA, wB)
    if which == 1:
        M1 = VA.conj().T @ X @ VA
        M2 = VA.conj().T @ Y @ VB
    else:
        M1 = VA.conj().T @ X @ VB
        M2 = VB.conj().T @ Y @ VB
    R = np.einsum("abc,ab,bc->ac", W, M1, M2)
    return VA @ R @ VB.conj().T


# ---------------------------------------------------------------------------
# Inner products
# ---------------------------------------------------------------------------


def hs_inner(X: np.ndarray, Y: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product tr(X† Y)."""
    return complex(np.trace(X.conj().T @ Y))


def s_inner(X: np.ndarray, Y: np.ndarray, sigma: np.ndarray, s: float) -> complex:
    """tr(sigma^s X† sigma^(1-s) Y) for full-rank sigma."""
    check_full_rank(sigma)
    ss = matrix_power_hermitian(sigma, s)
    s1 = matrix_power_hermitian(sigma, 1.0 - s)
    return complex(np.trace(ss @ X.conj().T @ s1 @ Y))


def kms_inner(X: np.ndarray, Y: np.ndarray, sigma: np.ndarray) -> complex:
    return s_inner(X, Y, sigma, 0.5)


def gns_inner(X: np.ndarray, Y: np.ndarray, sigma: np.ndarray) -> complex:
    return s_inner(X, Y, sigma, 1.0)


def f_inner(X: np.ndarray, Y: np.ndarray, sigma: np.ndarray, k: Kernel1) -> complex:
    """Weighted inner product <X, R_sigma f(Delta_sigma) Y>."""
    check_full_rank(sigma)
    w, V =herm_eigh(sigma)
    ratios = w[:, None] / w[None, :]
    k.check_domain(ratios.ravel())
    F = k.f(ratios) * w[None, :]
    Yt = V.conj().T @ Y @ V
    JY = V @ (F * Yt) @ V.conj().T
    return complex(np.trace(X.conj().T @ JY))


def f_norm_sq(X: np.ndarray, sigma: np.ndarray, k: Kernel1) -> float:
    return float(np.real(f_inner(X, X, sigma, k)))


# ---------------------------------------------------------------------------
# Norms, Choi matrix, randomness
# ---------------------------------------------------------------------------


def frob(A: np.ndarray) -> float:
    return float(np.linalg.norm(A))


def trace_norm(A: np.ndarray) -> float:
    """Trace norm; for Hermitian A this is the sum of |eigenvalues|."""
    if hermiticity_residual(A) <= 1e-10 * (1.0 + np.max(np.abs(A))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(herm(A)))))
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def choi_matrix(S: np.ndarray) -> np.ndarray:
    """Choi matrix sum_{ij} |i><j| (x) Phi(|i><j|) of a superoperator."""
    d = int(round(np.sqrt(S.shape[0])))
    C = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1.0
            C[i * d:(i + 1) * d, j * d:(j + 1) * d] = apply_super(S, E)
    return C


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * herm(G)


def random_density(rng: np.random.Generator, d: int, floor: float = 0.0) -> np.ndarray:
    """Hilbert-Schmidt random state, optionally mixed toward I/d by floor*d."""
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = G @ G.conj().T
    rho = rho / np.trace(rho).real
    if floor > 0.0:
        rho = (1.0 - floor * d) * rho + floor * np.eye(d)
    return herm(rho)


def random_pure(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def traceless_part(A: np.ndarray) -> np.ndarray:
    d = A.shape[0]
    return A - (np.trace(A) / d) * np.eye(d)


# ---------------------------------------------------------------------------
# Matrix JSON serialization: nested arrays of [re, im] pairs, row-major
# ---------------------------------------------------------------------------


def matrix_to_json(A: np.ndarray) -> list:
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def matrix_from_json(obj: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    rows = []
    for row in obj:
        rows.append([complex(pair[0], pair[1]) for pair in row])
    return np.array(rows, dtype=complex)
