"""Primitive quantum Markov semigroups with detailed balance.

A generator is stored as a pair of superoperator matrices (Heisenberg and
Schrodinger pictures) together with the invariant state and a jump
representation ``L(X) = sum_j e^(-w_j/2) Vj† [X, Vj] + e^(w_j/2) [Vj, X] Vj†``
whose jump operators are trace-free eigenvectors of the modular operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.linalg

from . import linalg as la
from .errors import (
    NoJumps,
    NotDbc,
    NotModularEigenvector,
    NotPrimitive,
    ResidualTooLarge,
    SingularState,
)

JUMP_TRACE_TOL = 1e-10
MODULAR_EIG_TOL = 1e-9
DBC_TOL = 1e-9
DECOMPOSE_TOL = 1e-8
KERNEL_COUNT_TOL = 1e-9  # primitivity threshold, relative to spectral scale


class JumpTerm(NamedTuple):
    V: np.ndarray
    omega: float


def _pair_index(jumps: Sequence[JumpTerm], j: int, tol: float = 1e-9) -> int | None:
    """Index of the jump realizing (V_j†, -w_j), or None."""
    Vd = jumps[j].V.conj().T
    for k, (W, om) in enumerate(jumps):
        if abs(om + jumps[j].omega) <= tol * (1.0 + abs(om)) and \
                la.frob(W - Vd) <= tol * (1.0 + la.frob(W)):
            return k
    return None


def complete_pairs(jumps: Sequence[JumpTerm]) -> List[JumpTerm]:
    """Append (V†, -w) for each jump whose adjoint partner is missing."""
    out = list(jumps)
    for j in range(len(jumps)):
        if _pair_index(out, j) is None:
            out.append(JumpTerm(jumps[j].V.conj().T, -jumps[j].omega))
    return out


def validate_jump(sigma: np.ndarray, jump: JumpTerm) -> None:
    V, omega = jump
    nv = la.frob(V)
    if nv == 0.0:
        return
    if abs(np.trace(V)) > JUMP_TRACE_TOL * nv:
        raise NotModularEigenvector(f"jump has trace {np.trace(V):.3e}")
    sigma_inv = la.matrix_power_hermitian(sigma, -1.0)
    resid = la.frob(sigma @ V @ sigma_inv - np.exp(-omega) * V)
    if resid > MODULAR_EIG_TOL * nv * (1.0 + np.exp(-omega)):
        raise NotModularEigenvector(
            f"modular eigenvector residual {resid:.3e} for omega={omega}"
        )


def generator_from_jumps(jumps: Sequence[JumpTerm], d: int) -> np.ndarray:
    """Heisenberg generator superoperator assembled from the jump terms."""
    eye = np.eye(d)
    L = np.zeros((d * d, d * d), dtype=complex)
    for V, omega in jumps:
        Vd = V.conj().T
        em, ep = np.exp(-omega / 2.0), np.exp(omega / 2.0)
        L += em * (la.sandwich_super(Vd, V) - la.left_super(Vd @ V))
        L += ep * (la.sandwich_super(V, Vd) - la.right_super(V @ Vd))
    return L


@dataclass(frozen=True)
class PrimitivityReport:
    kernel_dimension: int
    spectral_gap: float
    eigenvalue_realness_residual: float

    @property
    def primitive(self) -> bool:
        return self.kernel_dimension == 1


@dataclass(frozen=True)
class DbcLindbladian:
    """Generator of a detailed-balance QMS, with jump representation.

    Immutable after construction; derived decompositions are cached.
    """

    sigma: np.ndarray
    jumps: Tuple[JumpTerm, ...]
    generator: np.ndarray
    dual_generator: np.ndarray

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    @property
    def num_jumps(self) -> int:
        return len(self.jumps)

    def require_jumps(self) -> None:
        if not self.jumps:
            raise NoJumps("operation needs the jump representation")

    @cached_property
    def sigma_eig(self) -> Tuple[np.ndarray, np.ndarray]:
        return la.herm_eigh(self.sigma)

    @property
    def sigma_min(self) -> float:
        return float(self.sigma_eig[0][0])

    def sigma_power(self, s: float) -> np.ndarray:
        w, U = self.sigma_eig
        return (U * w**float(s)) @ U.conj().T

    @cached_property
    def _kms_factors(self) -> Tuple[np.ndarray, np.ndarray]:
        quarter = self.sigma_power(0.25)
        iquarter = self.sigma_power(-0.25)
        return (la.sandwich_super(quarter, quarter),
                la.sandwich_super(iquarter, iquarter))

    @cached_property
    def _sym_eig(self):
        """Eigendecomposition of the KMS-symmetrized generator.

        Returns (eigenvalues ascending, vectors, hermiticity residual). DBC
        makes the symmetrization Hermitian with real spectrum; the residual
        is kept so evolve() can fall back to scaling-and-squaring.
        """
        Khalf, Kihalf = self._kms_factors
        M = Khalf @ self.generator @ Kihalf
        scale = max(la.frob(M), 1e-300)
        resid = la.frob(M - M.conj().T) / scale
        if resid > 1e-8:
            return None, None, resid
        w, Q = np.linalg.eigh(la.herm(M))
        return w, Q, resid

    def apply(self, X: np.ndarray) -> np.ndarray:
        return la.apply_super(self.generator, X)

    def apply_dual(self, rho: np.ndarray) -> np.ndarray:
        return la.apply_super(self.dual_generator, rho)

    def heisenberg_propagator(self, t: float) -> np.ndarray:
        """Superoperator matrix of exp(t * generator)."""
        w, Q, resid = self._sym_eig
        if w is None:
            return scipy.linalg.expm(t * self.generator)
        Khalf, Kihalf = self._kms_factors
        return Kihalf @ ((Q * np.exp(t * w)) @ Q.conj().T) @ Khalf

    def schrodinger_propagator(self, t: float) -> np.ndarray:
        return self.heisenberg_propagator(t).conj().T

    @cached_property
    def primitivity(self) -> PrimitivityReport:
        lam = np.linalg.eigvals(self.generator)
        scale = float(np.max(np.abs(lam))) if lam.size else 0.0
        if scale == 0.0:
            return PrimitivityReport(self.d * self.d, 0.0, 0.0)
        kernel = np.abs(lam) <= KERNEL_COUNT_TOL * scale
        rest = lam[~kernel]
        gap = float(np.min(-rest.real)) if rest.size else 0.0
        return PrimitivityReport(int(np.sum(kernel)), gap,
                                 float(np.max(np.abs(lam.imag))))

    def require_primitive(self) -> PrimitivityReport:
        rep = self.primitivity
        if not rep.primitive:
            raise NotPrimitive(f"kernel dimension {rep.kernel_dimension}")
        return rep

    @cached_property
    def gap_eigenvector(self) -> np.ndarray:
        """Hermitian unit-norm eigenvector of the spectral-gap eigenvalue."""
        w, Q, _ = self._sym_eig
        if w is None:
            raise NotDbc("gap eigenvector needs the symmetrizable form")
        scale = float(np.max(np.abs(w)))
        nonzero = np.abs(w) > KERNEL_COUNT_TOL * max(scale, 1e-300)
        idx = np.argmax(np.where(nonzero, w, -np.inf))
        _, Kihalf = self._kms_factors
        X = la.unvec(Kihalf @ Q[:, idx], self.d)
        X = la.herm(X) if la.frob(la.herm(X)) > 1e-8 * la.frob(X) else 1j * X
        return la.herm(X) / la.frob(la.herm(X))


def validate_dbc(L: DbcLindbladian, tol: float = DBC_TOL) -> None:
    """Check unitality, invariance, GNS self-adjointness and modular commutation."""
    d = L.d
    scale = max(la.frob(L.generator), 1e-300)
    if la.frob(L.apply(np.eye(d))) > 1e-10 * scale * d:
        raise NotDbc("generator does not annihilate the identity")
    if la.frob(L.apply_dual(L.sigma)) > 1e-10 * scale:
        raise NotDbc("dual generator does not fix sigma")
    S = la.right_super(L.sigma)  # Gram matrix of the GNS inner product
    gns = la.frob(S @ L.generator - L.generator.conj().T @ S)
    if gns > tol * scale * max(la.frob(S), 1.0):
        raise NotDbc(f"GNS self-adjointness residual {gns:.3e}")
    Delta = la.modular_super(L.sigma)
    comm = la.frob(L.generator @ Delta - Delta @ L.generator)
    if comm > tol * scale * max(la.frob(Delta), 1.0):
        raise NotDbc(f"modular commutation residual {comm:.3e}")


def build_from_jumps(sigma: np.ndarray, jumps: Sequence[JumpTerm],
                     validate: bool = True) -> DbcLindbladian:
    """Assemble the generator from jump terms, auto-completing adjoint pairs."""
    la.check_full_rank(sigma)
    sigma = la.herm(np.asarray(sigma, dtype=complex))
    d = sigma.shape[0]
    jumps = [JumpTerm(np.asarray(V, dtype=complex), float(om)) for V, om in jumps]
    if validate:
        for jump in jumps:
            validate_jump(sigma, jump)
    jumps = complete_pairs(jumps)
    gen = generator_from_jumps(jumps, d)
    L = DbcLindbladian(sigma=sigma, jumps=tuple(jumps), generator=gen,
                       dual_generator=gen.conj().T)
    if validate:
        validate_dbc(L)
    return L


def depolarizing(sigma: np.ndarray, gamma: float) -> DbcLindbladian:
    """Generalized depolarizing semigroup L(X) = gamma (tr(sigma X) 1 - X)."""
    la.check_full_rank(sigma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    sigma = la.herm(np.asarray(sigma, dtype=complex))
    d = sigma.shape[0]
    eye_vec = la.vec(np.eye(d))
    gen = gamma * (np.outer(eye_vec, la.vec(sigma).conj()) - np.eye(d * d))
    if d == 1:  # B(H) is scalar: the generator vanishes identically
        return DbcLindbladian(sigma=sigma, jumps=(), generator=gen,
                              dual_generator=gen.conj().T)
    jumps = alicki_decompose(gen, sigma)
    rebuilt = build_from_jumps(sigma, jumps)
    resid = la.frob(rebuilt.generator - gen) / la.frob(gen)
    if resid > DECOMPOSE_TOL:
        raise ResidualTooLarge(f"depolarizing jump synthesis residual {resid:.3e}")
    return DbcLindbladian(sigma=sigma, jumps=rebuilt.jumps, generator=gen,
                          dual_generator=gen.conj().T)


def random_dbc(sigma: np.ndarray, num_offdiag_pairs: int, num_diag: int,
               seed: int) -> DbcLindbladian:
    """Seeded detailed-balance generator built from scaled matrix units.

    Off-diagonal jumps are |i><j| units in the eigenbasis of sigma with
    w = log(s_j / s_i); when num_offdiag_pairs >= d - 1 the selected pairs
    contain a spanning tree, so the commutant is trivial and the semigroup
    is primitive. Diagonal jumps are traceless Hermitian with w = 0.
    """
    la.check_full_rank(sigma)
    sigma = la.herm(np.asarray(sigma, dtype=complex))
    d = sigma.shape[0]
    s, U = la.herm_eigh(sigma)
    rng = np.random.default_rng(seed)

    pairs: List[Tuple[int, int]] = []
    if d > 1:
        if num_offdiag_pairs >= d - 1:
            order = rng.permutation(d)
            for i in range(1, d):
                j = int(rng.integers(0, i))
                pairs.append((int(order[j]), int(order[i])))
        while len(pairs) < num_offdiag_pairs:
            a, b = int(rng.integers(0, d)), int(rng.integers(0, d))
            if a != b:
                pairs.append((min(a, b), max(a, b)))

    jumps: List[JumpTerm] = []
    for (i, j) in pairs[:num_offdiag_pairs]:
        c = float(rng.uniform(0.5, 1.5))
        E = np.zeros((d, d), dtype=complex)
        E[i, j] = c
        omega = float(np.log(s[j] / s[i]))
        V = U @ E @ U.conj().T
        jumps.append(JumpTerm(V, omega))
        jumps.append(JumpTerm(V.conj().T, -omega))
    for _ in range(num_diag):
        g = rng.standard_normal(d)
        g = g - g.mean()
        D = U @ np.diag(g.astype(complex)) @ U.conj().T
        jumps.append(JumpTerm(D, 0.0))
    if not jumps:
        return DbcLindbladian(sigma=sigma, jumps=(),
                              generator=np.zeros((d * d, d * d), dtype=complex),
                              dual_generator=np.zeros((d * d, d * d), dtype=complex))
    return build_from_jumps(sigma, jumps)


# ---------------------------------------------------------------------------
# Jump extraction from a generator (inverse of build_from_jumps)
# ---------------------------------------------------------------------------


def _reshuffle(L: np.ndarray, d: int) -> np.ndarray:
    """Coefficient matrix C[(a,b),(c,e)] of L(X) = sum C E_ab X E_ce†."""
    L4 = L.reshape(d, d, d, d)
    return np.transpose(L4, (1, 3, 0, 2)).reshape(d * d, d * d)


def _modular_groups(s: np.ndarray, d: int, tol: float = 1e-8):
    """Group matrix-unit indices by the modular frequency w(E_ab) = log(s_b/s_a).

    Returns a list of (nu, pair_list); the zero group carries nu = 0.0 exactly.
    """
    entries = []
    logs = np.log(s)
    for a in range(d):
        for b in range(d):
            entries.append((float(logs[b] - logs[a]), (a, b)))
    groups: List[Tuple[float, List[Tuple[int, int]]]] = []
    for nu, ab in sorted(entries, key=lambda e: (e[0], e[1])):
        if groups and abs(groups[-1][0] - nu) <= tol * (1.0 + abs(nu)):
            groups[-1][1].append(ab)
        else:
            groups.append((nu, [ab]))
    out = []
    for nu, members in groups:
        if abs(nu) <= tol:
            nu = 0.0
        out.append((nu, members))
    return out


def _unit_vector(d: int, a: int, b: int) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    v[a * d + b] = 1.0
    return v


def _zero_group_basis(members, d: int):
    """Hermitian, trace-free orthonormal basis of the frequency-zero sector.

    Matrix-unit pairs between degenerate levels become (E_ab + E_ba)/sqrt(2)
    and i(E_ab - E_ba)/sqrt(2); diagonal units are replaced by the d - 1
    traceless diagonal combinations (the identity direction is dropped, which
    removes the non-sandwich multiplier part of the generator).
    """
    vectors = []
    offdiag = sorted({tuple(sorted(ab)) for ab in members if ab[0] != ab[1]})
    for (a, b) in offdiag:
        e_ab, e_ba = _unit_vector(d, a, b), _unit_vector(d, b, a)
        vectors.append((e_ab + e_ba) / np.sqrt(2.0))
        vectors.append(1j * (e_ab - e_ba) / np.sqrt(2.0))
    diag = sorted(a for (a, b) in members if a == b)
    for k in range(1, len(diag)):
        v = np.zeros(d * d, dtype=complex)
        for a in diag[:k]:
            v[a * d + a] = 1.0
        v[diag[k] * d + diag[k]] = -float(k)
        vectors.append(v / np.linalg.norm(v))
    return vectors


def alicki_decompose(generator: np.ndarray, sigma: np.ndarray,
                     tol: float = DECOMPOSE_TOL) -> List[JumpTerm]:
    """Extract trace-free modular-eigenvector jumps reproducing the generator.

    Works in the eigenbasis of sigma: the matrix-unit basis is grouped by
    modular frequency, the within-group sandwich-coefficient block of the
    generator is projected to its PSD part, and weighted eigenvectors are
    emitted as jump operators (adjoint pairs appended explicitly). The jump
    set is not unique; only reconstruction is guaranteed.
    """
    la.check_full_rank(sigma)
    sigma = la.herm(np.asarray(sigma, dtype=complex))
    d = sigma.shape[0]
    scale = max(la.frob(generator), 1e-300)

    probe = DbcLindbladian(sigma=sigma, jumps=(), generator=generator,
                           dual_generator=generator.conj().T)
    validate_dbc(probe, tol=1e-8)

    s, U = la.herm_eigh(sigma)
    basis_change = la.sandwich_super(U.conj().T, U)       # X -> U† X U
    basis_back = la.sandwich_super(U, U.conj().T)
    Lt = basis_change @ generator @ basis_back
    C = _reshuffle(Lt, d)

    groups = _modular_groups(s, d)
    by_nu = {nu: members for nu, members in groups}

    jumps: List[JumpTerm] = []
    discarded = 0.0
    for nu, members in groups:
        if nu < 0.0:
            continue  # handled with its positive partner
        if nu == 0.0:
            vectors = _zero_group_basis(members, d)
            if not vectors:
                continue
            Q = np.column_stack(vectors)
            block = Q.conj().T @ C @ Q
            block = 0.5 * (block + block.conj().T)
            # DBC makes this block real symmetric in the Hermitian basis
            block = 0.5 * (block + block.T).real
            target = 0.5 * block
        else:
            Qp = np.column_stack([_unit_vector(d, a, b) for (a, b) in members])
            block = Qp.conj().T @ C @ Qp
            adjoint_members = [(b, a) for (a, b) in members]
            Qm = np.column_stack([_unit_vector(d, a, b) for (a, b) in adjoint_members])
            block_m = Qm.conj().T @ C @ Qm
            block = 0.5 * (block + np.exp(nu) * block_m.T)
            block = 0.5 * (block + block.conj().T)
            target = 0.5 * np.exp(-nu / 2.0) * block
            Q = Qp
        w, W = np.linalg.eigh(target)
        neg = w[w < 0.0]
        discarded += float(np.sum(-neg))
        for k in range(len(w)):
            if w[k] <= 1e-14 * scale:
                continue
            full = Q @ (np.sqrt(w[k]) * W[:, k])
            V = full.reshape(d, d)  # row-major: entry (a, b) multiplies E_ab
            V = U @ V @ U.conj().T
            if nu == 0.0:
                jumps.append(JumpTerm(la.herm(V), 0.0))
            else:
                jumps.append(JumpTerm(V, float(nu)))
                jumps.append(JumpTerm(V.conj().T, float(-nu)))
    if discarded > tol * scale:
        raise ResidualTooLarge(
            f"PSD projection discarded weight {discarded:.3e} "
            "(coherent part is incompatible with detailed balance)"
        )

    rebuilt = generator_from_jumps(jumps, d)
    resid = la.frob(rebuilt - generator) / scale
    if resid > tol:
        raise ResidualTooLarge(f"reconstruction residual {resid:.3e}")
    return jumps


# ---------------------------------------------------------------------------
# Derivations, evolution, spectra
# ---------------------------------------------------------------------------


def derivation(L: DbcLindbladian, j: int, mode: str, X) -> np.ndarray | list:
    """Noncommutative partial derivative machinery attached to the jumps.

    mode 'forward'     : [V_j, X]
    mode 'adjoint_kms' : e^(-w_j/2) Vj† X - e^(w_j/2) X Vj†
    mode 'gradient'    : list of all forward derivatives (j ignored)
    mode 'divergence'  : -sum_j [Vj†, X_j] for a list X of matrices
    """
    L.require_jumps()
    if mode == "gradient":
        return [derivation(L, k, "forward", X) for k in range(L.num_jumps)]
    if mode == "divergence":
        if len(X) != L.num_jumps:
            raise IndexError(f"field has {len(X)} components, need {L.num_jumps}")
        out = np.zeros((L.d, L.d), dtype=complex)
        for k, (V, _) in enumerate(L.jumps):
            Vd = V.conj().T
            out -= Vd @ X[k] - X[k] @ Vd
        return out
    if not 0 <= j < L.num_jumps:
        raise IndexError(f"jump index {j} out of range")
    V, omega = L.jumps[j]
    if mode == "forward":
        return V @ X - X @ V
    if mode == "adjoint_kms":
        Vd = V.conj().T
        return np.exp(-omega / 2.0) * Vd @ X - np.exp(omega / 2.0) * X @ Vd
    raise ValueError(f"unknown mode {mode!r}")


def evolve(L: DbcLindbladian, t: float, picture: str, X: np.ndarray) -> np.ndarray:
    """Apply exp(t L) (heisenberg) or exp(t L†) (schrodinger) to X."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if picture == "heisenberg":
        return la.apply_super(L.heisenberg_propagator(t), X)
    if picture == "schrodinger":
        return la.apply_super(L.schrodinger_propagator(t), X)
    raise ValueError(f"unknown picture {picture!r}")


def primitivity(L: DbcLindbladian,
                kernel_tol: float | None = None) -> PrimitivityReport:
    """Spectral report of the generator; ``kernel_tol`` overrides the default
    relative threshold used to count kernel eigenvalues."""
    if kernel_tol is None:
        return L.primitivity
    lam = np.linalg.eigvals(L.generator)
    scale = float(np.max(np.abs(lam))) if lam.size else 0.0
    if scale == 0.0:
        return PrimitivityReport(L.d * L.d, 0.0, 0.0)
    kernel = np.abs(lam) <= kernel_tol * scale
    rest = lam[~kernel]
    gap = float(np.min(-rest.real)) if rest.size else 0.0
    return PrimitivityReport(int(np.sum(kernel)), gap,
                             float(np.max(np.abs(lam.imag))))
