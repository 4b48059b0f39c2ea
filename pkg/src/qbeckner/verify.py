"""Executable invariant suite: every structural identity and inequality the
library relies on, runnable at a configurable dimension and seed.

Each check returns a CheckResult; `verify_suite` aggregates them and is the
backend of the CLI `verify` subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from . import constants as ct
from . import dirichlet as dh
from . import entropy as ent
from . import kernels as kn
from . import linalg as la
from . import ricci as rc
from . import transport as tp
from .config import ExperimentConfig, build_generator
from .semigroup import DbcLindbladian, alicki_decompose, build_from_jumps, evolve


@dataclass
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skip"
    lhs: float = 0.0
    rhs: float = 0.0
    slack: float = 0.0
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "fail"


def _random_pd(rng: np.random.Generator, d: int, shift: float = 0.5) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return la.herm(G @ G.conj().T / d + shift * np.eye(d))


def _result(name: str, ok: bool, lhs: float = 0.0, rhs: float = 0.0,
            detail: str = "") -> CheckResult:
    return CheckResult(name, "pass" if ok else "fail", float(lhs), float(rhs),
                       float(rhs - lhs), detail)


def _skip(name: str, why: str) -> CheckResult:
    return CheckResult(name, "skip", detail=why)


# ---------------------------------------------------------------------------
# Operator-core invariants
# ---------------------------------------------------------------------------


def check_operator_core(d: int, rng: np.random.Generator) -> List[CheckResult]:
    out = []
    A = la.random_hermitian(rng, d)
    w, V = la.herm_eigh(A)
    resid = la.frob((V * w) @ V.conj().T - A) / max(la.frob(A), 1e-300)
    out.append(_result("eigh-reconstruction", resid <= 1e-10, resid, 1e-10))

    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    B = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    lhs = la.apply_super(la.left_super(B), X)
    resid = la.frob(lhs - B @ X) / la.frob(B @ X)
    out.append(_result("vec-column-stacking", resid <= 1e-14, resid, 1e-14))

    g = kn.power_kernel(2.0)
    k2 = kn.Kernel2("g(x)", f=lambda x, y: g.f(x) + 0.0 * y)
    Apd = la.psd_project(A @ A.conj().T / d + 0.2 * np.eye(d), floor=np.inf)
    Bpd = la.random_density(rng, d, floor=0.05) * d
    left = la.double_sum_apply(k2, Apd, Bpd, X)
    resid = la.frob(left - la.matrix_function(Apd, g) @ X) / max(la.frob(left), 1e-300)
    out.append(_result("schur-left-multiplication", resid <= 1e-12, resid, 1e-12))

    dd = kn.divided_difference(kn.power_kernel(2.0))
    quad = np.real(la.hs_inner(X, la.double_sum_apply(dd, Apd, Bpd, X)))
    out.append(_result("positive-kernel-inner-product", quad > 0.0, 0.0, quad))

    ok = True
    worst = 0.0
    for r in (0.3, 0.5, 0.9):
        for q in (1.0, 2.0):
            Ar = la.matrix_power_hermitian(Apd, r)
            Br = la.matrix_power_hermitian(Bpd, r)
            lhs_alt = np.real(np.trace(la.matrix_power_hermitian(
                la.herm(Br @ Ar @ Br), q)))
            rhs_alt = np.real(np.trace(la.matrix_power_hermitian(
                la.herm(Bpd @ Apd @ Bpd), r * q)))
            worst = max(worst, lhs_alt - rhs_alt)
            ok = ok and lhs_alt <= rhs_alt * (1.0 + 1e-10) + 1e-12
    out.append(_result("araki-lieb-thirring", ok, worst, 0.0))

    # divided-difference monotonicity under operator domination
    p = 1.5
    c = 1.7
    fp = kn.fp_divdiff_kernel(p)
    X1 = _random_pd(rng, d)
    X2 = _random_pd(rng, d)
    S1 = _random_pd(rng, d)
    S2 = _random_pd(rng, d)
    Y1, Y2 = (X1 + S1) / c, (X2 + S2) / c
    Am = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    lhs_m = np.real(la.hs_inner(Am, la.double_sum_apply(fp, Y1, Y2, Am)))
    rhs_m = c ** (2.0 - p) * np.real(la.hs_inner(Am, la.double_sum_apply(fp, X1, X2, Am)))
    out.append(_result("divided-difference-monotonicity",
                       lhs_m <= rhs_m * (1 + 1e-10), lhs_m, rhs_m))
    return out


# ---------------------------------------------------------------------------
# Semigroup invariants
# ---------------------------------------------------------------------------


def check_semigroup(L: DbcLindbladian, rng: np.random.Generator) -> List[CheckResult]:
    out = []
    d = L.d
    X = la.random_hermitian(rng, d)
    Y = la.random_hermitian(rng, d)
    for name, k in (("sqrt", kn.power_kernel(0.5)), ("identity", kn.power_kernel(1.0)),
                    ("phi_1.5", kn.phi_p_kernel(1.5))):
        lhs = la.f_inner(L.apply(X), Y, L.sigma, k)
        rhs = la.f_inner(X, L.apply(Y), L.sigma, k)
        resid = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        out.append(_result(f"weighted-self-adjointness[{name}]",
                           resid <= 1e-9, resid, 1e-9))

    if L.jumps:
        for s in (0.3, 0.7):
            k = kn.power_kernel(s)
            lhs = -la.f_inner(Y, L.apply(X), L.sigma, k)
            rhs = 0.0
            for (V, omega) in L.jumps:
                a, b = np.exp(omega / 2.0), np.exp(-omega / 2.0)
                k2 = kn.Kernel2("tilted", f=lambda x, yy, a=a, b=b: k.f(a * x / (b * yy)) * b * yy)
                dX = V @ X - X @ V
                dY = V @ Y - Y @ V
                rhs += la.hs_inner(dY, la.double_sum_apply(k2, L.sigma, L.sigma, dX))
            resid = abs(lhs - rhs) / max(abs(lhs), 1e-300)
            out.append(_result(f"jump-weighted-dirichlet[s={s}]",
                               resid <= 1e-9, resid, 1e-9))
    else:
        out.append(_skip("jump-weighted-dirichlet", "no jumps"))

    for t in (0.1, 1.0):
        C = la.choi_matrix(L.schrodinger_propagator(t))
        lam_min = float(np.min(np.linalg.eigvalsh(la.herm(C))))
        out.append(_result(f"choi-complete-positivity[t={t}]",
                           lam_min >= -1e-8, -lam_min, 1e-8))

    if L.jumps:
        jumps2 = alicki_decompose(L.generator, L.sigma)
        L2 = build_from_jumps(L.sigma, jumps2)
        Xp = _random_pd(rng, d)
        rho = la.random_density(rng, d, floor=0.05)
        vals1 = [dh.dirichlet_form_representation(L, Xp, 1.5).value,
                 tp.gradient_norm_sq(L, rho, 1.5, X)]
        vals2 = [dh.dirichlet_form_representation(L2, Xp, 1.5).value,
                 tp.gradient_norm_sq(L2, rho, 1.5, X)]
        resid = max(abs(a - b) / max(abs(a), 1e-300) for a, b in zip(vals1, vals2))
        out.append(_result("decomposition-independence", resid <= 1e-8, resid, 1e-8))
    else:
        out.append(_skip("decomposition-independence", "no jumps"))
    return out


# ---------------------------------------------------------------------------
# Entropy invariants
# ---------------------------------------------------------------------------


def check_entropy(L: DbcLindbladian, rng: np.random.Generator) -> List[CheckResult]:
    out = []
    d = L.d
    sigma = L.sigma
    for p in (1.3, 2.0):
        # data processing under partial trace on a random bipartite embedding
        rho2 = la.random_density(rng, d * 2, floor=0.02)
        sig2 = la.random_density(rng, d * 2, floor=0.02)
        rho_r = _partial_trace(rho2, d, 2)
        sig_r = _partial_trace(sig2, d, 2)
        lhs = ent.p_divergence(rho_r, sig_r, p).value
        rhs = ent.p_divergence(rho2, sig2, p).value
        out.append(_result(f"data-processing-partial-trace[p={p}]",
                           lhs <= rhs + 1e-10, lhs, rhs))
        rho = la.random_density(rng, d, floor=0.05)
        lhs = ent.p_divergence(evolve(L, 0.7, "schrodinger", rho), sigma, p).value
        rhs = ent.p_divergence(rho, sigma, p).value
        out.append(_result(f"data-processing-semigroup[p={p}]",
                           lhs <= rhs + 1e-10, lhs, rhs))

    p = 1.6
    r1, r2 = la.random_density(rng, d, floor=0.03), la.random_density(rng, d, floor=0.03)
    s1, s2 = la.random_density(rng, d, floor=0.05), la.random_density(rng, d, floor=0.05)
    t = 0.4
    lhs = ent.p_divergence(t * r1 + (1 - t) * r2, t * s1 + (1 - t) * s2, p).value
    rhs = t * ent.p_divergence(r1, s1, p).value + (1 - t) * ent.p_divergence(r2, s2, p).value
    out.append(_result("joint-convexity", lhs <= rhs + 1e-10, lhs, rhs))

    Yh = la.random_hermitian(rng, d)
    p0, h = 1.7, 1e-5
    fd = (ent.weighted_p_norm(Yh, sigma, p0 + h) - ent.weighted_p_norm(Yh, sigma, p0 - h)) / (2 * h)
    an = (ent.weighted_p_norm(Yh, sigma, p0) ** (1.0 - p0) / p0**2
          * ent.entropy_functional(ent.power_operator(Yh, sigma, p0, p0), sigma, p0))
    resid = abs(fd - an) / max(abs(an), 1e-300)
    out.append(_result("norm-p-derivative", resid <= 1e-6, resid, 1e-6))

    xs = np.linspace(0.05, 6.0, 41)
    p = 1.45
    gap = float(np.max(np.abs(kn.phi_p_kernel(p).f(xs) / xs
                              - kn.kappa_alpha_kernel(1.0 / p).f(xs))))
    out.append(_result("power-difference-identity", gap <= 1e-12, gap, 1e-12))

    rho = la.random_density(rng, d, floor=0.03)
    p = 1.7
    c = np.exp(ent.relative_entropies(rho, sigma, "max").value)
    kp, _ = ent.sandwich_constants(sigma, p, c)
    chi = ent.chi2_power_difference(rho, sigma, p).value
    F = ent.p_divergence(rho, sigma, p).value
    ok = (kp * chi <= F + 1e-9) and (F <= chi / p + 1e-9)
    out.append(_result("two-sided-chi2-sandwich", ok, kp * chi, chi / p,
                       detail=f"F={F:.6e}"))
    return out


def _partial_trace(rho: np.ndarray, d1: int, d2: int) -> np.ndarray:
    return np.einsum("ikjk->ij", rho.reshape(d1, d2, d1, d2))


# ---------------------------------------------------------------------------
# Dirichlet invariants
# ---------------------------------------------------------------------------


def check_dirichlet(L: DbcLindbladian, rng: np.random.Generator) -> List[CheckResult]:
    out = []
    d = L.d
    X = _random_pd(rng, d)
    worst = 0.0
    ok = True
    for (p, q) in ((0.5, 1.5), (0.8, 2.0), (1.2, 1.8), (1.0, 2.0)):
        Ep = dh.dirichlet_form(L, ent.power_operator(X, L.sigma, p, 2.0), p).value \
            if abs(p - 1.0) >= 1e-4 else \
            dh.dirichlet_form(L, ent.power_operator(X, L.sigma, 1.0, 2.0), 1.0).value
        Eq = dh.dirichlet_form(L, ent.power_operator(X, L.sigma, q, 2.0), q).value
        worst = min(worst, Ep - Eq)
        ok = ok and (Ep >= Eq - 1e-9)
    out.append(_result("stroock-varopoulos", ok, -worst, 1e-9))

    ok = True
    for p in (1.25, 1.5, 2.0):
        E2 = dh.dirichlet_form(L, ent.power_operator(X, L.sigma, 2.0, p), 2.0).value
        Ep = dh.dirichlet_form(L, X, p).value
        ok = ok and (E2 <= Ep + 1e-9) and (Ep <= p * p / (4 * (p - 1)) * E2 + 1e-9)
    out.append(_result("lp-regularity", ok))

    vals = [dh.dirichlet_form(L, _random_pd(rng, d), p).value
            for p in (1.0, 1.4, 2.0)]
    out.append(_result("dirichlet-nonnegativity", min(vals) >= 0.0, -min(vals), 0.0))

    if L.jumps:
        resid = dh.representation_check(L, X, 1.5)
        out.append(_result("dirichlet-representation", resid <= 1e-8, resid, 1e-8))
    else:
        out.append(_skip("dirichlet-representation", "no jumps"))
    return out


# ---------------------------------------------------------------------------
# Transport and curvature invariants
# ---------------------------------------------------------------------------


def check_transport(L: DbcLindbladian, rng: np.random.Generator,
                    w_tol: float = 0.02) -> List[CheckResult]:
    out = []
    d = L.d
    if not L.jumps:
        return [_skip("transport", "no jumps")]
    rho = la.random_density(rng, d, floor=0.05)
    worst = max(tp.grad_flow_residual(L, rho, p) for p in (1.3, 1.7, 2.0))
    out.append(_result("gradient-flow-identity", worst <= 1e-8, worst, 1e-8))

    r0 = la.random_density(rng, d, floor=0.05)
    r1 = la.random_density(rng, d, floor=0.05)
    p = 1.5
    opts = tp.W2Opts(N=10)
    dist, path = tp.w2p_solve(L, r0, r1, p, opts)
    dist_rev, _ = tp.w2p_solve(L, r1, r0, p, opts)
    out.append(_result("distance-symmetry",
                       abs(dist - dist_rev) <= 0.01 * max(dist, 1e-12),
                       abs(dist - dist_rev), 0.01 * dist))
    C = tp.trace_distance_prefactor(L, p)
    tn = la.trace_norm(r1 - r0)
    out.append(_result("trace-distance-lower-bound", tn <= C * dist * (1 + 1e-9),
                       tn, C * dist))

    lam, V = la.herm_eigh(rho)
    A = la.random_hermitian(rng, d)
    K1 = tp.MetricKernel(rho, L.sigma, 1.5, 0.3)
    K2 = tp.MetricKernel(rho, L.sigma, 1.5 + 1e-4, 0.3)
    gap = la.frob(K1.apply(A) - K2.apply(A)) / max(la.frob(K1.apply(A)), 1e-300)
    out.append(_result("kernel-p-continuity", gap <= 1e-3, gap, 1e-3))

    # joint convexity of the inverse-kernel quadratic form along segments
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    Y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r2 = la.random_density(rng, d, floor=0.05)
    f = lambda s: tp.MetricKernel((1 - s) * rho + s * r2, L.sigma, 1.5, 0.3) \
        .quad_inverse((1 - s) * X + s * Y)
    mid = f(0.5)
    ends = 0.5 * (f(0.0) + f(1.0))
    out.append(_result("inverse-kernel-joint-convexity", mid <= ends + 1e-9,
                       mid, ends))
    return out


def check_ricci(L: DbcLindbladian, rng: np.random.Generator) -> List[CheckResult]:
    out = []
    if not L.jumps:
        return [_skip("ricci", "no jumps")]
    d = L.d
    rho = la.random_density(rng, d, floor=0.1)
    H, G = rc.hessian_matrix(L, rho, 1.5)
    sym = float(np.max(np.abs(H - H.T)))
    out.append(_result("hessian-symmetry", sym <= 1e-9 * max(1.0, np.max(np.abs(H))),
                       sym, 1e-9))

    flat = la.frob(L.sigma - np.eye(d) / d) <= 1e-10
    if flat:
        p = 1.5
        est = rc.ricci_estimate(L, p, num_states=8, seed=3)
        alpha_cl = ct.depol_classical(p, d) * L.primitivity.spectral_gap
        out.append(_result("curvature-implies-beckner",
                           alpha_cl >= est.kappa * p / 2.0 - 1e-4,
                           est.kappa * p / 2.0, alpha_cl))
    else:
        out.append(_skip("curvature-implies-beckner",
                         "classical constant needs the flat invariant state"))
    return out


def check_decay(L: DbcLindbladian, rng: np.random.Generator) -> List[CheckResult]:
    out = []
    d = L.d
    flat = la.frob(L.sigma - np.eye(d) / d) <= 1e-10
    is_depol = la.frob(
        L.generator - (np.outer(la.vec(np.eye(d)), la.vec(L.sigma).conj())
                       - np.eye(d * d)) * L.primitivity.spectral_gap) \
        <= 1e-8 * la.frob(L.generator)
    if not (flat and is_depol):
        return [_skip("classical-decay-certificate",
                      "closed-form constants need the flat depolarizing model")]
    gamma = L.primitivity.spectral_gap
    rho0 = la.random_density(rng, d, floor=0.02)
    ok = True
    worst = 0.0
    for p in (1.25, 1.75):
        alpha = ct.depol_classical(p, d) * gamma
        F0 = ent.p_divergence(rho0, L.sigma, p).value
        for t in (0.5, 2.0, 5.0):
            Ft = ent.p_divergence(evolve(L, t, "schrodinger", rho0), L.sigma, p).value
            bound = np.exp(-4.0 * alpha * t / p) * F0 * (1.0 + 1e-6)
            worst = max(worst, Ft - bound)
            ok = ok and Ft <= bound
        # p-norm convergence bound along the same trajectory
        X = ent.relative_density(rho0, L.sigma)
        for t in (0.5, 2.0):
            Xt = evolve(L, t, "heisenberg", X)
            lhs = ent.weighted_p_norm(Xt - np.eye(d), L.sigma, p)
            np_ = ent.weighted_p_norm(X, L.sigma, p)
            rhs = np.exp(-2 * alpha * t / p) * np_ ** (1 - p / 2.0) * np.sqrt(
                2.0 / (p * (p - 1.0)) * (np_**p - ent.weighted_p_norm(X, L.sigma, 1.0) ** p))
            ok = ok and lhs <= rhs * (1 + 1e-9)
    out.append(_result("classical-decay-certificate", ok, worst, 0.0))
    return out


# ---------------------------------------------------------------------------
# Suite driver
# ---------------------------------------------------------------------------


def verify_suite(cfg: ExperimentConfig) -> List[CheckResult]:
    """Run the invariant suite at the configuration's dimension and seed."""
    seed = int(cfg.seeds.get("master", 7))
    rng = np.random.default_rng(seed)
    d = cfg.dimension
    if d < 2:
        return [_skip("suite", "dimension 1 is degenerate: all gaps undefined")]
    results = check_operator_core(d, rng)
    L = build_generator(cfg)
    results += check_semigroup(L, rng)
    results += check_entropy(L, rng)
    results += check_dirichlet(L, rng)
    results += check_transport(L, rng, cfg.tolerances.get("w_discretization", 0.02))
    results += check_ricci(L, rng)
    results += check_decay(L, rng)
    return results
