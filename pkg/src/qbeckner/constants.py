"""Estimation of functional-inequality constants and their bound ledger.

Every optimized constant is a minimum of a Rayleigh-type ratio over the
feasible cone, so the reported value is an upper bound on the true constant;
analytic caps and exact spectral anchors bound it from the other side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import dirichlet as dh
from . import entropy as ent
from . import linalg as la
from .errors import (
    IncompatibleJumps,
    MissingEstimate,
    NotSymmetric,
    OptimizerDiverged,
)
from .semigroup import DbcLindbladian

HARD_TOL = 1e-4
SOFT_TOL = 1e-3
BIG = 1e300
# Denominators below this sit in the near-identity 0/0 region, where the
# ratio is dominated by cancellation noise; the region's limit value enters
# through the analytic cap instead.
RIDGE_FLOOR = 1e-8


@dataclass(frozen=True)
class EstimateOpts:
    num_starts: int = 32
    max_iters: int = 2000
    tol: float = 1e-8
    seed: int = 0


@dataclass(frozen=True)
class ConstantEstimate:
    kind: str
    param: Optional[float]
    value: float
    witness: Optional[np.ndarray]
    num_starts: int
    best_residual: float
    capped: bool

    def ratio_of_witness(self, L: DbcLindbladian) -> float:
        if self.witness is None:
            raise MissingEstimate("capped estimate carries no witness")
        return _ratio_fn(L, self.kind, self.param)(self.witness)


def _ratio_fn(L: DbcLindbladian, kind: str, param: Optional[float]) -> Callable:
    """Rayleigh ratio whose infimum over the feasible cone is the constant."""
    if kind == "beckner":
        p = float(param)

        def ratio(X: np.ndarray) -> float:
            den = ent.weighted_p_norm(X, L.sigma, p) ** p - 1.0
            if den <= RIDGE_FLOOR:
                return BIG
            return (p - 1.0) * dh.dirichlet_form(L, X, p).value / den

        return ratio
    if kind == "mlsi":

        def ratio(X: np.ndarray) -> float:
            den = ent.entropy_functional(X, L.sigma, 1.0)
            if den <= RIDGE_FLOOR:
                return BIG
            return dh.dirichlet_form(L, X, 1.0).value / den

        return ratio
    if kind == "lsi":

        def ratio(Y: np.ndarray) -> float:
            den = ent.entropy_functional(Y, L.sigma, 2.0)
            if den <= RIDGE_FLOOR:
                return BIG
            return dh.dirichlet_form(L, Y, 2.0).value / den

        return ratio
    if kind == "dual_beckner":
        q = float(param)

        def ratio(Y: np.ndarray) -> float:
            den = ent.q_variance(Y, L.sigma, q)
            if den <= RIDGE_FLOOR:
                return BIG
            return (2.0 - q) * dh.dirichlet_form(L, Y, 2.0).value / den

        return ratio
    raise ValueError(f"no ratio for kind {kind!r}")


def _normalized_witness(L: DbcLindbladian, Y: np.ndarray, kind: str) -> np.ndarray:
    """Map an unconstrained complex matrix to the feasible cone."""
    X = Y.conj().T @ Y
    if kind in ("beckner", "mlsi"):
        mean = np.real(np.trace(L.sigma @ X))
        if mean <= 1e-300:
            return np.eye(L.d, dtype=complex)
        return X / mean
    norm = ent.weighted_p_norm(X, L.sigma, 2.0)
    if norm <= 1e-300:
        return np.eye(L.d, dtype=complex)
    return X / norm


def _central_diff_grad(fun: Callable, y: np.ndarray) -> np.ndarray:
    eps = 1e-6 * max(1.0, float(np.max(np.abs(y))))
    g = np.zeros_like(y)
    for i in range(y.size):
        yp = y.copy()
        yp[i] += eps
        ym = y.copy()
        ym[i] -= eps
        g[i] = (fun(yp) - fun(ym)) / (2.0 * eps)
    return g


def _seed_starts(L: DbcLindbladian, kind: str, num_starts: int,
                 seed: int) -> List[np.ndarray]:
    """Unconstrained start matrices: random, plus near-identity directions
    along the spectral-gap eigenvector (the linearization regime)."""
    d = L.d
    starts: List[np.ndarray] = []
    try:
        U_gap = L.gap_eigenvector
        for eps in (3e-2, 3e-3):
            starts.append(np.eye(d) + 0.5 * eps * U_gap)
    except Exception:
        pass
    children = np.random.SeedSequence(seed).spawn(max(num_starts - len(starts), 0))
    for child in children:
        rng = np.random.default_rng(child)
        Y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        starts.append(np.eye(d) + 0.7 * Y)
    return starts[:max(num_starts, 1)]


def estimate_constant(L: DbcLindbladian, kind: str, p: float | None = None,
                      q: float | None = None,
                      opts: EstimateOpts = EstimateOpts()) -> ConstantEstimate:
    """Estimate a functional-inequality constant of a primitive generator.

    kind 'poincare' is read off the spectrum exactly. The others minimize
    their defining ratio with multi-start quasi-Newton descent over the
    unconstrained parameterization X = Y†Y / tr(sigma Y†Y) and report
    min(best ratio, analytic cap); the cap is the linearization value on the
    unreachable X -> 1 ridge. Starts own independent seed streams and are
    reduced by a minimum, so the result does not depend on evaluation order.
    """
    rep = L.require_primitive()
    lam = rep.spectral_gap
    if kind == "poincare":
        return ConstantEstimate("poincare", None, lam, L.gap_eigenvector,
                                0, 0.0, False)
    param = p if kind == "beckner" else (q if kind == "dual_beckner" else None)
    ratio = _ratio_fn(L, kind, param)
    d = L.d

    def objective(y: np.ndarray) -> float:
        Y = (y[:d * d] + 1j * y[d * d:]).reshape(d, d)
        val = ratio(_normalized_witness(L, Y, kind))
        if not np.isfinite(val):
            raise OptimizerDiverged(f"non-finite ratio for kind {kind}")
        return val

    best_val, best_witness = np.inf, None
    values = []
    for Y0 in _seed_starts(L, kind, opts.num_starts, opts.seed):
        y0 = np.concatenate([Y0.real.ravel(), Y0.imag.ravel()])
        res = minimize(
            objective, y0, jac=lambda y: _central_diff_grad(objective, y),
            method="L-BFGS-B",
            options={"maxiter": opts.max_iters, "ftol": opts.tol,
                     "gtol": 1e-12},
        )
        values.append(res.fun)
        if res.fun < best_val:
            best_val = res.fun
            Yb = (res.x[:d * d] + 1j * res.x[d * d:]).reshape(d, d)
            best_witness = _normalized_witness(L, Yb, kind)
    if not np.isfinite(best_val):
        raise OptimizerDiverged("all starts diverged")

    if kind == "beckner":
        cap = float(param) * lam / 2.0
    elif kind in ("mlsi", "lsi"):
        cap = lam / 2.0
    else:
        cap = np.inf
    capped = best_val > cap
    value = min(best_val, cap)
    others = sorted(v for v in values if np.isfinite(v))
    residual = 0.0
    if len(others) > 1:
        gaps = [abs(v - best_val) / max(best_val, 1e-300) for v in others[1:]]
        residual = float(min(gaps))
    return ConstantEstimate(kind, param, float(value),
                            None if capped else best_witness,
                            len(values), residual, bool(capped))


# ---------------------------------------------------------------------------
# Classical reduction for the depolarizing semigroup with sigma = I/d
# ---------------------------------------------------------------------------


def _psi(u: float, p: float) -> float:
    """u^p - 1 - p(u - 1), nonnegative for p > 1, stable near u = 1."""
    h = u - 1.0
    if abs(h) < 1e-4:
        return p * (p - 1.0) * h * h / 2.0 * (
            1.0 + (p - 2.0) * h / 3.0 + (p - 2.0) * (p - 3.0) * h * h / 12.0)
    with np.errstate(divide="ignore"):
        return float(np.expm1(p * np.log(u)) - p * h)


def _two_point_ratio(x: float, theta: float, p: float) -> float:
    """(p^2/4) (m_p - m_{p-1}) / (m_p - 1) on the two-point space with mean 1.

    Using theta (x - 1) = -(1 - theta)(y - 1), the numerator reduces to
    theta (x-1)(x^(p-1) - y^(p-1)) and the denominator to a sum of the
    nonnegative terms psi(u) = u^p - 1 - p(u - 1), both cancellation-free.
    """
    if x < 0:
        return BIG
    y = (1.0 - theta * x) / (1.0 - theta)
    if y < 0:
        return BIG
    if abs(x - 1.0) < 1e-9:  # joint x, y -> 1 limit of the ratio
        return p / 2.0
    if min(x, y) <= 1e-12 * max(x, y):
        num = theta * (x - 1.0) * (x ** (p - 1.0) - y ** (p - 1.0))
    else:
        powgap = np.expm1((p - 1.0) * (np.log(x) - np.log(y)))
        num = theta * (x - 1.0) * (y ** (p - 1.0)) * powgap
    den = theta * _psi(x, p) + (1.0 - theta) * _psi(y, p)
    if den <= 0.0 or not np.isfinite(num):
        return BIG
    return (p * p / 4.0) * num / den


def depol_classical(p: float, d: int) -> float:
    """Two-point-chain value of the p-Beckner constant of the depolarizing
    semigroup with the maximally mixed invariant state and unit rate.

    Minimizes the two-point ratio over the occupation fractions
    theta in {1/d, ..., (d-1)/d} by a dense grid plus golden-section
    refinement. At p = 2 the ratio is identically p^2/4 = 1.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    p = float(p)
    if p == 2.0:
        return 1.0
    best = np.inf
    for k in range(1, d):
        theta = k / d
        xs = np.linspace(0.0, 1.0 / theta, 10_000)
        vals = np.array([_two_point_ratio(x, theta, p) for x in xs])
        i = int(np.argmin(vals))
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, len(xs) - 1)]
        res = minimize_scalar(lambda x: _two_point_ratio(x, theta, p),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        best = min(best, vals[i], float(res.fun))
    return float(best)


def certified_alpha_lower(lam: float, sigma_min: float, p: float) -> float:
    """Spectral-gap lower bound max(lam (p-1), p^2 sigma_min^(2-p) lam / 4)."""
    return max(lam * (p - 1.0), p * p * sigma_min ** (2.0 - p) * lam / 4.0)


def certified_uniform_alpha(lam: float, sigma_min: float) -> float:
    """A p-uniform certified lower bound on the Beckner constants.

    Both branches of certified_alpha_lower increase in p, so the infimum over
    p in (1, 2] is the p -> 1 limit lam * sigma_min / 4.
    """
    return lam * sigma_min / 4.0


# ---------------------------------------------------------------------------
# Bound ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    hard: bool


@dataclass(frozen=True)
class BoundLedger:
    entries: Tuple[LedgerEntry, ...]

    @property
    def hard_pass(self) -> bool:
        return all(e.passed for e in self.entries if e.hard)

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> List[LedgerEntry]:
        return [e for e in self.entries if not e.passed]


def _entry(name: str, lhs: float, rhs: float, hard: bool) -> LedgerEntry:
    tol = HARD_TOL if hard else SOFT_TOL
    slack = rhs - lhs
    passed = slack >= -tol * max(1.0, abs(lhs), abs(rhs))
    return LedgerEntry(name, float(lhs), float(rhs), float(slack), passed, hard)


def bound_ledger(estimates: Dict, sigma_min: float,
                 p_grid: Sequence[float]) -> BoundLedger:
    """Evaluate the closed-form inequalities between stored estimates.

    ``estimates`` maps ('poincare',), ('beckner', p), ('mlsi',), ('lsi',),
    ('dual_beckner', q) to ConstantEstimate. Inequalities that stay valid
    when both sides are over-estimated are asserted hard; cross-estimate
    inequalities are soft and logged, never dropped.
    """

    def get(key) -> ConstantEstimate:
        if key not in estimates:
            raise MissingEstimate(f"{key} missing from estimates")
        return estimates[key]

    lam = get(("poincare",)).value
    entries: List[LedgerEntry] = []
    alphas = {}
    for p in p_grid:
        a = get(("beckner", p)).value
        alphas[p] = a
        entries.append(_entry(f"beckner({p}) <= p*lambda/2", a, p * lam / 2.0, True))
        entries.append(_entry(f"beckner({p}) >= lambda*(p-1)", lam * (p - 1.0), a, True))
        entries.append(_entry(
            f"beckner({p}) >= p^2 sigma_min^(2-p) lambda/4",
            p * p * sigma_min ** (2.0 - p) * lam / 4.0, a, True))
    ps = sorted(alphas)
    for p1, p2 in zip(ps, ps[1:]):
        entries.append(_entry(
            f"p/(p-1) beckner nonincreasing [{p1},{p2}]",
            p2 / (p2 - 1.0) * alphas[p2], p1 / (p1 - 1.0) * alphas[p1], False))
    if ("mlsi",) in estimates:
        a1 = get(("mlsi",)).value
        entries.append(_entry("mlsi <= lambda/2", a1, lam / 2.0, True))
        if ps:
            entries.append(_entry("mlsi >= beckner(p_min) limit",
                                  alphas[ps[0]], a1 + (ps[0] - 1.0) * lam, False))
    if ("lsi",) in estimates:
        b = get(("lsi",)).value
        entries.append(_entry("lsi <= lambda/2", b, lam / 2.0, True))
        if ("mlsi",) in estimates:
            entries.append(_entry("lsi <= mlsi", b, get(("mlsi",)).value, False))
    qs = sorted(p for (k, *rest) in estimates if k == "dual_beckner"
                for p in rest)
    betas = {q: get(("dual_beckner", q)).value for q in qs}
    for q1, q2 in zip(qs, qs[1:]):
        entries.append(_entry(
            f"beta_q/(2-q) nondecreasing [{q1},{q2}]",
            betas[q1] / (2.0 - q1), betas[q2] / (2.0 - q2), False))
        entries.append(_entry(
            f"beta_q/q nonincreasing [{q1},{q2}]",
            betas[q2] / q2, betas[q1] / q1, False))
    for p in ps:
        q = 2.0 / p
        for qq in qs:
            if abs(qq - q) < 1e-12:
                entries.append(_entry(
                    f"beckner({p}) >= p beta_(2/p)/2",
                    p * betas[qq] / 2.0, alphas[p], False))
    return BoundLedger(tuple(entries))


# ---------------------------------------------------------------------------
# Stability of the Beckner constant under a change of invariant state
# ---------------------------------------------------------------------------


def stability_factor(L_sigma: DbcLindbladian, L_sigma_prime: DbcLindbladian,
                     p: float) -> float:
    """Comparison factor between Beckner constants of two generators that
    share matrix-unit jump operators but have different commuting diagonal
    invariant states:

    factor = (Lambda_min / Lambda_max) * min_j exp(-|w_j - v_j| (2-p) / (2p)),
    with Lambda_min/max the extreme eigenvalue ratios sigma_k / sigma'_k.
    """
    L_sigma.require_jumps()
    L_sigma_prime.require_jumps()
    s, U = L_sigma.sigma_eig
    sp_mat = U.conj().T @ L_sigma_prime.sigma @ U
    if la.frob(sp_mat - np.diag(np.diag(sp_mat))) > 1e-9:
        raise IncompatibleJumps("invariant states do not commute")
    sp = np.real(np.diag(sp_mat))
    ratios = s / sp
    lam_min, lam_max = float(np.min(ratios)), float(np.max(ratios))

    freq_gap = []
    used = set()
    for (V, omega) in L_sigma.jumps:
        Vt = U.conj().T @ V @ U
        match = None
        for k, (W, nu) in enumerate(L_sigma_prime.jumps):
            if k in used:
                continue
            Wt = U.conj().T @ W @ U
            overlap = abs(la.hs_inner(Vt, Wt))
            if overlap >= (1.0 - 1e-8) * la.frob(Vt) * la.frob(Wt):
                match = (k, nu)
                break
        if match is None:
            raise IncompatibleJumps("jump supports differ")
        used.add(match[0])
        freq_gap.append(abs(omega - match[1]))
    factor = min(np.exp(-g * (2.0 - p) / (2.0 * p)) for g in freq_gap)
    return (lam_min / lam_max) * factor


# ---------------------------------------------------------------------------
# Mixing times
# ---------------------------------------------------------------------------


def mixing_bound(p: float, sigma_min: float, eps: float, alpha_p: float) -> float:
    """h(p, sigma_min, eps): mixing-time bound from the p-Beckner constant."""
    inner = (2.0 / (p * (p - 1.0))) * (sigma_min ** (2.0 / p - 2.0)
                                       - sigma_min ** (p + 2.0 / p - 3.0))
    return (p / (2.0 * alpha_p)) * np.log(np.sqrt(inner) / eps)


def mixing(L: DbcLindbladian, eps: float, mode: str,
           alphas: Dict[float, float] | None = None,
           p_grid: Sequence[float] | None = None,
           p: float | None = None, seed: int = 0) -> float:
    """Mixing-time bounds and an empirical trace-distance mixing time.

    mode 'bound'     : h(p, sigma_min, eps) for the given p.
    mode 'bound_inf' : min of h over the p grid.
    mode 'empirical' : crossing time of max over a witness set (the
                       eigenstates of sigma plus 8 seeded random pure states)
                       of ||P_t† rho - sigma||_1 against eps, bisected to 1%
                       and reported from below, so the returned value never
                       exceeds the true mixing time.

    When ``alphas`` is None the certified spectral-gap lower bounds are used,
    which keeps the bound valid at the price of slack.
    """
    if not 0.0 < eps < 2.0:
        raise ValueError("eps must lie in (0, 2)")
    rep = L.require_primitive()
    smin = L.sigma_min
    if mode in ("bound", "bound_inf"):
        grid = list(p_grid) if p_grid is not None else [1.05, 1.1, 1.25, 1.5, 1.75, 2.0]
        if mode == "bound":
            grid = [float(p)]

        def alpha_of(pp: float) -> float:
            if alphas is not None and pp in alphas:
                return alphas[pp]
            return certified_alpha_lower(rep.spectral_gap, smin, pp)

        return float(min(mixing_bound(pp, smin, eps, alpha_of(pp)) for pp in grid))
    if mode != "empirical":
        raise ValueError(f"unknown mode {mode!r}")

    d = L.d
    _, U = L.sigma_eig
    witnesses = [np.outer(U[:, k], U[:, k].conj()) for k in range(d)]
    rng = np.random.default_rng(seed)
    witnesses += [la.random_pure(rng, d) for _ in range(8)]

    def worst(t: float) -> float:
        prop = L.schrodinger_propagator(t)
        return max(la.trace_norm(la.apply_super(prop, w) - L.sigma)
                   for w in witnesses)

    if worst(0.0) <= eps:
        return 0.0
    t_hi = 40.0 / rep.spectral_gap
    ts = np.logspace(-3, np.log10(t_hi), 64)
    hit = None
    for t in ts:
        if worst(float(t)) <= eps:
            hit = float(t)
            break
    if hit is None:
        raise OptimizerDiverged("no mixing within the search window")
    lo = 0.0 if hit == ts[0] else float(ts[max(np.searchsorted(ts, hit) - 1, 0)])
    hi = hit
    while hi - lo > 0.01 * hi:
        mid = 0.5 * (lo + hi)
        if worst(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return lo


# ---------------------------------------------------------------------------
# Moment and concentration checks for symmetric semigroups
# ---------------------------------------------------------------------------


def moment_concentration_check(L: DbcLindbladian, X: np.ndarray, r: float,
                               a: float, s: float = 0.0,
                               t: float | None = None) -> Dict[str, float]:
    """Slack report for the moment, exponential-moment and tail inequalities
    of a symmetric semigroup whose Beckner constants satisfy
    alpha_p >= a (p-1)^s.

    Returns rhs - lhs for each checked inequality (nonnegative = pass).
    """
    d = L.d
    if la.frob(L.sigma - np.eye(d) / d) > 1e-10:
        raise NotSymmetric("moment estimates need sigma = I/d")
    if r < 2:
        raise ValueError("r must be at least 2")
    tracial = np.eye(d) / d
    m = ent.weighted_p_norm(X, tracial, 1.0)
    Xc = X - m * np.eye(d)
    Gamma = dh.carre_du_champ(L, X)
    kappa_s = 1.0 / (1.0 - np.exp(-(s + 1.0) / 2.0))
    lhs_m = ent.weighted_p_norm(Xc, tracial, r) ** 2
    rhs_m = (r ** (s + 1.0) * kappa_s / a) * ent.weighted_p_norm(Gamma, tracial, r / 2.0)
    out = {"moment": float(rhs_m - lhs_m)}

    kappa0 = 1.0 / (1.0 - np.exp(-0.5))
    gamma_inf = ent.weighted_p_norm(Gamma, tracial, np.inf)
    absXc = la.abs_power(Xc, 1.0)
    w = np.linalg.eigvalsh(la.herm(absXc))
    lhs_e = float(np.mean(np.exp(w)))
    rhs_e = 2.0 * np.exp(np.e * kappa0 * gamma_inf / (2.0 * a))
    out["exp_int"] = float(rhs_e - lhs_e)

    if t is not None:
        lhs_t = float(np.sum(w >= t)) / d
        if gamma_inf == 0.0:  # X is a multiple of the identity
            rhs_t = 0.0 if t > 0 else 2.0
        else:
            rhs_t = 2.0 * np.exp(-a * t * t / (2.0 * np.e * kappa0 * gamma_inf))
        out["concentration"] = float(rhs_t - lhs_t)
    return out
