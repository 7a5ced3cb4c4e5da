"""Randomised coordinate descent on the per-AP subproblem.

Each coordinate step minimises the quartic surrogate

    q(d) = rho1 d + (rho2 + omega/2) d^2 + rho3 d^3 + rho4 d^4

over ``d in [-theta_n, 1 - theta_n]``. With ``adaptive_omega`` a step that
would increase the exact local objective is rejected and re-solved with a
doubled ``omega``, which makes every accepted step a descent step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .likelihood import (
    apply_update,
    coordinate_terms,
    exact_delta,
    refresh,
    subproblem_objective,
    surrogate_coeffs,
)
from .signals import unvec_received


@dataclass
class CdConfig:
    omega: float = 1.0
    max_sweeps: int = 20
    tol: float = 1e-4
    adaptive_omega: bool = True
    refresh_period: int = 5
    max_backtracks: int = 60

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


# ---------------------------------------------------------------------------
# one-dimensional quartic minimisation
# ---------------------------------------------------------------------------

def quartic_value(rho, omega, d):
    r1, r2, r3, r4 = rho
    d = np.asarray(d, dtype=float)
    return d * (r1 + d * ((r2 + 0.5 * omega) + d * (r3 + d * r4)))


def _quadratic_roots(a, b, c):
    # a x^2 + b x + c, cancellation-free form
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0:
        return []
    if abs(a) <= 1e-14 * scale:
        return [] if abs(b) <= 1e-14 * scale else [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        # keep the vertex when the discriminant is only negative by round-off
        return [-b / (2 * a)] if disc > -1e-12 * b * b else []
    sq = math.sqrt(disc)
    qv = -0.5 * (b + math.copysign(sq, b))
    roots = [qv / a]
    if qv != 0:
        roots.append(c / qv)
    return roots


def _cubic_roots_closed(a3, a2, a1, a0):
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    p = c - b * b / 3
    q = 2 * b**3 / 27 - b * c / 3 + d
    shift = -b / 3
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if p == 0 and q == 0:
        return [shift]
    if disc > 0:
        A = -math.copysign(abs(abs(q) / 2 + math.sqrt(disc)) ** (1 / 3), q)
        B = -p / (3 * A) if A != 0 else 0.0
        return [A + B + shift]
    r = 2 * math.sqrt(-p / 3) if p < 0 else 0.0
    if p * r == 0:
        # p has underflowed: a (near-)triple root
        return [-math.copysign(abs(q) ** (1 / 3), q) + shift]
    arg = max(-1.0, min(1.0, 3 * q / (p * r)))
    phi = math.acos(arg) / 3
    return [r * math.cos(phi - 2 * math.pi * k / 3) + shift for k in range(3)]


def _polish(coeffs, x, iters=3):
    # Newton on a3 x^3 + a2 x^2 + a1 x + a0
    a3, a2, a1, a0 = coeffs
    for _ in range(iters):
        f = ((a3 * x + a2) * x + a1) * x + a0
        df = (3 * a3 * x + 2 * a2) * x + a1
        if df == 0 or not math.isfinite(df):
            break
        step = f / df
        if not math.isfinite(step) or abs(step) > 1e-2 * (1 + abs(x)):
            break
        x -= step
    return x


def stationary_points(rho, omega):
    """Real roots of ``q'(d) = rho1 + (2 rho2 + omega) d + 3 rho3 d^2 + 4 rho4 d^3``."""
    r1, r2, r3, r4 = rho
    coeffs = (4 * r4, 3 * r3, 2 * r2 + omega, r1)
    a3, a2, a1, a0 = coeffs
    scale = max(abs(c) for c in coeffs)
    if scale == 0 or not math.isfinite(scale):
        return []
    if abs(a3) <= 1e-12 * scale:
        roots = _quadratic_roots(a2, a1, a0)
    else:
        roots = _cubic_roots_closed(a3, a2, a1, a0)
        if not all(math.isfinite(x) for x in roots):
            eig = np.roots(coeffs)
            roots = [float(x.real) for x in eig if abs(x.imag) <= 1e-9 * (1 + abs(x))]
    if abs(a3) > 0:
        roots = [_polish(coeffs, x) for x in roots]
    return [x for x in roots if math.isfinite(x)]


def quartic_argmin(rho, omega, lo, hi):
    """Minimiser of the quartic surrogate on ``[lo, hi]``.

    Candidates are the interval ends, ``0`` and every stationary point inside
    the interval; ties go to the smallest ``|d|``.
    """
    cands = [lo, hi]
    if lo <= 0 <= hi:
        cands.append(0.0)
    cands += [x for x in stationary_points(rho, omega) if lo <= x <= hi]
    vals = quartic_value(rho, omega, np.array(cands))
    best = float(np.min(vals))
    slack = 1e-14 * max(1.0, abs(best))
    ok = [c for c, v in zip(cands, vals) if v <= best + slack]
    return float(min(ok, key=abs))


# ---------------------------------------------------------------------------
# generic LK-dimensional coordinate descent
# ---------------------------------------------------------------------------

def _penalty_delta(d, theta_n, lam_n, mu, a_n):
    r = theta_n - a_n
    return lam_n * d + 0.5 * mu * ((r + d) ** 2 - r * r)


def _backtracked_step(rho, omega, lo, hi, delta_fn, config):
    for _ in range(config.max_backtracks + 1):
        d = quartic_argmin(rho, omega, lo, hi)
        if d == 0 or not config.adaptive_omega:
            return d
        if delta_fn(d) <= 0:
            return d
        omega = 2 * omega if omega > 0 else 1.0
    return 0.0


def solve_coordinate(n, state, model, lambda_n, mu, a_n, omega, terms=None):
    """Surrogate minimiser for coordinate ``n`` at a fixed ``omega``."""
    rho = surrogate_coeffs(n, state, model, lambda_n, mu, a_n, terms)
    th = state.theta[n]
    return quartic_argmin(rho, omega, -th, 1.0 - th)


def coordinate_step(n, state, model, lambda_n, mu, a_n, config):
    """Pick and apply one coordinate move; returns the step taken."""
    terms = coordinate_terms(state, model, n)
    rho = surrogate_coeffs(n, state, model, lambda_n, mu, a_n, terms)
    th = state.theta[n]

    def delta(d):
        return exact_delta(state, model, n, d, terms) + _penalty_delta(d, th, lambda_n, mu, a_n)

    d = _backtracked_step(rho, config.omega, -th, 1.0 - th, delta, config)
    apply_update(state, model, n, d, terms)
    return d


def local_solve(state, model, a, lam, mu, config, rng, trace=None):
    """Coordinate descent on ``f_m + lam^T (theta - a) + mu/2 ||theta - a||^2``.

    Starts from ``state.theta`` and updates ``state`` in place. When ``trace``
    is a list, the exact objective is appended after every coordinate step.
    """
    N = model.N
    a = np.broadcast_to(np.asarray(a, dtype=float), (N,))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (N,))
    if trace is not None:
        trace.append(subproblem_objective(state, lam, mu, a))
    for sweep in range(config.max_sweeps):
        max_step = 0.0
        for n in rng.permutation(N):
            d = coordinate_step(n, state, model, lam[n], mu, a[n], config)
            max_step = max(max_step, abs(d))
            if trace is not None:
                trace.append(subproblem_objective(state, lam, mu, a))
        if config.refresh_period and (sweep + 1) % config.refresh_period == 0:
            refresh(state, model)
        if max_step < config.tol:
            break
    return state.theta.copy()


def projected_gradient_residual(state, model, a, lam, mu):
    """``|| P_[0,1](theta - grad U) - theta ||_inf`` with the gradient from rho1."""
    grad = np.array([surrogate_coeffs(n, state, model, lam[n], mu, a[n])[0]
                     for n in range(model.N)])
    th = state.theta
    return float(np.max(np.abs(np.clip(th - grad, 0, 1) - th)))


# ---------------------------------------------------------------------------
# far-field path: shared L x L inverse, rank-1 updates
# ---------------------------------------------------------------------------

@dataclass
class FarFieldState:
    theta: np.ndarray
    inv_C: np.ndarray   # L x L, shared by all K antenna blocks
    Y: np.ndarray       # L x K


def far_field_state(Y, S, gains, theta0):
    theta = np.array(theta0, dtype=float)
    C = (S * (theta * gains)) @ S.conj().T + np.eye(S.shape[0])
    inv = np.linalg.inv(C)
    return FarFieldState(theta=theta, inv_C=0.5 * (inv + inv.conj().T), Y=Y)


def far_field_objective(fs, S, gains):
    """``K log|C_L| + sum_k y_k^H C_L^{-1} y_k``, the far-field local NLL."""
    L, K = fs.Y.shape
    sign, logdet_inv = np.linalg.slogdet(fs.inv_C)
    quad = np.real(np.einsum("lk,lj,jk->", fs.Y.conj(), fs.inv_C, fs.Y))
    return -K * logdet_inv + float(quad)


def _rank1_stats(fs, s, g):
    As = fs.inv_C @ s
    q = float(np.real(np.vdot(s, As)))
    z = As.conj() @ fs.Y
    P = float(np.real(np.vdot(z, z)))
    return As, q, P


def exact_rank1_step(qs, Ps, gs, K, lo, hi):
    """Exact minimiser of ``sum_m K log(1 + d g_m q_m) - d g_m P_m / (1 + d g_m q_m)``.

    One AP has the classical closed form ``(P/K - q) / (g q^2)``; several
    APs are handled by bounded scalar minimisation.
    """
    qs, Ps, gs = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (qs, Ps, gs))
    if qs.size == 1:
        d = (Ps[0] / K - qs[0]) / (gs[0] * qs[0] ** 2)
        return float(min(max(d, lo), hi))

    def obj(d):
        t = 1 + d * gs * qs
        return float(np.sum(K * np.log(t) - d * gs * Ps / t))

    cands = [lo, hi]
    if hi > lo:
        res = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        cands.append(float(res.x))
    return min(cands, key=obj)


def far_field_fast_path(y, S, gains, a, lam, mu, config, rng, theta0=None,
                        step="surrogate", trace=None, near=None):
    """Coordinate descent for an AP whose devices are all far-field.

    The LK x LK covariance is ``I_K kron C_L`` with one L x L block shared
    by all antennas, so the Woodbury update reduces to rank-1 updates of
    ``C_L^{-1}``. ``step="surrogate"`` reproduces the generic quartic path;
    ``step="exact"`` takes the classical closed-form rank-1 coordinate
    minimiser (requires ``mu = 0`` and ``lam = 0``). ``near`` is an optional
    per-device flag array; any near-field device is rejected.
    """
    if near is not None and np.any(near):
        raise ValueError("far_field_fast_path needs an all-far-field AP")
    S = np.asarray(S, dtype=complex)
    L, N = S.shape
    gains = np.asarray(gains, dtype=float)
    Y = unvec_received(y, L) if np.ndim(y) == 1 else np.asarray(y)
    K = Y.shape[1]
    a = np.broadcast_to(np.asarray(a, dtype=float), (N,))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (N,))
    if step == "exact" and (mu != 0 or np.any(lam != 0)):
        raise ValueError("exact rank-1 steps need mu = 0 and lam = 0")
    if step not in ("surrogate", "exact"):
        raise ValueError(f"unknown step rule {step!r}")
    theta0 = np.array(a if theta0 is None else theta0, dtype=float)
    fs = far_field_state(Y, S, gains, theta0)

    def objective():
        r = fs.theta - a
        return far_field_objective(fs, S, gains) + float(lam @ r) + 0.5 * mu * float(r @ r)

    if trace is not None:
        trace.append(objective())
    for sweep in range(config.max_sweeps):
        max_step = 0.0
        for n in rng.permutation(N):
            s, g, th = S[:, n], gains[n], fs.theta[n]
            As, q, P = _rank1_stats(fs, s, g)
            gq = g * q
            if step == "exact":
                d = exact_rank1_step(q, P, g, K, -th, 1.0 - th)
            else:
                uu = g * P
                rho = (K * gq - uu + lam[n] + mu * (th - a[n]),
                       gq * uu + 0.5 * mu, 0.0, 0.0)

                def delta(d):
                    t = 1 + d * gq
                    if t <= 0:
                        return np.inf
                    return (K * math.log(t) - d * uu / t
                            + _penalty_delta(d, th, lam[n], mu, a[n]))

                d = _backtracked_step(rho, config.omega, -th, 1.0 - th, delta, config)
            if d != 0:
                A = fs.inv_C - (d * g / (1 + d * gq)) * np.outer(As, As.conj())
                fs.inv_C = 0.5 * (A + A.conj().T)
                fs.theta[n] = min(max(th + d, 0.0), 1.0)
            max_step = max(max_step, abs(d))
            if trace is not None:
                trace.append(objective())
        if config.refresh_period and (sweep + 1) % config.refresh_period == 0:
            fs = far_field_state(Y, S, gains, fs.theta)
        if max_step < config.tol:
            break
    return fs.theta.copy()


def mismatched_cd(ys, S, gains, config, rng):
    """Classical rank-1 coordinate descent that treats every channel as far-field.

    ``ys`` is one received vector or a list of them (one per AP) and
    ``gains`` the matching path-loss gains, shape (N,) or (M, N). Several APs
    are combined centrally by summing their coordinate objectives.
    """
    S = np.asarray(S, dtype=complex)
    L, N = S.shape
    if np.ndim(ys) == 1:
        ys = [ys]
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    M = len(ys)
    if M == 1:
        return far_field_fast_path(ys[0], S, gains[0], np.zeros(N), np.zeros(N), 0.0,
                                   config, rng, theta0=np.zeros(N), step="exact")
    Ys = [unvec_received(y, L) for y in ys]
    K = Ys[0].shape[1]
    states = [far_field_state(Ys[m], S, gains[m], np.zeros(N)) for m in range(M)]
    theta = np.zeros(N)
    for sweep in range(config.max_sweeps):
        max_step = 0.0
        for n in rng.permutation(N):
            s = S[:, n]
            stats = [_rank1_stats(states[m], s, gains[m, n]) for m in range(M)]
            qs = [st[1] for st in stats]
            Ps = [st[2] for st in stats]
            d = exact_rank1_step(qs, Ps, gains[:, n], K, -theta[n], 1.0 - theta[n])
            if d != 0:
                for m, (As, q, _) in enumerate(stats):
                    g = gains[m, n]
                    A = states[m].inv_C - (d * g / (1 + d * g * q)) * np.outer(As, As.conj())
                    states[m].inv_C = 0.5 * (A + A.conj().T)
                theta[n] = min(max(theta[n] + d, 0.0), 1.0)
            max_step = max(max_step, abs(d))
        if config.refresh_period and (sweep + 1) % config.refresh_period == 0:
            states = [far_field_state(Ys[m], S, gains[m], theta) for m in range(M)]
        if max_step < config.tol:
            break
    return theta
