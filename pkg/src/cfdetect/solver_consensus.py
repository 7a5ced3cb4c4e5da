"""Consensus ADMM across APs, the centralized reference solver, fronthaul
quantization and overhead accounting.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import (
    apply_update,
    coordinate_terms,
    exact_delta,
    init_precision,
    nll,
    refresh,
    surrogate_coeffs,
)
from .solver_local import CdConfig, _backtracked_step, local_solve


class ConfigError(ValueError):
    pass


@dataclass
class Problem:
    """Everything the CPU and the APs need: one LocalModel and y per AP."""

    models: list
    ys: list

    @property
    def M(self):
        return len(self.models)

    @property
    def N(self):
        return self.models[0].N


# ---------------------------------------------------------------------------
# ADMM building blocks
# ---------------------------------------------------------------------------

def update_a(thetas, lambdas, mu):
    """Closed-form consensus update ``P_[0,1](sum_m (mu theta_m + lam_m) / (M mu))``."""
    if not mu > 0:
        raise ConfigError("mu must be positive")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
    M = thetas.shape[0]
    delta = np.sum(mu * thetas + lambdas, axis=0) / (M * mu)
    return np.clip(delta, 0.0, 1.0)


def update_a_from_payloads(payloads, mu, reported=None, previous=None):
    """Consensus update from uplink payloads ``mu theta_m + lam_m``.

    ``reported`` (M, N) marks the entries each AP actually sent; devices
    nobody reported keep ``previous``.
    """
    payloads = np.atleast_2d(np.asarray(payloads, dtype=float))
    if reported is None:
        return np.clip(payloads.mean(axis=0) / mu, 0.0, 1.0)
    cnt = reported.sum(axis=0)
    tot = np.where(reported, payloads, 0.0).sum(axis=0)
    prev = np.zeros(payloads.shape[1]) if previous is None else previous
    out = np.where(cnt > 0, tot / (np.maximum(cnt, 1) * mu), prev)
    return np.clip(out, 0.0, 1.0)


def dual_ascent(lambda_m, theta_m, a, mu):
    return np.asarray(lambda_m, dtype=float) + mu * (np.asarray(theta_m) - np.asarray(a))


def augmented_lagrangian(f_values, thetas, lambdas, a, mu):
    total = 0.0
    for f, th, lam in zip(f_values, thetas, lambdas):
        r = th - a
        total += f + float(lam @ r) + 0.5 * mu * float(r @ r)
    return total


def quantize(values, bits, lo, hi):
    """Uniform midrise quantizer with ``2**bits`` cell-centred levels on [lo, hi].

    Out-of-range inputs clamp to the outer levels; a value on a cell boundary
    goes to the upper cell.
    """
    if bits < 1:
        raise ConfigError("bits must be >= 1")
    if not lo < hi:
        raise ConfigError("need lo < hi")
    levels = 2**bits
    step = (hi - lo) / levels
    idx = np.floor((np.asarray(values, dtype=float) - lo) / step)
    idx = np.clip(idx, 0, levels - 1)
    return lo + (idx + 0.5) * step


@dataclass
class OverheadLedger:
    numbers_distributed: int
    bits_distributed: int
    numbers_centralized: int
    bits_centralized: int
    uplink_bits: int
    downlink_bits: int

    def as_row(self):
        return dict(self.__dict__)


def account_overhead(M, N, L, K, I, bits_dist, bits_cent, top_s=None):
    """Fronthaul bit counts for I distributed iterations vs. one centralized upload.

    Distributed: each iteration carries N numbers down and N up per AP. With
    ``top_s`` each AP uploads only S entries plus ``ceil(log2 N)`` index bits
    per entry. Centralized: each AP uploads its L x K complex snapshot.
    """
    for name, v in (("M", M), ("N", N), ("L", L), ("K", K)):
        if v < 1:
            raise ConfigError(f"{name} must be >= 1")
    if I < 0:
        raise ConfigError("I must be >= 0")
    down = I * M * N * bits_dist
    if top_s is None:
        up = I * M * N * bits_dist
        up_numbers = I * M * N
    else:
        S = min(int(top_s), N)
        idx_bits = math.ceil(math.log2(N)) if N > 1 else 0
        up = I * M * S * (bits_dist + idx_bits)
        up_numbers = I * M * S
    return OverheadLedger(
        numbers_distributed=I * M * N + up_numbers,
        bits_distributed=down + up,
        numbers_centralized=2 * M * L * K,
        bits_centralized=2 * M * L * K * bits_cent,
        uplink_bits=up,
        downlink_bits=down,
    )


# ---------------------------------------------------------------------------
# distributed algorithm
# ---------------------------------------------------------------------------

@dataclass
class ConsensusConfig:
    mu: float = 1.0
    outer_iters: int = 5
    outer_tol: float = 1e-3
    cd: CdConfig = field(default_factory=CdConfig)
    seed: int = 0
    # fronthaul model: None means unquantized
    bits: int | None = None
    uplink_range: tuple = (-1.0, 2.0)
    top_s: int | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError("mu must be positive")
        if self.outer_iters < 0:
            raise ConfigError("outer_iters must be >= 0")


def ap_rng(seed, m, i):
    """Independent stream for AP ``m`` at outer iteration ``i``."""
    return np.random.default_rng([int(seed), int(m), int(i)])


def top_s_mask(problem, S):
    """(M, N) mask of the S devices with the largest mean channel energy per AP."""
    M, N = problem.M, problem.N
    mask = np.zeros((M, N), dtype=bool)
    for m, model in enumerate(problem.models):
        energy = np.array([np.sum(np.abs(F) ** 2) + np.sum(np.abs(model.means[n]) ** 2)
                           for n, F in enumerate(model.factors)])
        mask[m, np.argsort(-energy, kind="stable")[:S]] = True
    return mask


@dataclass
class DistributedResult:
    a: np.ndarray
    trace: list
    ledger: OverheadLedger
    thetas: np.ndarray
    lambdas: np.ndarray
    history: list   # a after each outer iteration

    def trace_csv(self):
        buf = io.StringIO()
        cols = ["iteration", "augmented_lagrangian", "consensus_residual",
                "per_ap_nll", "bits_transmitted"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.trace:
            r = dict(row)
            r["per_ap_nll"] = ";".join(repr(float(v)) for v in r["per_ap_nll"])
            w.writerow(r)
        return buf.getvalue()


def run_distributed(problem, config=None):
    """Consensus ADMM: broadcast a, local CD per AP, dual ascent, a-update.

    Returns a :class:`DistributedResult`; its ``trace`` has one row per
    outer iteration with the augmented Lagrangian evaluated at the
    post-update variables.
    """
    cfg = config or ConsensusConfig()
    M, N, mu = problem.M, problem.N, cfg.mu
    L, K = problem.models[0].L, problem.models[0].K
    thetas = np.zeros((M, N))
    lambdas = np.zeros((M, N))
    a = update_a(thetas, lambdas, mu)
    reported = top_s_mask(problem, cfg.top_s) if cfg.top_s is not None else None
    bits_per_number = cfg.bits if cfg.bits is not None else 64
    trace, history = [], []
    states = [None] * M
    iters_done = 0
    for i in range(1, cfg.outer_iters + 1):
        a_sent = quantize(a, cfg.bits, 0.0, 1.0) if cfg.bits else a
        f_vals = []
        for m, model in enumerate(problem.models):
            if states[m] is None:
                states[m] = init_precision(model, problem.ys[m], a_sent)
            else:
                states[m].theta = a_sent.copy()
                refresh(states[m], model)
            thetas[m] = local_solve(states[m], model, a_sent, lambdas[m], mu, cfg.cd,
                                    ap_rng(cfg.seed, m, i))
            lambdas[m] = dual_ascent(lambdas[m], thetas[m], a_sent, mu)
            f_vals.append(nll(states[m]))
        payload = mu * thetas + lambdas
        if cfg.bits:
            lo, hi = cfg.uplink_range
            payload = mu * quantize(payload / mu, cfg.bits, lo, hi)
        a_prev = a
        a = update_a_from_payloads(payload, mu, reported, previous=a_prev)
        iters_done = i
        ledger_i = account_overhead(M, N, L, K, i, bits_per_number, bits_per_number, cfg.top_s)
        trace.append({
            "iteration": i,
            "augmented_lagrangian": augmented_lagrangian(f_vals, thetas, lambdas, a, mu),
            "consensus_residual": float(np.max(np.abs(thetas - a))),
            "per_ap_nll": list(f_vals),
            "bits_transmitted": ledger_i.bits_distributed,
        })
        history.append(a.copy())
        if np.max(np.abs(a - a_prev)) < cfg.outer_tol:
            break
    ledger = account_overhead(M, N, L, K, iters_done, bits_per_number, bits_per_number, cfg.top_s)
    return DistributedResult(a=a, trace=trace, ledger=ledger, thetas=thetas.copy(),
                             lambdas=lambdas.copy(), history=history)


# ---------------------------------------------------------------------------
# centralized reference
# ---------------------------------------------------------------------------

def total_nll(states):
    return sum(nll(st) for st in states)


def run_centralized(problem, cd=None, rng=None, a0=None, trace=None):
    """Single CD loop over ``a`` with coordinate surrogates summed over APs."""
    cd = cd or CdConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    N = problem.N
    a = np.zeros(N) if a0 is None else np.array(a0, dtype=float)
    states = [init_precision(mod, y, a) for mod, y in zip(problem.models, problem.ys)]
    if trace is not None:
        trace.append(total_nll(states))
    for sweep in range(cd.max_sweeps):
        max_step = 0.0
        for n in rng.permutation(N):
            terms = [coordinate_terms(st, mod, n) for st, mod in zip(states, problem.models)]
            rho = np.zeros(4)
            for st, mod, t in zip(states, problem.models, terms):
                rho += surrogate_coeffs(n, st, mod, 0.0, 0.0, 0.0, t)
            th = a[n]

            def delta(d):
                return sum(exact_delta(st, mod, n, d, t)
                           for st, mod, t in zip(states, problem.models, terms))

            d = _backtracked_step(tuple(rho), cd.omega, -th, 1.0 - th, delta, cd)
            for st, mod, t in zip(states, problem.models, terms):
                apply_update(st, mod, n, d, t)
            a[n] = states[0].theta[n]
            max_step = max(max_step, abs(d))
            if trace is not None:
                trace.append(total_nll(states))
        if cd.refresh_period and (sweep + 1) % cd.refresh_period == 0:
            for st, mod in zip(states, problem.models):
                refresh(st, mod)
        if max_step < cd.tol:
            break
    return a
