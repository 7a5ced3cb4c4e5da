"""Per-AP Gaussian likelihood with an exactly maintained inverse covariance.

For AP m and soft activities ``theta`` the received vector is modelled as

    y ~ CN( sum_n theta_n v_n,  sum_n theta_n X_n X_n^H + I )

with ``v_n = kron(mean_n, s_n)`` and ``X_n = kron(F_n, s_n)`` where
``F_n F_n^H`` is the channel covariance (``g I_K`` in the far field). The
state keeps ``inv(C)``, ``log|C|`` and the residual ``y - mean`` exact under
coordinate moves via the Woodbury identity; Taylor truncations only enter the
quartic surrogate coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class NumericalError(ArithmeticError):
    pass


@dataclass
class LocalModel:
    S: np.ndarray        # (L, N) signatures
    factors: list        # F_n, each (K, J_n)
    means: np.ndarray    # (N, K), zero rows for far-field devices
    near: np.ndarray     # (N,) bool
    gains: np.ndarray    # (N,) far-field / LoS path gains

    def __post_init__(self):
        self.L, self.N = self.S.shape
        self.K = self.means.shape[1]
        self.LK = self.L * self.K
        # v_n = kron(mean_n, s_n), stacked as rows
        self.V = (self.means[:, :, None] * self.S.T[:, None, :]).reshape(self.N, self.LK)

    def J(self, n):
        return self.factors[n].shape[1]

    def X(self, n):
        return np.kron(self.factors[n], self.S[:, n][:, None])

    def times_X(self, A, n):
        """``A @ X_n`` without forming ``X_n``."""
        B = A.reshape(A.shape[0], self.K, self.L) @ self.S[:, n]
        if self.near[n]:
            return B @ self.factors[n]
        return np.sqrt(self.gains[n]) * B

    def Xh_times(self, Z, n):
        """``X_n^H @ Z`` for Z of shape (LK,) or (LK, p)."""
        F = self.factors[n]
        if Z.ndim == 1:
            B = Z.reshape(self.K, self.L) @ self.S[:, n].conj()
        else:
            B = np.einsum("l,klp->kp", self.S[:, n].conj(), Z.reshape(self.K, self.L, -1))
        if self.near[n]:
            return F.conj().T @ B
        return np.sqrt(self.gains[n]) * B

    def gram(self, n):
        """Dense ``X_n X_n^H = Xi_n kron s_n s_n^H``."""
        F = self.factors[n]
        s = self.S[:, n]
        return np.kron(F @ F.conj().T, np.outer(s, s.conj()))

    def covariance(self, theta):
        C = np.eye(self.LK, dtype=complex)
        for n in np.flatnonzero(theta):
            C += theta[n] * self.gram(n)
        return C

    def mean(self, theta):
        return np.asarray(theta, dtype=float) @ self.V


def build_local_model(stats_m, S):
    """LocalModel of one AP from its per-device ChannelStat list."""
    K = stats_m[0].K
    N = len(stats_m)
    factors = [st.channel_factor() for st in stats_m]
    means = np.zeros((N, K), dtype=complex)
    for n, st in enumerate(stats_m):
        if st.near:
            means[n] = st.mean
    return LocalModel(
        S=np.asarray(S, dtype=complex),
        factors=factors,
        means=means,
        near=np.array([st.near for st in stats_m]),
        gains=np.array([st.g for st in stats_m]),
    )


def far_field_model(S, gains, K):
    """LocalModel in which every device is treated as far-field."""
    gains = np.asarray(gains, dtype=float)
    N = S.shape[1]
    eye = np.eye(K, dtype=complex)
    return LocalModel(
        S=np.asarray(S, dtype=complex),
        factors=[np.sqrt(g) * eye for g in gains],
        means=np.zeros((N, K), dtype=complex),
        near=np.zeros(N, dtype=bool),
        gains=gains,
    )


@dataclass
class PrecisionState:
    theta: np.ndarray
    inv_C: np.ndarray
    residual: np.ndarray
    logdet: float
    y: np.ndarray


def _hermitian_inverse(C):
    try:
        c, lower = sla.cho_factor(C, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc
    inv = sla.cho_solve((c, lower), np.eye(C.shape[0], dtype=C.dtype))
    logdet = 2.0 * np.sum(np.log(np.real(np.diag(c))))
    return 0.5 * (inv + inv.conj().T), float(logdet)


def init_precision(model, y, theta0):
    theta = np.array(theta0, dtype=float)
    if theta.shape != (model.N,) or np.any(theta < 0) or np.any(theta > 1):
        raise ValueError("theta0 must lie in [0, 1]^N")
    y = np.asarray(y, dtype=complex)
    inv_C, logdet = _hermitian_inverse(model.covariance(theta))
    return PrecisionState(theta=theta, inv_C=inv_C,
                          residual=y - model.mean(theta), logdet=logdet, y=y)


def refresh(state, model):
    """Rebuild inverse, log-determinant and residual from ``state.theta``."""
    fresh = init_precision(model, state.y, np.clip(state.theta, 0.0, 1.0))
    state.theta = fresh.theta
    state.inv_C = fresh.inv_C
    state.residual = fresh.residual
    state.logdet = fresh.logdet
    return state


def nll(state, model=None):
    """``log|C| + e^H C^{-1} e`` for the current state."""
    e = state.residual
    return state.logdet + float(np.real(np.vdot(e, state.inv_C @ e)))


def dense_nll(model, y, theta):
    """Direct evaluation from a freshly built covariance (test oracle)."""
    C = model.covariance(np.asarray(theta, dtype=float))
    e = np.asarray(y) - model.mean(theta)
    sign, logdet = np.linalg.slogdet(C)
    return float(logdet + np.real(np.vdot(e, np.linalg.solve(C, e))))


def subproblem_objective(state, lam, mu, a):
    """Exact local objective ``f_m + lam^T (theta - a) + mu/2 ||theta - a||^2``."""
    diff = state.theta - a
    return nll(state) + float(np.dot(lam, diff)) + 0.5 * mu * float(np.dot(diff, diff))


@dataclass
class CoordinateTerms:
    """Quantities shared by the surrogate, the exact step check and the update."""

    AX: np.ndarray   # C^{-1} X_n
    G: np.ndarray    # X_n^H C^{-1} X_n
    u: np.ndarray    # X_n^H C^{-1} e
    w: np.ndarray    # X_n^H C^{-1} v_n
    eAe: float
    eAv: complex
    vAv: float


def coordinate_terms(state, model, n):
    A = state.inv_C
    e = state.residual
    AX = model.times_X(A, n)
    G = model.Xh_times(AX, n)
    G = 0.5 * (G + G.conj().T)
    Ae = A @ e
    u = AX.conj().T @ e
    if model.near[n]:
        v = model.V[n]
        Av = A @ v
        w = AX.conj().T @ v
        eAv = np.vdot(e, Av)
        vAv = float(np.real(np.vdot(v, Av)))
    else:
        w = np.zeros(G.shape[0], dtype=complex)
        eAv = 0j
        vAv = 0.0
    return CoordinateTerms(AX=AX, G=G, u=u, w=w,
                           eAe=float(np.real(np.vdot(e, Ae))), eAv=eAv, vAv=vAv)


def surrogate_coeffs(n, state, model, lambda_n=0.0, mu=0.0, a_n=0.0, terms=None):
    """Coefficients (rho1, rho2, rho3, rho4) of the quartic coordinate surrogate.

    With ``lambda_n = mu = 0`` these are the dual-free coefficients used by the
    centralized solver.
    """
    t = terms or coordinate_terms(state, model, n)
    G, u, w = t.G, t.u, t.w
    Gu = G @ u
    Gw = G @ w
    uu = float(np.real(np.vdot(u, u)))
    uGu = float(np.real(np.vdot(u, Gu)))
    rho1 = float(np.real(np.trace(G))) - 2.0 * np.real(t.eAv) - uu
    rho2 = t.vAv + 2.0 * np.real(np.vdot(u, w)) + uGu
    rho3 = -2.0 * np.real(np.vdot(u, Gw)) - float(np.real(np.vdot(w, w)))
    rho4 = float(np.real(np.vdot(w, Gw)))
    rho1 += lambda_n + mu * (state.theta[n] - a_n)
    rho2 += 0.5 * mu
    return float(rho1), float(rho2), float(rho3), float(rho4)


def _core_logdet(core):
    sign, logdet = np.linalg.slogdet(core)
    if not np.isfinite(logdet) or abs(sign - 1) > 1e-6:
        return None
    return float(logdet)


def exact_delta(state, model, n, d, terms=None):
    """Exact change of ``f_m`` when ``theta_n`` moves by ``d``."""
    if d == 0:
        return 0.0
    t = terms or coordinate_terms(state, model, n)
    core = np.eye(t.G.shape[0]) + d * t.G
    ld = _core_logdet(core)
    if ld is None:
        return np.inf
    r = t.u - d * t.w
    quad = t.eAe - 2.0 * d * np.real(t.eAv) + d * d * t.vAv
    quad -= d * float(np.real(np.vdot(r, np.linalg.solve(core, r))))
    return ld + quad - t.eAe


def apply_update(state, model, n, d, terms=None):
    """Move ``theta_n`` by ``d`` with an exact Woodbury update of the state."""
    if d == 0:
        return state
    new = state.theta[n] + d
    if new < -1e-12 or new > 1 + 1e-12:
        raise ValueError("update leaves [0, 1]")
    t = terms or coordinate_terms(state, model, n)
    core = np.eye(t.G.shape[0]) + d * t.G
    ld = _core_logdet(core)
    state.theta[n] = min(max(new, 0.0), 1.0)
    if ld is None:
        return refresh(state, model)
    AX = t.AX
    A = state.inv_C - d * (AX @ np.linalg.solve(core, AX.conj().T))
    state.inv_C = 0.5 * (A + A.conj().T)
    state.logdet += ld
    if model.near[n]:
        state.residual = state.residual - d * model.V[n]
    return state
