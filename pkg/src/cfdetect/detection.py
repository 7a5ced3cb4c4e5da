"""Threshold decisions, PM/PF metrics and cosine-similarity diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedRateError(ValueError):
    pass


@dataclass
class DetectionReport:
    gamma: float
    pm: float
    pf: float
    equal_error_rate: float


def threshold_detect(a, gamma):
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    return (np.asarray(a) >= gamma).astype(int)


def pm_pf(estimate, truth):
    """Missed-detection and false-alarm probabilities."""
    est = np.asarray(estimate).astype(bool)
    tru = np.asarray(truth).astype(bool)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth differ in length")
    n_act = int(tru.sum())
    n_inact = tru.size - n_act
    if n_act == 0 or n_inact == 0:
        raise UndefinedRateError("need at least one active and one inactive device")
    pm = np.count_nonzero(tru & ~est) / n_act
    pf = np.count_nonzero(~tru & est) / n_inact
    return pm, pf


def equal_error_point(a, truth):
    """Threshold where PM and PF are closest, swept over the score values.

    PM and PF only change at score values, so the finite sweep over
    ``unique(a) + {0, 1}`` is exhaustive. Returns a DetectionReport whose
    ``equal_error_rate`` is ``(pm + pf) / 2``; ties go to the smaller gamma.
    """
    a = np.asarray(a, dtype=float)
    gammas = np.unique(np.concatenate([np.clip(a, 0, 1), [0.0, 1.0]]))
    best = None
    for g in gammas:
        pm, pf = pm_pf(a >= g, truth)
        gap = abs(pm - pf)
        if best is None or gap < best[0]:
            best = (gap, g, pm, pf)
    _, g, pm, pf = best
    return DetectionReport(gamma=float(g), pm=pm, pf=pf, equal_error_rate=(pm + pf) / 2)


# ---------------------------------------------------------------------------
# identifiability diagnostics
# ---------------------------------------------------------------------------

PAIR_CLASSES = ("NF-NF", "NF-FF", "FF-FF")


def matrix_correlation(F1, F2, near1, near2, K):
    """``tr(Xi1 Xi2) / (||Xi1||_F ||Xi2||_F)`` from the covariance factors."""
    if not near1 and not near2:
        return 1.0
    if near1 and near2:
        num = np.linalg.norm(F1.conj().T @ F2) ** 2
        den = np.linalg.norm(F1.conj().T @ F1) * np.linalg.norm(F2.conj().T @ F2)
    else:
        F = F1 if near1 else F2
        num = np.linalg.norm(F) ** 2               # tr(Xi)
        den = np.sqrt(K) * np.linalg.norm(F.conj().T @ F)
    if den == 0:
        return 0.0
    return float(num / den)


def similarity_diagnostics(models):
    """Per-AP, per-pair matrix-correlation factor and full cosine similarity.

    Returns a list of dict rows with keys ``ap, n, n2, pair_class,
    rho_matrix, rho``.
    """
    rows = []
    for m, model in enumerate(models):
        S = model.S
        norms = np.linalg.norm(S, axis=0)
        sig = np.abs(S.conj().T @ S) / np.outer(norms, norms)
        for n in range(model.N):
            for n2 in range(n + 1, model.N):
                nn, n2n = bool(model.near[n]), bool(model.near[n2])
                cls = "NF-NF" if nn and n2n else "FF-FF" if not (nn or n2n) else "NF-FF"
                rm = matrix_correlation(model.factors[n], model.factors[n2], nn, n2n, model.K)
                rows.append({
                    "ap": m, "n": n, "n2": n2, "pair_class": cls,
                    "rho_matrix": rm, "rho": rm * sig[n, n2] ** 2,
                })
    return rows
