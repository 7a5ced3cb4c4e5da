"""Small scenario builders shared by the test modules."""
import numpy as np

from cfdetect.harness import DESK, build_scenario


def scenario(seed, **kw):
    """Desk scenario (M=2, K=8, N=40, L=6 unless overridden) for one seed."""
    return build_scenario(DESK.replace(seed=seed, **kw), 0)


def single_ap(seed, field_mode="hybrid", **kw):
    """(model, y, scenario) for an M=1 instance; hybrid by default."""
    kw.setdefault("L_m", 4)
    sc = scenario(seed, M=1, field_mode=field_mode, **kw)
    return sc.problem.models[0], sc.ys[0], sc


def random_theta(rng, N, p_zero=0.3):
    th = rng.uniform(0, 1, N)
    th[rng.uniform(size=N) < p_zero] = 0.0
    return th


def rel_err(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300))
