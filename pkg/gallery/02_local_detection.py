"""
Coordinate descent at a single AP
=================================

Each AP fits the activity vector to its own received block by minimising
the Gaussian negative log-likelihood. The covariance inverse is kept exact
with Woodbury updates; each coordinate move minimises a quartic surrogate.
"""
import numpy as np

from cfdetect.detection import equal_error_point
from cfdetect.harness import DESK, build_scenario
from cfdetect.likelihood import init_precision
from cfdetect.solver_local import CdConfig, local_solve

sc = build_scenario(DESK.replace(M=1, K=24, lambda_c=0.3, seed=1), trial=0)
model, y = sc.problem.models[0], sc.ys[0]
print(f"N={model.N} devices, {int(model.near.sum())} in the near field, "
      f"{int(sc.a_true.sum())} active")

state = init_precision(model, y, np.zeros(model.N))
trace = []
theta = local_solve(state, model, a=0.0, lam=0.0, mu=0.0,
                    config=CdConfig(max_sweeps=30), rng=np.random.default_rng(0), trace=trace)

# %%
# The exact objective never increases: a step that would go uphill is
# re-solved with a larger proximal weight.
print(f"objective {trace[0]:.2f} -> {trace[-1]:.2f} over {len(trace) - 1} coordinate steps, "
      f"largest increase {max(np.diff(trace)):.1e}")

rep = equal_error_point(theta, sc.a_true)
print(f"equal-error point: gamma={rep.gamma:.3f}  PM={rep.pm:.3f}  PF={rep.pf:.3f}")
print("scores of active devices:", np.round(theta[sc.a_true == 1], 3))
