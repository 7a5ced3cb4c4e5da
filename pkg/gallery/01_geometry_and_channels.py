"""
Deployments, Rayleigh distances and hybrid channels
===================================================

A cell-free layout puts several linear arrays and many single-antenna
devices on a wrap-around square. Whether a device is in the near field of
an AP depends on the array aperture and the carrier wavelength.
"""
import numpy as np

from cfdetect.channel import build_channel_stats
from cfdetect.geometry import (
    DeploymentConfig,
    classify_near_field,
    rayleigh_distance,
    sample_deployment,
)

# The near-field boundary grows with the square of the aperture
for K, lam in [(8, 0.3), (24, 0.05), (24, 0.2), (24, 0.3)]:
    print(f"K={K:2d}  lambda_c={lam:.2f} m  ->  Rayleigh distance {rayleigh_distance(K, lam):6.2f} m")

# A deployment at the default simulation scale
rng = np.random.default_rng(0)
dep = sample_deployment(DeploymentConfig(M=3, N=100, K=24, lambda_c=0.3), rng)
near = classify_near_field(dep)
print("near-field devices per AP:", near.sum(axis=1))

# %%
# Far-field channels are i.i.d. with variance g; near-field channels have a
# line-of-sight mean and a low-rank scatterer covariance.
stats = build_channel_stats(dep)
m = 0
n_far = int(np.flatnonzero(~near[m])[0])
n_near = int(np.flatnonzero(near[m])[0])
far, nf = stats[m][n_far], stats[m][n_near]
print(f"far device {n_far}:  g = {far.g:.3e}, covariance is g*I_K")
R = nf.covariance()
print(f"near device {n_near}: |mean|^2 per antenna = {np.abs(nf.mean[0])**2:.3e}, "
      f"rank(R) = {np.linalg.matrix_rank(R, tol=1e-9 * np.abs(R).max())} of K = {dep.K}")
