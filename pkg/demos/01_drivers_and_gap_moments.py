"""Smooth drivers and their gap moments.

Samples one Brownian path, builds the polygonal and OU drivers from it, and
compares Monte Carlo gap moments against the closed-form formulas: the
polygonal gap is a rescaled Brownian bridge inside each cell, the OU gap
relaxes to eps/2 on the eps time scale.  Both are uniform in time -- the
whole point of a smooth driver with a fixed smoothing scale.
"""

import numpy as np

import wzlab as wz

eps, T, m = 0.1, 2.0, 64
mesh = wz.make_mesh(T, eps, m)

bp = wz.sample_brownian(mesh, dim=1, seed=0, path_id=0)
poly = wz.polygonal_driver(bp, mesh)
ou = wz.ou_driver(bp, mesh, eps)

print("one path, first coarse cell:")
times = mesh.fine_times()[: m + 1]
for j in (0, m // 4, m // 2, m):
    print(f"  t={times[j]:6.4f}   B={bp.values[j, 0]:+.4f}   "
          f"poly={poly.values[j, 0]:+.4f}   ou={ou.values[j, 0]:+.4f}")
print("polygonal gap at every coarse node:",
      np.abs((bp.values - poly.values)[:: m]).max(), "(exactly zero)\n")

n_paths = 20000
print(f"polygonal driver, E(B - Bbar)^2p pooled over cells, N = {n_paths}:")
res = wz.driver_moment_experiment("polygonal", eps, T, m,
                                  [0.25, 0.5, 0.75], n_paths, seed=1)
print(f"  {'u':>5} {'p':>2} {'monte carlo':>12} {'formula':>12} {'z':>6}")
for u, accs in res.items():
    for p, acc in zip((1, 2), accs):
        formula = wz.driver_gap_moments("polygonal", eps, u * eps, p)
        z = (acc.mean - formula) / acc.std_error
        print(f"  {u:5.2f} {p:2d} {acc.mean:12.3e} {formula:12.3e} {z:+6.2f}")

print(f"\nOU driver, E(B - Bbar)^2 at fixed times, N = {n_paths}:")
res = wz.driver_moment_experiment("ou", eps, T, m, [eps, 5 * eps, T], n_paths, seed=1)
for t, (acc2, _) in res.items():
    formula = wz.driver_gap_moments("ou", eps, t, 1)
    print(f"  t={t:4.1f}   mc={acc2.mean:.5f}   formula={formula:.5f}"
          f"   (saturates at eps/2 = {eps / 2})")
