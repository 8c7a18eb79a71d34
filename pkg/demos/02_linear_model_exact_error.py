"""The headline dichotomy, with exact arithmetic and no Monte Carlo.

For b(x) = a x with unit diffusion and the polygonal driver, the mean square
gap E (X_{t_n} - Xbar_{t_n})^2 has a closed form.  For a < 0 it is uniformly
bounded in time by e^{2|a| eps} |a| eps^2 / 24; for a > 0 it is sandwiched
between exponentially exploding envelopes (a/24) e^{-+2a eps} eps^2
(e^{2 a t_n} - 1).  A Wong-Zakai approximation of an unstable model is
useless beyond a short horizon; for a stable model the error never grows.
"""

import numpy as np

import wzlab as wz

eps = 0.01

print("stable case a = -1: uniform in time")
a = -1.0
bound = wz.lg_stable_bound(a, eps)
print(f"  bound c(eps) eps^2       = {bound:.6e}")
for t in (0.1, 1.0, 10.0, 50.0):
    n = int(round(t / eps))
    print(f"  t = {t:5.1f}: exact variance = {wz.exact_linear_variance(a, eps, n):.6e}")
print(f"  n -> inf limit           = {wz.exact_linear_variance_limit(a, eps):.6e}\n")

print("unstable case a = +2: exponential explosion, sandwiched")
a = 2.0
print(f"  {'t':>5} {'lower':>12} {'exact':>12} {'upper':>12}")
for t in (0.5, 1.0, 2.0, 5.0):
    n = int(round(t / eps))
    var = wz.exact_linear_variance(a, eps, n)
    lo, hi = wz.lg_unstable_envelope(a, eps, t)
    print(f"  {t:5.1f} {lo:12.4e} {var:12.4e} {hi:12.4e}")
print("\n  at t = 10 the factor e^{2at} is e^40 ~ 2.4e17: the absolute error")
print("  budget is gone no matter how small eps is chosen.")

print("\ncross-check of the closed form against brute-force summation:")
a, eps, n = -0.7, 0.1, 40
v = wz.estimators.percell_variance(a, eps)
brute = v * eps * sum(np.exp(2 * a * eps * j) for j in range(n))
print(f"  closed = {wz.exact_linear_variance(a, eps, n):.12e}")
print(f"  brute  = {brute:.12e}")
