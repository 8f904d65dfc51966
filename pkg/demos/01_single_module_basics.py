"""
Reliability, kernels and a one-module policy
============================================

A small tour of the building blocks: delivered reliability of a release,
the binomial survival kernel, and the value of testing one module.
"""

import numpy as np

from modsel import ModelSpec, UncertaintySet, UtilitySpec, binomial_kernel, reliability, solve

# Two modules, with 12 and 19 residual defects.  Users spend 20% of their
# time in the first one.
theta = (0.3, 0.2)
print("reliability:", reliability((12, 19), (0.2, 0.8), theta))

# Each defect in a tested module survives a period with probability 1 - theta.
k = binomial_kernel(4, 0.7)
print("survivors of 4 defects:", np.round(k.pmf, 4))

# With one module the policy is trivial; the value follows a^x with
# a <- theta + (1 - theta) a, starting from a = 1 - theta.
model = ModelSpec.of((5,), (0.2,), 3)
rep = solve(model, UtilitySpec.identity(), UncertaintySet.singleton((1.0,)))
a = 0.8
for _ in range(model.T):
    a = 0.2 + 0.8 * a
print(f"dynamic program {rep.value_at_start:.6f}   closed form {a ** 5:.6f}")
