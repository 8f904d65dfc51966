"""
Where the structure breaks
==========================

With linear utility and a known profile the value function is decreasing
and convex in the defect counts.  A concave utility or a set of candidate
profiles can break convexity, and the optimal choice need not be monotone.
"""

from modsel import ModelSpec, UncertaintySet, UtilitySpec, solve
from modsel.diagnostics import brute_force_value, find_nonmonotone_policy, scan_convexity, scan_monotone_x
from modsel.dp import ValueTable, terminal_values
from modsel.experiments import (
    OBJECTIVE_MODEL, OBJECTIVE_PROFILE, POLICY_MODEL, POLICY_PROFILE, QUADRATIC_MODEL, TWO_PROFILE_MODEL,
    TWO_PROFILE_SET,
)

u = UtilitySpec.identity()
V = solve(OBJECTIVE_MODEL, u, UncertaintySet.singleton(OBJECTIVE_PROFILE)).values
print("decreasing in x:", scan_monotone_x(V).holds, "  convex:", scan_convexity(V).holds)

jt = terminal_values(QUADRATIC_MODEL, UtilitySpec.quadratic(), UncertaintySet.singleton((1.0,)))
print(f"quadratic utility, second difference at x=2: {jt[1] + jt[3] - 2 * jt[2]:.5f}")

jt = terminal_values(TWO_PROFILE_MODEL, u, TWO_PROFILE_SET)
print(f"two profiles: J(11,19)={jt[11, 19]:.5f}  J(12,19)={jt[12, 19]:.5f}  J(13,19)={jt[13, 19]:.5f}")
rep = scan_convexity(ValueTable(jt[None], (1,)))
print(f"  {len(rep.witnesses)} convexity violations, e.g. {rep.witnesses[:3]}")

w = find_nonmonotone_policy(POLICY_MODEL, u, UncertaintySet.singleton(POLICY_PROFILE))
print(f"non-monotone choice: t={w.t}, x={w.x} tests module {w.module + 1}, "
      f"one more defect there and it switches to module {w.choice_after + 1}")

# The brute-force oracle agrees with the grid solver on small cases
small = ModelSpec.of((3, 2), (0.4, 0.25), 3)
print("oracle:", brute_force_value(small, u, TWO_PROFILE_SET), " solver:", solve(small, u, TWO_PROFILE_SET).value_at_start)
