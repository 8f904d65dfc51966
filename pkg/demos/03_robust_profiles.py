"""
When the operational profile is uncertain
=========================================

Solve under a guess, then score against the truth.  A robust policy plans
against the worst profile in an interval instead.
"""

from modsel import UncertaintySet, UtilitySpec, evaluate_policy, gap, solve, worst_case
from modsel.experiments import ROBUST_MODEL as model, ROBUST_SET, ROBUST_TRUTH, sweep_profile

u = UtilitySpec.identity()
opt = solve(model, u, UncertaintySet.singleton(ROBUST_TRUTH)).value_at_start
print(f"optimal value if the truth were known: {opt:.4f}")

print("\nassumed p1   achieved   gap")
for row in sweep_profile(model, [0.48, 0.52, 0.56, 0.60], ROBUST_TRUTH[0], "assumed"):
    print(f"   {row['assumed_p1']:.2f}      {row['achieved']:.4f}   {row['gap_pct']:.3f}%")

# The interval set bounds p1 to [0.48, 0.62]; its worst case tilts toward
# whichever module currently holds the less reliable code.
rob = solve(model, u, ROBUST_SET)
achieved = evaluate_policy(rob.policy, model, u, ROBUST_TRUTH)
print(f"\nrobust policy: worst case {rob.value_at_start:.4f}, at truth {achieved:.4f}, gap {100 * gap(opt, achieved):.3f}%")
print("worst profile at the start:", worst_case(model.N, model.theta, ROBUST_SET).profile)
