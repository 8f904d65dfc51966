"""
Maximize reliability, or minimize defects?
==========================================

Testing to remove as many defects as possible is not the same as testing
to make the release reliable for the way users actually run it.
"""

from modsel import UncertaintySet, UtilitySpec, evaluate_policy, solve, solve_min_defects
from modsel.dp import expected_residual_defects
from modsel.experiments import OBJECTIVE_MODEL as model, OBJECTIVE_PROFILE as profile

u = UtilitySpec.identity()

rel = solve(model, u, UncertaintySet.singleton(profile))
mind = solve_min_defects(model)

print(f"{model.n_states} states, {model.T} periods, solved in {rel.wall_time:.3f}s")
print("                      reliability   residual defects")
print(f"max reliability         {rel.value_at_start:.4f}        {expected_residual_defects(rel.policy, model):.2f}")
print(f"min defects             {evaluate_policy(mind.policy, model, u, profile):.4f}        {mind.value_at_start:.2f}")

# Where do the two policies part ways?  Count disagreeing states per period.
differ = (rel.policy.choice != mind.policy.choice).reshape(model.T, -1).sum(axis=1)
for t in (0, 10, 20, 30, 39):
    print(f"t={t:2d}: policies disagree on {differ[t]} of {model.n_states} states")
