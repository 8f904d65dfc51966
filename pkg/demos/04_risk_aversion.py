"""
Risk-averse testing
===================

Exponential utility 1 - exp(-r / gamma) penalizes bad outcomes more as gamma
shrinks.  Simulate each policy and compare the spread of delivered reliability.
"""

import numpy as np

from modsel import SimulationConfig, UncertaintySet, UtilitySpec, simulate_many, solve
from modsel.dp import reliability_moments
from modsel.experiments import RISK_MODEL as model, RISK_PROFILE as profile

cfg = SimulationConfig(runs=10_000, seed=7, scoring_profile=profile)
print("gamma     mean    variance   (exact mean, variance)")
for gamma in (0.001, 0.01, 0.1, 1.0):
    pol = solve(model, UtilitySpec.exponential(gamma), UncertaintySet.singleton(profile)).policy
    st = simulate_many(model, pol, cfg, workers=4)
    m, v = reliability_moments(pol, model, profile)
    print(f"{gamma:<7g}  {st.mean:.4f}   {st.variance:.4f}     ({m:.4f}, {v:.4f})")

    # a crude text histogram for the most risk-averse policy
    if gamma == 0.001:
        bars = st.counts.reshape(10, -1).sum(axis=1)
        for lo, c in zip(np.linspace(0, 0.9, 10), bars):
            print(f"    {lo:.1f}-{lo + 0.1:.1f} {'#' * int(60 * c / bars.max())}")
