"""Acceptance gate: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even when
output is captured) or directly with ``python3 tests/test_acceptance.py``.
"""
import itertools
import time

import numpy as np
import pytest

from modsel import ModelSpec, UncertaintySet, UtilitySpec, solve
from modsel.diagnostics import (
    best_enumerated_value,
    brute_force_value,
    find_nonmonotone_policy,
    reachable_decision_states,
    scan_convexity,
    scan_monotone_t,
    scan_monotone_x,
)
from modsel.dp import ValueTable, closed_form_Tminus1_choice, terminal_values, tminus1_scores
from modsel.experiments import (
    OBJECTIVE_MODEL,
    OBJECTIVE_PROFILE,
    POLICY_MODEL,
    POLICY_PROFILE,
    QUADRATIC_MODEL,
    RISK_MODEL,
    RISK_PROFILE,
    RISK_REFERENCE,
    RISK_SEED,
    ROBUST_MODEL,
    ROBUST_SET,
    ROBUST_TRUTH,
    TWO_PROFILE_MODEL,
    TWO_PROFILE_SET,
    Check,
    Flag,
    run_objective_gap,
    run_risk_sweep,
    run_robust_gap,
)
from modsel.simulate import SimulationConfig, simulate_many

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")

ID = UtilitySpec.identity()
UTILITIES = [ID, UtilitySpec.quadratic(), UtilitySpec.exponential(0.1), UtilitySpec.exponential(2.0)]


def single(p):
    return UncertaintySet.singleton(p)


def report(number, title, checks, capsys=None):
    ok = all(c.passed for c in checks)
    lines = [f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}"] + ["      " + c.line() for c in checks]
    text = "\n".join(lines)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + text)
    else:
        print(text)
    return ok


def objective_checks():
    t0 = time.perf_counter()
    res = run_objective_gap()
    elapsed = time.perf_counter() - t0
    return res.checks[:2] + [Check("runtime (s), target < 10", elapsed, 0.0, 10.0)]


def robust_checks():
    return run_robust_gap().checks


def risk_checks():
    res = run_risk_sweep(runs=10_000, seed=RISK_SEED)
    checks = list(res.checks)
    for g, mean, _var, *_ in res.tables["risk_sweep"][1]:
        checks.append(Check(f"gamma={g:g} mean, persistent deviation", mean, RISK_REFERENCE[g][0], 0.02))
    return checks


def terminal_value_checks():
    jt = terminal_values(TWO_PROFILE_MODEL, ID, TWO_PROFILE_SET)
    a, b, c = jt[11, 19], jt[12, 19], jt[13, 19]
    return [
        Check("J_T(12,19)", b, 0.014, 5e-4),
        Check("J_T(11,19)", a, 0.0155, 5e-4),
        Check("J_T(13,19)", c, 0.0106, 5e-4),
        Flag("J_T(12,19) > (J_T(11,19) + J_T(13,19)) / 2", b > 0.5 * (a + c), f"{b:.6g} vs {0.5 * (a + c):.6g}"),
    ]


def property_checks():
    risk_sets = [(UtilitySpec.exponential(g), single(RISK_PROFILE)) for g in RISK_REFERENCE] + [(ID, single(RISK_PROFILE))]
    runs = [
        ("objective model", OBJECTIVE_MODEL, ID, single(OBJECTIVE_PROFILE)),
        ("robust model, truth", ROBUST_MODEL, ID, single(ROBUST_TRUTH)),
        ("robust model, interval set", ROBUST_MODEL, ID, ROBUST_SET),
        ("two-period model", POLICY_MODEL, ID, single(POLICY_PROFILE)),
        ("two-profile model", TWO_PROFILE_MODEL, ID, TWO_PROFILE_SET),
    ] + [(f"risk model, {u.kind} {u.gamma or ''}".strip(), RISK_MODEL, u, P) for u, P in risk_sets]
    checks = []
    for name, model, u, P in runs:
        V = solve(model, u, P).values
        rx, rt = scan_monotone_x(V), scan_monotone_t(V)
        checks.append(Flag(f"{name}: decreasing in x and t", rx.holds and rt.holds,
                           f"{len(rx.witnesses) + len(rt.witnesses)} witnesses"))
        if u.kind == "identity" and P.kind == "singleton":
            rc = scan_convexity(V)
            checks.append(Flag(f"{name}: convex in x", rc.holds, f"{len(rc.witnesses)} witnesses"))
    jt = terminal_values(QUADRATIC_MODEL, UtilitySpec.quadratic(), single((1.0,)))
    rq = scan_convexity(ValueTable(jt[None], (1,)))
    checks.append(Flag("quadratic utility: non-convexity detected near x=2",
                       any(abs(x[0] - 2) <= 1 for _, x, _ in rq.witnesses),
                       "witnesses at x=" + ",".join(str(x[0]) for _, x, _ in rq.witnesses)))
    return checks


def _random_instance(rng):
    m = int(rng.integers(1, 4))
    N = tuple(int(v) for v in rng.integers(0, 4, size=m))
    theta = tuple(float(v) for v in rng.uniform(0.05, 0.95, size=m))
    return ModelSpec.of(N, theta, int(rng.integers(1, 4)))


def oracle_checks():
    rng = np.random.default_rng(20240601)
    worst, count = 0.0, 0
    for k, u in enumerate(UTILITIES):
        for kind in ("singleton", "finite"):
            for _ in range(13):
                model = _random_instance(rng)
                n = 1 if kind == "singleton" else 2
                P = UncertaintySet.finite([rng.dirichlet(np.ones(model.m)) for _ in range(n)]) if n > 1 \
                    else single(rng.dirichlet(np.ones(model.m)))
                worst = max(worst, abs(brute_force_value(model, u, P) - solve(model, u, P).value_at_start))
                count += 1
    enum_worst, enum_count = 0.0, 0
    while enum_count < 12:
        model = ModelSpec.of(tuple(int(v) for v in rng.integers(0, 3, size=2)),
                             tuple(float(v) for v in rng.uniform(0.05, 0.95, size=2)), int(rng.integers(1, 3)))
        if model.m ** len(reachable_decision_states(model)) > 64:
            continue
        u = UTILITIES[enum_count % 4]
        P = UncertaintySet.finite([rng.dirichlet(np.ones(2)) for _ in range(2)])
        enum_worst = max(enum_worst, best_enumerated_value(model, u, P) - solve(model, u, P).value_at_start)
        enum_count += 1
    return [
        Check(f"max |brute force - solver| over {count} instances", worst, 0.0, 1e-9),
        Check(f"best enumerated policy - solver over {enum_count} instances", max(enum_worst, 0.0), 0.0, 1e-9),
    ]


def closed_form_checks():
    rep = solve(POLICY_MODEL, ID, single(POLICY_PROFILE))
    last = rep.policy.choice[POLICY_MODEL.T - 1]
    mism, ties = 0, 0
    for x in itertools.product(*(range(n + 1) for n in POLICY_MODEL.N)):
        s = tminus1_scores(x, POLICY_MODEL, POLICY_PROFILE)
        if abs(s[0] - s[1]) <= 1e-12 * (1 + abs(s).max()):
            ties += 1
            continue
        mism += closed_form_Tminus1_choice(x, POLICY_MODEL, POLICY_PROFILE) != last[x]
    w = find_nonmonotone_policy(POLICY_MODEL, ID, single(POLICY_PROFILE))
    return [
        Check(f"last-period disagreements on the full grid ({ties} exact ties skipped)", mism, 0, 0),
        Flag("non-monotone optimal policy witness found", w is not None,
             "" if w is None else f"t={w.t}, x={w.x}, module {w.module + 1} then {w.choice_after + 1}"),
    ]


def simulator_checks():
    P = single(RISK_PROFILE)
    rep = solve(RISK_MODEL, ID, P)
    cfg = SimulationConfig(10_000, RISK_SEED, RISK_PROFILE)
    a = simulate_many(RISK_MODEL, rep.policy, cfg)
    b = simulate_many(RISK_MODEL, rep.policy, cfg)
    c = simulate_many(RISK_MODEL, rep.policy, cfg, workers=4)
    same = all(
        x.mean == a.mean and x.variance == a.variance and np.array_equal(x.reliabilities, a.reliabilities)
        and np.array_equal(x.counts, a.counts) and x.terminal_state_counts == a.terminal_state_counts
        for x in (b, c)
    )
    return [
        Check("|empirical mean - DP value| in standard errors", abs(a.mean - rep.value_at_start) / a.std_error, 0.0, 4.0,
              f"mean {a.mean:.5f}, DP {rep.value_at_start:.5f}"),
        Flag("bit-identical across reruns and worker counts", same),
    ]


CRITERIA = [
    (1, "objective gap", objective_checks),
    (2, "robust gap", robust_checks),
    (3, "risk sweep", risk_checks),
    (4, "terminal-value spot checks", terminal_value_checks),
    (5, "property suites", property_checks),
    (6, "oracle equivalence", oracle_checks),
    (7, "last-period closed form", closed_form_checks),
    (8, "simulator consistency", simulator_checks),
]


@pytest.mark.parametrize("number,title,fn", CRITERIA, ids=[f"criterion{n}_{t.replace(' ', '_')}" for n, t, _ in CRITERIA])
def test_criterion(number, title, fn, capsys):
    checks = fn()
    failed = [c.line() for c in checks if not c.passed]
    report(number, title, checks, capsys)
    assert not failed, "\n".join(failed)


if __name__ == "__main__":
    import warnings

    warnings.simplefilter("ignore", UserWarning)
    results = [report(n, t, fn()) for n, t, fn in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
