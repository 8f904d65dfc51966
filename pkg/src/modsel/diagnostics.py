"""Independent oracles and structural property scans.

The brute-force evaluators walk the trajectory tree state by state with
``math.comb`` probabilities; they share no code with the grid solver beyond
the model types, so agreement between the two is meaningful.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import CapacityError, ModelSpec, UnsupportedError, UtilitySpec, utility_eval, validate_model
from .dp import PolicyTable, ValueTable, solve
from .uncertainty import UncertaintySet

SCAN_TOL = 1e-12
MAX_BRANCHES = 10**6


@dataclass(frozen=True)
class PropertyReport:
    property_name: str
    holds: bool
    witnesses: list = field(default_factory=list)
    states_checked: int = 0

    def to_dict(self) -> dict:
        return {
            "property_name": self.property_name,
            "holds": self.holds,
            "states_checked": self.states_checked,
            "witnesses": [{"t": t, "x": list(x), "axis": a} for t, x, a in self.witnesses],
        }


@dataclass(frozen=True)
class NonmonotoneWitness:
    """At period ``t`` module ``module`` is chosen at ``x`` but ``choice_after`` at ``x + e_module``."""

    t: int
    x: tuple[int, ...]
    module: int
    choice_after: int


# ---------------------------------------------------------------------------
# Brute force
# ---------------------------------------------------------------------------


def _pmf(n: int, q: float) -> list[float]:
    return [math.comb(n, k) * q**k * (1 - q) ** (n - k) for k in range(n + 1)]


def _profile_candidates(P: UncertaintySet) -> np.ndarray:
    """Finite list of profiles that contains a minimizer of any linear function over P."""
    if P.kind in ("singleton", "finite"):
        return P.profiles
    if P.kind == "interval":
        lo, hi, m = P.p_lo, P.p_hi, P.p_lo.size
        verts = []
        for free in range(m):
            others = [j for j in range(m) if j != free]
            for pick in itertools.product((0, 1), repeat=m - 1):
                p = np.empty(m)
                for j, b in zip(others, pick):
                    p[j] = hi[j] if b else lo[j]
                p[free] = 1.0 - p[others].sum()
                if lo[free] - 1e-12 <= p[free] <= hi[free] + 1e-12:
                    verts.append(p)
        return np.array(verts)
    raise UnsupportedError("brute force supports singleton, finite and interval sets")


def _tree_size(model: ModelSpec) -> int:
    # each period branches into at most max(N_i)+1 outcomes
    return (max(model.N) + 1) ** model.T


def brute_force_value(model: ModelSpec, u: UtilitySpec, P: UncertaintySet, policy: PolicyTable | None = None) -> float:
    """Expected utility by exhaustive enumeration of every binomial outcome.

    With ``policy=None`` the best module is taken at every node of the
    reachable tree (optimal mode); otherwise ``policy`` is followed.  The worst
    case over ``P`` is taken at release, state by state.
    """
    model = validate_model(model)
    size = _tree_size(model)
    if size > MAX_BRANCHES:
        raise CapacityError(f"trajectory tree has up to {size} branches (> {MAX_BRANCHES})", size)
    cands = _profile_candidates(P)
    theta = model.theta

    def terminal(x):
        r = [sum(p[i] * (1 - theta[i]) ** x[i] for i in range(model.m)) for p in cands]
        return min(utility_eval(u, min(max(v, 0.0), 1.0)) for v in r)

    @lru_cache(maxsize=None)
    def value(x, t):
        if t == model.T:
            return terminal(x)
        modules = range(model.m) if policy is None else [policy(x, t)]
        best = -math.inf
        for i in modules:
            acc = 0.0
            for k, w in enumerate(_pmf(x[i], 1 - theta[i])):
                y = x[:i] + (k,) + x[i + 1 :]
                acc += w * value(y, t + 1)
            best = max(best, acc)
        return best

    return value(tuple(model.N), 0)


def reachable_decision_states(model: ModelSpec) -> list[tuple[int, tuple[int, ...]]]:
    """All ``(t, x)`` with ``t < T`` reachable from ``N`` under some policy."""
    layer = {tuple(model.N)}
    out = []
    for t in range(model.T):
        out += [(t, x) for x in sorted(layer)]
        nxt = set()
        for x in layer:
            for i in range(model.m):
                for k in range(x[i] + 1):
                    nxt.add(x[:i] + (k,) + x[i + 1 :])
        layer = nxt
    return out


def enumerate_policies(model: ModelSpec, max_policies: int = 64):
    """Yield every deterministic Markov policy on the reachable tree as a PolicyTable."""
    model = validate_model(model)
    nodes = reachable_decision_states(model)
    count = model.m ** len(nodes)
    if count > max_policies:
        raise CapacityError(f"{count} policies exceed the limit {max_policies}", count)
    for assignment in itertools.product(range(model.m), repeat=len(nodes)):
        choice = np.zeros((model.T, *model.shape), dtype=np.int16)
        for (t, x), i in zip(nodes, assignment):
            choice[(t, *x)] = i
        yield PolicyTable(choice)


def best_enumerated_value(model: ModelSpec, u: UtilitySpec, P: UncertaintySet, max_policies: int = 64) -> float:
    return max(brute_force_value(model, u, P, pol) for pol in enumerate_policies(model, max_policies))


def exact_terminal_distribution(model: ModelSpec, policy: PolicyTable) -> dict:
    """Probability of each terminal defect vector when following ``policy``."""
    model = validate_model(model)
    dist = {tuple(model.N): 1.0}
    for t in range(model.T):
        nxt: dict = {}
        for x, w in dist.items():
            i = policy(x, t)
            for k, pk in enumerate(_pmf(x[i], 1 - model.theta[i])):
                y = x[:i] + (k,) + x[i + 1 :]
                nxt[y] = nxt.get(y, 0.0) + w * pk
        dist = nxt
    return dict(sorted(dist.items()))


# ---------------------------------------------------------------------------
# Scans over value tables
# ---------------------------------------------------------------------------


def _witness_list(items):
    return sorted(items, key=lambda w: (w[0], w[1], w[2]))


def scan_monotone_x(table: ValueTable, tol: float = SCAN_TOL) -> PropertyReport:
    """``J_t(x + e_i) <= J_t(x)`` for every retained ``t``, state and axis."""
    wit = []
    V = table.values
    for axis in range(1, V.ndim):
        lo = np.take(V, np.arange(V.shape[axis] - 1), axis=axis)
        hi = np.take(V, np.arange(1, V.shape[axis]), axis=axis)
        for idx in np.argwhere(hi > lo + tol):
            wit.append((table.times[idx[0]], tuple(int(v) for v in idx[1:]), axis - 1))
    return PropertyReport("decreasing in x", not wit, _witness_list(wit), int(V.size))


def scan_monotone_t(table: ValueTable, tol: float = SCAN_TOL) -> PropertyReport:
    """``J_t(x) >= J_{t+1}(x)`` over consecutive retained time slices."""
    wit = []
    V, times = table.values, table.times
    for k in range(len(times) - 1):
        if times[k + 1] != times[k] + 1:
            continue
        for idx in np.argwhere(V[k] < V[k + 1] - tol):
            wit.append((times[k], tuple(int(v) for v in idx), -1))
    return PropertyReport("decreasing in t", not wit, _witness_list(wit), int(V.size))


def scan_convexity(table: ValueTable, tol: float = SCAN_TOL) -> PropertyReport:
    """Axiswise discrete convexity ``J(x + e_i) + J(x - e_i) >= 2 J(x)``; witnesses are the centre states."""
    wit = []
    V = table.values
    for axis in range(1, V.ndim):
        n = V.shape[axis]
        if n < 3:
            continue
        a = np.take(V, np.arange(0, n - 2), axis=axis)
        b = np.take(V, np.arange(1, n - 1), axis=axis)
        c = np.take(V, np.arange(2, n), axis=axis)
        for idx in np.argwhere(a + c < 2 * b - tol):
            x = [int(v) for v in idx[1:]]
            x[axis - 1] += 1
            wit.append((table.times[idx[0]], tuple(x), axis - 1))
    return PropertyReport("convex in x", not wit, _witness_list(wit), int(V.size))


def find_nonmonotone_policy(model: ModelSpec, u: UtilitySpec, P: UncertaintySet, policy: PolicyTable | None = None):
    """First ``(t, x)`` in lexicographic order where module ``i`` is chosen at ``x`` but not at ``x + e_i``.

    Returns a NonmonotoneWitness or ``None``.
    """
    model = validate_model(model)
    if policy is None:
        policy = solve(model, u, P).policy
    C = policy.choice
    best = None
    for i in range(model.m):
        if model.N[i] == 0:
            continue
        here = np.take(C, np.arange(model.N[i]), axis=i + 1)
        there = np.take(C, np.arange(1, model.N[i] + 1), axis=i + 1)
        hits = np.argwhere((here == i) & (there != i))
        if len(hits):
            t, *x = (int(v) for v in hits[0])
            cand = (t, tuple(x), i)
            if best is None or cand < best:
                best = cand
    if best is None:
        return None
    t, x, i = best
    after = list(x)
    after[i] += 1
    return NonmonotoneWitness(t, x, i, int(C[(t, *after)]))
