"""Backward induction for the max-min module-selection problem.

The terminal value is the worst-case utility of delivered reliability,
``J_T(x) = min_{p in P} U(R(x, p))``, and for ``t < T``::

    J_t(x) = max_i  sum_k  Binom(k; x_i, 1 - theta_i) * J_{t+1}(x with x_i <- k)

The worst case enters only through ``J_T``; interior stages take plain
expectations.  Exponential utilities are propagated as the log of the expected
disutility, ``log E[exp(-R / gamma)]``, because ``1 - exp(-R / gamma)`` rounds
to 1.0 in double precision for small ``gamma``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DOMAIN_TOL,
    ModelSpec,
    UnsupportedError,
    UtilitySpec,
    ValidationError,
    DomainError,
    Violation,
    as_profile,
    transition_matrix,
    utility_eval,
    validate_model,
    warn_if_nonmonotone,
)
from .uncertainty import UncertaintySet, grid_reliability_range

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


@dataclass(frozen=True)
class ValueTable:
    """``values[k]`` is ``J_t`` on the full state grid for ``t = times[k]``.

    With ``store_values=False`` only the slices ``t = 0`` and ``t = T`` are kept.
    For exponential utilities ``log_disutility`` holds ``log E[exp(-R/gamma)]``,
    which stays informative where ``values`` has saturated at 1.
    """

    values: np.ndarray
    times: tuple[int, ...]
    log_disutility: np.ndarray | None = field(default=None, repr=False)

    def at(self, t: int) -> np.ndarray:
        try:
            return self.values[self.times.index(t)]
        except ValueError:
            raise KeyError(f"time slice {t} was not retained") from None

    @property
    def T(self) -> int:
        return self.times[-1]


@dataclass(frozen=True)
class PolicyTable:
    """Module choice (0-based) for every period ``t < T`` and grid state."""

    choice: np.ndarray  # (T, *grid_shape)

    @property
    def T(self) -> int:
        return self.choice.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.choice.shape[1:]

    def __call__(self, x, t: int) -> int:
        return int(self.choice[(t, *x)])


@dataclass(frozen=True)
class SolveReport:
    value_at_start: float
    values: ValueTable
    policy: PolicyTable
    states_evaluated: int
    wall_time: float
    objective: str = "utility"


# ---------------------------------------------------------------------------
# One-step expectations
# ---------------------------------------------------------------------------


def _expect_axis(V: np.ndarray, K: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(K, V, axes=([1], [axis])), 0, axis)


def _log_expect_axis(L: np.ndarray, logK: np.ndarray, axis: int) -> np.ndarray:
    """``log E[exp(L)]`` after testing along ``axis``; a row-wise logsumexp."""
    Lm = np.moveaxis(L, axis, 0)
    flat = Lm.reshape(Lm.shape[0], -1)
    out = np.empty_like(flat)
    for x in range(flat.shape[0]):
        a = logK[x, : x + 1, None] + flat[: x + 1]
        shift = a.max(axis=0)
        out[x] = shift + np.log(np.exp(a - shift).sum(axis=0))
    return np.moveaxis(out.reshape(Lm.shape), 0, axis)


def _check_grid(V: np.ndarray, model: ModelSpec, what: str = "next_values"):
    if V.shape != model.shape:
        raise ValidationError([Violation(what, f"shape {V.shape} != grid shape {model.shape}")])


def bellman_step(next_values, model: ModelSpec, i: int) -> np.ndarray:
    """Expected ``next_values`` after testing module ``i`` (0-based) once, from every state."""
    model = validate_model(model)
    V = np.asarray(next_values, dtype=float)
    _check_grid(V, model)
    if not 0 <= i < model.m:
        raise ValidationError([Violation("i", f"module index {i} outside [0, {model.m})")])
    return _expect_axis(V, transition_matrix(model.N[i], model.theta[i]), i)


class _Engine:
    """Shared backward recursion; subclasses fix the value representation."""

    maximize = True

    def __init__(self, model: ModelSpec):
        self.model = model
        self.kernels = [transition_matrix(n, th) for n, th in zip(model.N, model.theta)]

    def expect(self, V, i):
        return _expect_axis(V, self.kernels[i], i)

    def to_utility(self, V):
        return V

    def candidates(self, V):
        return np.stack([self.expect(V, i) for i in range(self.model.m)])

    def choose(self, C):
        # candidates within TIE_TOL of the best count as ties; lowest index wins
        S = C if self.maximize else -C
        best = S.max(axis=0)
        idx = np.argmax(S >= best - TIE_TOL * (1.0 + np.abs(best)), axis=0)
        return idx.astype(np.int16), np.take_along_axis(C, idx[None], 0)[0]

    def optimize(self, terminal, keep_all=True):
        T = self.model.T
        policy = np.empty((T, *self.model.shape), dtype=np.int16)
        slices = {T: terminal}
        V = terminal
        for t in range(T - 1, -1, -1):
            policy[t], V = self.choose(self.candidates(V))
            if keep_all or t == 0:
                slices[t] = V
        return policy, slices

    def follow(self, policy, terminal):
        V = terminal
        for t in range(self.model.T - 1, -1, -1):
            C = self.candidates(V)
            V = np.take_along_axis(C, policy[t][None].astype(np.intp), 0)[0]
        return V


class _LogEngine(_Engine):
    """Carries ``L = log E[exp(-R/gamma)]``; smaller is better."""

    maximize = False

    def __init__(self, model):
        super().__init__(model)
        with np.errstate(divide="ignore"):
            self.log_kernels = [np.log(K) for K in self.kernels]

    def expect(self, V, i):
        return _log_expect_axis(V, self.log_kernels[i], i)

    def to_utility(self, V):
        return -np.expm1(V)


def _engine(model: ModelSpec, u: UtilitySpec) -> _Engine:
    return _LogEngine(model) if u.kind == "exponential" else _Engine(model)


def terminal_values(model: ModelSpec, u: UtilitySpec, P: UncertaintySet) -> np.ndarray:
    """``J_T(x) = min_{p in P} U(R(x, p))`` on the full grid.

    Reliability is linear in ``p`` over a convex or finite set, and U is
    increasing or concave, so the minimum sits at the smallest or largest
    attainable reliability.
    """
    rmin, rmax = (np.clip(r, 0.0, 1.0) for r in grid_reliability_range(model, P))
    if u.kind == "quadratic":
        return np.minimum(utility_eval(u, rmin), utility_eval(u, rmax))
    return utility_eval(u, rmin)


def _terminal_repr(model, u, P):
    if u.kind == "exponential":
        rmin, _ = grid_reliability_range(model, P)
        return -np.clip(rmin, 0.0, 1.0) / u.gamma
    return terminal_values(model, u, P)


def _check_set(model: ModelSpec, P: UncertaintySet):
    if P.m != model.m:
        raise ValidationError([Violation("uncertainty", f"dimension {P.m} != m={model.m}")])


def solve(
    model: ModelSpec,
    u: UtilitySpec | None = None,
    P: UncertaintySet | None = None,
    *,
    store_values: bool = True,
) -> SolveReport:
    """Optimal selection policy and value table for the max-min problem.

    Ties between modules go to the lowest index.
    """
    model = validate_model(model)
    u = u or UtilitySpec.identity()
    if P is None:
        raise ValidationError([Violation("uncertainty", "an uncertainty set is required")])
    _check_set(model, P)
    warn_if_nonmonotone(u)
    t0 = time.perf_counter()
    eng = _engine(model, u)
    terminal = _terminal_repr(model, u, P)
    policy, slices = eng.optimize(terminal, keep_all=store_values)
    times = tuple(sorted(slices))
    raw = np.stack([slices[t] for t in times])
    values = eng.to_utility(raw)
    table = ValueTable(values, times, raw if u.kind == "exponential" else None)
    elapsed = time.perf_counter() - t0
    log.info("solved %d states x %d periods in %.3fs", model.n_states, model.T, elapsed)
    return SolveReport(
        value_at_start=float(values[0][model.N]),
        values=table,
        policy=PolicyTable(policy),
        states_evaluated=model.n_states * (model.T + 1),
        wall_time=elapsed,
    )


def solve_min_defects(model: ModelSpec, *, store_values: bool = True) -> SolveReport:
    """Policy minimizing the expected number of residual defects at release.

    Runs the same engine with terminal value ``-sum(x)``; the reported values
    are expected residual defect counts (positive).
    """
    model = validate_model(model)
    t0 = time.perf_counter()
    eng = _Engine(model)
    terminal = -sum(g.astype(float) for g in model.grid()) * np.ones(model.shape)
    policy, slices = eng.optimize(terminal, keep_all=store_values)
    times = tuple(sorted(slices))
    values = -np.stack([slices[t] for t in times])
    return SolveReport(
        value_at_start=float(values[0][model.N]),
        values=ValueTable(values, times),
        policy=PolicyTable(policy),
        states_evaluated=model.n_states * (model.T + 1),
        wall_time=time.perf_counter() - t0,
        objective="min_defects",
    )


def _check_policy(policy: PolicyTable, model: ModelSpec):
    bad = []
    if policy.T != model.T:
        bad.append(Violation("policy", f"horizon {policy.T} != T={model.T}"))
    if policy.shape != model.shape:
        bad.append(Violation("policy", f"grid shape {policy.shape} != {model.shape}"))
    elif policy.choice.size and (policy.choice.min() < 0 or policy.choice.max() >= model.m):
        bad.append(Violation("policy", "module index out of range"))
    if bad:
        raise ValidationError(bad)


def policy_values(policy: PolicyTable, model: ModelSpec, u: UtilitySpec, true_profile) -> np.ndarray:
    """Expected utility from every grid state at ``t = 0`` when following ``policy``."""
    model = validate_model(model)
    _check_policy(policy, model)
    p = as_profile(true_profile)
    if p.size != model.m:
        raise ValidationError([Violation("true_profile", f"length {p.size} != m={model.m}")])
    eng = _engine(model, u)
    terminal = _terminal_repr(model, u, UncertaintySet.singleton(p))
    return eng.to_utility(eng.follow(policy.choice, terminal))


def evaluate_policy(policy: PolicyTable, model: ModelSpec, u: UtilitySpec, true_profile) -> float:
    """Exact expected utility of delivered reliability under ``policy``, scored with ``true_profile``."""
    return float(policy_values(policy, model, u, true_profile)[tuple(validate_model(model).N)])


def reliability_moments(policy: PolicyTable, model: ModelSpec, profile) -> tuple[float, float]:
    """Exact mean and variance of delivered reliability at release under ``policy``."""
    model = validate_model(model)
    _check_policy(policy, model)
    P = UncertaintySet.singleton(as_profile(profile))
    r, _ = grid_reliability_range(model, P)
    eng = _Engine(model)
    mean = eng.follow(policy.choice, r)[model.N]
    second = eng.follow(policy.choice, r * r)[model.N]
    return float(mean), float(max(second - mean * mean, 0.0))


def expected_residual_defects(policy: PolicyTable, model: ModelSpec) -> float:
    model = validate_model(model)
    _check_policy(policy, model)
    terminal = sum(g.astype(float) for g in model.grid()) * np.ones(model.shape)
    return float(_Engine(model).follow(policy.choice, terminal)[model.N])


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def tminus1_scores(x, model: ModelSpec, p) -> np.ndarray:
    """One-period gains ``p_i((1 - th_i + th_i^2)^x_i - (1 - th_i)^x_i)`` for each module."""
    th = np.asarray(model.theta)
    x = np.asarray(x)
    return as_profile(p) * (np.power(1 - th + th * th, x) - np.power(1 - th, x))


def closed_form_Tminus1_choice(x, model: ModelSpec, p, u: UtilitySpec | None = None) -> int:
    """Optimal module (0-based) one period before release, for identity U and a known profile.

    ``p`` may be a profile or a singleton UncertaintySet.
    """
    if u is not None and u.kind != "identity":
        raise UnsupportedError("closed form holds only for the identity utility")
    if isinstance(p, UncertaintySet):
        if p.kind != "singleton":
            raise UnsupportedError("closed form holds only for a singleton uncertainty set")
        p = p.profiles[0]
    model = validate_model(model)
    return int(np.argmax(tminus1_scores(x, model, p)))


def gap(optimal_value: float, achieved_value: float) -> float:
    """Relative shortfall ``(optimal - achieved) / optimal`` as a fraction."""
    if not optimal_value > 0:
        raise DomainError([Violation("optimal_value", f"{optimal_value} must be > 0")])
    if achieved_value > optimal_value + DOMAIN_TOL:
        raise ValidationError(
            [Violation("achieved_value", f"{achieved_value} exceeds optimal {optimal_value}")]
        )
    return (optimal_value - achieved_value) / optimal_value
