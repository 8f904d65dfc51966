"""Testing-process model: modules, defect states, operational profiles, utilities.

A piece of software consists of ``m`` modules. Module ``i`` starts with ``N[i]``
residual defects, each of which is detected (and removed) with probability
``theta[i]`` during a period in which the module is tested.  After ``T``
periods the software ships, and the probability that a user session runs
without failure is the delivered reliability ``sum_i p_i (1 - theta_i)**x_i``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_STATE_CAP = 10**7
PROFILE_TOL = 1e-12
DOMAIN_TOL = 1e-9


class ModselError(Exception):
    """Base class for all errors raised by this package."""


@dataclass(frozen=True)
class Violation:
    field: str
    constraint: str

    def __str__(self) -> str:
        return f"{self.field}: {self.constraint}"


class ValidationError(ModselError, ValueError):
    """One or more input constraints were violated.

    ``violations`` lists every failed constraint, not only the first one.
    """

    def __init__(self, violations: Iterable[Violation] | str):
        if isinstance(violations, str):
            violations = [Violation("input", violations)]
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DomainError(ValidationError):
    """An argument lies outside the domain on which a function is defined."""


class CapacityError(ModselError):
    """The requested computation exceeds a configured size limit."""

    def __init__(self, message: str, size: int):
        self.size = size
        super().__init__(message)


class UnsupportedError(ModselError):
    """The operation is not defined for this combination of inputs."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Static description of a testing problem.

    ``m`` may be left as ``None``; it is then inferred from ``len(N)``.
    Construction does not validate; call :func:`validate_model` (every solver
    entry point does).
    """

    m: int | None
    N: tuple[int, ...]
    theta: tuple[float, ...]
    T: int
    state_cap: int = DEFAULT_STATE_CAP

    def __post_init__(self):
        object.__setattr__(self, "N", tuple(int(n) for n in np.atleast_1d(self.N)))
        object.__setattr__(self, "theta", tuple(float(t) for t in np.atleast_1d(self.theta)))
        if self.m is None:
            object.__setattr__(self, "m", len(self.N))

    @classmethod
    def of(cls, N: Sequence[int], theta: Sequence[float], T: int, **kw) -> "ModelSpec":
        return validate_model(cls(None, tuple(N), tuple(theta), T, **kw))

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the state grid ``{0..N_1} x ... x {0..N_m}``."""
        return tuple(n + 1 for n in self.N)

    @property
    def n_states(self) -> int:
        return math.prod(self.shape)

    def grid(self) -> list[np.ndarray]:
        """Open-mesh coordinate arrays, one per module, broadcastable to ``shape``."""
        return list(np.ix_(*[np.arange(n + 1) for n in self.N]))


@dataclass(frozen=True)
class DefectState:
    x: tuple[int, ...]
    t: int

    def check(self, model: ModelSpec) -> "DefectState":
        bad = []
        if len(self.x) != model.m:
            bad.append(Violation("x", f"length {len(self.x)} != m={model.m}"))
        else:
            for i, (xi, ni) in enumerate(zip(self.x, model.N)):
                if not 0 <= xi <= ni:
                    bad.append(Violation(f"x[{i}]", f"{xi} outside [0, {ni}]"))
        if not 0 <= self.t <= model.T:
            bad.append(Violation("t", f"{self.t} outside [0, {model.T}]"))
        if bad:
            raise ValidationError(bad)
        return self


@dataclass(frozen=True)
class OperationalProfile:
    """Probability vector over modules describing field usage."""

    p: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in np.atleast_1d(self.p)))
        bad = _profile_violations(np.asarray(self.p), "p")
        if bad:
            raise ValidationError(bad)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.p, dtype=dtype)

    def __len__(self) -> int:
        return len(self.p)

    def __iter__(self):
        return iter(self.p)


def _profile_violations(p: np.ndarray, name: str) -> list[Violation]:
    bad = []
    if p.ndim != 1 or p.size == 0:
        return [Violation(name, "must be a non-empty vector")]
    if not np.all(np.isfinite(p)):
        return [Violation(name, "entries must be finite")]
    for i in np.flatnonzero(p < 0):
        bad.append(Violation(f"{name}[{i}]", f"{p[i]} < 0"))
    if abs(p.sum() - 1.0) > PROFILE_TOL:
        bad.append(Violation(name, f"sums to {p.sum():.15g}, not 1"))
    return bad


def as_profile(p) -> np.ndarray:
    """Validated read-only float array for a profile-like argument."""
    arr = np.array(p, dtype=float)
    bad = _profile_violations(arr, "p")
    if bad:
        raise ValidationError(bad)
    arr.setflags(write=False)
    return arr


UTILITY_KINDS = ("identity", "quadratic", "exponential")


@dataclass(frozen=True)
class UtilitySpec:
    """Tester's utility of delivered reliability.

    * ``identity``: ``U(r) = r`` (risk neutral)
    * ``quadratic``: ``U(r) = r - r**2``; only increasing on ``[0, 1/2]``
    * ``exponential``: ``U(r) = 1 - exp(-r / gamma)``, ``gamma`` the risk tolerance
    """

    kind: str = "identity"
    gamma: float | None = None

    def __post_init__(self):
        bad = []
        if self.kind not in UTILITY_KINDS:
            bad.append(Violation("kind", f"{self.kind!r} not one of {UTILITY_KINDS}"))
        if self.kind == "exponential":
            if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
                bad.append(Violation("gamma", f"must be a positive real, got {self.gamma}"))
            else:
                object.__setattr__(self, "gamma", float(self.gamma))
        if bad:
            raise ValidationError(bad)

    @classmethod
    def identity(cls) -> "UtilitySpec":
        return cls("identity")

    @classmethod
    def quadratic(cls) -> "UtilitySpec":
        return cls("quadratic")

    @classmethod
    def exponential(cls, gamma: float) -> "UtilitySpec":
        return cls("exponential", gamma)

    @property
    def monotone(self) -> bool:
        """Whether U is non-decreasing on all of [0, 1]."""
        return self.kind != "quadratic"

    def __call__(self, r):
        return utility_eval(self, r)


@dataclass(frozen=True)
class BinomialKernel:
    n: int
    q: float
    pmf: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _theta_array(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    bad = [Violation(f"theta[{i}]", f"{v} not in (0, 1)") for i, v in enumerate(np.atleast_1d(th)) if not 0 < v < 1]
    if bad:
        raise ValidationError(bad)
    return th


def reliability(x, p, theta):
    """Delivered reliability ``sum_i p_i (1 - theta_i)**x_i``.

    ``x`` may carry extra leading dimensions (a batch of states with the module
    axis last); the result then has the batch shape.
    """
    th = _theta_array(theta)
    pv = as_profile(p)
    xa = np.asarray(x)
    if xa.shape[-1:] != pv.shape or th.shape != pv.shape:
        raise ValidationError(
            [Violation("x/p/theta", f"dimension mismatch: {xa.shape[-1:]}, {pv.shape}, {th.shape}")]
        )
    if np.any(xa < 0):
        raise ValidationError([Violation("x", "defect counts must be >= 0")])
    out = (np.power(1.0 - th, xa) * pv).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def survival_factors(x, theta) -> np.ndarray:
    """Per-module factors ``(1 - theta_i)**x_i``: the linear cost vector in ``p``."""
    return np.power(1.0 - _theta_array(theta), np.asarray(x))


def utility_eval(u: UtilitySpec, r):
    """Evaluate ``U(r)`` for scalar or array ``r`` in ``[0, 1]``."""
    ra = np.asarray(r, dtype=float)
    if np.any(ra < -DOMAIN_TOL) or np.any(ra > 1 + DOMAIN_TOL) or np.any(np.isnan(ra)):
        raise DomainError([Violation("r", "reliability must lie in [0, 1]")])
    if u.kind == "identity":
        out = ra
    elif u.kind == "quadratic":
        out = ra - ra * ra
    else:
        out = -np.expm1(-ra / u.gamma)
    return float(out) if out.ndim == 0 else out


def binomial_kernel(n: int, q: float) -> BinomialKernel:
    """Distribution of the number of survivors among ``n`` defects that each survive w.p. ``q``.

    Uses the multiplicative recurrence ``pmf[k+1] = pmf[k] * (n-k)/(k+1) * q/(1-q)``,
    started at the mode rather than at ``k = 0`` so that ``(1-q)**n`` cannot
    underflow for small detection probabilities and large ``n``.
    """
    n = int(n)
    if n < 0:
        raise ValidationError([Violation("n", f"{n} < 0")])
    if not 0 < q < 1:
        raise ValidationError([Violation("q", f"{q} not in (0, 1)")])
    pmf = np.zeros(n + 1)
    mode = min(n, int(math.floor((n + 1) * q)))
    log_mode = (
        math.lgamma(n + 1) - math.lgamma(mode + 1) - math.lgamma(n - mode + 1)
        + mode * math.log(q) + (n - mode) * math.log1p(-q)
    )
    pmf[mode] = math.exp(log_mode)
    ratio = q / (1 - q)
    for k in range(mode, n):
        pmf[k + 1] = pmf[k] * (n - k) / (k + 1) * ratio
    for k in range(mode, 0, -1):
        pmf[k - 1] = pmf[k] * k / (n - k + 1) / ratio
    pmf /= pmf.sum()
    pmf.setflags(write=False)
    return BinomialKernel(n, float(q), pmf)


def transition_matrix(n_max: int, theta: float) -> np.ndarray:
    """Lower-triangular matrix ``K[x, k] = P(k survivors | x defects, one test)``."""
    K = np.zeros((n_max + 1, n_max + 1))
    for x in range(n_max + 1):
        K[x, : x + 1] = binomial_kernel(x, 1.0 - theta).pmf
    K.setflags(write=False)
    return K


def validate_model(spec: ModelSpec) -> ModelSpec:
    """Check every ModelSpec invariant and return a normalized copy.

    All violations are collected before raising.
    """
    bad: list[Violation] = []
    m, N, theta, T = spec.m, spec.N, spec.theta, spec.T
    if not isinstance(m, (int, np.integer)) or m < 1:
        bad.append(Violation("m", f"must be a positive integer, got {m!r}"))
    if len(N) != m:
        bad.append(Violation("N", f"length {len(N)} != m={m}"))
    if len(theta) != m:
        bad.append(Violation("theta", f"length {len(theta)} != m={m}"))
    for i, n in enumerate(N):
        if n < 0:
            bad.append(Violation(f"N[{i}]", f"{n} < 0"))
    for i, th in enumerate(theta):
        if not 0 < th < 1:
            bad.append(Violation(f"theta[{i}]", f"{th} not in (0, 1)"))
    if not isinstance(T, (int, np.integer)) or T < 1:
        bad.append(Violation("T", f"must be an integer >= 1, got {T!r}"))
    if bad:
        raise ValidationError(bad)
    size = spec.n_states
    if size > spec.state_cap:
        raise CapacityError(f"state space has {size} states, cap is {spec.state_cap}", size)
    return ModelSpec(int(m), tuple(N), tuple(theta), int(T), int(spec.state_cap))


def warn_if_nonmonotone(u: UtilitySpec) -> None:
    if not u.monotone:
        warnings.warn(
            "quadratic utility r - r**2 decreases on (0.5, 1]; higher reliability "
            "is not always preferred under this objective",
            stacklevel=3,
        )
