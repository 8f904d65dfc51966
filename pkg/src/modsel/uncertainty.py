"""Uncertainty sets of operational profiles and the worst-case reliability over them.

Reliability is linear in the profile, ``R(x, p) = c(x) . p`` with
``c_i = (1 - theta_i)**x_i``, so every worst case here is a linear minimization:

* singleton / finite sets are enumerated;
* interval (box-on-simplex) sets are solved exactly by a greedy fill;
* ellipsoids ``{p0 + Y z : |z|_2 <= eps}`` have the closed-form minimizer
  ``p0 - eps * Y Y^T c / |Y^T c|``.

The ``_grid_*`` helpers evaluate the same minimizers for every state of a model
grid at once; the solver uses them for the terminal value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    PROFILE_TOL,
    ModelSpec,
    ModselError,
    OperationalProfile,
    ValidationError,
    Violation,
    _profile_violations,
    as_profile,
    survival_factors,
)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
SET_KINDS = ("singleton", "finite", "interval", "ellipsoid")


class InfeasibleError(ValidationError):
    """The uncertainty set has an empty intersection with the probability simplex."""


class UnsupportedGeometryError(ModselError):
    """The ellipsoid's minimizer leaves the simplex (a component goes negative)."""

    def __init__(self, component: int, value: float, x=None):
        self.component = component
        self.value = value
        self.x = x
        where = "" if x is None else f" at state x={tuple(int(v) for v in x)}"
        super().__init__(
            f"ellipsoid minimizer has p[{component}] = {value:.3g} < 0{where}; "
            "the ellipsoid is not contained in the simplex"
        )


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """A set of operational profiles. Build with the classmethod constructors."""

    kind: str
    profiles: np.ndarray | None = None  # (k, m) for singleton/finite
    p_lo: np.ndarray | None = None
    p_hi: np.ndarray | None = None
    center: np.ndarray | None = None
    Y: np.ndarray | None = None  # (m, L)
    epsilon: float = 0.0

    @classmethod
    def singleton(cls, p) -> "UncertaintySet":
        return cls._checked(cls("singleton", profiles=_ro([np.asarray(p, dtype=float)])))

    @classmethod
    def finite(cls, profiles) -> "UncertaintySet":
        return cls._checked(cls("finite", profiles=_ro(np.atleast_2d(np.asarray(profiles, dtype=float)))))

    @classmethod
    def interval(cls, p_lo, p_hi) -> "UncertaintySet":
        return cls._checked(cls("interval", p_lo=_ro(p_lo), p_hi=_ro(p_hi)))

    @classmethod
    def ellipsoid(cls, center, Y, epsilon: float) -> "UncertaintySet":
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        return cls._checked(cls("ellipsoid", center=_ro(center), Y=_ro(Y), epsilon=float(epsilon)))

    @classmethod
    def _checked(cls, s: "UncertaintySet") -> "UncertaintySet":
        bad = s.violations()
        if bad:
            exc = InfeasibleError if any(v.constraint.startswith("empty") for v in bad) else ValidationError
            raise exc(bad)
        return s

    @property
    def m(self) -> int:
        if self.kind in ("singleton", "finite"):
            return self.profiles.shape[1]
        if self.kind == "interval":
            return self.p_lo.size
        return self.center.size

    def violations(self) -> list[Violation]:
        if self.kind not in SET_KINDS:
            return [Violation("kind", f"{self.kind!r} not one of {SET_KINDS}")]
        bad: list[Violation] = []
        if self.kind in ("singleton", "finite"):
            if self.profiles.shape[0] < 1:
                bad.append(Violation("profiles", "need at least one member"))
            for j, p in enumerate(self.profiles):
                bad += _profile_violations(p, f"profiles[{j}]")
        elif self.kind == "interval":
            lo, hi = self.p_lo, self.p_hi
            if lo.shape != hi.shape or lo.ndim != 1:
                return [Violation("p_lo/p_hi", "must be vectors of equal length")]
            if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
                bad.append(Violation("p_lo/p_hi", "need 0 <= p_lo <= p_hi <= 1 componentwise"))
            if lo.sum() > 1 + PROFILE_TOL or hi.sum() < 1 - PROFILE_TOL:
                bad.append(Violation("p_lo/p_hi", f"empty: sum(p_lo)={lo.sum():.6g}, sum(p_hi)={hi.sum():.6g}"))
        else:
            bad += _profile_violations(self.center, "center")
            if self.Y.ndim != 2 or self.Y.shape[0] != self.center.size:
                bad.append(Violation("Y", f"shape {self.Y.shape} incompatible with m={self.center.size}"))
            elif np.any(np.abs(self.Y.sum(axis=0)) > PROFILE_TOL):
                bad.append(Violation("Y", "every column must sum to 0"))
            if not self.epsilon >= 0:
                bad.append(Violation("epsilon", f"{self.epsilon} < 0"))
        return bad

    def to_dict(self) -> dict:
        if self.kind in ("singleton", "finite"):
            return {"kind": self.kind, "profiles": self.profiles.tolist()}
        if self.kind == "interval":
            return {"kind": "interval", "p_lo": self.p_lo.tolist(), "p_hi": self.p_hi.tolist()}
        return {"kind": "ellipsoid", "center": self.center.tolist(), "Y": self.Y.tolist(), "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: dict) -> "UncertaintySet":
        kind = d.get("kind")
        if kind == "singleton":
            profiles = d.get("profiles")
            return cls.singleton(profiles[0] if profiles is not None else d["profile"])
        if kind == "finite":
            return cls.finite(d["profiles"])
        if kind == "interval":
            return cls.interval(d["p_lo"], d["p_hi"])
        if kind == "ellipsoid":
            return cls.ellipsoid(d["center"], d["Y"], d["epsilon"])
        raise ValidationError([Violation("uncertainty.kind", f"{kind!r} not one of {SET_KINDS}")])

    def __eq__(self, other):
        return isinstance(other, UncertaintySet) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


@dataclass(frozen=True)
class WorstCaseResult:
    profile: OperationalProfile
    value: float
    active: str


def _check_dims(c: np.ndarray, P: UncertaintySet):
    if c.shape[-1] != P.m:
        raise ValidationError([Violation("x/theta", f"dimension {c.shape[-1]} != uncertainty set dimension {P.m}")])


def _box_greedy(c: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Minimize ``c . p`` over ``{lo <= p <= hi, sum p = 1}`` for each row of ``c``.

    Start from ``lo`` and hand the slack to components in increasing order of
    ``c``. Among equal costs the higher index is filled first, which yields the
    lexicographically smallest minimizer.
    """
    m = lo.size
    # stable sort on (c, -index)
    order = np.argsort(c[..., ::-1], axis=-1, kind="stable")
    order = m - 1 - order
    cap = (hi - lo)[order]
    slack = 1.0 - lo.sum()
    before = np.cumsum(cap, axis=-1) - cap
    alloc_sorted = np.clip(slack - before, 0.0, cap)
    alloc = np.empty(c.shape)
    np.put_along_axis(alloc, order, alloc_sorted, axis=-1)
    return lo + alloc


def _ellipsoid_min(c: np.ndarray, P: UncertaintySet) -> np.ndarray:
    g = c @ P.Y  # (..., L) = Y^T c
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    step = np.where(norm > 0, P.epsilon * (g / safe) @ P.Y.T, 0.0)
    return P.center - step


def _minimizers(c: np.ndarray, P: UncertaintySet) -> tuple[np.ndarray, np.ndarray]:
    """Minimizing profiles and minimal values of ``c . p`` over ``P`` for each row of ``c``."""
    if P.kind in ("singleton", "finite"):
        vals = (c[..., None, :] * P.profiles).sum(axis=-1)  # (..., k)
        k = P.profiles.shape[0]
        if k == 1:
            idx = np.zeros(vals.shape[:-1], dtype=int)
        else:
            # lexicographic rank breaks exact ties
            lex = np.lexsort(P.profiles.T[::-1])
            rank = np.empty(k, dtype=int)
            rank[lex] = np.arange(k)
            best = vals.min(axis=-1, keepdims=True)
            tied = vals <= best
            idx = np.argmin(np.where(tied, rank, k), axis=-1)
        return P.profiles[idx], np.take_along_axis(vals, idx[..., None], -1)[..., 0]
    if P.kind == "interval":
        p = _box_greedy(c, P.p_lo, P.p_hi)
    else:
        p = _ellipsoid_min(c, P)
    return p, (p * c).sum(axis=-1)


def worst_case(x, theta, P: UncertaintySet) -> WorstCaseResult:
    """Profile in ``P`` that minimizes the delivered reliability at state ``x``."""
    c = survival_factors(x, theta)
    _check_dims(c, P)
    p, v = _minimizers(c[None, :], P)
    p, v = p[0], float(v[0])
    if P.kind == "ellipsoid" and np.any(p < -FEAS_TOL):
        j = int(np.argmin(p))
        raise UnsupportedGeometryError(j, float(p[j]), x)
    p = np.where(np.abs(p) <= FEAS_TOL, 0.0, p) if P.kind == "ellipsoid" else p
    return WorstCaseResult(OperationalProfile(tuple(p)), v, _describe(P, p, c))


def best_case(x, theta, P: UncertaintySet) -> WorstCaseResult:
    """Profile in ``P`` that maximizes the delivered reliability at ``x``."""
    c = survival_factors(x, theta)
    _check_dims(c, P)
    p, v = _minimizers(-c[None, :], P)
    if P.kind == "ellipsoid" and np.any(p[0] < -FEAS_TOL):
        j = int(np.argmin(p[0]))
        raise UnsupportedGeometryError(j, float(p[0][j]), x)
    return WorstCaseResult(OperationalProfile(tuple(p[0])), float(-v[0]), "maximizer")


def _describe(P: UncertaintySet, p: np.ndarray, c: np.ndarray) -> str:
    if P.kind == "singleton":
        return "singleton"
    if P.kind == "finite":
        j = int(np.flatnonzero(np.all(np.isclose(P.profiles, p, atol=0, rtol=0), axis=1))[0])
        return f"member {j}"
    if P.kind == "interval":
        tags = []
        for i in range(p.size):
            if abs(p[i] - P.p_lo[i]) <= FEAS_TOL:
                tags.append("lo")
            elif abs(p[i] - P.p_hi[i]) <= FEAS_TOL:
                tags.append("hi")
            else:
                tags.append("free")
        return "vertex(" + ",".join(tags) + ")"
    g = c @ P.Y
    return "center" if np.linalg.norm(g) == 0 else "boundary"


def grid_reliability_range(model: ModelSpec, P: UncertaintySet) -> tuple[np.ndarray, np.ndarray]:
    """Minimal and maximal reliability over ``P`` at every grid state.

    Raises UnsupportedGeometryError if an ellipsoid minimizer leaves the simplex.
    """
    c = _grid_costs(model)
    _check_dims(c, P)
    lo_p, lo_v = _minimizers(c, P)
    hi_p, hi_v = _minimizers(-c, P)
    if P.kind == "ellipsoid":
        for arr in (lo_p, hi_p):
            neg = arr < -FEAS_TOL
            if np.any(neg):
                where = np.argwhere(neg)[0]
                raise UnsupportedGeometryError(int(where[-1]), float(arr[tuple(where)]), where[:-1])
    return lo_v, -hi_v


def _grid_costs(model: ModelSpec) -> np.ndarray:
    cols = [np.power(1.0 - th, g) for th, g in zip(model.theta, model.grid())]
    return np.stack(np.broadcast_arrays(*cols), axis=-1).astype(float)


def interval_m2_reduce(p_hat1: float, delta: float) -> UncertaintySet:
    """Two-endpoint finite set equivalent to ``{p_hat1 - delta <= p_1 <= p_hat1 + delta}`` for m = 2."""
    lo, hi = p_hat1 - delta, p_hat1 + delta
    bad = []
    if delta < 0:
        bad.append(Violation("delta", f"{delta} < 0"))
    if lo < 0:
        bad.append(Violation("p_hat1 - delta", f"{lo} < 0"))
    if hi > 1:
        bad.append(Violation("p_hat1 + delta", f"{hi} > 1"))
    if bad:
        raise ValidationError(bad)
    return UncertaintySet.finite([[lo, 1.0 - lo], [hi, 1.0 - hi]])


def interval_m2(p_hat1: float, delta: float) -> UncertaintySet:
    """The box set ``p_hat1 - delta <= p_1 <= p_hat1 + delta`` on the 2-simplex."""
    interval_m2_reduce(p_hat1, delta)  # same preconditions
    lo, hi = p_hat1 - delta, p_hat1 + delta
    return UncertaintySet.interval([lo, 1.0 - hi], [hi, 1.0 - lo])


def contains(P: UncertaintySet, p, tol: float = FEAS_TOL) -> bool:
    """Membership test with feasibility tolerance ``tol``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (P.m,):
        log.warning("contains: profile of shape %s vs set dimension %d", p.shape, P.m)
        return False
    if np.any(p < -tol) or abs(p.sum() - 1.0) > tol:
        return False
    if P.kind in ("singleton", "finite"):
        return bool(np.any(np.all(np.abs(P.profiles - p) <= tol, axis=1)))
    if P.kind == "interval":
        return bool(np.all(p >= P.p_lo - tol) and np.all(p <= P.p_hi + tol))
    d = p - P.center
    z, *_ = np.linalg.lstsq(P.Y, d, rcond=None)
    if np.linalg.norm(P.Y @ z - d) > tol:
        return False
    return bool(np.linalg.norm(z) <= P.epsilon + tol)
