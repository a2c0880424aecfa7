"""Fixed-budget Nelder-Mead over a box and over constrained hyperspheres."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .signal_model import InvalidParameter


class OverConstrained(ValueError):
    pass


@dataclass(frozen=True)
class NelderMeadConfig:
    iterations: int = 40
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_step: float = 0.1
    sphere_step: float = 0.3  # radians, initial simplex edge in angle space

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidParameter("iterations must be >= 0")
        coeffs = (self.reflection, self.expansion, self.contraction, self.shrink,
                  self.initial_step, self.sphere_step)
        if any(not c > 0 for c in coeffs):
            raise InvalidParameter("Nelder-Mead coefficients must be positive")
        if not self.expansion > 1 > self.contraction:
            raise InvalidParameter("need expansion > 1 > contraction")
        if not self.shrink < 1:
            raise InvalidParameter("shrink must be < 1")

    def eval_budget(self, dim: int) -> int:
        """Upper bound on objective calls for a ``dim``-dimensional search."""
        return 2 * self.iterations + dim + 1


@dataclass
class OptimizeTrace:
    best: list = field(default_factory=list)
    n_evals: int = 0


class _BudgetExhausted(Exception):
    pass


def regular_simplex(x0, edge: float) -> np.ndarray:
    """``d + 1`` vertices of a regular simplex with the given edge, first vertex ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    p = edge / (d * math.sqrt(2.0)) * (math.sqrt(d + 1.0) + d - 1.0)
    q = edge / (d * math.sqrt(2.0)) * (math.sqrt(d + 1.0) - 1.0)
    simplex = np.tile(x0, (d + 1, 1))
    for i in range(d):
        simplex[i + 1] += q
        simplex[i + 1, i] += p - q
    return simplex


def nelder_mead(f: Callable[[np.ndarray], float], simplex: np.ndarray, cfg: NelderMeadConfig,
                lower=None, upper=None):
    """Run exactly ``cfg.iterations`` Nelder-Mead iterations from ``simplex``.

    Vertices outside ``[lower, upper]`` score +inf without calling ``f``.
    The total number of calls to ``f`` is capped at ``cfg.eval_budget(d)``;
    if a shrink would overrun the cap the search stops early.

    Returns ``(x_best, f_best, trace)``.
    """
    simplex = np.array(simplex, dtype=float)
    n_vert, d = simplex.shape
    if n_vert != d + 1:
        raise InvalidParameter("simplex must have d + 1 vertices")
    budget = cfg.eval_budget(d)
    trace = OptimizeTrace()

    def feval(x):
        if lower is not None and (np.any(x < lower) or np.any(x > upper)):
            return math.inf
        if trace.n_evals >= budget:
            raise _BudgetExhausted
        trace.n_evals += 1
        return float(f(x))

    values = np.array([feval(x) for x in simplex])
    alpha, gamma, rho, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink

    try:
        for _ in range(cfg.iterations):
            order = np.argsort(values, kind="stable")
            simplex, values = simplex[order], values[order]
            centroid = simplex[:-1].mean(axis=0)
            worst, f_worst = simplex[-1], values[-1]

            xr = centroid + alpha * (centroid - worst)
            fr = feval(xr)
            if values[0] <= fr < values[-2]:
                simplex[-1], values[-1] = xr, fr
            elif fr < values[0]:
                xe = centroid + gamma * (xr - centroid)
                fe = feval(xe)
                if fe < fr:
                    simplex[-1], values[-1] = xe, fe
                else:
                    simplex[-1], values[-1] = xr, fr
            else:
                if fr < f_worst:
                    xc = centroid + rho * (xr - centroid)
                    fc = feval(xc)
                    accept = fc <= fr
                else:
                    xc = centroid + rho * (worst - centroid)
                    fc = feval(xc)
                    accept = fc < f_worst
                if accept:
                    simplex[-1], values[-1] = xc, fc
                else:
                    if trace.n_evals + d > budget:
                        raise _BudgetExhausted
                    for i in range(1, n_vert):
                        simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                        values[i] = feval(simplex[i])
            trace.best.append(float(values.min()))
    except _BudgetExhausted:
        trace.best.append(float(values.min()))

    best = int(np.argmin(values))
    return simplex[best].copy(), float(values[best]), trace


def minimize_field(objective: Callable[[np.ndarray], float], x0, bounds,
                   cfg: NelderMeadConfig = NelderMeadConfig(), edge: float | None = None):
    """Box-bounded Nelder-Mead from a regular simplex anchored at ``x0``.

    ``bounds`` is a sequence of ``(low, high)`` pairs; the initial simplex edge
    is ``edge`` if given, else ``cfg.initial_step`` times the mean interval width.
    """
    x0 = np.asarray(x0, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    lower, upper = bounds[:, 0], bounds[:, 1]
    if bounds.shape != (x0.size, 2) or np.any(upper <= lower):
        raise InvalidParameter("bounds must be (d, 2) with low < high")
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise InvalidParameter(f"x0 {x0} outside bounds")
    if edge is None:
        edge = cfg.initial_step * float(np.mean(upper - lower))
    x, fx, trace = nelder_mead(objective, regular_simplex(x0, edge), cfg, lower, upper)
    return x, fx, trace


# ---------------------------------------------------------------------------
# hypersphere search


@dataclass(frozen=True)
class SphereDomain:
    """Points ``center + radius * u`` with ``|u| = 1`` and ``u`` orthogonal to every constraint."""

    center: np.ndarray
    radius: float
    orthogonal_to: tuple = ()

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        cons = tuple(np.asarray(v, dtype=float) for v in self.orthogonal_to)
        object.__setattr__(self, "orthogonal_to", cons)
        if not self.radius > 0:
            raise InvalidParameter("radius must be positive")
        if cons:
            V = np.array(cons)
            if V.shape[1] != center.size:
                raise InvalidParameter("constraint dimension mismatch")
            if not np.allclose(V @ V.T, np.eye(len(cons)), atol=1e-9, rtol=0):
                raise InvalidParameter("constraints must be mutually orthonormal")

    @property
    def dim(self) -> int:
        return self.center.size

    def point(self, u) -> np.ndarray:
        return self.center + self.radius * np.asarray(u, dtype=float)

    def feasible_basis(self) -> np.ndarray:
        """Orthonormal ``d x (d - k)`` basis of the directions allowed by the constraints."""
        d, k = self.dim, len(self.orthogonal_to)
        if k >= d:
            raise OverConstrained(f"{k} constraints leave no direction in {d} dimensions")
        if k == 0:
            return np.eye(d)
        q, _ = np.linalg.qr(np.array(self.orthogonal_to).T, mode="complete")
        return q[:, k:]


def angles_to_unit(theta) -> np.ndarray:
    """Hyperspherical coordinates to a unit vector of length ``len(theta) + 1``."""
    theta = np.asarray(theta, dtype=float)
    u = np.ones(theta.size + 1)
    s = 1.0
    for j, th in enumerate(theta):
        u[j] = s * math.cos(th)
        s *= math.sin(th)
    u[-1] = s
    return u


def unit_to_angles(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    n = u.size
    theta = np.zeros(n - 1)
    for j in range(n - 2):
        theta[j] = math.atan2(math.sqrt(float(np.sum(u[j + 1:] ** 2))), u[j])
    theta[-1] = math.atan2(u[-1], u[-2])
    return theta


def _project_feasible(v, constraints) -> np.ndarray:
    for c in constraints:
        v = v - np.dot(v, c) * c
    return v / np.linalg.norm(v)


def optimize_on_sphere(objective: Callable[[np.ndarray], float], dom: SphereDomain,
                       cfg: NelderMeadConfig = NelderMeadConfig(), maximize: bool = False,
                       seed_direction=None):
    """Optimize ``objective(u)`` over feasible unit vectors ``u`` of ``dom``.

    The search runs Nelder-Mead on hyperspherical angles of the feasible
    subspace, so every evaluated ``u`` is exactly unit length and orthogonal
    to the constraints. With a single feasible dimension only the sign is
    chosen. Returns ``(u_best, value, trace)``.
    """
    basis = dom.feasible_basis()
    n = basis.shape[1]
    sign = -1.0 if maximize else 1.0
    cons = dom.orthogonal_to

    def direction(coords):
        return _project_feasible(basis @ coords, cons)

    if n == 1:
        trace = OptimizeTrace()
        candidates = [direction(np.array([1.0])), direction(np.array([-1.0]))]
        scores = []
        for u in candidates:
            scores.append(sign * float(objective(u)))
            trace.n_evals += 1
        best = int(np.argmin(scores))
        trace.best.append(sign * scores[best])
        return candidates[best], sign * scores[best], trace

    if seed_direction is None:
        start = np.zeros(n)
        start[0] = 1.0
    else:
        start = basis.T @ np.asarray(seed_direction, dtype=float)
        norm = np.linalg.norm(start)
        if norm < 1e-12:
            start = np.zeros(n)
            start[0] = 1.0
        else:
            start /= norm
    theta0 = unit_to_angles(start)

    def f(theta):
        return sign * float(objective(direction(angles_to_unit(theta))))

    simplex = regular_simplex(theta0, cfg.sphere_step)
    theta, value, trace = nelder_mead(f, simplex, cfg)
    trace.best = [sign * v for v in trace.best]
    return direction(angles_to_unit(theta)), sign * value, trace
