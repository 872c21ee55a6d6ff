"""The closed-form spherical solution family and its verification harness.

For every dimension n >= 3 and cone index 1 <= k <= n the field

    u(x) = c(n, k) (a / (1 + a^2 |x - center|^2))^{(n-2)/2},
    c(n, k) = 2^{(n-2)/4} C(n, k)^{(n-2)/(4k)},

solves sigma_k(lambda(A(u))) = 1 with eigenvalues inside Gamma_k; indeed
A(u) is C(n,k)^{-1/k} times the identity at every point. This module
provides the family, residual verification against the equation on
deterministic sample sets, and the Harnack product functional

    (max over B_R of u) * (min over B_{2R} of u) * R^{n-2},

whose supremum over the family is finite; the sweep reports the empirical
supremum as a lower bound for the sharp constant, with no sharpness claim.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conformal import ScalarField, Domain, MobiusMap, random_mobius_map, \
    schouten_flat, transform_field
from .errors import PositivityError
from .halton import box_points, sphere_directions
from .symfun import _esym_all, _esym_all_batch

__all__ = [
    "BubbleSpec",
    "SolutionReport",
    "HarnackReport",
    "SweepRow",
    "c_constant",
    "bubble_field",
    "verify_solution",
    "harnack_product",
    "harnack_sweep",
    "sweep_supremum",
]


def c_constant(n: int, k: int) -> float:
    """Normalization constant 2^{(n-2)/4} C(n,k)^{(n-2)/(4k)} of the family.

    At k = 1 this reduces to (2n)^{(n-2)/4}.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 3):
        raise ValueError(f"dimension n={n!r} must be an integer >= 3")
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= n):
        raise ValueError(f"cone index k={k!r} outside 1..{n}")
    return 2.0 ** ((n - 2.0) / 4.0) * math.comb(n, k) ** ((n - 2.0) / (4.0 * k))


@dataclass(frozen=True)
class BubbleSpec:
    """Parameters (n, k, scale a, center) of one member of the family."""

    n: int
    k: int
    a: float
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"dimension n={self.n} must be >= 3")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"cone index k={self.k} outside 1..{self.n}")
        if not self.a > 0.0:
            raise ValueError(f"scale a={self.a} must be positive")
        c = np.zeros(self.n) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.n,):
            raise ValueError(f"center must have shape ({self.n},)")
        object.__setattr__(self, "center", c)


def bubble_field(spec: BubbleSpec) -> ScalarField:
    """The closed-form field with analytic first and second derivatives."""
    n, a, x0 = spec.n, spec.a, spec.center
    m = (n - 2.0) / 2.0
    amp = c_constant(n, spec.k) * a ** m

    def evaluator(x):
        d = x - x0
        w = 1.0 + a * a * float(d @ d)
        val = amp * w ** (-m)
        # u' factors: grad = -2 m a^2 amp w^{-m-1} d
        f1 = -2.0 * m * a * a * amp * w ** (-m - 1.0)
        grad = f1 * d
        hess = f1 * np.eye(n) \
            + (4.0 * m * (m + 1.0) * a ** 4 * amp * w ** (-m - 2.0)) * np.outer(d, d)
        return val, grad, hess

    def batch(pts):
        d = np.asarray(pts, dtype=float) - x0
        w = 1.0 + a * a * np.einsum("ij,ij->i", d, d)
        return amp * w ** (-m)

    tag = f"bubble(n={n},k={spec.k},a={a:g})"
    return ScalarField(n, evaluator, domain=Domain(), tag=tag, batch_values=batch)


# ---------------------------------------------------------------------------
# residual verification
# ---------------------------------------------------------------------------

@dataclass
class SolutionReport:
    """Worst-case equation residual and cone margin over a sample set.

    Cone violations are reported, not raised: margin <= 0 at some sample
    marks the first offending location and bumps the violation count.
    """

    n: int
    k: int
    n_samples: int
    max_residual: float
    worst_point: np.ndarray
    min_margin: float
    margin_point: np.ndarray
    cone_violations: int
    first_violation: np.ndarray | None


def verify_solution(u: ScalarField, n: int, k: int, sample_points=None, *,
                    n_samples: int = 1000, box_halfwidth: float = 3.0,
                    center=None, rhs: float = 1.0) -> SolutionReport:
    """Check |sigma_k(lambda(A(u))) - rhs| and the Gamma_k margin pointwise.

    Samples default to a Halton set in a centered box, so reports are
    reproducible bit for bit. All jets are analytic; no differencing.
    """
    if u.n != n:
        raise ValueError(f"field dimension {u.n} does not match n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"cone index k={k} outside 1..{n}")
    if sample_points is None:
        sample_points = box_points(n_samples, n, halfwidth=box_halfwidth, center=center)
    pts = np.asarray(sample_points, dtype=float)
    max_res = -1.0
    worst = pts[0]
    min_margin = math.inf
    margin_pt = pts[0]
    violations = 0
    first_violation = None
    for x in pts:
        jet = u.jet(x)
        lam = np.linalg.eigvalsh(schouten_flat(jet))
        e = _esym_all(lam)
        res = abs(float(e[k]) - rhs)
        margin = float(np.min(e[1:k + 1]))
        if res > max_res:
            max_res, worst = res, x
        if margin < min_margin:
            min_margin, margin_pt = margin, x
        if margin <= 0.0:
            violations += 1
            if first_violation is None:
                first_violation = x
    return SolutionReport(n, k, len(pts), max_res, worst, min_margin,
                          margin_pt, violations, first_violation)


# ---------------------------------------------------------------------------
# Harnack product
# ---------------------------------------------------------------------------

@dataclass
class HarnackReport:
    """Extrema of u over B_R and B_{2R} with the scaled product.

    product_scaled = max_BR * min_2BR * R^{n-2} is the quantity that stays
    bounded on solutions of the sigma_k equation.
    """

    R: float
    max_br: float
    min_2br: float
    product_scaled: float
    argmax: np.ndarray
    argmin: np.ndarray
    equation_residual: float | None = None
    solution_like: bool | None = None

    def __post_init__(self):
        if not (self.R > 0.0 and self.max_br > 0.0 and self.min_2br > 0.0
                and self.product_scaled > 0.0):
            raise PositivityError("Harnack report entries must all be positive")


def _ball_extremum(u: ScalarField, center: np.ndarray, radius: float,
                   dirs: np.ndarray, n_radial: int, mode: str, polish: bool):
    radii = np.linspace(0.0, radius, n_radial)
    pts = (center[None, None, :] + radii[:, None, None] * dirs[None, :, :])
    pts = pts.reshape(-1, center.size)
    vals = u.values(pts)
    if np.any(vals <= 0.0):
        bad = pts[int(np.argmin(vals))]
        raise PositivityError(f"nonpositive sample inside ball at {bad}", where=bad)
    idx = int(np.argmax(vals)) if mode == "max" else int(np.argmin(vals))
    x_best, v_best = pts[idx], float(vals[idx])
    if polish:
        # one Newton step from the best grid point, projected into the ball
        try:
            _, grad, hess = u.raw_jet(x_best)
            step = -np.linalg.solve(hess, grad)
        except Exception:
            step = None
        if step is not None and np.all(np.isfinite(step)):
            x_try = x_best + step
            offset = x_try - center
            dist = float(np.linalg.norm(offset))
            if dist > radius:
                x_try = center + offset * (radius / dist)
            try:
                v_try = u.value(x_try)
            except Exception:
                v_try = None
            if v_try is not None:
                better = v_try > v_best if mode == "max" else v_try < v_best
                if better:
                    x_best, v_best = x_try, v_try
    return x_best, v_best


def harnack_product(u: ScalarField, R: float, center=None, *,
                    n_radial: int = 64, n_angular: int = 64,
                    polish: bool = True, residual_check: int | None = None) -> HarnackReport:
    """Scaled Harnack product of u around a center.

    Extrema are located on a deterministic radial-by-angular product grid
    (n_radial shells, n_angular*(n-1) directions) with one Newton polish
    step from the best grid cell; stochastic optimizers are deliberately
    avoided so reports are reproducible. With residual_check=k, the
    sigma_k residual of u is spot-checked on a few interior points and the
    report flags whether u looks like a solution at all; the product of a
    non-solution is not bounded by anything.
    """
    if not R > 0.0:
        raise ValueError(f"radius R={R} must be positive")
    n = u.n
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    axes = np.vstack([np.eye(n), -np.eye(n)])
    dirs = np.vstack([axes, sphere_directions(max(1, n_angular * (n - 1)), n)])
    argmax, max_br = _ball_extremum(u, center, R, dirs, n_radial, "max", polish)
    argmin, min_2br = _ball_extremum(u, center, 2.0 * R, dirs, n_radial, "min", polish)
    residual = None
    looks_like = None
    if residual_check is not None:
        k = int(residual_check)
        spots = box_points(8, n, halfwidth=R, center=center, start=57)
        rep = verify_solution(u, n, k, sample_points=spots)
        residual = rep.max_residual
        looks_like = rep.max_residual <= 1e-6 and rep.min_margin > 0.0
    return HarnackReport(R, max_br, min_2br, max_br * min_2br * R ** (n - 2.0),
                         argmax, argmin, residual, looks_like)


@dataclass(frozen=True)
class SweepRow:
    """One Harnack product evaluation over the family sweep."""

    label: str
    n: int
    k: int
    a: float
    R: float
    max_br: float
    min_2br: float
    product_scaled: float


def harnack_sweep(n: int, k: int, a_grid, R_grid, *, center=None,
                  n_radial: int = 64, n_angular: int = 64,
                  mobius_words: int = 0, seed: int = 0,
                  threads: int | None = None) -> list[SweepRow]:
    """Harnack products over the (a, R) grid of centered family members.

    With mobius_words > 0, additional rows sweep random word images of the
    a = 1 member; words whose poles land inside B_{3R} of the probe center
    are redrawn, since the product is only meaningful for fields that are
    smooth and positive on the full ball. Rows come back in fixed order
    (label-major, then a-major), and the empirical supremum is a lower
    bound for the sharp constant. Empty grids give an empty list.

    Cell evaluations are independent; SIGMAK_THREADS (or the threads
    argument) caps the worker pool and results merge in index order.
    """
    a_vals = [float(a) for a in np.atleast_1d(np.asarray(a_grid, dtype=float))] \
        if np.size(a_grid) else []
    r_vals = [float(r) for r in np.atleast_1d(np.asarray(R_grid, dtype=float))] \
        if np.size(R_grid) else []
    if not a_vals or not r_vals:
        return []
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    fields = [("bubble", None)]
    if mobius_words > 0:
        rng = np.random.default_rng(seed)
        r_max = max(r_vals)
        drawn = 0
        while drawn < mobius_words:
            psi = random_mobius_map(rng, n)
            poles = psi.poles(n)
            if any(float(np.linalg.norm(p - center)) <= 3.0 * r_max + 0.5 for p in poles):
                continue
            fields.append((f"mobius{drawn}", psi))
            drawn += 1

    tasks = []
    for label, psi in fields:
        for a in a_vals:
            base = bubble_field(BubbleSpec(n, k, a, center=center))
            fld = base if psi is None else transform_field(base, psi)
            for R in r_vals:
                tasks.append((label, a, R, fld))

    def run(task):
        label, a, R, fld = task
        rep = harnack_product(fld, R, center=center,
                              n_radial=n_radial, n_angular=n_angular)
        return SweepRow(label, n, k, a, R, rep.max_br, rep.min_2br,
                        rep.product_scaled)

    if threads is None:
        threads = int(os.environ.get("SIGMAK_THREADS", os.cpu_count() or 1))
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return rows


def sweep_supremum(rows: list[SweepRow]) -> float:
    """Largest scaled product in the sweep (the empirical lower bound)."""
    if not rows:
        raise ValueError("cannot take the supremum of an empty sweep")
    return max(row.product_scaled for row in rows)
