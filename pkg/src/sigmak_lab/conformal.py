"""Pointwise conformal geometry over a flat background.

The central object is the symmetric matrix built from the 2-jet of a
positive factor u on R^n (n >= 3):

    A(u) = -2/(n-2) u^{-(n+2)/(n-2)} Hess(u)
           + 2n/(n-2)^2 u^{-2n/(n-2)} grad(u) x grad(u)
           - 2/(n-2)^2 u^{-2n/(n-2)} |grad(u)|^2 I.

Its eigenvalue vector feeds the symmetric-function machinery in `symfun`.
Mobius transformations of R^n (words in translations, rotations, dilations
and the unit inversion) act on fields through

    u_psi = |J_psi|^{(n-2)/(2n)} (u o psi),

and the spectrum of A is equivariant under that action: the eigenvalues of
A(u_psi) at x equal those of A(u) at psi(x). Jets of transformed fields are
propagated analytically, one chain-rule step per generator; finite
differences appear only in tests.

The Kelvin transform (pure inversion word) encodes behavior at infinity as
behavior at the origin; `kelvin_regularity_probe` collects numerical
evidence for whether a field's Kelvin image extends nicely, without
pretending a finite sample can decide C^2 extendability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DomainError, PoleError, PositivityError
from .halton import sphere_directions

__all__ = [
    "Jet2",
    "MetricTerms",
    "Translation",
    "Rotation",
    "Dilation",
    "Inversion",
    "MobiusMap",
    "Domain",
    "ScalarField",
    "KelvinProbeReport",
    "schouten_flat",
    "schouten_spectrum",
    "schouten_conformal_change",
    "eigenvalues_wrt",
    "mobius_apply",
    "jacobian_det",
    "random_mobius_map",
    "transform_field",
    "kelvin_transform",
    "kelvin_regularity_probe",
    "constant_field",
]


# ---------------------------------------------------------------------------
# jets and the flat Schouten matrix
# ---------------------------------------------------------------------------

@dataclass
class Jet2:
    """Pointwise 2-jet (u, grad u, hess u) of a positive scalar field."""

    point: np.ndarray
    u: float
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.grad = np.asarray(self.grad, dtype=float)
        hess = np.asarray(self.hess, dtype=float)
        n = self.point.size
        if self.grad.shape != (n,) or hess.shape != (n, n):
            raise ValueError("jet component shapes do not match the point dimension")
        if not self.u > 0.0:
            raise PositivityError(f"jet value u={self.u} is not positive",
                                  where=self.point, value=self.u)
        asym = float(np.max(np.abs(hess - hess.T)))
        if asym > 1e-12 * max(1.0, float(np.max(np.abs(hess)))):
            raise ValueError(f"hessian asymmetry {asym:.3e} exceeds tolerance")
        self.hess = 0.5 * (hess + hess.T)


def schouten_flat(jet: Jet2, n: int | None = None) -> np.ndarray:
    """Schouten-type matrix A(u) of a 2-jet over the flat background.

    The result is exactly symmetric: every term is assembled from the
    symmetrized hessian, an outer product, and a multiple of the identity.
    """
    if n is None:
        n = jet.point.size
    elif n != jet.point.size:
        raise ValueError(f"dimension tag {n} does not match the jet point")
    if n < 3:
        raise ValueError(f"dimension n={n} must be >= 3")
    if not jet.u > 0.0:
        raise PositivityError("schouten_flat requires u > 0", where=jet.point, value=jet.u)
    u, g, h = jet.u, jet.grad, jet.hess
    q1 = u ** (-(n + 2.0) / (n - 2.0))
    q2 = u ** (-2.0 * n / (n - 2.0))
    c1 = 2.0 / (n - 2.0)
    c2 = 2.0 * n / (n - 2.0) ** 2
    c3 = 2.0 / (n - 2.0) ** 2
    return (-c1 * q1) * h + (c2 * q2) * np.outer(g, g) \
        - (c3 * q2 * float(g @ g)) * np.eye(n)


def schouten_spectrum(jet: Jet2, n: int | None = None) -> np.ndarray:
    """Ascending eigenvalues of the flat Schouten matrix at a jet."""
    return np.linalg.eigvalsh(schouten_flat(jet, n))


@dataclass
class MetricTerms:
    """Covariant data of u in a background metric g0.

    grad and hess are the gradient and covariant hessian of u, grad_norm2
    is |grad u|^2 measured in g0, metric is the matrix of g0 itself.
    """

    grad: np.ndarray
    hess: np.ndarray
    grad_norm2: float
    metric: np.ndarray


def schouten_conformal_change(jet: Jet2, background: np.ndarray,
                              metric_terms: MetricTerms | None = None) -> np.ndarray:
    """Schouten matrix of the metric u^{4/(n-2)} g0 from the one of g0.

    background is the Schouten matrix of g0 at the point. When
    metric_terms is omitted, g0 is taken to be the flat metric and the
    covariant derivatives come straight from the jet. In that flat case
    with background zero, the result equals u^{4/(n-2)} times the matrix
    from schouten_flat.
    """
    n = jet.point.size
    if n < 3:
        raise ValueError(f"dimension n={n} must be >= 3")
    if not jet.u > 0.0:
        raise PositivityError("conformal change requires u > 0",
                              where=jet.point, value=jet.u)
    if metric_terms is None:
        metric_terms = MetricTerms(jet.grad, jet.hess,
                                   float(jet.grad @ jet.grad), np.eye(n))
    bg = np.asarray(background, dtype=float)
    g0 = np.asarray(metric_terms.metric, dtype=float)
    hess = np.asarray(metric_terms.hess, dtype=float)
    grad = np.asarray(metric_terms.grad, dtype=float)
    for name, m in (("background", bg), ("metric", g0), ("hessian", hess)):
        if m.shape != (n, n):
            raise ValueError(f"{name} must be {n}x{n}")
        if float(np.max(np.abs(m - m.T))) > 1e-12 * max(1.0, float(np.max(np.abs(m)))):
            raise ValueError(f"{name} matrix is not symmetric")
    u = jet.u
    c1 = 2.0 / (n - 2.0)
    c2 = 2.0 * n / (n - 2.0) ** 2
    c3 = 2.0 / (n - 2.0) ** 2
    return (-c1 / u) * hess + (c2 / u ** 2) * np.outer(grad, grad) \
        - (c3 / u ** 2 * metric_terms.grad_norm2) * g0 + bg


def eigenvalues_wrt(matrix: np.ndarray, metric: np.ndarray | None = None) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix, optionally w.r.t. a metric.

    With a metric g this solves the pencil A v = lam g v, i.e. the
    index-raised eigenvalues of the (0,2)-tensor A.
    """
    a = np.asarray(matrix, dtype=float)
    if metric is None:
        return np.linalg.eigvalsh(a)
    g = np.asarray(metric, dtype=float)
    return scipy.linalg.eigh(a, g, eigvals_only=True)


# ---------------------------------------------------------------------------
# Mobius words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Translation:
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))


@dataclass(frozen=True)
class Rotation:
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=float)
        n = mat.shape[0]
        if mat.shape != (n, n):
            raise ValueError("rotation matrix must be square")
        if float(np.max(np.abs(mat.T @ mat - np.eye(n)))) > 1e-12:
            raise ValueError("rotation matrix is not orthogonal to 1e-12")
        object.__setattr__(self, "mat", mat)


@dataclass(frozen=True)
class Dilation:
    s: float

    def __post_init__(self):
        if not self.s > 0.0:
            raise ValueError(f"dilation scale must be positive, got {self.s}")


@dataclass(frozen=True)
class Inversion:
    """x -> x / |x|^2, the unit-sphere inversion."""


_Atom = Translation | Rotation | Dilation | Inversion


@dataclass(frozen=True)
class _TransportState:
    """Jet of a partial word: image point, its first/second derivatives
    w.r.t. the original coordinates, and the log |Jacobian| with its
    first/second derivatives."""

    y: np.ndarray
    jac: np.ndarray
    hess: np.ndarray          # hess[i, j, k] = d^2 y_i / dx_j dx_k
    log_det: float
    grad_log_det: np.ndarray
    hess_log_det: np.ndarray


def _inversion_local(y: np.ndarray):
    """Value, Jacobian, second derivative and log-det data of the inversion at y."""
    r2 = float(y @ y)
    if r2 == 0.0:
        raise PoleError("inversion evaluated at its pole")
    n = y.size
    eye = np.eye(n)
    a = (eye - 2.0 * np.outer(y, y) / r2) / r2
    b = (-2.0 / r2 ** 2) * (np.einsum("ij,k->ijk", eye, y)
                            + np.einsum("ik,j->ijk", eye, y)
                            + np.einsum("jk,i->ijk", eye, y)) \
        + (8.0 / r2 ** 3) * np.einsum("i,j,k->ijk", y, y, y)
    log_det = -n * math.log(r2)
    g = (-2.0 * n / r2) * y
    big_g = (-2.0 * n) * (eye / r2 - 2.0 * np.outer(y, y) / r2 ** 2)
    return y / r2, a, b, log_det, g, big_g


@dataclass(frozen=True)
class MobiusMap:
    """A Mobius transformation as a word of generators, applied left to right."""

    word: tuple

    def __post_init__(self):
        word = tuple(self.word)
        for atom in word:
            if not isinstance(atom, (Translation, Rotation, Dilation, Inversion)):
                raise ValueError(f"unsupported atom {atom!r}")
        object.__setattr__(self, "word", word)

    # -- basic action ------------------------------------------------------

    def apply(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float).copy()
        for atom in self.word:
            if isinstance(atom, Translation):
                y = y + atom.b
            elif isinstance(atom, Rotation):
                y = atom.mat @ y
            elif isinstance(atom, Dilation):
                y = atom.s * y
            else:
                r2 = float(y @ y)
                if r2 == 0.0:
                    raise PoleError("mobius word hit an inversion pole")
                y = y / r2
        return y

    def apply_batch(self, pts: np.ndarray) -> np.ndarray:
        y = np.asarray(pts, dtype=float).copy()
        for atom in self.word:
            if isinstance(atom, Translation):
                y = y + atom.b
            elif isinstance(atom, Rotation):
                y = y @ atom.mat.T
            elif isinstance(atom, Dilation):
                y = atom.s * y
            else:
                r2 = np.einsum("ij,ij->i", y, y)
                if np.any(r2 == 0.0):
                    raise PoleError("mobius word hit an inversion pole")
                y = y / r2[:, None]
        return y

    def jacobian_det(self, x) -> float:
        """|det J| at x, as the exact product of the atom contributions."""
        y = np.asarray(x, dtype=float).copy()
        n = y.size
        det = 1.0
        for atom in self.word:
            if isinstance(atom, Translation):
                y = y + atom.b
            elif isinstance(atom, Rotation):
                y = atom.mat @ y
            elif isinstance(atom, Dilation):
                det *= atom.s ** n
                y = atom.s * y
            else:
                r2 = float(y @ y)
                if r2 == 0.0:
                    raise PoleError("mobius word hit an inversion pole")
                det *= r2 ** (-n)
                y = y / r2
        return det

    def log_det_batch(self, pts: np.ndarray) -> np.ndarray:
        y = np.asarray(pts, dtype=float).copy()
        n = y.shape[1]
        logdet = np.zeros(y.shape[0])
        for atom in self.word:
            if isinstance(atom, Translation):
                y = y + atom.b
            elif isinstance(atom, Rotation):
                y = y @ atom.mat.T
            elif isinstance(atom, Dilation):
                logdet += n * math.log(atom.s)
                y = atom.s * y
            else:
                r2 = np.einsum("ij,ij->i", y, y)
                if np.any(r2 == 0.0):
                    raise PoleError("mobius word hit an inversion pole")
                logdet -= n * np.log(r2)
                y = y / r2[:, None]
        return logdet

    # -- transported jets --------------------------------------------------

    def jet(self, x) -> _TransportState:
        """Image point with all derivatives needed to chain-rule a 2-jet."""
        return _mobius_jet(self.word, np.asarray(x, dtype=float))

    def jacobian(self, x) -> np.ndarray:
        """Jacobian matrix of the word at x."""
        return self.jet(x).jac

    # -- group structure ---------------------------------------------------

    def then(self, other: "MobiusMap") -> "MobiusMap":
        """The composite map applying self first, then other."""
        return MobiusMap(self.word + other.word)

    def inverse(self) -> "MobiusMap":
        inv = []
        for atom in reversed(self.word):
            if isinstance(atom, Translation):
                inv.append(Translation(-atom.b))
            elif isinstance(atom, Rotation):
                inv.append(Rotation(atom.mat.T))
            elif isinstance(atom, Dilation):
                inv.append(Dilation(1.0 / atom.s))
            else:
                inv.append(Inversion())
        return MobiusMap(tuple(inv))

    def poles(self, n: int) -> list[np.ndarray]:
        """Finite points where the word passes through infinity."""
        out = []
        origin = np.zeros(n)
        for j, atom in enumerate(self.word):
            if isinstance(atom, Inversion):
                prefix = MobiusMap(self.word[:j])
                try:
                    out.append(prefix.inverse().apply(origin))
                except PoleError:
                    # preimage of the pole is the point at infinity
                    continue
        return out


def _mobius_jet(word: tuple, x: np.ndarray) -> _TransportState:
    y = np.asarray(x, dtype=float).copy()
    n = y.size
    jac = np.eye(n)
    hess = np.zeros((n, n, n))
    log_det = 0.0
    grad_ld = np.zeros(n)
    hess_ld = np.zeros((n, n))
    for atom in word:
        if isinstance(atom, Translation):
            y = y + atom.b
        elif isinstance(atom, Rotation):
            jac = atom.mat @ jac
            hess = np.tensordot(atom.mat, hess, axes=(1, 0))
            y = atom.mat @ y
        elif isinstance(atom, Dilation):
            jac = atom.s * jac
            hess = atom.s * hess
            log_det += n * math.log(atom.s)
            y = atom.s * y
        else:
            ynew, a, b, ld, g, big_g = _inversion_local(y)
            # order matters: every update uses the jet of the partial word
            grad_ld = grad_ld + jac.T @ g
            hess_ld = hess_ld + jac.T @ big_g @ jac + np.einsum("a,ajk->jk", g, hess)
            hess = np.einsum("iab,aj,bk->ijk", b, jac, jac) \
                + np.tensordot(a, hess, axes=(1, 0))
            jac = a @ jac
            log_det += ld
            y = ynew
    return _TransportState(y, jac, hess, log_det, grad_ld, hess_ld)


def mobius_apply(psi: MobiusMap, x) -> np.ndarray:
    """Apply the word to a point."""
    return psi.apply(x)


def jacobian_det(psi: MobiusMap, x) -> float:
    """Magnitude of the Jacobian determinant of the word at x."""
    return psi.jacobian_det(x)


def random_mobius_map(rng: np.random.Generator, n: int, n_atoms: int = 3, *,
                      translation_scale: float = 1.0,
                      dilation_range: tuple[float, float] = (0.5, 2.0),
                      p_inversion: float = 0.35) -> MobiusMap:
    """Draw a random word of generators with bounded parameters."""
    atoms = []
    for _ in range(n_atoms):
        u = rng.uniform()
        if u < p_inversion:
            atoms.append(Inversion())
        elif u < p_inversion + 0.25:
            atoms.append(Translation(rng.normal(scale=translation_scale, size=n)))
        elif u < p_inversion + 0.5:
            lo, hi = dilation_range
            atoms.append(Dilation(float(np.exp(rng.uniform(np.log(lo), np.log(hi))))))
        else:
            q, r = np.linalg.qr(rng.normal(size=(n, n)))
            q = q * np.sign(np.diag(r))
            atoms.append(Rotation(q))
    return MobiusMap(tuple(atoms))


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Where a field is defined: all of R^n, a ball, an annulus, or an exterior."""

    kind: str = "rn"
    center: np.ndarray | None = None
    r_inner: float = 0.0
    r_outer: float = math.inf

    def contains(self, x: np.ndarray) -> bool:
        if self.kind == "rn":
            return True
        c = self.center if self.center is not None else np.zeros(x.size)
        r = float(np.linalg.norm(np.asarray(x, dtype=float) - c))
        if self.kind == "ball":
            return r <= self.r_outer
        if self.kind == "annulus":
            return self.r_inner <= r <= self.r_outer
        if self.kind == "exterior":
            return r >= self.r_inner
        raise ValueError(f"unknown domain kind {self.kind!r}")


class ScalarField:
    """A positive C^2 field given by an analytic 2-jet evaluator.

    evaluator(x) must return (u, grad, hess) at a point of the domain.
    Evaluators must be safe to call from multiple threads; fields carry no
    mutable state. batch_values, when provided, evaluates many points at
    once and is used by grid searches.
    """

    def __init__(self, n: int, evaluator: Callable, domain: Domain | None = None,
                 tag: str | None = None, batch_values: Callable | None = None):
        if n < 3:
            raise ValueError(f"dimension n={n} must be >= 3")
        self.n = n
        self._evaluator = evaluator
        self.domain = domain if domain is not None else Domain()
        self.tag = tag
        self._batch_values = batch_values

    def raw_jet(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point must have shape ({self.n},)")
        if not self.domain.contains(x):
            raise DomainError(f"point {x} outside field domain ({self.domain.kind})")
        u, grad, hess = self._evaluator(x)
        u = float(u)
        if not u > 0.0:
            raise PositivityError(f"field value {u} is not positive at {x}",
                                  where=x, value=u)
        return u, np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)

    def jet(self, x) -> Jet2:
        u, grad, hess = self.raw_jet(x)
        return Jet2(np.asarray(x, dtype=float), u, grad, hess)

    def value(self, x) -> float:
        return self.raw_jet(x)[0]

    def values(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self._batch_values is not None:
            return np.asarray(self._batch_values(pts), dtype=float)
        return np.array([self.raw_jet(p)[0] for p in pts])


def constant_field(value: float, n: int) -> ScalarField:
    """The constant positive field; its Schouten matrix vanishes."""
    if not value > 0.0:
        raise PositivityError(f"constant field value {value} must be positive")
    zero_g = np.zeros(n)
    zero_h = np.zeros((n, n))

    def evaluator(x):
        return value, zero_g, zero_h

    return ScalarField(n, evaluator, tag=f"const({value})",
                       batch_values=lambda pts: np.full(len(pts), float(value)))


def transform_field(u: ScalarField, psi: MobiusMap) -> ScalarField:
    """The conformal pullback |J_psi|^{(n-2)/(2n)} (u o psi) with analytic jets.

    First and second derivatives are chain-ruled through the transported
    word jet, so the returned field is exactly as smooth as u away from the
    word's poles.
    """
    n = u.n
    p = (n - 2.0) / (2.0 * n)

    def evaluator(x):
        st = _mobius_jet(psi.word, np.asarray(x, dtype=float))
        uy, gy, hy = u.raw_jet(st.y)
        jac, hword = st.jac, st.hess
        # v = u o psi and its jet
        gv = jac.T @ gy
        hv = jac.T @ hy @ jac + np.einsum("a,ajk->jk", gy, hword)
        # conformal factor c = |J|^p and its jet
        c = math.exp(p * st.log_det)
        gc = (p * c) * st.grad_log_det
        hc = c * (p * st.hess_log_det
                  + (p * p) * np.outer(st.grad_log_det, st.grad_log_det))
        val = c * uy
        grad = c * gv + uy * gc
        hess = c * hv + np.outer(gc, gv) + np.outer(gv, gc) + uy * hc
        return val, grad, hess

    batch = None
    if u._batch_values is not None:
        def batch(pts):
            pts = np.asarray(pts, dtype=float)
            images = psi.apply_batch(pts)
            return np.exp(p * psi.log_det_batch(pts)) * u.values(images)

    tag = f"mobius*{u.tag}" if u.tag else "mobius"
    return ScalarField(n, evaluator, domain=Domain(), tag=tag, batch_values=batch)


def kelvin_transform(u: ScalarField) -> ScalarField:
    """|x|^{2-n} u(x / |x|^2), as the pullback under the pure inversion word."""
    return transform_field(u, MobiusMap((Inversion(),)))


# ---------------------------------------------------------------------------
# regularity at infinity, probed
# ---------------------------------------------------------------------------

@dataclass
class KelvinProbeReport:
    """Numerical evidence about the Kelvin image v near the origin.

    For each probe radius: sup and inf of v on the sphere, and the maximum
    of |x| |grad v|. `plausible` records whether the weak decay condition
    (|x| |grad v| decreasing toward zero) holds across the sequence; it is
    evidence, not a certificate.
    """

    radii: np.ndarray
    sup_v: np.ndarray
    inf_v: np.ndarray
    max_scaled_grad: np.ndarray
    positive: bool
    monotone: bool
    below_threshold: bool
    plausible: bool


def kelvin_regularity_probe(u: ScalarField, radius_sequence=None,
                            n_directions: int = 16,
                            grad_threshold: float = 1e-3) -> KelvinProbeReport:
    """Probe the Kelvin image of u on a shrinking radius sequence.

    u must be defined outside a compact set (probing v at radius rho reads
    u at radius 1/rho). The decision threshold on |x||grad v| at the
    smallest radius is configurable; the default 1e-3 is a pragmatic
    cutoff, not a theorem.
    """
    if radius_sequence is None:
        radius_sequence = np.geomspace(0.5, 1e-3, 12)
    radii = np.asarray(radius_sequence, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) >= 0.0):
        raise ValueError("radius sequence must be strictly decreasing with >= 2 entries")
    v = kelvin_transform(u)
    dirs = sphere_directions(n_directions, u.n)
    sup_v = np.empty(radii.size)
    inf_v = np.empty(radii.size)
    max_sg = np.empty(radii.size)
    for i, rho in enumerate(radii):
        vals = []
        sgs = []
        for d in dirs:
            x = rho * d
            val, grad, _ = v.raw_jet(x)
            vals.append(val)
            sgs.append(rho * float(np.linalg.norm(grad)))
        sup_v[i] = max(vals)
        inf_v[i] = min(vals)
        max_sg[i] = max(sgs)
    positive = bool(np.all(inf_v > 0.0))
    # absolute floor keeps rounding noise on exactly-constant images from
    # breaking the decrease test
    monotone = bool(np.all(max_sg[1:] <= max_sg[:-1] * (1.0 + 1e-9) + 1e-12))
    below = bool(max_sg[-1] < grad_threshold)
    return KelvinProbeReport(radii, sup_v, inf_v, max_sg, positive, monotone,
                             below, positive and monotone and below)
