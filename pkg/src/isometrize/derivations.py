"""Derivations over unitary representations and their innerness.

A derivation satisfies ``D(gh) = D(g) pi(h) + pi(g) D(h)``; equivalently

    pi_D(g) = [[pi(g), D(g)], [0, pi(g)]]

is a representation. ``D`` is inner when ``D(g) = pi(g) T - T pi(g)``. The
values ``D(g)`` on arbitrary elements are read off the top-right block of
``pi_D(g)``, so they inherit the normal form of the group.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .cesaro import DEFAULT_TOL
from .errors import (
    DimensionMismatch,
    HypothesisFailed,
    IsometrizeError,
    LeibnizFailed,
    NotApplicable,
    NotInnerAtTolerance,
    SchemaError,
)
from .folner import FiniteGroupTable, FolnerFamily
from .representations import (
    Representation,
    _settled,
    _translated_values,
    eval_batch,
    unitarize_rep,
)

UNITARY_TOL = 1e-10
LEIBNIZ_TOL = 1e-8
LSTSQ_RCOND = 1e-12


def default_seed() -> int:
    """Seed for sampled checks, from ``ISOMETRIZE_SEED`` (default 0)."""
    try:
        return int(os.environ.get("ISOMETRIZE_SEED", "0"))
    except ValueError:
        return 0


class DerivationMap:
    """Generator values of a candidate derivation over a unitary representation."""

    def __init__(self, rep: Representation, images: dict):
        worst = max(la.unitary_residual(m) for m in rep.images.values())
        if worst > UNITARY_TOL:
            raise NotApplicable(f"base representation is not unitary (residual {worst:.3e})")
        imgs = {str(k): la.as_matrix(v, square=True) for k, v in images.items()}
        if set(imgs) != set(rep.images):
            raise SchemaError(f"derivation generators {sorted(imgs)} differ from {sorted(rep.images)}")
        for k, v in imgs.items():
            if v.shape[0] != rep.dim:
                raise DimensionMismatch(f"D({k}) has dimension {v.shape[0]}, pi has {rep.dim}")
        self.rep = rep
        self.images = imgs
        self._pi_d = _block_rep(rep, imgs, check=False)

    @property
    def dim(self) -> int:
        return self.rep.dim

    def values(self, elems) -> tuple[np.ndarray, np.ndarray]:
        """``(pi(g), D(g))`` stacks for the given elements."""
        m = eval_batch(self._pi_d, elems)
        n = self.dim
        return m[:, :n, :n], m[:, :n, n:]

    def value(self, g) -> np.ndarray:
        return self.values(self.rep.descriptor.element(g)[None, :])[1][0]

    @classmethod
    def inner(cls, rep: Representation, t) -> "DerivationMap":
        """The inner derivation ``g -> pi(g) T - T pi(g)``."""
        t = la.as_matrix(t, square=True)
        return cls(rep, {k: v @ t - t @ v for k, v in rep.images.items()})


def _block_rep(rep, images, check=True) -> Representation:
    n = rep.dim
    blocks = {}
    for k, p in rep.images.items():
        b = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        b[:n, :n] = p
        b[n:, n:] = p
        b[:n, n:] = images[k]
        blocks[k] = b
    return Representation(rep.descriptor, blocks, check=check)


def _pairs(d: DerivationMap, samples: int, rng):
    g = d.rep.descriptor
    words = g.words(3)
    i = rng.integers(0, words.shape[0], size=samples)
    j = rng.integers(0, words.shape[0], size=samples)
    return words[i], words[j]


def leibniz_check(d: DerivationMap, samples: int = 200, seed: int | None = None) -> tuple[bool, float]:
    """Largest ``||D(gh) - D(g) pi(h) - pi(g) D(h)||`` over random word pairs.

    Words have length at most 3. ``ok`` iff the defect is at most
    ``1e-8 * (1 + max image norm)``.
    """
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    g = d.rep.descriptor
    a, b = _pairs(d, samples, rng)
    ab = g.mul(a, b)
    pa, da = d.values(a)
    pb, db = d.values(b)
    _, dab = d.values(ab)
    defect = dab - da @ pb - pa @ db
    worst = float(la.op_norms(defect).max()) if samples else 0.0
    scale = 1.0 + max(la.op_norm(m) for m in d.images.values())
    return bool(worst <= LEIBNIZ_TOL * scale), worst


def build_pi_D(d: DerivationMap, samples: int = 200, seed: int | None = None) -> Representation:
    """The block representation ``[[pi, D], [0, pi]]``; raises :class:`LeibnizFailed`."""
    ok, worst = leibniz_check(d, samples, seed)
    if not ok:
        raise LeibnizFailed(f"Leibniz defect {worst:.3e} on sampled word pairs")
    try:
        return _block_rep(d.rep, d.images, check=True)
    except IsometrizeError as exc:
        raise LeibnizFailed(str(exc)) from exc


def derivation_bound_values(d: DerivationMap, family: FolnerFamily | None = None, n_max: int | None = None,
                            g_samples=None) -> dict:
    """``N -> max_g (1/|F_N g|) sum_{h in F_N g} ||D(h)||^2`` at dyadic N."""
    n = d.dim

    def summand(m):
        return la.op_norms(m[:, :n, n:]) ** 2

    return _translated_values(d._pi_d, family, g_samples, n_max, summand, float)


def derivation_bound_scan(d: DerivationMap, family: FolnerFamily | None = None, n_max: int | None = None,
                          g_samples=None) -> tuple[float, bool]:
    """Cest from translated averages of ``||D(h)||^2``; returns ``(Cest, divergent)``.

    Uses the same settling rule as
    :func:`~isometrize.representations.translated_bound_check`.
    """
    c_est, ok = _settled(derivation_bound_values(d, family, n_max, g_samples))
    return c_est, not ok


def _sylvester_system(rep: Representation, targets: dict):
    """Stack ``pi(s) T - T pi(s) = D(s)`` as ``M vec(T) = b`` (row-major vec)."""
    n = rep.dim
    eye = np.eye(n)
    rows, rhs = [], []
    for k, p in rep.images.items():
        rows.append(np.kron(p, eye) - np.kron(eye, p.T))
        rhs.append(targets[k].reshape(-1))
    return np.vstack(rows), np.concatenate(rhs)


def inner_residual(rep: Representation, targets: dict, t) -> float:
    return max(la.op_norm(targets[k] - p @ t + t @ p) for k, p in rep.images.items())


@dataclass
class InnernessCertificate:
    """``T`` with ``D(s) = pi(s) T - T pi(s)`` on generators."""

    T: np.ndarray
    residual: float
    method: str = "LeastSquares"
    bound: float = 0.0
    corroboration: dict = field(default_factory=dict)


def solve_inner(d: DerivationMap) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares ``T`` and its generator residual."""
    m, b = _sylvester_system(d.rep, d.images)
    x, *_ = np.linalg.lstsq(m, b, rcond=LSTSQ_RCOND)
    t = x.reshape(d.dim, d.dim)
    return t, inner_residual(d.rep, d.images, t)


def corroborate(d: DerivationMap, family: FolnerFamily | None = None, tol: float = DEFAULT_TOL,
                n_max: int | None = None) -> dict:
    """Recover ``T`` from the unitarizing form of ``pi_D``.

    If ``F`` is the invariant form of ``pi_D`` with blocks ``F11, F12``,
    then ``F11^-1 F12`` solves the generator equations.
    """
    n = d.dim
    try:
        cert = unitarize_rep(_block_rep(d.rep, d.images, check=False), family, tol=tol, n_max=n_max)
    except HypothesisFailed as exc:
        return {"method": "ViaUnitarization", "ok": False, "reason": ",".join(exc.reasons)}
    f = cert.gram
    t_via = np.linalg.solve(f[:n, :n], f[:n, n:])
    return {
        "method": "ViaUnitarization",
        "ok": True,
        "T": t_via,
        "residual": inner_residual(d.rep, d.images, t_via),
        "unitarization_residual": cert.residual,
        "condition_number": cert.condition_number,
    }


def extract_inner(d: DerivationMap, family: FolnerFamily | None = None, tol: float = DEFAULT_TOL,
                  n_max: int | None = None, corroborate_via_unitarization: bool = True) -> InnernessCertificate:
    """Solve for ``T`` with ``D(s) = pi(s) T - T pi(s)``.

    Raises :class:`LeibnizFailed` when ``D`` is not a derivation,
    :class:`HypothesisFailed` when its translated averages grow, and
    :class:`NotInnerAtTolerance` when the solve leaves a residual above ``tol``.
    """
    build_pi_D(d)
    c_est, divergent = derivation_bound_scan(d, family, n_max)
    if divergent:
        raise HypothesisFailed("derivationBound", {"c_est": c_est})
    t, residual = solve_inner(d)
    cert = InnernessCertificate(t, residual, "LeastSquares", c_est)
    if corroborate_via_unitarization:
        cert.corroboration = corroborate(d, family, n_max=n_max)
    if residual > tol:
        raise NotInnerAtTolerance(residual, tol, cert)
    return cert


def is_finite_group(d: DerivationMap) -> bool:
    return isinstance(d.rep.descriptor, FiniteGroupTable)
