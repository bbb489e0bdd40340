"""Cesaro averages of operator powers and similarity to isometries/unitaries.

The averaged Gram matrices

    A_N = (1/N) sum_{n<N} T*^n T^n

are advanced with the congruence recurrence ``P_{n+1} = T* P_n T`` so each
term stays PSD in floating point. Their spectra give the lower/upper bounds
(m^2, M^2), and their limit ``F`` defines the new inner product ``<Fx, x>``
in which ``T`` is an isometry; the similarity is ``D = F^{1/2}``.

The limit itself is not read off a finite average (which is only accurate
to O(1/N)). It is computed exactly as the mean-ergodic projection of the
identity onto the fixed points of ``X -> T* X T`` (see
:func:`invariant_limit`); the finite averages are kept as the evidence that
this projection is the limit they actually approach.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg as la
from .errors import (
    Diverged,
    DimensionMismatch,
    HypothesisFailed,
    NotConverged,
    NotExpansive,
    NotSquare,
    PowerUnbounded,
    Singular,
)

DEFAULT_TOL = 1e-8
EIGEN_TOL = 1e-6
GROWTH_RATIO = 1.5
GROWTH_CEILING = 1e12
COLLAPSE_RATIO = 2.0 / 3.0
EVIDENCE_RATIO = 0.75
RANK_TOL = 1e-9


def default_horizon(dim: int) -> int:
    """4096 terms up to dimension 16, fewer for larger matrices."""
    if dim <= 16:
        return 4096
    return max(256, int(4096 * (16 / dim) ** 2))


def _square(t) -> np.ndarray:
    t = la.as_matrix(t)
    if t.shape[0] != t.shape[1]:
        raise NotSquare(f"operator of shape {t.shape} is not square")
    return t


@dataclass(frozen=True)
class CesaroState:
    """Running average ``A_N`` together with the last power Gram ``P_{N-1}``."""

    T: np.ndarray
    N: int
    power_gram: np.ndarray
    average: np.ndarray

    @classmethod
    def initial(cls, t) -> "CesaroState":
        t = _square(t)
        eye = np.eye(t.shape[0], dtype=np.complex128)
        return cls(t, 1, eye, eye.copy())

    def advance(self) -> "CesaroState":
        p = la.hermitian_part(la.adjoint(self.T) @ self.power_gram @ self.T)
        a = (self.N * self.average + p) / (self.N + 1)
        return CesaroState(self.T, self.N + 1, p, a)


def cesaro_average(t, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("N must be positive")
    state = CesaroState.initial(t)
    for _ in range(n - 1):
        state = state.advance()
    return state.average


@dataclass
class CesaroScan:
    """All averages ``A_1..A_n`` of one run plus their spectra."""

    averages: np.ndarray  # (n, d, d); averages[k] = A_{k+1}
    powers: np.ndarray  # (n+1, d, d); powers[k] = P_k
    lam_min: np.ndarray
    lam_max: np.ndarray
    n_max: int
    stopped: int | None  # N at which the run was cut for overflow, if any

    @property
    def n(self) -> int:
        return self.averages.shape[0]


def cesaro_scan(t, n_max: int) -> CesaroScan:
    t = _square(t)
    d = t.shape[0]
    th = la.adjoint(t)
    averages = np.empty((n_max, d, d), dtype=np.complex128)
    powers = np.empty((n_max + 1, d, d), dtype=np.complex128)
    p = np.eye(d, dtype=np.complex128)
    a = p.copy()
    stopped = None
    count = n_max
    for k in range(n_max):
        if k:
            a = (k * a + p) / (k + 1)
        averages[k] = a
        powers[k] = p
        p = th @ p @ t
        p = 0.5 * (p + p.conj().T)
        tr = a.trace().real
        if not np.isfinite(tr) or tr > d * GROWTH_CEILING:
            stopped = k + 1
            count = k + 1
            break
    powers[count] = p
    averages = averages[:count]
    powers = powers[: count + 1]
    lam = np.linalg.eigvalsh(averages)
    return CesaroScan(averages, powers, lam[:, 0], lam[:, -1], n_max, stopped)


def growth_divergent(lam_max, n_max: int, stopped=None) -> bool:
    """Dyadic growth test on ``lambda_max`` of a sequence of averages.

    Divergent when the ratio over a dyadic window is at least 1.5 for two
    consecutive windows, when any value exceeds 1e12, or when the run was cut
    short by overflow. Windows start at N = 16 for horizons of 64 or more.
    """
    lam_max = np.asarray(lam_max)
    if stopped is not None or not np.all(np.isfinite(lam_max)):
        return True
    if lam_max.size and lam_max.max() > GROWTH_CEILING:
        return True
    start = 16 if n_max >= 64 else max(2, n_max // 4)
    hits = []
    n = start
    while 2 * n <= lam_max.size:
        hits.append(lam_max[2 * n - 1] >= GROWTH_RATIO * lam_max[n - 1])
        n *= 2
    return any(a and b for a, b in zip(hits, hits[1:]))


@dataclass(frozen=True)
class BoundsEstimate:
    m_sq: float
    M_sq: float
    n_max: int
    divergent: bool
    decay_stat: float
    lower_collapse: bool = False
    collapse_ratio: float = 1.0

    def as_dict(self) -> dict:
        return {
            "m_sq": self.m_sq,
            "M_sq": self.M_sq,
            "n_max": self.n_max,
            "divergent": self.divergent,
            "decay_stat": self.decay_stat,
            "lower_collapse": self.lower_collapse,
            "collapse_ratio": self.collapse_ratio,
        }


def _decay_from_scan(scan: CesaroScan) -> float:
    n_max = scan.n_max
    if scan.stopped is not None:
        return float("inf")
    lo = max(1, n_max // 2)
    idx = np.arange(lo, n_max + 1)
    norms_sq = np.linalg.eigvalsh(scan.powers[idx])[:, -1]
    return float(np.max(norms_sq / idx))


def _bounds_from_scan(scan: CesaroScan, min_m: float = 0.0) -> BoundsEstimate:
    divergent = growth_divergent(scan.lam_max, scan.n_max, scan.stopped)
    n = scan.n
    half = max(1, n // 2)
    if scan.lam_min[half - 1] > 0:
        ratio = float(scan.lam_min[n - 1] / scan.lam_min[half - 1])
    else:
        ratio = 0.0
    m_sq = float(max(scan.lam_min.min(), 0.0))
    collapse = n >= 2 and (ratio <= COLLAPSE_RATIO or m_sq < min_m)
    return BoundsEstimate(
        m_sq=m_sq,
        M_sq=float(scan.lam_max.max()),
        n_max=n,
        divergent=bool(divergent),
        decay_stat=_decay_from_scan(scan),
        lower_collapse=bool(collapse),
        collapse_ratio=ratio,
    )


def estimate_bounds(t, n_max: int | None = None, min_m: float = 0.0) -> BoundsEstimate:
    """Estimate ``m^2 = inf lambda_min(A_N)`` and ``M^2 = sup lambda_max(A_N)``.

    ``lower_collapse`` is set when ``lambda_min`` keeps shrinking like 1/N
    over the last dyadic window (ratio at most 2/3) or drops below ``min_m``.
    """
    t = _square(t)
    n_max = default_horizon(t.shape[0]) if n_max is None else int(n_max)
    if n_max < 8:
        raise ValueError("nMax must be at least 8")
    return _bounds_from_scan(cesaro_scan(t, n_max), min_m)


def decay_check(t, n_max: int) -> float:
    """``max_{nMax/2 <= N <= nMax} ||T^N||^2 / N`` (``inf`` on overflow)."""
    t = _square(t)
    if not np.any(t):
        return 0.0
    return _decay_from_scan(cesaro_scan(t, int(n_max)))


def eigen_unimodular_check(t, tol: float = EIGEN_TOL):
    """Return ``(ok, offenders)``: eigenvalues with ``||lambda| - 1| > tol``."""
    t = _square(t)
    ev = np.linalg.eigvals(t)
    bad = ev[np.abs(np.abs(ev) - 1.0) > tol]
    return bad.size == 0, bad


def k_condition_check(t, k, m: float, n_max: int) -> bool:
    """Operator form of ``m ||Kx||^2 <= (1/N) sum ||T^n x||^2`` for ``N <= nMax``."""
    t = _square(t)
    k = la.as_matrix(k)
    if k.shape[1] != t.shape[0]:
        raise DimensionMismatch(f"K has {k.shape[1]} columns, T has dimension {t.shape[0]}")
    kk = m * (la.adjoint(k) @ k)
    scan = cesaro_scan(t, int(n_max))
    lam = np.linalg.eigvalsh(scan.averages - kk)
    return bool(lam[:, 0].min() >= -1e-10)


# -- limit Gram -----------------------------------------------------------


def _null_space(m: np.ndarray, rank_tol: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(m, full_matrices=False)
    cut = rank_tol * max(s[0], 1.0) if s.size else 0.0
    rank = int(np.sum(s > cut))
    return vh[rank:].conj().T


def invariant_limit(images, start=None, rank_tol: float = RANK_TOL):
    """Mean-ergodic limit of ``A* X A`` averages over the semigroup generated by ``images``.

    Returns ``(F, ok)``. ``F`` is the projection of ``start`` (default ``I``)
    onto the common fixed space of the maps ``X -> A* X A`` along the sum of
    their ranges; for a power-bounded family this is the limit of every
    Folner/Cesaro average of ``A_g* start A_g``. The complementary fixed
    space of the adjoint maps ``W -> A W A*`` pins the projection. ``ok`` is
    False when the two fixed spaces have different dimensions or pair
    degenerately, which happens when the maps are not power bounded.
    """
    mats = [np.asarray(a, dtype=np.complex128) for a in images]
    n = mats[0].shape[0]
    eye = np.eye(n * n)
    # row-major vec: vec(B X C) = kron(B, C.T) vec(X)
    fwd = np.vstack([np.kron(a.conj().T, a.T) - eye for a in mats])
    bwd = np.vstack([np.kron(a, a.conj()) - eye for a in mats])
    v = _null_space(fwd, rank_tol)
    w = _null_space(bwd, rank_tol)
    x0 = np.eye(n, dtype=np.complex128) if start is None else np.asarray(start, dtype=np.complex128)
    if v.shape[1] == 0 or v.shape[1] != w.shape[1]:
        return np.zeros((n, n), dtype=np.complex128), False
    g = w.conj().T @ v
    # a degenerate pairing means the fixed spaces do not split the space
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[-1] <= rank_tol * max(sv[0], 1.0):
        return np.zeros((n, n), dtype=np.complex128), False
    coef = np.linalg.solve(g, w.conj().T @ x0.reshape(-1))
    f = (v @ coef).reshape(n, n)
    return la.hermitian_part(f), True


def fixed_point_residual(images, f) -> float:
    return max(la.op_norm(la.adjoint(a) @ f @ a - f) for a in images)


def averaging_evidence(distances, floor: float):
    """Check that ``||avg_k - F||`` decays over the last dyadic windows.

    ``distances[k-1]`` is the distance at horizon ``k``. The sup over
    ``(n/2, n]`` must be at most 3/4 of the sup over ``(n/8, n/2]`` (a 1/N
    decay gives about 1/4), unless it is already below ``floor``. The wider
    reference window tolerates beats from nearly resonant spectra.
    Returns ``(ok, tail, ratio)``.
    """
    d = np.asarray(distances, dtype=float)
    n = d.size
    tail = float(d[n // 2:].max()) if n else 0.0
    head_part = d[n // 8: n // 2]
    head = float(head_part.max()) if head_part.size else tail
    if tail <= floor:
        return True, tail, 0.0
    ratio = tail / head if head > 0 else float("inf")
    return ratio <= EVIDENCE_RATIO, tail, ratio


def _distances(averages, f) -> np.ndarray:
    lam = np.linalg.eigvalsh(averages - f)
    return np.max(np.abs(lam), axis=1)


def second_order_average(averages) -> np.ndarray:
    return la.hermitian_part(np.mean(averages, axis=0))


@dataclass
class GramLimit:
    gram: np.ndarray
    converged: bool
    method: str
    fixed_point_residual: float
    evidence_tail: float
    evidence_ratio: float
    n_max: int
    distances: np.ndarray = field(default=None, repr=False)


def _limit_from_averages(images, averages, tol, n_max, rank_tol=RANK_TOL) -> GramLimit:
    f, ok = invariant_limit(images, rank_tol=rank_tol)
    scale = max(1.0, la.op_norm(f))
    res = fixed_point_residual(images, f) if ok else float("inf")
    dist = _distances(averages, f)
    ev_ok, tail, ratio = averaging_evidence(dist, 1e-9 * scale)
    converged = ok and res <= tol * scale and ev_ok
    if converged:
        return GramLimit(f, True, "invariant-projection", res, tail, ratio, n_max, dist)
    fallback = second_order_average(averages)
    return GramLimit(
        fallback,
        False,
        "second-order-average",
        fixed_point_residual(images, fallback),
        tail,
        ratio,
        n_max,
        dist,
    )


def limit_gram(t, tol: float = DEFAULT_TOL, n_max: int | None = None) -> GramLimit:
    """Limit ``F`` of the Cesaro Gram averages, with ``T* F T = F``.

    Raises :class:`Diverged` when the averages grow, and
    :class:`NotConverged` (carrying the second-order average as ``result``)
    when the projection is not confirmed by the averages.
    """
    t = _square(t)
    n_max = default_horizon(t.shape[0]) if n_max is None else int(n_max)
    scan = cesaro_scan(t, n_max)
    bounds = _bounds_from_scan(scan)
    if bounds.divergent:
        raise Diverged(bounds=bounds)
    result = _limit_from_averages([t], scan.averages, tol, n_max)
    if not result.converged:
        raise NotConverged(result=result)
    return result


# -- certificates ------------------------------------------------------------


@dataclass
class SimilarityCertificate:
    """Similarity ``transform`` with ``transform @ T @ inv(transform)`` isometric/unitary.

    ``bounds`` holds m^2, M^2 taken over the scanned averages and their
    limit point ``gram``.
    """

    transform: np.ndarray
    kind: str  # "isometry" | "unitary"
    residual: float
    condition_number: float
    bounds: BoundsEstimate
    gram_fixed_point_residual: float
    gram: np.ndarray
    conjugated: np.ndarray
    evidence_ratio: float = 0.0
    extra: dict = field(default_factory=dict)


def _conjugate(f):
    d = la.herm_sqrt(f)
    d_inv = la.herm_inv_sqrt(f)
    return d, d_inv


def _refine(bounds: BoundsEstimate, f) -> BoundsEstimate:
    lo, hi = la.psd_bounds(f)
    return replace(bounds, m_sq=min(bounds.m_sq, lo), M_sq=max(bounds.M_sq, hi))


def isometrize(
    t,
    tol: float = DEFAULT_TOL,
    n_max: int | None = None,
    min_m: float = 1e-8,
    eig_tol: float = EIGEN_TOL,
) -> SimilarityCertificate:
    """Find ``D`` with ``D T D^-1`` an isometry, or report which hypothesis fails.

    Failure tags: ``divergent``, ``lower_bound_collapse``,
    ``eigenvalue_modulus``, ``not_converged``, ``singular``.
    """
    t = _square(t)
    n_max = default_horizon(t.shape[0]) if n_max is None else int(n_max)
    scan = cesaro_scan(t, n_max)
    bounds = _bounds_from_scan(scan, min_m)
    reasons = []
    diag = {"bounds": bounds}
    if bounds.divergent:
        reasons.append("divergent")
    elif bounds.lower_collapse:
        reasons.append("lower_bound_collapse")
    eig_ok, offenders = eigen_unimodular_check(t, eig_tol)
    diag["offending_eigenvalues"] = offenders
    if not eig_ok:
        reasons.append("eigenvalue_modulus")
    if reasons:
        raise HypothesisFailed(reasons, diag)

    lim = _limit_from_averages([t], scan.averages, tol, n_max)
    diag["limit"] = lim
    if not lim.converged:
        raise HypothesisFailed("not_converged", diag)
    f = lim.gram
    lo, hi = la.psd_bounds(f)
    if lo <= la.SINGULAR_TOL * hi:
        raise HypothesisFailed("singular", diag)
    d, d_inv = _conjugate(f)
    conj = d @ t @ d_inv
    residual = la.isometry_residual(conj)
    if residual > tol:
        raise HypothesisFailed("not_converged", diag, f"isometry residual {residual:.3e} > {tol:.1e}")
    return SimilarityCertificate(
        transform=d,
        kind="isometry",
        residual=residual,
        condition_number=la.condition_number(d),
        bounds=_refine(bounds, f),
        gram_fixed_point_residual=lim.fixed_point_residual,
        gram=f,
        conjugated=conj,
        evidence_ratio=lim.evidence_ratio,
    )


def expansive_isometrize(t, n_max: int | None = None, tol: float = 1e-9) -> SimilarityCertificate:
    """Monotone-limit construction for expansive ``T`` (``T*T >= I``).

    The averages increase; their plain limit ``A`` satisfies ``T* A T = A``
    and ``A >= I``, so no ultrafilter (or projection) is needed.
    """
    t = _square(t)
    lam = la.psd_bounds(la.adjoint(t) @ t)
    if lam[0] < 1 - 1e-10:
        raise NotExpansive(f"lambda_min(T*T) = {lam[0]:.6g} < 1")
    n_max = default_horizon(t.shape[0]) if n_max is None else int(n_max)
    scan = cesaro_scan(t, n_max)
    steps = np.diff(scan.averages, axis=0)
    if steps.shape[0]:
        step_min = np.linalg.eigvalsh(steps)[:, 0]
        monotone = bool(np.all(step_min >= -1e-12 * scan.lam_max[1:]))
    else:
        step_min = np.zeros(0)
        monotone = True
    bounds = _bounds_from_scan(scan)
    if bounds.divergent:
        raise Diverged("averages of an expansive operator are unbounded", bounds=bounds)
    if not monotone:
        # cannot happen for T*T >= I beyond roundoff; report rather than certify
        raise HypothesisFailed("not_monotone", {"step_min": float(step_min.min())})
    a = scan.averages[-1]
    half = scan.averages[max(0, scan.n // 2 - 1)]
    scale = max(1.0, la.op_norm(a))
    cauchy = la.op_norm(a - half)
    fixed = la.op_norm(la.adjoint(t) @ a @ t - a)
    if cauchy > tol * scale or fixed > tol * scale:
        raise NotConverged(f"monotone averages not settled (Cauchy {cauchy:.3e}, fixed point {fixed:.3e})")
    d, d_inv = _conjugate(a)
    conj = d @ t @ d_inv
    return SimilarityCertificate(
        transform=d,
        kind="isometry",
        residual=la.isometry_residual(conj),
        condition_number=la.condition_number(d),
        bounds=_refine(bounds, a),
        gram_fixed_point_residual=fixed,
        gram=a,
        conjugated=conj,
        extra={"monotone": monotone, "min_step_eigenvalue": float(step_min.min()) if step_min.size else 0.0},
    )


def symmetric_average(t, n: int) -> np.ndarray:
    """``B_N = (1/(2N+1)) sum_{|k|<=N} T*^k T^k`` by direct summation."""
    t = _square(t)
    t_inv = la.inverse(t)
    total = np.eye(t.shape[0], dtype=np.complex128)
    for step in (t, t_inv):
        power = np.eye(t.shape[0], dtype=np.complex128)
        for _ in range(n):
            power = power @ step
            total = total + la.adjoint(power) @ power
    return la.hermitian_part(total / (2 * n + 1))


def _symmetric_averages(fwd: CesaroScan, bwd: CesaroScan, n: int) -> np.ndarray:
    ks = np.arange(1, n + 1)[:, None, None]
    eye = np.eye(fwd.averages.shape[1])
    # sum_{k=0}^{N} P_k = (N+1) A_{N+1}
    sums = (ks + 1) * fwd.averages[1 : n + 1] + (ks + 1) * bwd.averages[1 : n + 1] - eye
    return sums / (2 * ks + 1)


def sznagy_unitarize(t, n_max: int | None = None, tol: float = DEFAULT_TOL) -> SimilarityCertificate:
    """Unitarize an invertible ``T`` with ``T`` and ``T^-1`` power bounded.

    Uses the two-sided averages ``B_N`` over ``{-N..N}``; the transform is
    ``L = B^{1/2}`` for the limit ``B``.
    """
    t = _square(t)
    la.condition_number(t)
    t_inv = np.linalg.inv(t)
    n_max = default_horizon(t.shape[0]) if n_max is None else int(n_max)
    fwd = cesaro_scan(t, n_max + 1)
    fb = _bounds_from_scan(fwd)
    if fb.divergent:
        raise PowerUnbounded("forward", fb)
    bwd = cesaro_scan(t_inv, n_max + 1)
    bb = _bounds_from_scan(bwd)
    if bb.divergent:
        raise PowerUnbounded("backward", bb)
    sym = _symmetric_averages(fwd, bwd, n_max)
    lam = np.linalg.eigvalsh(sym)
    bounds = BoundsEstimate(
        m_sq=float(lam[:, 0].min()),
        M_sq=float(lam[:, -1].max()),
        n_max=n_max,
        divergent=False,
        decay_stat=max(fb.decay_stat, bb.decay_stat),
    )
    lim = _limit_from_averages([t], sym, tol, n_max)
    diag = {"bounds": bounds, "limit": lim}
    if not lim.converged:
        raise HypothesisFailed("not_converged", diag)
    b = lim.gram
    lo, hi = la.psd_bounds(b)
    if lo <= la.SINGULAR_TOL * hi:
        raise Singular("limit of symmetric averages is singular")
    ell, ell_inv = _conjugate(b)
    conj = ell @ t @ ell_inv
    residual = la.unitary_residual(conj)
    if residual > tol:
        raise HypothesisFailed("not_converged", diag, f"unitary residual {residual:.3e} > {tol:.1e}")
    return SimilarityCertificate(
        transform=ell,
        kind="unitary",
        residual=residual,
        condition_number=la.condition_number(ell),
        bounds=_refine(bounds, b),
        gram_fixed_point_residual=lim.fixed_point_residual,
        gram=b,
        conjugated=conj,
        evidence_ratio=lim.evidence_ratio,
    )
