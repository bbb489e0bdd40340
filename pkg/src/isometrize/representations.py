"""Folner-averaged unitarization of finite-dimensional representations.

A representation assigns a square matrix to each generator of a descriptor
from :mod:`isometrize.folner`. Averages over a Folner family,

    gram_N = (1/|F_N|) sum_{g in F_N} pi(g)* pi(g),

play the role of the Cesaro averages for a single operator; their limit ``F``
is pi-invariant (``pi(s)* F pi(s) = F``) and ``L = F^{1/2}`` conjugates
``pi`` to a unitary (group) or isometric (semigroup) representation:
``L pi(s) L^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .cesaro import (
    COLLAPSE_RATIO,
    DEFAULT_TOL,
    GramLimit,
    _limit_from_averages,
    growth_divergent,
    invariant_limit,
)
from .errors import (
    DimensionMismatch,
    DoublingFailed,
    HypothesisFailed,
    NotApplicable,
    OutOfDomain,
    RelationError,
    SchemaError,
    SetTooLarge,
)
from .folner import (
    FiniteGroupTable,
    FolnerFamily,
    GroupDescriptor,
    Heisenberg3,
    IntLattice,
    KeyCodec,
    NatLattice,
    doubling_check,
    standard_family,
    symmetrized,
)

RELATION_TOL = 1e-10
UNIFORM_RATIO = 1.05
DECAY_SLACK = 1.1
_EVAL_CHUNK = 65536


class Representation:
    """Generator images of a group/semigroup homomorphism into matrices.

    Relations are checked on construction (commuting lattice generators,
    ``xy = yxz`` with ``z`` central for the Heisenberg group, the full table
    for finite groups). For Heisenberg reps ``z`` may be omitted and is then
    derived from ``x`` and ``y``.
    """

    def __init__(self, descriptor: GroupDescriptor, images: dict, check: bool = True, tol: float = RELATION_TOL):
        self.descriptor = descriptor
        imgs = {str(k): la.as_matrix(v, square=True) for k, v in images.items()}
        if not imgs:
            raise SchemaError("representation needs at least one generator image")
        dims = {m.shape[0] for m in imgs.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"generator images have different dimensions {sorted(dims)}")
        self.dim = dims.pop()
        unknown = set(imgs) - set(descriptor.generators)
        if unknown:
            raise SchemaError(f"unknown generators {sorted(unknown)} for {descriptor.name}")
        if isinstance(descriptor, Heisenberg3) and "z" not in imgs and {"x", "y"} <= set(imgs):
            x, y = imgs["x"], imgs["y"]
            imgs["z"] = la.inverse(y @ x) @ x @ y
        if not isinstance(descriptor, FiniteGroupTable):
            missing = set(descriptor.generators) - set(imgs)
            if missing:
                raise SchemaError(f"missing generator images {sorted(missing)}")
        self.images = imgs
        self.inverse_images = {}
        if descriptor.is_group:
            self.inverse_images = {k: la.inverse(v) for k, v in imgs.items()}
        self._all = None
        self._power_cache: dict[str, tuple[int, np.ndarray]] = {}
        if isinstance(descriptor, FiniteGroupTable):
            self._all = self._close_finite(check, tol)
        if check:
            self.check_relations(tol)

    @property
    def generator_names(self) -> list[str]:
        return list(self.images)

    def _close_finite(self, check, tol):
        g = self.descriptor
        n = g.order
        out = np.full((n, self.dim, self.dim), np.nan, dtype=np.complex128)
        out[g.identity_index] = np.eye(self.dim)
        known = [g.identity_index]
        gens = [(int(g.generators[k][0]), v) for k, v in self.images.items()]
        done = np.zeros(n, dtype=bool)
        done[g.identity_index] = True
        while known:
            nxt = []
            for a in known:
                for s, m in gens:
                    b = g.table[a, s]
                    if not done[b]:
                        out[b] = out[a] @ m
                        done[b] = True
                        nxt.append(b)
            known = nxt
        if not done.all():
            raise RelationError("generator images do not generate the whole finite group")
        return out

    def _close(self, a, b, tol) -> bool:
        return la.op_norm(a - b) <= tol * max(1.0, la.op_norm(a), la.op_norm(b))

    def check_relations(self, tol: float = RELATION_TOL):
        g = self.descriptor
        im = self.images
        if isinstance(g, (IntLattice, NatLattice)):
            names = list(im)
            for i, a in enumerate(names):
                for b in names[i + 1:]:
                    if not self._close(im[a] @ im[b], im[b] @ im[a], tol):
                        raise RelationError(f"images of {a} and {b} do not commute")
        elif isinstance(g, Heisenberg3):
            x, y, z = im["x"], im["y"], im["z"]
            if not self._close(x @ y, y @ x @ z, tol):
                raise RelationError("pi(x) pi(y) != pi(y) pi(x) pi(z)")
            for name, m in (("x", x), ("y", y)):
                if not self._close(m @ z, z @ m, tol):
                    raise RelationError(f"pi(z) does not commute with pi({name})")
        elif isinstance(g, FiniteGroupTable):
            a = self._all
            lhs = a[g.table]  # pi(ab)
            rhs = np.einsum("aij,bjk->abik", a, a)
            scale = max(1.0, float(la.op_norms(a).max()) ** 2)
            if np.abs(lhs - rhs).max() > tol * scale:
                raise RelationError("images do not respect the multiplication table")
            for name, m in im.items():
                if not self._close(a[g.generators[name][0]], m, tol):
                    raise RelationError(f"image of {name} is inconsistent with the other generators")

    def powers(self, name: str, lo: int, hi: int) -> tuple[int, np.ndarray]:
        """Cached ``pi(name)^k`` table covering ``lo..hi``; returns ``(offset, table)``."""
        cached = self._power_cache.get(name)
        if cached is not None:
            off, tab = cached
            if -off <= lo and hi <= tab.shape[0] - 1 - off:
                return off, tab
            lo = min(lo, -off)
            hi = max(hi, tab.shape[0] - 1 - off)
        # grow geometrically so scans over increasing N stay linear
        lo = min(lo, 0) * 2 if lo < 0 else 0
        hi = max(hi, 0) * 2
        if not self.descriptor.is_group:
            lo = 0
        tab = _power_table(self.images[name], self.inverse_images.get(name), lo, hi)
        self._power_cache[name] = (-lo, tab)
        return -lo, tab

    def inverse_image(self, name):
        if name not in self.inverse_images:
            raise NotApplicable(f"{self.descriptor.name} has no inverses")
        return self.inverse_images[name]

    def conjugate(self, m) -> "Representation":
        """``M pi M^-1`` as a new representation."""
        m = la.as_matrix(m, square=True)
        mi = la.inverse(m)
        base = {k: v for k, v in self.images.items()}
        return Representation(self.descriptor, {k: m @ v @ mi for k, v in base.items()}, check=False)

    def __repr__(self):
        return f"<Representation of {self.descriptor.name}, dim {self.dim}>"


def _power_table(a, a_inv, lo: int, hi: int) -> np.ndarray:
    """``a^k`` for ``k`` in ``lo..hi`` (negative powers through ``a_inv``)."""
    d = a.shape[0]
    out = np.empty((hi - lo + 1, d, d), dtype=np.complex128)
    eye = np.eye(d, dtype=np.complex128)
    with np.errstate(all="ignore"):
        if lo <= 0 <= hi:
            out[-lo] = eye
        p = eye
        for k in range(1, hi + 1):
            p = p @ a
            if k >= lo:
                out[k - lo] = p
        if lo < 0:
            if a_inv is None:
                raise OutOfDomain("negative powers need invertible images")
            p = eye
            for k in range(1, -lo + 1):
                p = p @ a_inv
                if -k <= hi:
                    out[-k - lo] = p
    return out


def _coordinates(rep: Representation, elems: np.ndarray):
    """Exponents of the normal form, one column per generator factor."""
    g = rep.descriptor
    if isinstance(g, Heisenberg3):
        a, b, c = elems[:, 0], elems[:, 1], elems[:, 2]
        return ["x", "y", "z"], np.stack([a, b, c - a * b], axis=1)
    names = [f"e{i + 1}" for i in range(g.rank)]
    return names, elems


def eval_batch(rep: Representation, elems) -> np.ndarray:
    """``pi(g)`` for a stack of elements, shape ``(k, d, d)``.

    Normal forms: lattices ``e1^a1 e2^a2 ...``; Heisenberg
    ``x^a y^b z^(c - ab)`` for ``(a, b, c)``; finite groups use the stored
    images of all elements.
    """
    g = rep.descriptor
    elems = np.asarray(elems, dtype=np.int64).reshape(-1, g.rank)
    if not g.in_domain(elems).all():
        raise OutOfDomain(f"element outside the domain of {g.name}")
    if isinstance(g, FiniteGroupTable):
        return rep._all[elems[:, 0]]
    names, coords = _coordinates(rep, elems)
    out = None
    with np.errstate(all="ignore"):
        for j, name in enumerate(names):
            col = coords[:, j]
            lo, hi = int(col.min()), int(col.max())
            if lo == hi == 0:
                continue
            off, table = rep.powers(name, lo, hi)
            factor = table[col + off]
            out = factor if out is None else out @ factor
    if out is None:
        out = np.broadcast_to(np.eye(rep.dim, dtype=np.complex128), (elems.shape[0], rep.dim, rep.dim)).copy()
    return out


def rep_eval(rep: Representation, g) -> np.ndarray:
    """``pi(g)`` for one element (tuple, integer or generator name)."""
    return eval_batch(rep, rep.descriptor.element(g)[None, :])[0]


def _chunked_sums(rep, elems, adjoint: bool = True):
    """Sums of ``pi* pi`` (and ``pi pi*``) over ``elems`` in fixed order."""
    d = rep.dim
    s1 = np.zeros((d, d), dtype=np.complex128)
    s2 = np.zeros((d, d), dtype=np.complex128)
    with np.errstate(all="ignore"):
        for i in range(0, elems.shape[0], _EVAL_CHUNK):
            m = eval_batch(rep, elems[i:i + _EVAL_CHUNK])
            s1 += np.einsum("kji,kjl->il", m.conj(), m)
            if adjoint:
                s2 += np.einsum("kij,klj->il", m, m.conj())
    return s1, s2


@dataclass
class FolnerGram:
    N: int
    gram: np.ndarray
    adjoint_gram: np.ndarray


def folner_gram_pair(rep: Representation, family: FolnerFamily, n: int) -> FolnerGram:
    f = family.set_at(n)
    s1, s2 = _chunked_sums(rep, f)
    return FolnerGram(n, la.hermitian_part(s1 / f.shape[0]), la.hermitian_part(s2 / f.shape[0]))


def default_rep_horizon(g: GroupDescriptor) -> int:
    """Largest dyadic N (at most 256) whose standard Folner set stays small."""
    if isinstance(g, FiniteGroupTable):
        return 4
    fam = standard_family(g)
    sizes = {
        IntLattice: lambda n: (2 * n + 1) ** g.rank,
        NatLattice: lambda n: n ** g.rank,
        Heisenberg3: lambda n: (2 * n + 1) ** 2 * (2 * n * n + 1),
    }[type(g)]
    n = 4
    while 2 * n <= 256 and sizes(2 * n) <= 40_000:
        n *= 2
    del fam
    return n


@dataclass
class BoundScan:
    """Bounds over ``N = 1..nMax``; squared quantities are stored, roots exposed."""

    c_sq: float
    m_sq: float
    M_sq: float
    divergent: bool
    lower_ok: bool
    lower_collapse: bool
    n_max: int
    lam_min: np.ndarray = field(repr=False)
    lam_max: np.ndarray = field(repr=False)
    adj_lam_max: np.ndarray = field(repr=False)
    grams: np.ndarray = field(repr=False)
    adjoint_grams: np.ndarray = field(repr=False)

    @property
    def c_est(self) -> float:
        return float(np.sqrt(self.c_sq))

    @property
    def m_est(self) -> float:
        return float(np.sqrt(max(self.m_sq, 0.0)))

    @property
    def M_est(self) -> float:
        return float(np.sqrt(self.M_sq))

    def as_dict(self) -> dict:
        return {
            "c_est": self.c_est,
            "m_est": self.m_est,
            "M_est": self.M_est,
            "divergent": self.divergent,
            "lower_ok": self.lower_ok,
            "lower_collapse": self.lower_collapse,
            "n_max": self.n_max,
        }


def bound_scan(rep: Representation, family: FolnerFamily | None = None, n_max: int | None = None,
               min_m: float = 0.0) -> BoundScan:
    """Scan both Folner grams for every ``N <= nMax``.

    Nested families are summed incrementally over ``F_N minus F_{N-1}``.
    """
    g = rep.descriptor
    family = family or default_family(g)
    n_max = default_rep_horizon(g) if n_max is None else int(n_max)
    if n_max < 4:
        raise ValueError("nMax must be at least 4")
    d = rep.dim
    grams = np.empty((n_max, d, d), dtype=np.complex128)
    adj = np.empty((n_max, d, d), dtype=np.complex128)
    big = family.set_at(n_max)
    codec = KeyCodec(big) if family.nested else None
    s1 = np.zeros((d, d), dtype=np.complex128)
    s2 = np.zeros((d, d), dtype=np.complex128)
    prev = np.zeros(0, dtype=np.int64)
    for n in range(1, n_max + 1):
        f = family.set_at(n)
        if codec is not None and codec.inside(f).all():
            keys = codec.encode(f)
            new = f[~np.isin(keys, prev)]
            prev = keys
            a, b = _chunked_sums(rep, new)
            s1, s2 = s1 + a, s2 + b
        else:
            s1, s2 = _chunked_sums(rep, f)
        grams[n - 1] = la.hermitian_part(s1 / f.shape[0])
        adj[n - 1] = la.hermitian_part(s2 / f.shape[0])
    finite = np.all(np.isfinite(grams), axis=(1, 2)) & np.all(np.isfinite(adj), axis=(1, 2))
    stopped = None
    if not finite.all():
        stopped = int(np.argmin(finite)) + 1
        grams[~finite] = 0.0
        adj[~finite] = 0.0
    lam = np.linalg.eigvalsh(grams)
    lam_adj = np.linalg.eigvalsh(adj)
    if stopped is not None:
        lam[stopped - 1:] = np.inf
    lam_min, lam_max = lam[:, 0], lam[:, -1]
    adj_max = lam_adj[:, -1]
    divergent = growth_divergent(lam_max, n_max, stopped) or (
        g.is_group and growth_divergent(adj_max, n_max, stopped))
    c_sq = float(max(lam_max.max(), adj_max.max() if g.is_group else lam_max.max()))
    m_sq = float(max(lam_min.min(), 0.0))
    lower_ok = bool(not g.is_group or np.all(lam_min >= (1 - 1e-9) / c_sq))
    half = max(1, n_max // 2)
    ratio = lam_min[n_max - 1] / lam_min[half - 1] if lam_min[half - 1] > 0 else 0.0
    collapse = bool(ratio <= COLLAPSE_RATIO or m_sq < min_m)
    return BoundScan(c_sq, m_sq, float(lam_max.max()), bool(divergent), lower_ok, collapse, n_max,
                     lam_min, lam_max, adj_max, grams, adj)


def default_family(g: GroupDescriptor) -> FolnerFamily:
    """Standard boxes, closed under inversion for groups."""
    fam = standard_family(g)
    return symmetrized(fam) if g.is_group else fam


def decay_words(g: GroupDescriptor) -> np.ndarray:
    """Elements whose translates are tested: generators plus short words.

    Words up to length 4 in rank-one lattices, length 2 in higher-rank
    lattices, single letters for the Heisenberg and finite groups.
    """
    if isinstance(g, (IntLattice, NatLattice)):
        length = 4 if g.rank == 1 else 2
    else:
        length = 1
    w = g.words(length)
    keep = ~np.all(w == g.identity, axis=1)
    return w[keep]


class _NormTable:
    """Squared operator norms of ``pi`` on a fixed finite set of elements.

    Values are stored densely by key, so set membership and lookups are
    plain indexing.
    """

    DENSE_LIMIT = 50_000_000

    def __init__(self, rep, elems):
        elems = np.asarray(elems, dtype=np.int64)
        self.codec = KeyCodec(elems)
        if self.codec.size > self.DENSE_LIMIT:
            raise SetTooLarge(f"key space of {self.codec.size} is too large for the norm table")
        keys, first = np.unique(self.codec.encode(elems, check=False), return_index=True)
        elems = elems[first]
        vals = np.empty(elems.shape[0])
        with np.errstate(all="ignore"):
            for i in range(0, elems.shape[0], _EVAL_CHUNK):
                m = eval_batch(rep, elems[i:i + _EVAL_CHUNK])
                bad = ~np.all(np.isfinite(m), axis=(1, 2))
                m[bad] = 0.0
                v = la.op_norms(m) ** 2
                v[bad] = np.inf
                vals[i:i + _EVAL_CHUNK] = v
        self.values = np.zeros(self.codec.size)
        self.values[keys] = vals
        self.mask = np.zeros(self.codec.size, dtype=bool)

    def symdiff_total(self, kf, kfs) -> float:
        """Sum of values over the symmetric difference of two key sets."""
        m = self.mask
        m[kf] = True
        out = self.values[kfs[~m[kfs]]].sum()
        m[kf] = False
        m[kfs] = True
        out += self.values[kf[~m[kf]]].sum()
        m[kfs] = False
        return float(out)


def _decay_values(rep, family, words, n_values) -> dict:
    g = rep.descriptor
    big = family.set_at(max(n_values))
    support = [big] + [g.mul(big, w[None, :]) for w in words]
    table = _NormTable(rep, np.vstack(support))
    series = {i: [] for i in range(len(words))}
    for n in n_values:
        f = family.set_at(n)
        kf = table.codec.encode(f, check=False)
        for i, w in enumerate(words):
            kfs = table.codec.encode(g.mul(f, w[None, :]), check=False)
            series[i].append((int(n), table.symdiff_total(kf, kfs) / f.shape[0]))
    return {g.label(w): series[i] for i, w in enumerate(words)}


def symdiff_decay(rep: Representation, family: FolnerFamily, s, n_list) -> list[tuple[int, float]]:
    """``(N, (1/|F_N|) sum over F_N s xor F_N of ||pi(g)||^2)`` for each N."""
    g = rep.descriptor
    s = g.element(s)
    return next(iter(_decay_values(rep, family, [s], list(n_list)).values()))


@dataclass
class DecayVerdict:
    ok: bool
    tol: float
    window_sups: dict
    report: dict  # label -> [(N, value)] at dyadic N


def _dyadic(n_max: int) -> list[int]:
    out, n = [], 1
    while n <= n_max:
        out.append(n)
        n *= 2
    if out[-1] != n_max:
        out.append(n_max)
    return out


def decay_verdict(rep, family, n_max: int, decay_tol: float, words=None) -> DecayVerdict:
    """Window sups over ``(n/8, n/4]``, ``(n/4, n/2]``, ``(n/2, n]`` must not
    increase (up to a 10% wobble from small sets) and the last one must be
    at most ``decay_tol``."""
    g = rep.descriptor
    words = decay_words(g) if words is None else np.asarray(words, dtype=np.int64).reshape(-1, g.rank)
    cuts = [max(0, n_max // 8), max(0, n_max // 4), max(1, n_max // 2), n_max]
    dense = list(range(cuts[0] + 1, n_max + 1))
    n_values = sorted(set(dense) | set(_dyadic(n_max)))
    values = _decay_values(rep, family, words, n_values)
    ok = True
    sups = {}
    report = {}
    dy = set(_dyadic(n_max))
    for label, series in values.items():
        lookup = dict(series)
        s = []
        for lo, hi in zip(cuts, cuts[1:]):
            win = [lookup[n] for n in range(lo + 1, hi + 1) if n in lookup]
            s.append(max(win) if win else 0.0)
        sups[label] = s
        mono = all(b <= DECAY_SLACK * a + 1e-300 for a, b in zip(s, s[1:]))
        ok = ok and mono and s[-1] <= decay_tol
        report[label] = [(n, v) for n, v in series if n in dy]
    return DecayVerdict(bool(ok), float(decay_tol), sups, report)


@dataclass
class RepCertificate:
    """``transform @ pi(s) @ inv(transform)`` is unitary (group) or isometric (semigroup)."""

    transform: np.ndarray
    kind: str
    per_generator_residuals: dict
    condition_number: float
    bounds: dict
    decay_report: dict
    gram: np.ndarray
    family: str
    evidence_ratio: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return max(self.per_generator_residuals.values()) if self.per_generator_residuals else 0.0


def _limit(rep, scan: BoundScan, tol) -> GramLimit:
    images = list(rep.images.values())
    if isinstance(rep.descriptor, FiniteGroupTable):
        images = list(rep._all)
    return _limit_from_averages(images, scan.grams, tol, scan.n_max)


def _certify(rep, family, scan, lim, kind, tol, decay, bounds, diag):
    f = lim.gram
    lo, hi = la.psd_bounds(f)
    if lo <= la.SINGULAR_TOL * hi:
        raise HypothesisFailed("singular", diag)
    ell = la.herm_sqrt(f)
    ell_inv = la.herm_inv_sqrt(f)
    resid_fn = la.unitary_residual if kind == "unitary" else la.isometry_residual
    residuals = {k: resid_fn(ell @ v @ ell_inv) for k, v in rep.images.items()}
    worst = max(residuals.values())
    if worst > tol:
        raise HypothesisFailed("notConverged", diag, f"generator residual {worst:.3e} > {tol:.1e}")
    return RepCertificate(
        transform=ell,
        kind=kind,
        per_generator_residuals=residuals,
        condition_number=la.condition_number(ell),
        bounds=bounds,
        decay_report=decay.report,
        gram=f,
        family=family.name,
        evidence_ratio=lim.evidence_ratio,
        extra={"decay_tol": decay.tol, "decay_window_sups": decay.window_sups,
               "gram_fixed_point_residual": lim.fixed_point_residual},
    )


def unitarize_rep(rep: Representation, family: FolnerFamily | None = None, tol: float = DEFAULT_TOL,
                  n_max: int | None = None, decay_tol: float | None = None) -> RepCertificate:
    """Unitarize a group representation from its Folner grams.

    Failure tags: ``boundC`` (grams grow), ``decay`` (translates do not
    become negligible), ``notConverged``, ``singular``. ``decay_tol``
    defaults to ``0.5 * Cest^2``.
    """
    g = rep.descriptor
    if not g.is_group:
        raise NotApplicable(f"{g.name} is a semigroup; use isometrize_semigroup_rep")
    family = family or default_family(g)
    n_max = default_rep_horizon(g) if n_max is None else int(n_max)
    scan = bound_scan(rep, family, n_max)
    diag = {"bound_scan": scan.as_dict()}
    if scan.divergent:
        raise HypothesisFailed("boundC", diag)
    decay = decay_verdict(rep, family, n_max, 0.5 * scan.c_sq if decay_tol is None else decay_tol)
    diag["decay"] = decay.window_sups
    if not decay.ok:
        raise HypothesisFailed("decay", diag)
    lim = _limit(rep, scan, tol)
    diag["evidence_ratio"] = lim.evidence_ratio
    if not lim.converged:
        raise HypothesisFailed("notConverged", diag)
    # fold the limit points of both grams into the constant
    images = list(rep.images.values())
    f_adj, ok = invariant_limit([la.adjoint(a) for a in images])
    c_sq = max(scan.c_sq, la.psd_bounds(lim.gram)[1], la.psd_bounds(f_adj)[1] if ok else 0.0)
    bounds = scan.as_dict()
    bounds["c_est"] = float(np.sqrt(c_sq))
    return _certify(rep, family, scan, lim, "unitary", tol, decay, bounds, diag)


def isometrize_semigroup_rep(rep: Representation, family: FolnerFamily | None = None, tol: float = DEFAULT_TOL,
                             n_max: int | None = None, decay_tol: float | None = None,
                             min_m: float = 1e-8) -> RepCertificate:
    """Isometric conjugate of a representation of ``N^d`` from box averages.

    Failure tags: ``boundC`` (divergent or collapsing lower bound),
    ``decay``, ``notConverged``, ``singular``. ``decay_tol`` defaults to
    ``0.5 * M^2``.
    """
    g = rep.descriptor
    if g.is_group:
        raise NotApplicable(f"{g.name} is a group; use unitarize_rep")
    family = family or default_family(g)
    n_max = default_rep_horizon(g) if n_max is None else int(n_max)
    scan = bound_scan(rep, family, n_max, min_m=min_m)
    diag = {"bound_scan": scan.as_dict()}
    if scan.divergent or scan.lower_collapse:
        raise HypothesisFailed("boundC", diag)
    decay = decay_verdict(rep, family, n_max, 0.5 * scan.M_sq if decay_tol is None else decay_tol)
    diag["decay"] = decay.window_sups
    if not decay.ok:
        raise HypothesisFailed("decay", diag)
    lim = _limit(rep, scan, tol)
    diag["evidence_ratio"] = lim.evidence_ratio
    if not lim.converged:
        raise HypothesisFailed("notConverged", diag)
    lo, hi = la.psd_bounds(lim.gram)
    bounds = scan.as_dict()
    m_sq, big_sq = min(scan.m_sq, lo), max(scan.M_sq, hi)
    bounds["m_est"] = float(np.sqrt(max(m_sq, 0.0)))
    bounds["M_est"] = float(np.sqrt(big_sq))
    return _certify(rep, family, scan, lim, "isometry", tol, decay, bounds, diag)


def cert_uniform_bound(rep: Representation, family: FolnerFamily, p: int, kappa: float, c_est: float,
                       n: int) -> tuple[bool, float]:
    """Check ``1/(C^2 sqrt(kappa)) <= s_min(pi(k))`` and ``||pi(k)|| <= C^2 sqrt(kappa)`` on ``F_N``.

    Requires the doubling pair: ``F_N F_N^-1`` inside ``F_pN`` with
    ``|F_pN| / |F_N| <= kappa``; otherwise :class:`DoublingFailed`.
    Returns ``(holds, worst_norm)``.
    """
    ok, ratio = doubling_check(family, n, p)
    if not ok:
        raise DoublingFailed(f"F_N F_N^-1 is not contained in F_{p}N at N={n}")
    if ratio > kappa:
        raise DoublingFailed(f"|F_pN|/|F_N| = {ratio:.6g} exceeds kappa = {kappa}")
    bound = c_est**2 * np.sqrt(kappa)
    f = family.set_at(n)
    worst, smallest = 0.0, np.inf
    with np.errstate(all="ignore"):
        for i in range(0, f.shape[0], _EVAL_CHUNK):
            m = eval_batch(rep, f[i:i + _EVAL_CHUNK])
            if not np.all(np.isfinite(m)):
                return False, float("inf")
            s = np.linalg.svd(m, compute_uv=False)
            worst = max(worst, float(s[:, 0].max()))
            smallest = min(smallest, float(s[:, -1].min()))
    holds = smallest >= (1 - 1e-9) / bound
    if rep.descriptor.is_group:
        holds = holds and worst <= bound * (1 + 1e-9)
    return bool(holds), worst


def translated_bound_check(rep: Representation, family: FolnerFamily | None = None, g_samples=None,
                           n_max: int | None = None) -> tuple[float, bool]:
    """Cest over right translates ``F_N g`` at dyadic N, and whether it has settled.

    ``uniform_ok`` holds when the running maximum up to ``nMax`` is within a
    factor 1.05 of the running maximum up to ``nMax/2``.
    """
    values = _translated_values(rep, family, g_samples, n_max, lambda m: np.einsum("kji,kjl->kil", m.conj(), m),
                                lambda s: float(np.linalg.eigvalsh(la.hermitian_part(s))[-1]))
    return _settled(values)


def _settled(values: dict) -> tuple[float, bool]:
    ns = sorted(values)
    top = ns[-1]
    full = max(values[n] for n in ns)
    half = max(values[n] for n in ns if n <= top // 2)
    ok = bool(np.isfinite(full) and full <= UNIFORM_RATIO * half)
    return float(np.sqrt(full)), ok


def _translated_values(rep, family, g_samples, n_max, summand, reduce) -> dict:
    """``max_g reduce(mean over F_N g of summand(pi(h)))`` for dyadic N."""
    g = rep.descriptor
    family = family or default_family(g)
    n_max = default_rep_horizon(g) if n_max is None else int(n_max)
    if g_samples is None:
        g_samples = g.words(3)
    samples = np.asarray(g_samples, dtype=np.int64).reshape(-1, g.rank)
    big = family.set_at(n_max)
    union = np.vstack([g.mul(big, s[None, :]) for s in samples])
    codec = KeyCodec(union)
    ukeys, first = np.unique(codec.encode(union, check=False), return_index=True)
    union = union[first]
    with np.errstate(all="ignore"):
        parts = [summand(eval_batch(rep, union[i:i + _EVAL_CHUNK])) for i in range(0, union.shape[0], _EVAL_CHUNK)]
    table = np.concatenate(parts)
    out = {}
    for n in _dyadic(n_max):
        f = family.set_at(n)
        best = 0.0
        for s in samples:
            idx = np.searchsorted(ukeys, codec.encode(g.mul(f, s[None, :]), check=False))
            tot = table[idx].sum(axis=0) / f.shape[0]
            val = reduce(tot) if np.all(np.isfinite(tot)) else np.inf
            best = max(best, val)
        out[n] = best
    return out
