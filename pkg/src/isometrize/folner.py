"""Discrete groups, semigroups and their Folner sets.

Elements are integer rows (``numpy`` int64 arrays); every operation is
vectorised over stacks of rows. Set algebra (translates, symmetric
differences, product sets) is exact: rows are packed into int64 keys and
compared with ``numpy`` set routines. Translations are on the right,
``F s = {f s : f in F}``.

Heisenberg multiplication uses the cocycle
``(a, b, c)(a', b', c') = (a + a', b + b', c + c' + a b')``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import NotApplicable, OutOfDomain, SchemaError, SetTooLarge

MAX_SET_SIZE = 10_000_000
MAX_PAIRS = 200_000_000
_CHUNK = 2_000_000


def as_elements(x, rank: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.int64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size == rank else arr.reshape(-1, 1)
    if arr.shape[-1] != rank:
        raise OutOfDomain(f"elements need {rank} coordinates, got shape {arr.shape}")
    return arr


class GroupDescriptor:
    """A finitely generated group or semigroup acting on integer tuples."""

    name: str = ""
    kind: str = "group"  # or "semigroup"
    rank: int = 1

    def __init__(self):
        self.generators: dict[str, tuple[int, ...]] = {}

    @property
    def is_group(self) -> bool:
        return self.kind == "group"

    @property
    def identity(self) -> np.ndarray:
        return np.zeros(self.rank, dtype=np.int64)

    def mul(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def inv(self, a) -> np.ndarray:
        raise NotApplicable(f"{self.name} is a semigroup, elements have no inverses")

    def in_domain(self, a) -> np.ndarray:
        return np.ones(np.asarray(a).shape[:-1], dtype=bool)

    def sample(self, rng, size: int) -> np.ndarray:
        return rng.integers(-40, 41, size=(size, self.rank))

    def element(self, x) -> np.ndarray:
        """Validate a single element (tuple, int, or generator name)."""
        if isinstance(x, str):
            letters = self.letters()
            if x not in letters:
                raise OutOfDomain(f"unknown generator {x!r} for {self.name}")
            x = letters[x]
        arr = as_elements(x, self.rank)
        if arr.shape[0] != 1 or not self.in_domain(arr).all():
            raise OutOfDomain(f"{x!r} is not an element of {self.name}")
        return arr[0]

    def letters(self) -> dict[str, np.ndarray]:
        """Generators, plus their inverses (named ``<g>^-1``) for groups."""
        out = {k: np.asarray(v, dtype=np.int64) for k, v in self.generators.items()}
        if self.is_group:
            for k, v in list(out.items()):
                inv = self.inv(v[None, :])[0]
                if not np.array_equal(inv, v):
                    out[k + "^-1"] = inv
        return out

    def words(self, length: int) -> np.ndarray:
        """Distinct elements expressible as words of at most ``length`` letters."""
        letters = np.array(list(self.letters().values()), dtype=np.int64).reshape(-1, self.rank)
        layer = self.identity[None, :]
        seen = layer
        for _ in range(length):
            layer = self.mul(layer[:, None, :], letters[None, :, :]).reshape(-1, self.rank)
            layer = np.unique(layer, axis=0)
            seen = np.unique(np.vstack([seen, layer]), axis=0)
        return seen

    def label(self, elem) -> str:
        """Generator name when ``elem`` is a generator (or its inverse), else the tuple."""
        e = np.asarray(elem, dtype=np.int64).reshape(-1)
        for name, v in self.letters().items():
            if np.array_equal(v, e):
                return name
        return "(" + ",".join(str(int(x)) for x in e) + ")"

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class IntLattice(GroupDescriptor):
    kind = "group"

    def __init__(self, d: int):
        super().__init__()
        if not 1 <= d <= 4:
            raise ValueError("lattice rank must be in 1..4")
        self.rank = d
        self.name = f"Z^{d}"
        self.generators = {f"e{i + 1}": tuple(int(i == j) for j in range(d)) for i in range(d)}

    def mul(self, a, b):
        return np.asarray(a) + np.asarray(b)

    def inv(self, a):
        return -np.asarray(a)


class NatLattice(GroupDescriptor):
    kind = "semigroup"

    def __init__(self, d: int):
        super().__init__()
        if not 1 <= d <= 4:
            raise ValueError("lattice rank must be in 1..4")
        self.rank = d
        self.name = f"N^{d}"
        self.generators = {f"e{i + 1}": tuple(int(i == j) for j in range(d)) for i in range(d)}

    def mul(self, a, b):
        return np.asarray(a) + np.asarray(b)

    def in_domain(self, a):
        return np.all(np.asarray(a) >= 0, axis=-1)

    def sample(self, rng, size):
        return rng.integers(0, 41, size=(size, self.rank))


class Heisenberg3(GroupDescriptor):
    kind = "group"
    rank = 3

    def __init__(self):
        super().__init__()
        self.name = "heisenberg3"
        self.generators = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}

    def mul(self, a, b):
        a = np.asarray(a)
        b = np.asarray(b)
        a, b = np.broadcast_arrays(a, b)
        out = a + b
        out[..., 2] += a[..., 0] * b[..., 1]
        return out

    def inv(self, a):
        a = np.asarray(a)
        out = -a
        out[..., 2] += a[..., 0] * a[..., 1]
        return out


class FiniteGroupTable(GroupDescriptor):
    """A finite group given by its multiplication table (0-based indices)."""

    kind = "group"
    rank = 1

    def __init__(self, table, name: str = "finite"):
        super().__init__()
        tab = np.asarray(table, dtype=np.int64)
        n = tab.shape[0] if tab.ndim == 2 else 0
        if tab.ndim != 2 or tab.shape != (n, n) or n == 0:
            raise SchemaError("multiplication table must be a non-empty square array")
        if tab.min() < 0 or tab.max() >= n:
            raise SchemaError("table entries must be indices in 0..n-1")
        self.table = tab
        self.order = n
        self.name = name
        ids = [e for e in range(n) if np.array_equal(tab[e], np.arange(n)) and np.array_equal(tab[:, e], np.arange(n))]
        if not ids:
            raise SchemaError("table has no identity element")
        self.identity_index = ids[0]
        inverses = np.full(n, -1, dtype=np.int64)
        for a in range(n):
            hits = np.flatnonzero(tab[a] == self.identity_index)
            if hits.size != 1 or tab[hits[0], a] != self.identity_index:
                raise SchemaError(f"element {a} has no two-sided inverse")
            inverses[a] = hits[0]
        self.inverses = inverses
        if n <= 64:
            ab = tab[:, :, None]  # (a b) then c
            lhs = tab[ab, np.arange(n)[None, None, :]]
            rhs = tab[np.arange(n)[:, None, None], tab[None, :, :]]
            if not np.array_equal(lhs, rhs):
                raise SchemaError("table is not associative")
        else:
            rng = np.random.default_rng(0)
            a, b, c = rng.integers(0, n, size=(3, 20_000))
            if not np.array_equal(tab[tab[a, b], c], tab[a, tab[b, c]]):
                raise SchemaError("table is not associative")
        self.generators = {f"g{i}": (i,) for i in range(n)}

    @classmethod
    def from_file(cls, path) -> "FiniteGroupTable":
        path = Path(path)
        try:
            table = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls(table, name=f"finite:{path}")

    @property
    def identity(self):
        return np.array([self.identity_index], dtype=np.int64)

    def mul(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
        return self.table[a[..., 0], b[..., 0]][..., None]

    def inv(self, a):
        return self.inverses[np.asarray(a)[..., 0]][..., None]

    def in_domain(self, a):
        a = np.asarray(a)[..., 0]
        return (a >= 0) & (a < self.order)

    def sample(self, rng, size):
        return rng.integers(0, self.order, size=(size, 1))


_NAME_RE = re.compile(r"^([ZN])\^([1-4])$")


def parse_group(name: str, base_dir=None) -> GroupDescriptor:
    """Descriptor from a CLI/file name: ``Z^d``, ``N^d``, ``heisenberg3``, ``finite:<file>``."""
    m = _NAME_RE.match(name.strip())
    if m:
        d = int(m.group(2))
        return IntLattice(d) if m.group(1) == "Z" else NatLattice(d)
    if name.strip().lower() == "heisenberg3":
        return Heisenberg3()
    if name.startswith("finite:"):
        path = Path(name[len("finite:"):])
        if not path.is_absolute() and base_dir is not None and (Path(base_dir) / path).exists():
            path = Path(base_dir) / path
        if not path.exists():
            raise SchemaError(f"multiplication table file {path} not found")
        return FiniteGroupTable.from_file(path)
    raise SchemaError(f"unknown group descriptor {name!r}")


def check_associativity(g: GroupDescriptor, samples: int = 1000, rng=None) -> bool:
    rng = np.random.default_rng(0) if rng is None else rng
    a, b, c = (g.sample(rng, samples) for _ in range(3))
    return bool(np.array_equal(g.mul(g.mul(a, b), c), g.mul(a, g.mul(b, c))))


def check_inverses(g: GroupDescriptor, samples: int = 1000, rng=None) -> bool:
    rng = np.random.default_rng(0) if rng is None else rng
    a = g.sample(rng, samples)
    e = np.broadcast_to(g.identity, a.shape)
    return bool(np.array_equal(g.mul(a, g.inv(a)), e) and np.array_equal(g.mul(g.inv(a), a), e))


# -- exact set algebra ---------------------------------------------------------


def encode(*arrays):
    """Pack integer rows into int64 keys using bounds shared by all ``arrays``."""
    stacked = [np.asarray(a, dtype=np.int64) for a in arrays]
    nonempty = [a for a in stacked if a.size]
    if not nonempty:
        return [np.zeros(0, dtype=np.int64) for _ in stacked]
    lo = np.min([a.min(axis=0) for a in nonempty], axis=0)
    hi = np.max([a.max(axis=0) for a in nonempty], axis=0)
    span = (hi - lo + 1).astype(object)
    total = 1
    for s in span:
        total *= int(s)
    if total >= 2**62:
        raise SetTooLarge("coordinate range too wide to encode")
    strides = np.ones(len(span), dtype=np.int64)
    for i in range(len(span) - 2, -1, -1):
        strides[i] = strides[i + 1] * int(span[i + 1])
    return [((a - lo) * strides).sum(axis=1) if a.size else np.zeros(0, dtype=np.int64) for a in stacked]


class KeyCodec:
    """Fixed-bounds key encoding, so keys from separate calls are comparable."""

    def __init__(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        self.lo = rows.min(axis=0)
        self.hi = rows.max(axis=0)
        span = self.hi - self.lo + 1
        total = 1
        for x in span:
            total *= int(x)
        if total >= 2**62:
            raise SetTooLarge("coordinate range too wide to encode")
        self.size = total
        self.strides = np.ones(len(span), dtype=np.int64)
        for i in range(len(span) - 2, -1, -1):
            self.strides[i] = self.strides[i + 1] * int(span[i + 1])

    def inside(self, rows) -> np.ndarray:
        rows = np.asarray(rows)
        return np.all((rows >= self.lo) & (rows <= self.hi), axis=-1)

    def encode(self, rows, check: bool = True) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        if check and not self.inside(rows).all():
            raise ValueError("rows outside the codec bounds")
        return ((rows - self.lo) * self.strides).sum(axis=-1)


def _check_size(n: int):
    if n > MAX_SET_SIZE:
        raise SetTooLarge(f"set of {n} elements exceeds the cap of {MAX_SET_SIZE}")


class FolnerFamily:
    """A descriptor plus a rule producing the N-th Folner set as distinct rows."""

    def __init__(self, descriptor: GroupDescriptor, rule: Callable[[int], np.ndarray], name: str,
                 symmetric: bool | None = None, nested: bool = True):
        self.descriptor = descriptor
        self.rule = rule
        self.name = name
        self.symmetric = symmetric
        self.nested = nested
        self._cache: dict[int, np.ndarray] = {}

    def set_at(self, n: int) -> np.ndarray:
        n = int(n)
        if n < 1:
            raise ValueError("N must be at least 1")
        if n not in self._cache:
            s = np.asarray(self.rule(n), dtype=np.int64)
            _check_size(s.shape[0])
            if s.shape[0] == 0:
                raise ValueError(f"empty Folner set at N={n}")
            s.setflags(write=False)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[n] = s
        return self._cache[n]

    def __repr__(self):
        return f"<FolnerFamily {self.name}>"


def _box(ranges) -> np.ndarray:
    sizes = [hi - lo + 1 for lo, hi in ranges]
    total = int(np.prod(sizes, dtype=object))
    _check_size(total)
    grids = np.meshgrid(*[np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in ranges], indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def standard_family(g: GroupDescriptor) -> FolnerFamily:
    """Built-in Folner sequence for each descriptor kind.

    Z^d: boxes {-N..N}^d; N^d: boxes {0..N-1}^d; heisenberg3: |a|,|b| <= N,
    |c| <= N^2 (not symmetric, see :func:`symmetrized`); finite: the group.
    """
    if isinstance(g, IntLattice):
        return FolnerFamily(g, lambda n: _box([(-n, n)] * g.rank), f"{g.name} boxes", symmetric=True)
    if isinstance(g, NatLattice):
        return FolnerFamily(g, lambda n: _box([(0, n - 1)] * g.rank), f"{g.name} boxes", symmetric=None)
    if isinstance(g, Heisenberg3):
        return FolnerFamily(g, lambda n: _box([(-n, n), (-n, n), (-n * n, n * n)]), "heisenberg3 boxes",
                            symmetric=False)
    if isinstance(g, FiniteGroupTable):
        return FolnerFamily(g, lambda n: np.arange(g.order, dtype=np.int64)[:, None], f"{g.name} (whole group)",
                            symmetric=True)
    raise TypeError(f"no built-in Folner family for {g!r}")


def symmetrized(family: FolnerFamily) -> FolnerFamily:
    """Close every set of ``family`` under inversion (``F_N u F_N^-1``)."""
    g = family.descriptor
    if not g.is_group:
        raise NotApplicable("only group Folner families can be symmetrized")
    if family.symmetric:
        return family

    def rule(n):
        f = family.set_at(n)
        return np.unique(np.vstack([f, g.inv(f)]), axis=0)

    return FolnerFamily(g, rule, family.name + " (symmetrized)", symmetric=True, nested=family.nested)


def folner_set(family: FolnerFamily, n: int) -> np.ndarray:
    return family.set_at(n)


def right_translate(family_or_set, s, descriptor=None) -> np.ndarray:
    f = family_or_set
    return descriptor.mul(f, np.asarray(s)[None, :])


class TranslateCounts(NamedTuple):
    size_f: int
    size_fs: int
    f_minus_fs: int
    fs_minus_f: int


def translate_counts(family: FolnerFamily, n: int, s) -> TranslateCounts:
    g = family.descriptor
    s = g.element(s)
    f = family.set_at(n)
    fs = g.mul(f, s[None, :])
    kf, kfs = encode(f, fs)
    kfs_u = np.unique(kfs)
    in_fs = np.isin(kf, kfs_u)
    in_f = np.isin(kfs_u, kf)
    return TranslateCounts(f.shape[0], kfs_u.size, int((~in_fs).sum()), int((~in_f).sum()))


def symmetric_difference(family: FolnerFamily, n: int, s) -> np.ndarray:
    """Elements of ``F_N s`` xor ``F_N`` (sorted by key)."""
    g = family.descriptor
    s = g.element(s)
    f = family.set_at(n)
    fs = g.mul(f, s[None, :])
    kf, kfs = encode(f, fs)
    out = np.vstack([f[~np.isin(kf, kfs)], fs[~np.isin(kfs, kf)]])
    return np.unique(out, axis=0)


def folner_ratio(family: FolnerFamily, n: int, s) -> float:
    """``|F_N s xor F_N| / |F_N|`` by enumeration."""
    c = translate_counts(family, n, s)
    return (c.f_minus_fs + c.fs_minus_f) / c.size_f


class SFCRatio(NamedTuple):
    strong: float  # |F \ Fs| / |F|
    weak: float  # |Fs \ F| / |F|
    counts: TranslateCounts


def sfc_ratio(family: FolnerFamily, n: int, s) -> SFCRatio:
    c = translate_counts(family, n, s)
    return SFCRatio(c.f_minus_fs / c.size_f, c.fs_minus_f / c.size_f, c)


def symmetry_check(family: FolnerFamily, n: int) -> bool:
    g = family.descriptor
    if not g.is_group:
        raise NotApplicable(f"symmetry is undefined for the semigroup {g.name}")
    f = family.set_at(n)
    kf, kinv = encode(f, g.inv(f))
    return bool(np.isin(kinv, kf).all())


def is_nested(family: FolnerFamily, n: int) -> bool:
    """``F_n`` is contained in ``F_{n+1}``."""
    a, b = family.set_at(n), family.set_at(n + 1)
    ka, kb = encode(a, b)
    return bool(np.isin(ka, kb).all())


def _pair_chunks(a: np.ndarray, b: np.ndarray, g: GroupDescriptor):
    if a.shape[0] * b.shape[0] > MAX_PAIRS:
        raise SetTooLarge(f"{a.shape[0]} x {b.shape[0]} products exceed the cap of {MAX_PAIRS}")
    step = max(1, _CHUNK // max(1, b.shape[0]))
    for i in range(0, a.shape[0], step):
        yield g.mul(a[i:i + step, None, :], b[None, :, :]).reshape(-1, g.rank)


def product_set(a: np.ndarray, b: np.ndarray, g: GroupDescriptor) -> np.ndarray:
    """Distinct elements of ``A . B``."""
    lo = hi = None
    for chunk in _pair_chunks(a, b, g):
        cl, ch = chunk.min(axis=0), chunk.max(axis=0)
        lo = cl if lo is None else np.minimum(lo, cl)
        hi = ch if hi is None else np.maximum(hi, ch)
    keys = np.zeros(0, dtype=np.int64)
    box = np.vstack([lo, hi])
    for chunk in _pair_chunks(a, b, g):
        k = encode(box, chunk)[1]
        keys = np.union1d(keys, k)
        _check_size(keys.size)
    # decode
    span = hi - lo + 1
    out = np.empty((keys.size, g.rank), dtype=np.int64)
    rem = keys.copy()
    for i in range(g.rank - 1, -1, -1):
        out[:, i] = rem % span[i] + lo[i]
        rem //= span[i]
    return out


def doubling_check(family: FolnerFamily, n: int, p: int):
    """Return ``(F_N F_N^-1 subset of F_pN, |F_pN| / |F_N|)``."""
    g = family.descriptor
    if not g.is_group:
        raise NotApplicable(f"doubling is undefined for the semigroup {g.name}")
    f = family.set_at(n)
    big = family.set_at(p * n)
    finv = g.inv(f)
    lo, hi = big.min(axis=0), big.max(axis=0)
    ok = True
    for chunk in _pair_chunks(f, finv, g):
        if np.any(chunk < lo) or np.any(chunk > hi):
            ok = False
            break
        kb, kc = encode(big, chunk)
        if not np.isin(kc, kb).all():
            ok = False
            break
    return ok, big.shape[0] / f.shape[0]


def tempelman_ratio(family: FolnerFamily, n: int) -> float:
    """``|F_N^-1 F_N| / |F_N|``."""
    g = family.descriptor
    if not g.is_group:
        raise NotApplicable(f"Tempelman ratio is undefined for the semigroup {g.name}")
    f = family.set_at(n)
    return product_set(g.inv(f), f, g).shape[0] / f.shape[0]


@dataclass
class FolnerRow:
    n: int
    item: str
    value: float


def folner_table(family: FolnerFamily, n_list, generators=None) -> list[FolnerRow]:
    """Folner and SFC ratios per generator, for reports."""
    g = family.descriptor
    names = list(generators or g.generators)
    rows = []
    for n in n_list:
        for name in names:
            r = sfc_ratio(family, n, name)
            rows.append(FolnerRow(n, f"ratio[{name}]", r.strong + r.weak))
            rows.append(FolnerRow(n, f"sfc[{name}]", r.strong))
    return rows
