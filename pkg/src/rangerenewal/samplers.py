"""Parametric laws for every regime and reproducible symbol streams.

Atom ranks ``r = 1, 2, ...`` carry non-increasing masses; the emitted atom
index is ``r - 1``.  A law materializes the heaviest atoms in a table (the
"head") and either drops the rest, when its mass is below ``epsilon``, or
keeps it as an exact tail that is sampled by rejection from a continuous
envelope.  Diffuse draws are emitted as ``Fresh`` symbols.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate
from scipy.special import zeta

from .symbols import Symbol, FreshIdAllocator, decode
from .theory import AtomCardinality, Regime

DEFAULT_EPSILON = 1e-12
HEAD_CAP = 2 ** 18
MAX_ATOMS = 10 ** 9
BLOCK_SIZE = 2 ** 16
# Atoms of rank >= 2**62 have mass < 2**-62; each is emitted under a unique
# code above FAR_BASE instead of its (unrepresentable) index.
FAR_BASE = 2 ** 62
_LOG_FAR = math.log(FAR_BASE)
_EXPLICIT_TERMS = 2 ** 16


# ---------------------------------------------------------------------------
# families


class Family:
    """Base class for law families.  Atom families expose a rank pmf."""

    gamma: float = 0.0
    infinite = False

    def to_dict(self) -> dict:
        raise NotImplementedError


class _InfiniteAtoms(Family):
    infinite = True

    def weight(self, x):
        """Unnormalized mass at (real) rank ``x >= 1``."""
        raise NotImplementedError

    def log_weight(self, x):
        return np.log(self.weight(x))

    def tail_weight(self, m: int) -> float:
        """Sum of ``weight(r)`` over ranks ``r >= m``."""
        raise NotImplementedError

    def sample_tail(self, rng: np.random.Generator, m: int, size: int) -> np.ndarray:
        """Exact draws from the ranks ``>= m``, as float64 ranks (may exceed 2**62)."""
        raise NotImplementedError

    @property
    def total_weight(self) -> float:
        return self.tail_weight(1)


@dataclass(frozen=True)
class ZipfLike(_InfiniteAtoms):
    """``p_r`` proportional to ``r**(-1/gamma)``; index ``gamma`` in (0, 1)."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"ZipfLike needs 0 < gamma < 1, got {self.gamma}")

    @property
    def exponent(self) -> float:
        return 1.0 / self.gamma

    def weight(self, x):
        return np.power(np.asarray(x, dtype=float), -self.exponent)

    def log_weight(self, x):
        return -self.exponent * np.log(x)

    def tail_weight(self, m: int) -> float:
        return float(zeta(self.exponent, m))

    def sample_tail(self, rng, m, size):
        # Envelope: continuous Pareto on [m, inf), floored.  The ratio of the
        # target to the floored envelope is at most (1 + 1/m)**a.
        a = self.exponent
        bound = math.exp(a * math.log1p(1.0 / m))
        out = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            u = 1.0 - rng.random(todo.size)
            x = m * np.exp(-np.log(u) / (a - 1.0))
            r = np.floor(np.minimum(x, 2.0 * FAR_BASE))
            ratio = (a - 1.0) / (r * -np.expm1((1.0 - a) * np.log1p(1.0 / r)))
            r[x >= FAR_BASE] = np.inf
            ok = rng.random(todo.size) * bound <= ratio
            out[todo[ok]] = r[ok]
            todo = todo[~ok]
        return out

    def to_dict(self):
        return {"family": "ZipfLike", "gamma": self.gamma}


@dataclass(frozen=True)
class Geometric(_InfiniteAtoms):
    """``p_r = (1 - q) q**(r - 1)``; index 0."""

    q: float
    gamma: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"Geometric needs 0 < q < 1, got {self.q}")

    def weight(self, x):
        return np.power(self.q, np.asarray(x, dtype=float) - 1.0)

    def log_weight(self, x):
        return (np.asarray(x, dtype=float) - 1.0) * math.log(self.q)

    def tail_weight(self, m: int) -> float:
        return self.q ** (m - 1) / (1.0 - self.q)

    def sample_tail(self, rng, m, size):
        return (m - 1 + rng.geometric(1.0 - self.q, size)).astype(float)

    def to_dict(self):
        return {"family": "Geometric", "q": self.q}


@dataclass(frozen=True)
class LogCorrected(_InfiniteAtoms):
    """``p_r`` proportional to ``1 / (r log(r + 2)**2)``; index 1."""

    gamma: float = field(default=1.0, init=False)

    def weight(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return 1.0 / (x * np.log(x + 2.0) ** 2)

    def log_weight(self, x):
        x = np.asarray(x, dtype=float)
        return -np.log(x) - 2.0 * np.log(np.log(x + 2.0))

    def tail_weight(self, m: int) -> float:
        # Explicit terms, then the tail integral: the antiderivative of
        # 1/((x+2) log(x+2)^2) is exact and the remainder decays like x^-2.
        stop = m + _EXPLICIT_TERMS
        s = _chunked_sum(self.weight, m, stop)
        def rest(u):
            x = math.exp(u)
            return 2.0 / ((x + 2.0) * math.log(x + 2.0) ** 2)

        integral = 1.0 / math.log(stop + 2.0) + integrate.quad(rest, math.log(stop), 700.0, limit=200)[0]
        x = float(stop)
        h = 1e-3 * x
        deriv = (self.weight(x + h) - self.weight(x - h)) / (2 * h)
        return float(s + integral + 0.5 * self.weight(x) - deriv / 12.0)

    def sample_tail(self, rng, m, size):
        # Envelope density proportional to 1/((x+2) log(x+2)^2) on [m, inf):
        # survival log(m+2)/log(x+2), so log(x+2) = log(m+2)/U.
        lm = math.log(m + 2.0)
        bound = float(self._ratio(np.array([float(m)]))[0]) * (1.0 + 1e-12)
        out = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            u = 1.0 - rng.random(todo.size)
            logx2 = lm / u
            far = logx2 > _LOG_FAR
            r = np.floor(np.exp(np.minimum(logx2, _LOG_FAR)) - 2.0)
            r = np.maximum(r, m)
            ratio = np.where(far, 1.0, self._ratio(r))
            ok = rng.random(todo.size) * bound <= ratio
            vals = np.where(far, np.inf, r)
            out[todo[ok]] = vals[ok]
            todo = todo[~ok]
        return out

    @staticmethod
    def _ratio(r):
        """Target mass over floored envelope mass at rank ``r`` (up to constants)."""
        return np.log(r + 3.0) / (r * np.log(r + 2.0) * np.log1p(1.0 / (r + 2.0)))

    def to_dict(self):
        return {"family": "LogCorrected"}


@dataclass(frozen=True)
class FiniteUniform(Family):
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= MAX_ATOMS:
            raise ValueError(f"FiniteUniform needs 1 <= m <= {MAX_ATOMS}, got {self.m}")

    def to_dict(self):
        return {"family": "FiniteUniform", "m": self.m}


@dataclass(frozen=True)
class PureDiffuse(Family):
    def to_dict(self):
        return {"family": "PureDiffuse"}


@dataclass(frozen=True)
class Mixed(Family):
    """Fresh draw with probability ``1 - atom_mass``, else an atom of ``inner``."""

    atom_mass: float
    inner: Family

    def __post_init__(self):
        if not 0.0 < self.atom_mass < 1.0:
            raise ValueError(f"Mixed needs 0 < atom_mass < 1, got {self.atom_mass}")
        if isinstance(self.inner, (Mixed, PureDiffuse)):
            raise ValueError("Mixed needs an atomic inner law")

    @property
    def gamma(self):
        return self.inner.gamma

    def to_dict(self):
        return {"family": "Mixed", "atomMass": self.atom_mass, "inner": self.inner.to_dict()}


def family_from_dict(spec: Mapping) -> Family:
    """Parse ``{"family": "ZipfLike", "gamma": 0.5}`` and friends."""
    try:
        name = spec["family"]
        if name == "ZipfLike":
            return ZipfLike(float(spec["gamma"]))
        if name == "Geometric":
            return Geometric(float(spec["q"]))
        if name == "LogCorrected":
            return LogCorrected()
        if name == "FiniteUniform":
            return FiniteUniform(int(spec["m"]))
        if name == "PureDiffuse":
            return PureDiffuse()
        if name == "Mixed":
            return Mixed(float(spec["atomMass"]), family_from_dict(spec["inner"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed law spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown law family {spec.get('family')!r}")


# ---------------------------------------------------------------------------
# materialized laws


@dataclass(frozen=True, eq=False)
class RegularLaw:
    """A family with its head table materialized.

    ``probs[j]`` is the absolute mass of atom index ``j`` (including the
    atom-mass factor); ``tail_mass`` is the exact absolute mass of the atoms
    beyond the head (zero when the tail was dropped); ``dropped_mass`` is the
    relative mass discarded before renormalizing, an upper bound on the total
    variation distance to the untruncated family.
    """

    family: Family
    epsilon: float
    probs: np.ndarray
    tail_mass: float
    dropped_mass: float
    atom_mass: float
    atoms: Family | None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def J(self) -> int:
        return int(self.probs.size)

    @property
    def diffuse_mass(self) -> float:
        return 1.0 - self.atom_mass

    @property
    def gamma(self) -> float:
        return self.family.gamma

    @property
    def has_tail(self) -> bool:
        return self.tail_mass > 0.0

    def regime(self) -> Regime:
        if self.atoms is None:
            return Regime(0.0, 0.0, AtomCardinality.EMPTY)
        if not self.atoms.infinite:
            return Regime(0.0, self.atom_mass, AtomCardinality.FINITE)
        return Regime(self.atoms.gamma, self.atom_mass, AtomCardinality.INFINITE)

    def prob(self, x):
        """Absolute mass at real rank ``x`` beyond the head (tail laws only)."""
        fam = self.atoms
        return self.atom_mass * fam.weight(x) / self._total

    @property
    def _total(self) -> float:
        return _total_weight(self.atoms)

    def atom_sum(self, f: Callable[[np.ndarray], np.ndarray], slope_at_zero: float = 0.0) -> float:
        """``sum_j f(p_j)`` over all atoms, head and tail.

        ``f`` maps an array of masses to values and must be smooth with
        ``f(0) = 0`` and ``f'(0) = slope_at_zero``.  Tail atoms contribute
        ``slope * tail_mass`` plus the sum of ``f(p) - slope p``; the latter
        is summed explicitly for 2**16 ranks and then by Euler-Maclaurin with
        the integral taken in log-rank.
        """
        total = float(np.sum(f(self.probs))) if self.J else 0.0
        if not self.has_tail:
            return total
        slope = slope_at_zero

        def rest(x):
            p = self.prob(x)
            return f(p) - slope * p

        m = self.J + 1
        stop = m + _EXPLICIT_TERMS
        total += slope * self.tail_mass
        total += _chunked_sum(rest, m, stop)
        x0 = float(stop)
        integrand = lambda u: float(rest(np.exp(u))) * math.exp(u)
        # far out, f(p) - slope p is pure round-off and quad flags the noise;
        # only its error estimate matters
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            integral, err = integrate.quad(integrand, math.log(x0), 700.0, limit=400)
        if err > 1e-9 * max(1.0, abs(total)):
            warnings.warn(f"tail integral error estimate {err:.3g}", RuntimeWarning, stacklevel=2)
        h = 1e-3 * x0
        deriv = (float(rest(x0 + h)) - float(rest(x0 - h))) / (2 * h)
        total += integral + 0.5 * float(rest(x0)) - deriv / 12.0
        return total

    def describe(self) -> dict:
        return {"law": self.family.to_dict(), "epsilon": self.epsilon, "J": self.J,
                "tailMass": self.tail_mass, "droppedMass": self.dropped_mass}


_TOTALS: dict = {}


def _total_weight(fam: _InfiniteAtoms) -> float:
    key = fam
    if key not in _TOTALS:
        _TOTALS[key] = fam.total_weight
    return _TOTALS[key]


def _chunked_sum(fn, start: int, stop: int, chunk: int = 2 ** 20) -> float:
    s = 0.0
    for lo in range(start, stop, chunk):
        x = np.arange(lo, min(stop, lo + chunk), dtype=float)
        s += float(np.sum(fn(x)))
    return s


def build_law(family: Family, epsilon: float = DEFAULT_EPSILON, head_cap: int = HEAD_CAP) -> RegularLaw:
    """Materialize ``family``.

    The head covers the ranks up to the first ``J`` whose residual mass is
    below ``epsilon`` (relative to the atomic part); that residual is
    dropped and the head renormalized.  If that ``J`` would exceed
    ``head_cap``, the head stops at ``head_cap`` and the remaining mass is
    kept as an exact tail.
    """
    if not 0.0 < epsilon <= 1e-6:
        raise ValueError(f"epsilon must lie in (0, 1e-6], got {epsilon}")
    if head_cap < 1 or head_cap > MAX_ATOMS:
        raise ValueError(f"head_cap must lie in [1, {MAX_ATOMS}], got {head_cap}")

    if isinstance(family, Mixed):
        atom_mass, atoms = family.atom_mass, family.inner
    elif isinstance(family, PureDiffuse):
        return RegularLaw(family, epsilon, np.zeros(0), 0.0, 0.0, 0.0, None)
    else:
        atom_mass, atoms = 1.0, family

    if isinstance(atoms, FiniteUniform):
        probs = np.full(atoms.m, atom_mass / atoms.m)
        return RegularLaw(family, epsilon, probs, 0.0, 0.0, atom_mass, atoms)

    total = _total_weight(atoms)
    J = _head_size(atoms, total, epsilon, head_cap)
    weights = atoms.weight(np.arange(1, J + 1, dtype=float))
    residual = atoms.tail_weight(J + 1) / total
    if residual < epsilon:
        probs = atom_mass * weights / weights.sum()
        return RegularLaw(family, epsilon, probs, 0.0, residual, atom_mass, atoms)
    probs = atom_mass * weights / total
    tail = atom_mass - float(probs.sum())
    return RegularLaw(family, epsilon, probs, tail, 0.0, atom_mass, atoms)


def _head_size(atoms: _InfiniteAtoms, total: float, epsilon: float, head_cap: int) -> int:
    if atoms.tail_weight(head_cap + 1) / total >= epsilon:
        return head_cap
    lo, hi = 0, head_cap  # residual(lo) >= eps > residual(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if atoms.tail_weight(mid + 1) / total < epsilon:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# streams


def child_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for replica (or shard) ``index`` of ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table ``(accept, alias)`` for sampling ``probs`` in O(1)."""
    n = len(probs)
    scaled = (np.asarray(probs, dtype=float) * n / np.sum(probs)).tolist()
    accept = [1.0] * n
    alias = list(range(n))
    small = [i for i, w in enumerate(scaled) if w < 1.0]
    large = [i for i, w in enumerate(scaled) if w >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        accept[s] = scaled[s]
        alias[s] = g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    return np.array(accept), np.array(alias, dtype=np.int64)


class _Categories:
    """Alias sampler over [head atoms..., tail, diffuse]."""

    def __init__(self, law: RegularLaw):
        self.law = law
        self.uniform_head = isinstance(law.atoms, FiniteUniform)
        if self.uniform_head:
            weights = np.array([law.atom_mass, law.diffuse_mass])
        else:
            weights = np.concatenate((law.probs, [law.tail_mass, law.diffuse_mass]))
        self.accept, self.alias = alias_table(weights)

    def draw(self, rng: np.random.Generator, size: int):
        """Return ``(codes, diffuse_mask, tail_mask)``; masked codes are placeholders."""
        col = rng.integers(0, self.accept.size, size)
        coin = rng.random(size)
        cat = np.where(coin < self.accept[col], col, self.alias[col])
        if self.uniform_head:
            diffuse = cat == 1
            codes = np.zeros(size, dtype=np.int64)
            atoms = ~diffuse
            codes[atoms] = rng.integers(0, self.law.atoms.m, int(atoms.sum()))
            return codes, diffuse, np.zeros(size, dtype=bool)
        J = self.law.J
        return cat.astype(np.int64), cat == J + 1, cat == J


class SeededStream:
    """Reproducible i.i.d. stream from a law.

    Symbols are produced in blocks of ``BLOCK_SIZE``; block ``b`` uses its
    own generator seeded by ``(seed, b)``, so the sequence depends only on
    the seed and the position, never on how it is requested.  A shard can
    start at any block and draw fresh ids from its own allocator.
    """

    def __init__(self, law: RegularLaw, seed: int, ids: FreshIdAllocator | None = None,
                 start_block: int = 0):
        self.law = law
        self.seed = int(seed)
        self.ids = ids if ids is not None else FreshIdAllocator()
        if "categories" not in law._cache:
            law._cache["categories"] = _Categories(law)
        self._cats = law._cache["categories"]
        self._block = start_block
        self._buf = np.zeros(0, dtype=np.int64)
        self._pos_in_buf = 0
        self.position = 0
        self.generated = 0

    def _next_block(self) -> np.ndarray:
        rng = np.random.default_rng([self.seed, self._block])
        self._block += 1
        codes, diffuse, tail = self._cats.draw(rng, BLOCK_SIZE)
        special = diffuse.copy()
        tail_idx = np.flatnonzero(tail)
        if tail_idx.size:
            ranks = self.law.atoms.sample_tail(rng, self.law.J + 1, tail_idx.size)
            near = ranks < FAR_BASE
            codes[tail_idx[near]] = ranks[near].astype(np.int64) - 1
            special[tail_idx[~near]] = True
        # fresh ids, and unique codes for far-tail atoms, in stream order
        idx = np.flatnonzero(special)
        if idx.size:
            ids = np.arange(idx.size, dtype=np.int64)
            r = self.ids.take(idx.size)
            ids = r.start + r.step * ids
            codes[idx] = np.where(diffuse[idx], -1 - ids, FAR_BASE + ids)
        self.generated += BLOCK_SIZE
        return codes

    def sample_codes(self, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be >= 0")
        parts = []
        need = count
        while need:
            avail = self._buf.size - self._pos_in_buf
            if avail == 0:
                self._buf = self._next_block()
                self._pos_in_buf = 0
                avail = self._buf.size
            take = min(avail, need)
            parts.append(self._buf[self._pos_in_buf:self._pos_in_buf + take])
            self._pos_in_buf += take
            need -= take
        self.position += count
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def sample(self, count: int) -> list[Symbol]:
        return [decode(c) for c in self.sample_codes(count).tolist()]


def sample(stream: SeededStream, count: int) -> list[Symbol]:
    return stream.sample(count)


# ---------------------------------------------------------------------------
# index check


def empirical_index_oracle(law: RegularLaw | Family, x_max: float = 1e100, points: int = 201) -> float:
    """Fitted growth exponent of ``nu(x) = #{r : p_r >= 1/x}``.

    ``nu`` is evaluated from the family's rank pmf (untruncated) on a log
    grid up to ``x_max``; the slope of ``log nu`` against ``log x`` is
    fitted over the upper half of the grid.  Finite laws return 0.
    """
    family = law.family if isinstance(law, RegularLaw) else law
    atoms = family.inner if isinstance(family, Mixed) else family
    if not isinstance(atoms, _InfiniteAtoms):
        return 0.0
    log_total = math.log(_total_weight(atoms))
    log_x = np.linspace(0.0, math.log(x_max), points)
    # largest real rank with log pmf >= -log x, by bisection on log rank
    lo = np.zeros(points)
    hi = np.full(points, 700.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ok = atoms.log_weight(np.exp(mid)) - log_total >= -log_x
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    first_ok = atoms.log_weight(1.0) - log_total >= -log_x
    nu = np.where(first_ok, np.floor(np.exp(lo) + 1e-9), 0.0)
    upper = (np.arange(points) >= points // 2) & (nu >= 1)
    if upper.sum() < 2:
        return 0.0
    slope, _ = np.polyfit(log_x[upper], np.log(nu[upper]), 1)
    return float(slope)
