"""Limiting ratios of the occupancy spectrum and exact finite-n expectations.

The limit constants depend on the regularity index ``gamma`` of the atomic
part and on how much mass sits on atoms.  For ``0 < gamma < 1`` the
fraction of the range seen exactly ``k`` times tends to

    r_k(gamma) = gamma * Gamma(k - gamma) / (k! * Gamma(1 - gamma)),

evaluated here through ``r_1 = gamma``, ``r_{k+1} = r_k (k - gamma) / (k + 1)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class AtomCardinality(str, enum.Enum):
    INFINITE = "Infinite"
    FINITE = "Finite"
    EMPTY = "Empty"


class RatioName(str, enum.Enum):
    RN_OVER_N = "RnOverN"
    RN1_OVER_N = "Rn1OverN"
    RK_OVER_RN = "RkOverRn"
    RK_OVER_TAIL2 = "RkOverTail2"
    RK_OVER_TAILK = "RkOverTailK"


class UnsupportedRatioError(ValueError):
    """The requested ratio has no stated limit in this regime."""


@dataclass(frozen=True)
class Regime:
    gamma_star: float = 0.0
    atom_mass: float = 1.0
    atom_cardinality: AtomCardinality = AtomCardinality.INFINITE

    def __post_init__(self):
        card = AtomCardinality(self.atom_cardinality)
        object.__setattr__(self, "atom_cardinality", card)
        if not 0.0 <= self.gamma_star <= 1.0:
            raise ValueError(f"gamma_star must lie in [0, 1], got {self.gamma_star}")
        if not 0.0 <= self.atom_mass <= 1.0:
            raise ValueError(f"atom_mass must lie in [0, 1], got {self.atom_mass}")
        if card is AtomCardinality.EMPTY and self.atom_mass != 0.0:
            raise ValueError("an empty atom set carries no mass")
        if card is not AtomCardinality.EMPTY and self.atom_mass == 0.0:
            raise ValueError("atoms with zero total mass: use AtomCardinality.EMPTY")
        if card is AtomCardinality.FINITE and self.gamma_star != 0.0:
            raise ValueError("finitely many atoms behave as gamma_star = 0")

    @property
    def diffuse_mass(self) -> float:
        return 1.0 - self.atom_mass

    @property
    def is_mixed(self) -> bool:
        return 0.0 < self.atom_mass < 1.0


@dataclass(frozen=True)
class LimitPrediction:
    ratio_name: RatioName
    k: int
    value: float

    def to_dict(self) -> dict:
        return {"ratio": self.ratio_name.value, "k": self.k, "value": self.value}


def r_k(gamma: float, k: int) -> float:
    """Limit of R_{n,k}/R_n for a regular law of index ``gamma`` in (0, 1)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"r_k needs 0 < gamma < 1, got {gamma}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    r = gamma
    for j in range(1, k):
        r *= (j - gamma) / (j + 1)
    return r


def r_k_table(gamma: float, kmax: int) -> np.ndarray:
    """``[r_1(gamma), ..., r_kmax(gamma)]`` by the same recurrence."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"r_k needs 0 < gamma < 1, got {gamma}")
    j = np.arange(1, kmax, dtype=float)
    return gamma * np.concatenate(([1.0], np.cumprod((j - gamma) / (j + 1))))


def predict(regime: Regime, ratio_name: RatioName | str, k: int = 1) -> LimitPrediction:
    """Almost-sure limit of the named ratio under ``regime``.

    Ratios: R_n/n, R_{n,1}/n, R_{n,k}/R_n, R_{n,k}/R_{n,2+}, R_{n,k}/R_{n,k+}.
    Raises ``UnsupportedRatioError`` where no limit is available (for
    instance R_{n,k}/R_n with k >= 2 on a mixed law).
    """
    name = RatioName(ratio_name)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    g = 0.0 if regime.atom_cardinality is not AtomCardinality.INFINITE else regime.gamma_star
    pure_diffuse = regime.atom_cardinality is AtomCardinality.EMPTY

    if name in (RatioName.RN_OVER_N, RatioName.RN1_OVER_N):
        return LimitPrediction(name, k, 1.0 - regime.atom_mass)

    if name is RatioName.RK_OVER_RN:
        if pure_diffuse or regime.is_mixed:
            if k == 1:
                return LimitPrediction(name, k, 1.0)
            if pure_diffuse:
                return LimitPrediction(name, k, 0.0)
            raise UnsupportedRatioError(
                "R_{n,k}/R_n has no stated limit for k >= 2 when diffuse and atomic mass coexist")
        if 0.0 < g < 1.0:
            value = r_k(g, k)
        elif g == 1.0:
            value = 1.0 if k == 1 else 0.0
        else:
            value = 0.0
        return LimitPrediction(name, k, value)

    if pure_diffuse and not (name is RatioName.RK_OVER_TAILK and k == 1):
        raise UnsupportedRatioError("no repeats occur without atoms; R_{n,k+} = 0 for k >= 2")

    if name is RatioName.RK_OVER_TAIL2:
        if k < 2:
            raise UnsupportedRatioError("R_{n,k}/R_{n,2+} is defined for k >= 2")
        if 0.0 < g < 1.0:
            value = r_k(g, k) / (1.0 - g)
        elif g == 1.0:
            value = 1.0 / (k * (k - 1))
        else:
            value = 0.0
        return LimitPrediction(name, k, value)

    # RkOverTailK
    if k == 1 and (pure_diffuse or regime.is_mixed):
        return LimitPrediction(name, k, 1.0)
    return LimitPrediction(name, k, g / k if g > 0.0 else 0.0)


# ---------------------------------------------------------------------------
# exact finite-n expectations


def _log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def _occupied(n: int):
    """P(an atom of mass p was hit at least once in n draws)."""
    def f(p):
        with np.errstate(divide="ignore"):
            return -np.expm1(n * np.log1p(-np.minimum(p, 1.0)))
    return f


def _exactly(n: int, k: int):
    """P(an atom of mass p was hit exactly k times in n draws)."""
    lb = _log_binom(n, k)

    def f(p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = lb + k * np.log(p) + (n - k) * np.log1p(-p)
        out = np.where(p > 0, np.exp(logs), 0.0)
        if k == n:
            out = np.where(p >= 1.0, 1.0, out)
        return out
    return f


def expected_range(law, n: int) -> float:
    """E R_n = n p + sum_j (1 - (1 - p_j)^n) under i.i.d. sampling from ``law``.

    ``p`` is the diffuse mass and ``p_j`` the atom masses.  The part of the
    atom sum beyond the materialized head is summed by the law's tail
    routine, which treats the first-order term ``n p_j`` through the exact
    tail mass.
    """
    if n <= 0:
        return 0.0
    return float(n * law.diffuse_mass + law.atom_sum(_occupied(n), slope_at_zero=float(n)))


def expected_spectrum(law, n: int, k: int) -> float:
    """E R_{n,k}: expected number of states seen exactly ``k`` times in ``n`` draws."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n <= 0 or k > n:
        return 0.0
    atoms = law.atom_sum(_exactly(n, k), slope_at_zero=float(n) if k == 1 else 0.0)
    diffuse = n * law.diffuse_mass if k == 1 else 0.0
    return float(atoms + diffuse)


def expected_tail(law, n: int, k: int) -> float:
    """E R_{n,k+}."""
    if k <= 1:
        return expected_range(law, n)
    return expected_range(law, n) - sum(expected_spectrum(law, n, j) for j in range(1, k))


def truncation_bound(law, n: int) -> float:
    """Bound on |E R_n(truncated law) - E R_n(untruncated family)|.

    Dropping atoms of total mass ``d`` moves each draw with probability at
    most ``d``, so every count-of-counts expectation shifts by at most ``2 n d``.
    """
    return 2.0 * n * law.dropped_mass


