"""Read the regime back off an observed occupancy spectrum.

Each estimator inverts one limit: R_{n,1}/R_n -> gamma on purely atomic
streams, k R_{n,k}/R_{n,k+} -> gamma* for k >= 2 once diffuse mass is
present, and R_{n,1}/n -> diffuse mass.  All estimates are ratios of
spectrum entries, so they are invariant under scaling the spectrum.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .occupancy import OccupancySpectrum, tail_count
from .theory import AtomCardinality, RatioName, Regime, UnsupportedRatioError, predict


class UndefinedEstimateError(ValueError):
    """The spectrum carries no information about the requested quantity."""


class RegimeGuess(str, enum.Enum):
    PURE_DIFFUSE = "PureDiffuse"
    PURE_DISCRETE = "PureDiscrete"
    MIXED = "Mixed"
    FINITE_ATOMS = "FiniteAtoms"


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def estimate_gamma_discrete(spec: OccupancySpectrum) -> float:
    """R_{n,1}/R_n, for a stream with no diffuse part."""
    if spec.distinct < 1:
        raise UndefinedEstimateError("empty spectrum")
    return _clamp(spec.count(1) / spec.distinct)


def gamma_mixed_family(spec: OccupancySpectrum, kmax: int = 10) -> list[dict]:
    """``k R_{n,k}/R_{n,k+}`` for k = 2..kmax with a binomial variance estimate.

    The variance of row ``k`` uses ``p = g/k`` with ``g`` pooled from rows
    2..kmax, not the row's own value: weights that track their own noise
    would pull the weighted mean downward.  Buckets with an empty tail are
    skipped.
    """
    rows = []
    for k in range(2, kmax + 1):
        tail = tail_count(spec, k)
        if tail == 0:
            break
        rows.append({"k": k, "value": k * spec.count(k) / tail, "tail": tail})
    if not rows:
        return rows
    hits = sum(r["value"] * r["tail"] / r["k"] for r in rows)
    trials = sum(r["tail"] / r["k"] for r in rows)
    # keep the pooled value off 0 and 1 so every variance stays positive
    g = min(max(hits / trials, 1e-3), 1 - 1e-3)
    for r in rows:
        p = min(g / r["k"], 1 - 1e-3)
        r["variance"] = r["k"] ** 2 * p * (1 - p) / r.pop("tail")
    return rows


def refined_gamma_mixed(spec: OccupancySpectrum, kmax: int = 10) -> float:
    """Inverse-variance weighted mean of ``gamma_mixed_family``, clamped."""
    rows = gamma_mixed_family(spec, kmax)
    if not rows:
        raise UndefinedEstimateError("no state seen twice")
    w = [1.0 / r["variance"] for r in rows]
    return _clamp(sum(wi * r["value"] for wi, r in zip(w, rows)) / sum(w))


def estimate_gamma_mixed(spec: OccupancySpectrum) -> float:
    """2 R_{n,2}/R_{n,2+}; only repeated states enter, so singletons are irrelevant."""
    tail2 = tail_count(spec, 2)
    if tail2 == 0:
        raise UndefinedEstimateError("no state seen twice; the stream looks purely diffuse")
    return _clamp(2.0 * spec.count(2) / tail2)


def estimate_diffuse_mass(spec: OccupancySpectrum) -> float:
    """R_{n,1}/n.

    Atom singletons bias this upward at finite n (see
    ``debiased_diffuse_mass``); ``R_n/n`` (``diffuse_mass_companion``) is
    larger still.
    """
    if spec.n < 1:
        raise UndefinedEstimateError("empty stream")
    return spec.count(1) / spec.n


def debiased_diffuse_mass(spec: OccupancySpectrum) -> float:
    """R_{n,1}/n minus the expected share of atom singletons, clamped to [0, 1].

    Among atoms, singletons outnumber the states seen twice or more by the
    odds ``g/(1 - g)``, with ``g`` estimated by ``2 R_{n,2}/R_{n,2+}``; that
    many singletons are removed before dividing by ``n``.  The correction is
    of order R_{n,2+}/n, so the limit is unchanged.
    """
    if spec.n < 1:
        raise UndefinedEstimateError("empty stream")
    tail2 = tail_count(spec, 2)
    if tail2 == 0:
        return spec.count(1) / spec.n
    g = 2.0 * spec.count(2) / tail2
    if g >= 1.0:
        # infinite odds: every singleton may be an atom
        return 0.0
    return _clamp((spec.count(1) - tail2 * g / (1.0 - g)) / spec.n)


def diffuse_mass_companion(spec: OccupancySpectrum) -> float:
    if spec.n < 1:
        raise UndefinedEstimateError("empty stream")
    return spec.distinct / spec.n


@dataclass
class RegimeEstimate:
    gamma_hat: float | None
    diffuse_mass_hat: float
    regime: RegimeGuess | None
    diagnostics: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"gammaHat": self.gamma_hat, "diffuseMassHat": self.diffuse_mass_hat,
                "regime": self.regime.value if self.regime else None,
                "diagnostics": self.diagnostics, "notes": self.notes}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def classify(spec: OccupancySpectrum, earlier: OccupancySpectrum | None = None, *,
             delta: float = 0.01, min_n: int = 1000, kmax: int = 6) -> RegimeEstimate:
    """Guess the regime of a stream from its spectrum.

    ``earlier`` is an optional snapshot of the same stream taken at or before
    its midpoint; if the range has not grown since, the atom set is taken to
    be finite.  Streams shorter than ``min_n`` get diagnostics only.
    """
    if spec.n == 0:
        return RegimeEstimate(None, 0.0, None, notes=["empty stream"])
    raw = estimate_diffuse_mass(spec)
    diagnostics = [{"ratio": "Rn1OverN", "k": 1, "observed": raw},
                   {"ratio": "RnOverN", "k": 1, "observed": diffuse_mass_companion(spec)}]
    notes = []
    if spec.n < min_n:
        notes.append(f"n = {spec.n} < {min_n}: too short to classify")
        return RegimeEstimate(None, raw, None, diagnostics, notes)

    if spec.distinct == spec.n:
        return RegimeEstimate(None, 1.0, RegimeGuess.PURE_DIFFUSE, diagnostics, notes)

    diffuse = debiased_diffuse_mass(spec)
    frozen = (earlier is not None and earlier.n <= spec.n / 2
              and earlier.distinct == spec.distinct)
    if frozen:
        regime = RegimeGuess.FINITE_ATOMS
        gamma = 0.0
        notes.append(f"range frozen at {spec.distinct} since n = {earlier.n}")
    elif diffuse <= delta:
        regime = RegimeGuess.PURE_DISCRETE
        gamma = estimate_gamma_discrete(spec)
    elif diffuse < 1.0 - delta:
        regime = RegimeGuess.MIXED
        try:
            gamma = estimate_gamma_mixed(spec)
        except UndefinedEstimateError as exc:
            gamma = None
            notes.append(str(exc))
    else:
        regime = RegimeGuess.PURE_DIFFUSE
        gamma = None

    if regime is RegimeGuess.PURE_DISCRETE or regime is RegimeGuess.FINITE_ATOMS:
        atom_mass = 1.0
    else:
        atom_mass = 1.0 - diffuse
    if regime is RegimeGuess.FINITE_ATOMS:
        card = AtomCardinality.FINITE
    elif regime is RegimeGuess.PURE_DIFFUSE:
        card, atom_mass = AtomCardinality.EMPTY, 0.0
    else:
        card = AtomCardinality.INFINITE
    fitted = Regime(gamma or 0.0, atom_mass, card)

    for k in range(1, kmax + 1):
        tail = tail_count(spec, k)
        if tail == 0:
            break
        row = {"ratio": "RkOverTailK", "k": k, "observed": spec.count(k) / tail,
               "raw": k * spec.count(k) / tail}
        try:
            row["predicted"] = predict(fitted, RatioName.RK_OVER_TAILK, k).value
        except UnsupportedRatioError:
            pass
        diagnostics.append(row)
    if regime is RegimeGuess.MIXED and tail_count(spec, 2):
        diagnostics.append({"ratio": "refinedGammaMixed", "k": 0,
                            "observed": refined_gamma_mixed(spec)})
    return RegimeEstimate(gamma, diffuse, regime, diagnostics, notes)
