"""Split a path into its atomic and diffuse parts and check the counting identities.

For a path xi, Z_k = 1 when xi_k is a fresh (diffuse) draw, tau lists the
positions of atom draws and sigma those of fresh draws; X = xi[tau] and
Y = xi[sigma].  Since fresh draws never repeat, for every prefix length n

    R_n(xi)     = N_n(Z) + R_{n - N_n(Z)}(X)
    R_{n,1}(xi) = N_n(Z) + R_{n - N_n(Z), 1}(X)
    R_{n,k}(xi) = R_{n - N_n(Z), k}(X),   k >= 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .occupancy import prefix_spectra
from .symbols import Symbol, decode, encode


@dataclass(frozen=True)
class DecompositionView:
    """Positions are 1-based, as stopping times."""

    z: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    x: np.ndarray
    y: np.ndarray
    nz: np.ndarray

    @property
    def n(self) -> int:
        return int(self.z.size)

    def x_symbols(self) -> list[Symbol]:
        return [decode(c) for c in self.x.tolist()]

    def y_symbols(self) -> list[Symbol]:
        return [decode(c) for c in self.y.tolist()]


def _codes(path) -> np.ndarray:
    if isinstance(path, np.ndarray):
        return path.astype(np.int64, copy=False).ravel()
    return np.fromiter((encode(s) for s in path), dtype=np.int64)


def decompose(path: Sequence[Symbol | int] | np.ndarray) -> DecompositionView:
    codes = _codes(path)
    z = (codes < 0).astype(np.int8)
    pos = np.arange(1, codes.size + 1)
    tau = pos[z == 0]
    sigma = pos[z == 1]
    return DecompositionView(z=z, tau=tau, sigma=sigma, x=codes[tau - 1], y=codes[sigma - 1],
                             nz=np.cumsum(z, dtype=np.int64))


def interleave(z, x, y) -> np.ndarray:
    """Inverse of ``decompose``: rebuild the path from Z, X and Y."""
    z = np.asarray(z).astype(bool)
    out = np.empty(z.size, dtype=np.int64)
    out[~z] = x
    out[z] = y
    return out


@dataclass
class IdentityReport:
    passed: bool
    n: int
    max_k: int
    checks: int = 0
    counterexample: dict | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "n": self.n, "maxK": self.max_k,
                "checks": self.checks, "counterexample": self.counterexample}


def verify_identities(path, max_k: int = 10) -> IdentityReport:
    """Check the three decomposition identities at every prefix and every k in 2..max_k.

    The spectra of every prefix of xi, and of every prefix of X, come from
    ``occupancy.prefix_spectra``; the X-side values are then read at the
    X-time ``n - N_n(Z)`` of each xi-prefix.
    """
    if max_k < 2:
        raise ValueError(f"max_k must be >= 2, got {max_k}")
    view = decompose(path)
    n = view.n
    report = IdentityReport(True, n, max_k)
    if n == 0:
        return report
    r_xi, s_xi = prefix_spectra(_codes(path), max_k)
    r_x, s_x = prefix_spectra(view.x, max_k)
    # X-side tables indexed by X-time m = 0..|X| (row 0 = empty prefix)
    r_x = np.concatenate(([0], r_x))
    s_x = np.vstack((np.zeros((1, max_k), dtype=np.int64), s_x))
    m = np.arange(1, n + 1) - view.nz

    lhs = np.column_stack((r_xi, s_xi))
    rhs = np.column_stack((view.nz + r_x[m], s_x[m]))
    rhs[:, 1] += view.nz
    bad = np.argwhere(lhs != rhs)
    report.checks = int(lhs.size)
    if bad.size:
        row, col = bad[0]
        names = ["R_n", "R_n1"] + [f"R_n{k}" for k in range(2, max_k + 1)]
        report.passed = False
        report.counterexample = {"n": int(row) + 1, "quantity": names[col],
                                 "xi": int(lhs[row, col]), "decomposed": int(rhs[row, col])}
    return report


@dataclass
class LLNReport:
    n: int
    diffuse_fraction: float
    expected: float
    gap: float
    tolerance: float
    within: bool

    def to_dict(self) -> dict:
        return {"n": self.n, "diffuseFraction": self.diffuse_fraction, "expected": self.expected,
                "gap": self.gap, "tolerance": self.tolerance, "within": self.within}


def bernoulli_lln_check(path, atom_mass: float, tolerance: float | None = None) -> LLNReport:
    """Compare N_n(Z)/n with the diffuse mass ``1 - atom_mass``.

    Default tolerance is four binomial standard errors.
    """
    codes = _codes(path)
    n = int(codes.size)
    p = 1.0 - atom_mass
    frac = float(np.count_nonzero(codes < 0)) / n if n else 0.0
    if tolerance is None:
        tolerance = 4.0 * math.sqrt(p * (1.0 - p) / n) if n else 0.0
    gap = abs(frac - p)
    return LLNReport(n, frac, p, gap, tolerance, gap <= tolerance)
