"""Range-renewal statistics of i.i.d. symbol streams."""
from .symbols import Atom, Fresh, FreshIdAllocator, decode, encode
from .occupancy import (OccupancyCounter, OccupancySpectrum, FreshCollisionError,
                        merge, observe, spectrum, tail_count)
from .theory import (AtomCardinality, LimitPrediction, RatioName, Regime,
                     UnsupportedRatioError, expected_range, expected_spectrum, predict, r_k)
from .samplers import (FiniteUniform, Geometric, LogCorrected, Mixed, PureDiffuse,
                       RegularLaw, SeededStream, ZipfLike, build_law, child_seed,
                       empirical_index_oracle, family_from_dict)

__version__ = "0.1.0"

__all__ = [
    "Atom", "Fresh", "FreshIdAllocator", "decode", "encode",
    "OccupancyCounter", "OccupancySpectrum", "FreshCollisionError", "merge", "observe",
    "spectrum", "tail_count",
    "AtomCardinality", "LimitPrediction", "RatioName", "Regime", "UnsupportedRatioError",
    "expected_range", "expected_spectrum", "predict", "r_k",
    "FiniteUniform", "Geometric", "LogCorrected", "Mixed", "PureDiffuse", "RegularLaw",
    "SeededStream", "ZipfLike", "build_law", "child_seed", "empirical_index_oracle",
    "family_from_dict",
]
