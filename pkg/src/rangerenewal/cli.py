"""Command-line entry point: ``rangerenewal {predict,simulate,estimate,verify,spectrum}``.

Exit codes: 0 success, 1 tolerance failure, 2 invalid input or config, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import estimators
from .decomposition import bernoulli_lln_check, verify_identities
from .harness import ConfigError, ExperimentConfig, run_experiment, write_outputs
from .occupancy import OccupancyCounter, OccupancySpectrum
from .samplers import SeededStream, child_seed
from .theory import AtomCardinality, RatioName, Regime, predict

EXIT_OK, EXIT_TOLERANCE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class InputError(ValueError):
    pass


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def tokens_to_counter(tokens: list[str], checkpoint: int | None = None):
    """Count a token stream; every distinct token is an atom.

    Returns the final counter and, if ``checkpoint`` is given, the spectrum
    after that many tokens.
    """
    vocab: dict[str, int] = {}
    counter = OccupancyCounter()
    earlier = None
    for i, tok in enumerate(tokens):
        if i == checkpoint:
            earlier = counter.spectrum()
        counter.observe(vocab.setdefault(tok, len(vocab)))
    if checkpoint is not None and earlier is None:
        earlier = counter.spectrum()
    return counter, earlier


def _load_spectrum(path: str, checkpoint: int | None = None, midpoint: bool = False):
    """Spectrum from a JSON file or a token stream, plus an optional earlier snapshot."""
    text = _read_text(path)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return OccupancySpectrum.from_json(stripped), None
        except (ValueError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: {exc}") from exc
    tokens = text.split()
    if checkpoint is None and midpoint:
        checkpoint = len(tokens) // 2
    counter, earlier = tokens_to_counter(tokens, checkpoint)
    return counter.spectrum(), earlier


def cmd_predict(args) -> int:
    atom_mass = args.atom_mass
    if atom_mass == 0.0:
        card = AtomCardinality.EMPTY
    else:
        card = AtomCardinality(args.atoms)
    gamma = 0.0 if card is not AtomCardinality.INFINITE else args.gamma
    pred = predict(Regime(gamma, atom_mass, card), RatioName(args.ratio), args.k)
    print(json.dumps(pred.to_dict()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.json:
        config.json_path = args.json
    if args.csv:
        config.csv_path = args.csv
    report = run_experiment(config, threads=args.threads)
    write_outputs(report, config)
    if not config.json_path:
        print(report.to_json())
    for rule in report.rules:
        status = "PASS" if rule["pass"] else "FAIL"
        print(f"{status} {rule['ratio']} k={rule['k']} ({rule['rule']}) "
              f"final mean {rule['means'][-1]:.6g} vs limit {rule['predicted']:.6g}", file=sys.stderr)
    for row in report.range_oracle:
        status = "PASS" if row["pass"] else "FAIL"
        print(f"{status} E R_n n={row['n']}: mean {row['meanRange']:.6g} vs {row['expectedRange']:.6g}",
              file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def cmd_estimate(args) -> int:
    spec, earlier = _load_spectrum(args.input, args.checkpoint, midpoint=True)
    est = estimators.classify(spec, earlier, delta=args.delta, min_n=args.min_n)
    print(est.to_json())
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec, _ = _load_spectrum(args.input)
    print(spec.to_json())
    return EXIT_OK


def cmd_verify(args) -> int:
    config = ExperimentConfig.load(args.config)
    n = config.checkpoints[-1]
    law = config.law_obj
    results = []
    ok = True
    for i in range(config.replicas):
        seed = child_seed(config.seed, i)
        path = SeededStream(law, seed).sample_codes(n)
        ident = verify_identities(path, args.max_k)
        lln = bernoulli_lln_check(path, law.atom_mass)
        ok &= ident.passed
        results.append({"replica": i, "seed": seed, "identities": ident.to_dict(), "lln": lln.to_dict()})
    print(json.dumps({"passed": ok, "paths": results}, sort_keys=True))
    return EXIT_OK if ok else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rangerenewal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="limit of a ratio in a given regime")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--atom-mass", type=float, default=1.0)
    p.add_argument("--atoms", choices=[c.value for c in AtomCardinality], default="Infinite",
                   help="cardinality of the atom set")
    p.add_argument("--ratio", required=True, choices=[r.value for r in RatioName])
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="run a replicated experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--json", help="report path (overrides config)")
    p.add_argument("--csv", help="per-replica rows path (overrides config)")
    p.add_argument("--threads", type=int, default=None, help="parallel replicas (default: $RR_THREADS or 1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the regime of a spectrum or token stream")
    p.add_argument("--input", required=True, help="spectrum JSON or whitespace-delimited tokens ('-' for stdin)")
    p.add_argument("--checkpoint", type=int, default=None,
                   help="earlier snapshot length for the finite-atom test (default: n/2)")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--min-n", type=int, default=1000)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="check the decomposition identities on generated paths")
    p.add_argument("--config", required=True)
    p.add_argument("--max-k", type=int, default=10)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum", help="occupancy spectrum of a token stream")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
