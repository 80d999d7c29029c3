"""Command-line interface.

Exit status is 0 on success, 1 for unreadable or malformed input and 2 for a
degenerate alphabet (fewer than two symbols) or mismatched alphabets.
Results go to standard output (or ``--output``); diagnostics go to standard
error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import __version__
from .harness import ExperimentConfig, run_experiment, summarize, write_csv, write_summary
from .machine import CausalStateMachine, MachineError
from .reconstruct import CssrConfig, run_cssr
from .sequence import Alphabet, AlphabetError, max_safe_L, read_sequences
from .spec_format import SpecError, read_spec
from .stats import CHI2, KS, tv_distance_words

EXIT_OK, EXIT_INPUT, EXIT_ALPHABET = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _load_machine(path: str) -> CausalStateMachine:
    try:
        return CausalStateMachine.from_spec(read_spec(path))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except (SpecError, MachineError, AlphabetError) as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_infer(args) -> int:
    alphabet = None
    if args.alphabet:
        try:
            alphabet = Alphabet(tuple(args.alphabet.replace(",", " ").split()))
        except AlphabetError as exc:
            raise CliError(str(exc), EXIT_ALPHABET) from None
    try:
        alphabet, seqs = read_sequences(args.input, tokens=args.tokens, alphabet=alphabet)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc.strerror}") from None
    except AlphabetError as exc:
        raise CliError(str(exc), EXIT_ALPHABET) from None
    except ValueError as exc:
        raise CliError(f"{args.input}: {exc}") from None
    try:
        alphabet.check_inference()
    except AlphabetError as exc:
        raise CliError(str(exc), EXIT_ALPHABET) from None
    N = sum(len(s) for s in seqs)
    if N < 2:
        raise CliError(f"{args.input}: need at least two symbols of data")
    config = CssrConfig(args.lmax, args.alpha, args.test, args.min_count)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_cssr(seqs, config, alphabet=alphabet)
    m = result.machine
    _emit(m.to_text(), args.output)
    diag = result.diagnostics
    print(f"# states: {m.n_states}", file=sys.stderr)
    print(f"# entropy rate (bits/symbol): {m.entropy_rate():.6f}", file=sys.stderr)
    print(f"# symbols: {N}  alphabet: {' '.join(alphabet.symbols)}  max safe L: {max_safe_L(N, alphabet.size)}",
          file=sys.stderr)
    print(f"# tests: {diag.null_tests}  rejections: {diag.null_rejections}  "
          f"transient states removed: {diag.transient_states_removed}  "
          f"determinization splits: {diag.determinization_splits}", file=sys.stderr)
    for w in diag.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    m = _load_machine(args.spec)
    if args.n < 0:
        raise CliError("--n must be nonnegative")
    x = m.simulate(args.n, seed=args.seed)
    sep = "" if m.alphabet.single_char else " "
    _emit(sep.join(m.alphabet.decode(x)) + ("\n" if args.n else ""), args.output)
    return EXIT_OK


def cmd_eval(args) -> int:
    learned = _load_machine(args.machine)
    truth = _load_machine(args.spec)
    if set(learned.alphabet.symbols) != set(truth.alphabet.symbols):
        raise CliError(
            f"alphabets differ: {' '.join(learned.alphabet.symbols)} vs {' '.join(truth.alphabet.symbols)}",
            EXIT_ALPHABET,
        )
    if args.length < 1:
        raise CliError("--length must be at least 1")
    d = tv_distance_words(learned.word_distribution(args.length), truth.word_distribution(args.length))
    print(f"{d:.12g}")
    print(f"# states: {learned.n_states} learned, {truth.n_states} true; word length {args.length}", file=sys.stderr)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        config = ExperimentConfig.from_file(args.config)
    except OSError as exc:
        raise CliError(f"cannot read {args.config}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise CliError(f"{args.config}: {exc}") from None

    def progress(r):
        if args.verbose:
            print(f"{r.method} N={r.N} L_max={r.L_max} trial={r.trial}: states={r.states} "
                  f"tv={r.tv_dist} {r.error}".rstrip(), file=sys.stderr)

    try:
        results = run_experiment(config, progress)
    except (SpecError, MachineError, AlphabetError, OSError) as exc:
        raise CliError(f"source {config.source!r}: {exc}") from None
    if args.output:
        write_csv(results, args.output)
    else:
        write_csv(results, sys.stdout)
    if args.summary:
        write_summary(config, results, args.summary)
    for c in summarize(results):
        flag = "  FLAGGED" if c["flagged"] else ""
        print(f"{c['method']:>5} N={c['N']:<8} L_max={c['L_max']:<2} states {c['states_mean']:.2f} "
              f"+/- {c['states_std']:.2f}  d {c['tv_mean']:.4f} +/- {c['tv_std']:.4f}  "
              f"failed {c['failed']}/{c['trials']}{flag}", file=sys.stderr)
    return EXIT_OK


def cmd_spec_check(args) -> int:
    m = _load_machine(args.spec)
    pi = m.stationary_distribution()
    print(f"{args.spec}: ok")
    print(f"states: {m.n_states}")
    print(f"alphabet: {' '.join(m.alphabet.symbols)}")
    print(f"unifilar: {m.is_unifilar()}  strongly connected: {m.is_strongly_connected()}")
    print("stationary: " + " ".join(f"{name}={p:.6f}" for name, p in zip(m.names, pi)))
    print(f"entropy rate (bits/symbol): {m.entropy_rate():.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cssr", description="Causal-state splitting reconstruction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    q = sub.add_parser("infer", help="reconstruct a causal-state machine from data",
                       description="Reconstruct a causal-state machine from a text file of symbols.")
    q.add_argument("--input", required=True, help="data file, one sequence per line")
    q.add_argument("--alphabet", help="symbols in order, separated by spaces or commas (default: inferred, sorted)")
    q.add_argument("--tokens", action="store_true",
                   help="symbols are whitespace-separated tokens rather than single characters")
    q.add_argument("--lmax", type=int, required=True, help="longest history length")
    q.add_argument("--alpha", type=float, default=1e-3, help="significance level of each test (default 0.001)")
    q.add_argument("--test", choices=(KS, CHI2), default=KS, help="two-sample test (default ks)")
    q.add_argument("--min-count", type=int, default=1,
                   help="observations a history needs before it is tested (default 1)")
    q.add_argument("--output", help="write the machine here instead of standard output")
    q.set_defaults(func=cmd_infer)

    q = sub.add_parser("simulate", help="sample a sequence from a spec file",
                       description="Sample a sequence from a machine spec file.")
    q.add_argument("--spec", required=True, help="machine spec file")
    q.add_argument("--n", type=int, required=True, help="number of symbols")
    q.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    q.add_argument("--output", help="write the sequence here instead of standard output")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("eval", help="total-variation distance between two machines",
                       description="Total-variation distance between the word distributions of two machines.")
    q.add_argument("--machine", required=True, help="learned machine file")
    q.add_argument("--spec", required=True, help="reference spec file")
    q.add_argument("--length", type=int, default=10, help="word length (default 10)")
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("experiment", help="run a repeated-trial experiment from a config file",
                       description="Run a repeated-trial experiment described by an INI config file.")
    q.add_argument("--config", required=True, help="INI file with an [experiment] section")
    q.add_argument("--output", help="write the per-trial CSV here instead of standard output")
    q.add_argument("--summary", help="also write the per-cell JSON summary here")
    q.add_argument("--verbose", action="store_true", help="report every trial on standard error")
    q.set_defaults(func=cmd_experiment)

    q = sub.add_parser("spec-check", help="validate a spec file",
                       description="Validate a spec file and print its basic properties.")
    q.add_argument("--spec", required=True, help="machine spec file")
    q.set_defaults(func=cmd_spec_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"cssr {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"cssr {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
