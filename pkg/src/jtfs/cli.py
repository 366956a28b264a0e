"""Command-line front end.

Subcommands::

    jtfs analyze     --input x.wav --features-dir out/
    jtfs synthesize  --input x.wav --output y.wav [--loss-csv loss.csv] [--seed N ...]
    jtfs filters     --output filters.csv [--length N]
    jtfs gradcheck   [--seed N] [--length N]

Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure,
3 I/O or file-format error.
"""

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .adjoint import gradcheck
from .audio import AudioBuffer, read_wav, write_wav
from .errors import FormatError, JTFSError
from .features import write_features
from .filterbank import build_plan
from .metamer import ReconstructionConfig, reconstruct
from .scattering import jtfs_forward

log = logging.getLogger("jtfs")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

PLAN_DEFAULTS = dict(J=10, q1=8, q2=1, j_fr=3, q_fr=1, log2_T=10, log2_F=2)
GRADCHECK_DEFAULTS = dict(J=5, q1=2, q2=1, j_fr=3, q_fr=1, log2_T=3, log2_F=1,
                          length=1024)
FILTERS_LENGTH = 1 << 15


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _plan_flags(p, defaults):
    p.add_argument("-J", type=int, default=defaults["J"],
                   help="octaves of the temporal filterbanks")
    p.add_argument("--q1", type=int, default=defaults["q1"],
                   help="filters per octave, first layer")
    p.add_argument("--q2", type=int, default=defaults["q2"],
                   help="filters per octave, second layer")
    p.add_argument("--j-fr", type=int, default=defaults["j_fr"],
                   help="octaves of the frequential filterbank")
    p.add_argument("--q-fr", type=int, default=defaults["q_fr"],
                   help="frequential filters per octave")
    p.add_argument("--log2-T", dest="log2_T", type=int, default=defaults["log2_T"],
                   help="log2 of the temporal averaging scale, in samples")
    p.add_argument("--log2-F", dest="log2_F", type=int, default=defaults["log2_F"],
                   help="log2 of the frequential averaging scale, in rows")
    p.add_argument("--length", type=int, default=defaults.get("length"),
                   help="number of samples to process")


def _synthesis_flags(p):
    d = ReconstructionConfig()
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--lr", type=float, default=d.mu0, help="initial learning rate")
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--seed", type=int, action="append",
                   help="noise seed; repeat for several metamers")
    p.add_argument("--jobs", type=int, default=1,
                   help="seeds synthesized in parallel")
    p.add_argument("--loss-csv", help="write the loss curve here")


def make_parser():
    parser = _Parser(prog="jtfs", description="Joint time-frequency scattering "
                     "analysis and metamer synthesis.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="write scattering features")
    p.add_argument("--input", required=True)
    p.add_argument("--features-dir", required=True)
    _plan_flags(p, PLAN_DEFAULTS)

    p = sub.add_parser("synthesize", help="synthesize metamers of a WAV file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _plan_flags(p, PLAN_DEFAULTS)
    _synthesis_flags(p)

    p = sub.add_parser("filters", help="dump the filterbank as CSV")
    p.add_argument("--output", required=True)
    _plan_flags(p, dict(PLAN_DEFAULTS, length=FILTERS_LENGTH))

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, action="append")
    p.add_argument("--directions", type=int, default=100)
    _plan_flags(p, GRADCHECK_DEFAULTS)
    return parser


def validate_args(args):
    """Collect every invalid flag value, naming the flag."""
    problems = []

    def need(ok, msg):
        if not ok:
            problems.append(msg)

    need(args.J >= 1, "-J must be >= 1")
    need(args.q1 >= 1, "--q1 must be >= 1")
    need(args.q2 >= 1, "--q2 must be >= 1")
    need(args.j_fr >= 1, "--j-fr must be >= 1")
    need(args.q_fr >= 1, "--q-fr must be >= 1")
    need(0 <= args.log2_T <= args.J, "--log2-T must lie in [0, J]")
    need(0 <= args.log2_F <= args.j_fr, "--log2-F must lie in [0, --j-fr]")
    need(args.length is None or args.length >= 2, "--length must be >= 2")
    if args.command == "synthesize":
        need(args.iterations >= 1, "--iterations must be >= 1")
        need(args.lr > 0, "--lr must be positive")
        need(0 <= args.momentum < 1, "--momentum must lie in [0, 1)")
        need(args.jobs >= 1, "--jobs must be >= 1")
    if args.command == "gradcheck":
        need(args.directions >= 1, "--directions must be >= 1")
    if problems:
        raise UsageError("; ".join(problems))


def _plan_for(args, n):
    return build_plan(args.J, args.q1, args.q2, args.j_fr, args.q_fr,
                      args.log2_T, args.log2_F, n)


def _load(args):
    audio = read_wav(args.input)
    x = audio.samples
    n = args.length or x.size
    if x.size > n:
        log.warning("input has %d samples; truncating to %d", x.size, n)
        x = x[:n]
    elif x.size < n:
        log.info("input has %d samples; zero-padding to %d", x.size, n)
        x = np.concatenate([x, np.zeros(n - x.size)])
    return x, audio.sample_rate, _plan_for(args, n)


def cmd_analyze(args):
    x, _, plan = _load(args)
    S = jtfs_forward(x, plan)
    manifest = write_features(S, plan, args.features_dir)
    print(f"{len(S)} paths, {S.size} coefficients -> {manifest}")
    return EXIT_OK


def _seeded_path(path, seed, many):
    if not many:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}_seed{seed}{ext}"


def write_loss_csv(path, result):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "loss", "mu", "accepted"])
        for i, (loss, mu) in enumerate(zip(result.losses, result.mus)):
            w.writerow([i, repr(float(loss)), repr(float(mu)), int(i > 0)])


def cmd_synthesize(args):
    x, rate, plan = _load(args)
    seeds = args.seed or [ReconstructionConfig().seed]
    Sx = jtfs_forward(x, plan)

    def run(seed):
        cfg = ReconstructionConfig(iterations=args.iterations, mu0=args.lr,
                                   momentum=args.momentum, seed=seed)
        return seed, reconstruct(x, plan, cfg, Sx=Sx)

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(run, seeds))

    many = len(seeds) > 1
    for seed, res in results:
        out = _seeded_path(args.output, seed, many)
        write_wav(out, AudioBuffer(res.y, rate))
        if args.loss_csv:
            write_loss_csv(_seeded_path(args.loss_csv, seed, many), res)
        ratio = res.final_loss / res.initial_loss if res.initial_loss else 0.0
        print(f"seed {seed}: {len(res.losses) - 1} accepted iterations, "
              f"loss {res.initial_loss:.6g} -> {res.final_loss:.6g} "
              f"({ratio:.2%}) -> {out}")
    return EXIT_OK


def cmd_filters(args):
    plan = _plan_for(args, args.length)
    banks = [("psi1", plan.psi1), ("psi2", plan.psi2), ("psi_fr", plan.psi_fr),
             ("phi_T", [plan.phi_T]), ("phi_F", [plan.phi_F])]
    width = max(len(f.levels[0]) for _, bank in banks for f in bank)
    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["layer", "n", "xi", "sigma", "j", "spin"]
                   + [f"m{k}" for k in range(width)])
        for layer, bank in banks:
            for n, filt in enumerate(bank):
                mags = [f"{m:.9g}" for m in np.abs(filt.levels[0])]
                w.writerow([layer, n, repr(filt.xi), repr(filt.sigma), filt.j,
                            filt.spec.spin] + mags)
    print(f"{sum(len(b) for _, b in banks)} filters -> {args.output}")
    return EXIT_OK


def cmd_gradcheck(args):
    plan = _plan_for(args, args.length)
    ok = True
    for seed in args.seed or [0]:
        rep = gradcheck(plan, seed=seed, n_directions=args.directions)
        ok &= rep.passed
        print(f"seed {seed}: max relative error {rep.max_error:.3e}, median "
              f"{rep.median_error:.3e}, {rep.pass_fraction:.0%} within "
              f"{rep.tolerance:g}: {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"analyze": cmd_analyze, "synthesize": cmd_synthesize,
            "filters": cmd_filters, "gradcheck": cmd_gradcheck}


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        validate_args(args)
    except UsageError as exc:
        print(f"jtfs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (OSError, FormatError) as exc:
        print(f"jtfs: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArithmeticError as exc:
        print(f"jtfs: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (JTFSError, ValueError) as exc:
        print(f"jtfs: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
