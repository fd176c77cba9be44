"""``chaincontrol`` command-line tool.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cradle import cradle_basis, controllability_dimension
from .formats import (
    FormatError,
    Provenance,
    format_ellipses,
    format_matrix_csv,
    format_negativities,
    format_plan,
    format_schedules,
    format_trace,
    format_validation,
    parse_matrix_csv,
    parse_plan,
    sha256_bytes,
    sha256_text,
    write_text,
)
from .gaussian import (
    PhononTarget,
    all_ellipses,
    apply_symplectic,
    cradle_to_site,
    is_physical,
    negativity_table,
    phonon_target_symplectic,
    vacuum_state,
)
from .pulses import DEFAULT_DT, DEFAULT_RWA_RATIO, IntegrationError, compile_step, validation_report
from .symplectic import TOL_SYM, is_symplectic
from .synthesis import (
    TOL_PLAN,
    SynthesisError,
    correlation_trace,
    matrix_hash,
    step_bound,
    synthesize,
    verify_plan,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
PULSE_BUDGET_FACTOR = 10.0

log = logging.getLogger("chaincontrol")


class InputError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def _read(path: str) -> tuple[str, bytes]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    try:
        return data.decode("utf-8"), data
    except UnicodeDecodeError:
        raise InputError(f"{path} is not UTF-8 text") from None


def _out(args, name: str) -> Path:
    return Path(args.output_dir) / name


def _report(path: Path) -> None:
    print(f"wrote {path}")


def _pmap(fn, items, jobs: int):
    """Ordered map; parallel when ``jobs > 1``."""
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _run_synthesis(T, args, stage: str):
    try:
        plan = synthesize(T, seed=args.seed, use_columns=args.use_column_variant, tol_plan=args.tol)
    except SynthesisError as e:
        raise NumericalFailure(f"{stage}: {e}") from None
    return plan


# --------------------------------------------------------------------------
# commands


def cmd_synthesize(args) -> int:
    text, raw = _read(args.target)
    M = parse_matrix_csv(text, args.target)
    dim = M.shape[0]
    if dim % 2:
        raise InputError(f"{args.target}: dimension {dim} is odd")
    N = args.chain_length
    if N is None:
        N = dim // 2 + 1
    if dim == 2 * N:
        # site basis: strip the total displacement, which must be untouched
        C = cradle_basis(N).phase_space_matrix
        full = C @ M @ C.T
        eye = np.eye(dim)
        if max(np.max(np.abs(full[-2:] - eye[-2:])), np.max(np.abs(full[:, -2:] - eye[:, -2:]))) > TOL_SYM:
            raise InputError("site-basis target acts on the total displacement, which no spring can reach")
        T = full[:-2, :-2]
    elif dim == 2 * (N - 1):
        T = M
    else:
        raise InputError(f"target dimension {dim} fits neither {2 * N} (site) nor {2 * (N - 1)} (cradle) for N={N}")
    if not is_symplectic(T):
        raise InputError("target is not symplectic")
    plan = _run_synthesis(T, args, "synthesis")
    path = write_text(_out(args, "plan.txt"), format_plan(plan, Provenance(args.seed, sha256_bytes(raw))))
    print(f"steps {len(plan.steps)} (bound {step_bound(plan.chain_length)}) residual {plan.residual:.3e}")
    _report(path)
    return EXIT_OK


def _load_plan(path: str):
    text, raw = _read(path)
    plan, header = parse_plan(text, path)
    for i, st in enumerate(plan.steps, start=1):
        if not is_symplectic(st.inner):
            raise InputError(f"{path}: step {i} inner action is not symplectic")
    if not is_symplectic(plan.target):
        raise InputError(f"{path}: stored target is not symplectic")
    return plan, header, raw


def cmd_verify(args) -> int:
    plan, header, _ = _load_plan(args.plan)
    residual = verify_plan(plan)
    bound = step_bound(plan.chain_length)
    ok_res = residual <= args.tol
    ok_len = len(plan.steps) <= bound
    print(f"chain_length {plan.chain_length}")
    print(f"residual {residual:.3e} (tolerance {args.tol:.1e}) {'PASS' if ok_res else 'FAIL'}")
    print(f"steps {len(plan.steps)} (bound {bound}) {'PASS' if ok_len else 'FAIL'}")
    stored = header.get("target_sha256")
    if stored is not None and stored != matrix_hash(plan.target):
        print("target hash mismatch: the target rows were edited after synthesis")
        return EXIT_INPUT
    return EXIT_OK if ok_res and ok_len else EXIT_NUMERIC


def cmd_phonon(args) -> int:
    N = args.chain_length
    if N is None:
        raise InputError("phonon needs --chain-length")
    try:
        target = PhononTarget(N, args.k1, args.k2, args.xi)
    except ValueError as e:
        raise InputError(f"phonon parameters: {e}") from None
    prov = Provenance(args.seed, sha256_text(f"phonon N={N} k1={args.k1} k2={args.k2} xi={args.xi!r}"))
    try:
        T = phonon_target_symplectic(target)
    except RuntimeError as e:
        raise NumericalFailure(f"phonon target: {e}") from None
    plan = _run_synthesis(T, args, "synthesis")
    trace = correlation_trace(plan)
    sigma = cradle_to_site(apply_symplectic(vacuum_state(N - 1), plan.product()))
    ellipses = all_ellipses(sigma)
    for name, text in (
        ("plan.txt", format_plan(plan, prov)),
        ("state.csv", format_matrix_csv(sigma, prov, "site-basis covariance")),
        ("ellipses.csv", format_ellipses(ellipses, prov)),
        ("trace.csv", format_trace(trace, prov)),
    ):
        _report(write_text(_out(args, name), text))
    print(f"steps {len(plan.steps)} (bound {step_bound(N)}) residual {plan.residual:.3e} "
          f"entangled pairs {trace[-1].entangled_pairs}/{N * (N - 1) // 2}")
    return EXIT_OK


def cmd_controllability(args) -> int:
    N = args.chain_length
    if N is None or N < 2:
        raise InputError("controllability needs --chain-length of at least 2")
    n = N - 1
    dim = controllability_dimension(n)
    expected = n * (2 * n + 1)
    verdict = "PASS" if dim == expected else "FAIL"
    print(f"modes {n} dimension {dim} expected {expected} {verdict}")
    return EXIT_OK if dim == expected else EXIT_NUMERIC


def _validate_one(item):
    schedule, N = item
    return validation_report(schedule, N, DEFAULT_DT)


def cmd_pulses(args) -> int:
    plan, _, raw = _load_plan(args.plan)
    residual = verify_plan(plan)
    if not residual <= args.tol:
        raise InputError(f"{args.plan}: plan does not verify (residual {residual:.3e})")
    try:
        schedules = [compile_step(st, 1.0, args.rwa_ratio) for st in plan.steps]
    except ValueError as e:
        raise InputError(str(e)) from None
    try:
        reports = _pmap(_validate_one, [(s, plan.chain_length) for s in schedules], args.jobs)
    except IntegrationError as e:
        raise NumericalFailure(f"pulse validation: {e}") from None
    budget = PULSE_BUDGET_FACTOR * args.rwa_ratio
    prov = Provenance(plan.seed, sha256_bytes(raw))
    plan_hash = sha256_bytes(raw)
    _report(write_text(_out(args, "schedules.txt"), format_schedules(schedules, plan_hash, prov)))
    sites = [st.site for st in plan.steps]
    _report(write_text(_out(args, "pulse_validation.csv"), format_validation(reports, sites, budget, prov)))
    worst = max((r.error for r in reports), default=0.0)
    bad = sum(1 for r in reports if r.error > budget)
    print(f"schedules {len(schedules)} worst error {worst:.3e} budget {budget:.1e} over budget {bad}")
    return EXIT_OK if bad == 0 else EXIT_NUMERIC


def cmd_report(args) -> int:
    text, raw = _read(args.state)
    sigma = parse_matrix_csv(text, args.state)
    if sigma.shape[0] % 2:
        raise InputError(f"{args.state}: dimension {sigma.shape[0]} is odd")
    if np.max(np.abs(sigma - sigma.T)) > 1e-12 * max(1.0, np.max(np.abs(sigma))):
        raise InputError(f"{args.state}: covariance is not symmetric")
    sigma = 0.5 * (sigma + sigma.T)
    if not is_physical(sigma):
        raise InputError(f"{args.state}: covariance violates the uncertainty principle")
    prov = Provenance(args.seed, sha256_bytes(raw))
    _report(write_text(_out(args, "ellipses.csv"), format_ellipses(all_ellipses(sigma), prov)))
    _report(write_text(_out(args, "negativity.csv"), format_negativities(negativity_table(sigma), prov)))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--chain-length", type=int, default=None, help="number of oscillators N")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=TOL_PLAN, help="plan residual tolerance")
    common.add_argument("--rwa-ratio", type=float, default=DEFAULT_RWA_RATIO)
    common.add_argument("--output-dir", default=".")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--use-column-variant", action="store_true",
                        help="peel columns instead of rows")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="chaincontrol", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"chaincontrol {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", parents=[common], help="factor a target matrix into couplings")
    s.add_argument("target", help="CSV matrix, cradle basis (2N-2) or site basis (2N)")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("verify", parents=[common], help="recompute a plan's residual")
    s.add_argument("plan")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("phonon", parents=[common], help="phonon-pair squeezing pipeline")
    s.add_argument("--k1", type=int, default=1)
    s.add_argument("--k2", type=int, default=1)
    s.add_argument("--xi", type=float, default=1.0)
    s.set_defaults(func=cmd_phonon)

    s = sub.add_parser("controllability", parents=[common], help="Lie-algebra dimension check")
    s.set_defaults(func=cmd_controllability)

    s = sub.add_parser("pulses", parents=[common], help="compile and validate drive schedules")
    s.add_argument("plan")
    s.set_defaults(func=cmd_pulses)

    s = sub.add_parser("report", parents=[common], help="ellipse and negativity tables of a state")
    s.add_argument("state", help="site-basis covariance CSV")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage and 0 for --help/--version
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    if not (math.isfinite(args.tol) and args.tol > 0):
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, IntegrationError, SynthesisError, np.linalg.LinAlgError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (RuntimeError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
