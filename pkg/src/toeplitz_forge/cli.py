"""Command line front end: planning, extraction, rendering, verification.

Every command is deterministic given its arguments and seed; exports are
written as raw bytes with fixed newlines so reruns (and different
``--threads`` values) produce byte-identical files.

Exit codes: 0 success, 2 infeasible parameters, 3 budget exceeded,
4 verification failure, 5 malformed input, 1 anything else.

Formats
-------
* plan files: the planner's deterministic key-value text,
* ``txt`` patches: first line ``d n_rows n_cols origin...``, then one
  row of space-separated decimal letters per line (rows run along the
  first axis, columns along the last; higher-dimensional boxes flatten
  every leading axis into the row index),
* ``pgm`` patches: binary PGM (P5), maxval ``alphabet - 1``, row-major
  from the box's lexicographic corner (two bytes per sample, big
  endian, when the maxval needs them),
* ``records`` patches: line-delimited cells under a schema header,
* ``render``: PGM with letters mapped to equally spaced gray levels
  0..254 (maxval 255); cells the planned levels leave undetermined
  render as 255, so holes show up white instead of aborting the
  picture.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from .analysis import entropy_estimates, unique_ergodicity_probe
from .errors import (
    CellBudgetExceeded,
    DepthBudgetExceeded,
    FormatError,
    ToeplitzForgeError,
    VerificationFailure,
    exit_code_for,
)
from .lattice import FundamentalDomain, vadd
from .planner import divisibility_witness, make_plan, parse_plan, serialize_plan, verify_plan
from .skew import epsilon_t, skew_equivariance_check
from .theta import decompose
from .toeplitz import array_from_plan

__all__ = [
    "PATCH_SCHEMA",
    "VERIFY_SCHEMA",
    "parse_box",
    "parse_entropy",
    "patch_letters",
    "format_txt",
    "format_pgm",
    "format_records",
    "cmd_plan",
    "cmd_patch",
    "cmd_render",
    "cmd_verify",
    "main",
]

PATCH_SCHEMA = "toeplitz-forge-patch v1"
VERIFY_SCHEMA = "toeplitz-forge-verify v1"


def parse_entropy(text: str) -> Fraction:
    """Exact rational from a decimal or ``p/q`` string (no float detour)."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"entropy {text!r} is not a decimal or fraction") from exc
    return value

def parse_box(text: str, dimension: Optional[int] = None) -> FundamentalDomain:
    """Box from ``"x0,...:s0,..."`` — corner coordinates, then side lengths."""
    corner_txt, sep, sides_txt = text.partition(":")
    if not sep:
        raise FormatError(f"box {text!r} misses the ':' between corner and sides")
    try:
        corner = tuple(int(c) for c in corner_txt.split(","))
        sides = tuple(int(s) for s in sides_txt.split(","))
    except ValueError as exc:
        raise FormatError(f"box {text!r} has a non-integer entry") from exc
    if len(corner) != len(sides):
        raise FormatError(
            f"box {text!r} names {len(corner)} corner coordinates "
            f"but {len(sides)} sides"
        )
    if dimension is not None and len(corner) != dimension:
        raise FormatError(
            f"box {text!r} is {len(corner)}-dimensional, the plan is "
            f"{dimension}-dimensional"
        )
    if any(s <= 0 for s in sides):
        raise FormatError(f"box {text!r} has a non-positive side")
    return FundamentalDomain(corner, sides)


# ---------------------------------------------------------------------------
# Patch extraction and formats
# ---------------------------------------------------------------------------


def _bands(box: FundamentalDomain, threads: int) -> list:
    """Contiguous first-axis bands covering ``box`` in order."""
    step, extra = divmod(box.sides[0], threads)
    bands = []
    start = box.lower[0]
    for i in range(threads):
        size = step + (1 if i < extra else 0)
        if size == 0:
            continue
        bands.append(
            FundamentalDomain((start,) + box.lower[1:], (size,) + box.sides[1:])
        )
        start += size
    return bands


def _sharded(box: FundamentalDomain, threads: int, band_letters) -> tuple:
    """Row-major letters of ``box``; bands reassemble in order, so the
    result does not depend on the thread count."""
    if threads < 1:
        raise FormatError(f"thread count must be positive, got {threads}")
    if threads == 1:
        return tuple(band_letters(box))
    out = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for letters in pool.map(band_letters, _bands(box, threads)):
            out.extend(letters)
    return tuple(out)


def patch_letters(
    handle,
    box: FundamentalDomain,
    depth_budget: Optional[int] = None,
    cell_budget: Optional[int] = 10 ** 7,
    threads: int = 1,
) -> tuple:
    """Letters of ``box`` in row-major order, sharded over ``threads``."""
    if cell_budget is not None and box.cell_count() > cell_budget:
        raise CellBudgetExceeded(
            f"patch spans {box.cell_count()} cells, budget {cell_budget}"
        )
    return _sharded(
        box,
        threads,
        lambda band: handle.patch(band, depth_budget, cell_budget).letters,
    )


def _row_shape(box: FundamentalDomain) -> tuple:
    """(n_rows, n_cols) of the flattened row-major layout."""
    n_cols = box.sides[-1]
    n_rows = 1
    for s in box.sides[:-1]:
        n_rows *= s
    return n_rows, n_cols


def format_txt(box: FundamentalDomain, letters: Sequence[int]) -> bytes:
    n_rows, n_cols = _row_shape(box)
    head = " ".join(
        [str(box.dimension), str(n_rows), str(n_cols)]
        + [str(c) for c in box.lower]
    )
    lines = [head]
    for r in range(n_rows):
        row = letters[r * n_cols : (r + 1) * n_cols]
        lines.append(" ".join(str(a) for a in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def format_pgm(
    box: FundamentalDomain, letters: Sequence[int], maxval: int
) -> bytes:
    if box.dimension > 2:
        raise FormatError(
            f"PGM export is two-dimensional, the box has {box.dimension} axes"
        )
    if not 1 <= maxval <= 65535:
        raise FormatError(f"PGM maxval {maxval} outside [1, 65535]")
    n_rows, n_cols = _row_shape(box)
    head = f"P5\n{n_cols} {n_rows}\n{maxval}\n".encode("ascii")
    width = 1 if maxval < 256 else 2
    body = b"".join(int(a).to_bytes(width, "big") for a in letters)
    return head + body


def format_records(box: FundamentalDomain, letters: Sequence[int]) -> bytes:
    lines = [
        PATCH_SCHEMA,
        "box "
        + ",".join(str(c) for c in box.lower)
        + ":"
        + ",".join(str(s) for s in box.sides),
    ]
    for g, a in zip(box.iter_points(), letters):
        lines.append("cell " + ",".join(str(c) for c in g) + f" {a}")
    return ("\n".join(lines) + "\n").encode("ascii")


def _write(path: Optional[str], payload: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(payload)


def _load_plan(path: str):
    try:
        with open(path, "r", encoding="ascii") as fh:
            return parse_plan(fh.read())
    except OSError as exc:
        raise FormatError(f"cannot read plan file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_plan(args: argparse.Namespace) -> int:
    h = parse_entropy(args.h)
    kwargs = {"depth": args.depth, "iterations": args.iterations}
    if args.digit_budget is not None:
        kwargs["digit_budget"] = args.digit_budget
    plan = make_plan(args.k, args.d, h, **kwargs)
    _write(args.out, serialize_plan(plan).encode("ascii"))

    lines = [
        f"plan k={plan.k} d={plan.d} h={plan.h} -> M={plan.M} N={plan.N} "
        f"depth={plan.depth} ({plan.exact_levels} exact levels)",
        f"certified entropy window: {plan.window}",
    ]
    lines += [str(cert) for cert in plan.certificates]
    for m in (2, 3, 5):
        level = divisibility_witness(plan, m, 1)
        where = f"certified at level {level}" if level else "not certified"
        lines.append(f"divisibility sample: axis-1 period % {m} == 0 {where}")
    report = "\n".join(lines) + "\n"
    if args.report:
        _write(args.report, report.encode("ascii"))
    else:
        sys.stdout.write(report)
    return 0


def _extract(args: argparse.Namespace) -> tuple:
    plan = _load_plan(args.plan)
    handle = array_from_plan(plan)
    box = parse_box(args.box, handle.dimension)
    letters = patch_letters(
        handle, box, args.depth_budget, args.cell_budget, args.threads
    )
    return handle, box, letters


def cmd_patch(args: argparse.Namespace) -> int:
    handle, box, letters = _extract(args)
    if args.format == "txt":
        payload = format_txt(box, letters)
    elif args.format == "pgm":
        payload = format_pgm(box, letters, handle.alphabet - 1)
    else:
        payload = format_records(box, letters)
    _write(args.out, payload)
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    plan = _load_plan(args.plan)
    handle = array_from_plan(plan)
    box = parse_box(args.box, handle.dimension)
    if args.cell_budget is not None and box.cell_count() > args.cell_budget:
        raise CellBudgetExceeded(
            f"render spans {box.cell_count()} cells, budget {args.cell_budget}"
        )
    top = handle.alphabet - 1

    def gray(g) -> int:
        try:
            a = handle.eval(g, args.depth_budget)
        except DepthBudgetExceeded:
            return 255
        return (a * 254) // top if top else 0

    letters = _sharded(
        box,
        args.threads,
        lambda band: [gray(g) for g in band.iter_points()],
    )
    _write(args.out, format_pgm(box, letters, 255))
    return 0


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------


def _sample_points(rng, box: FundamentalDomain, count: int) -> list:
    pts = []
    for _ in range(count):
        pts.append(
            tuple(
                lo + rng.randrange(s)
                for lo, s in zip(box.lower, box.sides)
            )
        )
    return pts


def _check_theta(handle, rng, sample: int) -> str:
    fam = handle.family
    deep = fam.domain(fam.levels)
    pts = _sample_points(rng, deep, sample)
    pts.append(deep.lower)
    pts.append(tuple(c + s - 1 for c, s in zip(deep.lower, deep.sides)))
    for g in pts:
        dec = decompose(fam, g)
        if dec.total() != g:
            raise VerificationFailure(f"components of {g} sum to {dec.total()}")
        for i in range(2, dec.depth + 1):
            if not fam.in_lattice(dec.component(i), i - 1):
                raise VerificationFailure(
                    f"theta_{i}({g}) = {dec.component(i)} leaves "
                    f"the level-{i - 1} lattice"
                )
        for t in range(dec.depth + 1):
            partial = fam.project(g, 0)
            for i in range(1, t + 1):
                partial = vadd(partial, dec.component(i))
            if partial != fam.project(g, t):
                raise VerificationFailure(
                    f"partial sums of {g} rebuild {partial} at level {t}, "
                    f"the box representative is {fam.project(g, t)}"
                )
    return f"{len(pts)} points recomposed through {fam.levels} levels"


def _safe_level(handle) -> int:
    return min(2, handle.family.levels)


def _check_per_formula(handle, rng, sample: int) -> str:
    fam = handle.family
    box = fam.domain(_safe_level(handle))
    pts = _sample_points(rng, box, sample)
    checked = 0
    for g in pts:
        for n in range(1, _safe_level(handle) + 1):
            if not handle.is_periodic_at(g, n):
                continue
            a = handle.eval(g)
            p = fam.scale.p_diag(n)
            for axis in range(fam.dimension):
                for sign in (1, -1):
                    z = list(g)
                    z[axis] += sign * p[axis]
                    z = tuple(z)
                    if not box.contains(z):
                        continue
                    if handle.eval(z) != a:
                        raise VerificationFailure(
                            f"{g} is level-{n} periodic but its lattice "
                            f"translate {z} reads a different letter"
                        )
                    checked += 1
    return f"{checked} lattice translates matched their periodic letter"


def _check_coverage(handle, rng, sample: int) -> str:
    fam = handle.family
    box = fam.domain(_safe_level(handle))
    pts = _sample_points(rng, box, sample)
    histogram: dict = {}
    for g in pts:
        level = handle.periodic_level(g)
        histogram[level] = histogram.get(level, 0) + 1
    dist = " ".join(f"level{n}:{histogram[n]}" for n in sorted(histogram))
    return f"{len(pts)} cells all resolved ({dist})"


def _check_spread(handle, t: Optional[int], seed: int, cell_budget: int):
    fam = handle.family
    if t is None:
        t = -1
        for cand in range(fam.levels - 1, -1, -1):
            if handle.block_count(cand + 1) is None:
                continue
            positions = fam.lattice_box(cand + 1, cand).count()
            blocks = handle.block_count(cand) or positions
            cost = positions * fam.domain(cand).cell_count() * (blocks * 50 + 2)
            if cost <= cell_budget * 10:
                t = cand
                break
        if t < 0:
            return None, "no level fits the cell budget"
    report = unique_ergodicity_probe(handle, t, seed=seed, cell_budget=cell_budget)
    if not report.uniform:
        block, low, high = report.witness()
        raise VerificationFailure(
            f"level-{report.t} frequencies vary: a block occurs with "
            f"different rates in blocks {low} and {high} "
            f"(spread {report.spread})"
        )
    return report, (
        f"level {report.t}: {len(report.blocks)} blocks x "
        f"{len(report.indices)} samples, spread 0"
    )


def _check_estimates(plan, handle) -> str:
    rows = entropy_estimates(plan)
    focus = next((r for r in rows if r.level == plan.N), rows[-1])
    tail = ""
    if focus.bracket is not None:
        lo, hi = focus.bracket
        tail = f" in [{lo.lo}, {hi.hi}]"
    return f"level-{focus.level} estimate {focus.estimate}{tail}"


def _check_carries(handle, rng, sample: int) -> str:
    fam = handle.family
    d = fam.dimension
    p1 = fam.scale.p_diag(1)
    done = 0
    if fam.domain(1).cell_count() ** 2 <= 4096:
        for c in fam.domain(1).iter_points():
            for dd in fam.domain(1).iter_points():
                want = tuple(
                    0 if dd[a] < p1[a] - c[a] else 1 for a in range(d)
                )
                got = epsilon_t(fam, c, dd, 1)
                if got != want:
                    raise VerificationFailure(
                        f"carry of {c} + {dd} is {got}, closed form says {want}"
                    )
                done += 1
    t = _safe_level(handle)
    for _ in range(sample):
        g = tuple(rng.randrange(-50, 50) for _ in range(d))
        gp = tuple(rng.randrange(-50, 50) for _ in range(d))
        h = tuple(rng.randrange(-50, 50) for _ in range(d))
        if epsilon_t(fam, (0,) * d, h, t) != (0,) * d:
            raise VerificationFailure(f"adding zero to {h} carries at level {t}")
        lhs = epsilon_t(fam, vadd(gp, g), h, t)
        rhs = vadd(
            epsilon_t(fam, g, h, t),
            epsilon_t(fam, gp, fam.project(vadd(g, h), t), t),
        )
        if lhs != rhs:
            raise VerificationFailure(
                f"carry of {g} then {gp} at {h} composes to {rhs}, "
                f"adding both at once carries {lhs}"
            )
        done += 1
    return f"{done} carry identities verified"


def _check_skew(handle, rng, seed: int, cell_budget: int) -> str:
    fam = handle.family
    d = fam.dimension
    window = FundamentalDomain((0,) * d, (2,) * d)
    scan = fam.lattice_box(min(2, fam.levels), 1).count()
    cost = (scan + 2 * window.cell_count()) * fam.domain(1).cell_count()
    if cost > cell_budget:
        return f"skipped: sweep needs {cost} cells, budget {cell_budget}"
    for g in ((1,) * d, tuple(range(2, d + 2))):
        verdict = skew_equivariance_check(handle, g, 1, window, cell_budget=cell_budget)
        if not verdict.passed:
            where = verdict.mismatches[0] if verdict.mismatches else "coset map"
            raise VerificationFailure(
                f"translating by {g} breaks the level-1 skew identity at {where}"
            )
    return f"2 translations equivariant on {window.cell_count()} derived cells"


def cmd_verify(args: argparse.Namespace) -> int:
    import random

    plan = _load_plan(args.plan)
    out = [VERIFY_SCHEMA, f"plan {args.plan} k {plan.k} d {plan.d} h {plan.h}"]
    results = []

    def run(name, thunk):
        try:
            detail = thunk()
        except VerificationFailure as exc:
            results.append((name, "FAIL", str(exc)))
            return False
        results.append((name, "pass", detail))
        return True

    def emit() -> int:
        ok = all(status != "FAIL" for _, status, _ in results)
        for name, status, detail in results:
            out.append(f"[{status}] {name}: {detail}")
        out.append(f"verdict {'pass' if ok else 'fail'}")
        sys.stdout.write("\n".join(out) + "\n")
        return 0 if ok else 4

    def certificates() -> str:
        certs = verify_plan(plan)
        bad = [c for c in certs if not c.passed]
        if bad:
            raise VerificationFailure(str(bad[0]))
        return f"{len(certs)} conditions replayed"

    if not run("certificates", certificates):
        return emit()

    handle = array_from_plan(plan)
    rng = random.Random(args.seed)
    sample = 32
    run("theta-roundtrip", lambda: _check_theta(handle, rng, sample))
    run("per-formula", lambda: _check_per_formula(handle, rng, sample))
    run("coverage", lambda: _check_coverage(handle, rng, sample))

    def spread() -> str:
        report, detail = _check_spread(
            handle, args.level, args.seed, args.cell_budget
        )
        return detail if report else f"skipped: {detail}"

    run("ap-spread", spread)
    run("entropy-brackets", lambda: _check_estimates(plan, handle))
    run("carry-arithmetic", lambda: _check_carries(handle, rng, sample))
    run("skew-equivariance", lambda: _check_skew(handle, rng, args.seed, args.cell_budget))
    return emit()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toeplitz-forge",
        description=(
            "Plan, evaluate and verify strictly ergodic Toeplitz Z^d "
            "arrays of prescribed entropy."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    plan_p = sub.add_parser("plan", help="derive and certify construction parameters")
    plan_p.add_argument("--k", type=int, required=True, help="alphabet size")
    plan_p.add_argument("--d", type=int, required=True, help="lattice dimension")
    plan_p.add_argument(
        "--h", required=True,
        help="target entropy as a decimal or p/q string (parsed exactly)",
    )
    plan_p.add_argument("--depth", type=int, default=None)
    plan_p.add_argument("--iterations", type=int, default=2)
    plan_p.add_argument("--digit-budget", type=int, default=None)
    plan_p.add_argument("--out", required=True, help="plan file path")
    plan_p.add_argument("--report", default=None, help="certificate report path (default: stdout)")
    plan_p.set_defaults(func=cmd_plan)

    def extraction_flags(p):
        p.add_argument("--plan", required=True)
        p.add_argument("--box", required=True, help='window "x0,...:s0,..."')
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--depth-budget", type=int, default=None)
        p.add_argument("--cell-budget", type=int, default=10 ** 7)

    patch_p = sub.add_parser("patch", help="extract a window of letters")
    extraction_flags(patch_p)
    patch_p.add_argument(
        "--format", choices=("txt", "pgm", "records"), default="txt"
    )
    patch_p.set_defaults(func=cmd_patch)

    render_p = sub.add_parser("render", help="render a window as a grayscale PGM")
    extraction_flags(render_p)
    render_p.set_defaults(func=cmd_render)

    verify_p = sub.add_parser("verify", help="replay certificates and run the invariant suites")
    verify_p.add_argument("--plan", required=True)
    verify_p.add_argument("--level", type=int, default=None, help="frequency probe level")
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--cell-budget", type=int, default=10 ** 6)
    verify_p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToeplitzForgeError as exc:
        sys.stderr.write(
            f"error {exit_code_for(exc)} {type(exc).__name__}: {exc}\n"
        )
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
