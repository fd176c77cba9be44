"""Line-oriented plan and schedule files and CSV tables.

Every file starts with a provenance line carrying the tool version, the seed
and the SHA-256 of the input that produced it.  Floats are written with 17
significant digits, which round-trips doubles exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .gaussian import EllipseReport
from .pulses import PulseSchedule, PulseSegment, ValidationReport
from .synthesis import CouplingStep, SynthesisPlan, TraceRecord, matrix_hash

CONVENTION_NOTE = "quadratures interleaved (x1,p1,x2,p2,...); vacuum variance 1/2"
PLAN_MAGIC = "chaincontrol-plan 1"
SCHEDULE_MAGIC = "chaincontrol-schedules 1"


class FormatError(ValueError):
    """Malformed input file; the message names the line and field."""

    def __init__(self, where: str, line: int | None, message: str):
        loc = f"{where}:{line}" if line is not None else where
        super().__init__(f"{loc}: {message}")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode())


@dataclass(frozen=True)
class Provenance:
    seed: int
    input_sha256: str
    tool_version: str = __version__

    def line(self) -> str:
        return f"# tool_version={self.tool_version} seed={self.seed} input_sha256={self.input_sha256}"


def _parse_float(tok: str, where: str, lineno: int, field: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(where, lineno, f"field {field!r}: expected a number, got {tok!r}") from None


def _parse_int(tok: str, where: str, lineno: int, field: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(where, lineno, f"field {field!r}: expected an integer, got {tok!r}") from None


# --------------------------------------------------------------------------
# matrices


def format_matrix_csv(M: np.ndarray, prov: Provenance, label: str) -> str:
    buf = io.StringIO()
    buf.write(prov.line() + "\n")
    buf.write(f"# {label}; {CONVENTION_NOTE}\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(M, dtype=float):
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def parse_matrix_csv(text: str, where: str = "<matrix>") -> np.ndarray:
    """Square matrix from CSV; lines starting with ``#`` are ignored."""
    rows, width = [], None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        toks = [t.strip() for t in line.split(",")]
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise FormatError(where, lineno, f"row has {len(toks)} entries, expected {width}")
        rows.append([_parse_float(t, where, lineno, f"column {j + 1}") for j, t in enumerate(toks)])
    if not rows:
        raise FormatError(where, None, "no matrix rows found")
    M = np.array(rows)
    if M.shape[0] != M.shape[1]:
        raise FormatError(where, None, f"matrix must be square, got {M.shape[0]}x{M.shape[1]}")
    if not np.all(np.isfinite(M)):
        raise FormatError(where, None, "matrix has non-finite entries")
    return M


# --------------------------------------------------------------------------
# plans


def format_plan(plan: SynthesisPlan, prov: Provenance) -> str:
    out = [
        prov.line(),
        PLAN_MAGIC,
        f"tool_version {prov.tool_version}",
        f"chain_length {plan.chain_length}",
        f"seed {plan.seed}",
        f"input_sha256 {prov.input_sha256}",
        f"target_sha256 {matrix_hash(plan.target)}",
        f"residual {fmt(plan.residual)}",
        f"steps {len(plan.steps)}",
    ]
    for i, row in enumerate(plan.target, start=1):
        out.append(f"target_row {i} " + " ".join(fmt(v) for v in row))
    for i, st in enumerate(plan.steps, start=1):
        a, b, c, d = st.inner.ravel()
        exp = "-" if st.exponent is None else " ".join(fmt(v) for v in st.exponent)
        out.append(f"step {i} site {st.site} inner {fmt(a)} {fmt(b)} {fmt(c)} {fmt(d)} exponent {exp}")
    return "\n".join(out) + "\n"


def parse_plan(text: str, where: str = "<plan>") -> tuple[SynthesisPlan, dict]:
    """Inverse of :func:`format_plan`.  Returns the plan and its header fields."""
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    steps: list[CouplingStep] = []
    seen_magic = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        toks = line.split()
        key = toks[0]
        if line.strip() == PLAN_MAGIC:
            seen_magic = True
        elif key == "target_row":
            idx = _parse_int(toks[1] if len(toks) > 1 else "", where, lineno, "row index")
            if idx != len(rows) + 1:
                raise FormatError(where, lineno, f"target_row {idx} out of order")
            rows.append([_parse_float(t, where, lineno, f"target_row {idx}") for t in toks[2:]])
        elif key == "step":
            steps.append(_parse_step(toks, where, lineno, len(steps) + 1))
        elif len(toks) == 2:
            header[key] = toks[1]
        else:
            raise FormatError(where, lineno, f"unrecognized record {key!r}")
    if not seen_magic:
        raise FormatError(where, None, f"missing {PLAN_MAGIC!r} line; not a plan file")
    for key in ("chain_length", "seed", "steps"):
        if key not in header:
            raise FormatError(where, None, f"missing header field {key!r}")
    N = _parse_int(header["chain_length"], where, None, "chain_length")
    if N < 2:
        raise FormatError(where, None, f"chain_length must be at least 2, got {N}")
    dim = 2 * (N - 1)
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise FormatError(where, None, f"target must be {dim}x{dim} for chain_length {N}")
    if _parse_int(header["steps"], where, None, "steps") != len(steps):
        raise FormatError(where, None, f"header announces {header['steps']} steps, found {len(steps)}")
    for i, st in enumerate(steps, start=1):
        if not 1 <= st.site <= N - 1:
            raise FormatError(where, None, f"step {i}: site {st.site} outside 1..{N - 1}")
    seed = _parse_int(header["seed"], where, None, "seed")
    residual = _parse_float(header.get("residual", "nan"), where, None, "residual")
    plan = SynthesisPlan(N, steps, np.array(rows), residual=residual, seed=seed)
    return plan, header


def _parse_step(toks, where, lineno, expected) -> CouplingStep:
    if len(toks) < 9 or toks[2] != "site" or toks[4] != "inner":
        raise FormatError(where, lineno, "step record must read 'step i site n inner a b c d exponent ...'")
    idx = _parse_int(toks[1], where, lineno, "step index")
    if idx != expected:
        raise FormatError(where, lineno, f"step {idx} out of order, expected {expected}")
    site = _parse_int(toks[3], where, lineno, "site")
    inner = np.array([_parse_float(t, where, lineno, "inner") for t in toks[5:9]]).reshape(2, 2)
    exponent = None
    rest = toks[9:]
    if rest:
        if rest[0] != "exponent":
            raise FormatError(where, lineno, f"unexpected field {rest[0]!r}")
        if rest[1:] != ["-"]:
            if len(rest) != 4:
                raise FormatError(where, lineno, "exponent needs three numbers or '-'")
            exponent = tuple(_parse_float(t, where, lineno, "exponent") for t in rest[1:])
    return CouplingStep(site, inner, exponent)


# --------------------------------------------------------------------------
# tables


def _table(prov: Provenance, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(prov.line() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def format_ellipses(reports: list[EllipseReport], prov: Provenance) -> str:
    rows = [[e.pair[0], e.pair[1], e.kind, fmt(e.semi_major), fmt(e.semi_minor), fmt(e.angle)] for e in reports]
    return _table(prov, ["n", "m", "kind", "semi_major", "semi_minor", "angle"], rows)


def format_negativities(table: dict[tuple[int, int], float], prov: Provenance) -> str:
    rows = [[n, m, fmt(v)] for (n, m), v in sorted(table.items())]
    return _table(prov, ["n", "m", "log_negativity"], rows)


def format_trace(trace: list[TraceRecord], prov: Provenance) -> str:
    rows = []
    for rec in trace:
        peak = max(rec.negativities.values(), default=0.0)
        rows.append([rec.step, "" if rec.site is None else rec.site, rec.entangled_pairs,
                     rec.touched_pair_bound, fmt(peak)])
    return _table(prov, ["step", "site", "entangled_pairs", "touched_pair_bound", "max_log_negativity"], rows)


def format_validation(reports: list[ValidationReport], sites: list[int], budget: float, prov: Provenance) -> str:
    rows = [[i, site, fmt(r.action_error), fmt(r.leakage), fmt(r.symplectic_defect),
             "yes" if r.error <= budget else "no"]
            for i, (site, r) in enumerate(zip(sites, reports), start=1)]
    return _table(prov, ["step", "site", "action_error", "leakage", "symplectic_defect", "within_budget"], rows)


# --------------------------------------------------------------------------
# schedules


def format_schedules(schedules: list[PulseSchedule], plan_hash: str, prov: Provenance) -> str:
    omega = schedules[0].omega if schedules else 1.0
    out = [prov.line(), SCHEDULE_MAGIC, f"omega {fmt(omega)}", f"plan_sha256 {plan_hash}",
           f"schedules {len(schedules)}"]
    for i, sch in enumerate(schedules, start=1):
        out.append(f"schedule {i} target_step {i} segments {len(sch.segments)}")
        for seg in sch.segments:
            out.append(f"segment site {seg.site} mean_strength {fmt(seg.mean_strength)} "
                       f"modulation_depth {fmt(seg.modulation_depth)} "
                       f"modulation_phase {fmt(seg.modulation_phase)} duration {fmt(seg.duration)}")
    return "\n".join(out) + "\n"


def parse_schedules(text: str, where: str = "<schedules>") -> tuple[list[PulseSchedule], dict]:
    header: dict[str, str] = {}
    schedules: list[PulseSchedule] = []
    omega = 1.0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#") or line.strip() == SCHEDULE_MAGIC:
            continue
        toks = line.split()
        if toks[0] == "schedule":
            schedules.append(PulseSchedule(omega, []))
        elif toks[0] == "segment":
            if not schedules:
                raise FormatError(where, lineno, "segment before any schedule")
            if len(toks) != 11:
                raise FormatError(where, lineno, "segment record has the wrong number of fields")
            vals = dict(zip(toks[1::2], toks[2::2]))
            try:
                seg = PulseSegment(
                    _parse_int(vals["site"], where, lineno, "site"),
                    *(_parse_float(vals[k], where, lineno, k)
                      for k in ("mean_strength", "modulation_depth", "modulation_phase", "duration")),
                )
            except KeyError as e:
                raise FormatError(where, lineno, f"missing field {e.args[0]!r}") from None
            except ValueError as e:
                if isinstance(e, FormatError):
                    raise
                raise FormatError(where, lineno, str(e)) from None
            schedules[-1].segments.append(seg)
        elif len(toks) == 2:
            header[toks[0]] = toks[1]
            if toks[0] == "omega":
                omega = _parse_float(toks[1], where, lineno, "omega")
        else:
            raise FormatError(where, lineno, f"unrecognized record {toks[0]!r}")
    return schedules, header


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
