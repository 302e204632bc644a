"""Command-line front end.

Usage::

    cmnd-moments --alpha 2,1,2,3 --sigma sigma.json --method all --mode exact
    cmnd-moments --alpha 2,1,2,3 --method closed --mode symbolic --output text

Covariance files follow::

    {"p": 2,
     "entries": [[{"re": "2", "im": "0"}, {"re": "1/2", "im": "1"}],
                 [null,                   {"re": "1",   "im": "0"}]],
     "alpha": [2, 1, 2, 3]}

Strings are exact rationals, non-integer numbers are floats, integers fit
either; strings and floats cannot be mixed.  Only the diagonal and upper
triangle are required: lower cells may be ``null`` or omitted (ragged rows
starting at the diagonal), and when present they are checked against
conjugate symmetry.  An entry may also be a bare real value or a
``[re, im]`` pair.

The JSON report goes to stdout; diagnostics go to stderr.  Exit status is
0 on success, 1 on input or evaluation errors, 2 when two methods
disagree.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from . import __version__
from .closed_form import default_workers, moment_closed_form
from .core import (
    GaussianRational,
    HermitianCovariance,
    Mode,
    MomentError,
    MomentValue,
    MultiIndex,
    SigmaPolynomial,
    check_dimensions,
    validate_covariance,
)
from .oracles import McEstimate, moment_monte_carlo, moment_permanent
from .recurrence import moment_recurrence
from .sparsity import NullVerdict, null_verdict

METHODS = ("closed", "recurrence", "permanent", "mc")
FLOAT_RTOL = 1e-9
MC_SIGMAS = 5.0


class ParseError(MomentError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class SchemaError(MomentError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class ConstraintError(MomentError):
    pass


@dataclass
class JobSpec:
    alpha: MultiIndex
    sigma: HermitianCovariance | None
    methods: tuple[str, ...]
    mode: Mode
    mc_samples: int = 1_000_000
    seed: int = 0
    output: str = "json"
    sparse_prune: bool = False
    workers: int = 1


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cmnd-moments", description="Moments of the centered complex multivariate normal.")
    ap.add_argument("--alpha", help='exponents "n1,m1,n2,m2,..."')
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--sigma", help="covariance JSON file ('-' for stdin)")
    src.add_argument("--sigma-inline", help="covariance JSON given on the command line")
    ap.add_argument("--method", action="append", help="closed, recurrence, permanent, mc or all; comma-separated or repeated")
    ap.add_argument("--mode", choices=[m.value for m in Mode])
    ap.add_argument("--samples", type=int, default=1_000_000, help="Monte Carlo sample count")
    ap.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    ap.add_argument("--output", choices=["json", "text"], default="json")
    ap.add_argument("--sparse-prune", choices=["on", "off"], default="off")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def parse_alpha(text: str) -> MultiIndex:
    values = []
    pos = 0
    for token in text.split(","):
        stripped = token.strip()
        try:
            v = int(stripped)
        except ValueError:
            raise ParseError(f"bad exponent {stripped!r} in --alpha", pos) from None
        if v < 0:
            raise ParseError(f"negative exponent {v} in --alpha", pos)
        values.append(v)
        pos += len(token) + 1
    if not values or len(values) % 2:
        raise ParseError(f"--alpha needs an even, nonzero number of exponents, got {len(values)}")
    return MultiIndex.from_interleaved(values)


def _classify(value: Any, where: str) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        raise SchemaError(where, "booleans are not numbers")
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        try:
            Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise SchemaError(where, f"{value!r} is not a rational 'a/b'") from None
        return "str"
    raise SchemaError(where, f"unsupported value {value!r}")


def _split_entry(entry: Any, where: str) -> tuple[Any, Any]:
    if isinstance(entry, dict):
        extra = set(entry) - {"re", "im"}
        if extra:
            raise SchemaError(where, f"unknown keys {sorted(extra)}")
        if "re" not in entry:
            raise SchemaError(f"{where}.re", "missing")
        return entry["re"], entry.get("im", 0)
    if isinstance(entry, list):
        if len(entry) != 2:
            raise SchemaError(where, "a [re, im] pair needs two values")
        return entry[0], entry[1]
    return entry, 0


def parse_sigma_json(doc: Any) -> tuple[list[list[Any]], str, list[int] | None]:
    """Normalize the covariance document.

    Returns the full matrix (lower cells filled by conjugation when absent),
    its kind (``"exact"`` or ``"float"``) and the optional ``alpha`` array.
    """
    alpha = None
    if isinstance(doc, dict):
        unknown = set(doc) - {"p", "entries", "alpha"}
        if unknown:
            raise SchemaError(sorted(unknown)[0], "unknown field")
        if "entries" not in doc:
            raise SchemaError("entries", "missing")
        rows = doc["entries"]
        alpha = doc.get("alpha")
        p = doc.get("p", len(rows) if isinstance(rows, list) else None)
        if not isinstance(p, int) or isinstance(p, bool) or p < 1:
            raise SchemaError("p", f"must be a positive integer, got {p!r}")
        if alpha is not None and (
            not isinstance(alpha, list) or any(not isinstance(x, int) or isinstance(x, bool) or x < 0 for x in alpha)
        ):
            raise SchemaError("alpha", "must be an array of nonnegative integers")
    else:
        rows = doc
        p = len(rows) if isinstance(rows, list) else None
    if not isinstance(rows, list) or len(rows) != p:
        raise SchemaError("entries", f"expected {p} rows")

    kinds = set()
    parts: dict[tuple[int, int], tuple[Any, Any]] = {}
    for h, row in enumerate(rows):
        if not isinstance(row, list):
            raise SchemaError(f"entries[{h}]", "row must be an array")
        if len(row) == p:
            offset = 0
        elif len(row) == p - h:
            offset = h
        else:
            raise SchemaError(f"entries[{h}]", f"expected {p} or {p - h} values, got {len(row)}")
        for c, entry in enumerate(row):
            k = c + offset
            where = f"entries[{h}][{c}]"
            if entry is None:
                if k >= h:
                    raise SchemaError(where, "diagonal and upper-triangle entries are required")
                continue
            re, im = _split_entry(entry, where)
            for part, name in ((re, "re"), (im, "im")):
                kind = _classify(part, f"{where}.{name}")
                if kind == "none":
                    raise SchemaError(f"{where}.{name}", "null part")
                if kind != "int":
                    if kinds and kind not in kinds:
                        raise SchemaError(f"{where}.{name}", "mixes exact strings and floats")
                    kinds.add(kind)
            parts[(h, k)] = (re, im)

    kind = "float" if "float" in kinds else "exact"

    def scalar(re, im):
        if kind == "float":
            return complex(float(Fraction(re)) if isinstance(re, str) else re,
                           float(Fraction(im)) if isinstance(im, str) else im)
        return GaussianRational(re, im)

    matrix = [[None] * p for _ in range(p)]
    for (h, k), (re, im) in parts.items():
        matrix[h][k] = scalar(re, im)
    for h in range(p):
        for k in range(h):
            if matrix[h][k] is None:
                matrix[h][k] = matrix[k][h].conjugate()
    return matrix, kind, alpha


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} is not valid JSON: {exc.msg}", exc.pos) from None


def _parse_methods(values: list[str] | None, mode: Mode) -> tuple[str, ...]:
    requested: list[str] = []
    for item in values or ["all"]:
        for name in item.split(","):
            name = name.strip()
            if name == "all":
                names = ["closed", "recurrence", "permanent"] + (["mc"] if mode is Mode.FLOAT else [])
            elif name in METHODS:
                names = [name]
            else:
                raise ParseError(f"unknown method {name!r}")
            requested.extend(x for x in names if x not in requested)
    return tuple(requested)


def parse_job(argv: Sequence[str], stdin=None) -> JobSpec:
    args = _build_parser().parse_args(list(argv))

    doc = None
    if args.sigma is not None:
        if args.sigma == "-":
            text = (stdin or sys.stdin).read()
        else:
            try:
                with open(args.sigma, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ParseError(f"cannot read {args.sigma}: {exc.strerror}") from None
        doc = _load_json(text, args.sigma)
    elif args.sigma_inline is not None:
        doc = _load_json(args.sigma_inline, "--sigma-inline")

    matrix = kind = file_alpha = None
    if doc is not None:
        matrix, kind, file_alpha = parse_sigma_json(doc)

    if args.alpha is not None:
        alpha = parse_alpha(args.alpha)
    elif file_alpha is not None:
        if not file_alpha or len(file_alpha) % 2:
            raise SchemaError("alpha", "needs an even, nonzero number of exponents")
        alpha = MultiIndex.from_interleaved(file_alpha)
    else:
        raise ParseError("no multi-index given (--alpha or an 'alpha' array in the covariance file)")

    if args.mode is not None:
        mode = Mode(args.mode)
    elif kind is None:
        mode = Mode.SYMBOLIC
    else:
        mode = Mode.FLOAT if kind == "float" else Mode.EXACT

    methods = _parse_methods(args.method, mode)
    if "mc" in methods and mode is not Mode.FLOAT:
        raise ConstraintError(f"Monte Carlo needs --mode float, not {mode.value}")
    if mode is Mode.EXACT and kind == "float":
        raise ConstraintError("exact mode needs exact entries (rational strings or integers)")
    if mode is not Mode.SYMBOLIC and matrix is None:
        raise ConstraintError(f"{mode.value} mode needs a covariance (--sigma or --sigma-inline)")
    if args.samples < 2:
        raise ConstraintError("--samples must be at least 2")

    sigma = None
    if matrix is not None:
        sigma = validate_covariance(matrix, Mode.FLOAT if kind == "float" else Mode.EXACT)
        if mode is Mode.FLOAT:
            sigma = sigma.as_float()
        check_dimensions(alpha, sigma)

    return JobSpec(
        alpha=alpha,
        sigma=sigma,
        methods=methods,
        mode=mode,
        mc_samples=args.samples,
        seed=args.seed,
        output=args.output,
        sparse_prune=args.sparse_prune == "on",
        workers=default_workers(),
    )


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


@dataclass
class Report:
    """JSON-ready description of a job's results.

    ``results[name]`` holds ``{"value": ..., "seconds": ...}`` or
    ``{"error": ..., "seconds": ...}``; ``agreement["a~b"]`` exists exactly
    for pairs of methods that both produced a value.
    """

    version: str
    alpha: list[int]
    p: int
    mode: str
    verdict: dict
    index_set_size: int | None
    results: dict[str, dict] = field(default_factory=dict)
    agreement: dict[str, bool] = field(default_factory=dict)
    exit_code: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def encode_value(value: Any) -> Any:
    if isinstance(value, McEstimate):
        return {
            "mean": {"re": value.mean.real, "im": value.mean.imag},
            "std_error": {"re": value.std_error_re, "im": value.std_error_im},
            "samples": value.samples,
            "seed": value.seed,
        }
    if isinstance(value, MomentValue):
        value = value.value
    if isinstance(value, GaussianRational):
        return {"re": str(value.re), "im": str(value.im)}
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, SigmaPolynomial):
        return {
            "text": value.to_text(),
            "terms": [
                {"coefficient": c, "exponents": [list(r) for r in value.exponent_matrix(mono)]}
                for mono, c in value.sorted_terms()
            ],
        }
    raise TypeError(f"cannot encode {value!r}")


def encode_verdict(verdict: NullVerdict) -> dict:
    out: dict[str, Any] = {
        "provably_null": verdict.is_provably_null,
        "reason": verdict.reason.value,
        "description": verdict.describe(),
    }
    if verdict.side is not None:
        out["side"] = verdict.side
        out["index"] = verdict.index + 1
    if verdict.block is not None:
        out["block"] = [k + 1 for k in verdict.block]
    if verdict.n_sum is not None:
        out["n_sum"] = verdict.n_sum
        out["m_sum"] = verdict.m_sum
    return out


def _noise_floor(job: JobSpec) -> float:
    # rounding scale of a Ryser sum: 2^d terms of magnitude up to (d * max|sigma|)^d
    if job.sigma is None:
        return 0.0
    d = sum(job.alpha.n)
    biggest = max(abs(complex(x)) for row in job.sigma.entries for x in row)
    return 1e-15 * (2.0 ** d) * (d * biggest) ** d


def values_agree(a: Any, b: Any, mode: Mode, noise: float = 0.0) -> bool:
    """Exact equality, or relative difference within ``FLOAT_RTOL`` plus a noise floor.

    A Monte Carlo estimate agrees with a deterministic value when it is
    within ``MC_SIGMAS`` standard errors in each component.
    """
    if isinstance(a, McEstimate) or isinstance(b, McEstimate):
        if isinstance(a, McEstimate) and isinstance(b, McEstimate):
            return a == b
        est, ref = (a, b) if isinstance(a, McEstimate) else (b, a)
        return est.within(complex(ref.value), MC_SIGMAS)
    a = a.value if isinstance(a, MomentValue) else a
    b = b.value if isinstance(b, MomentValue) else b
    if mode is not Mode.FLOAT:
        return a == b
    a, b = complex(a), complex(b)
    diff = abs(a - b)
    return diff <= FLOAT_RTOL * max(abs(a), abs(b)) + noise


def _method_table(job: JobSpec) -> dict[str, Callable[[JobSpec], Any]]:
    return {
        "closed": lambda j: moment_closed_form(j.alpha, j.sigma, j.mode, prune=j.sparse_prune),
        "recurrence": lambda j: moment_recurrence(j.alpha, j.sigma, j.mode),
        "permanent": lambda j: moment_permanent(j.alpha, j.sigma, j.mode),
        "mc": lambda j: moment_monte_carlo(j.alpha, j.sigma, j.mc_samples, j.seed, workers=j.workers),
    }


def run_job(job: JobSpec, overrides: dict[str, Callable[[JobSpec], Any]] | None = None) -> Report:
    """Run the null detector and every requested method.

    ``overrides`` replaces method implementations by name; tests use it to
    inject a wrong answer and exercise the disagreement exit status.
    """
    verdict = null_verdict(job.alpha, job.sigma)
    table = _method_table(job)
    if overrides:
        table.update(overrides)

    def timed(name):
        start = time.perf_counter()
        try:
            value = table[name](job)
        except MomentError as exc:
            return name, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - start
        return name, value, None, time.perf_counter() - start

    workers = max(1, min(job.workers, len(job.methods)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(timed, job.methods))
    else:
        outcomes = [timed(name) for name in job.methods]

    report = Report(
        version=__version__,
        alpha=list(job.alpha.interleaved()),
        p=job.alpha.p,
        mode=job.mode.value,
        verdict=encode_verdict(verdict),
        index_set_size=None,
    )
    values: dict[str, Any] = {}
    failed = False
    for name, value, error, seconds in outcomes:
        if error is not None:
            report.results[name] = {"error": error, "seconds": seconds}
            failed = True
            continue
        values[name] = value
        report.results[name] = {"value": encode_value(value), "seconds": seconds}
        if name == "closed" and not verdict.is_provably_null and not value.extra.get("pruned"):
            report.index_set_size = value.terms

    noise = _noise_floor(job) if job.mode is Mode.FLOAT else 0.0
    disagree = False
    names = [n for n in job.methods if n in values]
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            ok = values_agree(values[a], values[b], job.mode, noise)
            report.agreement[f"{a}~{b}"] = ok
            # Monte Carlo is reported but never decides the exit status
            if not ok and "mc" not in (a, b):
                disagree = True
    report.exit_code = 1 if failed else (2 if disagree else 0)
    return report


def render_text(report: Report) -> str:
    lines = [
        f"alpha = ({','.join(map(str, report.alpha))})  p = {report.p}  mode = {report.mode}",
        f"verdict: {report.verdict['description']}",
    ]
    if report.index_set_size is not None:
        lines.append(f"|I(alpha)| = {report.index_set_size}")
    for name, res in report.results.items():
        if "error" in res:
            lines.append(f"{name:<11} error: {res['error']}")
            continue
        v = res["value"]
        if "text" in v:
            shown = v["text"]
        elif "mean" in v:
            shown = (
                f"{v['mean']['re']:.6g}{v['mean']['im']:+.6g}i "
                f"(se {v['std_error']['re']:.2g}, {v['std_error']['im']:.2g}; n={v['samples']})"
            )
        elif isinstance(v["re"], str):
            shown = str(GaussianRational(v["re"], v["im"]))
        else:
            shown = str(complex(v["re"], v["im"]))
        lines.append(f"{name:<11} {shown}   ({res['seconds']:.4f} s)")
    for pair, ok in report.agreement.items():
        lines.append(f"agree {pair}: {'yes' if ok else 'NO'}")
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        job = parse_job(argv)
    except MomentError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    try:
        report = run_job(job)
    except MomentError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(report.to_json() if job.output == "json" else render_text(report))
    if report.exit_code == 2:
        print("methods disagree", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
