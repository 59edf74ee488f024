"""Command-line interface.

Exit codes: 0 success / all checks pass, 1 verification failure or guard
violation, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import curvature, geometry
from .errors import DomainError, HKError, NearLocusError, OrientationError, RangeError
from .expsum import as_point, conjugation_check, evaluate, jet
from .spectrum import Mode, SpectrumData, expand, is_solution
from .verify import SuiteConfig, SuiteReport, full_report

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
FMT = "{:.17g}"


class InputError(Exception):
    """Malformed command-line or file input (exit code 2)."""


# ---------------------------------------------------------------------------
# spectrum files
# ---------------------------------------------------------------------------


def _complex_field(obj, where: str) -> complex:
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return complex(obj)
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected {{\"re\": .., \"im\": ..}}, got {obj!r}")
    extra = set(obj) - {"re", "im"}
    if extra:
        raise InputError(f"{where}: unknown keys {sorted(extra)}")
    try:
        re, im = obj.get("re", 0.0), obj.get("im", 0.0)
        if any(isinstance(t, bool) or not isinstance(t, (int, float)) for t in (re, im)):
            raise TypeError
    except TypeError:
        raise InputError(f"{where}: re/im must be numbers") from None
    return complex(float(re), float(im))


def parse_spectrum(doc) -> tuple[SpectrumData, list[str]]:
    """SpectrumData from a decoded SpectrumFile plus any notices (e.g. merges)."""
    if not isinstance(doc, dict):
        raise InputError("spectrum file must be a JSON object")
    extra = set(doc) - {"nu", "modes"}
    if extra:
        raise InputError(f"unknown top-level keys {sorted(extra)}")
    if "modes" not in doc:
        raise InputError("missing key 'modes'")
    nu = doc.get("nu", 0.0)
    if isinstance(nu, bool) or not isinstance(nu, (int, float)):
        raise InputError("'nu' must be a real number")
    modes_doc = doc["modes"]
    if not isinstance(modes_doc, list) or not modes_doc:
        raise InputError("'modes' must be a non-empty list")
    modes, seen, notices = [], {}, []
    for i, m in enumerate(modes_doc):
        where = f"mode {i}"
        if not isinstance(m, dict):
            raise InputError(f"{where}: expected an object")
        extra = set(m) - {"alpha", "F", "G"}
        if extra:
            raise InputError(f"{where}: unknown keys {sorted(extra)}")
        if "alpha" not in m:
            raise InputError(f"{where}: missing 'alpha'")
        alpha = _complex_field(m["alpha"], f"{where}.alpha")
        F = _complex_field(m.get("F", 0.0), f"{where}.F")
        G = _complex_field(m.get("G", 0.0), f"{where}.G")
        try:
            modes.append(Mode(alpha, F, G))
        except HKError as exc:
            raise InputError(f"{where}: {exc}") from None
        if alpha in seen:
            notices.append(f"mode {i} repeats alpha of mode {seen[alpha]}; amplitudes merged")
        else:
            seen[alpha] = i
    try:
        return SpectrumData(float(nu), tuple(modes)), notices
    except HKError as exc:
        raise InputError(str(exc)) from None


def load_spectrum(path) -> tuple[SpectrumData, list[str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON: {exc}") from None
    return parse_spectrum(doc)


def spectrum_to_doc(spec: SpectrumData) -> dict:
    def c(z):
        z = complex(z)
        return {"re": z.real, "im": z.imag}

    return {"nu": spec.nu, "modes": [{"alpha": c(m.alpha), "F": c(m.F), "G": c(m.G)} for m in spec.modes]}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def emit_report(report: SuiteReport) -> str:
    # json writes floats with the shortest repr that round-trips exactly
    return json.dumps(report.to_dict(), indent=2, sort_keys=False) + "\n"


def parse_report(text: str) -> SuiteReport:
    return SuiteReport.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def parse_box(text: str) -> tuple:
    """"lo,hi" (same for all four axes) or eight comma-separated numbers."""
    try:
        nums = [float(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"bad box {text!r}: expected numbers separated by commas") from None
    if len(nums) == 2:
        nums = nums * 4
    if len(nums) != 8:
        raise InputError(f"bad box {text!r}: give lo,hi or eight numbers")
    box = tuple((nums[2 * i], nums[2 * i + 1]) for i in range(4))
    if any(not (np.isfinite(lo) and np.isfinite(hi) and lo < hi) for lo, hi in box):
        raise InputError(f"bad box {text!r}: every interval needs finite lo < hi")
    return box


def parse_point(text: str) -> np.ndarray:
    try:
        x = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise InputError(f"bad point {text!r}") from None
    if x.shape != (4,) or not np.all(np.isfinite(x)):
        raise InputError(f"bad point {text!r}: need four finite numbers x1,x2,x3,x4")
    return x


def _fmt(x) -> str:
    return FMT.format(float(x) + 0.0)  # + 0.0 folds -0 into 0


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(args, out) -> int:
    spec, notices = load_spectrum(args.spectrum)
    for n in notices:
        print(f"notice: {n}", file=out)
    pot = expand(spec)
    conj = conjugation_check(pot)
    if not conj.passed:
        raise InputError("expansion is not closed under conjugation")
    sol = is_solution(pot, spec.nu)
    print(f"ok: {len(spec.modes)} mode(s), {len(pot)} exponential terms, "
          f"worst term residual {sol.worst_residual:.3g}", file=out)
    return EXIT_OK


def cmd_expand(args, out) -> int:
    spec, _ = load_spectrum(args.spectrum)
    pot = expand(spec)
    cols = ["amplitude", "lp", "lq", "l2", "lw"]
    print(",".join(f"{c}_re,{c}_im" for c in cols), file=out)
    for t in pot.terms:
        vals = []
        for z in t.as_tuple():
            z = complex(z)
            vals += [_fmt(z.real), _fmt(z.imag)]
        print(",".join(vals), file=out)
    return EXIT_OK


def _config(args) -> SuiteConfig:
    if args.points < 1:
        raise InputError("--points must be >= 1")
    return SuiteConfig(box=parse_box(args.box), n_points=args.points, seed=args.seed)


def cmd_verify(args, out) -> int:
    spec, notices = load_spectrum(args.spectrum)
    config = _config(args)
    for n in notices:
        print(f"notice: {n}", file=out)
    report = full_report(expand(spec), spec.nu, config)
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name:24s} worst={c.worst_residual:.3e} tol={c.tolerance:.1e} n={c.n_points}",
              file=out)
    print("guards: " + ", ".join(f"{k}={v}" for k, v in report.guards.items()), file=out)
    print(f"orientation sign: {report.orientation_sign}", file=out)
    k = report.stats.get("killing", {})
    print(f"killing scan ({k.get('field')}): rank {k.get('rank')}, "
          f"{len(k.get('null_directions', []))} null direction(s)", file=out)
    for m in report.messages:
        print(f"note: {m}", file=out)
    if args.report:
        Path(args.report).write_text(emit_report(report))
    print("RESULT: " + ("PASS" if report.passed else "FAIL: " + ", ".join(report.failures())), file=out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _print_matrix(M, out):
    for row in M:
        print("  " + " ".join(f"{float(x): .17g}" for x in row), file=out)


def cmd_metric(args, out) -> int:
    spec, _ = load_spectrum(args.spectrum)
    x = parse_point(args.at)
    pot = expand(spec)
    g = geometry.metric_at(pot, spec.nu, x)
    print(f"c^2 - |a|^2 = {_fmt(g.locus_value)}", file=out)
    print("metric (x1..x4):", file=out)
    _print_matrix(g.matrix, out)
    print("eigenvalues: " + " ".join(_fmt(e) for e in g.eigenvalues()), file=out)
    return EXIT_OK


def cmd_curvature(args, out) -> int:
    spec, _ = load_spectrum(args.spectrum)
    x = parse_point(args.at)
    pot = expand(spec)
    pack = curvature.riemann(pot, spec.nu, x)
    dens = curvature.densities_from_pack(pack)
    vj = jet(pot, as_point(x), 1)
    print(f"c^2 - |a|^2 = {_fmt(geometry.singular_locus_value(vj, spec.nu))}", file=out)
    print(f"orientation sign: {pack.orientation_sign}", file=out)
    print(f"riemann norm: {_fmt(pack.riemann_norm)}", file=out)
    print(f"ricci / riemann: {_fmt(pack.ricci_ratio)}", file=out)
    print(f"asd residual: {_fmt(pack.asd_residual)}", file=out)
    print(f"flat: {pack.flat}", file=out)
    print(f"euler density: {_fmt(dens.chi_density)}", file=out)
    print(f"signature density: {_fmt(dens.tau_density)}", file=out)
    print(f"hitchin saturation residual: {_fmt(dens.saturation_residual)}", file=out)
    return EXIT_OK


def _scan_value(pot, nu, x, field):
    try:
        if field == "v":
            return evaluate(pot, x)
        if field == "locus":
            return geometry.singular_locus_value(jet(pot, as_point(x), 1), nu)
        return curvature.riemann(pot, nu, x).asd_residual
    except (HKError, np.linalg.LinAlgError):
        return float("nan")


def cmd_scan(args, out) -> int:
    spec, _ = load_spectrum(args.spectrum)
    if args.grid < 1:
        raise InputError("--grid must be >= 1")
    box = parse_box(args.box)
    pot = expand(spec)
    axes = [np.linspace(lo, hi, args.grid) if args.grid > 1 else np.array([0.5 * (lo + hi)])
            for lo, hi in box]
    sink = open(args.out, "w", newline="") if args.out else out
    try:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["x1", "x2", "x3", "x4", args.field])
        for x in itertools.product(*axes):
            w.writerow([_fmt(t) for t in x] + [_fmt(_scan_value(pot, spec.nu, np.array(x), args.field))])
    finally:
        if args.out:
            sink.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    P = argparse.ArgumentParser(prog="hkcma", description=__doc__.splitlines()[0])
    sub = P.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("spectrum", help="SpectrumFile JSON")
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "check a spectrum file")
    add("expand", cmd_expand, "print the exponential terms")
    sp = add("verify", cmd_verify, "run the residual suites")
    sp.add_argument("--points", type=int, default=200)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--box", default="-1,1", help="lo,hi or eight numbers lo1,hi1,...,lo4,hi4")
    sp.add_argument("--report", help="write a ReportFile JSON here")
    for name, func in (("metric", cmd_metric), ("curvature", cmd_curvature)):
        sp = add(name, func, f"{name} at one point")
        sp.add_argument("--at", required=True, help="x1,x2,x3,x4")
    sp = add("scan", cmd_scan, "CSV grid of a scalar field")
    sp.add_argument("--grid", type=int, default=5, help="points per axis (n^4 rows)")
    sp.add_argument("--box", default="-1,1")
    sp.add_argument("--field", choices=("locus", "v", "asd"), default="locus")
    sp.add_argument("--out", help="CSV file (default: standard output)")
    return P


#: Options whose values usually start with a minus sign.
_NUMERIC_LIST_OPTIONS = ("--box", "--at")


def _attach_negative_values(argv: list) -> list:
    """Rewrite ``--box -1,1`` as ``--box=-1,1`` so argparse does not read it as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _NUMERIC_LIST_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NearLocusError as exc:
        print(f"guard: {exc} (c^2 - |a|^2 = {exc.locus_value:.17g})", file=sys.stderr)
        return EXIT_FAIL
    except (DomainError, OrientationError, RangeError) as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except HKError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
