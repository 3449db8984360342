"""Command-line entry point ``toric-szego``.

Exit status: 0 success, 1 a verification check failed, 2 unreadable input or
bad arguments, 3 the polytope failed validation (or the requested check does
not apply to it), 4 a numeric result was flagged as unconverged.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _backend
from .characters import (
    character_exact,
    character_leading,
    character_trace,
    phi_grid,
    sweep_header,
    CharacterValue,
)
from .kernels import (
    FactorizationRefused,
    check_factorizable,
    diagonal_trace,
    kernel_report,
    multiplier_table,
    symbol_ratio,
    verify_factorization,
)
from .norming import norm_table, projective_structure, total_volume_check
from .partition import partition_counts
from .polytope import (
    LatticePolytope,
    PolytopeParseError,
    PolytopeValidationError,
    ehrhart_count,
    euclidean_volume,
    is_delzant,
    parse_polytope,
)
from .quadrature import QuadratureConfig
from .reporting import csv_text, dumps, git_blob_hash, write_text

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID, EXIT_FLAGGED = 0, 1, 2, 3, 4
THREADS_ENV = "TORIC_SZEGO_THREADS"


class UsageError(Exception):
    """Bad command-line values; reported with exit status 2."""


class FlaggedResult(Exception):
    """Unconverged numbers where the caller asked for strict output."""


# ---------------------------------------------------------------------------
# argument values


def parse_int_list(text: str) -> list[int]:
    """"6", "8,16,32" or "2..5" (inclusive)."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(s) for s in text.split("..", 1))
            if hi < lo:
                raise UsageError(f"empty range {text!r}")
            out = list(range(lo, hi + 1))
        else:
            out = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"expected integers, got {text!r}") from None
    if not out or any(n < 1 for n in out):
        raise UsageError(f"dilations must be positive integers, got {text!r}")
    return out


def parse_vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(Fraction(s.strip())) for s in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"expected a comma-separated vector, got {text!r}") from None


@dataclass
class RunConfig:
    command: str
    path: Path
    polytope: LatticePolytope
    file_hash: str
    Ns: list[int]
    cfg: QuadratureConfig
    seed: int
    samples: int
    threads: int
    allow_flagged: bool
    out_dir: Path | None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "polytope_file": str(self.path),
            "polytope_sha1": self.file_hash,
            "N": self.Ns,
            "quadrature": self.cfg.as_dict(),
            "seed": self.seed,
            "samples": self.samples,
            "threads": self.threads,
            "allow_flagged": self.allow_flagged,
            "backend": _backend.BACKEND,
        }
        out.update(self.extra)
        return out


def _threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if value < 1:
        raise UsageError("thread count must be >= 1")
    return value


def resolve(args, command: str, default_Ns: list[int]) -> RunConfig:
    path = Path(args.polytope)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise PolytopeParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise PolytopeParseError(f"{path} is not UTF-8 text") from None
    P = parse_polytope(text, name=path.stem)

    if args.range is not None and args.N is not None:
        raise UsageError("give either -N or --range, not both")
    if args.range is not None:
        Ns = parse_int_list(args.range if ".." in args.range else args.range.replace("-", ".."))
    elif args.N is not None:
        Ns = parse_int_list(args.N)
    else:
        Ns = list(default_Ns)
    try:
        cfg = QuadratureConfig(rtol=args.tol, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    return RunConfig(
        command=command,
        path=path,
        polytope=P,
        file_hash=git_blob_hash(raw),
        Ns=Ns,
        cfg=cfg,
        seed=args.seed,
        samples=args.samples,
        threads=_threads(args.threads),
        allow_flagged=args.allow_flagged,
        out_dir=None if args.out_dir is None else Path(args.out_dir),
    )


def emit(rc: RunConfig, name: str, text: str) -> None:
    target = write_text(rc.out_dir, name, text)
    if target is None:
        sys.stdout.write(text)
    else:
        print(target)


def _csv_with_config(rc: RunConfig, header, rows, name: str) -> None:
    emit(rc, name, csv_text(header, rows))
    if rc.out_dir is not None:
        write_text(rc.out_dir, Path(name).stem + ".config.json", dumps(rc.as_dict()))


def _fmt_point(p) -> str:
    return "(" + ",".join(str(int(x)) for x in p) + ")"


# ---------------------------------------------------------------------------
# polytope


def polytope_summary(P: LatticePolytope, Ns: list[int]) -> dict:
    cert = is_delzant(P)
    vol = euclidean_volume(P)
    return {
        "name": P.name,
        "dim": P.dim,
        "vertices": [list(v) for v in P.vertices],
        "facets": [{"normal": list(f.normal), "offset": f.offset} for f in P.facets],
        "weights": P.weights_payload(),
        "volume": str(vol),
        "volume_float": float(vol),
        "delzant": cert.delzant,
        "lattice_points": {str(n): ehrhart_count(P, n) for n in Ns},
    }


def cmd_polytope_info(args) -> int:
    rc = resolve(args, "polytope info", [1])
    info = polytope_summary(rc.polytope, rc.Ns)
    info["config"] = rc.as_dict()
    if args.json:
        emit(rc, f"{rc.path.stem}_info.json", dumps(info))
        return EXIT_OK
    P = rc.polytope
    lines = [f"polytope {P.name}: dimension {P.dim}, {len(P.vertices)} vertices"]
    lines += ["vertices:"] + [f"  {_fmt_point(v)}" for v in P.vertices]
    lines += ["facets (normal . x <= offset):"]
    lines += [f"  {_fmt_point(f.normal)} . x <= {f.offset}" for f in P.facets]
    lines.append(f"volume: {info['volume']}")
    lines.append(f"Delzant: {'yes' if info['delzant'] else 'no'}")
    for n, count in info["lattice_points"].items():
        lines.append(f"lattice points of {n}P: {count}")
    sys.stdout.write("\n".join(lines) + "\n")
    if rc.out_dir is not None:
        print(write_text(rc.out_dir, f"{rc.path.stem}_info.json", dumps(info)))
    return EXIT_OK


def cmd_polytope_delzant(args) -> int:
    rc = resolve(args, "polytope delzant", [1])
    cert = is_delzant(rc.polytope)
    if cert.delzant:
        line = "Delzant"
    else:
        bad = cert.failures[0]
        det = "n/a (wrong edge count)" if bad.determinant is None else str(abs(bad.determinant))
        line = f"NOT Delzant (vertex {_fmt_point(bad.vertex)}: |det|={det})"
    print(line)
    if args.json or rc.out_dir is not None:
        payload = cert.as_dict()
        payload["config"] = rc.as_dict()
        text = dumps(payload)
        if rc.out_dir is not None:
            print(write_text(rc.out_dir, f"{rc.path.stem}_delzant.json", text))
        else:
            sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tables


def _single_N(rc: RunConfig) -> int:
    if len(rc.Ns) != 1:
        raise UsageError("this command takes a single dilation -N")
    return rc.Ns[0]


def _checked_norms(rc: RunConfig, N: int, method: str = "auto"):
    norms = norm_table(rc.polytope, N, rc.cfg, method=method, threads=rc.threads)
    flagged = norms.flagged()
    if flagged and not rc.allow_flagged:
        pts = ", ".join(_fmt_point(e.alpha) for e in flagged[:5])
        raise FlaggedResult(f"{len(flagged)} norm entries did not converge at N={N}: {pts}")
    return norms


def cmd_partition(args) -> int:
    rc = resolve(args, "partition", [1])
    N = _single_N(rc)
    table = partition_counts(rc.polytope, N)
    _csv_with_config(rc, table.header(), table.rows(), f"{rc.path.stem}_partition_N{N}.csv")
    return EXIT_OK


def cmd_norms(args) -> int:
    rc = resolve(args, "norms", [1])
    rc.extra["method"] = args.method
    N = _single_N(rc)
    norms = norm_table(rc.polytope, N, rc.cfg, method=args.method, threads=rc.threads)
    _csv_with_config(rc, norms.header(), norms.rows(), f"{rc.path.stem}_norms_N{N}.csv")
    if norms.flagged() and not rc.allow_flagged:
        print(f"error: {len(norms.flagged())} flagged norm entries", file=sys.stderr)
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_multiplier(args) -> int:
    rc = resolve(args, "multiplier", [1])
    N = _single_N(rc)
    norms = _checked_norms(rc, N)
    mult = multiplier_table(partition_counts(rc.polytope, N), norms)
    _csv_with_config(rc, mult.header(), mult.rows(), f"{rc.path.stem}_multiplier_N{N}.csv")
    return EXIT_OK


def cmd_kernel(args) -> int:
    rc = resolve(args, "kernel", [1])
    N = _single_N(rc)
    norms = _checked_norms(rc, N)
    rep = kernel_report(rc.polytope, N, rc.samples, rc.seed, rc.cfg, norms, threads=rc.threads)
    payload = rep.as_dict()
    payload["config"] = rc.as_dict()
    emit(rc, f"{rc.path.stem}_kernel_N{N}.json", dumps(payload))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification suites


def _check(name: str, value, limit, ok: bool, **info) -> dict:
    out = {"check": name, "value": value, "limit": limit, "pass": bool(ok)}
    out.update(info)
    return out


def _finite(x) -> bool:
    return x is not None and math.isfinite(float(x))


def suite_factorization(rc: RunConfig, Ns: list[int]) -> list[dict]:
    check_factorizable(rc.polytope)
    checks = []
    for N in Ns:
        norms = _checked_norms(rc, N)
        rep = verify_factorization(rc.polytope, N, rc.samples, rc.seed, rc.cfg, norms, rc.threads)
        limit = 1e-10 if rep.exact_norms else 1e-6
        checks.append(
            _check("max_resid_rel", rep.max_resid_rel, limit, rep.max_resid_rel <= limit, N=N,
                   exact_norms=rep.exact_norms)
        )
        # the double-precision routes should agree to rounding relative to the term sizes
        scaled = max(p.resid_scaled for p in rep.pairs)
        checks.append(_check("max_resid_scaled_double", scaled, 1e-12, scaled <= 1e-12, N=N))
        dev = max(p.expansion_dev for p in rep.pairs)
        checks.append(_check("max_expansion_dev", dev, 1e-9, dev <= 1e-9, N=N))
        checks.append(
            _check("max_hermitian_dev", rep.max_hermitian_dev, 1e-9, rep.max_hermitian_dev <= 1e-9, N=N)
        )
    return checks


def _random_phis(m: int, count: int, seed: int) -> list[tuple[float, ...]]:
    rng = np.random.default_rng(seed)
    return [tuple(float(v) for v in rng.uniform(0.0, 2 * math.pi, m)) for _ in range(count)]


def suite_characters(rc: RunConfig, Ns: list[int], leading_Ns: list[int]) -> list[dict]:
    P = rc.polytope
    checks = []
    phis = [tuple([0.0] * P.dim)] + _random_phis(P.dim, 5, rc.seed)
    for N in Ns:
        norms = _checked_norms(rc, N)
        worst = 0.0
        for phi in phis:
            exact = character_exact(P, N, phi)
            tr = character_trace(P, N, norms, phi, rc.cfg)
            worst = max(worst, CharacterValue(N, phi, exact, tr.value, None).gap_trace)
        checks.append(_check("trace_vs_exact", worst, 1e-5, worst <= 1e-5, N=N, phis=len(phis)))
    if len(leading_Ns) >= 2:
        zero = [0.0] * P.dim
        gaps = []
        for N in leading_Ns:
            val = CharacterValue(N, tuple(zero), character_exact(P, N, zero), None,
                                 character_leading(P, N, zero, rc.cfg).value)
            gaps.append(val.gap_leading)
        for (n1, g1), (n2, g2) in zip(zip(leading_Ns, gaps), zip(leading_Ns[1:], gaps[1:])):
            ratio = g1 / g2 if g2 > 0 else float("inf")
            checks.append(
                _check("leading_gap_ratio", ratio, [1.7, 2.3], 1.7 <= ratio <= 2.3,
                       N=[n1, n2], gaps=[g1, g2])
            )
    return checks


def suite_asymptotics(rc: RunConfig, Ns: list[int], ray) -> list[dict]:
    P = rc.polytope
    series = symbol_ratio(P, ray, Ns, rc.cfg)
    vals = series.floats
    checks = [
        _check("symbol_ratio_defined", int(np.sum(np.isfinite(vals))), len(Ns),
               bool(np.all(np.isfinite(vals)) and not any(f == "flagged" for f in series.flags)),
               series=series.as_dict())
    ]
    proj = projective_structure(P)
    if proj is not None and proj[1] == 1:
        m = P.dim
        expected = [Fraction(N**m * math.factorial(N), math.factorial(N + m)) for N in Ns]
        same = list(series.values) == expected
        checks.append(_check("closed_form_ratio", [str(v) for v in series.values],
                             [str(e) for e in expected], same))
    diffs = np.abs(series.differences)
    if len(diffs) >= 2:
        shrinking = bool(np.all(diffs[1:] < diffs[:-1]) or np.all(diffs == 0))
        checks.append(_check("first_differences_shrink", diffs.tolist(), "decreasing", shrinking))
    if len(Ns) >= 3 and not any(v is None for v in series.values):
        limit = series.richardson_limit()
        dist = [abs(v - limit) for N, v in zip(Ns, vals) if N >= 8]
        mono = all(b <= a for a, b in zip(dist, dist[1:]))
        checks.append(_check("richardson_distance_decreasing", dist, "decreasing", mono,
                             extrapolated=limit))
    return checks


def cmd_verify(args) -> int:
    suite = args.suite
    defaults = {"factorization": [1, 2, 3, 4, 5, 6], "characters": [1, 2, 3, 4],
                "asymptotics": [8, 16, 32], "all": []}
    rc = resolve(args, f"verify {suite}", defaults[suite])
    P = rc.polytope

    def upto(Ns, fallback):
        # a single dilation means "every N up to it"
        if args.N is None and args.range is None:
            return fallback
        return list(range(1, Ns[0] + 1)) if len(Ns) == 1 else Ns

    ray = parse_vector(args.ray) if args.ray else tuple(float(x) for x in P.barycenter)
    if len(ray) != P.dim:
        raise UsageError(f"--ray needs {P.dim} components")
    leading_Ns = parse_int_list(args.leading_N)
    rc.extra.update(ray=list(ray), leading_N=leading_Ns)

    report: dict = {"config": rc.as_dict(), "suites": {}}
    if suite in ("factorization", "all"):
        report["suites"]["factorization"] = suite_factorization(rc, upto(rc.Ns, defaults["factorization"]))
    if suite in ("characters", "all"):
        report["suites"]["characters"] = suite_characters(
            rc, upto(rc.Ns, defaults["characters"]), leading_Ns
        )
    if suite in ("asymptotics", "all"):
        Ns = rc.Ns if suite == "asymptotics" else defaults["asymptotics"]
        report["suites"]["asymptotics"] = suite_asymptotics(rc, Ns, ray)
    all_checks = [c for checks in report["suites"].values() for c in checks]
    report["passed"] = all(c["pass"] for c in all_checks)
    report["failed"] = [c["check"] for c in all_checks if not c["pass"]]
    emit(rc, f"{rc.path.stem}_verify_{suite}.json", dumps(report))
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# characters


def _phis_from_args(args, m: int) -> list[tuple[float, ...]]:
    if args.grid is not None:
        if args.grid < 1:
            raise UsageError("--grid must be >= 1")
        return phi_grid(m, args.grid)
    phis = [parse_vector(p) for p in (args.phi or ["0" + ",0" * (m - 1)])]
    for p in phis:
        if len(p) != m:
            raise UsageError(f"--phi needs {m} components")
    return phis


def cmd_character(args) -> int:
    mode = args.mode
    rc = resolve(args, f"character {mode}", [1])
    P = rc.polytope
    N = _single_N(rc)
    phis = _phis_from_args(args, P.dim)
    rc.extra["phi"] = [list(p) for p in phis]
    need_trace = mode in ("trace", "sweep")
    need_leading = mode in ("leading", "sweep")
    norms = _checked_norms(rc, N) if need_trace else None

    def one(phi):
        exact = character_exact(P, N, phi)
        tr = character_trace(P, N, norms, phi, rc.cfg).value if need_trace else None
        ld = character_leading(P, N, phi, rc.cfg).value if need_leading else None
        return CharacterValue(N, tuple(phi), exact, tr, ld)

    if rc.threads > 1 and len(phis) > 1:
        with ThreadPoolExecutor(max_workers=rc.threads) as pool:
            values = list(pool.map(one, phis))
    else:
        values = [one(p) for p in phis]

    if mode == "sweep":
        _csv_with_config(rc, sweep_header(P.dim), [v.row() for v in values],
                         f"{rc.path.stem}_characters_N{N}.csv")
        return EXIT_OK
    out = []
    for v in values:
        entry = {"phi": list(v.phi), "exact": v.exact}
        if v.trace is not None:
            entry.update(trace=v.trace, gap_trace=v.gap_trace)
        if v.leading is not None:
            entry.update(leading=v.leading, gap_leading=v.gap_leading)
        out.append(entry)
    emit(rc, f"{rc.path.stem}_character_{mode}_N{N}.json",
         dumps({"config": rc.as_dict(), "N": N, "values": out}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    rc = resolve(args, "report", [1, 2, 3])
    P = rc.polytope
    report = {"config": rc.as_dict(), "polytope": polytope_summary(P, rc.Ns)}
    vol = total_volume_check(P, rc.cfg)
    report["volume_check"] = {
        "quadrature": vol.quadrature,
        "err": vol.err,
        "exact": str(vol.polytope_volume),
        "gap": vol.gap,
        "converged": vol.converged,
    }
    levels = []
    flagged_any = False
    for N in rc.Ns:
        count = ehrhart_count(P, N)
        part = partition_counts(P, N)
        norms = norm_table(P, N, rc.cfg, threads=rc.threads)
        flagged_any |= bool(norms.flagged())
        mult = multiplier_table(part, norms)
        eig = mult.as_floats()
        ok = eig[np.isfinite(eig)]
        tr = diagonal_trace(P, N, norms, rc.cfg)
        levels.append({
            "N": N,
            "lattice_points": count,
            "partition_total": str(part.total()),
            "sum_rule": part.total() == len(P.points) ** N,
            "partition_zeros": [list(a) for a in part.zeros()],
            "norms_exact": norms.all_exact,
            "norms_flagged": [list(e.alpha) for e in norms.flagged()],
            "multiplier_min": float(ok.min()) if ok.size else None,
            "multiplier_max": float(ok.max()) if ok.size else None,
            "diagonal_trace": tr.value.real,
            "diagonal_trace_gap": abs(tr.value.real - count) / count,
        })
    report["levels"] = levels
    emit(rc, f"{rc.path.stem}_report.json", dumps(report))
    if flagged_any and not rc.allow_flagged:
        print("error: flagged norm entries in report", file=sys.stderr)
        return EXIT_FLAGGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_polytope(p: argparse.ArgumentParser) -> None:
    p.add_argument("polytope", help="polytope JSON file")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("-N", "--N", "--dilation", dest="N", metavar="N",
                   help="dilation: 6, 8,16,32 or 1..6")
    p.add_argument("--range", "--dilate", dest="range", metavar="A..B",
                   help="dilation range (inclusive); also accepts a single value")
    p.add_argument("--tol", type=float, default=1e-8, help="quadrature relative tolerance")
    p.add_argument("--samples", type=int, default=20, help="random point pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--allow-flagged", action="store_true",
                   help="do not fail on unconverged norm entries")
    p.add_argument("-o", "--out-dir", default=None, help="write outputs here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="toric-szego", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    poly = sub.add_parser("polytope", help="describe a polytope")
    psub = poly.add_subparsers(dest="action", required=True)
    for name, fn, text in (("info", cmd_polytope_info, "vertices, facets, volume, lattice counts"),
                           ("delzant", cmd_polytope_delzant, "smoothness certificate")):
        sp = psub.add_parser(name, parents=[common], help=text)
        _add_polytope(sp)
        sp.add_argument("--json", action="store_true", help="print the JSON summary")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("partition", parents=[common], help="lattice-path counts P_N (CSV)")
    _add_polytope(sp)
    sp.set_defaults(func=cmd_partition)
    sp = sub.add_parser("norms", parents=[common], help="monomial norms Q_N (CSV)")
    _add_polytope(sp)
    sp.add_argument("--method", choices=("auto", "quadrature", "closed"), default="auto")
    sp.set_defaults(func=cmd_norms)
    sp = sub.add_parser("multiplier", parents=[common], help="multiplier eigenvalues (CSV)")
    _add_polytope(sp)
    sp.set_defaults(func=cmd_multiplier)
    sp = sub.add_parser("kernel", parents=[common], help="kernel values at random pairs (JSON)")
    _add_polytope(sp)
    sp.set_defaults(func=cmd_kernel)

    sp = sub.add_parser("verify", parents=[common], help="run a verification suite (JSON)")
    sp.add_argument("suite", choices=("factorization", "characters", "asymptotics", "all"))
    _add_polytope(sp)
    sp.add_argument("--ray", default=None, help="interior direction for asymptotics")
    sp.add_argument("--leading-N", default="8,16,32",
                    help="dilations for the leading-order character check")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("character", parents=[common], help="polytope characters")
    sp.add_argument("mode", choices=("exact", "trace", "leading", "sweep"))
    _add_polytope(sp)
    sp.add_argument("--phi", action="append", help="angle vector, repeatable")
    sp.add_argument("--grid", type=int, default=None, help="uniform grid with n points per axis")
    sp.set_defaults(func=cmd_character)

    sp = sub.add_parser("report", parents=[common], help="summary of every quantity (JSON)")
    _add_polytope(sp)
    sp.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PolytopeParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (PolytopeValidationError, FactorizationRefused) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FlaggedResult as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGGED


if __name__ == "__main__":
    sys.exit(main())
