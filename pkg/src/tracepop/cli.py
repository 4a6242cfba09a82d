"""Command line interface: ``tracepop {solve,extract,certify,export}``.

Exit codes: 0 optimal / verified, 1 verification or extraction failed,
2 infeasible or unbounded, 3 numerical failure or iteration limit,
4 input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .algebra import TracePoly
from .basis import BasisOverflowError
from .relaxation import (
    PER_K,
    SINGLE,
    ProblemSpec,
    RelaxationError,
    RelaxationOptions,
    RelaxationResult,
    build_relaxation,
    minimal_order,
    solve_relaxation,
    tracial_state_moments,
)
from .sdp.core import (
    INFEASIBLE,
    MAX_ITER,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    ProblemFormatError,
    ProblemSizeError,
    SolverSettings,
)
from .sdp.external import SolverConfigurationError

log = logging.getLogger("tracepop")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_INPUT = 4

_STATUS_EXIT = {
    OPTIMAL: EXIT_OK,
    INFEASIBLE: EXIT_INFEASIBLE,
    UNBOUNDED: EXIT_INFEASIBLE,
    MAX_ITER: EXIT_NUMERICAL,
    NUMERICAL_FAILURE: EXIT_NUMERICAL,
}


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    problem: Optional[str] = None
    example: Optional[str] = None
    d: Optional[int] = None
    d_max: Optional[int] = None
    mode: Optional[str] = None
    solver: Optional[str] = None
    tol_gap: Optional[float] = None
    rank_tol: float = 1e-6
    out: Optional[str] = None
    force: bool = False
    jobs: int = 1
    delta: Optional[int] = None
    moments: Optional[str] = None
    verify_only: Optional[str] = None
    exact: bool = False
    tol: float = 1e-6
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        cfg = cls(**{k: v for k, v in vars(ns).items() if k in cls.__dataclass_fields__})
        if cfg.command != "certify" or not cfg.verify_only:
            if cfg.command == "extract" and cfg.moments:
                if cfg.problem or cfg.example:
                    raise InputError("give either a moment file or a problem, not both")
            elif bool(cfg.problem) == bool(cfg.example):
                raise InputError("give exactly one of a problem file or --example")
        if cfg.d is not None and cfg.d < 1:
            raise InputError("--d must be positive")
        if cfg.d_max is not None and cfg.d is not None and cfg.d_max < cfg.d:
            raise InputError("--d-max is below --d")
        return cfg

    def settings(self) -> SolverSettings:
        return SolverSettings.from_env(tol_gap=self.tol_gap)

    def solver_id(self) -> str:
        s = self.solver or self.options.get("solver") or "bundled"
        if s != "bundled" and not s.startswith("external:"):
            raise InputError(f"--solver must be 'bundled' or 'external:<id>', got {s!r}")
        return s

    def relaxation_options(self) -> RelaxationOptions:
        mode = self.mode or self.options.get("boundedness") or PER_K
        try:
            return RelaxationOptions(boundedness=mode)
        except RelaxationError as e:
            raise InputError(str(e)) from None


def load_input(cfg: RunConfig):
    """Returns ``(spec, default order)`` and fills ``cfg.options``."""
    from .examples import get_example
    from .parse import ParseError, load_problem

    if cfg.example:
        try:
            ex = get_example(cfg.example)
        except KeyError as e:
            raise InputError(str(e.args[0])) from None
        if ex.heavy and not cfg.force:
            raise InputError(f"example {ex.id!r} is not run by default ({ex.note}); pass --force to try anyway")
        return ex.build(), ex.order
    try:
        spec, order, options = load_problem(cfg.problem)
    except FileNotFoundError:
        raise InputError(f"no such file: {cfg.problem}") from None
    except (ParseError, RelaxationError) as e:
        raise InputError(f"{cfg.problem}: {e}") from None
    except Exception as e:  # yaml errors
        raise InputError(f"{cfg.problem}: {e}") from None
    cfg.options = dict(options)
    return spec, order


def _orders(cfg: RunConfig, spec: ProblemSpec, default: Optional[int]) -> List[int]:
    dmin = minimal_order(spec, cfg.relaxation_options())
    if cfg.d_max is not None:
        lo = cfg.d if cfg.d is not None else dmin
        return list(range(lo, cfg.d_max + 1))
    return [cfg.d if cfg.d is not None else (default or dmin)]


def _out_path(cfg: RunConfig, name: str) -> Optional[str]:
    if not cfg.out:
        return None
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _solve_one(spec, d, cfg) -> RelaxationResult:
    relax = build_relaxation(spec, d, cfg.relaxation_options())
    return solve_relaxation(relax, cfg.settings(), cfg.solver_id())


def _print_result(res: RelaxationResult, out=None):
    out = out or sys.stdout
    s = res.relaxation.summary()
    r = res.result
    print(
        f"d={res.d}  basis={s['basis_size']}  classes={s['classes']}  variables={s['variables']}  "
        f"blocks={len(s['blocks'])}  status={res.status}  bound={res.bound:.10g}  "
        f"gap={r.gap:.2e}  iterations={r.iterations}  time={r.residuals.get('time', 0.0):.2f}s",
        file=out,
    )


def cmd_solve(cfg: RunConfig) -> int:
    spec, default = load_input(cfg)
    orders = _orders(cfg, spec, default)
    print(f"problem: {spec.title or 'untitled'} ({spec.sense}, n={spec.n}, N={spec.bound})")
    if cfg.jobs > 1 and len(orders) > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(lambda d: _solve_one(spec, d, cfg), orders))
    else:
        results = [_solve_one(spec, d, cfg) for d in orders]
    for res in results:
        _print_result(res)
    path = _out_path(cfg, "report.json")
    if path:
        with open(path, "w") as fh:
            rows = []
            for r in results:
                row = {k: v for k, v in r.relaxation.summary().items() if k != "blocks"}
                row.update(status=r.status, bound=r.bound, value=r.value, gap=r.result.gap,
                           iterations=r.result.iterations)
                rows.append(row)
            json.dump(rows, fh, indent=1)
        print(f"report written to {path}")
    return max(_STATUS_EXIT[r.status] for r in results)


def _moment_file_functional(path: str):
    """A synthetic functional from a JSON file of weighted matrix tuples."""
    from .gns import MomentFunctional

    try:
        with open(path) as fh:
            doc = json.load(fh)
        comps = [([np.array(A, dtype=float) for A in c["matrices"]], float(c.get("weight", 1.0)))
                 for c in doc["components"]]
        n = len(comps[0][0])
        names = doc.get("names") or doc.get("vars")
        d = int(doc.get("d", 1))
        delta = int(doc.get("delta", 1))
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise InputError(f"{path}: malformed moment file ({e})") from None
    spec = ProblemSpec(n, TracePoly(), [], 1, "min", names, os.path.basename(path)).validate()
    relax = build_relaxation(spec, d + delta, RelaxationOptions(boundedness="none"))
    y = tracial_state_moments(comps, relax)
    return MomentFunctional(relax, y, f"moment file {path}"), spec, d, delta


def cmd_extract(cfg: RunConfig) -> int:
    from .gns import ExtractionError, MomentFunctional, pure_trace_gns, validate_minimizer

    if cfg.moments:
        L, spec, d, delta = _moment_file_functional(cfg.moments)
        if cfg.delta is not None:
            delta = cfg.delta
        if cfg.d is not None:
            d = cfg.d
    else:
        spec, default = load_input(cfg)
        order = _orders(cfg, spec, default)[-1]
        delta = cfg.delta if cfg.delta is not None else 1
        res = _solve_one(spec, order, cfg)
        _print_result(res)
        if not res.optimal:
            print(f"cannot extract: solver status {res.status}")
            return _STATUS_EXIT[res.status]
        L = MomentFunctional.from_result(res)
        d = order - delta
    try:
        minz = pure_trace_gns(L, d, delta, rank_tol=cfg.rank_tol)
    except ExtractionError as e:
        print(f"extraction failed: {e}")
        return EXIT_VERIFY
    minz.names = list(spec.names)
    for j, c in enumerate(minz.components):
        print(f"component {j}: dimension {c.dim}, weight {c.weight:.10g}, multiplicity {c.multiplicity}")
    rep = validate_minimizer(minz, spec, L, tol=max(cfg.tol, 1e-8))
    print(f"objective at minimizer: {rep.objective_value:.10g}")
    print(f"weights sum: {rep.weight_sum:.12g}; moment error {rep.moment_error:.2e}; "
          f"objective error {rep.objective_error:.2e}")
    for m in rep.messages:
        print(f"  {m}")
    path = _out_path(cfg, "minimizer.json")
    if path:
        with open(path, "w") as fh:
            fh.write(minz.to_json())
        print(f"minimizer written to {path}")
    return EXIT_OK if rep.ok else EXIT_VERIFY


def cmd_certify(cfg: RunConfig) -> int:
    from .certificate import (
        CertificateError,
        extract_certificate,
        read_certificate,
        verify_certificate,
        write_certificate,
    )

    if cfg.verify_only:
        try:
            cert = read_certificate(cfg.verify_only)
        except FileNotFoundError:
            raise InputError(f"no such file: {cfg.verify_only}") from None
        except CertificateError as e:
            raise InputError(str(e)) from None
        a = None
        if cfg.problem or cfg.example:
            spec, _ = load_input(cfg)
            a = spec.objective
        rep = verify_certificate(cert, a, exact=cfg.exact)
        print(cert.summary())
        print(rep.describe(cert.names))
        ok = rep.passed(cfg.tol)
        print("verified" if ok else f"FAILED: residual above {cfg.tol:g}")
        return EXIT_OK if ok else EXIT_VERIFY

    spec, default = load_input(cfg)
    d = _orders(cfg, spec, default)[-1]
    res = _solve_one(spec, d, cfg)
    _print_result(res)
    if not res.optimal:
        return _STATUS_EXIT[res.status]
    try:
        cert = extract_certificate(res.relaxation, res.result)
    except CertificateError as e:
        print(f"certificate extraction failed: {e}")
        return EXIT_VERIFY
    rep = verify_certificate(cert, exact=cfg.exact)
    print(cert.summary())
    print(rep.describe(cert.names))
    path = _out_path(cfg, "certificate.txt")
    if path:
        write_certificate(cert, path)
        print(f"certificate written to {path}")
    return EXIT_OK if rep.passed(cfg.tol) else EXIT_VERIFY


def cmd_export(cfg: RunConfig) -> int:
    from .sdp.sdpa import export_sdpa

    spec, default = load_input(cfg)
    d = _orders(cfg, spec, default)[-1]
    relax = build_relaxation(spec, d, cfg.relaxation_options())
    text = export_sdpa(relax.conic)
    stem = (spec.title or "problem").replace(" ", "_")
    path = _out_path(cfg, f"{stem}-d{d}.dat-s")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
        print(f"SDPA problem written to {path} ({relax.conic.m} variables, {len(relax.conic.blocks)} blocks)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "extract": cmd_extract, "certify": cmd_certify, "export": cmd_export}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracepop", description="Trace polynomial optimization.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, problem_required=True):
        sp.add_argument("problem", nargs="?", help="YAML problem file")
        sp.add_argument("--example", help="builtin example: toy, bell-quadratic, bell-covariance, bell-bilocal")
        sp.add_argument("--d", type=int, help="relaxation order")
        sp.add_argument("--mode", choices=[PER_K, SINGLE], help="boundedness constraints (default per-k)")
        sp.add_argument("--solver", help="'bundled' (default) or 'external:<id>'")
        sp.add_argument("--tol-gap", type=float, dest="tol_gap", help="solver gap tolerance")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--force", action="store_true", help="run examples flagged as too large")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("solve", help="solve the relaxation(s) and report bounds")
    common(sp)
    sp.add_argument("--d-max", type=int, dest="d_max", help="sweep orders up to this one")
    sp.add_argument("--jobs", type=int, default=1, help="solve sweep orders concurrently")

    sp = sub.add_parser("extract", help="extract a minimizer from a flat moment functional")
    common(sp)
    sp.add_argument("--delta", type=int, help="flatness offset (default 1)")
    sp.add_argument("--rank-tol", type=float, default=1e-6, dest="rank_tol")
    sp.add_argument("--moments", help="JSON file of weighted matrix tuples instead of a solve")
    sp.add_argument("--tol", type=float, default=1e-6, help="validation tolerance")

    sp = sub.add_parser("certify", help="extract and verify a sum-of-squares certificate")
    common(sp)
    sp.add_argument("--verify-only", dest="verify_only", metavar="PROOF", help="verify an existing proof file")
    sp.add_argument("--exact", action="store_true", help="verify in rational arithmetic")
    sp.add_argument("--tol", type=float, default=1e-6, help="largest accepted residual")

    sp = sub.add_parser("export", help="write the relaxation in SDPA sparse format")
    common(sp)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = RunConfig.from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (RelaxationError, BasisOverflowError, ProblemSizeError, ProblemFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SolverConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
