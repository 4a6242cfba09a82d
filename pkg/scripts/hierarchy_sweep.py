"""Bounds along the hierarchy for the toy problem and a one-variable contraction problem.

    python scripts/hierarchy_sweep.py --d-max 3 --out results/

The toy problem at d=4 (basis 330) takes about a minute and the bundled
solver stops with a numerical failure there, which the status column shows.
"""
import argparse
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from tracepop.algebra import TracePoly
from tracepop.examples import toy
from tracepop.gns import ExtractionError, MomentFunctional, pure_trace_gns, validate_minimizer
from tracepop.relaxation import ProblemSpec, RelaxationOptions, build_relaxation, solve_relaxation


@dataclass
class SweepConfig:
    d_max: int = 3
    mode: str = "per-k"
    extract: bool = True
    out: Optional[str] = None


def contraction():
    T = TracePoly.tr
    return ProblemSpec(1, T((0, 0, 0)) - T((0,)) * T((0, 0)), [], 1, "min", ["x"], "contraction").validate()


def sweep(spec, cfg: SweepConfig):
    rows = []
    for d in range(2, cfg.d_max + 1):
        t0 = time.perf_counter()
        relax = build_relaxation(spec, d, RelaxationOptions(boundedness=cfg.mode))
        res = solve_relaxation(relax)
        row = dict(problem=spec.title, d=d, basis=len(relax.basis), classes=relax.n_classes,
                   status=res.status, bound=res.bound, seconds=time.perf_counter() - t0)
        if cfg.extract and res.optimal:
            L = MomentFunctional.from_result(res)
            try:
                m = pure_trace_gns(L, d - 1)
                rep = validate_minimizer(m, spec, L, tol=1e-6)
                row.update(flat=True, dims=[c.dim for c in m.components],
                           weights=[round(float(w), 8) for w in m.weights], minimizer_value=rep.objective_value,
                           valid=rep.ok)
            except ExtractionError:
                row.update(flat=False)
        rows.append(row)
        if not res.optimal:
            extra = "  (bound not certified)"
        elif "flat" not in row:
            extra = ""
        elif row["flat"]:
            extra = f"  flat dims={row['dims']} minimizer {'valid' if row['valid'] else 'rejected'}"
        else:
            extra = "  not flat"
        print(f"{spec.title:12s} d={d}  basis={row['basis']:5d}  {res.status:17s} bound={row['bound']:+.8f}  "
              f"{row['seconds']:6.2f}s{extra}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d-max", type=int, default=3)
    ap.add_argument("--mode", default="per-k", choices=["per-k", "single"])
    ap.add_argument("--no-extract", action="store_true")
    ap.add_argument("--out")
    a = ap.parse_args()
    cfg = SweepConfig(a.d_max, a.mode, not a.no_extract, a.out)
    rows = sweep(toy(), cfg) + sweep(contraction(), cfg)
    if cfg.out:
        path = Path(cfg.out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "hierarchy_sweep.json").write_text(json.dumps(dict(config=asdict(cfg), rows=rows), indent=1))
        print(f"wrote {path / 'hierarchy_sweep.json'}")


if __name__ == "__main__":
    main()
