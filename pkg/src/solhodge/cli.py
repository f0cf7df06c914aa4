"""Batch command-line driver: named analyses, JSON reports, CSV tables.

Configs are flat JSON files whose numeric fields are decimal strings
(parsed at full double precision, no float-literal ambiguity).  Every run
writes ``report.json`` into the output directory; reports are
byte-identical across repeated runs with the same config and seed, except
for the ``timings`` block.

Exit codes: 0 success, 2 invalid config, 3 computation error (the error
is also recorded in the report when one can be written).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import warnings
from pathlib import Path

_EPILOG = """\
subcommands:
  harmonic    harmonic space dimensions per degree, multiplier spectrum
              (spectrum.csv: bin_lo, bin_hi, count)
  decompose   Hodge decomposition of a seeded random form: part norms,
              reconstruction and orthogonality residuals
  cohomology  primitive of D_alpha f for seeded f: round-trip error,
              partial L2 norms (divergence.csv: radius, l2_norm)
  classify    divisor records, fitted diophantine exponent, continued
              fraction cross-check (records.csv: m1..mn, norm, divisor,
              is_record, is_minkowski_witness)
  witnesses   witness sequences and their partial sums (witnesses.csv:
              family, m1..mn, divisor, coefficient, cum_data_sq,
              cum_solution_sq)
  rs-current  spectral vs flow-box current values, exactness residuals
              (currents.csv: name, spectral, quadrature, estimated_error,
              abs_difference)

config keys (all numeric values are decimal strings):
  harmonic:   basis [[..],..], radius, bins?
  decompose:  basis, radius, degree, decay?, seed?, support?
  cohomology: alpha [..], radius, decay?, seed?
  classify:   alpha, radius, cf_depth?
  witnesses:  alpha, radius, count, families?
  rs-current: alpha (length 2), radius? (mode radius), boxes?, resolution?,
              decay?, seed?, trials?
"""


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _apply_thread_flag(argv)

    parser = argparse.ArgumentParser(
        prog="solhodge",
        description="Leafwise Hodge analyses of linear torus foliations.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=sorted(SCHEMAS))
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None, help="output directory (default solhodge-out)")
    parser.add_argument("--seed", default=None, help="override the config seed (decimal string)")
    parser.add_argument("--radius", default=None, help="override the config radius (decimal string)")
    parser.add_argument("--threads", default=None, help="BLAS/OpenMP thread cap (set before numerics load)")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if not isinstance(config, dict):
        print("config error: top level must be a JSON object", file=sys.stderr)
        return 2

    if args.seed is not None:
        config["seed"] = args.seed
    if args.radius is not None:
        config["radius"] = args.radius

    violations = validate_config(args.subcommand, config)
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        return 2

    out_dir = Path(args.out if args.out is not None else config.get("out", "solhodge-out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    report = {
        "subcommand": args.subcommand,
        "version": _package_version(),
        "config": {k: config[k] for k in sorted(config)},
        "warnings": [],
        "timings": {},
    }
    started = time.perf_counter()
    status = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            report["results"] = _RUNNERS[args.subcommand](_typed_config(args.subcommand, config), out_dir)
        except Exception as exc:  # propagated verbatim into the report
            report["error"] = {"type": type(exc).__name__, "message": str(exc)}
            status = 3
    report["warnings"] = [_describe_warning(w) for w in caught]
    report["timings"]["wall_seconds"] = time.perf_counter() - started

    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if status == 0:
        print(f"wrote {report_path}")
    else:
        print(f"error during computation; partial report at {report_path}", file=sys.stderr)
    return status


def _apply_thread_flag(argv):
    """Honour --threads before any numerical library is imported."""
    for i, token in enumerate(argv):
        value = None
        if token == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif token.startswith("--threads="):
            value = token.split("=", 1)[1]
        if value is not None and value.isdigit():
            for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
                os.environ.setdefault(var, value)
            return


def _package_version() -> str:
    from . import __version__
    return __version__


def _describe_warning(w) -> dict:
    entry = {"category": w.category.__name__, "message": str(w.message)}
    modes = getattr(w.message, "modes", None)
    if modes:
        entry["modes"] = [list(m) for m in modes]
    return entry


def _jsonify(obj):
    import numpy as np
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


# ----------------------------------------------------------------------
# config schemas and validation

def _num(kind, minimum=None, required=True, default=None):
    return {"kind": kind, "min": minimum, "required": required, "default": default}


SCHEMAS = {
    "harmonic": {
        "basis": {"kind": "basis", "required": True},
        "radius": _num("float", 1.0),
        "bins": _num("int", 4, required=False, default="32"),
    },
    "decompose": {
        "basis": {"kind": "basis", "required": True},
        "radius": _num("float", 1.0),
        "degree": _num("int", 0),
        "decay": _num("float", 0.0, required=False, default="4"),
        "seed": _num("int", 0, required=False, default="0"),
        "support": _num("int", 3, required=False),
    },
    "cohomology": {
        "alpha": {"kind": "vector", "required": True},
        "radius": _num("float", 1.0),
        "decay": _num("float", 0.0, required=False, default="3"),
        "seed": _num("int", 0, required=False, default="0"),
    },
    "classify": {
        "alpha": {"kind": "vector", "required": True},
        "radius": _num("float", 1.0),
        "cf_depth": _num("int", 1, required=False, default="32"),
    },
    "witnesses": {
        "alpha": {"kind": "vector", "required": True},
        "radius": _num("float", 1.0),
        "count": _num("int", 0),
        "families": _num("int", 1, required=False, default="1"),
    },
    "rs-current": {
        "alpha": {"kind": "vector", "required": True},
        "radius": _num("float", 0.0, required=False, default="8"),
        "boxes": _num("int", 2, required=False, default="4"),
        "resolution": _num("int", 16, required=False, default="1024"),
        "decay": _num("float", 0.0, required=False, default="2"),
        "seed": _num("int", 0, required=False, default="0"),
        "trials": _num("int", 0, required=False, default="3"),
    },
}

_COMMON_KEYS = {"out"}


def _parse_decimal(value, kind):
    if not isinstance(value, str):
        raise ValueError("numeric fields must be decimal strings")
    if kind == "int":
        return int(value, 10)
    number = float(value)
    if number != number or number in (float("inf"), float("-inf")):
        raise ValueError("value must be finite")
    return number


def _parse_vector(value):
    if not isinstance(value, list) or not value or not all(isinstance(x, str) for x in value):
        raise ValueError("must be a list of decimal strings")
    vec = [_parse_decimal(x, "float") for x in value]
    if all(x == 0.0 for x in vec):
        raise ValueError("must be nonzero")
    return vec


def _parse_basis(value):
    if not isinstance(value, list) or not value:
        raise ValueError("must be a list of vectors")
    rows = [_parse_vector(row) for row in value]
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise ValueError("vectors must share a common length")
    if len(rows) >= n:
        raise ValueError(f"need k < n, got k={len(rows)}, n={n}")
    return rows


def validate_config(subcommand: str, config: dict) -> list[str]:
    """Field-level violations; empty iff a run would pass all preconditions.

    Never raises: every problem is reported as a message naming the field.
    """
    violations = []
    schema = SCHEMAS.get(subcommand)
    if schema is None:
        return [f"unknown subcommand {subcommand!r}"]
    for key in config:
        if key not in schema and key not in _COMMON_KEYS:
            violations.append(f"{key}: unknown key for {subcommand}")
    for key, spec in schema.items():
        if key not in config:
            if spec.get("required"):
                violations.append(f"{key}: required key missing")
            continue
        value = config[key]
        try:
            if spec["kind"] == "basis":
                _parse_basis(value)
            elif spec["kind"] == "vector":
                _parse_vector(value)
            else:
                number = _parse_decimal(value, spec["kind"])
                if spec.get("min") is not None and number < spec["min"]:
                    violations.append(f"{key}: must be >= {spec['min']}, got {value}")
        except ValueError as exc:
            violations.append(f"{key}: {exc}")
    if subcommand == "rs-current" and "alpha" in config and not violations:
        if len(config["alpha"]) != 2:
            violations.append("alpha: flow-box quadrature needs a direction in R^2")
    if "out" in config and not isinstance(config.get("out"), str):
        violations.append("out: must be a string path")
    return violations


def _typed_config(subcommand: str, config: dict) -> dict:
    out = {}
    for key, spec in SCHEMAS[subcommand].items():
        raw = config.get(key, spec.get("default"))
        if raw is None:
            continue
        if spec["kind"] == "basis":
            out[key] = _parse_basis(raw)
        elif spec["kind"] == "vector":
            out[key] = _parse_vector(raw)
        else:
            out[key] = _parse_decimal(raw, spec["kind"])
    return out


# ----------------------------------------------------------------------
# runners

def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _run_harmonic(cfg: dict, out_dir: Path) -> dict:
    import numpy as np
    from .foliation import build_frame, laplacian_eigenvalues, minimality_scan
    from .forms import harmonic_dimension
    from .lattice import enumerate_ball

    frame = build_frame(cfg["basis"])
    radius = cfg["radius"]
    dims = [harmonic_dimension(frame, radius, p) for p in range(frame.k + 1)]
    scan = minimality_scan(frame, radius)
    lam = laplacian_eigenvalues(frame, enumerate_ball(frame.n, radius))
    positive = lam[lam > 0.0]
    counts, edges = np.histogram(np.log10(positive), bins=int(cfg["bins"]))
    _write_csv(out_dir / "spectrum.csv", ["log10_lambda_lo", "log10_lambda_hi", "count"],
               [[float(edges[i]), float(edges[i + 1]), int(counts[i])] for i in range(len(counts))])
    return {
        "dimensions": dims,
        "ergodic_dimension": dims[0],
        "min_nonzero_multiplier": float(positive.min()),
        "resonance_scan": {"min_mode": list(scan.min_mode), "min_value": scan.min_value,
                           "resonant": scan.resonant},
        "mode_count": int(len(lam)),
    }


def _run_decompose(cfg: dict, out_dir: Path) -> dict:
    from .foliation import build_frame
    from .forms import hodge_decompose, inner_product, random_form

    frame = build_frame(cfg["basis"])
    degree = int(cfg["degree"])
    if degree > frame.k:
        raise ValueError(f"degree {degree} exceeds leaf dimension {frame.k}")
    f = random_form(frame, degree, cfg["radius"], cfg["decay"], int(cfg["seed"]),
                    support=int(cfg["support"]) if "support" in cfg else None)
    dec = hodge_decompose(f)
    recon = dec.reconstruction()
    scale = max(f.l2_norm(), 1e-300)
    return {
        "input_norm": f.l2_norm(),
        "part_norms": {"harmonic": dec.harmonic.l2_norm(), "exact": dec.exact.l2_norm(),
                       "coexact": dec.coexact.l2_norm()},
        "reconstruction_residual": (recon - f).l2_norm() / scale,
        "orthogonality": {
            "harmonic_exact": abs(inner_product(dec.harmonic, dec.exact)) / scale**2,
            "harmonic_coexact": abs(inner_product(dec.harmonic, dec.coexact)) / scale**2,
            "exact_coexact": abs(inner_product(dec.exact, dec.coexact)) / scale**2,
        },
    }


def _run_cohomology(cfg: dict, out_dir: Path) -> dict:
    import numpy as np
    from .forms import random_form
    from .smalldiv import direction_derivative, line_frame, solve_cohomological

    alpha = cfg["alpha"]
    frame = line_frame(alpha)
    f = random_form(frame, 0, cfg["radius"], cfg["decay"], int(cfg["seed"]), real=True)
    f.coeffs[(f.modes == 0).all(axis=1)] = 0.0
    g = direction_derivative(f, alpha)
    sol = solve_cohomological(g, alpha)
    roundtrip = float(np.abs(sol.solution.coeffs - f.coeffs).max())
    _write_csv(out_dir / "divergence.csv", ["radius", "l2_norm"],
               [[rho, v] for rho, v in sol.l2_by_radius])
    return {
        "roundtrip_max_error": roundtrip,
        "l2_by_radius": [[rho, v] for rho, v in sol.l2_by_radius],
        "divergence_slope": sol.divergence_slope,
        "small_divisor_modes": [list(m) for m in sol.small_divisor_modes],
    }


def _run_classify(cfg: dict, out_dir: Path) -> dict:
    from .smalldiv import (convergent_modes, estimate_exponent, minkowski_witnesses,
                           record_divisors)

    alpha = cfg["alpha"]
    radius = cfg["radius"]
    records = record_divisors(alpha, radius)
    witnesses = minkowski_witnesses(alpha, radius)
    n = len(alpha)
    header = [f"m{i + 1}" for i in range(n)] + ["norm", "divisor", "is_record", "is_minkowski_witness"]
    _write_csv(out_dir / "records.csv", header,
               [list(r.mode) + [r.norm, r.divisor, r.is_record, r.is_minkowski_witness]
                for r in records])
    estimate = estimate_exponent(records, scan_radius=radius)
    results = {
        "record_count": len(records),
        "witness_count": len(witnesses),
        "records": [list(r.mode) for r in records],
        "tau_hat": estimate.tau_hat,
        "gamma_hat": estimate.gamma_hat,
        "slope": estimate.slope,
        "fit_residual": estimate.residual,
    }
    if n == 2 and alpha[0] != 0.0:
        conv = convergent_modes(alpha, radius, int(cfg["cf_depth"]))
        results["convergent_modes"] = [list(m) for m in conv]
        results["records_are_convergent_pairs"] = all(r.mode in conv for r in records)
    return results


def _run_witnesses(cfg: dict, out_dir: Path) -> dict:
    from .smalldiv import build_witness_sequence, witness_families

    alpha = cfg["alpha"]
    count = int(cfg["count"])
    families = int(cfg["families"])
    if families == 1:
        sequences = [build_witness_sequence(alpha, cfg["radius"], count)]
    else:
        sequences = witness_families(alpha, cfg["radius"], count, families)
    rows = []
    out = []
    for fam, seq in enumerate(sequences):
        data = seq.data_partial_sums()
        sol = seq.solution_partial_sums()
        for i, mode in enumerate(seq.modes):
            rows.append([fam] + list(mode) + [seq.divisors[i], seq.coefficients[i],
                                              float(data[i]), float(sol[i])])
        out.append({
            "modes": [list(m) for m in seq.modes],
            "divisors": list(seq.divisors),
            "data_partial_sum": float(data[-1]) if len(data) else 0.0,
            "solution_partial_sum": float(sol[-1]) if len(sol) else 0.0,
        })
    n = len(alpha)
    header = (["family"] + [f"m{i + 1}" for i in range(n)]
              + ["divisor", "coefficient", "cum_data_sq", "cum_solution_sq"])
    _write_csv(out_dir / "witnesses.csv", header, rows)
    return {"families": out, "count": count}


def _run_rs_current(cfg: dict, out_dir: Path) -> dict:
    from .current import (build_kronecker_atlas, coordinate_form, exactness_check,
                          homology_class, quadrature_report, random_ambient_form,
                          rs_spectral, spectral_report)
    from .smalldiv import line_frame

    alpha = cfg["alpha"]
    frame = line_frame(alpha)
    atlas = build_kronecker_atlas(alpha, int(cfg["boxes"]))
    resolution = int(cfg["resolution"])
    seed = int(cfg["seed"])
    trials = int(cfg["trials"])

    named = [("dx1", coordinate_form(2, 1)), ("dx2", coordinate_form(2, 2))]
    named += [(f"random-{i}", random_ambient_form(2, 1, cfg["radius"], cfg["decay"], seed + i))
              for i in range(trials)]
    rows, entries = [], []
    for name, omega in named:
        spec_val = rs_spectral(omega, frame)
        quad = quadrature_report(atlas, omega, resolution, frame)
        rows.append([name, spec_val, quad.value, quad.estimated_error,
                     abs(spec_val - quad.value)])
        entries.append({"name": name, "spectral": spec_val, "quadrature": quad.to_dict()})
    exact_residuals = [
        exactness_check(atlas, random_ambient_form(2, 0, cfg["radius"], cfg["decay"], seed + 1000 + i),
                        resolution)
        for i in range(trials)
    ]
    _write_csv(out_dir / "currents.csv",
               ["name", "spectral", "quadrature", "estimated_error", "abs_difference"], rows)
    return {
        "homology_class": [float(x) for x in homology_class(frame)],
        "forms": entries,
        "exactness_residuals": exact_residuals,
        "max_route_difference": max(r[4] for r in rows),
        "spectral_report_dx1": spectral_report(named[0][1], frame).to_dict(),
        "atlas": atlas.spec(),
    }


_RUNNERS = {
    "harmonic": _run_harmonic,
    "decompose": _run_decompose,
    "cohomology": _run_cohomology,
    "classify": _run_classify,
    "witnesses": _run_witnesses,
    "rs-current": _run_rs_current,
}


if __name__ == "__main__":
    raise SystemExit(main())
