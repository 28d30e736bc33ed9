"""Command line: ``run <config.json>``, ``validate <config.json>``, ``gallery``.

Exit codes: 0 success, 1 input error (schema, domain), 2 invariant
violation or gallery deviation.  Reports are CSV files with a fixed column
order plus a JSON run manifest (config hash, seed, versions, timing).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import re
import sys
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .errors import InvariantViolation, UnifGammaError
from .expressions import compile_expression
from .reports import ReportRow, write_rows
from .spaces import GaussianDrawConfig, SpaceSpec

OUT_ENV = "UNIFGAMMA_OUT"
DECIMAL = r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$"

_num = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": DECIMAL}]}
_num_or_inf = {"oneOf": [_num, {"enum": ["inf"]}]}
_int = {"oneOf": [{"type": "integer", "minimum": 0},
                  {"type": "string", "pattern": r"^\d+$"}]}
_expr = {"oneOf": [{"type": "string", "minLength": 1}, {"type": "number"}]}
_numlist = {"type": "array", "items": _num, "minItems": 1}
_space = {"type": "object", "additionalProperties": False, "required": ["kind"],
          "properties": {"kind": {"enum": ["ellp", "c0"]}, "p": _num,
                         "scalar": {"enum": ["real", "complex"]}}}
_system = {"eigenvalue": _expr, "beta": _expr, "N": _int}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(required)}


PARAMS = {
    "gamma-norm": _obj({"space": _space, "coefficients": _expr, "N": _int}, ["coefficients", "N"]),
    "family-bound": _obj({"family": {"enum": ["projection", "rank-one"]}, "N": _int, "h": _expr,
                          "targets": _int, "rotations": _int}, ["family", "N"]),
    "gram": _obj({"sequence": _obj({"kind": {"enum": ["pure_exp", "modulated", "power_scaled"]},
                                    "lambdas": _numlist, "normalized": {"type": "boolean"},
                                    "b": _num, "rho": _num, "alpha": _num, "r": _num, "theta": _num,
                                    "n_min": {"type": "integer"}, "n_max": {"type": "integer"}},
                                   ["kind"]),
                  "export_matrix": {"type": "boolean"}}, ["sequence"]),
    "phi-bound": _obj({"phi": _numlist, "tail": _num_or_inf}, ["phi"]),
    "halfplane": _obj({**_system, "b_grid": _numlist, "n_re": _int, "n_im": _int},
                      ["eigenvalue", "beta", "N", "b_grid"]),
    "sector": _obj({**_system, "theta": _num, "q": _num, "n_min": {"type": "integer"},
                    "n_max": {"type": "integer"}}, ["eigenvalue", "beta", "N"]),
    "rl-decay": _obj({**_system, "b": _num, "s_grid": _numlist}, ["eigenvalue", "beta", "N", "b", "s_grid"]),
    "weiss-equivalence": _obj({**_system, "schedule": {"type": "array", "items": _int, "minItems": 2},
                               "eps": _num, "persist": _int}, ["eigenvalue", "beta"]),
    "off-diagonal": _obj({"eigenvalue": _expr, "beta": _expr, "delta": _num, "targets": _numlist},
                         ["eigenvalue", "beta", "targets"]),
    "ou-sim": _obj({**_system, "dt": _num, "horizon": _num, "n_paths": _int,
                    "check_fidelity": {"type": "boolean"}}, ["eigenvalue", "beta", "N", "dt", "horizon", "n_paths"]),
    "counterexample-gallery": _obj({}),
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": sorted(PARAMS)},
        "id": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "params": {"type": "object"},
        "draws": _obj({"seed": _int, "n_samples": _int, "batch_count": _int}),
        "output": {"type": "string"},
    },
}


class ConfigError(UnifGammaError):
    pass


def _path(err) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path)


def validate_config(cfg: dict) -> None:
    """Raise :class:`ConfigError` naming the offending key path."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        raise ConfigError(f"{_path(errs[0])}: {errs[0].message}")
    sub = jsonschema.Draft202012Validator(PARAMS[cfg["experiment"]])
    errs = sorted(sub.iter_errors(cfg.get("params", {})), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        raise ConfigError(f"/params{_path(e)}: {e.message}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    validate_config(cfg)
    return cfg


def _canon(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (int, float)):
        return _dec(x)
    if isinstance(x, str):
        try:
            return _dec(x) if re.match(DECIMAL, x) else x
        except InvalidOperation:
            return x
    if isinstance(x, list):
        return [_canon(v) for v in x]
    return {k: _canon(v) for k, v in sorted(x.items())}


def _dec(x) -> str:
    d = Decimal(str(x)).normalize()
    return "0" if d == 0 else format(d, "f") if abs(d.adjusted()) < 30 else str(d)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical config (numbers normalized, ``output`` excluded)."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(_canon(body), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _f(x) -> float:
    if x == "inf":
        return math.inf
    return float(x)


def _i(x) -> int:
    return int(x)


def draws_of(cfg: dict) -> GaussianDrawConfig:
    d = cfg.get("draws", {})
    return GaussianDrawConfig(_i(d.get("seed", 0)), _i(d.get("n_samples", 100_000)),
                              _i(d.get("batch_count", 20)))


def _system(p, default_N=10_000):
    from .weiss import DiagonalSystem
    lam, beta = compile_expression(p["eigenvalue"]), compile_expression(p["beta"])
    return DiagonalSystem(lam, beta, truncation=_i(p.get("N", default_N)))


# -- experiment runners: each returns a list of ReportRow ---------------------

def _run_gamma_norm(eid, p, dc):
    from .gamma_norm import ColumnOperator, gamma_norm_sq
    sp = p.get("space", {"kind": "ellp", "p": 2})
    space = SpaceSpec.c0(sp.get("scalar", "complex")) if sp["kind"] == "c0" else \
        SpaceSpec.ell(_f(sp.get("p", 2)), sp.get("scalar", "complex"))
    N = _i(p["N"])
    a = compile_expression(p["coefficients"])(np.arange(1, N + 1))
    est = gamma_norm_sq(ColumnOperator.diagonal(a, space), dc)
    return [ReportRow(eid, "gamma_norm_sq", est.mean, est.std_error, N, dc.seed)]


def _run_family(eid, p, dc):
    from .families import OperatorFamily, unif_gamma_lower
    N = _i(p["N"])
    if p["family"] == "projection":
        F = OperatorFamily.projection_family(N)
    else:
        h = compile_expression(p.get("h", "2**(-(k-1)/2)"))(np.arange(1, N + 1))
        F = OperatorFamily.rank_one_family(h, _i(p.get("targets", 4)))
    rep = unif_gamma_lower(F, cfg=dc, n_rotations=_i(p.get("rotations", 8)))
    rows = [ReportRow(eid, "lower_bound", rep.lower_bound, rep.lower_std_error, N, dc.seed),
            ReportRow(eid, "upper_bound", rep.upper_bound, 0.0, N, dc.seed),
            ReportRow(eid, "verdict", rep.verdict, 0.0, N, dc.seed)]
    rows += [ReportRow(eid, f"tail;cut={c}", e.mean, e.std_error, N, dc.seed)
             for c, e in zip(rep.cuts, rep.tail_profile)]
    return rows


def _run_gram(eid, p, dc, out_dir=None):
    from .hilbert_sequences import HilbertSequenceSpec, gram, modulated_bound, power_scaled_phi
    s = p["sequence"]
    kind = s["kind"]
    if kind == "pure_exp":
        spec = HilbertSequenceSpec.pure_exp([_f(x) for x in s["lambdas"]], s.get("normalized", False))
    elif kind == "modulated":
        spec = HilbertSequenceSpec.modulated(_f(s.get("b", 1)), _f(s.get("rho", 0)), s.get("n_min", 0), s.get("n_max", 0))
    else:
        spec = HilbertSequenceSpec.power_scaled(_f(s.get("alpha", 0.5)), _f(s.get("r", 1)), _f(s.get("theta", 0)),
                                                s.get("n_min", 0), s.get("n_max", 0))
    g = gram(spec)
    rows = [ReportRow(eid, "op_norm_sqrt", g.op_norm_sqrt, 0.0, g.dim, dc.seed),
            ReportRow(eid, "min_eigenvalue", g.min_eigenvalue, 0.0, g.dim, dc.seed)]
    if kind == "modulated":
        rows.append(ReportRow(eid, "closed_form_bound", modulated_bound(spec.b), 0.0, g.dim, dc.seed))
    elif kind == "power_scaled":
        rows.append(ReportRow(eid, "phi_bound", power_scaled_phi(spec)[1], 0.0, g.dim, dc.seed))
    if p.get("export_matrix") and out_dir is not None:
        g.to_csv(Path(out_dir) / f"{eid}_gram.csv")
    return rows


def _run_phi(eid, p, dc):
    from .hilbert_sequences import phi_bound
    phi = [_f(x) for x in p["phi"]]
    v = phi_bound(phi, _f(p.get("tail", 0)))
    return [ReportRow(eid, "phi_bound", v, 0.0, len(phi), dc.seed)]


def _run_halfplane(eid, p, dc):
    from .laplace import halfplane_scaling
    sys_ = _system(p, 1000)
    res = halfplane_scaling(sys_.representable(), [_f(b) for b in p["b_grid"]],
                            n_re=_i(p.get("n_re", 3)), n_im=_i(p.get("n_im", 4)), n_rotations=0, cuts=[])
    N = sys_.truncation
    rows = [ReportRow(eid, f"L;b={b!r}", float(L), 0.0, N, dc.seed) for b, L in zip(res["b"], res["L"])]
    rows += [ReportRow(eid, "slope", res["slope"], 0.0, N, dc.seed),
             ReportRow(eid, "fitted_constant", res["fitted_constant"], 0.0, N, dc.seed)]
    return rows


def _run_sector(eid, p, dc):
    from .laplace import sector_family
    sys_ = _system(p, 1000)
    _, rep = sector_family(sys_.representable(), _f(p.get("theta", 0)), p.get("n_min", -8), p.get("n_max", 30),
                           q=_f(p.get("q", 2)), n_rotations=0, cuts=[])
    N = sys_.truncation
    return [ReportRow(eid, "lower_bound", rep.lower, 0.0, N, dc.seed),
            ReportRow(eid, "theorem_upper", rep.theorem_upper, 0.0, N, dc.seed),
            ReportRow(eid, "orthogonal_upper", rep.orthogonal_upper, 0.0, N, dc.seed)]


def _run_rl(eid, p, dc):
    from .laplace import gamma_rl_decay
    sys_ = _system(p, 10_000)
    tab = gamma_rl_decay(sys_.representable(), _f(p["b"]), [_f(s) for s in p["s_grid"]])
    return tab.rows(eid, dc.seed)


def _run_weiss(eid, p, dc):
    from .series import DEFAULT_SCHEDULE
    from .weiss import weiss_equivalence_report
    sys_ = _system(p, 10_000)
    sched = [_i(x) for x in p["schedule"]] if "schedule" in p else DEFAULT_SCHEDULE
    rep = weiss_equivalence_report(sys_, sched, _f(p.get("eps", 0.1)), _i(p.get("persist", 4)))
    N = sys_.truncation
    rows = []
    for name, s in (("invariant", rep.invariant), ("half_power", rep.half_power), ("resolvent", rep.resolvent)):
        rows.append(ReportRow(eid, name, s.value, 0.0, s.truncation, dc.seed))
        rows.append(ReportRow(eid, f"{name};trend", s.trend, 0.0, s.schedule[-1], dc.seed))
    rows.append(ReportRow(eid, "verdict", rep.verdict, 0.0, N, dc.seed))
    return rows


def _run_offdiag(eid, p, dc):
    from .weiss import DiagonalSystem, OffDiagonalSystem, off_diagonal_contrapositive_run
    sys_ = DiagonalSystem(compile_expression(p["eigenvalue"]), compile_expression(p["beta"]))
    od = OffDiagonalSystem.diagonal_functional(sys_, _f(p.get("delta", 1)))
    rows = []
    for tr in off_diagonal_contrapositive_run(od, [_f(m) for m in p["targets"]]):
        K = int(tr.K) if tr.K is not None else 0
        rows.append(ReportRow(eid, f"M={tr.M!r};verdict", tr.verdict, 0.0, K, dc.seed))
        if tr.K is not None:
            rows.append(ReportRow(eid, f"M={tr.M!r};K", str(tr.K), 0.0, K, dc.seed))
        for i, s in enumerate(tr.steps):
            rows.append(ReportRow(eid, f"M={tr.M!r};step={i};slack", s.slack, 0.0, K, dc.seed))
        if tr.verdict != "NOT-APPLICABLE":
            rows.append(ReportRow(eid, f"M={tr.M!r};witness_value", tr.witness_value, 0.0, K, dc.seed))
    return rows


def _run_ou(eid, p, dc):
    from .weiss import ou_simulate
    sys_ = _system(p, 50)
    n_paths = _i(p["n_paths"])
    r = ou_simulate(sys_, _f(p["dt"]), _f(p["horizon"]), n_paths,
                    GaussianDrawConfig(dc.seed, n_paths, dc.batch_count),
                    check_fidelity=p.get("check_fidelity", True))
    rows = [ReportRow(eid, f"var;k={k + 1}", float(v), float(s), sys_.truncation, dc.seed)
            for k, (v, s) in enumerate(zip(r.variances, r.std_errors))]
    rows.append(ReportRow(eid, "total", r.total, r.total_std_error, sys_.truncation, dc.seed))
    return rows


RUNNERS = {"gamma-norm": _run_gamma_norm, "family-bound": _run_family, "phi-bound": _run_phi,
           "halfplane": _run_halfplane, "sector": _run_sector, "rl-decay": _run_rl,
           "weiss-equivalence": _run_weiss, "off-diagonal": _run_offdiag, "ou-sim": _run_ou}


def versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "unifgamma": __version__}


def write_manifest(out_dir: Path, eid: str, cfg: dict, seed: int, outputs: list, wall_ms: float, status: str):
    man = {"experiment_id": eid, "experiment": cfg.get("experiment", "gallery"),
           "config_sha256": config_hash(cfg), "seed": seed, "versions": versions(),
           "outputs": outputs, "status": status, "wall_time_ms": round(wall_ms, 3)}
    with open(out_dir / f"{eid}_manifest.json", "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(arg) -> Path:
    d = Path(arg or os.environ.get(OUT_ENV) or "unifgamma-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def run_config(cfg: dict, out: str | None = None) -> Path:
    validate_config(cfg)
    kind = cfg["experiment"]
    eid = cfg.get("id", kind)
    dc = draws_of(cfg)
    out_dir = _out_dir(out or cfg.get("output"))
    t0 = time.perf_counter()
    status = "ok"
    try:
        if kind == "counterexample-gallery":
            rows, failures = gallery_rows(dc.seed)
            if failures:
                status = "deviation"
        elif kind == "gram":
            rows = _run_gram(eid, cfg.get("params", {}), dc, out_dir)
        else:
            rows = RUNNERS[kind](eid, cfg.get("params", {}), dc)
    except InvariantViolation:
        write_manifest(out_dir, eid, cfg, dc.seed, [], (time.perf_counter() - t0) * 1e3, "invariant-violation")
        raise
    csv_path = out_dir / f"{eid}.csv"
    write_rows(csv_path, rows)
    write_manifest(out_dir, eid, cfg, dc.seed, [csv_path.name], (time.perf_counter() - t0) * 1e3, status)
    if status == "deviation":
        raise InvariantViolation("gallery fixtures deviate from expectations", witness=failures)
    return csv_path


# -- gallery -------------------------------------------------------------------

LINDE_PIETSCH_ORACLE = 3.201823648474319   # E max_k g_k^2 / log(k+1), k <= 1000 (quadrature)


def default_expectations() -> dict:
    """Expected values per fixture: ``(kind, value, tolerance)``.

    ``eq``: relative tolerance; ``le``: value is an upper bound; ``mc``:
    within ``tolerance`` standard errors.
    """
    return {
        "projection.lower;N=100": ("eq", 100.0, 1e-12),
        "projection.tail;N=100;cut=50": ("eq", 51.0, 1e-12),
        "rank_one.lower;N=20": ("eq", 2 * (1 - 2.0 ** -20), 1e-12),
        "shift.block;n=2": ("eq", 0.5, 1e-12),
        "shift.block;n=10": ("eq", 0.32, 1e-12),
        "shift.block;n=20": ("eq", 2.56, 1e-12),
        "linde_pietsch.gamma_sq;N=1000": ("mc", LINDE_PIETSCH_ORACLE, 4.0),
        "gram.modulated;b=1;window=257": ("le", 1.07547, 1e-9),
        "gram.power_scaled;alpha=0.5;window=64": ("le", 1 + math.sqrt(2), 1e-9),
        "factor_four.gap;N=10000": ("le", 1e-12, 0.0),
    }


def gallery_values(seed: int = 0) -> dict:
    """Compute every fixture: ``{id: (value, std_error, truncation)}``."""
    from .families import OperatorFamily, shift_orbit_divergence, unif_gamma_lower
    from .gamma_norm import ColumnOperator, gamma_norm_sq
    from .hilbert_sequences import HilbertSequenceSpec, gram
    from .weiss import DiagonalSystem, factor_four_identity

    out = {}
    cfg = GaussianDrawConfig(seed, 200_000, 20)
    rep = unif_gamma_lower(OperatorFamily.projection_family(100), cfg=cfg, cuts=[1, 50, 100])
    out["projection.lower;N=100"] = (rep.lower_bound, 0.0, 100)
    out["projection.tail;N=100;cut=50"] = (rep.tail_profile[1].mean, 0.0, 100)
    h = 2.0 ** (-np.arange(20) / 2)
    rep = unif_gamma_lower(OperatorFamily.rank_one_family(h, 4), cfg=cfg)
    out["rank_one.lower;N=20"] = (rep.standard_lower, 0.0, 20)
    blocks = shift_orbit_divergence(20)
    for n in (2, 10, 20):
        b = blocks[n - 1]
        out[f"shift.block;n={n}"] = (b.block_value, 0.0, b.block_end)
    a = 1 / np.sqrt(np.log(np.arange(1, 1001) + 1.0))
    est = gamma_norm_sq(ColumnOperator.diagonal(a, SpaceSpec.c0()), cfg)
    out["linde_pietsch.gamma_sq;N=1000"] = (est.mean, est.std_error, 1000)
    g = max(gram(HilbertSequenceSpec.modulated(1.0, rho, -128, 128)).op_norm_sqrt for rho in (0, 0.25, 0.5, 0.9))
    out["gram.modulated;b=1;window=257"] = (g, 0.0, 257)
    g = gram(HilbertSequenceSpec.power_scaled(0.5, 1.0, 0.0, 0, 63)).op_norm_sqrt
    out["gram.power_scaled;alpha=0.5;window=64"] = (g, 0.0, 64)
    r = factor_four_identity(DiagonalSystem(lambda k: k ** 2, 1.0, truncation=10_000))
    out["factor_four.gap;N=10000"] = (r.relative_gap, 0.0, 10_000)
    return out


def check_fixture(kind, expected, tol, value, se) -> bool:
    if kind == "eq":
        return abs(value - expected) <= tol * max(1.0, abs(expected))
    if kind == "le":
        return value <= expected + tol
    return abs(value - expected) <= tol * se


def gallery_rows(seed: int = 0, expectations: dict | None = None):
    exp = default_expectations()
    if expectations:
        for k, v in expectations.items():
            if k not in exp:
                raise ConfigError(f"unknown fixture {k!r} in expectations")
            kind, _, tol = exp[k]
            exp[k] = (kind, float(v), tol)
    vals = gallery_values(seed)
    rows, failures = [], []
    for fid, (value, se, trunc) in vals.items():
        kind, expected, tol = exp[fid]
        ok = check_fixture(kind, expected, tol, value, se)
        rows.append(ReportRow("gallery", fid, value, se, trunc, seed))
        rows.append(ReportRow("gallery", f"{fid};expected", expected, 0.0, trunc, seed))
        rows.append(ReportRow("gallery", f"{fid};pass", ok, 0.0, trunc, seed))
        if not ok:
            failures.append({"fixture": fid, "value": value, "expected": expected, "kind": kind})
    return rows, failures


def run_gallery(seed: int = 0, out: str | None = None, expectations: dict | None = None) -> tuple[Path, list]:
    out_dir = _out_dir(out)
    t0 = time.perf_counter()
    rows, failures = gallery_rows(seed, expectations)
    csv_path = out_dir / "gallery.csv"
    write_rows(csv_path, rows)
    cfg = {"experiment": "counterexample-gallery", "draws": {"seed": seed},
           "expectations": expectations or {}}
    write_manifest(out_dir, "gallery", cfg, seed, [csv_path.name], (time.perf_counter() - t0) * 1e3,
                   "deviation" if failures else "ok")
    return csv_path, failures


# -- entry point -----------------------------------------------------------------

def _dump_witness(w) -> str:
    try:
        return json.dumps(w, default=repr, indent=2)
    except (TypeError, ValueError):
        return repr(w)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="unifgamma", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="execute one experiment config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./unifgamma-out)")
    v = sub.add_parser("validate", help="schema-check a config without running it")
    v.add_argument("config")
    g = sub.add_parser("gallery", help="regression run of the bundled fixtures")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--expectations", help="JSON file overriding expected fixture values")
    args = ap.parse_args(argv)
    try:
        if args.cmd == "validate":
            load_config(args.config)
            print(f"{args.config}: valid")
            return 0
        if args.cmd == "run":
            path = run_config(load_config(args.config), args.out)
            print(path)
            return 0
        exp = None
        if args.expectations:
            try:
                with open(args.expectations) as fh:
                    exp = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read expectations: {exc}") from None
        path, failures = run_gallery(args.seed, args.out, exp)
        print(path)
        if failures:
            print("fixture deviations:\n" + _dump_witness(failures), file=sys.stderr)
            return 2
        return 0
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}\nwitness:\n{_dump_witness(exc.witness)}", file=sys.stderr)
        return 2
    except (UnifGammaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
