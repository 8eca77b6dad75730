"""Command-line front end: ``glancing {spectrum,currents,rank-sweep,solve}``.

Every run writes ``resolved_config.json`` (all defaults filled in) to the
output directory; passing it back through ``--config`` reproduces every
non-timing output exactly.  CSV files start with a ``# schema=v1`` line.

Exit codes: 0 success, 2 configuration error, 3 numerical convergence
failure, 4 acceptance bound violated (only with ``--check``).

The frequency is given either as ``k`` or as ``ka``, read as k L / (2 pi)
(equal to k a on a circle of radius a).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import circle_oracle, filter_solver, glancing_currents, symbols
from .geometry import Curve, fock_halfwidth, glancing_points
from .operators import (Discretization, PlaneWave, SingularSystemError, WaveConfig,
                        assemble_ccfio, export_matrix, rhs, solve_dense)
from .specfun import FockQuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "curve": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["circle", "ellipse", "generic"]},
                "radius": _POS, "a": _POS, "b": _POS,
                "coefficients": {"type": "array", "items": _NUM, "minItems": 1},
            },
        },
        "wave": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "angles": {"type": "array", "items": _NUM, "minItems": 1},
                "amplitude": _POS,
                "polarization": {"enum": ["TM", "TE", "both"]},
            },
        },
        "k": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "ka": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "eta": _POS,
        "k_i_rule": {"enum": ["auto", "zero", "circle", "curvature_local"]},
        "n": {"type": ["integer", "null"], "minimum": 8},
        "seed": {"type": ["integer", "null"]},
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["S", "D", "Dstar", "N"]},
                "q_min": {"type": ["integer", "null"], "minimum": 0},
                "q_max": {"type": ["integer", "null"], "minimum": 1},
                "bound": _POS,
            },
        },
        "currents": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 11},
                "span": {"type": "number", "minimum": 1, "maximum": 7},
                "bound": _POS,
                "reference_n": {"type": ["integer", "null"], "minimum": 8},
            },
        },
        "rank_sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ka_list": {"type": "array", "items": _POS},
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "exponent_window": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
        },
        "solve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "m": {"type": "integer", "minimum": 1},
                "error_factor": _POS,
            },
        },
    },
}

DEFAULTS = {
    "curve": {"kind": "circle", "radius": 1.0},
    "wave": {"angles": [0.0], "amplitude": 1.0, "polarization": "TM"},
    "k": None,
    "ka": None,
    "eta": 1.0,
    "k_i_rule": "auto",
    "n": None,
    "seed": None,
    "spectrum": {"kind": "S", "q_min": None, "q_max": None, "bound": 0.05},
    "currents": {"samples": 241, "span": 3.0, "bound": 0.15, "reference_n": None},
    "rank_sweep": {"ka_list": [50.0, 100.0, 200.0, 400.0], "epsilon": 1e-3,
                   "exponent_window": [0.25, 0.45]},
    "solve": {"epsilon": 1e-4, "m": 64, "error_factor": 10.0},
}

COMMAND_DEFAULTS = {
    "spectrum": {"ka": 500.0},
    "currents": {"ka": 80.0, "wave": {"angles": [0.0, math.pi / 4, math.pi / 2]}},
    "rank-sweep": {},
    "solve": {"ka": 100.0},
}


class ConfigError(ValueError):
    pass


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _validate(cfg, where):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        key = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: key '{key}': {exc.message}") from None


def load_config(command, path=None, overrides=None):
    """Defaults, then the command defaults, then the file, then flag overrides."""
    cfg = _merge(DEFAULTS, COMMAND_DEFAULTS[command])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        _validate(user, str(path))
        if user.get("k") is not None and "ka" not in user:
            user["ka"] = None
        if user.get("ka") is not None and "k" not in user:
            user["k"] = None
        cfg = _merge(cfg, user)
        if "curve" in user:
            cfg["curve"] = copy.deepcopy(user["curve"])  # a curve spec is replaced whole
    overrides = overrides or {}
    cfg = _merge(cfg, overrides)
    if "curve" in overrides:
        cfg["curve"] = copy.deepcopy(overrides["curve"])
    _validate(cfg, "resolved config")
    if cfg["k"] is not None and cfg["ka"] is not None:
        raise ConfigError("give either 'k' or 'ka', not both")
    return cfg


def build_curve(cfg):
    spec = cfg["curve"]
    kind = spec["kind"]
    needed = {"circle": ["radius"], "ellipse": ["a", "b"], "generic": ["coefficients"]}[kind]
    missing = [key for key in needed if key not in spec]
    if missing:
        raise ConfigError(f"curve kind '{kind}' needs key(s) {missing}")
    try:
        return Curve.from_dict(spec)
    except ValueError as exc:
        raise ConfigError(f"curve: {exc}") from None


def wavenumber(cfg, curve, ka=None):
    ka = ka if ka is not None else cfg["ka"]
    if ka is None:
        if cfg["k"] is None:
            raise ConfigError("no frequency given: set 'k' or 'ka'")
        return float(cfg["k"])
    if curve.kind == "circle":
        return float(ka) / curve.params[0]
    return float(ka) * 2.0 * math.pi / curve.length


def wave_config(cfg, curve, k):
    rule = cfg["k_i_rule"]
    if rule == "auto":
        rule = "circle" if curve.kind == "circle" else "curvature_local"
    radius = curve.params[0] if curve.kind == "circle" else None
    if rule == "circle" and radius is None:
        raise ConfigError("k_i_rule 'circle' needs a circular curve")
    return WaveConfig(k=k, eta=cfg["eta"], k_i_rule=rule, radius=radius)


def polarizations(cfg):
    pol = cfg["wave"]["polarization"]
    return ["TM", "TE"] if pol == "both" else [pol]


def _write_csv(path, header, rows, comments=()):
    with open(path, "w", newline="") as fh:
        fh.write("# schema=v1\n")
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _report(results, check):
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_CHECK if (check and failed) else EXIT_OK


# -- subcommands ---------------------------------------------------------------------


def cmd_spectrum(cfg, out, svg, check):
    curve = build_curve(cfg)
    if curve.kind != "circle":
        raise ConfigError("spectrum needs a circular curve")
    a = curve.params[0]
    k = wavenumber(cfg, curve)
    ka = float(k * a)
    kind = cfg["spectrum"]["kind"]
    q_min = cfg["spectrum"]["q_min"] if cfg["spectrum"]["q_min"] is not None else 0
    q_max = cfg["spectrum"]["q_max"] if cfg["spectrum"]["q_max"] is not None else int(math.ceil(1.5 * ka))
    if q_max <= q_min:
        raise ConfigError("spectrum: q_max must exceed q_min")
    table = circle_oracle.eigenvalues(a, k, q_max=max(q_max, circle_oracle.default_q_max(ka)))
    q = np.arange(q_min, q_max + 1)
    lam = {"S": table.lam_s, "D": table.lam_d, "Dstar": table.lam_d, "N": table.lam_n}[kind][q]
    xi = q / a
    with np.errstate(divide="ignore", invalid="ignore"):
        princ = symbols.principal_value(kind, xi, k)
        asym = symbols.glancing_asymptotic_value(kind, xi, k, 1.0 / a)
    princ = np.where(np.isfinite(princ), princ, np.nan)
    asym = np.where(np.isfinite(asym), asym, np.nan)
    x = -symbols.fock_variable(xi, k, 1.0 / a) / symbols.C12
    glanc = np.full(q.shape, complex(np.nan, np.nan))
    ok = np.abs(x) <= 40.0
    glanc[ok] = symbols.glancing_airy_value(kind, xi[ok], k, 1.0 / a)
    rows = [(int(qq), xx, e.real, e.imag, p.real, p.imag, g.real, g.imag, s.real, s.imag)
            for qq, xx, e, p, g, s in zip(q, xi, lam, princ, glanc, asym)]
    _write_csv(out / "spectrum.csv",
               ["q", "xi", "eig_re", "eig_im", "principal_re", "principal_im",
                "glancing_re", "glancing_im", "asymptotic_re", "asymptotic_im"],
               rows, [f"kind={kind} ka={ka!r} radius={a!r}"])
    symbols.write_symbol_csv(out / "symbols.csv", symbols.symbol_sweep(
        kind, k, 1.0 / a, curve.length, q, ("principal", "glancing", "asymptotic")))
    if svg:
        def series(part):
            f = np.real if part == "Re" else np.imag
            return [symbols_series(q, f(lam), "exact eigenvalue", "#000000"),
                    symbols_series(q, f(glanc), "glancing symbol", "#d62728"),
                    symbols_series(q, f(princ), "principal symbol", "#1f77b4", True),
                    symbols_series(q, f(asym), "asymptotic", "#2ca02c", True)]
        from .svgplot import write_svg
        write_svg(out / "spectrum.svg", [(f"Re {kind} at ka={ka:g}", series("Re")),
                                         (f"Im {kind} at ka={ka:g}", series("Im"))], "q", kind)
    half = 2.0 * 24.0 ** (-1.0 / 3.0) * ka ** (1.0 / 3.0)
    band = np.abs(q - ka) <= half
    if not band.any():
        return _report([("spectrum", True, "glancing band outside the requested q range")], check)
    err = float(np.max(np.abs(glanc[band] - lam[band])) / np.max(np.abs(lam[band])))
    bound = cfg["spectrum"]["bound"]
    print(f"glancing-vs-exact relative error over |q-ka| <= {half:.2f}: {err:.3e}")
    return _report([("spectrum glancing band", err <= bound, f"{err:.3e} <= {bound}")], check)


def symbols_series(x, y, label, color, dashed=False):
    from .svgplot import Series
    return Series(np.asarray(x, float), np.asarray(y, float), label, color, dashed)


def cmd_currents(cfg, out, svg, check):
    curve = build_curve(cfg)
    k = wavenumber(cfg, curve)
    config = wave_config(cfg, curve, k)
    opts = cfg["currents"]
    results = []
    for pol in polarizations(cfg):
        for i, angle in enumerate(cfg["wave"]["angles"]):
            wave = PlaneWave.from_angle(angle, cfg["wave"]["amplitude"], pol)
            s0 = next(s for s, b in glancing_points(curve, wave.p) if b == 1)
            hw = fock_halfwidth(curve, s0, k)
            t = np.linspace(-opts["span"] * hw, opts["span"] * hw, opts["samples"])
            approx = glancing_currents.fock_current(curve, wave, config, pol, t)
            if curve.kind == "circle":
                ref_vals = circle_oracle.mie_current_at(curve.params[0], wave, config, approx.s)
            else:
                ref_vals = glancing_currents.nystrom_current(curve, wave, config, approx.s,
                                                             opts["reference_n"])
            ref = circle_oracle.CurrentTrace(approx.s, ref_vals, "reference", pol, approx.meta)
            t_sorted = approx.meta["t"]
            window = np.abs(t_sorted) <= hw
            err = glancing_currents.relative_l2(approx.values[window], ref_vals[window])
            stem = f"currents_{pol}_{i}"
            glancing_currents.write_trace_csv(out / f"{stem}.csv", ref, approx, window)
            if svg:
                from .svgplot import write_svg
                order = np.argsort(t_sorted)
                tt = t_sorted[order]
                write_svg(out / f"{stem}.svg", [
                    (f"|J| {pol}, angle={angle:.4g}",
                     [symbols_series(tt, np.abs(ref_vals[order]), "exact", "#000000"),
                      symbols_series(tt, np.abs(approx.values[order]), "Fock approx.", "#d62728")]),
                    (f"Re J {pol}, angle={angle:.4g}",
                     [symbols_series(tt, ref_vals[order].real, "exact", "#000000"),
                      symbols_series(tt, approx.values[order].real, "Fock approx.", "#d62728")]),
                ], "t = s - s0", "J")
            print(f"{pol} angle={angle:.6g} s0={s0:.6g} halfwidth={hw:.4g} rel_L2={err:.4e}")
            results.append((f"currents {pol} angle={angle:.4g}", err <= opts["bound"],
                            f"{err:.3e} <= {opts['bound']}"))
    return _report(results, check)


def cmd_rank_sweep(cfg, out, svg, check):
    curve = build_curve(cfg)
    opts = cfg["rank_sweep"]
    ka_list = opts["ka_list"]
    if len(ka_list) < 4:
        raise ConfigError("need ≥ 4 frequencies")
    ks = [wavenumber(cfg, curve, ka) for ka in ka_list]
    base = wave_config(cfg, curve, ks[0])
    lo, hi = opts["exponent_window"]
    results, by_pol = [], {}
    for pol in polarizations(cfg):
        try:
            rows = filter_solver.rank_sweep(curve, base, pol, ks, opts["epsilon"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        by_pol[pol] = rows
        filter_solver.write_sweep_csv(out / f"rank_sweep_{pol}.csv", rows,
                                      f"curve={curve.to_dict()} polarization={pol} "
                                      f"epsilon={opts['epsilon']!r}")
        expo = filter_solver.fit_exponent([r.k for r in rows], [r.r_eps for r in rows])
        print(f"{pol} fitted exponent r_eps ~ k^{expo:.4f} "
              f"(ranks {[r.r_eps for r in rows]}, n {[r.n for r in rows]})")
        results.append((f"rank exponent {pol}", lo <= expo <= hi, f"{expo:.4f} in [{lo}, {hi}]"))
    if len(by_pol) == 2:
        _write_csv(out / "rank_sweep_pairs.csv", ["k", "n", "r_eps_TM", "r_eps_TE"],
                   [(a.k, a.n, a.r_eps, b.r_eps) for a, b in zip(by_pol["TM"], by_pol["TE"])],
                   ["TM and TE ranks side by side; no relation is asserted"])
    if svg:
        from .svgplot import write_svg
        series = [symbols_series(np.log10([r.k for r in rows]), np.log10([r.r_eps for r in rows]),
                                 f"{pol}", None) for pol, rows in by_pol.items()]
        write_svg(out / "rank_sweep.svg", [("epsilon-rank of C", series)], "log10 k", "log10 r")
    return _report(results, check)


def cmd_solve(cfg, out, svg, check, dump=False):
    curve = build_curve(cfg)
    k = wavenumber(cfg, curve)
    config = wave_config(cfg, curve, k)
    opts = cfg["solve"]
    n = cfg["n"] or filter_solver.sweep_nodes(curve, k)
    n += n % 2
    offset = 0.0
    if cfg["seed"] is not None:
        offset = float(np.random.default_rng(cfg["seed"]).uniform(0.0, 2.0 * math.pi / opts["m"]))
    angles = offset + 2.0 * math.pi * np.arange(opts["m"]) / opts["m"]
    results, timing_rows, rows = [], [], []
    for pol in polarizations(cfg):
        disc = Discretization(curve, n)
        opm = assemble_ccfio(curve, config, pol, n, disc=disc)
        if dump:
            export_matrix(out / f"ccfio_{pol}.biem", opm.matrix)
        block = np.stack([rhs(curve, PlaneWave.from_angle(a, cfg["wave"]["amplitude"], pol),
                              config, n, disc=disc) for a in angles], axis=1)
        t0 = time.perf_counter()
        dense = np.column_stack([solve_dense(opm, block[:, j])[0] for j in range(opts["m"])])
        t_dense = time.perf_counter() - t0
        t0 = time.perf_counter()
        est = filter_solver.FilteredDirectSolver(epsilon=opts["epsilon"]).fit(opm)
        t_fit = time.perf_counter() - t0
        t0 = time.perf_counter()
        x = est.solve(block)
        t_apply = time.perf_counter() - t0
        errs = np.linalg.norm(x - dense, axis=0) / np.linalg.norm(dense, axis=0)
        consts = filter_solver.residual_constant(opm, x, block, opts["epsilon"])
        for j, a in enumerate(angles):
            rows.append((pol, j, float(a), float(errs[j]), float(consts[j])))
        timing_rows.append((pol, n, est.rank_, opts["m"], t_dense, t_fit, t_apply))
        bound = opts["error_factor"] * max(opts["epsilon"], 1e-11)
        print(f"{pol} n={n} rank={est.rank_} core_rcond={est.core_rcond_:.3e} "
              f"max_rel_error={errs.max():.3e} max_residual_const={consts.max():.3g}")
        results.append((f"solve {pol}", errs.max() <= bound, f"{errs.max():.3e} <= {bound:.1e}"))
    _write_csv(out / "solve.csv", ["polarization", "rhs", "angle", "rel_error", "residual_const"],
               rows, [f"epsilon={opts['epsilon']!r} k={k!r}"])
    _write_csv(out / "solve_timing.csv",
               ["polarization", "n", "rank", "m", "dense_s", "fit_s", "apply_s"],
               timing_rows, ["timing values are non-deterministic"])
    if svg:
        from .svgplot import write_svg
        series = [symbols_series(np.arange(opts["m"]),
                                 np.log10([max(r[3], 1e-17) for r in rows if r[0] == pol]), pol, None)
                  for pol in polarizations(cfg)]
        write_svg(out / "solve.svg", [("Woodbury vs dense, relative error", series)],
                  "right-hand side", "log10 error")
    return _report(results, check)


COMMANDS = {"spectrum": cmd_spectrum, "currents": cmd_currents,
            "rank-sweep": cmd_rank_sweep, "solve": cmd_solve}


def build_parser():
    parser = argparse.ArgumentParser(prog="glancing", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--svg", action="store_true", help="also write SVG plots")
        p.add_argument("--check", action="store_true",
                       help="exit with status 4 when an acceptance bound is violated")
        p.add_argument("--seed", type=int, help="seed for randomized direction sampling")
        p.add_argument("--ka", type=float, help="frequency as k L / (2 pi)")
        p.add_argument("--polarization", choices=["TM", "TE", "both"])
        if name == "spectrum":
            p.add_argument("--kind", choices=["S", "D", "Dstar", "N"])
        if name in ("rank-sweep", "solve"):
            p.add_argument("--epsilon", type=float)
        if name == "rank-sweep":
            p.add_argument("--ka-list", type=float, nargs="+")
        if name == "solve":
            p.add_argument("--m", type=int, help="number of plane-wave right-hand sides")
            p.add_argument("--dump-matrix", action="store_true",
                           help="write each CCFIO matrix as a BIEM binary dump")
    return parser


def _overrides(args):
    ov = {}
    if args.seed is not None:
        ov["seed"] = args.seed
    if args.ka is not None:
        ov["ka"], ov["k"] = args.ka, None
    if args.polarization:
        ov["wave"] = {"polarization": args.polarization}
    if getattr(args, "kind", None):
        ov["spectrum"] = {"kind": args.kind}
    section = {"rank-sweep": "rank_sweep", "solve": "solve"}.get(args.command)
    if section and args.epsilon is not None:
        ov.setdefault(section, {})["epsilon"] = args.epsilon
    if getattr(args, "ka_list", None):
        ov.setdefault("rank_sweep", {})["ka_list"] = args.ka_list
    if getattr(args, "m", None):
        ov.setdefault("solve", {})["m"] = args.m
    return ov


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, _overrides(args))
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "resolved_config.json", "w") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
        extra = {"dump": args.dump_matrix} if args.command == "solve" else {}
        return COMMANDS[args.command](cfg, args.out, args.svg, args.check, **extra)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FockQuadratureError, SingularSystemError,
            filter_solver.CoreSingularError, glancing_currents.FockProfileConvergenceError,
            circle_oracle.SeriesConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
