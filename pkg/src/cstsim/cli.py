"""Command-line entry point: ``cstsim levels|spectrum|fit|cst --config <path>``.

Exit codes: 0 success, 1 configuration or input error, 2 fit did not
converge, 3 coherent spin trapping undefined.
"""

import argparse
import sys

import numpy as np
from scipy.optimize import minimize_scalar

from . import __version__
from . import config as cfgmod
from . import fanofit, io, levels, spectra, twostate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_UNDEFINED_CST = 3

TWO_PI = 2.0 * np.pi


def _label(m):
    return f"{m:+g}"


def cmd_levels(cfg):
    """Level energies, Delta m transition frequencies and resonance fields.

    Returns
    -------
    (csv_text, payload)
    """
    lv = cfg.sections["levels"]
    states = cfgmod.level_params(cfg)
    grid = cfgmod.field_grid(lv["b_min"], lv["b_max"], lv["b_step"])
    axis = lv["b_axis"]
    dm = lv["delta_m"]

    header = ["B_mT"]
    columns = []
    resonances = []
    for name, p in states:
        path = levels.level_path(p, axis, grid)
        for m in levels.SPIN_PROJECTIONS:
            header.append(f"{name}_E{_label(m)}")
            columns.append([ls.energy(m) for ls in path])
        if path:
            pairs = [t.pair for t in levels.transitions_of(path[0], dm)]
        else:
            pairs = []
        for pair in sorted(pairs):
            header.append(f"{name}_f{_label(pair[0])}_{_label(pair[1])}")
            columns.append([levels.pair_frequency(ls, pair) for ls in path])
        for b, tr in levels.resonance_fields(lv["f_drive"], p, axis, (lv["b_min"], lv["b_max"]), dm):
            resonances.append((name, _label(tr.from_label), _label(tr.to_label), tr.delta_m, b))

    rows = [[b] + [c[i] for c in columns] for i, b in enumerate(grid)]
    text = io.csv_text(header, rows)
    text += "\n" + io.csv_text(["state", "from", "to", "delta_m", "B_mT"], resonances)
    payload = {
        "columns": header,
        "rows": rows,
        "resonances": [dict(zip(("state", "from", "to", "delta_m", "B_mT"), r)) for r in resonances],
    }
    return text, payload


def cmd_spectrum(cfg):
    """Field-swept relative PL change; returns (Spectrum, csv_text, payload)."""
    sc = cfgmod.spectrum_config(cfg)
    s = spectra.spectrum_vs_b(sc)
    payload = {"B_mT": s.x, "dPL_over_PL": s.y}
    return s, io.spectrum_csv(s), payload


def _seeds(fc, x, y):
    if fc["seeds"]:
        lines = []
        for b0, w in fc["seeds"]:
            i = int(np.argmin(np.abs(x - b0)))
            lines.append(fanofit.FanoResonance(float(y[i] - np.median(y)), 0.0, b0, w))
        return lines
    if fc["n_lines"] is None:
        raise cfgmod.ConfigError("[fit] needs n_lines or seeds")
    return fanofit.seed_guess((x, y), fc["n_lines"])


def _fit_payload(res):
    return {
        "resonances": [
            {"a": ln.a, "q": ln.q, "b0": ln.b0, "width": ln.width} for ln in res.resonances
        ],
        "baseline": res.baseline,
        "fit_baseline": res.fit_baseline,
        "parameters": res.param_names,
        "covariance": res.covariance,
        "stderr": res.stderr(),
        "residual_norm": res.residual_norm,
        "iterations": res.iterations,
        "converged": res.converged,
        "method": "levenberg-marquardt, homoscedastic covariance, constant baseline optional",
    }


def _data_path(cfg, override=None):
    if override:
        return override
    data = cfg.sections["fit"]["data"]
    if not data:
        raise cfgmod.ConfigError("[fit] needs 'data' (or pass --data)")
    return cfg.resolve_path(data)


def cmd_fit(cfg, data_path=None):
    """Fit Fano lines to a two-column CSV.

    Returns ``(payload, converged)``; a non-converged fit still returns
    the best parameters found.
    """
    fc = cfg.sections["fit"]
    path = _data_path(cfg, data_path)
    x, y = io.read_xy_csv(path)
    seeds = _seeds(fc, x, y)
    n_need = 4 * len(seeds) + 1
    if x.size < n_need:
        raise io.DataError(f"{path}: {x.size} data rows, at least {n_need} needed for {len(seeds)} lines")
    free_q = fc["free_q"]
    if free_q is not None and len(free_q) != len(seeds):
        raise cfgmod.ConfigError("[fit] free_q needs one entry per line")
    try:
        res = fanofit.fit((x, y), seeds, fc["fit_baseline"], free_q=free_q, max_iter=fc["max_iter"])
    except fanofit.FitConvergenceError as exc:
        return _fit_payload(exc.result), False
    return _fit_payload(res), True


def r_minimum(d, r, span=0.05, points=4001):
    """Drive frequency (rad/us) of the lowest full-model signal near the CST frequency.

    A grid of ``points`` over ``omega_cst * (1 +- span)`` locates the
    minimum, which is then polished by a bounded scalar search.
    """
    wc = twostate.cst_frequency(d)
    half = span * max(abs(wc), 1e-9)
    grid = np.linspace(wc - half, wc + half, points)
    vals = np.array([twostate.sr_signal(d.replace(omega=w), r) for w in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    opt = minimize_scalar(
        lambda w: twostate.sr_signal(d.replace(omega=w), r), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10 * max(abs(wc), 1.0)},
    )
    if opt.fun <= vals[i]:
        return float(opt.x), float(opt.fun)
    return float(grid[i]), float(vals[i])


def cmd_cst(cfg):
    """CST frequency, tilt angle, residual depth and dephasing rate, with a full-model check.

    Frequencies in the report are ordinary MHz; rates in 1/us.
    """
    d = cfgmod.drive_pair(cfg)
    r = cfgmod.two_state_rates(cfg)
    ts = cfg.sections["twostate"]
    wc = twostate.cst_frequency(d)
    try:
        theta = twostate.cst_angle(d)
    except ZeroDivisionError:
        theta = None
    w_min, r_min = r_minimum(d, r, ts["scan_span"], ts["scan_points"])
    at_cst = d.replace(omega=wc)
    return {
        "omega_cst_MHz": wc / TWO_PI,
        "theta_cst": theta,
        "predicted_depth": twostate.cst_depth(d),
        "dephasing_rate_per_us": twostate.dephasing_rate(d, r),
        "overlap_signal_at_cst": twostate.sr_overlap(at_cst, r),
        "full_model_signal_at_cst": twostate.sr_signal(at_cst, r),
        "full_model_min_MHz": w_min / TWO_PI,
        "full_model_min_signal": r_min,
        "relative_offset": (w_min - wc) / wc if wc != 0 else None,
    }


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cstsim",
        description="Spin-acoustic resonance spectra and coherent spin trapping in spin-3/2 centres.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=("levels", "spectrum", "fit", "cst"))
    parser.add_argument("--config", required=True, help="INI configuration file")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--svg", help="also write an SVG plot (spectrum and fit)")
    parser.add_argument("--data", help="CSV to fit, overrides [fit] data")
    parser.add_argument(
        "--format", choices=("csv", "json"),
        help="levels/spectrum: csv (default) or a JSON result envelope; fit/cst always write JSON",
    )
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Run one command; returns the exit code."""
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        cfgmod.require(cfg, args.command)
        as_json = args.format == "json"
        if args.command == "levels":
            text, payload = cmd_levels(cfg)
            _emit(io.dumps(io.envelope("levels", cfg, payload)) if as_json else text, args.out)
        elif args.command == "spectrum":
            s, text, payload = cmd_spectrum(cfg)
            _emit(io.dumps(io.envelope("spectrum", cfg, payload)) if as_json else text, args.out)
            if args.svg:
                _emit(io.svg_polyline(s.x, s.y, title=f"T = {s.meta['config']['temperature']:g} K"), args.svg)
        elif args.command == "fit":
            payload, ok = cmd_fit(cfg, args.data)
            _emit(io.dumps(io.envelope("fit", cfg, payload)), args.out)
            if args.svg:
                x, _ = io.read_xy_csv(_data_path(cfg, args.data))
                lines = [fanofit.FanoResonance(**ln) for ln in payload["resonances"]]
                _emit(io.svg_polyline(x, fanofit.fano_eval(lines, payload["baseline"], x), title="fitted lines"), args.svg)
            if not ok:
                print("cstsim: fit did not converge; best parameters written", file=sys.stderr)
                return EXIT_NO_CONVERGENCE
        else:
            payload = cmd_cst(cfg)
            _emit(io.dumps(io.envelope("cst", cfg, payload)), args.out)
    except twostate.UndefinedCSTError as exc:
        print(f"cstsim: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED_CST
    except (cfgmod.ConfigError, io.DataError, fanofit.SeedError, ValueError) as exc:
        print(f"cstsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
