"""Command-line front end: ``crplimits <subcommand> ...``.

Option values resolve as command-line flag, then the flat JSON file given by
``--config``, then built-in defaults.  The output directory can also be set
through ``CRPLIMITS_OUT``; an explicit ``--out`` still wins.

Exit codes: 0 success, 1 a verification check failed, 2 invalid configuration.
"""

import argparse
import csv
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .engine import CrpParams, TrackerConfig, atoms_csv, replicate_rng, run
from .intensity import ConeWindow, consistency_check, mass, mass_numeric, prop_counts_constants
from .limits import (
    L_survival,
    Q_cumulative,
    T_cdf,
    T_median,
    lambda_prime,
    path_L,
    path_X1,
    q_path_values,
    sample_Q_path,
    sample_ST_closed_form,
    sample_xi,
    tij_counts,
    tij_windows,
    x1_cover_window,
    x1_pgf,
)
from .oracle import TupleFamily, joint_probability, overlap_counts, step_sets, stepwise_probability
from .verify import SUITES, default_config, reports_to_json, reports_to_text, run_suite

OUT_ENV = "CRPLIMITS_OUT"


class ConfigError(Exception):
    pass


# -- value parsing -------------------------------------------------------------

def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


def _json_arg(text):
    """Inline JSON, or a path to a JSON file."""
    if isinstance(text, (dict, list)):
        return text
    p = Path(text)
    if not text.lstrip().startswith(("{", "[")) and p.exists():
        return json.loads(p.read_text())
    return json.loads(text)


def _resolve(args, defaults):
    """Merge defaults, the config file, and explicit flags (in increasing priority)."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a flat JSON object")
        merged.update({k.replace("-", "_"): v for k, v in doc.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("func", "config", "command"):
            merged[k] = v
    if getattr(args, "out", None) is None and os.environ.get(OUT_ENV):
        merged["out"] = os.environ[OUT_ENV]
    return merged


def _need_seed(cfg):
    if cfg.get("seed") is None:
        raise ConfigError("--seed is required for stochastic subcommands")
    seed = int(cfg["seed"])
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    return seed


def _out_dir(cfg):
    out = Path(cfg.get("out") or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
    return path


def _csv_text(header, rows):
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


# -- simulate ---------------------------------------------------------------------

SIMULATE_DEFAULTS = dict(theta=1.0, n=100000, reps=1, track_atoms=1, snapshots=None, seed=None, out=None)


def cmd_simulate(args):
    if args.from_manifest:
        try:
            manifest = json.loads(Path(args.from_manifest).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {args.from_manifest}: {exc}") from exc
        base = dict(SIMULATE_DEFAULTS, **manifest["config"])
        base["out"] = None
        cfg = _resolve(args, base)
    else:
        cfg = _resolve(args, SIMULATE_DEFAULTS)
    seed = _need_seed(cfg)
    snaps = tuple(_ints(cfg["snapshots"])) if cfg.get("snapshots") else ()
    try:
        params = CrpParams(float(cfg["theta"]), seed, int(cfg["n"]))
        trackers = TrackerConfig(int(cfg["track_atoms"]), snaps)
        trackers.validate(params.horizon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    reps = int(cfg["reps"])
    if reps < 1:
        raise ConfigError("reps must be positive")
    out = _out_dir(cfg)
    observed = [run(params, trackers, rep) for rep in range(reps)]
    files = []
    for N in range(1, trackers.N_max + 1):
        files.append(_write(out / f"atoms_N{N}.csv", atoms_csv(observed, N)).name)
    files.append(_write(out / "trajectories.jsonl", "".join(o.to_json() + "\n" for o in observed)).name)
    echo = dict(theta=params.theta, n=params.horizon, reps=reps, track_atoms=trackers.N_max,
                snapshots=list(snaps) or None, seed=seed)
    manifest = dict(command="simulate", version=__version__, config=echo, files=sorted(files))
    _write(out / "manifest.json", _dump(manifest))
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


# -- verify -----------------------------------------------------------------------

_VERIFY_FIELDS = dict(
    theta="thetas", n="ns", reps="reps", threshold="threshold", se_band="se_band", grid="t_grid",
    delta="delta", alpha="alpha", N="N", horizon_factor="horizon_factor", workers="workers",
)


def cmd_verify(args):
    cfg = _resolve(args, dict(out=None))
    suite = cfg["suite"]
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(sorted(SUITES))}")
    seed = _need_seed(cfg)
    overrides = {}
    for flag, field_name in _VERIFY_FIELDS.items():
        if cfg.get(flag) is not None:
            v = cfg[flag]
            if flag == "theta":
                v = tuple(_floats(v))
            elif flag == "n":
                v = tuple(_ints(v))
            elif flag == "grid":
                v = tuple(_floats(v))
            overrides[field_name] = v
    options = {}
    if cfg.get("windows") is not None:
        overrides["windows"] = tuple(ConeWindow.from_dict(w) for w in _json_arg(cfg["windows"]))
    if cfg.get("families") is not None:
        options["families"] = int(cfg["families"])
    if cfg.get("mc_reps") is not None:
        options["mc_reps"] = int(cfg["mc_reps"])
    for item in cfg.get("option") or []:
        key, _, value = item.partition("=")
        if not key or not _:
            raise ConfigError(f"--option expects key=value, got {item!r}")
        try:
            options[key] = json.loads(value)
        except json.JSONDecodeError:
            options[key] = value
    if isinstance(cfg.get("options"), dict):
        options = dict(cfg["options"], **options)
    try:
        config = default_config(suite, seed, options=options, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg)
    try:
        reports = run_suite(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write(out / f"{suite}_report.json", reports_to_json(reports, config) + "\n")
    text = reports_to_text(reports, config)
    _write(out / f"{suite}_report.txt", text)
    sys.stdout.write(text)
    return 0 if all(r.passed for r in reports) else 1


# -- plotdata ---------------------------------------------------------------------

def cmd_plotdata(args):
    cfg = _resolve(args, dict(theta=1.0, tmax=3.0, tmin=None, grid=None, out=None))
    seed = _need_seed(cfg)
    theta = float(cfg["theta"])
    out = _out_dir(cfg)
    what = cfg["what"]
    if what == "L":
        tmax = float(cfg["tmax"])
        tmin = float(cfg["tmin"]) if cfg.get("tmin") is not None else tmax / 100.0
        grid = np.linspace(tmin, tmax, 1001)
    else:
        if not cfg.get("grid"):
            raise ConfigError(f"plotdata {what} needs --grid")
        grid = np.array(sorted(_floats(cfg["grid"])))
        tmin, tmax = float(grid[0]), float(grid[-1])
    try:
        cover = x1_cover_window(tmin, tmax)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    atoms = sample_xi(cover, theta, replicate_rng(seed, 0, f"plotdata-{what}")).atoms
    _write(out / "atoms.csv", _csv_text(["x", "y"], [[repr(float(a)), repr(float(b))] for a, b in atoms]))
    if what == "L":
        inside = atoms[(atoms[:, 0] <= tmax) & (atoms[:, 1] >= tmin)].ravel()
        ts = np.unique(np.concatenate([grid, inside[(inside >= tmin) & (inside <= tmax)]]))
        vals = path_L(atoms, ts)
        _write(out / "path.csv", _csv_text(["t", "L"], [[repr(float(t)), repr(float(v))] for t, v in zip(ts, vals)]))
    elif what == "X1":
        vals = path_X1(atoms, grid)
        _write(out / "path.csv", _csv_text(["t", "X1"], [[repr(float(t)), int(v)] for t, v in zip(grid, vals)]))
    else:
        counts = tij_counts(atoms, grid)
        lam = lambda_prime(theta, grid)
        rows = []
        for (i, j), w in sorted(tij_windows(grid).items()):
            (xl, xu), = w.x_bounds
            yl, yu = w.y_bounds
            rows.append([i, j, repr(xl), repr(xu), repr(yl), "inf" if math.isinf(yu) else repr(yu),
                         int(counts[i - 1, j - 1]), repr(float(lam[i - 1, j - 1]))])
        _write(out / "tij.csv", _csv_text(["i", "j", "x_lo", "x_hi", "y_lo", "y_hi", "count", "mean"], rows))
    print(f"wrote plot data for {what} to {out}")
    return 0


# -- exact and closed-form queries ----------------------------------------------------

def cmd_probe(args):
    cfg = _resolve(args, dict(theta=1.0))
    try:
        fam = TupleFamily(tuple(tuple(int(v) for v in t) for t in _json_arg(cfg["family"])), float(cfg["theta"]))
        a = joint_probability(fam)
        b = stepwise_probability(fam)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from exc
    steps, K, L = step_sets(fam)
    doc = dict(
        theta=fam.theta, tuples=[list(t) for t in fam.tuples], overlaps=[int(v) for v in overlap_counts(fam)],
        closed_form=dict(value=a.value, log_value=a.log_value),
        stepwise=dict(value=b.value, log_value=b.log_value),
        relative_difference=abs(math.expm1(a.log_value - b.log_value)),
        steps=list(steps), K=[sorted(k) for k in K], L=[sorted(x) for x in L],
    )
    sys.stdout.write(_dump(doc))
    return 0


def cmd_mass(args):
    cfg = _resolve(args, dict(theta=1.0, lift=None, numeric=False))
    try:
        w = ConeWindow.from_dict(_json_arg(cfg["window"]))
        theta = float(cfg["theta"])
        doc = dict(window=w.to_dict(), theta=theta, N=w.N, mass=mass(w, theta))
        if cfg.get("numeric"):
            doc["mass_numeric"] = mass_numeric(w, theta)
        if cfg.get("lift") is not None:
            base, lifted, diff = consistency_check(w, int(cfg["lift"]), theta)
            doc["consistency"] = dict(M=int(cfg["lift"]), mass_N=base, mass_M_lifted=lifted, diff=diff)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from exc
    sys.stdout.write(_dump(doc))
    return 0


def cmd_sample_limit(args):
    cfg = _resolve(args, dict(theta=1.0, reps=1, delta=1.0, tmax=3.0, window=None, out=None))
    seed = _need_seed(cfg)
    theta = float(cfg["theta"])
    reps = int(cfg["reps"])
    what = cfg["what"]
    out = _out_dir(cfg)
    try:
        if what == "xi":
            if cfg.get("window") is None:
                raise ConfigError("sample-limit xi needs --window")
            w = ConeWindow.from_dict(_json_arg(cfg["window"]))
            rows = []
            for rep in range(reps):
                for a in sample_xi(w, theta, replicate_rng(seed, rep, "sample-xi")).atoms:
                    rows.append([rep] + [repr(float(v)) for v in a])
            header = ["replicate"] + [f"x{i}" for i in range(1, w.N + 1)] + ["y"]
            path = _write(out / "xi_atoms.csv", _csv_text(header, rows))
        elif what == "ST":
            S, T = sample_ST_closed_form(float(cfg["delta"]), theta, replicate_rng(seed, 0, "sample-st"), reps)
            rows = [[rep, repr(float(s)), repr(float(t))] for rep, (s, t) in enumerate(zip(S, T))]
            path = _write(out / "st.csv", _csv_text(["replicate", "S", "T"], rows))
        else:
            rows = []
            for rep in range(reps):
                ev = sample_Q_path(float(cfg["delta"]), theta, float(cfg["tmax"]), replicate_rng(seed, rep, "sample-q"))
                rows += [[rep, repr(float(e))] for e in ev]
            path = _write(out / "q_events.csv", _csv_text(["replicate", "t"], rows))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"wrote {path}")
    return 0


def cmd_law(args):
    cfg = _resolve(args, dict(theta=1.0, delta=1.0, alpha=2.0, N=3))
    theta = float(cfg["theta"])
    law = cfg["what"]
    try:
        if law == "T":
            ts = _floats(cfg.get("t") or "1")
            delta = float(cfg["delta"])
            doc = dict(cdf=[float(T_cdf(t, delta, theta)) for t in ts], t=ts, median=T_median(delta, theta))
        elif law == "pgf":
            grid = _floats(cfg["grid"])
            z = _floats(cfg["z"])
            doc = dict(grid=grid, z=z, pgf=x1_pgf(theta, grid, z), lambda_prime=lambda_prime(theta, grid).tolist())
        elif law == "L":
            grid = _floats(cfg["grid"])
            x = _floats(cfg["x"])
            doc = dict(grid=grid, x=x, survival=L_survival(theta, grid, x))
        elif law == "Q":
            ts = _floats(cfg.get("t") or "1")
            doc = dict(t=ts, mean=[float(Q_cumulative(t, float(cfg["delta"]), theta)) for t in ts])
        else:
            c = prop_counts_constants(theta, float(cfg["alpha"]), int(cfg["N"]))
            doc = dict(alpha=c.alpha, N=c.N, lambda_ij=c.lam.tolist(), lambda_tail=c.tail[1:].tolist(),
                       mean_at_n=c.mean_at_n().tolist(), mean_at_alpha_n=c.mean_at_alpha_n().tolist())
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    doc["theta"] = theta
    doc["law"] = law
    sys.stdout.write(_dump(doc))
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="crplimits", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, out=True):
        sp.add_argument("--config", help="flat JSON file of option values")
        if seed:
            sp.add_argument("--seed", type=int)
        if out:
            sp.add_argument("--out", help=f"output directory (default ./out or ${OUT_ENV})")

    s = sub.add_parser("simulate", help="simulate trajectories; write atoms, trajectories and a manifest")
    common(s)
    s.add_argument("--theta", type=float)
    s.add_argument("--n", type=int, help="horizon")
    s.add_argument("--reps", type=int)
    s.add_argument("--track-atoms", type=int, dest="track_atoms", help="largest N for atoms")
    s.add_argument("--snapshots", help="comma-separated steps for block counts")
    s.add_argument("--from-manifest", dest="from_manifest", help="rerun the configuration of a manifest")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", help=", ".join(sorted(SUITES)))
    common(v)
    v.add_argument("--theta", help="comma-separated list")
    v.add_argument("--n", help="comma-separated list")
    v.add_argument("--reps", type=int)
    v.add_argument("--workers", type=int)
    v.add_argument("--threshold", type=float)
    v.add_argument("--se-band", type=float, dest="se_band")
    v.add_argument("--grid")
    v.add_argument("--delta", type=float)
    v.add_argument("--alpha", type=float)
    v.add_argument("--N", type=int)
    v.add_argument("--horizon-factor", type=float, dest="horizon_factor")
    v.add_argument("--windows", help="JSON list of windows, inline or file")
    v.add_argument("--families", type=int)
    v.add_argument("--mc-reps", type=int, dest="mc_reps")
    v.add_argument("--option", action="append", help="suite option key=value (JSON value)")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("plotdata", help="sampled atoms and paths for plotting")
    d.add_argument("what", choices=["L", "X1", "Tij"])
    common(d)
    d.add_argument("--theta", type=float)
    d.add_argument("--tmax", type=float)
    d.add_argument("--tmin", type=float)
    d.add_argument("--grid")
    d.set_defaults(func=cmd_plotdata)

    q = sub.add_parser("probe", help="both exact joint probabilities of a tuple family")
    common(q, seed=False, out=False)
    q.add_argument("--family", required=True, help="JSON list of tuples")
    q.add_argument("--theta", type=float)
    q.set_defaults(func=cmd_probe)

    m = sub.add_parser("mass", help="intensity mass of a window")
    common(m, seed=False, out=False)
    m.add_argument("--window", required=True, help='JSON like {"x": [[0, 1]], "y": [1, 2]}')
    m.add_argument("--theta", type=float)
    m.add_argument("--lift", type=int, help="also check consistency against dimension M")
    m.add_argument("--numeric", action="store_true", default=None, help="add the quadrature value")
    m.set_defaults(func=cmd_mass)

    sl = sub.add_parser("sample-limit", help="sample limiting objects to CSV")
    sl.add_argument("what", choices=["xi", "ST", "Q"])
    common(sl)
    sl.add_argument("--theta", type=float)
    sl.add_argument("--reps", type=int)
    sl.add_argument("--window")
    sl.add_argument("--delta", type=float)
    sl.add_argument("--tmax", type=float)
    sl.set_defaults(func=cmd_sample_limit)

    lw = sub.add_parser("law", help="closed-form law values as JSON")
    lw.add_argument("what", choices=["T", "pgf", "L", "Q", "lambda"])
    common(lw, seed=False, out=False)
    lw.add_argument("--theta", type=float)
    lw.add_argument("--delta", type=float)
    lw.add_argument("--alpha", type=float)
    lw.add_argument("--N", type=int)
    lw.add_argument("--t")
    lw.add_argument("--grid")
    lw.add_argument("--z")
    lw.add_argument("--x")
    lw.set_defaults(func=cmd_law)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
