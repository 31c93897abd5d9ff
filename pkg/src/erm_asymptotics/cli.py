"""Command-line harness for theory solves, simulations and their comparison.

Every subcommand turns a grid of (alpha, lambda) points into table rows, one
row per point (or per point and seed).  Rows always carry ``residual``,
``iters`` and ``status`` so a failed solve is visible without stopping the
run.  Tables are written as CSV (default) or JSON once every row is done, so
a validation error or crash never leaves a partial file behind.

Settings come from three layers, later ones winning: built-in defaults, a
``key=value`` file given with ``--config``, and command-line flags.  The
number of worker processes defaults to the ``ERMA_THREADS`` environment
variable (1 when unset).

Grid syntax for ``--alpha`` and ``--lambda``:

* ``0.5``           a single value
* ``1,5,20``        an explicit list
* ``0.5:4:8``       8 linearly spaced values from 0.5 to 4
* ``0.1L100L20``    20 log-spaced values from 0.1 to 100
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from .analytic import gen_error, gen_error_bayes, pseudo_inverse_overlaps
from .errors import ConfigError, ErmAsymptoticsError, SolverError
from .losses import L1, L2, loss_from_name
from .saddle import lambda_opt, solve_bayes, solve_erm_replica, solve_general_six, solve_gordon, sweep_alpha
from .states import SolverConfig
from .teacher import teacher_from_config

COMMANDS = ("solve", "bayes", "sweep", "lambda-opt", "simulate", "gamp", "compare", "optimal-loss")
THREADS_ENV = "ERMA_THREADS"

# columns per command; every table ends with residual, iters, status
AUDIT = ["residual", "iters", "status"]
COLUMNS = {
    "solve": ["alpha", "lambda", "m", "q", "sigma", "eta", "e_g"] + AUDIT,
    "sweep": ["alpha", "lambda", "m", "q", "sigma", "eta", "e_g"] + AUDIT,
    "bayes": ["alpha", "q_b", "q_hat_b", "e_g"] + AUDIT,
    "lambda-opt": ["alpha", "lambda_opt", "e_g", "at_boundary"] + AUDIT,
    "simulate": ["alpha", "lambda", "seed", "m_emp", "q_emp", "e_g_emp", "train_objective"] + AUDIT,
    "gamp": ["alpha", "seed", "mode", "m_emp", "q_emp", "mean_v", "mean_lambda"] + AUDIT,
    "compare": ["alpha", "lambda", "e_g_theory", "e_g_sim", "e_g_sim_se", "abs_diff", "n_seeds"] + AUDIT,
    "optimal-loss": ["alpha", "curve", "x", "value"] + AUDIT,
}

# option name -> (type, default); the same names are accepted in the config file
OPTIONS = {
    "channel": (str, "sign"),
    "noise_variance": (float, 0.0),
    "kappa": (float, None),
    "kappa_min": (float, None),
    "kappa_max": (float, None),
    "prior": (str, "gaussian"),
    "prior_mean": (float, 0.0),
    "prior_variance": (float, 1.0),
    "sparsity": (float, 0.0),
    "loss": (str, "logistic"),
    "reg": (str, "l2"),
    "alpha": (str, None),
    "lambda": (str, None),
    "method": (str, "replica"),
    "bracket": (str, "1e-3,10"),
    "d": (int, 1000),
    "seeds": (int, 20),
    "seed0": (int, 0),
    "mode": (str, "bayes"),
    "tol": (float, 1e-10),
    "max_iter": (int, 5000),
    "damping": (float, 0.5),
    "quad_order_1d": (int, 80),
    "quad_order_2d": (int, 24),
    "z_range": (str, "-3:3:121"),
    "w_range": (str, "-3:3:121"),
    "export_prefix": (str, None),
    "output": (str, None),
    "format": (str, "csv"),
    "threads": (int, None),
}


# ---------------------------------------------------------------------------
# parsing and validation


def parse_grid(text: str, name: str = "grid", positive: bool = True) -> list[float]:
    """Expand the grid syntax described in the module docstring."""
    text = str(text).strip()
    if not text:
        raise ConfigError(f"{name}: empty grid")
    try:
        if ":" in text or "L" in text:
            sep = ":" if ":" in text else "L"
            parts = text.split(sep)
            if len(parts) != 3:
                raise ConfigError(f"{name}: expected start{sep}stop{sep}count, got {text!r}")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ConfigError(f"{name}: count must be at least 1")
            if sep == "L":
                if start <= 0 or stop <= 0:
                    raise ConfigError(f"{name}: log-spaced grids need positive ends")
                values = np.geomspace(start, stop, count)
            else:
                values = np.linspace(start, stop, count)
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    values = [float(v) for v in values]
    if not values:
        raise ConfigError(f"{name}: empty grid")
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{name}: non-finite value")
    if positive and min(values) <= 0:
        raise ConfigError(f"{name}: values must be positive")
    if not positive and min(values) < 0:
        raise ConfigError(f"{name}: values must be nonnegative")
    return values


def read_config_file(path) -> dict:
    """Read ``key=value`` lines; ``#`` starts a comment.  Errors name the line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    out = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{num}: unknown key {key!r}")
        out[key] = _convert(key, value, f"{path}:{num}")
    return out


def _convert(key, value, where):
    kind = OPTIONS[key][0]
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: {key} expects {kind.__name__}, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erm-asymptotics", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="key=value settings file; flags override it")
        for key, (kind, _) in OPTIONS.items():
            flag = "--" + key.replace("_", "-")
            # defaults are applied after the config file, so every flag starts unset
            p.add_argument(flag, dest=key, type=kind, default=argparse.SUPPRESS)
    return parser


def resolve_settings(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, then validate."""
    settings = {k: v[1] for k, v in OPTIONS.items()}
    if getattr(ns, "config", None):
        settings.update(read_config_file(ns.config))
    settings.update({k: v for k, v in vars(ns).items() if k in OPTIONS})
    settings["command"] = ns.command
    if settings["threads"] is None:
        env = os.environ.get(THREADS_ENV, "1")
        try:
            settings["threads"] = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}") from None
    validate(settings)
    return settings


def validate(s: dict) -> None:
    cmd = s["command"]
    if s["format"] not in ("csv", "json"):
        raise ConfigError("format: expected csv or json")
    if s["threads"] < 1:
        raise ConfigError("threads: must be at least 1")
    if s["d"] < 2:
        raise ConfigError("d: must be at least 2")
    if s["seeds"] < 1:
        raise ConfigError("seeds: must be at least 1")
    if s["reg"] not in ("l2", "l1"):
        raise ConfigError("reg: expected l2 or l1")
    if s["method"] not in ("replica", "gordon"):
        raise ConfigError("method: expected replica or gordon")
    if s["mode"] not in ("bayes", "erm", "optimal"):
        raise ConfigError("mode: expected bayes, erm or optimal")
    if s["alpha"] is None:
        raise ConfigError("alpha: a grid is required")
    s["alpha_grid"] = parse_grid(s["alpha"], "alpha")
    sim_loss = cmd in ("simulate", "compare") or (cmd == "gamp" and s["mode"] == "erm")
    if s["loss"] == "optimal":
        if cmd not in ("simulate", "compare"):
            raise ConfigError("loss=optimal is only available for simulate and compare")
    else:
        loss_from_name(s["loss"])
    needs_lambda = cmd in ("solve", "sweep") or (sim_loss and s["loss"] != "optimal")
    if needs_lambda:
        if s["lambda"] is None:
            raise ConfigError("lambda: a grid is required")
        # lambda = 0 is the least-norm estimator, only meaningful for square-loss simulations
        allow_zero = sim_loss and cmd != "gamp" and s["loss"] == "square"
        s["lambda_grid"] = parse_grid(s["lambda"], "lambda", positive=not allow_zero)
    else:
        s["lambda_grid"] = [math.nan]
    if cmd == "lambda-opt":
        br = parse_grid(s["bracket"], "bracket")
        if len(br) != 2 or br[0] > br[1]:
            raise ConfigError("bracket: expected low,high with low <= high")
        s["bracket_pair"] = (br[0], br[1])
    if cmd == "optimal-loss":
        s["z_grid"] = _signed_grid(s["z_range"], "z_range")
        s["w_grid"] = _signed_grid(s["w_range"], "w_range")
    kv = {k: s[k] for k in ("channel", "noise_variance", "prior", "prior_mean", "prior_variance", "sparsity",
                            "kappa", "kappa_min", "kappa_max") if s[k] is not None}
    try:
        s["teacher"] = teacher_from_config(kv)
    except ErmAsymptoticsError as exc:
        raise ConfigError(f"teacher: {exc}") from None
    try:
        s["solver"] = SolverConfig(tol=s["tol"], max_iter=s["max_iter"], damping=s["damping"],
                                   quad_order_1d=s["quad_order_1d"], quad_order_2d=s["quad_order_2d"])
    except ErmAsymptoticsError as exc:
        raise ConfigError(f"solver: {exc}") from None


def _signed_grid(text, name):
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"{name}: expected start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    if count < 2 or not (math.isfinite(start) and math.isfinite(stop)) or start >= stop:
        raise ConfigError(f"{name}: need start < stop and count >= 2")
    return [float(v) for v in np.linspace(start, stop, count)]


# ---------------------------------------------------------------------------
# tasks; module-level so that worker processes can unpickle them


def _reg(s, lam):
    return L2(lam) if s["reg"] == "l2" else L1(lam)


def _failed(columns, base, exc):
    row = {c: math.nan for c in columns}
    row.update(base)
    row["residual"] = getattr(exc, "residual", math.nan)
    row["iters"] = 0
    row["status"] = f"error: {exc}"
    return [row]


def _overlap_row(alpha, lam, st, rho):
    eta = min(st.m * st.m / (rho * st.q), 1.0)
    return {"alpha": alpha, "lambda": lam, "m": st.m, "q": st.q, "sigma": st.sigma, "eta": eta,
            "e_g": gen_error(st.m, st.q, rho), "residual": st.residual, "iters": st.iters,
            "status": _status(st.flags)}


def _status(flags):
    # solver notes such as "polished" or "damping_raised" do not mean failure
    return "ok" if not flags else "ok [" + "; ".join(flags) + "]"


def _task_solve(s, point):
    alpha, lam = point
    teacher, cfg = s["teacher"], s["solver"]
    loss = loss_from_name(s["loss"])
    if s["method"] == "gordon":
        if s["reg"] != "l2":
            raise ConfigError("method=gordon needs reg=l2")
        g = solve_gordon(alpha, lam, loss, teacher, cfg)
        m, q, sigma = g.overlaps(teacher.rho)
        eta = min(m * m / (teacher.rho * q), 1.0)
        return [{"alpha": alpha, "lambda": lam, "m": m, "q": q, "sigma": sigma, "eta": eta,
                 "e_g": gen_error(m, q, teacher.rho), "residual": g.residual, "iters": g.iters,
                 "status": _status(g.flags)}]
    if s["reg"] == "l2":
        st = solve_erm_replica(alpha, lam, loss, teacher, cfg)
    else:
        st = solve_general_six(alpha, loss, L1(lam), teacher, cfg)
    return [_overlap_row(alpha, lam, st, teacher.rho)]


def _task_sweep(s, point):
    _, lam = point
    loss = loss_from_name(s["loss"])
    if s["reg"] != "l2":
        raise ConfigError("sweep needs reg=l2")
    states = sweep_alpha(s["alpha_grid"], lam, loss, s["teacher"], s["solver"])
    return [_overlap_row(a, lam, st, s["teacher"].rho) for a, st in zip(s["alpha_grid"], states)]


def _task_bayes(s, point):
    alpha, _ = point
    b = solve_bayes(alpha, s["teacher"], s["solver"])
    return [{"alpha": alpha, "q_b": b.q_b, "q_hat_b": b.q_hat_b, "e_g": gen_error_bayes(b, s["teacher"].rho),
             "residual": b.residual, "iters": b.iters, "status": _status(b.flags)}]


def _task_lambda_opt(s, point):
    alpha, _ = point
    res = lambda_opt(alpha, loss_from_name(s["loss"]), s["teacher"], s["solver"], bracket=s["bracket_pair"])
    st = res.state
    return [{"alpha": alpha, "lambda_opt": res.lambda_opt, "e_g": res.e_g, "at_boundary": int(res.at_boundary),
             "residual": st.residual, "iters": st.iters, "status": _status(st.flags)}]


def _fit(s, ds, lam, obj=None):
    from .simulate import fit_erm, fit_optimal, fit_ridge

    if s["loss"] == "optimal":
        return fit_optimal(ds, obj)
    loss = loss_from_name(s["loss"])
    if s["loss"] == "square" and (lam == 0 or s["reg"] == "l2"):
        return fit_ridge(ds, lam)
    return fit_erm(ds, loss, _reg(s, lam))


def _seeds(s):
    return range(s["seed0"], s["seed0"] + s["seeds"])


def _task_simulate(s, point):
    from .optimal import optimal_objective
    from .simulate import generate

    alpha, lam = point
    n = int(round(alpha * s["d"]))
    obj = optimal_objective(alpha, s["teacher"], s["solver"]) if s["loss"] == "optimal" else None
    rows = []
    for seed in _seeds(s):
        ds = generate(s["teacher"], n, s["d"], seed)
        fit = _fit(s, ds, lam, obj)
        rows.append({"alpha": alpha, "lambda": lam, "seed": seed, "m_emp": fit.m_emp, "q_emp": fit.q_emp,
                     "e_g_emp": fit.e_g_emp, "train_objective": fit.train_objective, "residual": fit.tolerance,
                     "iters": fit.solver_iters, "status": _status(fit.flags) if fit.converged
                     else "flagged: " + "; ".join(fit.flags or ("not converged",))})
    return rows


def _task_gamp(s, point):
    from .optimal import optimal_objective, optimal_loss_spec, optimal_reg_spec
    from .simulate import BAYES, GampConfig, gamp, generate

    alpha, lam = point
    n = int(round(alpha * s["d"]))
    mode = s["mode"]
    if mode == "bayes":
        ch, pr = BAYES, BAYES
    elif mode == "erm":
        ch, pr = loss_from_name(s["loss"]), _reg(s, lam)
    else:
        obj = optimal_objective(alpha, s["teacher"], s["solver"])
        ch, pr = optimal_loss_spec(obj), optimal_reg_spec(obj)
    rows = []
    for seed in _seeds(s):
        ds = generate(s["teacher"], n, s["d"], seed)
        try:
            st, traj = gamp(ds, ch, pr, GampConfig())
        except SolverError as exc:
            rows += _failed(COLUMNS["gamp"], {"alpha": alpha, "seed": seed, "mode": mode}, exc)
            continue
        m, q = traj[-1]
        rows.append({"alpha": alpha, "seed": seed, "mode": mode, "m_emp": m, "q_emp": q,
                     "mean_v": float(np.mean(st.v_vec)), "mean_lambda": float(np.mean(st.lambda_vec)),
                     "residual": math.nan, "iters": st.iter, "status": "ok"})
    return rows


def _theory(s, alpha, lam):
    """Asymptotic e_g with its residual, iteration count and flags."""
    teacher = s["teacher"]
    if s["loss"] == "optimal":
        b = solve_bayes(alpha, teacher, s["solver"])
        return gen_error_bayes(b, teacher.rho), b.residual, b.iters, b.flags
    if lam == 0:
        pinv = pseudo_inverse_overlaps(alpha, teacher.channel.noise_variance)
        return pinv.e_g, 0.0, 0, ()
    loss = loss_from_name(s["loss"])
    if s["reg"] == "l2":
        st = solve_erm_replica(alpha, lam, loss, teacher, s["solver"])
    else:
        st = solve_general_six(alpha, loss, L1(lam), teacher, s["solver"])
    return gen_error(st.m, st.q, teacher.rho), st.residual, st.iters, st.flags


def _task_compare(s, point):
    alpha, lam = point
    e_th, res, iters, flags = _theory(s, alpha, lam)
    sims = _task_simulate(s, point)
    errs = np.array([r["e_g_emp"] for r in sims])
    bad = [r["status"] for r in sims if r["status"] != "ok"]
    mean = float(errs.mean())
    se = float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else math.nan
    flags = tuple(flags) + ((f"{len(bad)} fits flagged",) if bad else ())
    return [{"alpha": alpha, "lambda": lam, "e_g_theory": e_th, "e_g_sim": mean, "e_g_sim_se": se,
             "abs_diff": abs(mean - e_th), "n_seeds": errs.size, "residual": res, "iters": iters,
             "status": _status(flags)}]


def _task_optimal_loss(s, point):
    from .optimal import export_curve, loss_curve, optimal_objective, reg_curve

    alpha, _ = point
    obj = optimal_objective(alpha, s["teacher"], s["solver"])
    b = obj.bayes
    lc = loss_curve(obj, np.array(s["z_grid"]))
    rc = reg_curve(obj, np.array(s["w_grid"]))
    if s["export_prefix"]:
        export_curve(lc, f"{s['export_prefix']}_loss_alpha{alpha!r}.txt", "z l_opt(y=1,z)")
        export_curve(rc, f"{s['export_prefix']}_reg_alpha{alpha!r}.txt", "w r_opt(w)")
    z, lz = lc.T
    w, rw = rc.T
    status = _status(b.flags + obj.flags)
    rows = [{"alpha": alpha, "curve": "loss", "x": float(x), "value": float(v), "residual": b.residual,
             "iters": b.iters, "status": status} for x, v in zip(z, lz)]
    rows += [{"alpha": alpha, "curve": "reg", "x": float(x), "value": float(v), "residual": b.residual,
              "iters": b.iters, "status": status} for x, v in zip(w, rw)]
    return rows


TASKS = {
    "solve": _task_solve,
    "sweep": _task_sweep,
    "bayes": _task_bayes,
    "lambda-opt": _task_lambda_opt,
    "simulate": _task_simulate,
    "gamp": _task_gamp,
    "compare": _task_compare,
    "optimal-loss": _task_optimal_loss,
}


def _guarded(s, point):
    """Run one task; solver failures become a marked row instead of aborting the run."""
    cmd = s["command"]
    try:
        return TASKS[cmd](s, point)
    except ConfigError:
        raise
    except ErmAsymptoticsError as exc:
        alpha, lam = point
        base = {"alpha": alpha}
        if "lambda" in COLUMNS[cmd]:
            base["lambda"] = lam
        return _failed(COLUMNS[cmd], base, exc)


def grid_points(s: dict) -> list[tuple]:
    if s["command"] == "sweep":
        # one continuation chain per lambda, serial in alpha
        return [(math.nan, lam) for lam in s["lambda_grid"]]
    return [(a, lam) for a in s["alpha_grid"] for lam in s["lambda_grid"]]


def run(settings: dict) -> list[dict]:
    """Evaluate every grid point; rows come back in grid order whatever the worker count."""
    points = grid_points(settings)
    task = partial(_guarded, settings)
    if settings["threads"] > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=settings["threads"]) as pool:
            chunks = list(pool.map(task, points))
    else:
        chunks = [task(p) for p in points]
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_rows(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        clean = [{c: (None if isinstance(r[c], float) and not math.isfinite(r[c]) else r[c]) for c in columns}
                 for r in rows]
        return json.dumps({"columns": columns, "rows": clean}, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_output(text: str, path) -> None:
    """Write through a temporary file and rename, so readers never see half a table."""
    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(text)
    os.replace(tmp, path)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        settings = resolve_settings(ns)
        rows = run(settings)
    except ConfigError as exc:
        print(f"erm-asymptotics: error: {exc}", file=sys.stderr)
        return 2
    write_output(format_rows(rows, COLUMNS[settings["command"]], settings["format"]), settings["output"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
