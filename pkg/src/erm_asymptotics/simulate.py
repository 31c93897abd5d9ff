"""Finite-size experiments: synthetic data, ERM solvers and GAMP.

Conventions: ``X`` is ``n x d`` with iid standard normal entries, the fields are
``z = X w / sqrt(d)`` and the ERM objective is

    L(w) = sum_mu l(y_mu, z_mu) + r(w),   r(w) = lambda ||w||^2 / 2 for L2,

which is the normalization under which the replica equations hold with
``alpha = n / d``.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import linalg, optimize
from scipy.sparse.linalg import LinearOperator, cg

from .errors import DomainError, SolverError
from .losses import (
    L1,
    L2,
    CustomSeparable,
    Hinge,
    Logistic,
    LossSpec,
    RegSpec,
    Square,
    f_out_erm,
    f_w_erm,
    loss_grad,
    loss_hess,
    loss_value,
    reg_grad,
    reg_value,
)
from .teacher import (
    TeacherModel,
    df_out_star,
    df_w_star,
    f_out_star,
    f_w_star,
    phi_out,
    sample_labels,
    sample_weights,
    teacher_from_config,
    teacher_to_config,
)


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    n: int
    d: int
    seed: int
    teacher: TeacherModel

    def __post_init__(self):
        if self.x.shape != (self.n, self.d) or self.y.shape != (self.n,) or self.w_star.shape != (self.d,):
            raise DomainError("inconsistent dataset shapes")

    @property
    def alpha(self) -> float:
        return self.n / self.d


@dataclass(frozen=True, eq=False)
class FitResult:
    w_hat: np.ndarray
    m_emp: float
    q_emp: float
    e_g_emp: float
    train_objective: float
    solver_iters: int
    converged: bool = True
    tolerance: float = 0.0
    flags: tuple = ()


def generate(teacher: TeacherModel, n: int, d: int, seed: int) -> Dataset:
    """Draw ``w*`` from the prior, ``X`` iid N(0, 1) and labels through the channel."""
    if d < 1 or n < 0:
        raise DomainError("need d >= 1 and n >= 0")
    rng = np.random.default_rng(seed)
    w_star = sample_weights(teacher.prior, d, rng)
    x = rng.standard_normal((n, d))
    label_seed = int(rng.integers(2**63 - 1))
    y = sample_labels(teacher.channel, x @ w_star / math.sqrt(d), label_seed)
    return Dataset(x, y, w_star, n, d, int(seed), teacher)


# ---------------------------------------------------------------------------
# dataset files

MAGIC = b"ERMADS1\n"


def save_dataset(ds: Dataset, path, fmt: str = "binary") -> None:
    """Write ``ds`` as a binary container or, for tiny instances, as text.

    Binary layout: magic line, a little-endian uint64 header length, a JSON
    header (n, d, seed, teacher config), then float64 row-major ``X``, ``y``
    and ``w*``.
    """
    header = {"n": ds.n, "d": ds.d, "seed": ds.seed, "teacher": teacher_to_config(ds.teacher)}
    if fmt == "binary":
        head = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(head)))
            fh.write(head)
            for arr in (ds.x, ds.y, ds.w_star):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    elif fmt == "text":
        with open(path, "w") as fh:
            fh.write(f"# n={ds.n} d={ds.d} seed={ds.seed}\n")
            for line in header["teacher"].splitlines():
                fh.write(f"# teacher {line}\n")
            fh.write("# w_star " + " ".join(repr(float(v)) for v in ds.w_star) + "\n")
            for row, lab in zip(ds.x, ds.y):
                fh.write(" ".join(repr(float(v)) for v in row) + " " + repr(float(lab)) + "\n")
    else:
        raise DomainError(f"unknown dataset format {fmt!r}")


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        start = fh.read(len(MAGIC))
        if start == MAGIC:
            (size,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(size))
            n, d = header["n"], header["d"]
            payload = np.frombuffer(fh.read(), dtype="<f8")
            if payload.size != n * d + n + d:
                raise DomainError("truncated dataset file")
            x = payload[: n * d].reshape(n, d).astype(float)
            y = payload[n * d: n * d + n].astype(float)
            w = payload[n * d + n:].astype(float)
            return Dataset(x, y, w, n, d, int(header["seed"]), teacher_from_config(header["teacher"]))
    return _load_text(path)


def _load_text(path) -> Dataset:
    meta, teacher_lines, w_star, rows = {}, [], None, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# teacher "):
                teacher_lines.append(line[len("# teacher "):].strip())
            elif line.startswith("# w_star"):
                w_star = np.array([float(v) for v in line.split()[2:]])
            elif line.startswith("#"):
                meta.update(kv.split("=", 1) for kv in line[1:].split())
            elif line.strip():
                rows.append([float(v) for v in line.split()])
    n, d = int(meta["n"]), int(meta["d"])
    data = np.array(rows, dtype=float).reshape(n, d + 1)
    return Dataset(data[:, :d].copy(), data[:, d].copy(), w_star, n, d, int(meta["seed"]),
                   teacher_from_config("\n".join(teacher_lines)))


# ---------------------------------------------------------------------------
# error measures


class FreshSamples(NamedTuple):
    n_test: int = 100_000
    seed: int = 0


def overlaps(w_hat, w_star):
    d = w_star.size
    return float(w_hat @ w_star / d), float(w_hat @ w_hat / d)


def _analytic_error(w_hat, w_star):
    m, q = overlaps(w_hat, w_star)
    rho_d = float(w_star @ w_star / w_star.size)
    if q == 0.0 or rho_d == 0.0:
        return 0.5
    return math.acos(min(1.0, max(-1.0, m / math.sqrt(rho_d * q)))) / math.pi


def empirical_gen_error(fit: Union[FitResult, np.ndarray], ds: Dataset, mode="analytic") -> float:
    """Test error of ``sign(x . w_hat)`` against the noiseless teacher label.

    ``mode="analytic"`` integrates over a fresh Gaussian input exactly using the
    finite-d overlaps, which is the sign-channel formula; ``FreshSamples`` draws
    a test set instead and works for every channel.
    """
    w_hat = fit.w_hat if isinstance(fit, FitResult) else np.asarray(fit, dtype=float)
    if mode == "analytic":
        return _analytic_error(w_hat, ds.w_star)
    if not isinstance(mode, FreshSamples):
        raise DomainError(f"unknown error mode {mode!r}")
    rng = np.random.default_rng(mode.seed)
    errors, done, chunk = 0, 0, 20_000
    sd = math.sqrt(ds.d)
    while done < mode.n_test:
        k = min(chunk, mode.n_test - done)
        xt = rng.standard_normal((k, ds.d))
        truth = phi_out(ds.teacher.channel, xt @ ds.w_star / sd)
        pred = np.where(xt @ w_hat >= 0, 1.0, -1.0)
        errors += int(np.count_nonzero(pred != truth))
        done += k
    return errors / mode.n_test


def _result(w, ds, objective, iters, converged=True, tol=0.0, flags=()):
    m, q = overlaps(w, ds.w_star)
    return FitResult(w, m, q, empirical_gen_error(w, ds), float(objective), int(iters), converged, float(tol),
                     tuple(flags))


def objective(ds: Dataset, loss: LossSpec, reg: RegSpec, w) -> float:
    z = ds.x @ w / math.sqrt(ds.d)
    return float(np.sum(loss_value(loss, ds.y, z)) + np.sum(reg_value(reg, w)))


# ---------------------------------------------------------------------------
# ridge


def fit_ridge(ds: Dataset, lambda_: float) -> FitResult:
    """Exact minimizer of the square loss plus ``lambda ||w||^2 / 2``.

    ``lambda_ = 0`` returns the minimum-norm least-squares solution.
    """
    if not (math.isfinite(lambda_) and lambda_ >= 0):
        raise DomainError("lambda must be nonnegative")
    n, d = ds.n, ds.d
    if n == 0:
        return _result(np.zeros(d), ds, 0.0, 0)
    a = ds.x / math.sqrt(d)
    if lambda_ == 0:
        w = linalg.lstsq(a, ds.y, lapack_driver="gelsd")[0]
    elif n >= d:
        w = linalg.solve(a.T @ a + lambda_ * np.eye(d), a.T @ ds.y, assume_a="pos")
    else:
        w = a.T @ linalg.solve(a @ a.T + lambda_ * np.eye(n), ds.y, assume_a="pos")
    train = 0.5 * float(np.sum((ds.y - a @ w) ** 2)) + 0.5 * lambda_ * float(w @ w)
    return _result(w, ds, train, 1)


# ---------------------------------------------------------------------------
# generic ERM


@dataclass(frozen=True)
class OptConfig:
    """Tolerances of the finite-size solvers."""

    gtol: float = 1e-8
    max_iter: int = 5000
    smoothing: tuple = (1e-1, 1e-2, 1e-4)
    hinge_sweeps: int = 400
    starts: int = 3
    seed: int = 0
    margins: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)


def _smooth_parts(ds, loss, reg):
    """Objective, gradient and Hessian-vector product for differentiable loss and L2/custom reg."""
    a = ds.x / math.sqrt(ds.d)
    y = ds.y

    def fun(w):
        z = a @ w
        return float(np.sum(loss_value(loss, y, z)) + np.sum(reg_value(reg, w)))

    def jac(w):
        return a.T @ loss_grad(loss, y, a @ w) + reg_grad(reg, w)

    def hessp(w, p):
        out = a.T @ (loss_hess(loss, y, a @ w) * (a @ p))
        if isinstance(reg, L2):
            out = out + reg.strength * p
        return out

    return fun, jac, hessp


def _newton_polish(jac, hessp, w, gtol, steps=8):
    """Full Newton steps with CG solves, kept only while the gradient norm drops.

    Trust-region methods stop once the predicted decrease falls below round-off
    of the objective, which can leave the gradient above ``gtol``; the
    gradient itself is still informative there.
    """
    g = jac(w)
    gn = float(np.linalg.norm(g))
    d = w.size
    for _ in range(steps):
        if gn <= gtol:
            break
        op = LinearOperator((d, d), matvec=lambda p: hessp(w, p), dtype=float)
        step, _ = cg(op, -g, rtol=1e-12, maxiter=10 * d)
        w_new = w + step
        g_new = jac(w_new)
        gn_new = float(np.linalg.norm(g_new))
        if not gn_new < gn:
            break
        w, g, gn = w_new, g_new, gn_new
    return w, gn


def _newton_fit(ds, loss, reg, cfg: OptConfig, w0=None):
    fun, jac, hessp = _smooth_parts(ds, loss, reg)
    w0 = np.zeros(ds.d) if w0 is None else w0
    res = optimize.minimize(fun, w0, jac=jac, hessp=hessp, method="trust-ncg",
                            options={"gtol": cfg.gtol, "maxiter": cfg.max_iter})
    w, gnorm = _newton_polish(jac, hessp, res.x, cfg.gtol)
    return w, fun(w), res.nit, gnorm


def _fit_logistic_l2(ds, reg, cfg):
    w, f, nit, g = _newton_fit(ds, Logistic(), reg, cfg)
    ok = g <= cfg.gtol
    return _result(w, ds, f, nit, ok, g, () if ok else ("not converged",))


# hinge + L2.  With b_mu = y_mu x_mu / sqrt(d) the dual is the box QP
#   max_a  sum(a) - ||B^T a||^2 / (2 lam),  0 <= a <= 1,  w = B^T a / lam.


def _huber(t, eps):
    """Smoothed ``max(0, t)``: value and derivative."""
    quad = (t > 0) & (t <= eps)
    val = np.where(t > eps, t - 0.5 * eps, np.where(quad, 0.5 * t * t / eps, 0.0))
    der = np.where(t > eps, 1.0, np.where(quad, t / eps, 0.0))
    return val, der


def _hinge_dual(b, lam, a):
    v = b.T @ a
    return float(np.sum(a) - 0.5 * v @ v / lam)


def _hinge_primal(b, lam, w):
    return float(np.sum(np.maximum(0.0, 1.0 - b @ w)) + 0.5 * lam * w @ w)


def _dual_sweeps(b, lam, a, w, sweeps, rng, qii):
    """Dual coordinate ascent, one exact box-clipped update per sample and sweep."""
    for _ in range(sweeps):
        for i in rng.permutation(b.shape[0]):
            bi = b[i]
            ai = a[i]
            new = min(max(ai - (bi @ w - 1.0) / qii[i], 0.0), 1.0)
            if new != ai:
                w += (new - ai) / lam * bi
                a[i] = new
    return a, w


def _pdas(b, lam, a, c, max_iter=20, tol=1e-10):
    """Primal-dual active-set iteration on the box QP, started from ``a``.

    Sets are read off ``a - c (margin - 1)``; on the free set the margins are
    forced to 1, which is a linear system in the free duals.  Returns ``None``
    when the free set outgrows the dimension or the sets keep changing.
    """
    n, d = b.shape
    mu = b @ (b.T @ a) / lam - 1.0
    for _ in range(max_iter):
        t = a - c * mu
        zero, one = t <= 0, t >= 1
        free = np.flatnonzero(~zero & ~one)
        if free.size > d:
            return None
        a = np.where(one, 1.0, 0.0)
        if free.size:
            bf = b[free]
            rhs = lam - bf @ (b.T @ a)
            try:
                a[free] = linalg.solve(bf @ bf.T, rhs, assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                return None
        mu = b @ (b.T @ a) / lam - 1.0
        kkt = max(np.max(-a, initial=0.0), np.max(a - 1.0, initial=0.0),
                  np.max(-mu[zero], initial=0.0), np.max(mu[one], initial=0.0))
        if kkt <= tol:
            return np.clip(a, 0.0, 1.0)
    return None


def _huber_newton(b, lam, eps, w, gtol=1e-8, max_iter=200):
    """Newton with backtracking on the Huber-smoothed primal."""
    d = b.shape[1]

    def parts(w):
        t = 1.0 - b @ w
        val, der = _huber(t, eps)
        return float(val.sum() + 0.5 * lam * w @ w), lam * w - b.T @ der, t

    f, g, t = parts(w)
    for _ in range(max_iter):
        if np.linalg.norm(g) <= gtol:
            break
        bq = b[(t > 0) & (t <= eps)]
        p = -linalg.solve(bq.T @ bq / eps + lam * np.eye(d), g, assume_a="pos")
        step = 1.0
        while True:
            fn, gn, tn = parts(w + step * p)
            if fn <= f + 1e-4 * step * (g @ p) or step < 1e-12:
                break
            step *= 0.5
        w, f, g, t = w + step * p, fn, gn, tn
    return w, _huber(t, eps)[1]


def _fit_hinge_l2(ds, reg: L2, cfg: OptConfig):
    """Exact hinge + L2 minimizer with a duality-gap certificate.

    Dual coordinate ascent brings the dual close enough for the active-set
    iteration to identify the samples on the margin; the Huber continuation
    in ``cfg.smoothing`` is the fallback start.
    """
    lam = reg.strength
    n, d = ds.n, ds.d
    b = ds.y[:, None] * ds.x / math.sqrt(d)
    qii = np.einsum("ij,ij->i", b, b) / lam
    c = 1.0 / float(np.median(qii))
    rng = np.random.default_rng(cfg.seed)
    a, w = np.zeros(n), np.zeros(d)
    exact, sweeps = None, 0
    while sweeps <= cfg.hinge_sweeps:
        if np.count_nonzero((a > 0) & (a < 1)) <= d and (sweeps > 0 or n <= d):
            exact = _pdas(b, lam, a.copy(), c)
            if exact is not None:
                break
        a, w = _dual_sweeps(b, lam, a, w, 5, rng, qii)
        sweeps += 5
    if exact is None:
        wh = w.copy()
        for eps in cfg.smoothing:
            wh, a_eps = _huber_newton(b, lam, eps, wh)
            exact = _pdas(b, lam, a_eps, c)
            if exact is not None:
                break
    flags = []
    if exact is not None:
        a = exact
    else:
        flags.append("active set not found")
    w = b.T @ a / lam
    primal = _hinge_primal(b, lam, w)
    gap = primal - _hinge_dual(b, lam, a)
    ok = gap <= 1e-8 * max(1.0, abs(primal))
    if not ok:
        flags.append("duality gap above tolerance")
    return _result(w, ds, primal, sweeps, ok, gap, flags)


def _fista(ds, loss, reg: L1, cfg: OptConfig):
    """Accelerated proximal gradient for a smooth loss plus L1."""
    a = ds.x / math.sqrt(ds.d)
    y = ds.y
    curv = 0.25 if isinstance(loss, Logistic) else 1.0
    step = 1.0 / (curv * linalg.norm(a, 2) ** 2 + 1e-300)
    s = reg.strength

    def grad(w):
        return a.T @ loss_grad(loss, y, a @ w)

    w = v = np.zeros(ds.d)
    t = 1.0
    for it in range(1, 20 * cfg.max_iter + 1):
        g = v - step * grad(v)
        w_new = np.sign(g) * np.maximum(np.abs(g) - step * s, 0.0)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = w_new + (t - 1.0) / t_new * (w_new - w)
        # restart when momentum points uphill
        if (v - w_new) @ (w_new - w) < 0:
            t_new, v = 1.0, w_new
        change = float(np.linalg.norm(w_new - w))
        w, t = w_new, t_new
        if change <= cfg.gtol * max(1.0, float(np.linalg.norm(w))):
            break
    gm = grad(w)
    # distance of -grad to the subdifferential of the L1 term
    res = np.where(w != 0, gm + s * np.sign(w), np.maximum(np.abs(gm) - s, 0.0))
    opt = float(np.linalg.norm(res))
    ok = opt <= max(1e-6, cfg.gtol * 1e2)
    return _result(w, ds, objective(ds, loss, reg, w), it, ok, opt, () if ok else ("not converged",))


def _multi_start(ds, loss, reg, cfg: OptConfig, starts: Sequence[np.ndarray] = ()):
    """Best of several L-BFGS runs for possibly non-convex objectives."""
    fun, jac, _ = _smooth_parts(ds, loss, reg)
    rng = np.random.default_rng(cfg.seed)
    inits = [np.zeros(ds.d)] + list(starts)
    inits += [rng.standard_normal(ds.d) * 0.1 for _ in range(max(0, cfg.starts - len(inits)))]
    best = None
    total = 0
    for w0 in inits:
        res = optimize.minimize(fun, w0, jac=jac, method="L-BFGS-B",
                                options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "ftol": 1e-15})
        total += res.nit
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise SolverError("every start produced a non-finite objective")
    g = float(np.linalg.norm(jac(best.x)))
    ok = g <= max(cfg.gtol, 1e-5)
    return _result(best.x, ds, best.fun, total, ok, g, () if ok else ("not converged",))


def fit_erm(ds: Dataset, loss: LossSpec, reg: RegSpec, opt_cfg: OptConfig = OptConfig(),
            starts: Sequence[np.ndarray] = ()) -> FitResult:
    """Minimize ``sum l(y, X w / sqrt(d)) + r(w)``.

    Routes: square + L2 is solved exactly; logistic + L2 by trust-region Newton;
    hinge + L2 by dual coordinate ascent followed by an exact active-set step
    with a duality-gap certificate; smooth losses + L1 by FISTA; everything else
    (custom losses or regularizers) by multi-start L-BFGS.
    """
    if ds.n == 0:
        return _result(np.zeros(ds.d), ds, 0.0, 0)
    if isinstance(loss, Square) and isinstance(reg, L2):
        return fit_ridge(ds, reg.strength)
    if isinstance(loss, Logistic) and isinstance(reg, L2):
        return _fit_logistic_l2(ds, reg, opt_cfg)
    if isinstance(loss, Hinge) and isinstance(reg, L2):
        return _fit_hinge_l2(ds, reg, opt_cfg)
    if isinstance(reg, L1):
        if isinstance(loss, Hinge):
            raise DomainError("hinge with L1 is not supported")
        return _fista(ds, loss, reg, opt_cfg)
    if isinstance(loss, Hinge):
        raise DomainError("hinge needs an L2 regularizer")
    if isinstance(reg, CustomSeparable) and reg.grad is None:
        raise DomainError("custom regularizer needs a gradient")
    return _multi_start(ds, loss, reg, opt_cfg, starts)


def fit_optimal(ds: Dataset, obj, opt_cfg: OptConfig = OptConfig(), w0=None) -> FitResult:
    """ERM with the Bayes-matched loss and regularizer of ``obj`` (an ``OptimalObjective``).

    When the channel confines the fields to an interval (noiseless sign: positive
    margins), the loss is extended past a distance ``t`` from the boundary and
    ``t`` is decreased until every field of the minimizer is farther than ``t``
    from the boundary; the extended and true objectives then share the minimizer.
    """
    from .optimal import loss_support, optimal_loss_spec, optimal_reg_spec

    reg = optimal_reg_spec(obj)
    sv = math.sqrt(obj.v_star)
    lo, hi = loss_support(ds.teacher.channel, ds.y)
    w = np.zeros(ds.d) if w0 is None else np.asarray(w0, dtype=float)
    a = ds.x / math.sqrt(ds.d)
    iters = 0
    smooth_reg = isinstance(reg, L2)
    for t in opt_cfg.margins:
        loss = optimal_loss_spec(obj, margin=t * sv)
        if smooth_reg:
            w, f, nit, g = _newton_fit(ds, loss, reg, opt_cfg, w)
        else:
            fun, jac, _ = _smooth_parts(ds, loss, reg)
            res = optimize.minimize(fun, w, jac=jac, method="L-BFGS-B",
                                    options={"maxiter": opt_cfg.max_iter, "gtol": opt_cfg.gtol, "ftol": 1e-15})
            w, f, nit = res.x, res.fun, res.nit
            g = float(np.linalg.norm(jac(w)))
        iters += nit
        z = a @ w
        gap = float(np.min(np.minimum(z - lo, hi - z))) if ds.n else math.inf
        if gap > t * sv:
            ok = g <= max(opt_cfg.gtol, 1e-6)
            return _result(w, ds, f, iters, ok, g, () if ok else ("not converged",))
    return _result(w, ds, f, iters, False, g, ("fields reach the support boundary",))


# ---------------------------------------------------------------------------
# replication helper


def _fit_one(args):
    teacher, n, d, seed, loss, reg = args
    ds = generate(teacher, n, d, seed)
    if isinstance(loss, Square) and isinstance(reg, (L2, type(None))):
        return fit_ridge(ds, reg.strength if reg is not None else 0.0)
    return fit_erm(ds, loss, reg)


def replicate(teacher: TeacherModel, alpha: float, d: int, seeds: Sequence[int], loss: LossSpec,
              reg: Optional[RegSpec], workers: int = 1):
    """Fit the same problem on independent datasets; ``reg=None`` with square loss is least norm.

    Results come back in the order of ``seeds`` whatever the number of workers.
    """
    n = int(round(alpha * d))
    jobs = [(teacher, n, d, int(s), loss, reg) for s in seeds]
    if workers <= 1:
        return [_fit_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fit_one, jobs))


# ---------------------------------------------------------------------------
# GAMP


@dataclass(frozen=True, eq=False)
class GampState:
    w_hat: np.ndarray
    c_w: np.ndarray
    f_out_vec: np.ndarray
    lambda_vec: np.ndarray
    gamma_vec: np.ndarray
    v_vec: np.ndarray
    omega_vec: np.ndarray
    iter: int


@dataclass(frozen=True)
class GampConfig:
    damping: float = 0.5
    tol: float = 1e-7
    max_iter: int = 1000
    fast: bool = False
    blowup: float = 1e3

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise DomainError("damping must lie in [0, 1)")


class GampDivergence(SolverError):
    pass


BAYES = "bayes"


def _channel_fn(ds, channel_denoiser):
    if channel_denoiser == BAYES:
        ch = ds.teacher.channel
        return lambda om, v: (f_out_star(ch, ds.y, om, v), df_out_star(ch, ds.y, om, v))
    return lambda om, v: f_out_erm(channel_denoiser, ds.y, om, v)


def _prior_fn(ds, prior_denoiser):
    if prior_denoiser == BAYES:
        pr = ds.teacher.prior
        return lambda g, lam: (f_w_star(pr, g, lam), df_w_star(pr, g, lam))
    return lambda g, lam: f_w_erm(prior_denoiser, g, lam)


def gamp(ds: Dataset, channel_denoiser=BAYES, prior_denoiser=BAYES, cfg: GampConfig = GampConfig()):
    """Generalized approximate message passing on ``ds``.

    ``channel_denoiser`` is ``"bayes"`` or a loss spec and ``prior_denoiser`` is
    ``"bayes"`` or a regularizer spec.  Returns the final :class:`GampState` and
    the list of ``(m_emp, q_emp)`` after every iteration.  Convergence means
    ``||w^{t+1} - w^t|| / sqrt(d) < tol``.
    """
    n, d = ds.n, ds.d
    a = ds.x / math.sqrt(d)
    a2 = a * a
    fout = _channel_fn(ds, channel_denoiser)
    fw = _prior_fn(ds, prior_denoiser)
    rho = ds.teacher.rho
    w = np.zeros(d)
    c = np.full(d, rho)
    g = np.zeros(n)
    traj = []
    base = math.sqrt(rho) + 1.0
    for it in range(1, cfg.max_iter + 1):
        if cfg.fast:
            v = np.full(n, c.mean())
        else:
            v = a2 @ c
        omega = a @ w - v * g
        g_new, dg = fout(omega, v)
        g = cfg.damping * g + (1.0 - cfg.damping) * g_new if it > 1 else g_new
        lam = np.full(d, -dg.sum() / d) if cfg.fast else -(a2.T @ dg)
        lam = np.maximum(lam, 1e-12)
        gamma = a.T @ g + lam * w
        w_new, c = fw(gamma, lam)
        w_next = cfg.damping * w + (1.0 - cfg.damping) * w_new
        change = float(np.linalg.norm(w_next - w) / math.sqrt(d))
        w = w_next
        traj.append(overlaps(w, ds.w_star))
        norm = float(np.linalg.norm(w) / math.sqrt(d))
        if not math.isfinite(norm) or norm > cfg.blowup * base:
            raise GampDivergence("GAMP diverged", residual=norm, trajectory=traj)
        if change < cfg.tol:
            break
    state = GampState(w, c, g, lam, gamma, v, omega, it)
    return state, traj
