"""Batch command-line front door.

Four commands cover the package's workflows:

* ``eval``       — evaluate one of the special functions (``psi``, the
                   degenerate determinant ratio ``hciz``, ``macdonald``,
                   the fixed-time density ``theta``, or the
                   ``fundamental`` series) and print value/error/route.
* ``simulate``   — run one of the stochastic processes and write its
                   trajectory as CSV.
* ``verify``     — run a named verification suite and write a JSON
                   report; every check name maps one-to-one onto an
                   acceptance criterion.
* ``table``      — run the full acceptance battery (all suites) and
                   print one line per criterion.

Reproducibility contract: identical configuration produces
byte-identical CSV/JSON artifacts.  All randomness flows through seeds
(default ``DEFAULT_SEED``), floats are printed with 17 significant
digits, JSON keys are sorted, and Monte Carlo fan-out is sharded so
WHITTAKER_LAB_THREADS changes wall time only.

Exit codes: 0 success, 1 at least one verification check failed,
2 usage error (with a machine-readable JSON object on stderr).
"""

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.stats

from . import cells, gtpoly, paths, qdeform, specfun
from .givental import (QuadSpec, asymptotic_check, eigen_residual,
                       whittaker_energy_integral, whittaker_givental_mc,
                       whittaker_lusztig_n3, whittaker_quadrature,
                       zero_temperature_limit)
from .specfun import (fundamental_whittaker, hciz_J, macdonald_K,
                      theta_density, vandermonde, whittaker_from_series)

DEFAULT_SEED = 1729
SCHEMA = 1

# The convention adjudications the verification suites rely on; every
# verify report repeats the entries relevant to its suite so downstream
# diffs of the JSON artifacts pin them.
CONVENTIONS = {
    "dh_constant": "J_0(x) = vandermonde(x) / prod_{j<n} j! "
                   "(volume oracle: vol GT((2,1,0)) = 1)",
    "startup_error": "composite-transform factorization gaps are first "
                     "order in dt (missing initial integral mass)",
    "double_transform": "applying the path transform twice diverges; "
                        "no involution is asserted",
    "q0_spectral_sum": "at q = 0, t = 1 the spectral sum is z + 1",
    "q0_up_probability": "(z+2)/(2(z+1)); the (z+1)/(2z) variant is the "
                         "same chain shifted one state up",
    "stationary_output_up_probability": "1 - p",
}


class UsageError(Exception):
    """Raised for malformed command lines / config files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """A fully merged run request: command plus parameter map."""

    command: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in ("eval", "simulate", "verify", "table"):
            raise UsageError(f"unknown command {self.command!r}")
        self.params.setdefault("seed", DEFAULT_SEED)


# ---------------------------------------------------------------------------
# formatting helpers
# ---------------------------------------------------------------------------


def _g17(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _dump_json(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_g17(v) for v in row))
    return "\n".join(lines) + "\n"


def _floats(text, name):
    try:
        return tuple(float(tok) for tok in str(text).split(","))
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated float list, "
                         f"got {text!r}")


def _ints(text, name):
    try:
        return tuple(int(tok) for tok in str(text).split(","))
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated integer list, "
                         f"got {text!r}")


def _rational(text, name):
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{name} must be a rational like 1/4, got {text!r}")


# ---------------------------------------------------------------------------
# acceptance-criterion check runners
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    metric: float
    tolerance: float
    info: dict = field(default_factory=dict)

    @property
    def status(self):
        return "pass" if self.passed else "fail"

    def as_dict(self):
        return {"name": self.name, "status": self.status,
                "metric": float(self.metric),
                "tolerance": float(self.tolerance),
                "info": _jsonable(self.info)}


def _closed_form_rank2(lam, x):
    return (2.0 * math.exp((lam[0] + lam[1]) * (x[0] + x[1]) / 2.0)
            * macdonald_K(lam[0] - lam[1],
                          2.0 * math.exp((x[1] - x[0]) / 2.0)))


def criterion_01_rank2_closed_form(p=None):
    """Three routes against the rank-2 Macdonald closed form on a grid."""
    p = p or {}
    samples = int(p.get("samples", 1_000_000))
    seed = int(p.get("seed", DEFAULT_SEED))
    budget = float(p.get("budget_s", 120.0))
    grid = [((g / 2 + 0.1, -g / 2 + 0.1), (xg / 2 + 0.2, -xg / 2 + 0.2))
            for g in (2.6, 3.0, 3.4, 3.8, 4.2) for xg in (0.0, 0.8)]
    t0 = time.time()
    worst = 0.0
    rows = []
    for i, (lam, x) in enumerate(grid):
        target = _closed_form_rank2(lam, x)
        quad = whittaker_quadrature(lam, x)
        quad_ratio = abs(float(quad) - target) / (1e-8 * target)
        mc = whittaker_givental_mc(lam, x, samples=samples,
                                   rng_seed=seed + 101 * i)
        mc_ratio = abs(float(mc) - target) / (3.0 * mc.est_error)
        fk = paths.feynman_kac_psi(lam, x, horizon=6.0, paths=samples,
                                   dt=0.03, rng_seed=seed + 101 * i + 50)
        fk_band = (3.0 * fk.est_error
                   + fk.meta["prefactor"] * fk.meta["tail_bound"])
        fk_ratio = abs(fk.value - target) / fk_band
        worst = max(worst, quad_ratio, mc_ratio, fk_ratio)
        rows.append({"lam": lam, "x": x, "quad_ratio": quad_ratio,
                     "mc_ratio": mc_ratio, "fk_ratio": fk_ratio})
    elapsed = time.time() - t0
    passed = worst <= 1.0 and elapsed < budget
    return CheckResult("criterion-01", passed, worst, 1.0,
                       {"points": rows, "elapsed_s": elapsed,
                        "budget_s": budget, "samples": samples})


def criterion_02_rank3_route_agreement(p=None):
    """Quadrature, positive-coordinate, Monte Carlo, and series routes
    agree pairwise at rank 3."""
    p = p or {}
    samples = int(p.get("samples", 400_000))
    seed = int(p.get("seed", DEFAULT_SEED))
    budget = float(p.get("budget_s", 600.0))
    pts = [((0.8, 0.1, -0.6), (0.7, 0.0, -0.5)),
           ((1.5, 0.1, -0.7), (0.2, 0.0, -0.2)),
           ((1.0, 0.5, -1.2), (0.5, 0.1, -0.4)),
           ((1.6, -0.7, -1.1), (0.0, 0.0, 0.0)),
           ((2.0, 0.4, -1.3), (0.6, -0.1, -0.3))]
    t0 = time.time()
    worst = 0.0
    rows = []
    for i, (lam, x) in enumerate(pts):
        evs = {
            "quadrature": whittaker_quadrature(lam, x),
            "lusztig": whittaker_lusztig_n3(lam, x),
            "givental-mc": whittaker_givental_mc(lam, x, samples=samples,
                                                 rng_seed=seed + 31 * i),
        }
        sv = whittaker_from_series(lam, x)
        values = {k: float(v) for k, v in evs.items()}
        values["series"] = float(sv)
        errors = {k: v.est_error for k, v in evs.items()}
        errors["series"] = 1e-10 * abs(float(sv))
        names = sorted(values)
        pt_worst = 0.0
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                ka, kb = names[a], names[b]
                band = 3.0 * (errors[ka] + errors[kb]) \
                    + 1e-9 * abs(values[ka])
                pt_worst = max(pt_worst,
                               abs(values[ka] - values[kb]) / band)
        worst = max(worst, pt_worst)
        rows.append({"lam": lam, "x": x, "values": values,
                     "worst_pair_ratio": pt_worst})
    elapsed = time.time() - t0
    passed = worst <= 1.0 and elapsed < budget
    return CheckResult("criterion-02", passed, worst, 1.0,
                       {"points": rows, "elapsed_s": elapsed,
                        "budget_s": budget})


def criterion_03_eigen_residual(p=None):
    """Second-order stencil residual of the Toda eigenvalue equation."""
    p = p or {}
    r2 = eigen_residual((0.9, -0.4), (0.3, -0.2), h=1e-3)
    r3 = eigen_residual((0.8, 0.1, -0.6), (0.4, 0.0, -0.3), h=1e-3)
    decays = [eigen_residual((0.9, -0.4), (0.3, -0.2), h=h)
              for h in (4e-3, 2e-3, 1e-3)]
    slope = float(np.polyfit(np.log([4e-3, 2e-3, 1e-3]),
                             np.log(decays), 1)[0])
    passed = r2 < 1e-5 and r3 < 1e-3 and slope > 1.6
    metric = max(r2 / 1e-5, r3 / 1e-3)
    return CheckResult("criterion-03", passed, metric, 1.0,
                       {"residual_rank2": r2, "residual_rank3": r3,
                        "stencil_decay_slope": slope,
                        "residuals_by_h": decays})


def criterion_04_asymptotics(p=None):
    """Deep-chamber limit: the normalized value is dominated by and
    approaches the Gamma-product target."""
    p = p or {}
    lam = (0.9, 0.15, -1.05)
    ratios = {}
    for gap in (2.0, 4.0, 6.0, 8.0):
        value, target = asymptotic_check(lam, gap)
        ratios[gap] = value / target
    bound_ok = all(r <= 1.0 + 1e-9 for r in ratios.values())
    final_gap = abs(ratios[8.0] - 1.0)
    passed = bound_ok and final_gap < 1e-2
    return CheckResult("criterion-04", passed, final_gap, 1e-2,
                       {"ratios": {str(k): v for k, v in ratios.items()},
                        "bound_ok": bound_ok, "lam": lam})


def criterion_05_zero_temperature(p=None):
    """Low-noise rescaling degenerates to the determinant ratio."""
    p = p or {}
    lam, x = (1.0, 0.0), (2.0, 0.0)   # the 1/beta correction needs a
    target = hciz_J(lam, x)           # wide position gap to sit under 2%
    errs = []
    for beta in (10.0, 20.0, 50.0):
        errs.append(abs(zero_temperature_limit(lam, x, beta) - target)
                    / abs(target))
    passed = errs[-1] < 0.02 and errs[0] > errs[1] > errs[2]
    return CheckResult("criterion-05", passed, errs[-1], 0.02,
                       {"relative_errors": errs, "betas": [10, 20, 50],
                        "monotone": errs[0] > errs[1] > errs[2],
                        "lam": lam, "x": x})


def criterion_06_exit_probability(p=None):
    """Chamber survival probability against the determinant identity."""
    p = p or {}
    n_paths = int(p.get("paths", 100_000))
    seed = int(p.get("seed", DEFAULT_SEED))
    worst = 0.0
    rows = []
    for lam, x in (((1.0, 0.0), (2.0, 0.0)),
                   ((1.2, 0.0, -1.2), (3.0, 0.0, -3.0))):
        target = (vandermonde(lam) * math.exp(-float(np.dot(lam, x)))
                  * hciz_J(lam, x))
        est = paths.exit_probability(lam, x, horizon=50.0, paths=n_paths,
                                     dt=1e-3, rng_seed=seed)
        bias_allow = 0.1 * math.sqrt(est.dt)
        low = (target - est) / (3.0 * est.stderr)
        high = (est - target) / (3.0 * est.stderr + bias_allow)
        ratio = max(low, high, 0.0)
        worst = max(worst, ratio)
        rows.append({"lam": lam, "x": x, "target": target,
                     "estimate": float(est), "stderr": est.stderr,
                     "bias_allowance": bias_allow, "ratio": ratio})
    passed = worst <= 1.0
    return CheckResult("criterion-06", passed, worst, 1.0,
                       {"cases": rows, "paths": n_paths})


def criterion_07_dh_pushforward(p=None):
    """Polytope push-forward estimate of the determinant ratio, plus the
    normalizing-constant adjudication by the volume oracle."""
    p = p or {}
    samples = int(p.get("samples", 20_000))
    seed = int(p.get("seed", DEFAULT_SEED))
    lam, x = (0.7, 0.1, -0.5), (1.5, 0.2, -1.0)
    target = hciz_J(lam, x)
    est, stderr = gtpoly.dh_estimate_J(lam, x, samples=samples,
                                       rng_seed=seed)
    ratio = abs(est - target) / (3.0 * stderr)
    # volume oracle for the lambda -> 0 constant: at x = (2,1,0) the
    # polytope volume is exactly 1; vandermonde(x)/prod(j!) = 1 matches,
    # the inverted constant vandermonde(x)*prod(j!) = 4 does not
    vol = gtpoly.gt_volume((2.0, 1.0, 0.0), method="limit").value
    adopted = vandermonde((2.0, 1.0, 0.0)) / (math.factorial(1)
                                              * math.factorial(2))
    inverted = vandermonde((2.0, 1.0, 0.0)) * (math.factorial(1)
                                               * math.factorial(2))
    verdict_ok = abs(vol - adopted) < 1e-9 and abs(vol - inverted) > 1.0
    passed = ratio <= 1.0 and verdict_ok
    return CheckResult("criterion-07", passed, ratio, 1.0,
                       {"estimate": est, "stderr": stderr, "target": target,
                        "constant_verdict": CONVENTIONS["dh_constant"],
                        "volume": vol, "adopted_constant": adopted,
                        "inverted_constant": inverted})


def criterion_08_gauss_factorization(p=None):
    """Driven-flow Gauss factorization against the composite transform on
    Brownian paths, plus the exact rational parameter-change identities."""
    p = p or {}
    n_paths = int(p.get("paths", 10))
    seed0 = int(p.get("seed", 0))
    dt = float(p.get("dt", 1e-3))
    tol = 5.0 * 4.0 * dt      # five times the first-order grid-error bound
    worst = 0.0
    runs = []
    for n, word in ((2, [1]), (3, [1, 2, 1])):
        for s in range(n_paths):
            eta = paths.brownian_sample(n, 0.0, 1.0, dt,
                                        rng_seed=seed0 + s)
            rep = cells.gauss_theorem_check(eta, word, rel_tol=tol)
            gap = max(rep.diag_gap, rep.unipotent_gap, rep.lower_gap,
                      rep.lemma_gap)
            worst = max(worst, gap / tol)
            runs.append({"n": n, "seed": seed0 + s, "gap": gap,
                         "passed": rep.passed})
    # exact rational identities for the parameter changes: both maps are
    # involutions; the upper-factor map preserves the coordinate product,
    # the lower-factor map exchanges middle and outer-sum
    F = Fraction
    exact_ok = (cells.transition_map_u((F(1), F(1), F(1)))
                == (F(2), F(1), F(1, 2)))
    for trip in ((F(2), F(1, 3), F(5)), (F(1, 7), F(3), F(2, 5))):
        img = cells.transition_map_u(trip)
        exact_ok = exact_ok and cells.transition_map_u(
            img, direction="212->121") == trip
        exact_ok = exact_ok and (img[0] * img[1] * img[2]
                                 == trip[0] * trip[1] * trip[2])
        v_img = cells.transition_map_v(trip)
        exact_ok = exact_ok and cells.transition_map_v(v_img) == trip
        exact_ok = exact_ok and v_img[0] + v_img[2] == trip[1]
        exact_ok = exact_ok and v_img[1] == trip[0] + trip[2]
    passed = worst <= 1.0 and exact_ok
    return CheckResult("criterion-08", passed, worst, 1.0,
                       {"tolerance_rule": "5 * (4 * dt)", "dt": dt,
                        "runs": runs, "exact_identities": exact_ok})


def criterion_09_braid_invariance(p=None):
    """The two longest-word letter orders agree up to a first-order
    discretization gap that halves when the grid step halves."""
    p = p or {}
    n_paths = int(p.get("paths", 10))
    seed0 = int(p.get("seed", 0))
    ratios = []
    for s in range(n_paths):
        fine = paths.brownian_sample(3, 0.0, 1.0, 5e-4, rng_seed=seed0 + s)
        coarse = fine.subsample(2)

        def braid_diff(path):
            w1 = paths.transform_Tw(path, [1, 2, 1])
            w2 = paths.transform_Tw(path, [2, 1, 2])
            m = w1.times >= 0.1
            return float(np.max(np.abs(w1.values[m] - w2.values[m])))

        ratios.append(braid_diff(fine) / braid_diff(coarse))
    mean_ratio = float(np.mean(ratios))
    passed = 0.4 <= mean_ratio <= 0.6
    metric = abs(mean_ratio - 0.5)
    return CheckResult("criterion-09", passed, metric, 0.1,
                       {"mean_ratio": mean_ratio, "ratios": ratios,
                        "window": "t >= 0.1"})


def criterion_10_fixed_time_law(p=None):
    """Chi-square of the transformed pair at time one against the
    spectral density, at zero and nonzero drift."""
    p = p or {}
    n_paths = int(p.get("paths", 100_000))
    dt = float(p.get("dt", 1e-3))
    budget = float(p.get("budget_s", 900.0))
    t0 = time.time()
    zero = paths.law_check_nu_t((0.0, 0.0), 1.0, paths=n_paths, dt=dt,
                                bins=20, rng_seed=9)
    drifted = paths.law_check_nu_t((0.35, -0.35), 1.0, paths=n_paths,
                                   dt=dt, bins=20, rng_seed=12)
    elapsed = time.time() - t0
    p_min = min(zero.p_value, drifted.p_value)
    passed = (zero.passed and drifted.passed and p_min > 1e-3
              and elapsed < budget)
    return CheckResult("criterion-10", passed, p_min, 1e-3,
                       {"zero_drift_p": zero.p_value,
                        "drifted_p": drifted.p_value,
                        "elapsed_s": elapsed, "paths": n_paths,
                        "comparison": "p-value must exceed tolerance"})


def criterion_11_laplace_transform(p=None):
    """Monte Carlo Laplace transform of the partition weight against the
    spectral contour integral."""
    p = p or {}
    seed = int(p.get("seed", 3))
    worst = 0.0
    rows = []
    for s_val in (0.5, 1.0, 2.0):
        chk = paths.laplace_transform_check(1, s_val, 1.0, paths=200_000,
                                            rng_seed=seed)
        band = 3.0 * chk.mc_stderr + chk.contour_error + 1e-6
        ratio = abs(chk.mc - chk.contour) / band
        worst = max(worst, ratio)
        rows.append({"n": 1, "s": s_val, "mc": chk.mc,
                     "contour": chk.contour, "ratio": ratio})
    chk2 = paths.laplace_transform_check(2, 1.0, 1.0, paths=40_000,
                                         dt=1e-3, rng_seed=5)
    band2 = 3.0 * chk2.mc_stderr + chk2.contour_error + 2.5e-4
    ratio2 = abs(chk2.mc - chk2.contour) / band2
    worst = max(worst, ratio2)
    rows.append({"n": 2, "s": 1.0, "mc": chk2.mc, "contour": chk2.contour,
                 "ratio": ratio2,
                 "grid_bias_allowance": 2.5e-4})
    passed = worst <= 1.0
    return CheckResult("criterion-11", passed, worst, 1.0, {"cases": rows})


def criterion_12_free_energy(p=None):
    """Variational constant of the polymer free energy and the
    monotone finite-size trend toward it."""
    p = p or {}
    reps = int(p.get("reps", 16))
    tab = paths.free_energy_estimate((4, 8, 16, 32), reps=reps, dt=2e-3,
                                     rng_seed=1)
    errs = [abs(r["mean"] - tab.constant) for r in tab.rows]
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    below = all(r["mean"] < tab.constant for r in tab.rows)
    passed = (tab.stationarity_residual < 1e-8 and monotone and below)
    return CheckResult("criterion-12", passed,
                       tab.stationarity_residual, 1e-8,
                       {"constant": tab.constant, "t_star": tab.t_star,
                        "errors_by_n": errs, "monotone": monotone,
                        "approach_from_below": below, "reps": reps})


def criterion_13_exponential_functional_drift(p=None):
    """Binned drift of the exponential-functional diffusion against the
    Macdonald-function gradient, plus the GIG normalization."""
    p = p or {}
    n_paths = int(p.get("paths", 100_000))
    gof = paths.matsumoto_yor_check(0.5, 2.0, paths=n_paths, dt=2e-3,
                                    rng_seed=10)
    d = gof.details
    passed = (gof.passed and d["bins_ok"] >= 30
              and d["bins_used"] >= 31
              and d["gig_normalisation_rel_err"] < 1e-8)
    return CheckResult("criterion-13", passed,
                       float(d["bins_used"] - d["bins_ok"]), 2.0,
                       {"bins_ok": d["bins_ok"],
                        "bins_used": d["bins_used"],
                        "gig_normalization_rel_err":
                            d["gig_normalisation_rel_err"],
                        "p_value": gof.p_value})


def criterion_14_positive_coordinate_stationarity(p=None):
    """Stationary marginals of the positive-coordinate dynamics against
    the exponential-functional law."""
    p = p or {}
    replicas = int(p.get("samples", 2000))
    worst_p = 1.0
    rows = []
    for mu, word, t_max, seed in (((-0.75, 0.75), [1], 8.0, 6),
                                  ((-0.8, 0.0, 0.8), [1, 2, 1], 10.0, 14)):
        traj = paths.lusztig_dynamics(mu, word, t_max, 2e-3, rng_seed=seed,
                                      replicas=replicas,
                                      store_every=10 ** 9)
        finals = traj.final()
        for k in range(len(word)):
            theta = float(traj.thetas[k])
            res = scipy.stats.kstest(
                finals[:, k], lambda v: paths.g_theta_cdf(v, theta))
            worst_p = min(worst_p, float(res.pvalue))
            rows.append({"n": len(mu), "coordinate": k, "theta": theta,
                         "ks_p": float(res.pvalue)})
    passed = worst_p > 0.01
    return CheckResult("criterion-14", passed, worst_p, 0.01,
                       {"rows": rows, "replicas": replicas,
                        "comparison": "p-value must exceed tolerance"})


def criterion_15_q_exact_suite(p=None):
    """Exact rational identity battery for the lattice q-deformation,
    plus the classical-limit adjudication and its simulation oracle."""
    p = p or {}
    zmax = int(p.get("zmax", 20))
    q = p.get("q", Fraction(1, 4))
    t = p.get("t", Fraction(1, 2))
    budget = float(p.get("budget_s", 120.0))
    t0 = time.time()
    params = qdeform.QParams(q=Fraction(q), t=Fraction(t))
    diff_res = qdeform.q_difference_residual(params, zmax)
    pair, second, link = qdeform.kernels(params)
    row_sums_ok = True
    for z in range(zmax + 1):
        row_sums_ok &= sum(second.row(z).values()) == 1
        row_sums_ok &= sum(link.row(z).values()) == 1
        row_sums_ok &= sum(pair.row(z // 2, z).values()) == 1
    inter = qdeform.intertwining_check(params, zmax)
    brute = qdeform.conditional_law_bruteforce(params, 10)
    float_inter = float(qdeform.intertwining_check(
        qdeform.QParams(q=0.9, nu=0.3), 40))
    pit = qdeform.pitman_limit_check(12)

    # simulation oracle for the adjudicated classical kernel
    rng = np.random.default_rng(2)
    walks, horizon = 30_000, 40
    steps = rng.choice([-1, 1], size=(walks, horizon))
    xw = np.concatenate([np.zeros((walks, 1), dtype=np.int64),
                         np.cumsum(steps, axis=1)], axis=1)
    w = 2 * np.maximum.accumulate(xw, axis=1) - xw
    ups = np.diff(w, axis=1).ravel()
    before = w[:, :-1].ravel()
    sim_worst = 0.0
    for z in range(13):
        at = before == z
        n_at = int(at.sum())
        if n_at < 200:
            continue
        expect = float(pit.up_probs[z])
        obs = float(np.mean(ups[at] == 1))
        sigma = math.sqrt(max(expect * (1 - expect), 1e-12) / n_at)
        sim_worst = max(sim_worst, abs(obs - expect) / max(3 * sigma, 1e-9))
    elapsed = time.time() - t0
    exact_zero = (diff_res == 0 and inter == 0
                  and brute.max_conditional_gap == 0
                  and brute.max_markov_gap == 0 and row_sums_ok
                  and pit.intertwining_gap == 0)
    passed = (exact_zero and float_inter < 1e-11 and sim_worst <= 1.0
              and not pit.display_matches and pit.same_sequence_shifted
              and elapsed < budget)
    metric = max(float(diff_res), float(inter),
                 float(brute.max_conditional_gap), float_inter)
    return CheckResult("criterion-15", passed, metric, 1e-11,
                       {"exact_all_zero": exact_zero,
                        "float_intertwining": float_inter,
                        "simulation_worst_3sigma_ratio": sim_worst,
                        "trajectories": brute.trajectory_count,
                        "adjudication": pit.note,
                        "q": str(q), "t": str(t), "zmax": zmax,
                        "elapsed_s": elapsed})


def criterion_16_stationary_output(p=None):
    """Output theorem: stationary-start second coordinate has i.i.d.
    increments by chi-square."""
    p = p or {}
    steps = int(p.get("steps", 1_000_000))
    seed = int(p.get("seed", 0))
    gof = qdeform.burke_check(qdeform.QParams(q=0.5, p=0.3), steps=steps,
                              rng_seed=seed)
    passed = gof.passed and gof.p_value > 1e-3
    return CheckResult("criterion-16", passed, gof.p_value, 1e-3,
                       {"details": gof.details,
                        "comparison": "p-value must exceed tolerance"})


CRITERIA = {
    "criterion-01": criterion_01_rank2_closed_form,
    "criterion-02": criterion_02_rank3_route_agreement,
    "criterion-03": criterion_03_eigen_residual,
    "criterion-04": criterion_04_asymptotics,
    "criterion-05": criterion_05_zero_temperature,
    "criterion-06": criterion_06_exit_probability,
    "criterion-07": criterion_07_dh_pushforward,
    "criterion-08": criterion_08_gauss_factorization,
    "criterion-09": criterion_09_braid_invariance,
    "criterion-10": criterion_10_fixed_time_law,
    "criterion-11": criterion_11_laplace_transform,
    "criterion-12": criterion_12_free_energy,
    "criterion-13": criterion_13_exponential_functional_drift,
    "criterion-14": criterion_14_positive_coordinate_stationarity,
    "criterion-15": criterion_15_q_exact_suite,
    "criterion-16": criterion_16_stationary_output,
}

SUITES = {
    "givental-cross": ["criterion-01", "criterion-02", "criterion-03",
                       "criterion-04", "criterion-05", "criterion-06",
                       "criterion-07"],
    "cells": ["criterion-08", "criterion-09"],
    "laws": ["criterion-10", "criterion-11", "criterion-12",
             "criterion-13", "criterion-14"],
    "q-exact": ["criterion-15", "criterion-16"],
}

_SUITE_CONVENTIONS = {
    "givental-cross": ["dh_constant"],
    "cells": ["startup_error", "double_transform"],
    "laws": ["startup_error"],
    "q-exact": ["q0_spectral_sum", "q0_up_probability",
                "stationary_output_up_probability"],
}


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


_EVAL_ALIASES = {"J": "hciz", "K": "macdonald", "m": "fundamental"}
_PSI_ROUTES = ("quadrature", "energy", "lusztig", "givental-mc", "series",
               "feynman-kac")


def _eval_psi(p):
    lam = _floats(p.get("lam"), "--lambda")
    x = _floats(p.get("x"), "--x")
    route = p.get("route") or "quadrature"
    seed = int(p.get("seed", DEFAULT_SEED))
    if route not in _PSI_ROUTES:
        raise UsageError(f"unknown psi route {route!r}; "
                         f"choose from {', '.join(_PSI_ROUTES)}")
    if p.get("n") is not None and int(p["n"]) != len(lam):
        raise UsageError("--n disagrees with the length of --lambda")
    if route == "quadrature":
        spec = None
        if p.get("tol") is not None:
            spec = QuadSpec(rel_tol=float(p["tol"]))
        ev = whittaker_quadrature(lam, x, spec)
    elif route == "energy":
        ev = whittaker_energy_integral(lam, x)
    elif route == "lusztig":
        ev = whittaker_lusztig_n3(lam, x)
    elif route == "givental-mc":
        ev = whittaker_givental_mc(lam, x,
                                   samples=int(p.get("samples", 200_000)),
                                   rng_seed=seed)
    elif route == "series":
        sv = whittaker_from_series(lam, x)
        return {"value": complex(sv.value).real,
                "value_imag": complex(sv.value).imag,
                "est_error": 1e-10 * abs(float(sv)),
                "route": "series", "degree": sv.degree}
    else:
        ev = paths.feynman_kac_psi(
            lam, x, horizon=float(p.get("t") or 20.0),
            paths=int(p.get("samples", 200_000)),
            dt=float(p.get("dt", 5e-3)), rng_seed=seed)
        out = {"value": ev.value, "est_error": ev.est_error,
               "route": ev.route,
               "tail_bound": ev.meta["prefactor"] * ev.meta["tail_bound"]}
        return out
    value = complex(ev.value)
    out = {"value": value.real, "est_error": float(ev.est_error),
           "route": ev.route}
    if value.imag != 0.0:
        out["value_imag"] = value.imag
    return out


def _run_eval(p):
    fn = p.get("fn")
    if fn is None:
        raise UsageError("eval requires --fn")
    fn = _EVAL_ALIASES.get(fn, fn)
    if fn == "psi":
        payload = _eval_psi(p)
    elif fn == "hciz":
        lam = _floats(p.get("lam"), "--lambda")
        x = _floats(p.get("x"), "--x")
        payload = {"value": float(hciz_J(lam, x)), "est_error": 0.0,
                   "route": "divided-difference determinant"}
    elif fn == "macdonald":
        if p.get("nu") is None or p.get("z") is None:
            raise UsageError("macdonald requires --nu and --z")
        tol = float(p.get("tol", 1e-12))
        val = macdonald_K(float(p["nu"]), float(p["z"]), rel_tol=tol)
        payload = {"value": val, "est_error": tol * abs(val),
                   "route": "real-axis quadrature"}
    elif fn == "theta":
        if p.get("t") is None:
            raise UsageError("theta requires --t")
        x = _floats(p.get("x"), "--x")
        tol = float(p.get("tol", 1e-6))
        val = theta_density(float(p["t"]), x, rel_tol=tol)
        payload = {"value": float(val), "est_error": tol * abs(val),
                   "route": "spectral quadrature"}
    elif fn == "fundamental":
        if p.get("nu") is None:
            raise UsageError("fundamental requires --nu (list)")
        nu = _floats(p.get("nu"), "--nu")
        x = _floats(p.get("x"), "--x")
        sv = fundamental_whittaker(nu, x, rel_tol=float(p.get("tol", 1e-12)))
        v = complex(sv.value)
        payload = {"value": v.real, "value_imag": v.imag,
                   "est_error": float(p.get("tol", 1e-12)) * abs(v),
                   "route": "series", "degree": sv.degree}
    else:
        raise UsageError(f"unknown eval function {fn!r}")
    doc = {"schema": SCHEMA, "command": "eval", "fn": fn}
    doc.update(payload)
    _emit(_dump_json(doc), p.get("out"))
    return 0


def _run_simulate(p):
    process = p.get("process")
    seed = int(p.get("seed", DEFAULT_SEED))
    fmt = p.get("format") or "csv"
    if fmt != "csv":
        raise UsageError("simulate writes CSV; use --format csv")
    if process == "array":
        mu = _floats(p.get("mu", "0,0"), "--mu")
        traj = paths.simulate_array(mu, float(p.get("t", 1.0)),
                                    float(p.get("dt", 1e-3)),
                                    rng_seed=seed)
        n = traj.n
        header = ["t"] + [f"T_{k}_{j}" for k in range(1, n + 1)
                          for j in range(1, k + 1)]
        rows = ([traj.times[i]] + list(traj.flat[i])
                for i in range(traj.times.size))
    elif process == "particles":
        mu = _floats(p.get("mu", "0,0"), "--mu")
        traj = paths.particle_system_xi(mu, float(p.get("t", 1.0)),
                                        float(p.get("dt", 1e-3)),
                                        rng_seed=seed, replicas=1)
        vals = np.asarray(traj.values)
        header = ["t"] + [f"xi_{k}" for k in range(1, traj.n + 1)]
        rows = ([traj.times[i]] + list(vals[i, 0, :])
                for i in range(traj.times.size))
    elif process == "positive":
        mu = _floats(p.get("mu", "0,0"), "--mu")
        word = list(_ints(p.get("word", "1"), "--word"))
        traj = paths.lusztig_dynamics(mu, word, float(p.get("t", 1.0)),
                                      float(p.get("dt", 1e-3)),
                                      rng_seed=seed, replicas=1)
        ys = np.asarray(traj.ys)
        header = ["t"] + [f"y_{k}" for k in range(1, len(word) + 1)]
        rows = ([traj.times[i]] + list(ys[i, 0, :])
                for i in range(traj.times.size))
    elif process == "qchain":
        if p.get("q") is None:
            raise UsageError("qchain requires --q")
        q_val = float(Fraction(str(p["q"])))
        if p.get("p") is not None:
            params = qdeform.QParams(q=q_val, p=float(p["p"]))
        elif p.get("t") is not None:
            params = qdeform.QParams(q=q_val, t=float(Fraction(str(p["t"]))))
        else:
            raise UsageError("qchain requires --p or --t")
        y, z = qdeform.simulate_chain(params, int(p.get("steps", 1000)),
                                      rng_seed=seed)
        header = ["step", "y", "z"]
        rows = ([k, int(y[k]), int(z[k])] for k in range(y.size))
    else:
        raise UsageError("simulate requires --process "
                         "{array,particles,positive,qchain}")
    _emit(_csv_text(header, rows), p.get("out"))
    return 0


def _collect_overrides(p):
    out = {}
    for key in ("samples", "paths", "steps", "zmax", "reps"):
        if p.get(key) is not None:
            out[key] = int(p[key])
    for key in ("dt", "budget_s"):
        if p.get(key) is not None:
            out[key] = float(p[key])
    for key in ("q", "t"):
        if p.get(key) is not None:
            out[key] = _rational(p[key], f"--{key}")
    if p.get("seed") is not None:
        out["seed"] = int(p["seed"])
    return out


def _run_checks(names, overrides):
    checks = []
    for name in names:
        try:
            checks.append(CRITERIA[name](overrides))
        except Exception as exc:      # a crashed check is a failed check
            checks.append(CheckResult(name, False, math.inf, 0.0,
                                      {"error": repr(exc)}))
    return checks


def _run_verify(p):
    suite = p.get("suite")
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from "
                         f"{', '.join(sorted(SUITES))}")
    overrides = _collect_overrides(p)
    t0 = time.time()
    checks = _run_checks(SUITES[suite], overrides)
    report = {
        "schema": SCHEMA,
        "command": "verify",
        "suite": suite,
        "checks": [c.as_dict() for c in checks],
        "conventions": {k: CONVENTIONS[k]
                        for k in _SUITE_CONVENTIONS[suite]},
        "elapsed_s": time.time() - t0,
    }
    _emit(_dump_json(report), p.get("out"))
    return 0 if all(c.passed for c in checks) else 1


def _run_table(p):
    suites = ([p["suite"]] if p.get("suite") else
              ["givental-cross", "cells", "laws", "q-exact"])
    for s in suites:
        if s not in SUITES:
            raise UsageError(f"unknown suite {s!r}")
    overrides = _collect_overrides(p)
    t0 = time.time()
    all_checks = []
    lines = []
    for s in suites:
        for c in _run_checks(SUITES[s], overrides):
            all_checks.append((s, c))
            lines.append(f"{c.name}  {c.status:4s}  metric={c.metric:.6g}"
                         f"  tolerance={c.tolerance:.6g}  suite={s}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if p.get("out"):
        report = {
            "schema": SCHEMA,
            "command": "table",
            "suites": suites,
            "checks": [c.as_dict() | {"suite": s} for s, c in all_checks],
            "conventions": CONVENTIONS,
            "elapsed_s": time.time() - t0,
        }
        _emit(_dump_json(report), p.get("out"))
    return 0 if all(c.passed for _, c in all_checks) else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None, help="output file (default "
                    "stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default=None)


def build_parser():
    parser = _Parser(prog="whittaker-lab",
                     description="Batch evaluation, simulation, and "
                                 "verification front door.")
    sub = parser.add_subparsers(dest="command")

    ev = sub.add_parser("eval", help="evaluate a special function")
    _add_common(ev)
    ev.add_argument("--fn", help="psi | hciz (J) | macdonald (K) | theta "
                    "| fundamental (m)")
    ev.add_argument("--route", default=None)
    ev.add_argument("--n", type=int, default=None)
    ev.add_argument("--lambda", dest="lam", default=None)
    ev.add_argument("--x", default=None)
    ev.add_argument("--nu", default=None)
    ev.add_argument("--z", type=float, default=None)
    ev.add_argument("--t", type=float, default=None)
    ev.add_argument("--dt", type=float, default=None)
    ev.add_argument("--samples", type=int, default=None)
    ev.add_argument("--tol", type=float, default=None)

    sim = sub.add_parser("simulate", help="run a process, write CSV")
    _add_common(sim)
    sim.add_argument("--process",
                     choices=("array", "particles", "positive", "qchain"))
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--mu", default=None)
    sim.add_argument("--t", default=None)
    sim.add_argument("--dt", type=float, default=None)
    sim.add_argument("--word", default=None)
    sim.add_argument("--steps", type=int, default=None)
    sim.add_argument("--q", default=None)
    sim.add_argument("--p", type=float, default=None)

    ver = sub.add_parser("verify", help="run a verification suite")
    _add_common(ver)
    ver.add_argument("--suite", default=None)
    ver.add_argument("--q", default=None)
    ver.add_argument("--t", default=None)
    ver.add_argument("--zmax", type=int, default=None)
    ver.add_argument("--samples", type=int, default=None)
    ver.add_argument("--paths", type=int, default=None)
    ver.add_argument("--steps", type=int, default=None)
    ver.add_argument("--reps", type=int, default=None)
    ver.add_argument("--dt", type=float, default=None)
    ver.add_argument("--budget-s", dest="budget_s", type=float,
                     default=None)

    tab = sub.add_parser("table", help="run the full acceptance battery")
    _add_common(tab)
    tab.add_argument("--suite", default=None,
                     help="restrict to one suite (default: all)")
    tab.add_argument("--samples", type=int, default=None)
    tab.add_argument("--paths", type=int, default=None)
    tab.add_argument("--steps", type=int, default=None)
    tab.add_argument("--reps", type=int, default=None)
    tab.add_argument("--dt", type=float, default=None)

    return parser


def parse_config(argv):
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required: eval, simulate, verify, "
                         "or table")
    params = {k: v for k, v in vars(ns).items()
              if k not in ("command", "config") and v is not None}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_params = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}")
        if not isinstance(file_params, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in file_params.items():
            dest = "lam" if key == "lambda" else key.replace("-", "_")
            params.setdefault(dest, value)
    return RunConfig(ns.command, params)


def run(config):
    """Execute a merged RunConfig; returns the process exit status."""
    if config.command == "eval":
        return _run_eval(config.params)
    if config.command == "simulate":
        return _run_simulate(config.params)
    if config.command == "verify":
        return _run_verify(config.params)
    return _run_table(config.params)


def main(argv=None):
    try:
        config = parse_config(sys.argv[1:] if argv is None else list(argv))
        return run(config)
    except UsageError as exc:
        sys.stderr.write(_dump_json({"schema": SCHEMA, "error": "usage",
                                     "message": str(exc)}))
        return 2
    except (ValueError, ArithmeticError) as exc:
        sys.stderr.write(_dump_json(
            {"schema": SCHEMA, "error": type(exc).__name__,
             "message": str(exc)}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
