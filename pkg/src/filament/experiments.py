"""Desk-scale verification studies.

Three families: the multiplier/coercivity bound suites (fitted-constant
protocol: constants are fitted on the coarsest eps and must bound the
finer runs with 10% slack), the eps-sweep convergence of the nonlocal
dynamics to RFT under rescaled time, and the discrepancy energy and
dissipation traces of the difference W = X - Y.
"""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import SweepConfig, config_as_dict
from .evolution import EvolutionState, _step, choose_dt, energy, initial_curve
from .multipliers import build_table, eval_mn, eval_mt, lowk_rft_difference, rft_constants
from .spectral import (
    PeriodicCurve,
    SobolevIndex,
    apply_L_eps,
    apply_multiplier,
    dealias,
    mean_inner,
    project_tangent,
    reparameterize_arclength,
    sobolev_norm,
)

H2 = SobolevIndex(2.0)
H72_HOM = SobolevIndex(3.5, homogeneous=True)
H_MINUS_HALF = SobolevIndex(-0.5)

SLACK = 1.1  # fitted-constant protocol: 10% slack on non-fitted rows


@dataclass
class DiscrepancyRecord:
    eps: float
    n: int
    dt: float = None          # rescaled-time step shared by both runs
    steps: int = 0
    times: np.ndarray = None  # rescaled snapshot times
    h2: np.ndarray = None     # ||W||_H2 trace
    ew: np.ndarray = None     # E_W = ||W_ss||_L2^2 trace
    dw: np.ndarray = None     # D_W trace
    mean_sq: np.ndarray = None  # |mean-mode W_0|^2 trace
    sup_h2: float = None
    l2t_h72: float = None
    max_ew: float = None
    int_dw: float = None
    flags: int = 0
    failed: str = None

    @property
    def log_eps(self):
        return abs(math.log(self.eps))

    @property
    def compensated(self):
        return math.sqrt(self.log_eps) * self.sup_h2


def discrepancy_energy_trace(times, curves_x, curves_y, table):
    """Traces of the difference W = X - Y on matched snapshots.

    E_W = ||W_ss||_L2^2; D_W applies the half-power multipliers to the
    fourth derivative of W split into tangential/normal parts along X.
    """
    times = np.asarray(times, dtype=float)
    h2 = np.empty(times.shape)
    h72 = np.empty(times.shape)
    ew = np.empty(times.shape)
    dw = np.empty(times.shape)
    mean_sq = np.empty(times.shape)
    for i, (cx, cy) in enumerate(zip(curves_x, curves_y)):
        w = cx.samples - cy.samples
        h2[i] = sobolev_norm(w, H2)
        h72[i] = sobolev_norm(w, H72_HOM)
        wss = cx.xss - cy.xss
        ew[i] = mean_inner(wss, wss)
        wssss = cx.xssss - cy.xssss
        pt = project_tangent(cx, wssss)
        pn = wssss - pt
        gt = apply_multiplier(pt, table.mt, 0.5)
        gn = apply_multiplier(pn, table.mn, 0.5)
        dw[i] = mean_inner(gt, gt) + mean_inner(gn, gn)
        mean_sq[i] = float(np.sum(np.mean(w, axis=0) ** 2))
    record = DiscrepancyRecord(eps=table.epsilon, n=curves_x[0].n)
    record.times = times
    record.h2 = h2
    record.ew = ew
    record.dw = dw
    record.mean_sq = mean_sq
    record.sup_h2 = float(np.max(h2))
    record.l2t_h72 = float(np.sqrt(np.trapezoid(h72 ** 2, times)))
    record.max_ew = float(np.max(ew))
    record.int_dw = float(np.trapezoid(dw, times))
    return record


POLICY_EVERY = 25     # steps between re-evaluations of the dt policy
SNAPSHOT_TARGET = 50  # aimed-for number of comparison snapshots


def run_pair(eps, n, horizon, initial_name, *, dt=None, snapshot_every=None,
             cg_tol=1e-10, inext_tol=1e-6, table=None, constants=None):
    """Run both models in rescaled time, lockstep, and compare.

    Both runs share the grid, the initial curve, and the dt schedule
    bit-for-bit; discrepancy norms are evaluated on shared snapshots
    only.  The step size follows the dt policy (dt ||G||_H2 <= 1e-2
    ||X||_H2) re-evaluated every POLICY_EVERY steps on both states and
    taken as the minimum; a fixed dt argument disables the adaptation.
    Growth is limited to a factor 2 per re-evaluation and capped at
    horizon/SNAPSHOT_TARGET, which is safe because the semi-implicit
    update is exactly stationary on the relaxed circle.
    """
    curve = initial_curve(initial_name, n)
    if table is None:
        table = build_table(eps, n // 2)
    if constants is None:
        constants = rft_constants(eps)
    log_eps = abs(math.log(eps))

    def policy(cx, cy):
        return min(
            choose_dt(cx, table, cg_tol=cg_tol, rescaled=True),
            choose_dt(cy, constants, cg_tol=cg_tol, rescaled=True),
        )

    adaptive = dt is None
    cap = horizon / SNAPSHOT_TARGET
    if adaptive:
        dt = min(policy(curve, curve), cap)
    time_scale = 1.0 / log_eps
    e0 = energy(curve)
    state_x = EvolutionState(curve, 0.0)
    state_y = EvolutionState(curve, 0.0)
    times = [0.0]
    curves_x = [curve]
    curves_y = [curve]
    kwargs = dict(cg_tol=cg_tol, inext_tol=inext_tol,
                  energy_tol_abs=1e-8 * e0, time_scale=time_scale)
    # Snapshots are taken every `stride` steps, which concentrates them
    # in the initial transient where the policy keeps dt small and the
    # discrepancy actually accumulates, plus at fixed time marks so the
    # quiescent tail is covered too.
    stride = 20 if snapshot_every is None else snapshot_every
    snap_interval = horizon / SNAPSHOT_TARGET
    next_snap = snap_interval
    t = 0.0
    step_count = 0
    flags = 0
    while t < horizon * (1.0 - 1e-12):
        dt_step = min(dt, horizon - t)
        state_x = _step(state_x, dt_step, table, **kwargs)
        state_y = _step(state_y, dt_step, constants, **kwargs)
        t += dt_step
        step_count += 1
        if state_x.diagnostics.energy_flag or state_y.diagnostics.energy_flag:
            flags += 1
            dt *= 0.5
        if step_count % 20 == 0:
            state_x = EvolutionState(
                reparameterize_arclength(state_x.curve), state_x.time,
                state_x.tension, state_x.diagnostics)
            state_y = EvolutionState(
                reparameterize_arclength(state_y.curve), state_y.time,
                state_y.tension, state_y.diagnostics)
        if adaptive and step_count % POLICY_EVERY == 0:
            dt = min(policy(state_x.curve, state_y.curve), 2.0 * dt, cap)
        take = (
            t >= horizon * (1.0 - 1e-12)
            or step_count % stride == 0
            or t >= next_snap * (1.0 - 1e-12)
        )
        if take:
            times.append(t)
            curves_x.append(state_x.curve)
            curves_y.append(state_y.curve)
            while next_snap <= t * (1.0 + 1e-12):
                next_snap += snap_interval
    record = discrepancy_energy_trace(times, curves_x, curves_y, table)
    record.dt = dt
    record.steps = step_count
    record.flags = flags
    return record


def _study_worker(args):
    eps, sweep_dict, n_override = args
    sweep = SweepConfig(**sweep_dict)
    n = n_override if n_override else sweep.n
    try:
        return run_pair(
            eps, n, sweep.horizon, sweep.initial_curve,
            snapshot_every=sweep.snapshot_every,
            cg_tol=sweep.cg_tol, inext_tol=sweep.inextensibility_tol,
        )
    except Exception as exc:
        return DiscrepancyRecord(eps=eps, n=n, failed=f"{type(exc).__name__}: {exc}")


def convergence_study(sweep, jobs=1):
    """DiscrepancyRecords for every eps in the sweep (plus confirmation).

    A failed eps row is reported with its error message; the study
    continues with the remaining rows.
    """
    tasks = [(eps, config_as_dict(sweep), None) for eps in sweep.epsilons]
    if sweep.confirmation:
        tasks.append((1e-4, config_as_dict(sweep), 1024))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_study_worker, tasks))
    else:
        records = [_study_worker(t) for t in tasks]
    return records


def compensated_band(records):
    """Factor-2 acceptance corridor for sqrt(|log eps|) * sup ||X-Y||_H2.

    The two coarsest-eps rows fix a power-law trend in |log eps|; every
    finer row must lie within a factor sqrt(2) on either side of the
    trend (total band width: a factor of 2).  Returns a dict with the
    fitted trend, the per-row ratios to it, and the pass flag.
    """
    ok = sorted((r for r in records if r.failed is None), key=lambda r: -r.eps)
    if len(ok) < 3:
        raise ValueError("compensated_band needs at least three successful rows")
    (l1, m1), (l2, m2) = (ok[0].log_eps, ok[0].compensated), (ok[1].log_eps, ok[1].compensated)
    alpha = math.log(m2 / m1) / math.log(l2 / l1)

    def predict(log_eps):
        return m1 * (log_eps / l1) ** alpha

    ratios = {r.eps: r.compensated / predict(r.log_eps) for r in ok[2:]}
    half = math.sqrt(2.0)
    return {
        "alpha": alpha,
        "reference": m1,
        "log_eps_reference": l1,
        "ratios_to_trend": ratios,
        "pass": all(1.0 / half <= v <= half for v in ratios.values()),
    }


def gronwall_constants(records):
    """Fitted constants for max_t E_W * |log eps| and int D_W * |log eps|.

    Fit on the coarsest eps; every other row must stay below with 10%
    slack.
    """
    ok = sorted((r for r in records if r.failed is None), key=lambda r: -r.eps)
    c_ew = ok[0].max_ew * ok[0].log_eps
    c_dw = ok[0].int_dw * ok[0].log_eps
    pass_ew = all(r.max_ew * r.log_eps <= SLACK * c_ew for r in ok[1:])
    pass_dw = all(r.int_dw * r.log_eps <= SLACK * c_dw for r in ok[1:])
    return {"C_EW": c_ew, "C_DW": c_dw, "pass_EW": pass_ew, "pass_DW": pass_dw}


SUMMARY_COLUMNS = ("eps", "log_eps", "sup_h2_err", "compensated_err",
                   "l2t_h72_err", "max_EW", "int_DW")


def summary_rows(records):
    rows = []
    for r in records:
        if r.failed is not None:
            continue
        rows.append({
            "eps": r.eps,
            "log_eps": r.log_eps,
            "sup_h2_err": r.sup_h2,
            "compensated_err": r.compensated,
            "l2t_h72_err": r.l2t_h72,
            "max_EW": r.max_ew,
            "int_DW": r.int_dw,
        })
    return rows


def write_summary_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in summary_rows(records):
            writer.writerow([format(row[c], ".17g") for c in SUMMARY_COLUMNS])


# ---------------------------------------------------------------------------
# Multiplier bound suites (fitted-constant protocol)
# ---------------------------------------------------------------------------

def _bound_suite_one_eps(eps, kmax):
    """Raw extremal ratios for the bound families at one eps."""
    k = np.arange(1, kmax + 1)
    log_eps = abs(math.log(eps))
    crossover = 1.0 / (2.0 * math.pi * eps)
    low = k < crossover
    high = ~low
    # Low-wavenumber normalization 1 + |log(eps k)|: a function of
    # eps|k| alone, so its extremal ratio is flat across the sweep,
    # unlike |log eps| which degenerates near the crossover where the
    # multiplier is O(1).
    lowk_scale = 1.0 + np.abs(np.log(eps * k[low])) if low.any() else None
    out = {}
    for name, m in (("mt", eval_mt(eps, k)), ("mn", eval_mn(eps, k))):
        # zero mode included: it attains the sharp low-k constant
        m0 = eval_mt(eps, 0) if name == "mt" else eval_mn(eps, 0)
        ratios = np.concatenate(([m0], m[low])) / log_eps
        out[f"{name}_low_over_log"] = float(np.max(ratios))
        out[f"{name}_inv_low_norm"] = (
            float(np.max(lowk_scale / m[low])) if low.any() else 0.0
        )
        out[f"{name}_high_times_epsk"] = float(np.max(m[high] * eps * k[high])) if high.any() else 0.0
        out[f"{name}_inv_high_over_epsk"] = float(np.max(1.0 / (m[high] * eps * k[high]))) if high.any() else 0.0
        # Linear-growth sandwich c eps|k| <= 1/m <= c (eps|k| + 1):
        # feasible interval for the single constant c.
        inv = 1.0 / m
        out[f"{name}_sandwich_lo"] = float(np.max(inv / (eps * k + 1.0)))
        out[f"{name}_sandwich_hi"] = float(np.min(inv / (eps * k)))
    # Low-wavenumber RFT differences, both directions under one constant.
    klow = k[low]
    ratios = []
    for direction in ("tangential", "normal"):
        diff = lowk_rft_difference(eps, klow, direction)
        ratios.append(np.abs(diff) / (1.0 + np.abs(np.log(klow))))
    out["lowk_diff_ratio"] = float(max(np.max(r) for r in ratios))
    return out


def coercivity_ratios(eps, grid_n=256, n_fields=50, seed=0, table=None):
    """<f, L_eps f> / (|log eps| ||f||_{H^{-1/2}}^2) on random fields.

    Fields are band-limited Gaussian samples on the unit circle,
    normalized in H^{-1/2}; the operator frame is the circle tangent.
    """
    curve = PeriodicCurve.circle(grid_n)
    if table is None:
        table = build_table(eps, grid_n // 2)
    log_eps = abs(math.log(eps))
    rng = np.random.default_rng(seed)
    ratios = np.empty(n_fields)
    for i in range(n_fields):
        f = dealias(rng.standard_normal((grid_n, 3)))
        f /= sobolev_norm(f, H_MINUS_HALF)
        ratios[i] = mean_inner(f, apply_L_eps(curve, table, f)) / log_eps
    return ratios


def lemma_suite(epsilons=(1e-2, 1e-3, 1e-4, 1e-5), kmax=4096, *,
                grid_n=256, n_fields=50, seed=0):
    """All multiplier bound suites plus the coercivity random-field test.

    Constants are fitted on the coarsest eps (first entry) and the same
    values must bound the finer rows with 10% slack.  Returns a report
    dict with fitted constants and pass flags.
    """
    epsilons = tuple(epsilons)
    if any(a <= b for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    per_eps = {eps: _bound_suite_one_eps(eps, kmax) for eps in epsilons}
    coarse = per_eps[epsilons[0]]
    report = {"epsilons": list(epsilons), "kmax": kmax, "suites": {}}

    def gate(name, fitted, fine_values, check):
        ok = all(check(fitted, v) for v in fine_values)
        report["suites"][name] = {"constant": fitted, "pass": bool(ok)}
        return ok

    upper = lambda c, v: v <= SLACK * c
    all_pass = True
    for key in ("mt_low_over_log", "mn_low_over_log",
                "mt_inv_low_norm", "mn_inv_low_norm",
                "mt_high_times_epsk", "mn_high_times_epsk",
                "mt_inv_high_over_epsk", "mn_inv_high_over_epsk",
                "lowk_diff_ratio"):
        fitted = coarse[key]
        fine = [per_eps[e][key] for e in epsilons[1:]]
        # High-k families may be empty (crossover beyond kmax) at fine eps.
        fine = [v for v in fine if v > 0.0]
        all_pass &= gate(key, fitted, fine, upper)

    for name in ("mt", "mn"):
        lo, hi = coarse[f"{name}_sandwich_lo"], coarse[f"{name}_sandwich_hi"]
        feasible = lo <= hi
        c = math.sqrt(lo * hi) if feasible else float("nan")
        ok = feasible
        for e in epsilons[1:]:
            row = per_eps[e]
            ok &= row[f"{name}_sandwich_lo"] <= SLACK * c
            ok &= row[f"{name}_sandwich_hi"] >= c / SLACK
        report["suites"][f"{name}_sandwich"] = {"constant": c, "pass": bool(ok)}
        all_pass &= ok

    coercivity = {eps: coercivity_ratios(eps, grid_n, n_fields, seed)
                  for eps in epsilons}
    c_fit = float(np.min(coercivity[epsilons[0]]))
    ok = c_fit > 0.0 and all(
        float(np.min(coercivity[e])) >= c_fit / SLACK for e in epsilons[1:]
    )
    report["suites"]["coercivity"] = {"constant": c_fit, "pass": bool(ok)}
    all_pass &= ok

    report["per_eps"] = {format(e, ".3g"): per_eps[e] for e in epsilons}
    report["passed"] = bool(all_pass)
    return report


def write_report_json(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
