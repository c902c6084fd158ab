"""Hybrid interior-point / column-generation driver.

Each outer iteration performs one Newton step (predictor plus up to
three centrality correctors) on the problem restricted to the current
support, then a pricing phase that lets up to m variables enter (with
the sqrt(mu) warm start) and, near convergence, up to m small primal
variables leave. The Newton system is reduced to the normal equations
and then to a Schur complement, solved iteratively (PCG + incomplete
Cholesky) early on and by an exact LDL^T factorization late, with the
switch driven by how fast the support is shrinking.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import kron_ops, linsolve, schur, support as support_mod
from .instance import GridMetric, OTInstance

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_ipm_iters: int = 200
    max_cg_iters: int = 1000
    max_correctors: int = 3
    cg_tol_predictor: float = 1e-6
    cg_tol_corrector: float = 1e-3
    support_multiplier: float = 5.0
    refresh_period: int = 3
    switch_threshold: float = 0.05
    seed: int = 0
    c_max: Optional[float] = None
    # centering and stepsize
    sigma0: float = 0.3
    sigma_floor: float = 0.1
    neighborhood_gamma: float = 0.1
    step_scale: float = 0.995
    corrector_step_boost: float = 0.1
    # support removal: active once mu falls below removal_mu times the
    # initial mu; a variable leaves when
    # p_j < removal_scale * sqrt(mu) * mean(p_red)
    removal_mu: float = 5e-3
    removal_scale: float = 10.0
    # pricing admits a candidate only when its reduced cost is below
    # -pricing_slack * sqrt(mu): near-tied columns would otherwise enter
    # with the sqrt(mu) warm start and perturb feasibility for no gain
    pricing_slack: float = 1.0
    # linear solver controls
    ic_drop_tol0: float = 1e-2
    ic_drop_tol_floor: float = 1e-6
    cg_iter_budget: int = 200
    direct_lift_rel: float = 1e-12
    ic_lift_rel: float = 1e-12
    pivot_floor_rel: float = 1e-12
    allow_switch_back: bool = False
    serial: bool = False  # solver is already deterministic; kept for the CLI contract
    inspector: Optional[Callable] = None


@dataclass
class Iterate:
    p_red: np.ndarray
    y: np.ndarray
    s_red: np.ndarray
    sigma: float

    @property
    def mu(self):
        return float(self.p_red @ self.s_red) / self.p_red.size

    @property
    def theta_red(self):
        return self.p_red / self.s_red


@dataclass
class SolveReport:
    status: str = "Optimal"            # Optimal | IterationLimit | NumericalFailure
    objective: float = np.nan
    wasserstein_q: int = 1
    wasserstein: float = np.nan
    ipm_iters: int = 0
    cg_iters_total: int = 0
    iterative_phase_iters: int = 0
    direct_phase_iters: int = 0
    switch_count: int = 0
    max_fill_percent: float = 0.0
    final_support_size: int = 0
    peak_support_size: int = 0
    rwe_vs_reference: Optional[float] = None
    phase_log: list = field(default_factory=list)


def initial_iterate(inst: OTInstance, sup, c_red, sigma0=0.3) -> Iterate:
    psi = sup.psi
    p0 = max(inst.a.sum() / psi, 1e-8)
    p_red = np.full(psi, p0)
    s_red = c_red + 1.0
    s_red = s_red / s_red.min()
    y = np.zeros(inst.m + inst.n)
    return Iterate(p_red=p_red, y=y, s_red=s_red, sigma=sigma0)


def newton_direction(sys, solve_reduced, r1, r2_red, r3_red, it: Iterate,
                     index, m, n):
    """Solve the reduced Newton system through the Schur complement.

    solve_reduced maps the reduced right-hand side to the active
    complement's solution. Returns (dp_red, dy, ds_red).
    """
    w = it.theta_red * (r2_red - r3_red / it.p_red)
    rhs_full = kron_ops.apply_A_restricted(w, index, m, n)
    rhs_full += r1
    red = schur.reduce_rhs(sys, rhs_full[:m], rhs_full[m:])
    alpha = solve_reduced(red)
    dy1, dy2 = schur.expand_solution(sys, alpha, rhs_full[:m], rhs_full[m:])
    dy = np.concatenate((dy1, dy2))
    ds = r2_red - kron_ops.apply_AT_restricted(dy[:m], dy[m:], index, m)
    dp = (r3_red - it.p_red * ds) / it.s_red
    return dp, dy, ds


def _step_to_boundary(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _step_lengths(it, dp, ds, scale):
    ap = min(1.0, scale * _step_to_boundary(it.p_red, dp))
    ad = min(1.0, scale * _step_to_boundary(it.s_red, ds))
    return ap, ad


def solve(inst: OTInstance, cfg: SolverConfig = None):
    """Run the hybrid solver; returns (plan, y, SolveReport)."""
    if cfg is None:
        cfg = SolverConfig()
    m, n = inst.m, inst.n
    f = inst.f
    norm_f = float(np.linalg.norm(f))
    view = inst.cost_view(c_max=cfg.c_max)

    sup = support_mod.initial_support(
        inst, target_multiplier=cfg.support_multiplier,
        refresh_period=cfg.refresh_period, c_max=cfg.c_max,
    )
    c_red = np.asarray(view.c(sup.index), dtype=float)
    it = initial_iterate(inst, sup, c_red, cfg.sigma0)
    phase = linsolve.SolverPhase(
        ic_drop_tol=cfg.ic_drop_tol0,
        switch_threshold=cfg.switch_threshold,
        allow_switch_back=cfg.allow_switch_back,
    )
    phase.observe(sup.psi)

    report = SolveReport()
    report.peak_support_size = sup.psi
    if isinstance(inst.cost, GridMetric) and inst.cost.metric == "L2":
        report.wasserstein_q = 2

    mu_prev = it.mu
    mu0 = it.mu
    stall_count = 0
    status = "IterationLimit"

    for outer in range(1, cfg.max_ipm_iters + 1):
        index = sup.index
        psi = sup.psi
        r1 = f - kron_ops.apply_A_restricted(it.p_red, index, m, n)
        r2 = c_red - kron_ops.apply_AT_restricted(it.y[:m], it.y[m:], index, m) \
            - it.s_red
        mu = it.mu
        if not np.isfinite(mu) or not np.all(np.isfinite(it.p_red)):
            status = "NumericalFailure"
            break

        crit = max(
            np.linalg.norm(r1) / (1.0 + norm_f),
            np.linalg.norm(r2) / (1.0 + np.linalg.norm(c_red)),
            mu,
        )
        if crit < cfg.tol:
            status = "Optimal"
            break

        report.ipm_iters = outer
        if phase.mode == "Direct":
            report.direct_phase_iters += 1
        else:
            report.iterative_phase_iters += 1

        # --- assemble the Schur system for the current scaling
        theta = it.theta_red
        sys = schur.assemble(index, theta, m, n)
        if cfg.inspector is not None:
            cfg.inspector({
                "iteration": outer, "schur": sys, "iterate": it,
                "support": sup, "mu": mu, "phase": phase.mode,
            })

        max_diag = float(max(sys.M.max(), sys.N.max()))
        tele = {"iter": outer, "phase": phase.mode, "support": psi, "mu": mu,
                "cg_iters": 0, "relres": 0.0, "nnz_L": 0, "fill_pct": 0.0}
        cg_spent = 0
        try:
            if phase.mode == "Direct":
                S = schur.assemble_sparse_schur(sys, lift=cfg.direct_lift_rel * max_diag)
                fact = linsolve.exact_ldlt(
                    S, "amd", pivot_floor_rel=cfg.pivot_floor_rel)
                tele["nnz_L"] = int(fact.nnz_L)
                tele["fill_pct"] = float(fact.fill_percent)
                report.max_fill_percent = max(report.max_fill_percent,
                                              tele["fill_pct"])

                def solve_reduced(rhs, tol=None):
                    return fact.solve(rhs)
            else:
                S = schur.assemble_sparse_schur(sys)
                try:
                    fact = linsolve.incomplete_cholesky(
                        S, drop_tol=phase.ic_drop_tol,
                        lift=cfg.ic_lift_rel * max_diag)
                    precond = fact.precond
                    tele["nnz_L"] = int(fact.nnz_L)
                    tele["fill_pct"] = float(fact.fill_percent)
                except linsolve.ICBreakdown:
                    log.warning("IC breakdown; using Jacobi preconditioner")
                    diag = np.maximum(S.diagonal(), 1e-30)
                    precond = lambda r: r / diag
                report.max_fill_percent = max(report.max_fill_percent,
                                              tele["fill_pct"])

                def solve_reduced(rhs, tol=cfg.cg_tol_predictor):
                    nonlocal cg_spent
                    x, iters, relres = linsolve.pcg(
                        lambda v: schur.schur_matvec(sys, v), rhs,
                        precond=precond, tol=tol, maxit=cfg.max_cg_iters)
                    cg_spent += iters
                    tele["relres"] = relres
                    return x

            # --- predictor
            sigma = it.sigma
            r3 = sigma * mu - it.p_red * it.s_red
            dp, dy, ds = newton_direction(
                sys, lambda rhs: solve_reduced(rhs, cfg.cg_tol_predictor),
                r1, r2, r3, it, index, m, n)
            ap, ad = _step_lengths(it, dp, ds, cfg.step_scale)

            # --- centrality correctors
            gamma = cfg.neighborhood_gamma
            for _ in range(cfg.max_correctors):
                ap_t = min(1.0, ap + cfg.corrector_step_boost)
                ad_t = min(1.0, ad + cfg.corrector_step_boost)
                v = (it.p_red + ap_t * dp) * (it.s_red + ad_t * ds)
                target = np.clip(v, gamma * mu, mu / gamma)
                r3c = target - v
                if not np.any(r3c):
                    break
                dpc, dyc, dsc = newton_direction(
                    sys, lambda rhs: solve_reduced(rhs, cfg.cg_tol_corrector),
                    np.zeros(m + n), np.zeros(psi), r3c, it, index, m, n)
                ap2, ad2 = _step_lengths(it, dp + dpc, ds + dsc, cfg.step_scale)
                if ap2 * ad2 > ap * ad:
                    dp, dy, ds = dp + dpc, dy + dyc, ds + dsc
                    ap, ad = ap2, ad2
                else:
                    break
        except (linsolve.NumericError, schur.SchurError) as exc:
            log.error("linear solver failure: %s", exc)
            status = "NumericalFailure"
            break

        tele["cg_iters"] = cg_spent
        report.cg_iters_total += cg_spent
        report.phase_log.append(tele)
        if phase.mode == "Iterative" and cg_spent > cfg.cg_iter_budget:
            phase.lower_drop_tol(floor=cfg.ic_drop_tol_floor)

        # --- take the step
        if ap < 1e-10 and ad < 1e-10:
            stall_count += 1
            if stall_count >= 3:
                status = "NumericalFailure"
                break
        else:
            stall_count = 0
        it.p_red = it.p_red + ap * dp
        it.y = it.y + ad * dy
        it.s_red = it.s_red + ad * ds
        if np.any(it.p_red <= 0) or np.any(it.s_red <= 0):
            status = "NumericalFailure"
            break

        mu_new = it.mu
        if mu_new > 1e-2:
            it.sigma = cfg.sigma0
        else:
            ratio = mu_new / max(mu_prev, 1e-300)
            it.sigma = min(0.9, max(cfg.sigma_floor, ratio**3))
        mu_prev = mu_new

        # --- support update phase
        if outer % cfg.refresh_period == 0:
            entering = support_mod.full_reduced_costs(it.y, inst, sup, view)
        else:
            entering = support_mod.heuristic_reduced_costs(it.y, inst, sup)
        if entering.size:
            rc = np.asarray(view.c(entering), dtype=float) \
                - it.y[entering % m] - it.y[m + entering // m]
            entering = entering[rc < -cfg.pricing_slack * np.sqrt(mu_new)]
        near = mu_new < cfg.removal_mu * mu0
        threshold = 0.0
        if near:
            threshold = cfg.removal_scale * np.sqrt(mu_new) * float(it.p_red.mean())
        sup, it.p_red, it.s_red, entered, removed = support_mod.update_support(
            sup, entering, it.p_red, it.s_red, mu_new,
            near_convergence=near, removal_threshold=threshold)
        c_red = np.asarray(view.c(sup.index), dtype=float)
        report.peak_support_size = max(report.peak_support_size, sup.psi)

        phase.observe(sup.psi)
        if phase.maybe_switch():
            report.switch_count += 1
            log.info("switching to direct solver at iteration %d (support %d)",
                     outer, sup.psi)

    # --- wrap up
    report.status = status
    report.final_support_size = sup.psi
    plan = sp.coo_matrix(
        (it.p_red, (sup.index % m, sup.index // m)), shape=(m, n)
    ).tocsr()
    objective = float(it.p_red @ c_red)
    report.objective = objective
    q = report.wasserstein_q
    report.wasserstein = objective ** (1.0 / q) if objective >= 0 else np.nan
    return plan, it.y.copy(), report


def dual_slack(inst: OTInstance, y):
    """Full dual slack c - A^T y, reconstructed after termination."""
    view = inst.cost_view()
    m, n = inst.m, inst.n
    out = np.empty(m * n)
    for start in range(0, m * n, support_mod.PRICING_CHUNK):
        j = np.arange(start, min(start + support_mod.PRICING_CHUNK, m * n))
        out[j] = view.c(j) - y[j % m] - y[m + j // m]
    return out
