"""Study drivers: spatial-convergence rates against an overkill reference,
spectral-radius sensitivity maps, and per-step timing benches.

Convergence cases are independent and may run in a small process pool;
results are identical regardless of worker count. Timing benches always run
serially to avoid contention noise.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .scenarios import ScenarioConfig, build_simulation
from .solvers import (
    BC_PRESETS,
    BoundaryCondition,
    MulticorrectorSettings,
    assemble_mass_blocks,
    spectral_radius,
)
from .splines import (
    SplineSpace,
    basis_row,
    collocation_operators,
    greville_abscissae,
    make_open_uniform_knots,
)


@dataclass(frozen=True)
class CaseSpec:
    p: int
    n: int
    h_s: float


@dataclass
class ConvergenceStudyConfig:
    """Overkill-reference convergence protocol.

    The error of each case is the relative L2 norm of the displacement (or
    position) field difference against the reference at ``t_star_s``,
    sampled on ``eval_points`` equally spaced points with trapezoid weights.
    """

    base: ScenarioConfig
    t_star_s: float
    reference: CaseSpec
    cases: list
    eval_points: int = 201
    error_field: str = "displacement"  # or "position"
    workers: int = 1

    def __post_init__(self):
        for c in self.cases:
            finer = (self.reference.n >= c.n and self.reference.h_s <= c.h_s
                     and self.reference.p >= c.p)
            if not finer or (self.reference.n == c.n
                             and self.reference.h_s == c.h_s
                             and self.reference.p == c.p):
                raise ValueError(
                    f"reference {self.reference} is not strictly finer than "
                    f"case {c}")


@dataclass
class ConvergenceResult:
    variant: str
    t_star_s: float
    cases: list          # CaseSpec
    errors: list         # relative L2 errors, case order
    rates: dict          # degree -> fitted rate (positive = converging)
    reference: CaseSpec


def _eval_matrix(p, n, n_eval):
    space = SplineSpace(p=p, knots=make_open_uniform_knots(p, n + 1))
    grid_u = np.linspace(0.0, 1.0, n_eval)
    E = np.stack([basis_row(space, float(u)) for u in grid_u])
    return E


def _field_at_t_star(args):
    """Worker: run one case to t*, return the field on the shared grid."""
    base, case, variant, t_star, n_eval, error_field = args
    config = replace(base, p=case.p, n=case.n, h_s=case.h_s, variant=variant,
                     T_s=t_star, output_stride=10**9, store_snapshots=False)
    dyn, state = build_simulation(config)
    n_steps = int(round(t_star / case.h_s))
    for _ in range(n_steps):
        state, _ = dyn.step(state)
    E = _eval_matrix(case.p, case.n, n_eval)
    pos = E @ state.c_ctrl
    if error_field == "position":
        return case, pos, pos
    ref0 = E @ dyn.ref.c_ctrl
    return case, pos - ref0, pos


def _trapezoid_weights(n_eval):
    w = np.full(n_eval, 1.0)
    w[0] = w[-1] = 0.5
    return w


def convergence_study(study: ConvergenceStudyConfig,
                      variant: str) -> ConvergenceResult:
    """Relative-L2 error table plus least-squares convergence rates per
    degree (slope of log err against log n)."""
    jobs = [(study.base, c, variant, study.t_star_s, study.eval_points,
             study.error_field)
            for c in [study.reference] + list(study.cases)]
    if study.workers > 1:
        with ProcessPoolExecutor(max_workers=study.workers) as pool:
            results = list(pool.map(_field_at_t_star, jobs))
    else:
        results = [_field_at_t_star(j) for j in jobs]

    _, ref_field, _ = results[0]
    w = _trapezoid_weights(study.eval_points)[:, None]
    ref_norm = np.sqrt((w * ref_field**2).sum())
    errors = []
    for case, fld, _ in results[1:]:
        err = np.sqrt((w * (fld - ref_field) ** 2).sum()) / ref_norm
        errors.append(float(err))

    rates = {}
    degrees = sorted({c.p for c in study.cases})
    for p in degrees:
        pts = [(c.n, e) for c, e in zip(study.cases, errors) if c.p == p]
        if len(pts) >= 2:
            ns = np.log([q[0] for q in pts])
            es = np.log([q[1] for q in pts])
            slope = np.polyfit(ns, es, 1)[0]
            rates[p] = float(-slope)
    return ConvergenceResult(variant=variant, t_star_s=study.t_star_s,
                             cases=list(study.cases), errors=errors,
                             rates=rates, reference=study.reference)


# -- spectral radius sensitivity ----------------------------------------------

_BC_COMBOS = {
    "dd": ("dirichlet", "dirichlet"),
    "dn": ("dirichlet", "neumann"),
    "nn": ("neumann", "neumann"),
}


def iteration_matrix(p: int, n: int, combo: str) -> np.ndarray:
    """The scalar collocation block for one (degree, size, BC combo)."""
    kinds = _BC_COMBOS[combo.lower()]
    space = SplineSpace(p=p, knots=make_open_uniform_knots(p, n + 1))
    grid = greville_abscissae(space)
    ops = collocation_operators(space, grid, 1.0)
    bc = (BoundaryCondition(kinds[0], kinds[0]),
          BoundaryCondition(kinds[1], kinds[1]))
    return assemble_mass_blocks(ops, bc).M_a


def spectral_study(p_list, n_list, bc_combos=("dd", "dn", "nn")) -> list:
    """Full factorial table of rho(M - I); rows (p, n, combo, rho)."""
    rows = []
    for combo in bc_combos:
        for p in p_list:
            for n in n_list:
                rho = spectral_radius(iteration_matrix(p, n, combo))
                rows.append({"p": int(p), "n": int(n), "bc": combo,
                             "rho": float(rho)})
    return rows


# -- timing bench --------------------------------------------------------------

# fixed corrector passes per degree for bench mode: enough to keep the shocked
# benchmarks stable (roughly a 1e-6 residual factor at the DD spectral radius)
BENCH_FIXED_PASSES = {1: 12, 2: 20, 3: 40, 4: 64, 5: 120, 6: 190, 7: 320, 8: 530}


@dataclass
class BenchCase:
    benchmark: str
    variant: str
    p: int
    n: int
    seconds_per_step: float
    normalized: float = np.nan


@dataclass
class BenchConfig:
    base: ScenarioConfig
    p_list: tuple = (2, 4, 6)
    n_list: tuple = (10, 20, 40, 60)
    variants: tuple = ("cn-nl", "lu-nl", "lu-l")
    steps: int = 500
    warmup: int = 20
    fixed_passes: dict = field(default_factory=lambda: dict(BENCH_FIXED_PASSES))


def _time_one(config: ScenarioConfig, steps: int, warmup: int) -> float:
    dyn, state = build_simulation(config)
    for _ in range(warmup):
        state, _ = dyn.step(state)
    t0 = time.perf_counter()
    for _ in range(steps):
        state, _ = dyn.step(state)
    return (time.perf_counter() - t0) / steps


def timing_bench(bench: BenchConfig) -> list:
    """Average per-step wall time over the (variant, p, n) matrix, normalized
    per degree by the consistent solver at the smallest n."""
    rows = []
    for p in bench.p_list:
        for variant in bench.variants:
            for n in bench.n_list:
                config = replace(
                    bench.base, p=p, n=n, variant=variant,
                    mc_fixed_passes=bench.fixed_passes.get(p),
                    output_stride=10**9)
                dt = _time_one(config, bench.steps, bench.warmup)
                rows.append(BenchCase(benchmark=bench.base.name,
                                      variant=variant, p=p, n=n,
                                      seconds_per_step=dt))
    for p in bench.p_list:
        ref = [r for r in rows
               if r.p == p and r.variant == "cn-nl" and r.n == min(bench.n_list)]
        ref_t = ref[0].seconds_per_step
        for r in rows:
            if r.p == p:
                r.normalized = r.seconds_per_step / ref_t
    return rows
