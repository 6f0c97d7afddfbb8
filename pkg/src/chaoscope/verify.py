"""Property batteries: every inequality the package claims, checked with slack.

Each suite draws a seeded ensemble of interaction matrices and evaluates a
family of inequalities exactly (no Monte Carlo), recording for every named
inequality the minimum slack (bound minus quantity) seen across the
ensemble.  A suite passes when every slack clears -SLACK_TOL.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import bounds as bounds_mod
from . import gaussian as gauss
from . import linalg
from . import percolation as perc
from .matrix import InteractionMatrix, SubsetState, p_xi, q_xi
from .rng import stream

SLACK_TOL = 1e-9
SUITES = ("generator", "expectations", "gaussian", "bounds")


@dataclass
class Check:
    name: str
    passed: bool
    slack: float | None = None
    note: str = ""

    def to_json_dict(self) -> dict:
        out = {"name": self.name, "passed": self.passed}
        if self.slack is not None:
            out["slack"] = self.slack
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class SuiteResult:
    suite: str
    seed: int
    instances: int
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json_dict(self) -> dict:
        return {"suite": self.suite, "seed": self.seed,
                "instances": self.instances, "passed": self.passed,
                "checks": [c.to_json_dict() for c in self.checks]}


class _Slack:
    """Tracks the minimum slack per named inequality across an ensemble."""

    def __init__(self):
        self.worst: dict[str, float] = {}

    def add(self, name: str, slack):
        s = float(np.min(slack))
        if name not in self.worst or s < self.worst[name]:
            self.worst[name] = s

    def checks(self, tol: float = SLACK_TOL) -> list[Check]:
        return [Check(name, s >= -tol, s) for name, s in sorted(self.worst.items())]


def random_substochastic(n: int, gen: np.random.Generator,
                         columns: bool = True) -> InteractionMatrix:
    """Random nonnegative zero-diagonal matrix with row (and column) sums <= 1."""
    d = gen.random((n, n))
    d[gen.random((n, n)) < 0.3] = 0.0  # mix in sparsity
    np.fill_diagonal(d, 0.0)
    target = float(gen.uniform(0.3, 1.0))
    worst = d.sum(axis=1).max()
    if columns:
        worst = max(worst, d.sum(axis=0).max())
    if worst > 0:
        d *= target / worst
    return InteractionMatrix.from_dense(d)


def _ensemble(instances: int, seed: int, n_max: int = 10):
    gen = stream(seed)
    for _ in range(instances):
        n = int(gen.integers(2, n_max + 1))
        xi = random_substochastic(n, gen)
        kappa = float(gen.uniform(0.25, 1.0))
        yield gen, xi, kappa


# ---------------------------------------------------------------------------

def generator_suite(instances: int = 50, seed: int = 0) -> SuiteResult:
    """Pointwise generator inequalities over every subset, exact evaluation."""
    agg = _Slack()
    exact_zero = 0.0
    for gen, xi, kappa in _ensemble(instances, seed):
        n = xi.n
        model = perc.PercolationModel(xi, kappa)
        x = gen.random(n)
        G = gen.random((n, n))
        if gen.random() < 0.5:
            G = (G + G.T) / 2.0
        ind, sizes = perc._lattice(n)
        for ell in (1, 2, 3):
            lhs = perc.generator_apply(model, perc.SubsetFunction(sizes ** ell, n))
            rhs = perc.lemma_polynomial_rhs(model, ell)
            agg.add(f"generator.polynomial.l{ell}", rhs.values - lhs.values)
        lin = ind @ x
        for ell in (0, 1, 2):
            lhs = perc.generator_apply(model, perc.SubsetFunction(sizes ** ell * lin, n))
            rhs = perc.lemma_linear_rhs(model, x, ell)
            agg.add(f"generator.linear.l{ell}", rhs.values - lhs.values)
        quad = np.einsum("mi,mi->m", ind @ G, ind)
        for ell in (0, 1):
            lhs = perc.generator_apply(model, perc.SubsetFunction(sizes ** ell * quad, n))
            rhs = perc.lemma_quadratic_rhs(model, G, ell)
            agg.add(f"generator.quadratic.l{ell}", rhs.values - lhs.values)
        const = perc.generator_apply(model, perc.SubsetFunction.constant(n, 3.5))
        exact_zero = max(exact_zero, float(np.abs(const.values).max()))
        full = perc.generator_apply(model, perc.SubsetFunction(sizes ** 2, n))
        exact_zero = max(exact_zero, abs(full.values[(1 << n) - 1]))
    out = SuiteResult("generator", seed, instances, agg.checks())
    out.checks.append(Check("generator.annihilates-constants-and-full-set",
                            exact_zero <= 1e-12, -exact_zero))
    return out


_EXPECTATION_T = (0.1, 0.5, 1.0, 2.0)


def expectations_suite(instances: int = 50, seed: int = 0) -> SuiteResult:
    """exact E_v[F(X_t)] <= closed-form bound, all eight families, t grid."""
    agg = _Slack()
    for gen, xi, kappa in _ensemble(instances, seed):
        n = xi.n
        model = perc.PercolationModel(xi, kappa)
        x = gen.random(n)
        G = gen.random((n, n))
        ind, sizes = perc._lattice(n)
        tables = {
            "size": sizes, "size2": sizes ** 2, "size3": sizes ** 3,
            "linear": ind @ x, "size-linear": sizes * (ind @ x),
            "size2-linear": sizes ** 2 * (ind @ x),
            "quadratic": np.einsum("mi,mi->m", ind @ G, ind),
        }
        tables["size-quadratic"] = sizes * tables["quadratic"]
        curves = {fam: perc.expectation_curve(model, perc.SubsetFunction(tab, n),
                                              _EXPECTATION_T[-1])
                  for fam, tab in tables.items()}
        for t in _EXPECTATION_T:
            for fam in tables:
                exact = curves[fam].eval_all(t)
                bound = perc.expectation_bound_all(model, fam, t, x=x, G=G)
                agg.add(f"expectations.{fam}", bound - exact)
    return SuiteResult("expectations", seed, instances, agg.checks())


# ---------------------------------------------------------------------------

def _entropy_table(gm: gauss.GaussianModel):
    """exact, lower, upper over every nonempty mask (index = bitmask)."""
    n = gm.n
    size = 1 << n
    exact = np.zeros(size)
    lower = np.zeros(size)
    upper = np.zeros(size)
    scale = math.exp(6.0 * gm.rho * gm.T)
    for mask in range(1, size):
        a = gm.centered(SubsetState.from_mask(mask, n))
        lam = np.linalg.eigvalsh(a)
        exact[mask] = 0.5 * float(gauss.h(lam).sum())
        tr2 = float((a * a).sum())
        lower[mask] = tr2 / 6.0
        upper[mask] = scale * tr2
    return exact, lower, upper


def gaussian_suite(instances: int = 100, seed: int = 0) -> SuiteResult:
    agg = _Slack()
    gen_master = stream(seed)
    series_vs_quad = 0.0
    for idx in range(instances):
        n = int(gen_master.integers(2, 11))
        xi = random_substochastic(n, gen_master)
        rho = linalg.op_norm(xi.dense())
        window = math.log(2.0) / (2.0 * rho) if rho > 0 else 1.0
        T = float(gen_master.uniform(0.2, 1.0)) * window
        gm = gauss.sigma_T(xi, T)
        if idx % 5 == 0:
            quad = gauss.sigma_T_quadrature(xi, T)
            series_vs_quad = max(series_vs_quad,
                                 float(np.abs(gm.sigma_T - quad).max()))
        lam_all = np.linalg.eigvalsh(gm.centered())
        agg.add("gaussian.eig-window.low",
                lam_all - (math.exp(-2 * gm.rho * T) - 1.0))
        agg.add("gaussian.eig-window.high",
                (math.exp(2 * gm.rho * T) - 1.0) - lam_all)
        exact, lower, upper = _entropy_table(gm)
        agg.add("gaussian.sandwich.lower", (exact - lower)[1:])
        agg.add("gaussian.sandwich.upper", (upper - exact)[1:])
        ind, sizes = perc._lattice(n)
        d = xi.dense()
        sq = np.einsum("mi,mi->m", ind @ (d * d), ind)
        agg.add("gaussian.clique-lower", (exact - T * T / 12.0 * sq)[1:])
        maxes = math.exp(10.0 * gm.rho * T) * xi.delta ** 2 * sizes ** 2
        agg.add("gaussian.max-upper", (maxes - exact)[1:])
        # data processing: adding one index never decreases the entropy
        mono = np.inf
        for j in range(n):
            absent = np.nonzero(ind[:, j] == 0)[0][1:]  # skip empty set
            mono = min(mono, float((exact[absent + (1 << j)] - exact[absent]).min()))
        agg.add("gaussian.monotone-in-v", mono)
        a_full = gm.centered()
        for k in range(1, n + 1):
            brute = np.mean([((a_full[np.ix_(c, c)]) ** 2).sum()
                             for c in combinations(range(n), k)])
            agg.add("gaussian.avgtrace-identity",
                    1e-12 - abs(gauss.avg_trace_sq(a_full, k) - float(brute)))
        for k in range(1, min(n, 4) + 1):
            avg_exact = float(np.mean(exact[sizes == k]))
            lo, hi = gauss.avg_entropy_sandwich(gm, k)
            agg.add("gaussian.avg-sandwich.lower", avg_exact - lo)
            agg.add("gaussian.avg-sandwich.upper", hi - avg_exact)
            lo_e, hi_e = gauss.avg_entropy_sandwich(gm, k, explicit=True)
            agg.add("gaussian.avg-explicit.lower", avg_exact - lo_e)
            agg.add("gaussian.avg-explicit.upper", hi_e - avg_exact)
        dt_val = gauss.d_T(xi, T)
        env_lo, env_hi = gauss.d_T_envelope(xi, T)
        agg.add("gaussian.dT-envelope.lower", dt_val - env_lo)
        agg.add("gaussian.dT-envelope.upper", env_hi - dt_val)
        agg.add("gaussian.dT-dual-route",
                1e-7 - abs(dt_val - gauss.d_T_quadrature(xi, T)))
        # scalar h sandwich on a grid over the certified eigenvalue range
        alpha = math.exp(-2.0 * gm.rho * T) - 1.0
        grid = np.linspace(alpha, 1.0, 41)
        grid = grid[np.abs(grid) > 1e-13]
        hv = gauss.h(grid)
        agg.add("gaussian.h-lower", hv - grid ** 2 / 6.0)
        alpha_neg = max(-alpha, 0.0)
        cap = 0.5 + alpha_neg / (3.0 * (1.0 + alpha) ** 3)
        grid2 = np.linspace(alpha, 2.0, 41)
        agg.add("gaussian.h-upper", cap * grid2 ** 2 - gauss.h(grid2))
    out = SuiteResult("gaussian", seed, instances, agg.checks())
    out.checks.append(Check("gaussian.sigma-series-vs-quadrature",
                            series_vs_quad <= 1e-7, 1e-7 - series_vs_quad))
    return out


# ---------------------------------------------------------------------------

def bounds_suite(instances: int = 25, seed: int = 0) -> SuiteResult:
    agg = _Slack()
    gen_master = stream(seed)
    for _ in range(instances):
        n = int(gen_master.integers(2, 9))
        xi = random_substochastic(n, gen_master)
        reports = {k: bounds_mod.max_entropy_bound(xi, k) for k in range(1, n + 1)}
        for k in range(1, n):
            agg.add("bounds.max-monotone-k",
                    reports[k + 1].structural - reports[k].structural)
        for k in range(1, n + 1):
            avg = bounds_mod.avg_entropy_bound(xi, k)
            agg.add("bounds.avg-below-max", reports[k].structural - avg.structural)
            sharper = bounds_mod.sharper_avg_bound(xi, k)
            agg.add("bounds.avg2way-nonneg", sharper.structural)
            rev = bounds_mod.reversed_variant(avg)
            agg.add("bounds.reversed-smaller", avg.structural - rev.structural)
        if n <= 6:
            vals = {}
            for mask in range(1, 1 << n):
                v = SubsetState.from_mask(mask, n)
                vals[mask] = q_xi(xi, v)
                agg.add("bounds.setwise-cap",
                        8.0 * xi.delta ** 2 * v.size ** 3 - vals[mask])
            for mask in range(1, 1 << n):
                for j in range(n):
                    if not (mask >> j) & 1:
                        agg.add("bounds.setwise-monotone",
                                vals[mask | (1 << j)] - vals[mask])
    checks = agg.checks()

    # uniform-in-time gate: refuses exactly when sigma^2 <= 12 eta gamma
    try:
        bad = bounds_mod.ModelConstants(gamma=1.0, M=1.0, sigma=1.0, T=1.0, eta=1.0)
        bad.require_uniform()
        checks.append(Check("bounds.uniform-gate", False,
                            note="sigma^2 <= 12 eta gamma was accepted"))
    except ValueError:
        checks.append(Check("bounds.uniform-gate", True))
    ok = bounds_mod.ModelConstants(gamma=1.0, M=1.0, sigma=1.0, T=1.0, eta=1.0 / 13.0)
    checks.append(Check("bounds.uniform-gate-accepts",
                        ok.discount_rate() > 3.0 * ok.gamma))

    # h3 explicit constant at T=0 and its delta^2 scaling
    c = bounds_mod.ModelConstants(gamma=1.0, M=1.0, sigma=1.0, T=0.0)
    val = bounds_mod.h3_bound(c, 1.0)
    checks.append(Check("bounds.h3-T0-constant", abs(val - 72.0) <= 1e-12,
                        1e-12 - abs(val - 72.0)))
    ns = np.array([10.0, 20.0, 40.0])
    h3s = np.array([bounds_mod.h3_bound(c, 1.0 / (m - 1.0)) for m in ns])
    ratio = h3s[:-1] / h3s[1:]
    expected = ((ns[1:] - 1.0) / (ns[:-1] - 1.0)) ** 2
    checks.append(Check("bounds.h3-meanfield-scaling",
                        bool(np.allclose(ratio, expected, rtol=1e-12))))

    # LSI constants: convex equality case, torus divergence-free, smallness gate
    conv = bounds_mod.lsi_constants("convex", {"lam": 1.0, "eta0": 4.0, "sigma": 1.0})
    checks.append(Check("bounds.lsi-convex", abs(conv - 1.0) <= 1e-15))
    torus = bounds_mod.lsi_constants("torus", {"lam": 1.0, "sigma": 1.0})
    checks.append(Check("bounds.lsi-torus-divfree",
                        abs(torus - 1.0 / (8.0 * math.pi ** 2)) <= 1e-15))
    thr = 2.0 * math.pi ** 2 / (1.0 + math.sqrt(2.0 * math.log(2.0)))
    near = bounds_mod.lsi_constants(
        "torus", {"lam": 2.0, "sigma": 1.0, "div_norm": 0.99 * thr})
    checks.append(Check("bounds.lsi-torus-near-threshold",
                        math.isfinite(near) and near > 0.0))
    try:
        bounds_mod.lsi_constants("torus", {"lam": 2.0, "sigma": 1.0, "div_norm": thr})
        checks.append(Check("bounds.lsi-torus-gate", False))
    except perc.NotApplicable:
        checks.append(Check("bounds.lsi-torus-gate", True))

    # Feynman-Kac certification against the exact Gaussian oracle
    fk_worst = np.inf
    for _ in range(6):
        n = int(gen_master.integers(2, 7))
        xi = random_substochastic(n, gen_master)
        gm = gauss.sigma_T(xi, 0.5)
        constants = bounds_mod.gaussian_fk_constants(gm)
        model = perc.PercolationModel(xi, constants.rate_scale())
        bound = bounds_mod.percolation_entropy_bound_all(model, constants)
        exact, _, _ = _entropy_table(gm)
        fk_worst = min(fk_worst, float((bound[1:] - exact[1:]).min()))
    checks.append(Check("bounds.feynman-kac-dominates", fk_worst >= -SLACK_TOL, fk_worst))
    return SuiteResult("bounds", seed, instances, checks)


_SUITE_FN = {"generator": generator_suite, "expectations": expectations_suite,
             "gaussian": gaussian_suite, "bounds": bounds_suite}
_DEFAULT_INSTANCES = {"generator": 50, "expectations": 50,
                      "gaussian": 100, "bounds": 25}


def run_suite(name: str, instances: int | None = None, seed: int = 0) -> list[SuiteResult]:
    names = SUITES if name == "all" else (name,)
    out = []
    for nm in names:
        if nm not in _SUITE_FN:
            raise ValueError(f"unknown suite {nm!r}; pick from {SUITES + ('all',)}")
        count = instances if instances is not None else _DEFAULT_INSTANCES[nm]
        out.append(_SUITE_FN[nm](count, seed))
    return out


def save_results(results: list[SuiteResult], path):
    payload = {"passed": all(r.passed for r in results),
               "suites": [r.to_json_dict() for r in results]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
