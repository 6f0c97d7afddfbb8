"""The subset-valued growth process and its expectation machinery.

State is a subset v of {0,..,n-1}; element j joins at rate
kappa * sum_{i in v} xi[i, j], and nothing ever leaves, so the full set is
absorbing.  Three engines compute E_v[F(X_t)]:

  * exact uniformization over all 2^n subsets (n <= 16),
  * Gillespie sampling of the jump chain,
  * first-passage edge clocks (symmetric xi only; same law by memorylessness).

The closed-form upper bounds on moments (size, linear, and quadratic
families, each with optional size weights) are evaluated here too, stated
with the model's rate scale kappa throughout.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .matrix import InteractionMatrix, SubsetState, validate, _frozen
from .rng import stream, run_chunked

EXACT_ENGINE_LIMIT = 16   # 2^16 subset states
MASK_LIMIT = 63           # trajectories carry int64 bitmasks


class EngineTooLarge(RuntimeError):
    pass


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class PercolationModel:
    xi: InteractionMatrix
    kappa: float  # rate scale multiplying every transition rate

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def n(self) -> int:
        return self.xi.n


@dataclass(frozen=True)
class SubsetFunction:
    """F : subsets of {0,..,n-1} -> R, tabulated over all 2^n bitmasks."""

    values: np.ndarray
    n: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (1 << self.n,):
            raise ValueError(f"need exactly 2^{self.n} values")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def from_callable(cls, n: int, fn) -> "SubsetFunction":
        vals = [fn(SubsetState.from_mask(m, n)) for m in range(1 << n)]
        return cls(np.array(vals, dtype=float), n)

    @classmethod
    def constant(cls, n: int, c: float) -> "SubsetFunction":
        return cls(np.full(1 << n, float(c)), n)

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])


@dataclass(frozen=True)
class Trajectory:
    """One sampled path: strictly increasing jump times, one added index each."""

    initial: SubsetState
    times: tuple[float, ...]
    added: tuple[int, ...]

    def __post_init__(self):
        if len(self.times) != len(self.added):
            raise ValueError("times and added indices must align")

    @property
    def n(self) -> int:
        return self.initial.n

    def members_at(self, t: float) -> SubsetState:
        members = set(self.initial.members)
        for when, idx in zip(self.times, self.added):
            if when > t:
                break
            members.add(idx)
        return SubsetState(frozenset(members), self.n)

    def final_mask(self) -> int:
        m = self.initial.mask
        for idx in self.added:
            m |= 1 << idx
        return m

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("time,added_index\n")
            for when, idx in zip(self.times, self.added):
                fh.write(f"{when!r},{idx}\n")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    reps: int
    seed: int

    def to_json_dict(self, functional: str, v: SubsetState, t: float) -> dict:
        return {"functional": functional, "v": v.sorted_members(), "t": t,
                "mean": self.mean, "stderr": self.stderr,
                "reps": self.reps, "seed": self.seed}


# ---------------------------------------------------------------------------
# Subset lattice

@lru_cache(maxsize=8)
def _lattice(n: int):
    """Indicator table over all bitmasks and the matching cardinalities."""
    masks = np.arange(1 << n, dtype=np.int64)
    ind = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    return _frozen(ind), _frozen(ind.sum(axis=1))


def _require_exact(n: int):
    if n > EXACT_ENGINE_LIMIT:
        raise EngineTooLarge(f"exact engine handles n <= {EXACT_ENGINE_LIMIT}, got {n}")


class _Engine:
    """Per-model tables for the exact subset engine."""

    def __init__(self, model: PercolationModel):
        _require_exact(model.n)
        n = model.n
        self.n = n
        self.kappa = model.kappa
        d = model.xi.dense()
        ind, sizes = _lattice(n)
        self.ind, self.sizes = ind, sizes
        # rate_in[m, j] = sum_{i in m} xi[i, j]; joining rate of j is kappa * that
        self.rate_in = ind @ d
        self.absent = [np.nonzero(ind[:, j] == 0)[0] for j in range(n)]
        max_row = float(model.xi.row_sums.max()) if n else 0.0
        self.lam = model.kappa * n * max(1.0, max_row)

    def apply_generator(self, f: np.ndarray) -> np.ndarray:
        out = np.zeros_like(f)
        for j in range(self.n):
            idx = self.absent[j]
            out[idx] += self.rate_in[idx, j] * (f[idx + (1 << j)] - f[idx])
        return self.kappa * out

    def apply_kernel(self, f: np.ndarray) -> np.ndarray:
        # one step of the uniformized (stochastic) kernel I + A/lam
        return f + self.apply_generator(f) / self.lam


@lru_cache(maxsize=6)
def _engine(model: PercolationModel) -> _Engine:
    return _Engine(model)


def generator_apply(model: PercolationModel, F: SubsetFunction) -> SubsetFunction:
    """Exact AF on every subset; AF([n]) = 0 and A annihilates constants."""
    if F.n != model.n:
        raise ValueError("function and model sizes differ")
    eng = _engine(model)
    return SubsetFunction(eng.apply_generator(np.asarray(F.values, dtype=float)), model.n)


# ---------------------------------------------------------------------------
# Exact expectations by uniformization

@dataclass(frozen=True)
class UniformizedCurve:
    """Coefficients of e^{tA}F as a Poisson mixture, valid for any t <= t_max.

    coeffs[k] holds P^k F over all masks; the Poisson(lam*t) tail beyond the
    stored order is monotone in t, so one truncation certifies the whole
    interval at tol * ||F||_inf.
    """

    coeffs: np.ndarray
    lam: float
    t_max: float
    tol: float

    def eval_all(self, t: float) -> np.ndarray:
        if t < 0 or t > self.t_max * (1 + 1e-12):
            raise ValueError("curve evaluated outside [0, t_max]")
        w = linalg.poisson_weights(self.lam * t, self.coeffs.shape[0] - 1)
        return w @ self.coeffs

    def eval(self, t: float, mask: int) -> float:
        return float(self.eval_all(t)[mask])


def expectation_curve(model: PercolationModel, F: SubsetFunction,
                      t_max: float, tol: float = 1e-10) -> UniformizedCurve:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    if F.n != model.n:
        raise ValueError("function and model sizes differ")
    eng = _engine(model)
    kmax = linalg.poisson_truncation(eng.lam * t_max, tol)
    coeffs = np.empty((kmax + 1, 1 << model.n))
    cur = np.asarray(F.values, dtype=float)
    coeffs[0] = cur
    for k in range(1, kmax + 1):
        cur = eng.apply_kernel(cur)
        coeffs[k] = cur
    return UniformizedCurve(_frozen(coeffs), eng.lam, t_max, tol)


def exact_expectation(model: PercolationModel, F: SubsetFunction, v, t: float,
                      tol: float = 1e-10) -> float:
    """E_v[F(X_t)] with truncation error certified <= tol * ||F||_inf."""
    v = SubsetState.of(v, model.n)
    if t == 0.0:
        return F[v.mask]
    return expectation_curve(model, F, t, tol).eval(t, v.mask)


def exact_expectation_all(model: PercolationModel, F: SubsetFunction, t: float,
                          tol: float = 1e-10) -> np.ndarray:
    """E_v[F(X_t)] for every start subset at once (vector over masks)."""
    if t == 0.0:
        return np.array(F.values, dtype=float)
    return expectation_curve(model, F, t, tol).eval_all(t)


# ---------------------------------------------------------------------------
# Monte Carlo engines

def _gillespie_run(dense: np.ndarray, kappa: float, n: int, v: SubsetState,
                   t: float, gen: np.random.Generator):
    members = np.zeros(n, dtype=bool)
    members[v.sorted_members()] = True
    rates = kappa * dense[members].sum(axis=0)
    rates[members] = 0.0
    times, added = [], []
    mask = v.mask
    clock = 0.0
    while True:
        total = rates.sum()
        if total <= 0.0:
            break
        clock += gen.exponential(1.0 / total)
        if clock > t:
            break
        u = gen.random() * total
        j = int(np.searchsorted(np.cumsum(rates), u, side="right"))
        while rates[j] == 0.0:  # guard against landing on a zero-rate boundary
            j += 1
        times.append(clock)
        added.append(j)
        mask |= 1 << j
        members[j] = True
        rates = rates + kappa * dense[j]
        rates[members] = 0.0
    return times, added, mask


def simulate(model: PercolationModel, v, t: float, seed: int) -> Trajectory:
    """One Gillespie path up to time t: Exp holding times, next index by rate."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if model.n > MASK_LIMIT:
        raise EngineTooLarge(f"trajectory masks support n <= {MASK_LIMIT}")
    v = SubsetState.of(v, model.n)
    times, added, _ = _gillespie_run(model.xi.dense(), model.kappa, model.n,
                                     v, t, stream(seed))
    return Trajectory(v, tuple(times), tuple(added))


def _fpp_edges(xi: InteractionMatrix):
    upper = xi.ii < xi.jj
    return xi.ii[upper], xi.jj[upper], xi.vals[upper]


def _fpp_run(model: PercolationModel, v: SubsetState, t: float,
             gen: np.random.Generator):
    eu, ev, w = _fpp_edges(model.xi)
    clocks = gen.exponential(1.0 / (model.kappa * w)) if w.size else np.empty(0)
    adj: list[list[tuple[int, float]]] = [[] for _ in range(model.n)]
    for a, b, c in zip(eu, ev, clocks):
        adj[a].append((int(b), float(c)))
        adj[b].append((int(a), float(c)))
    dist = {i: 0.0 for i in v.members}
    heap = [(0.0, i) for i in sorted(v.members)]
    heapq.heapify(heap)
    settled = {}
    while heap:
        d, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled[node] = d
        if d > t:
            continue  # still settled, but nothing beyond t can extend the ball
        for nbr, c in adj[node]:
            nd = d + c
            if nbr not in settled and nd < dist.get(nbr, math.inf):
                dist[nbr] = nd
                heapq.heappush(heap, (nd, nbr))
    hits = sorted((d, i) for i, d in settled.items() if i not in v.members and d <= t)
    times = tuple(d for d, _ in hits)
    added = tuple(i for _, i in hits)
    mask = v.mask
    for i in added:
        mask |= 1 << i
    return times, added, mask


def fpp_simulate(model: PercolationModel, v, t: float, seed: int) -> Trajectory:
    """Growth ball from independent edge clocks Exp(kappa * xi_ij).

    Requires symmetric xi; the output law equals simulate's because the
    minimum of the relevant exponential clocks is exponential in the total
    rate and memoryless at every growth step.
    """
    if not model.xi.symmetric:
        raise NotApplicable("edge-clock growth needs a symmetric matrix")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if model.n > MASK_LIMIT:
        raise EngineTooLarge(f"trajectory masks support n <= {MASK_LIMIT}")
    v = SubsetState.of(v, model.n)
    times, added, _ = _fpp_run(model, v, t, stream(seed))
    return Trajectory(v, times, added)


def terminal_masks(model: PercolationModel, v, t: float, reps: int, seed: int,
                   method: str = "gillespie", threads: int | None = None) -> np.ndarray:
    """Terminal-state bitmasks of `reps` independent paths; chunk-deterministic.

    Replication r always uses the stream (seed, r), and chunks are combined in
    index order, so the output is identical for every thread count.
    """
    if model.n > MASK_LIMIT:
        raise EngineTooLarge(f"trajectory masks support n <= {MASK_LIMIT}")
    v = SubsetState.of(v, model.n)
    if method == "gillespie":
        dense = model.xi.dense()

        def work(lo, hi):
            out = np.empty(hi - lo, dtype=np.int64)
            for r in range(lo, hi):
                out[r - lo] = _gillespie_run(dense, model.kappa, model.n, v, t,
                                             stream(seed, r))[2]
            return out
    elif method == "fpp":
        if not model.xi.symmetric:
            raise NotApplicable("edge-clock growth needs a symmetric matrix")

        def work(lo, hi):
            out = np.empty(hi - lo, dtype=np.int64)
            for r in range(lo, hi):
                out[r - lo] = _fpp_run(model, v, t, stream(seed, r))[2]
            return out
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return np.concatenate(run_chunked(work, reps, threads=threads))


# ---------------------------------------------------------------------------
# Named functionals (shared between the exact and Monte Carlo engines)

def resolve_functional(spec, xi: InteractionMatrix):
    """Return (name, table or None, mask evaluator) for a functional spec.

    spec is a name ("size", "size2", "size3"), a (name, payload) pair for
    payload-carrying functionals ("linear"/"quadratic" with x or G and
    optional ell; "C"/"chat" with constants and h3), or a callable
    SubsetState -> float.
    """
    n = xi.n
    if callable(spec):
        return getattr(spec, "__name__", "custom"), None, lambda m: float(spec(SubsetState.from_mask(m, n)))
    if isinstance(spec, str):
        name, payload = spec, {}
    else:
        name, payload = spec[0], dict(spec[1])
    small = n <= EXACT_ENGINE_LIMIT
    ind, sizes = _lattice(n) if small else (None, None)

    if name in ("size", "size2", "size3"):
        p = {"size": 1, "size2": 2, "size3": 3}[name]
        table = sizes ** p if small else None
        return name, table, lambda m: float(bin(m).count("1") ** p)

    if name == "linear":
        x = np.asarray(payload["x"], dtype=float)
        ell = int(payload.get("ell", 0))
        if small:
            table = (ind @ x) * sizes ** ell
        else:
            table = None

        def at(m):
            s = SubsetState.from_mask(m, n)
            return float(s.size ** ell * x[s.sorted_members()].sum())
        return name, table, at

    if name == "quadratic":
        G = np.asarray(payload["G"], dtype=float)
        ell = int(payload.get("ell", 0))
        if small:
            table = np.einsum("mi,mi->m", ind @ G, ind) * sizes ** ell
        else:
            table = None

        def at(m):
            mem = SubsetState.from_mask(m, n).sorted_members()
            return float(len(mem) ** ell * G[np.ix_(mem, mem)].sum())
        return name, table, at

    if name in ("C", "chat"):
        from .matrix import C_of_v, Chat_of_v
        constants = payload["constants"]
        if name == "C":
            fn = lambda s: C_of_v(xi, s, constants)
        else:
            h3 = float(payload.get("h3", 0.0))
            fn = lambda s: Chat_of_v(xi, s, constants, h3)
        table = None
        if small:
            vals = np.empty(1 << n)
            vals[0] = 0.0
            for m in range(1, 1 << n):
                vals[m] = fn(SubsetState.from_mask(m, n))
            table = vals
        return name, table, lambda m: 0.0 if m == 0 else fn(SubsetState.from_mask(m, n))

    raise ValueError(f"unknown functional {name!r}")


def functional_table(spec, xi: InteractionMatrix) -> SubsetFunction:
    """The functional tabulated over all subsets (exact-engine sizes only)."""
    _require_exact(xi.n)
    name, table, at = resolve_functional(spec, xi)
    if table is None:
        table = np.array([at(m) for m in range(1 << xi.n)])
    return SubsetFunction(np.asarray(table, dtype=float), xi.n)


def mc_expectation(model: PercolationModel, functional, v, t: float, reps: int,
                   seed: int, method: str = "gillespie",
                   threads: int | None = None) -> McEstimate:
    """Sample mean of F(X_t) over independent trajectories.

    stderr is the sample standard deviation / sqrt(reps).  Identical seeds
    give identical estimates for any thread count.
    """
    if reps < 2:
        raise ValueError("need reps >= 2 for a standard error")
    name, table, at = resolve_functional(functional, model.xi)
    masks = terminal_masks(model, v, t, reps, seed, method=method, threads=threads)
    if table is not None:
        vals = np.asarray(table, dtype=float)[masks]
    else:
        vals = np.array([at(int(m)) for m in masks])
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(reps))
    return McEstimate(mean, stderr, reps, seed)


# ---------------------------------------------------------------------------
# Moment upper bounds, stated with the rate scale kappa

_FAMILIES = ("size", "size2", "size3", "linear", "size-linear",
             "size2-linear", "quadratic", "size-quadratic")


def _require_row_sums(xi: InteractionMatrix):
    if not validate(xi).ok:
        raise ValueError("moment bounds need a valid matrix with row sums <= 1")


def _check_payload(arr, name):
    a = np.asarray(arr, dtype=float)
    if (a < 0).any():
        raise ValueError(f"{name} must be entrywise nonnegative")
    return a


def _quadratic_ingredients(model: PercolationModel, G: np.ndarray, t: float,
                           tol: float):
    """G_t and the two time-integral vectors shared by the quadratic families."""
    d = model.xi.dense()
    k = model.kappa

    def g_at(s):
        e = linalg.expm(k * s * d)
        return e @ G @ e.T

    g_t = g_at(t)

    def integrand_a(s):
        return d @ (linalg.expm(k * (t - s) * d) @ np.diag(g_at(s)).copy())

    def integrand_b(s):
        gs = g_at(s)
        w = np.diag(d @ gs + gs @ d.T + 2.0 * gs).copy()
        z = d @ w
        return linalg.expm_action(k * (t - s) * d, z + d @ z)

    if t == 0.0:
        zero = np.zeros(model.n)
        return g_t, zero, zero
    int_a = k * linalg.simpson_adaptive(integrand_a, 0.0, t, rel_tol=tol)
    int_b = k * linalg.simpson_adaptive(integrand_b, 0.0, t, rel_tol=tol)
    return g_t, int_a, int_b


def expectation_bound(model: PercolationModel, family: str, v, t: float,
                      x=None, G=None, tol: float = 1e-8) -> float:
    """Closed-form upper bound on the matching moment of X_t started from v.

    size/size2/size3 bound E|X|^p; linear and its size-weighted variants
    bound E[|X|^p <1_X, x>]; quadratic and size-quadratic bound
    E[|X|^p <1_X, G 1_X>].  Row sums of xi must be <= 1 and payloads
    nonnegative (the hypotheses under which the bounds hold).
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; pick one of {_FAMILIES}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    _require_row_sums(model.xi)
    v = SubsetState.of(v, model.n)
    k = float(v.size)
    kap = model.kappa
    if family == "size":
        return math.exp(kap * t) * k
    if family == "size2":
        return 2.0 * math.exp(2.0 * kap * t) * k * k
    if family == "size3":
        return 8.0 * math.exp(3.0 * kap * t) * k ** 3
    ind = v.indicator()
    d = model.xi.dense()
    if family in ("linear", "size-linear", "size2-linear"):
        xv = _check_payload(x, "x")
        if xv.shape != (model.n,):
            raise ValueError("x must be a length-n vector")
        if family == "linear":
            return float(ind @ linalg.expm_action(kap * t * d, xv))
        if family == "size-linear":
            y = xv + d @ xv
            return k * math.exp(kap * t) * float(ind @ linalg.expm_action(kap * t * d, y))
        y = xv + d @ xv
        y = y + d @ y
        return 2.0 * k * k * math.exp(2.0 * kap * t) * float(
            ind @ linalg.expm_action(kap * t * d, y))
    Gm = _check_payload(G, "G")
    if Gm.shape != (model.n, model.n):
        raise ValueError("G must be an n x n matrix")
    g_t, int_a, int_b = _quadratic_ingredients(model, Gm, t, tol)
    if family == "quadratic":
        return float(ind @ g_t @ ind) + float(ind @ int_a)
    mid = d @ g_t + g_t @ d.T + g_t
    return k * math.exp(kap * t) * (float(ind @ mid @ ind) + float(ind @ int_b))


def expectation_bound_all(model: PercolationModel, family: str, t: float,
                          x=None, G=None, tol: float = 1e-8) -> np.ndarray:
    """expectation_bound for every subset at once (vector over masks)."""
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; pick one of {_FAMILIES}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    _require_exact(model.n)
    _require_row_sums(model.xi)
    ind, sizes = _lattice(model.n)
    kap = model.kappa
    if family == "size":
        return math.exp(kap * t) * sizes
    if family == "size2":
        return 2.0 * math.exp(2.0 * kap * t) * sizes ** 2
    if family == "size3":
        return 8.0 * math.exp(3.0 * kap * t) * sizes ** 3
    d = model.xi.dense()
    if family in ("linear", "size-linear", "size2-linear"):
        xv = _check_payload(x, "x")
        if family == "linear":
            return ind @ linalg.expm_action(kap * t * d, xv)
        if family == "size-linear":
            y = xv + d @ xv
            return sizes * math.exp(kap * t) * (ind @ linalg.expm_action(kap * t * d, y))
        y = xv + d @ xv
        y = y + d @ y
        return 2.0 * sizes ** 2 * math.exp(2.0 * kap * t) * (
            ind @ linalg.expm_action(kap * t * d, y))
    Gm = _check_payload(G, "G")
    g_t, int_a, int_b = _quadratic_ingredients(model, Gm, t, tol)
    if family == "quadratic":
        return np.einsum("mi,mi->m", ind @ g_t, ind) + ind @ int_a
    mid = d @ g_t + g_t @ d.T + g_t
    return sizes * math.exp(kap * t) * (
        np.einsum("mi,mi->m", ind @ mid, ind) + ind @ int_b)


# ---------------------------------------------------------------------------
# Pointwise generator inequalities (right-hand sides as subset tables)

def lemma_polynomial_rhs(model: PercolationModel, ell: int) -> SubsetFunction:
    """kappa * |v| * ((|v|+1)^ell - |v|^ell)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    _, sizes = _lattice(model.n)
    vals = model.kappa * sizes * ((sizes + 1.0) ** ell - sizes ** ell)
    return SubsetFunction(vals, model.n)


def lemma_linear_rhs(model: PercolationModel, x, ell: int) -> SubsetFunction:
    """kappa (|v|+1)^ell <1_v, xi x> + kappa |v|((|v|+1)^ell - |v|^ell) <1_v, x>."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    xv = _check_payload(x, "x")
    ind, sizes = _lattice(model.n)
    d = model.xi.dense()
    vals = model.kappa * ((sizes + 1.0) ** ell * (ind @ (d @ xv))
                          + sizes * ((sizes + 1.0) ** ell - sizes ** ell) * (ind @ xv))
    return SubsetFunction(vals, model.n)


def lemma_quadratic_rhs(model: PercolationModel, G, ell: int) -> SubsetFunction:
    """The generator bound for <1_v, G 1_v> (ell = 0) or |v| <1_v, G 1_v> (ell = 1)."""
    if ell not in (0, 1):
        raise ValueError("quadratic bound is stated for ell in {0, 1}")
    Gm = _check_payload(G, "G")
    ind, sizes = _lattice(model.n)
    d = model.xi.dense()
    diag_term = ind @ (d @ np.diag(Gm).copy())
    cross = d @ Gm + Gm @ d.T
    cross_term = np.einsum("mi,mi->m", ind @ cross, ind)
    if ell == 0:
        vals = model.kappa * (diag_term + cross_term)
    else:
        quad = np.einsum("mi,mi->m", ind @ Gm, ind)
        vals = model.kappa * ((sizes + 1.0) * (diag_term + cross_term) + sizes * quad)
    return SubsetFunction(vals, model.n)


# ---------------------------------------------------------------------------
# Mean-field reductions

def yule_second_moment(k: int, rate: float, t: float) -> float:
    """Second moment of a pure-birth chain started at k with birth rate rate*j.

    At time t the population is negative binomial with success probability
    p = exp(-rate*t): the value is k(1-p)/p^2 + k^2/p^2, always <= 2 k^2/p^2.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if rate <= 0:
        raise ValueError("rate must be positive")
    p = math.exp(-rate * t)
    return k * (1.0 - p) / p ** 2 + k * k / p ** 2


def mean_field_size_expectation(n: int, kappa: float, k0: int, t: float,
                                power=2, tol: float = 1e-12) -> float:
    """Exact E[f(|X_t|)] under all-to-all coupling 1/(n-1), |X_0| = k0.

    Valid for the exchangeable matrix only: there |X_t| is itself a birth
    chain with rate kappa * k(n-k)/(n-1), so the (n+1)-state chain replaces
    the 2^n subset engine and any n is cheap.  power is an exponent for
    f(k) = k^power, or a callable applied to the size vector 0..n.
    """
    if not (1 <= k0 <= n):
        raise ValueError("need 1 <= k0 <= n")
    ks = np.arange(n + 1, dtype=float)
    birth = kappa * ks * (n - ks) / (n - 1)
    lam = float(birth.max())
    f = np.asarray(power(ks), dtype=float) if callable(power) else ks ** power
    if lam <= 0 or t == 0.0:
        return float(f[k0])
    kmax = linalg.poisson_truncation(lam * t, tol)
    w = linalg.poisson_weights(lam * t, kmax)
    cur = f.copy()
    acc = w[0] * cur
    for m in range(1, kmax + 1):
        nxt = cur + (birth * (np.roll(cur, -1) - cur)) / lam
        nxt[n] = cur[n]  # full state is absorbing
        cur = nxt
        acc = acc + w[m] * cur
    return float(acc[k0])


def save_estimate(est: McEstimate, functional: str, v: SubsetState, t: float, path):
    with open(path, "w") as fh:
        json.dump(est.to_json_dict(functional, v, t), fh, indent=1)
        fh.write("\n")
