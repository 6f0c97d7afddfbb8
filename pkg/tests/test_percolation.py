import math

import numpy as np
import pytest
import scipy.linalg

from chaoscope.matrix import InteractionMatrix, SubsetState, build_mean_field
from chaoscope.percolation import (EngineTooLarge, NotApplicable,
                                   PercolationModel, SubsetFunction,
                                   _lattice, exact_expectation,
                                   exact_expectation_all, expectation_bound,
                                   expectation_bound_all, expectation_curve,
                                   fpp_simulate, functional_table,
                                   generator_apply, lemma_linear_rhs,
                                   lemma_polynomial_rhs, lemma_quadratic_rhs,
                                   mc_expectation, mean_field_size_expectation,
                                   simulate, terminal_masks,
                                   yule_second_moment)
from chaoscope.rng import stream

from conftest import random_matrices


def brute_generator(xi, kappa, f):
    """A F by the definition: rate kappa * sum_{i in v} xi_ij for each j outside."""
    n = xi.n
    d = xi.dense()
    out = np.zeros(1 << n)
    for mask in range(1 << n):
        mem = [i for i in range(n) if (mask >> i) & 1]
        for j in range(n):
            if not (mask >> j) & 1:
                rate = kappa * sum(d[i, j] for i in mem)
                out[mask] += rate * (f[mask | (1 << j)] - f[mask])
    return out


def full_rate_matrix(xi, kappa):
    """Dense generator over all 2^n subsets, for the scipy cross-check."""
    n = xi.n
    d = xi.dense()
    size = 1 << n
    q = np.zeros((size, size))
    for mask in range(size):
        mem = [i for i in range(n) if (mask >> i) & 1]
        for j in range(n):
            if not (mask >> j) & 1:
                rate = kappa * sum(d[i, j] for i in mem)
                q[mask, mask | (1 << j)] += rate
                q[mask, mask] -= rate
    return q


def test_generator_matches_definition():
    g = stream(11)
    for xi in random_matrices(8, seed=12, n_lo=2, n_hi=6):
        kappa = float(g.uniform(0.3, 2.0))
        model = PercolationModel(xi, kappa)
        f = g.random(1 << xi.n)
        got = generator_apply(model, SubsetFunction(f, xi.n)).values
        assert np.allclose(got, brute_generator(xi, kappa, f), rtol=1e-12, atol=1e-13)


def test_exact_expectation_matches_scipy_expm():
    g = stream(13)
    for xi in random_matrices(6, seed=14, n_lo=2, n_hi=5):
        kappa = float(g.uniform(0.3, 1.5))
        model = PercolationModel(xi, kappa)
        f = g.random(1 << xi.n)
        q = full_rate_matrix(xi, kappa)
        for t in (0.3, 1.7):
            want = scipy.linalg.expm(t * q) @ f
            got = exact_expectation_all(model, SubsetFunction(f, xi.n), t, tol=1e-12)
            assert np.allclose(got, want, rtol=1e-9, atol=1e-10)


def test_exact_expectation_t0_returns_f():
    xi = build_mean_field(4)
    model = PercolationModel(xi, 1.0)
    f = SubsetFunction(np.arange(16.0), 4)
    assert exact_expectation(model, f, [2], 0.0) == f[0b0100]
    assert np.array_equal(exact_expectation_all(model, f, 0.0), f.values)


def test_single_edge_closed_form(single_edge):
    model = PercolationModel(single_edge, 1.3)
    tab = functional_table("size", single_edge)
    for t in (0.0, 0.25, 1.0, 2.5):
        want = 2.0 - math.exp(-1.3 * 0.7 * t)
        got = exact_expectation(model, tab, [0], t, tol=1e-13)
        assert got == pytest.approx(want, abs=2e-12)


def test_full_set_is_absorbing():
    xi = build_mean_field(3)
    model = PercolationModel(xi, 2.0)
    tab = functional_table("size2", xi)
    got = exact_expectation(model, tab, [0, 1, 2], 5.0, tol=1e-13)
    assert got == pytest.approx(9.0, abs=1e-11)


def test_curve_reuse_and_range_guard():
    xi = build_mean_field(3)
    model = PercolationModel(xi, 1.0)
    tab = functional_table("size", xi)
    curve = expectation_curve(model, tab, 2.0, tol=1e-12)
    for t in (0.0, 0.5, 2.0):
        assert curve.eval(t, 0b001) == pytest.approx(
            exact_expectation(model, tab, [0], t, tol=1e-12), abs=1e-11)
    with pytest.raises(ValueError):
        curve.eval_all(2.5)


def test_engine_size_limit():
    xi = build_mean_field(17)
    with pytest.raises(EngineTooLarge):
        functional_table("size", xi)


def test_trajectory_shape_and_growth(four_cycle):
    model = PercolationModel(four_cycle, 1.0)
    traj = simulate(model, [0], 3.0, seed=4)
    assert traj.members_at(0.0).mask == 0b0001
    masks = [traj.members_at(t).mask for t in (0.0, 0.5, 1.0, 3.0)]
    for earlier, later in zip(masks, masks[1:]):
        assert earlier & later == earlier  # growth is monotone
    assert np.all(np.diff(traj.times) >= 0.0)


def test_fpp_matches_gillespie_on_single_edge(single_edge):
    model = PercolationModel(single_edge, 1.3)
    a = terminal_masks(model, [0], 1.0, reps=200, seed=8, method="gillespie")
    b = terminal_masks(model, [0], 1.0, reps=200, seed=8, method="fpp")
    # one exponential clock each: the two engines draw the same variate
    assert np.array_equal(a, b)


def test_fpp_rejects_asymmetric():
    xi = InteractionMatrix.from_dense(np.array([[0.0, 0.5], [0.25, 0.0]]))
    model = PercolationModel(xi, 1.0)
    with pytest.raises(NotApplicable):
        fpp_simulate(model, [0], 1.0, seed=1)


def test_terminal_masks_thread_invariance(four_cycle):
    model = PercolationModel(four_cycle, 1.0)
    for method in ("gillespie", "fpp"):
        one = terminal_masks(model, [0], 0.8, reps=5000, seed=3,
                             method=method, threads=1)
        many = terminal_masks(model, [0], 0.8, reps=5000, seed=3,
                              method=method, threads=6)
        assert np.array_equal(one, many)


def test_mc_agrees_with_exact(four_cycle):
    model = PercolationModel(four_cycle, 1.0)
    tab = functional_table("size", four_cycle)
    want = exact_expectation(model, tab, [0], 0.8)
    est = mc_expectation(model, "size", [0], 0.8, reps=20000, seed=21)
    assert abs(est.mean - want) <= 4.0 * est.stderr
    assert est.stderr > 0.0


def test_mc_needs_two_reps(four_cycle):
    model = PercolationModel(four_cycle, 1.0)
    with pytest.raises(ValueError):
        mc_expectation(model, "size", [0], 1.0, reps=1, seed=0)


def test_mc_t0_is_exact(four_cycle):
    model = PercolationModel(four_cycle, 1.0)
    est = mc_expectation(model, "size2", [0, 2], 0.0, reps=100, seed=0)
    assert est.mean == 4.0 and est.stderr == 0.0


def test_callable_functional(four_cycle):
    model = PercolationModel(four_cycle, 1.0)

    def biggest(v):
        return float(max(v.sorted_members(), default=0))

    est = mc_expectation(model, biggest, [1], 0.0, reps=50, seed=0)
    assert est.mean == 1.0


def test_lemma_rhs_formulas():
    for xi in random_matrices(4, seed=15, n_lo=2, n_hi=5):
        model = PercolationModel(xi, 0.7)
        ind, sizes = _lattice(xi.n)
        d = xi.dense()
        for ell in (1, 2, 3):
            want = 0.7 * sizes * ((sizes + 1.0) ** ell - sizes ** ell)
            got = lemma_polynomial_rhs(model, ell).values
            assert np.allclose(got, want, rtol=1e-12)
        x = np.abs(stream(16).random(xi.n))
        lin = ind @ x
        xix = ind @ (d @ x)
        for ell in (0, 1, 2):
            want = 0.7 * ((sizes + 1.0) ** ell * xix
                          + sizes * ((sizes + 1.0) ** ell - sizes ** ell) * lin)
            got = lemma_linear_rhs(model, x, ell).values
            assert np.allclose(got, want, rtol=1e-12, atol=1e-14)


def test_lemma_quadratic_rhs_formula():
    g = stream(17)
    for xi in random_matrices(4, seed=18, n_lo=2, n_hi=5):
        d = xi.dense()
        model = PercolationModel(xi, 1.1)
        G = g.random((xi.n, xi.n))
        ind, sizes = _lattice(xi.n)
        diag = ind @ (d @ np.diag(G))
        cross = np.einsum("mi,mi->m", ind @ (d @ G + G @ d.T), ind)
        quad = np.einsum("mi,mi->m", ind @ G, ind)
        want0 = 1.1 * (diag + cross)
        want1 = 1.1 * ((sizes + 1.0) * (diag + cross) + sizes * quad)
        assert np.allclose(lemma_quadratic_rhs(model, G, 0).values, want0, rtol=1e-12)
        assert np.allclose(lemma_quadratic_rhs(model, G, 1).values, want1, rtol=1e-12)


def test_expectation_bound_rejects_invalid_inputs():
    xi = build_mean_field(3)
    model = PercolationModel(xi, 1.0)
    with pytest.raises(ValueError):
        expectation_bound(model, "linear", [0], 1.0, x=np.array([-1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        expectation_bound(model, "nope", [0], 1.0)
    hot = InteractionMatrix.from_dense(np.array([[0.0, 2.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        expectation_bound(PercolationModel(hot, 1.0), "size", [0], 1.0)


def test_expectation_bound_families_closed_forms():
    xi = build_mean_field(4)
    model = PercolationModel(xi, 0.9)
    v = SubsetState.of([0, 1], 4)
    t = 0.6
    assert expectation_bound(model, "size", v, t) == pytest.approx(
        math.exp(0.9 * t) * 2.0, rel=1e-12)
    assert expectation_bound(model, "size2", v, t) == pytest.approx(
        2.0 * math.exp(2 * 0.9 * t) * 4.0, rel=1e-12)
    assert expectation_bound(model, "size3", v, t) == pytest.approx(
        8.0 * math.exp(3 * 0.9 * t) * 8.0, rel=1e-12)
    x = np.full(4, 0.5)
    d = xi.dense()
    e = scipy.linalg.expm(0.9 * t * d)
    ind = v.indicator()
    assert expectation_bound(model, "linear", v, t, x=x) == pytest.approx(
        float(ind @ (e @ x)), rel=1e-10)
    assert expectation_bound(model, "size-linear", v, t, x=x) == pytest.approx(
        2.0 * math.exp(0.9 * t) * float(ind @ (e @ (x + d @ x))), rel=1e-10)
    y = x + d @ x
    assert expectation_bound(model, "size2-linear", v, t, x=x) == pytest.approx(
        2.0 * 4.0 * math.exp(2 * 0.9 * t) * float(ind @ (e @ (y + d @ y))), rel=1e-10)


def test_expectation_bound_quadratic_vs_quadrature():
    g = stream(19)
    xi = random_matrices(1, seed=20, n_lo=4, n_hi=4)[0]
    model = PercolationModel(xi, 0.8)
    G = g.random((4, 4))
    t = 0.7
    d = xi.dense()

    def g_mat(s):
        e = scipy.linalg.expm(0.8 * s * d)
        return e @ G @ e.T

    # quadratic family: <1_v, G_t 1_v> + kappa * int_0^t <1_v, xi e^{kappa(t-s) xi} diag(G_s)> ds
    v = SubsetState.of([0, 2], 4)
    ind = v.indicator()

    def integrand(s):
        return float(ind @ (d @ scipy.linalg.expm(0.8 * (t - s) * d) @ np.diag(g_mat(s))))

    import scipy.integrate
    tail, _ = scipy.integrate.quad(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-12)
    want = float(ind @ g_mat(t) @ ind) + 0.8 * tail
    got = expectation_bound(model, "quadratic", v, t, G=G, tol=1e-10)
    assert got == pytest.approx(want, rel=1e-7)


def test_expectation_bound_all_matches_single():
    xi = random_matrices(1, seed=22, n_lo=3, n_hi=3)[0]
    model = PercolationModel(xi, 1.2)
    g = stream(23)
    x = g.random(3)
    G = g.random((3, 3))
    t = 0.9
    for family in ("size", "size2", "size3", "linear", "size-linear",
                   "size2-linear", "quadratic", "size-quadratic"):
        vec = expectation_bound_all(model, family, t, x=x, G=G)
        for mask in (1, 3, 7):
            v = SubsetState.from_mask(mask, 3)
            single = expectation_bound(model, family, v, t, x=x, G=G)
            assert vec[mask] == pytest.approx(single, rel=1e-9, abs=1e-12)


def test_yule_second_moment_solves_moment_ode():
    # d/dt E[Y^2] = rate * (2 E[Y^2] + E[Y]), E[Y] = k e^{rate t}
    k, rate = 3, 0.8
    for t in (0.1, 0.7, 2.0):
        h = 1e-6
        deriv = (yule_second_moment(k, rate, t + h)
                 - yule_second_moment(k, rate, t - h)) / (2 * h)
        want = rate * (2.0 * yule_second_moment(k, rate, t)
                       + k * math.exp(rate * t))
        assert deriv == pytest.approx(want, rel=1e-5)
    assert yule_second_moment(k, rate, 0.0) == pytest.approx(k * k)


def test_mean_field_size_chain_matches_exact_engine():
    for n in (3, 5, 8):
        xi = build_mean_field(n)
        model = PercolationModel(xi, 1.1)
        tab = functional_table("size2", xi)
        for k0 in (1, 2):
            v = list(range(k0))
            for t in (0.3, 1.5):
                want = exact_expectation(model, tab, v, t, tol=1e-12)
                got = mean_field_size_expectation(n, 1.1, k0, t, power=2)
                assert got == pytest.approx(want, rel=1e-9)


def test_mean_field_size_chain_callable():
    got = mean_field_size_expectation(6, 1.0, 2, 0.8, power=lambda k: k ** 3)
    want = mean_field_size_expectation(6, 1.0, 2, 0.8, power=3)
    assert got == pytest.approx(want, rel=1e-12)


def test_model_validates_kappa():
    xi = build_mean_field(3)
    with pytest.raises(ValueError):
        PercolationModel(xi, 0.0)
