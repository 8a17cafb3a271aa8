import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finitemc.errors import (
    CapabilityError,
    InfeasibleProgramError,
    InputDomainError,
    SingularMatrixError,
    UnboundedProgramError,
)
from finitemc.numerics import (
    LinearProgram,
    beta22,
    beta34,
    bisect,
    erlang22,
    gauss_legendre,
    solve_linear,
    solve_lp,
    tabulated_cdf,
    vector_quantile,
)

from oracles import lp_vertex_solve


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def test_gauss_legendre_structure():
    rule = gauss_legendre(4, 6)
    assert rule.nodes.size == 24
    assert rule.order == 24
    assert np.all(np.diff(rule.nodes) > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert rule.nodes[0] > 0.0 and rule.nodes[-1] < 1.0


def test_gauss_legendre_exp_frozen():
    rule = gauss_legendre(8, 12)
    got = rule.integrate(lambda x: np.exp(-2.0 * x))
    assert got == pytest.approx(0.43233235838169365, abs=1e-15)


@given(
    coeffs=st.lists(st.floats(-3, 3), min_size=1, max_size=8),
    panels=st.integers(1, 5),
)
@settings(max_examples=60, deadline=None)
def test_gauss_legendre_polynomial_exactness(coeffs, panels):
    # degree <= 2*points-1 is integrated exactly per panel
    points = max(2, (len(coeffs) + 1) // 2)
    rule = gauss_legendre(panels, points)
    poly = np.polynomial.Polynomial(coeffs)
    exact = sum(c / (k + 1) for k, c in enumerate(coeffs))
    assert rule.integrate(poly) == pytest.approx(exact, abs=1e-12)


def test_gauss_legendre_convergence_order():
    # smooth nonpolynomial integrand; 2-point rule converges at order 4
    exact = math.log(2.0)
    panel_counts = [1, 2, 4, 8, 16]
    errs = [
        abs(gauss_legendre(p, 2).integrate(lambda x: 1.0 / (1.0 + x)) - exact)
        for p in panel_counts
    ]
    slope = np.polyfit(np.log(panel_counts), np.log(errs), 1)[0]
    assert slope < -3.8


def test_integrate_on_interval():
    rule = gauss_legendre(3, 4)
    got = rule.integrate_on(0.2, 0.7, lambda x: x * x)
    assert got == pytest.approx(0.11166666666666664, abs=1e-15)


def test_mapped_degenerate_interval():
    rule = gauss_legendre(2, 3)
    assert rule.integrate_on(0.4, 0.4, lambda x: np.ones_like(x)) == 0.0


def test_gauss_legendre_rejects_bad_args():
    with pytest.raises(InputDomainError):
        gauss_legendre(0, 4)
    with pytest.raises(InputDomainError):
        gauss_legendre(2, 1)
    with pytest.raises(InputDomainError):
        gauss_legendre(2, 17)


# ---------------------------------------------------------------------------
# bisection
# ---------------------------------------------------------------------------


@given(target=st.floats(0.0, 8.0))
@settings(max_examples=50, deadline=None)
def test_bisect_cube_root(target):
    root = bisect(lambda x: x**3, target, 0.0, 2.0, tol=1e-12)
    assert abs(root - target ** (1.0 / 3.0)) <= 1e-12 + 1e-9 * abs(root)


def test_bisect_bracket_violation():
    with pytest.raises(InputDomainError):
        bisect(lambda x: x, 5.0, 0.0, 1.0)


def test_bisect_flat_function():
    # plateau at the target: any point of the bracket is a valid answer
    root = bisect(lambda x: 0.0, 0.0, 0.0, 1.0)
    assert 0.0 <= root <= 1.0


# ---------------------------------------------------------------------------
# distribution families
# ---------------------------------------------------------------------------


def test_erlang_cdf_frozen():
    assert erlang22(1.0).cdf(0.5) == pytest.approx(0.26424111765711533, abs=1e-16)


def test_beta34_cdf_frozen():
    # scale 2 evaluated at 0.25 hits the base value F0(0.5) = 42/64
    assert beta34(2.0).cdf(0.25) == pytest.approx(0.65625, abs=1e-15)


def test_beta22_cdf_frozen():
    assert beta22(1.0).cdf(0.5) == pytest.approx(0.5, abs=1e-15)


def test_cdf_outside_support():
    d = beta22(2.0)
    assert d.cdf(-0.3) == 0.0
    assert d.cdf(0.5) == 1.0
    assert d.cdf(7.0) == 1.0
    assert erlang22(1.0).cdf(np.inf) == 1.0
    assert erlang22(1.0).cdf(-1.0) == 0.0


def test_support_end():
    assert beta22(2.0).support_end == 0.5
    assert beta34(4.0).support_end == 0.25
    assert erlang22(3.0).support_end == math.inf


def test_cdf_vectorized_matches_scalar():
    d = erlang22(2.5)
    xs = np.linspace(0.0, 3.0, 17)
    vec = d.cdf(xs)
    assert vec.shape == xs.shape
    for x, v in zip(xs, vec):
        assert d.cdf(float(x)) == v


@given(
    scale=st.floats(0.1, 10.0),
    x1=st.floats(0.0, 2.0),
    x2=st.floats(0.0, 2.0),
    family=st.sampled_from(["erlang", "b22", "b34"]),
)
@settings(max_examples=80, deadline=None)
def test_cdf_monotone(scale, x1, x2, family):
    d = {"erlang": erlang22, "b22": beta22, "b34": beta34}[family](scale)
    lo, hi = min(x1, x2), max(x1, x2)
    assert d.cdf(lo) <= d.cdf(hi) + 1e-15


def test_erlang_pdf_frozen():
    assert erlang22(3.0).pdf(0.2) == pytest.approx(2.168598325767855, abs=1e-15)


@pytest.mark.parametrize("make", [erlang22, beta22, beta34])
def test_pdf_matches_cdf_difference(make):
    d = make(1.7)
    h = 1e-6
    for x in [0.05, 0.21, 0.4, 0.55]:
        fd = (d.cdf(x + h) - d.cdf(x - h)) / (2.0 * h)
        assert d.pdf(x) == pytest.approx(fd, abs=5e-9)


def test_pdf_prime_matches_pdf_difference():
    d = erlang22(2.0)
    h = 1e-6
    for x in [0.05, 0.25, 0.5, 1.1]:
        fd = (d.pdf(x + h) - d.pdf(x - h)) / (2.0 * h)
        assert d.pdf_prime(x) == pytest.approx(fd, abs=5e-8)
    assert d.pdf_prime(-0.5) == 0.0


def test_declared_derivative_orders():
    with pytest.raises(CapabilityError):
        beta22(1.0).pdf_prime(0.3)
    with pytest.raises(CapabilityError):
        beta34(1.0).pdf_prime(0.3)
    t = tabulated_cdf([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(CapabilityError):
        t.pdf(0.5)


@pytest.mark.parametrize("make,scale", [(erlang22, 1.0), (erlang22, 4.1), (beta22, 2.0), (beta34, 2.0)])
def test_quantile_round_trip(make, scale):
    d = make(scale)
    for p in [0.01, 0.1, 0.37, 0.5, 0.9, 0.999]:
        x = d.quantile(p)
        assert d.cdf(x) == pytest.approx(p, abs=1e-10)


def test_vector_quantile_matches_scalar():
    d = erlang22(4.1)
    ps = np.array([0.001, 0.25, 0.5, 0.75, 0.9999])
    xs = vector_quantile(d, ps)
    for p, x in zip(ps, xs):
        assert abs(x - d.quantile(float(p))) < 1e-10


def test_tabulated_cdf_with_jump():
    # mass 0.3 sits at the first support point; the left limit sees none of it
    t = tabulated_cdf([0.2, 1.0], [0.3, 1.0])
    assert t.cdf(0.2) == pytest.approx(0.3)
    assert t.cdf_left(0.2) == 0.0
    assert t.cdf_left(0.21) > 0.0
    assert t.cdf(0.1) == 0.0
    assert t.cdf(0.6) == pytest.approx(0.3 + 0.7 * 0.5)


def test_continuous_families_have_no_jump():
    d = erlang22(2.0)
    xs = np.array([0.0, 0.3, 1.5])
    assert np.array_equal(d.cdf(xs), d.cdf_left(xs))


def test_family_validation():
    with pytest.raises(InputDomainError):
        erlang22(0.0)
    with pytest.raises(InputDomainError):
        tabulated_cdf([0.5, 0.2], [0.0, 1.0])
    with pytest.raises(InputDomainError):
        tabulated_cdf([0.0, 1.0], [0.4, 0.2])


# ---------------------------------------------------------------------------
# linear solve
# ---------------------------------------------------------------------------


def test_solve_linear_multiply_back():
    rng = np.random.default_rng(7)
    for n in [1, 3, 10, 40]:
        a = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        x = solve_linear(a, b)
        assert np.abs(a @ x - b).max() <= 1e-10 * (1.0 + np.abs(b).max())


def test_solve_linear_singular():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        solve_linear(a, np.array([1.0, 1.0]))
    with pytest.raises(SingularMatrixError):
        solve_linear(np.zeros((2, 2)), np.zeros(2))


def test_solve_linear_shape_checks():
    with pytest.raises(InputDomainError):
        solve_linear(np.ones((2, 3)), np.ones(2))
    with pytest.raises(InputDomainError):
        solve_linear(np.eye(3), np.ones(2))


# ---------------------------------------------------------------------------
# linear programming
# ---------------------------------------------------------------------------


def _minimax_lp():
    # min y subject to y >= a and y >= 1 - a with a in [0,1]; optimum 1/2
    return LinearProgram(
        objective=np.array([1.0, 0.0]),
        rows=np.array([[-1.0, 1.0], [-1.0, -1.0]]),
        rhs=np.array([0.0, -1.0]),
        bounds=((0.0, None), (0.0, 1.0)),
    )


def test_solve_lp_minimax():
    value, x = solve_lp(_minimax_lp())
    assert value == pytest.approx(0.5, abs=1e-9)
    assert x[1] == pytest.approx(0.5, abs=1e-9)


def test_vertex_oracle_minimax():
    value, x = lp_vertex_solve(_minimax_lp())
    assert value == pytest.approx(0.5, abs=1e-12)
    assert x[1] == pytest.approx(0.5, abs=1e-12)


def test_solve_lp_matches_vertex_oracle_random():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(20):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(n, 3 * n + 1))
        lp = LinearProgram(
            objective=rng.standard_normal(n),
            rows=rng.standard_normal((m, n)),
            rhs=rng.uniform(0.5, 2.0, size=m),  # keeps the origin feasible
            bounds=tuple((-2.0, 2.0) for _ in range(n)),
        )
        value, _ = solve_lp(lp)
        ref, _ = lp_vertex_solve(lp)
        assert value == pytest.approx(ref, abs=1e-9)
        checked += 1
    assert checked == 20


def test_solve_lp_infeasible():
    lp = LinearProgram(
        objective=np.array([1.0]),
        rows=np.array([[1.0], [-1.0]]),
        rhs=np.array([-1.0, -1.0]),  # x <= -1 and x >= 1
        bounds=((None, None),),
    )
    with pytest.raises(InfeasibleProgramError):
        solve_lp(lp)


def test_solve_lp_unbounded():
    lp = LinearProgram(
        objective=np.array([-1.0]),
        rows=np.array([[-1.0]]),
        rhs=np.array([0.0]),  # x >= 0, minimize -x
        bounds=((None, None),),
    )
    with pytest.raises(UnboundedProgramError):
        solve_lp(lp)


def test_linear_program_shape_validation():
    with pytest.raises(InputDomainError):
        LinearProgram(
            objective=np.array([1.0, 2.0]),
            rows=np.array([[1.0]]),
            rhs=np.array([0.0]),
            bounds=((0.0, 1.0), (0.0, 1.0)),
        )
    with pytest.raises(InputDomainError):
        LinearProgram(
            objective=np.array([1.0]),
            rows=np.array([[1.0]]),
            rhs=np.array([0.0]),
            bounds=(),
        )
