import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import exp1

from yukstripe import kernels as K


def test_kernel_value_examples():
    # |z|_1 = 1 forces e^{-1}/1
    assert K.kernel_value(K.KernelSpec(3, 1.0), (1, 0, 0)) == pytest.approx(math.exp(-1))
    # ln(1) = 0
    assert K.kernel_value(K.KernelSpec(2, 1.0), (0.5, 0.5)) == 0.0
    # |z|_1 = 2
    assert K.kernel_value(K.KernelSpec(4, 1.0), (1, 0.5, 0.25, 0.25)) \
        == pytest.approx(math.exp(-2) / 4)


def test_kernel_value_origin_rejected():
    with pytest.raises(ValueError):
        K.kernel_value(K.KernelSpec(3, 1.0), (0.0, 0.0, 0.0))


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        K.KernelSpec(1, 1.0)
    with pytest.raises(ValueError):
        K.KernelSpec(3, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.permutations([0, 1, 2]),
       st.lists(st.sampled_from([-1.0, 1.0]), min_size=3, max_size=3))
def test_kernel_value_symmetries(z, perm, signs):
    # 1-norm invariance: permutations and sign flips of coordinates
    z = np.asarray(z)
    if np.abs(z).sum() < 1e-9:
        return
    spec = K.KernelSpec(3, 1.3)
    v0 = K.kernel_value(spec, z)
    v1 = K.kernel_value(spec, np.asarray(signs) * z[perm])
    assert v1 == pytest.approx(v0, rel=1e-14)


def test_sliced_kernel_closed_form_values():
    spec = K.KernelSpec(3, 1.0)
    # frozen: 4(e^{-1} - E1(1)); independently checked against 2D adaptive
    # quadrature of the defining double integral (see test_acceptance)
    assert K.sliced_kernel(spec, 1.0) == pytest.approx(0.5939820271036873, abs=1e-12)
    # radial reduction gives 4 * int_0^inf e^{-r} dr
    assert K.sliced_kernel(spec, 0.0) == 4.0
    # large t: e^{-t} C(t) with C -> 0
    big = K.sliced_kernel(spec, 30.0)
    assert 0 < big < math.exp(-30.0)


def test_sliced_kernel_matches_quadrature_d3():
    spec = K.KernelSpec(3, 1.0)
    for t in np.geomspace(1e-3, 20, 12):
        f = lambda r: math.exp(-(t + r)) / (t + r) * r
        ref, _ = integrate.quad(f, 0, np.inf, epsabs=1e-13, limit=200)
        assert K.sliced_kernel(spec, t) == pytest.approx(4 * ref, abs=1e-10)


def test_sliced_kernel_d4_matches_mixture():
    spec = K.KernelSpec(4, 1.0)
    mix = K.mixture_1d(4, 1.0)
    for t in (0.2, 1.0, 3.0):
        assert K.sliced_kernel(spec, t) == pytest.approx(mix.value(t), rel=1e-9)


def test_sliced_kernel_d2_closed_form():
    spec = K.KernelSpec(2, 1.0)
    for t in (0.1, 0.7, 1.5):
        f = lambda u: -math.exp(-(t + u)) * math.log(t + u)
        ref, _ = integrate.quad(f, 0, 40, epsabs=1e-13, limit=400)
        assert K.sliced_kernel(spec, t) == pytest.approx(2 * ref, abs=1e-10)
    # positive near 0, negative in the tail (the log kernel changes sign)
    assert K.sliced_kernel(spec, 0.01) > 0
    assert K.sliced_kernel(spec, 3.0) < 0


def test_mixture_weight_and_value():
    mix = K.mixture_1d(3, 2.0)
    assert mix.weight(4.0) == pytest.approx(4.0 / 16.0)
    # Khat_mu(t) = 4(e^{-mu t}/mu - t E1(mu t))
    t = 0.7
    expect = 4 * (math.exp(-2 * t) / 2 - t * exp1(2 * t))
    assert mix.value(t) == pytest.approx(expect, rel=1e-12)
    assert mix.integrate_quad(lambda lam: math.exp(-lam * t)) \
        == pytest.approx(expect, rel=1e-10)


def test_monotonicity_report_d3():
    spec = K.KernelSpec(3, 1.0)
    rep = K.complete_monotonicity_report(spec, [0.05, 0.3, 1.0, 2.0, 10.0], 6)
    assert rep.all_pass
    # spot values: K'(1) = -4 E1(1), K''(2) = 4 e^{-2}/2
    r1 = next(r for r in rep.rows if r.t == 1.0 and r.n == 1)
    assert r1.value == pytest.approx(-4 * exp1(1.0), rel=1e-13)
    r2 = next(r for r in rep.rows if r.t == 2.0 and r.n == 2)
    assert r2.value == pytest.approx(4 * math.exp(-2) / 2, rel=1e-13)
    # n = 0 is the (positive) kernel itself
    assert all(r.value > 0 for r in rep.rows if r.n == 0)


def test_monotonicity_fd_agrees_with_closed_form():
    spec = K.KernelSpec(3, 1.0)
    for t in (0.5, 1.0, 4.0):
        for n in (1, 2, 3):
            fd = K.sliced_kernel_fd_derivative(spec, t, n)
            cf = K._khat3_derivative(1.0, t, n)
            assert fd == pytest.approx(cf, rel=1e-5)


def test_monotonicity_d4_via_fd():
    rep = K.complete_monotonicity_report(K.KernelSpec(4, 1.0), [0.5, 2.0], 4)
    assert rep.all_pass


def test_monotonicity_rejects_d2():
    with pytest.raises(ValueError):
        K.complete_monotonicity_report(K.KernelSpec(2, 1.0), [1.0], 2)


def test_coupling_examples():
    spec = K.KernelSpec(3, 1.0)
    assert K.coupling_tilde(spec, 0.0) == 0.0
    # closed threshold 2^{d+1}/d!
    assert K.coupling_tilde(spec, math.inf) == pytest.approx(8.0 / 3.0, abs=1e-15)
    assert K.coupling_tilde(K.KernelSpec(4, 1.0), math.inf) == pytest.approx(4.0 / 3.0)
    j1 = K.coupling_tilde(spec, 1.0)
    assert 0 < j1 < 8 / 3


def test_coupling_monotone_and_convergent():
    spec = K.KernelSpec(3, 1.0)
    vals = [K.coupling_tilde(spec, M) for M in (0.5, 1, 2, 4, 8, 16, 30)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(8 / 3, abs=1e-10)


def test_coupling_rejects_infinite_d2():
    with pytest.raises(ValueError):
        K.coupling_tilde(K.KernelSpec(2, 1.0), math.inf)


def test_coupling_requires_unit_mu():
    with pytest.raises(ValueError):
        K.coupling_tilde(K.KernelSpec(3, 2.0), 1.0)


def test_rescaled_kernel_unit_normalization():
    p = K.RescaleParams(M=6.0, d=3, e_star_unrescaled=-1.0, h_star_unrescaled=6.0)
    z = (0.3, 0.2, 0.1)
    assert K.rescaled_kernel_value(p, z) \
        == pytest.approx(K.kernel_value(K.KernelSpec(3, 6.0), z), rel=1e-15)


def test_rescaled_sliced_closed_form():
    p = K.RescaleParams(M=8.0, d=3, e_star_unrescaled=-math.exp(-7),
                        h_star_unrescaled=8.7)
    expect = 4 * math.exp(7) * (math.exp(-8) / 8 - exp1(8.0))
    assert K.rescaled_sliced_kernel(p, 1.0) == pytest.approx(expect, rel=1e-12)


def test_rescaled_coupling_identity(params12, params8):
    # J * (-e*) * M^3 equals the unrescaled coupling window integral
    for p in (params8, params12):
        lhs = K.rescaled_coupling(p) * (-p.e_star_unrescaled) * p.M ** 3
        rhs = K.coupling_tilde(K.KernelSpec(3, 1.0), p.M)
        assert lhs == pytest.approx(rhs, rel=1e-6)


def test_rescaled_coupling_limit_trend():
    import warnings
    from yukstripe.stripes1d import rescale_params_for
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = []
        for M in (6.0, 10.0, 14.0):
            p = rescale_params_for(M)
            vals.append(K.rescaled_coupling(p) * (-p.e_star_unrescaled) * p.M ** 3)
    assert all(abs(v - 8 / 3) > abs(w - 8 / 3) for v, w in zip(vals, vals[1:]))


def test_rescaled_coupling_trivial_scale():
    p = K.RescaleParams(M=1.0, d=3, e_star_unrescaled=-1.0, h_star_unrescaled=1.0)
    assert K.rescaled_coupling(p) \
        == pytest.approx(K.coupling_tilde(K.KernelSpec(3, 1.0), 1.0), rel=1e-9)


def test_kernel_lower_bound_is_identity(params12):
    # with the operational gamma_M the lower bound holds with equality
    rng = np.random.default_rng(7)
    for _ in range(1000):
        z = rng.uniform(-5, 5, size=3)
        r = np.abs(z).sum()
        if not 0 < r <= 5:
            continue
        gap = K.kernel_lower_bound_gap(params12, z)
        scale = K.rescaled_kernel_value(params12, z)
        assert abs(gap) <= 1e-12 * max(scale, 1e-300)


def test_rescale_params_validation():
    with pytest.raises(ValueError):
        K.RescaleParams(M=8.0, d=2, e_star_unrescaled=-0.1, h_star_unrescaled=8.0)
    with pytest.raises(ValueError):
        K.RescaleParams(M=8.0, d=3, e_star_unrescaled=0.1, h_star_unrescaled=8.0)
    with pytest.warns(UserWarning):
        K.RescaleParams(M=8.0, d=3, e_star_unrescaled=-0.5, h_star_unrescaled=16.0)
