import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erm_asymptotics.errors import DomainError, ZeroLikelihoodError
from erm_asymptotics.quadrature import label_nodes
from erm_asymptotics.teacher import (
    Continuous,
    Discrete,
    GaussianPrior,
    Linear,
    RectangleDoor,
    Sign,
    SparseBinaryPrior,
    TeacherModel,
    df_out_star,
    df_w_star,
    f_out_star,
    f_w_star,
    label_domain,
    log_z_out_star,
    log_z_w_star,
    sample_labels,
    teacher_from_config,
    teacher_to_config,
    z_out_star,
    z_w_star,
)

CHANNELS = [Sign(0.0), Sign(0.5), Linear(0.0), Linear(0.3), RectangleDoor(-0.6745, 0.6745, 0.0),
            RectangleDoor(-0.2, 1.1, 0.4)]
PRIORS = [GaussianPrior(0.0, 1.0), GaussianPrior(0.3, 2.0), SparseBinaryPrior(0.5), SparseBinaryPrior(0.0)]


# z_out_star ------------------------------------------------------------------


def test_linear_noiseless_density_at_mean():
    for v in (0.3, 1.0, 4.0):
        assert z_out_star(Linear(0.0), 0.7, 0.7, v) == pytest.approx(1 / math.sqrt(2 * math.pi * v), rel=1e-14)


def test_sign_half_at_origin():
    assert z_out_star(Sign(0.0), 1.0, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_sign_against_monte_carlo(oracle):
    o = oracle["z_sign_mc"]
    assert abs(z_out_star(Sign(0.0), o["y"], o["omega"], o["v"]) - o["value"]) < 1e-3


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_z_out_rejects_bad_variance(bad):
    with pytest.raises(DomainError):
        z_out_star(Sign(0.0), 1.0, 0.0, bad)


def test_z_out_rejects_non_finite_field():
    with pytest.raises(DomainError):
        z_out_star(Sign(0.0), 1.0, math.nan, 1.0)


# f_out_star -------------------------------------------------------------------


def test_linear_denoiser_closed_form():
    y, om, v = 0.4, -1.2, 0.9
    assert f_out_star(Linear(0.0), y, om, v) == pytest.approx((y - om) / v, rel=1e-14)


def test_sign_denoiser_at_origin():
    assert f_out_star(Sign(0.0), 1.0, 0.0, 1.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)


def test_sign_denoiser_finite_difference(oracle):
    o = oracle["f_sign_fd"]
    assert abs(f_out_star(Sign(0.0), o["y"], o["omega"], o["v"]) - o["value"]) < 1e-6


def test_zero_likelihood_is_signalled():
    # a noiseless sign teacher never emits a label of 0.5
    with pytest.raises(ZeroLikelihoodError):
        f_out_star(Sign(0.0), 0.5, 0.0, 1.0)


# prior partition functions ------------------------------------------------------


def test_gaussian_z_w_empty_exponent():
    assert z_w_star(GaussianPrior(0.0, 1.0), 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_gaussian_z_w_closed_form():
    mu, s, g, lam = 0.3, 2.0, 0.7, 1.1
    want = math.exp((g * g * s + 2 * g * mu - lam * mu * mu) / (2 * (lam * s + 1))) / math.sqrt(lam * s + 1)
    assert z_w_star(GaussianPrior(mu, s), g, lam) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("rho_s,g,lam", [(0.2, 0.5, 1.0), (0.7, -2.0, 0.1), (0.0, 3.0, 5.0)])
def test_sparse_z_w_closed_form(rho_s, g, lam):
    want = rho_s + math.exp(-lam / 2) * (1 - rho_s) * math.cosh(g)
    assert z_w_star(SparseBinaryPrior(rho_s), g, lam) == pytest.approx(want, rel=1e-13)


def test_gaussian_z_w_against_monte_carlo(oracle):
    o = oracle["z_w_gauss_mc"]
    got = z_w_star(GaussianPrior(o["mean"], o["variance"]), o["gamma"], o["lambda"])
    assert abs(got - o["value"]) < 1e-3


def test_gaussian_f_w_closed_form():
    mu, s, g, lam = 0.3, 2.0, 0.7, 1.1
    assert f_w_star(GaussianPrior(mu, s), g, lam) == pytest.approx((g * s + mu) / (1 + lam * s), rel=1e-14)


def test_sparse_f_w_zero_at_origin():
    assert f_w_star(SparseBinaryPrior(0.4), 0.0, 0.7) == 0.0


def test_sparse_f_w_finite_difference(oracle):
    o = oracle["f_w_sparse_fd"]
    assert abs(f_w_star(SparseBinaryPrior(o["sparsity"]), o["gamma"], o["lambda"]) - o["value"]) < 1e-6


def test_gaussian_integrability_violated():
    with pytest.raises(DomainError):
        z_w_star(GaussianPrior(0.0, 2.0), 0.1, -0.6)


# labels --------------------------------------------------------------------------


def test_sign_labels():
    np.testing.assert_array_equal(sample_labels(Sign(0.0), np.array([-2.0, 0.1, 3.0]), 0), [-1, 1, 1])


def test_door_labels():
    np.testing.assert_array_equal(sample_labels(RectangleDoor(-0.6745, 0.6745, 0.0), np.array([0.0, 1.0]), 0),
                                  [1, -1])


def test_noisy_labels_reproducible():
    a = sample_labels(Sign(1.0), np.array([0.0]), 123)
    b = sample_labels(Sign(1.0), np.array([0.0]), 123)
    assert a.tobytes() == b.tobytes()
    assert a[0] == 1.0 + np.random.default_rng(123).standard_normal(1)[0]


def test_labels_reject_non_finite():
    with pytest.raises(DomainError):
        sample_labels(Sign(0.0), np.array([0.0, math.inf]), 0)


def test_label_domains():
    assert isinstance(label_domain(TeacherModel(Sign(0.0))), Discrete)
    assert isinstance(label_domain(TeacherModel(RectangleDoor())), Discrete)
    assert isinstance(label_domain(TeacherModel(Sign(0.2))), Continuous)


def test_door_requires_ordered_edges():
    with pytest.raises(DomainError):
        RectangleDoor(0.5, 0.5)


def test_rho_is_second_moment():
    assert TeacherModel(prior=GaussianPrior(0.5, 2.0)).rho == pytest.approx(2.25)
    assert TeacherModel(prior=SparseBinaryPrior(0.3)).rho == pytest.approx(0.7)


def test_config_round_trip():
    for ch in CHANNELS:
        for pr in PRIORS:
            t = TeacherModel(ch, pr)
            assert teacher_from_config(teacher_to_config(t)) == t


# properties ------------------------------------------------------------------------


@pytest.mark.parametrize("ch", CHANNELS, ids=repr)
@settings(max_examples=25, deadline=None)
@given(omega=st.floats(-3, 3), v=st.floats(0.05, 3))
def test_channel_normalization(ch, omega, v):
    ys, wy = label_nodes(TeacherModel(ch))
    total = float(np.sum(z_out_star(ch, ys, omega, v) * wy))
    assert abs(total - 1.0) < 1e-9


@pytest.mark.parametrize("ch", CHANNELS, ids=repr)
@settings(max_examples=25, deadline=None)
@given(omega=st.floats(-2, 2), v=st.floats(0.1, 2), u=st.floats(0, 1))
def test_channel_denoisers_match_finite_differences(ch, omega, v, u):
    dom = label_domain(TeacherModel(ch))
    y = (1.0 if u > 0.5 else -1.0) if isinstance(dom, Discrete) else 4.0 * u - 2.0
    h = 1e-6
    lz = lambda w: float(log_z_out_star(ch, y, w, v))  # noqa: E731
    assert abs(f_out_star(ch, y, omega, v) - (lz(omega + h) - lz(omega - h)) / (2 * h)) < 1e-5
    f = lambda w: float(f_out_star(ch, y, w, v))  # noqa: E731
    assert abs(df_out_star(ch, y, omega, v) - (f(omega + h) - f(omega - h)) / (2 * h)) < 1e-5


@pytest.mark.parametrize("pr", PRIORS, ids=repr)
@settings(max_examples=25, deadline=None)
@given(gamma=st.floats(-3, 3), lam=st.floats(0.05, 3))
def test_prior_denoisers_match_finite_differences(pr, gamma, lam):
    h = 1e-6
    lz = lambda g: float(log_z_w_star(pr, g, lam))  # noqa: E731
    assert abs(f_w_star(pr, gamma, lam) - (lz(gamma + h) - lz(gamma - h)) / (2 * h)) < 1e-5
    f = lambda g: float(f_w_star(pr, g, lam))  # noqa: E731
    assert abs(df_w_star(pr, gamma, lam) - (f(gamma + h) - f(gamma - h)) / (2 * h)) < 1e-5


@settings(max_examples=50, deadline=None)
@given(omega=st.floats(-8, 8), v=st.floats(1e-4, 10))
def test_sign_symmetry(omega, v):
    assert z_out_star(Sign(0.0), 1.0, omega, v) == z_out_star(Sign(0.0), -1.0, -omega, v)


@settings(max_examples=50, deadline=None)
@given(gamma=st.floats(-5, 5), lam=st.floats(0, 5))
def test_centred_gaussian_f_w_is_odd(gamma, lam):
    pr = GaussianPrior(0.0, 1.3)
    assert f_w_star(pr, -gamma, lam) == -f_w_star(pr, gamma, lam)


@settings(max_examples=50, deadline=None)
@given(omega=st.floats(-3, 3), v=st.floats(0.05, 3))
def test_one_sided_door_limit(omega, v):
    ch = RectangleDoor(-1e6, 0.6745, 0.0)
    want = 0.5 * (1 + math.erf((0.6745 - omega) / math.sqrt(2 * v)))
    assert abs(z_out_star(ch, 1.0, omega, v) - want) < 1e-10
