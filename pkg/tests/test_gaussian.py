import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvdisc import ScenarioConfig, build_constellation, fock
from cvdisc.errors import DegenerateScenarioError, ParameterError
from cvdisc.gaussian import (
    HBAR,
    K_B,
    EavesdropperParams,
    SourceChannelParams,
    bose_einstein_occupation,
    compose_source_channel,
    environment_covariance,
    environment_displacement,
    environment_normal_form,
    symplectic_eigenvalues,
    thermal_entropy_g,
    untrusted_noise,
)


def test_compose_identity_channel():
    assert compose_source_channel(SourceChannelParams(1.0, 0.0, 0.3 + 0.2j, 1.7, 5.0)) == (0.3 + 0.2j, 1.7)


def test_compose_blocked_channel():
    zeta, n = compose_source_channel(SourceChannelParams(0.0, 1.0, 0.3 + 0.2j, 1.7, 5.0))
    assert zeta == 0 and n == 5.0


def test_compose_occupation_against_p_representation_sampling():
    p = SourceChannelParams(0.8, 0.6, 0.0, 1.0, 2.0)
    _, n = compose_source_channel(p)
    assert n == pytest.approx(1.36, abs=1e-12)
    # thermal P functions are complex Gaussians with variance n; mix the samples on the splitter
    rng = np.random.default_rng(7)
    m = 400_000
    a = rng.normal(size=(m, 2)) @ [1, 1j] * math.sqrt(p.n0 / 2)
    b = rng.normal(size=(m, 2)) @ [1, 1j] * math.sqrt(p.n_a / 2)
    out = p.t * a + np.conj(p.r) * b
    assert np.mean(np.abs(out) ** 2) == pytest.approx(1.36, rel=5e-3)


def test_compose_semigroup():
    z, n0, na = 0.7 - 0.2j, 0.9, 1.4
    t1, t2 = 0.9, 0.7
    zeta1, n1 = compose_source_channel(SourceChannelParams(t1, math.sqrt(1 - t1**2), z, n0, na))
    zeta2, n2 = compose_source_channel(SourceChannelParams(t2, math.sqrt(1 - t2**2), zeta1, n1, na))
    t = t1 * t2
    zeta3, n3 = compose_source_channel(SourceChannelParams(t, math.sqrt(1 - t**2), z, n0, na))
    assert zeta2 == pytest.approx(zeta3, abs=1e-14)
    assert n2 == pytest.approx(n3, abs=1e-14)


def test_compose_rejects_non_unitary():
    with pytest.raises(ParameterError):
        SourceChannelParams(0.8, 0.7)


def test_untrusted_noise_examples():
    assert untrusted_noise(EavesdropperParams(0.0, 1.0)) == 0.0
    assert untrusted_noise(EavesdropperParams(0.5, 0.0)) == 0.0
    assert untrusted_noise(EavesdropperParams(0.5, 1.0)) == pytest.approx(0.345275, abs=1e-6)


def test_untrusted_noise_matches_purification():
    sc = ScenarioConfig(build_constellation("four-point"), n=0.0, r_E=0.5, mu=1.0)
    rho_b, _ = fock.three_mode_purification_oracle(sc, 0.0, 0.0, n_max=30)
    occ = float(np.real(np.sum(np.arange(31) * np.diag(rho_b.entries))))
    assert occ == pytest.approx(0.345275, abs=1e-6)


def test_normal_form_small_mu_limit():
    # vacuum channel: the environment returns to vacuum
    nf = environment_normal_form(EavesdropperParams(0.5, 1e-6), 0.0)
    assert abs(nf.gamma) < 1e-5
    assert nf.n2 < 1e-6 and nf.n3 < 1e-6
    # thermal channel: the mixed mode keeps the reflected channel noise r_E^2 n
    nf = environment_normal_form(EavesdropperParams(0.5, 1e-6), 0.3)
    assert abs(nf.gamma) < 1e-5
    assert nf.n2 == pytest.approx(0.25 * 0.3, abs=1e-6) and nf.n3 < 1e-6


def test_normal_form_degenerate():
    with pytest.raises(DegenerateScenarioError):
        environment_normal_form(EavesdropperParams(0.0, 0.6), 0.3)
    with pytest.raises(DegenerateScenarioError):
        environment_normal_form(EavesdropperParams(0.5, 0.0), 0.3)


def test_normal_form_entropy_matches_purification():
    sc = ScenarioConfig(build_constellation("four-point"), n=0.3, r_E=0.5, mu=0.6)
    nf = sc.normal_form
    # 12 levels leave a 1.3e-6 squeezing-truncation bias in the oracle; 14 levels give 1.2e-7
    _, rho_e = fock.three_mode_purification_oracle(sc, 0.0, 0.0, n_max=14)
    assert thermal_entropy_g(nf.n2) + thermal_entropy_g(nf.n3) == pytest.approx(
        fock.von_neumann_entropy(rho_e), abs=1e-6)


def test_normal_form_self_consistency():
    nf = environment_normal_form(EavesdropperParams(0.5, 0.6), 0.3)
    assert nf.n2 >= 0 and nf.n3 >= 0
    assert nf.beta2 == pytest.approx(math.log1p(1 / nf.n2))
    assert nf.beta3 == pytest.approx(math.log1p(1 / nf.n3))


def test_displacement_zero_signal():
    d = environment_displacement(1 + 1j, 0.0, EavesdropperParams(0.5, 0.6), 0.1)
    assert d.z2 == 0 and d.z3 == 0


@settings(max_examples=50, deadline=None)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False), st.floats(0, 3),
       st.floats(0.01, 0.99), st.floats(0.01, 2), st.floats(-1, 1))
def test_displacement_hyperbolic_identity(zeta, s, r_e, mu, gamma):
    d = environment_displacement(zeta, s, EavesdropperParams(r_e, mu), gamma)
    want = s**2 * abs(zeta) ** 2 * r_e**2
    assert abs(d.z2) ** 2 - abs(d.z3) ** 2 == pytest.approx(want, abs=1e-9 * (1 + abs(d.z2) ** 2))


def test_displaced_normal_form_spectrum_matches_purification():
    sc = ScenarioConfig(build_constellation("four-point"), n=0.3, r_E=0.5, mu=0.6)
    nf = sc.normal_form
    zeta, s = 0.6 + 0.3j, 1.0
    _, rho_e = fock.three_mode_purification_oracle(sc, zeta, s, n_max=12)
    from cvdisc.validation import displaced_thermal

    n_big = 40
    z = environment_displacement(zeta, s, sc.eavesdropper, nf.gamma)
    analytic = np.kron(displaced_thermal(z.z2, nf.n2, n_big), displaced_thermal(z.z3, nf.n3, n_big))
    w_a = np.sort(np.linalg.eigvalsh(analytic))[::-1][:20]
    w_o = np.sort(np.linalg.eigvalsh(rho_e.entries))[::-1][:20]
    np.testing.assert_allclose(w_a, w_o, atol=1e-6)


def test_thermal_entropy_g():
    assert thermal_entropy_g(0.0) == 0.0
    assert thermal_entropy_g(1.0) == pytest.approx(2 * math.log(2))
    th = fock.thermal_density(0.5, 60)
    assert thermal_entropy_g(0.5) == pytest.approx(fock.von_neumann_entropy(th), abs=1e-8)
    with pytest.raises(ParameterError):
        thermal_entropy_g(-0.1)


def test_bose_einstein():
    T = 300.0
    omega = math.log(2) * K_B * T / HBAR
    assert bose_einstein_occupation(omega, T) == pytest.approx(1.0, abs=1e-12)
    assert bose_einstein_occupation(2e13, 300) == pytest.approx(1.506, abs=1e-3)
    assert bose_einstein_occupation(3e14, 300) == pytest.approx(4.8e-4, rel=2e-2)
    assert bose_einstein_occupation(1e20, 1.0) == 0.0


# ---------------------------------------------------------------- properties

params = st.tuples(st.floats(0.02, 0.98), st.floats(0.02, 2.5), st.floats(0.0, 5.0))


@settings(max_examples=100, deadline=None)
@given(params)
def test_symplectic_eigenvalues_match_normal_form(p):
    r_e, mu, n = p
    e = EavesdropperParams(r_e, mu)
    nf = environment_normal_form(e, n)
    nu = np.sort(symplectic_eigenvalues(environment_covariance(e, n)))
    want = np.sort([2 * nf.n2 + 1, 2 * nf.n3 + 1])
    np.testing.assert_allclose(nu, want, atol=1e-10 * max(1.0, want.max()))


@settings(max_examples=100, deadline=None)
@given(params)
def test_normal_form_is_finite(p):
    nf = environment_normal_form(EavesdropperParams(p[0], p[1]), p[2])
    vals = [nf.n2, nf.n3, nf.gamma, nf.n2 * nf.n3, nf.n2 + nf.n3]
    assert all(math.isfinite(v) for v in vals)
