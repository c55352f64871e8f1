import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgentangle.errors import (
    InvalidParameter,
    OrderMismatch,
    UnknownMode,
    UnphysicalState,
)
from hgentangle.gaussian import (
    HG01,
    HG10,
    GaussianState,
    ModeLabel,
    SqueezerSpec,
    apply_basis_rotation,
    apply_loss,
    apply_phase,
    apply_squeezed_thermal,
    basis_rotation_matrix,
    db_to_linear,
    quadrature_variance,
    sum_diff_variances,
    symplectic_eigenvalues,
    symplectic_form,
    two_mode_source,
    vacuum,
)

HG00 = ModeLabel("HG00", 0, 0)
VMIN, VMAX = 10 ** -0.4, 10 ** 0.65


def squeezed(s=-4.0, a=6.5, angle=0.0):
    return apply_squeezed_thermal(vacuum([HG10]), "HG10", SqueezerSpec(s, a, angle))


def ideal_chain(offset=0.0, db=4.0):
    st_ = two_mode_source(SqueezerSpec(-db, db, 0.0), SqueezerSpec(-db, db, offset))
    st_ = apply_phase(st_, "HG10", np.pi / 2)
    return apply_basis_rotation(st_, "HG10", "HG01", np.pi / 4)


def beamsplitter_oracle(theta):
    """Symplectic matrix of the passive unitary a' = U a, built in xxpp then reordered."""
    u = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]], dtype=complex)
    s_xxpp = np.block([[u.real, -u.imag], [u.imag, u.real]])
    perm = [0, 2, 1, 3]  # xxpp -> xpxp
    return s_xxpp[np.ix_(perm, perm)]


# -- construction and squeezers ------------------------------------------------


def test_vacuum_is_identity():
    st_ = vacuum([HG10, HG01])
    assert np.array_equal(st_.cov, np.eye(4))
    assert np.allclose(st_.symplectic_eigenvalues(), 1.0)


def test_zero_db_squeezer_is_identity():
    st_ = apply_squeezed_thermal(vacuum([HG10]), "HG10", SqueezerSpec(0.0, 0.0, 0.0))
    assert np.allclose(st_.cov, np.eye(2), atol=1e-15)


def test_paper_squeezer_levels():
    st_ = squeezed()
    assert st_.cov[0, 0] == pytest.approx(0.39810717055, abs=1e-10)
    assert st_.cov[1, 1] == pytest.approx(4.46683592151, abs=1e-10)


def test_physicality_boundary():
    assert SqueezerSpec(-1.7, 1.7, 0.0).problems() == []
    apply_squeezed_thermal(vacuum([HG10]), "HG10", SqueezerSpec(-1.7, 1.7, 0.0))
    with pytest.raises(UnphysicalState):
        apply_squeezed_thermal(vacuum([HG10]), "HG10", SqueezerSpec(-1.8, 1.7, 0.0))


def test_unknown_mode():
    with pytest.raises(UnknownMode):
        apply_phase(vacuum([HG10]), "HG01", 0.3)
    with pytest.raises(UnknownMode):
        sum_diff_variances(vacuum([HG10]), "HG10", "nope", 0.0)


def test_duplicate_modes_rejected():
    with pytest.raises(Exception):
        vacuum([HG10, HG10])


def test_asymmetric_cov_rejected():
    cov = np.eye(2)
    cov[0, 1] = 0.1
    with pytest.raises(Exception):
        GaussianState((HG10,), np.zeros(2), cov)


# -- phase ---------------------------------------------------------------------


def test_phase_identity_and_period():
    st_ = squeezed(angle=0.3)
    assert np.allclose(apply_phase(st_, "HG10", 0.0).cov, st_.cov, atol=0)
    assert np.allclose(apply_phase(st_, "HG10", 2 * np.pi).cov, st_.cov, atol=1e-12)


def test_quarter_phase_swaps_quadratures():
    st_ = apply_phase(squeezed(), "HG10", np.pi / 2)
    assert np.allclose(st_.cov, np.diag([VMAX, VMIN]), atol=1e-12)


# -- basis rotation --------------------------------------------------------------


def test_rotation_identity():
    st_ = ideal_chain()
    assert np.allclose(apply_basis_rotation(st_, "HG10", "HG01", 0.0).cov, st_.cov, atol=1e-15)


def test_rotation_coefficients_at_45_degrees():
    m = basis_rotation_matrix(np.pi / 4)
    assert np.allclose(np.abs(m[0, [0, 2]]), 1 / np.sqrt(2), atol=1e-15)


def test_rotation_order_mismatch():
    st_ = vacuum([HG10, HG00])
    with pytest.raises(OrderMismatch):
        apply_basis_rotation(st_, "HG10", "HG00", 0.1)


@pytest.mark.parametrize("theta", [0.0, 0.3, np.pi / 4, 1.1, np.pi / 2, 2.5])
def test_rotation_matches_beamsplitter_oracle(theta):
    assert np.allclose(basis_rotation_matrix(theta), beamsplitter_oracle(theta), atol=1e-12, rtol=0)


@pytest.mark.parametrize("theta, sign", [(-np.pi / 4, 1), (np.pi / 4, -1)])
def test_rotation_of_x_and_p_squeezers_gives_joint_squeezing(theta, sign):
    """Squeezing x_A and p_B then mixing squeezes x_A' +- x_B' and p_A' -+ p_B'.

    Which sign pair is squeezed depends on the sign of the mixing angle.
    """
    st_ = two_mode_source(SqueezerSpec(-4, 4, 0.0), SqueezerSpec(-4, 4, np.pi / 2))
    st_ = apply_basis_rotation(st_, "HG10", "HG01", theta)
    s = np.array([1, 0, sign, 0]) / np.sqrt(2)
    d = np.array([0, 1, 0, -sign]) / np.sqrt(2)
    m = basis_rotation_matrix(theta)
    src = two_mode_source(SqueezerSpec(-4, 4, 0.0), SqueezerSpec(-4, 4, np.pi / 2)).cov
    assert np.allclose(st_.cov, m @ src @ m.T, atol=1e-12)
    assert s @ st_.cov @ s == pytest.approx(10 ** -0.4, abs=1e-12)
    assert d @ st_.cov @ d == pytest.approx(10 ** -0.4, abs=1e-12)


# -- loss ----------------------------------------------------------------------


def test_loss_endpoints():
    st_ = squeezed()
    assert np.allclose(apply_loss(st_, "HG10", 1.0).cov, st_.cov, atol=0)
    assert np.allclose(apply_loss(st_, "HG10", 0.0).cov, np.eye(2), atol=1e-15)


def test_loss_flipped_mode_example():
    st_ = apply_loss(vacuum([HG10]), "HG10", 1.0)
    st_ = apply_squeezed_thermal(st_, "HG10", SqueezerSpec(10 * np.log10(0.398), 10 * np.log10(1 / 0.398), 0))
    out = apply_loss(st_, "HG10", 2 / np.pi)
    assert out.cov[0, 0] == pytest.approx(2 / np.pi * 0.398 + 1 - 2 / np.pi, abs=1e-12)
    # the quoted 0.6169 is rounded; the formula gives 0.61675
    assert out.cov[0, 0] == pytest.approx(0.6169, abs=2e-4)


@pytest.mark.parametrize("eta", [-0.1, 1.2, np.nan])
def test_loss_range(eta):
    with pytest.raises(InvalidParameter):
        apply_loss(vacuum([HG10]), "HG10", eta)


def test_loss_is_affine_in_eta():
    st_ = squeezed(angle=0.4)
    vals = [apply_loss(st_, "HG10", e).cov[0, 0] for e in (0.2, 0.5, 0.8)]
    assert vals[1] - vals[0] == pytest.approx(vals[2] - vals[1], abs=1e-13)


def test_loss_contracts_towards_vacuum():
    st_ = squeezed()
    prev = st_.cov[1, 1]
    for eta in (0.9, 0.6, 0.3):
        v = apply_loss(st_, "HG10", eta).cov[1, 1]
        assert 1 < v < prev
        prev = v


# -- quadratures ---------------------------------------------------------------


@pytest.mark.parametrize("phi", [0.0, 0.7, 2.0])
def test_vacuum_quadratures(phi):
    st_ = vacuum([HG10, HG01])
    assert quadrature_variance(st_, [1, 0], phi) == pytest.approx(1.0)
    assert quadrature_variance(st_, [1 / np.sqrt(2), 1 / np.sqrt(2)], phi) == pytest.approx(1.0)
    assert sum_diff_variances(st_, "HG10", "HG01", phi) == pytest.approx((1.0, 1.0))


def test_single_mode_quadrature_extremes():
    st_ = squeezed()
    assert quadrature_variance(st_, [1.0], 0.0) == pytest.approx(VMIN, abs=1e-12)
    assert quadrature_variance(st_, [1.0], np.pi / 2) == pytest.approx(VMAX, abs=1e-12)


def test_unnormalized_coefficients_rejected():
    with pytest.raises(InvalidParameter):
        quadrature_variance(vacuum([HG10, HG01]), [1.0, 1.0], 0.0)


def test_ideal_epr_sum_diff():
    vs, vd = sum_diff_variances(ideal_chain(), "HG10", "HG01", 0.0)
    phis = np.linspace(0, np.pi, 721)
    best = min(np.sqrt(np.prod(sum_diff_variances(ideal_chain(), "HG10", "HG01", p))) for p in phis)
    assert best == pytest.approx(10 ** -0.4, abs=1e-9)
    assert min(vs, vd) <= 10 ** -0.4 + 1e-9


def test_phase_error_raises_sum_variance():
    """At the phase that best balances sum and difference, the offset costs squeezing."""
    phis = np.linspace(0, np.pi, 721)

    def best_sum(state):
        vals = [sum_diff_variances(state, "HG10", "HG01", p) for p in phis]
        return min(vals, key=lambda v: v[0] * v[1])[0]

    assert best_sum(ideal_chain(np.pi / 7)) > best_sum(ideal_chain()) + 1e-3


# -- properties ----------------------------------------------------------------

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)
sq_db = st.floats(-8.0, 0.0)
excess_db = st.floats(0.0, 6.0)


@st.composite
def squeezer_specs(draw):
    s = draw(sq_db)
    return SqueezerSpec(s, -s + draw(excess_db), draw(angles))


@st.composite
def physical_states(draw):
    return two_mode_source(draw(squeezer_specs()), draw(squeezer_specs()))


@st.composite
def operations(draw):
    kind = draw(st.sampled_from(["phase", "rotation", "loss", "squeeze"]))
    mode = draw(st.sampled_from(["HG10", "HG01"]))
    if kind == "phase":
        return lambda s: apply_phase(s, mode, draw(angles))
    if kind == "rotation":
        th = draw(angles)
        return lambda s: apply_basis_rotation(s, "HG10", "HG01", th)
    if kind == "loss":
        eta = draw(st.floats(0.0, 1.0))
        return lambda s: apply_loss(s, mode, eta)
    spec = draw(squeezer_specs())
    return lambda s: apply_squeezed_thermal(s, mode, spec)


@settings(max_examples=1000)
@given(physical_states(), st.lists(operations(), min_size=1, max_size=8))
def test_physicality_closed_under_chains(state, ops):
    for op in ops:
        state = op(state)
    assert state.symplectic_eigenvalues().min() >= 1 - 1e-9


@given(physical_states(), angles, angles)
def test_passive_ops_preserve_symplectic_spectrum(state, phi, theta):
    before = np.sort(state.symplectic_eigenvalues())
    after = apply_basis_rotation(apply_phase(state, "HG01", phi), "HG10", "HG01", theta)
    assert np.allclose(np.sort(after.symplectic_eigenvalues()), before, atol=1e-10 * before.max())
    assert np.trace(after.cov) == pytest.approx(np.trace(state.cov), rel=1e-12)


@given(physical_states(), angles)
def test_rotation_equals_oracle_on_states(state, theta):
    s = beamsplitter_oracle(theta)
    out = apply_basis_rotation(state, "HG10", "HG01", theta)
    assert np.allclose(out.cov, s @ state.cov @ s.T, atol=1e-12 * np.abs(state.cov).max())


@given(squeezer_specs(), st.floats(0, 2 * np.pi))
def test_quadrature_periodic_and_extremal_at_angle(spec, phi):
    st_ = apply_squeezed_thermal(vacuum([HG10]), "HG10", spec)
    v = quadrature_variance(st_, [1.0], phi)
    assert quadrature_variance(st_, [1.0], phi + 2 * np.pi) == pytest.approx(v, rel=1e-12)
    assert quadrature_variance(st_, [1.0], spec.squeezing_angle) == pytest.approx(
        db_to_linear(spec.squeezing_dB), rel=1e-12
    )
    assert spec.v_min - 1e-12 <= v <= spec.v_max + 1e-12


def test_symplectic_eigenvalues_of_thermal():
    assert np.allclose(symplectic_eigenvalues(3.0 * np.eye(4)), 3.0)
    om = symplectic_form(2)
    assert np.allclose(om @ om, -np.eye(4))
