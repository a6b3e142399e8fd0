"""Elementary exterior-calculus operators on the truncated basis."""

import numpy as np
import pytest

from sts.exterior import (
    DegreeError,
    codifferential_matrix,
    conv_matrix,
    d_matrix,
    dual_pairing,
    hodge_star_inverse_matrix,
    hodge_star_matrix,
    integrate_top,
    interior_matrix,
    multiply_matrix,
    one_form_wedge_matrix,
    pairing_row,
    row_to_bra,
    wedge_density,
)
from sts.layout import BasisLayout, FormVector
from sts.trig import FlowField, TrigField

LAYOUTS = [BasisLayout(1, 3), BasisLayout(2, 2), BasisLayout(3, 1)]


def random_form(degree, layout, rng):
    v = rng.standard_normal(layout.size(degree)) + 1j * rng.standard_normal(
        layout.size(degree)
    )
    return FormVector(degree, layout, v)


def test_layout_index_bijection():
    lay = BasisLayout(2, 2)
    seen = set()
    for I in lay.multi_indices(1):
        for kappa in lay.modes():
            seen.add(lay.index(I, tuple(kappa)))
    assert seen == set(range(lay.size(1)))


def test_layout_total_size():
    for lay in LAYOUTS:
        D, N = lay.dimension, lay.truncation
        assert lay.total_size() == 2 ** D * (2 * N + 1) ** D


def test_d_on_single_mode_1d():
    lay = BasisLayout(1, 2)
    psi = FormVector.zero(0, lay)
    psi.set_coefficient((), (1,), 1.0)
    out = d_matrix(lay, 0).apply(psi)
    assert out.coefficient((1,), (1,)) == 1j


def test_d_sign_2d():
    # d(e^{i x2} dx1) = -i e^{i x2} dx1^dx2
    lay = BasisLayout(2, 2)
    psi = FormVector.zero(1, lay)
    psi.set_coefficient((1,), (0, 1), 1.0)
    out = d_matrix(lay, 0 + 1).apply(psi)
    assert out.coefficient((1, 2), (0, 1)) == -1j


@pytest.mark.parametrize("lay", LAYOUTS)
def test_d_squared_zero(lay):
    for k in range(lay.dimension - 1):
        m = (d_matrix(lay, k + 1).matrix @ d_matrix(lay, k).matrix)
        assert m.nnz == 0 or abs(m).max() < 1e-14


@pytest.mark.parametrize("lay", LAYOUTS)
def test_codifferential_squared_zero(lay):
    for k in range(2, lay.dimension + 1):
        m = codifferential_matrix(lay, k - 1).matrix @ codifferential_matrix(
            lay, k
        ).matrix
        assert m.nnz == 0 or abs(m).max() < 1e-14


@pytest.mark.parametrize("lay", LAYOUTS)
def test_codifferential_is_adjoint_of_d(lay):
    for k in range(lay.dimension):
        dm = d_matrix(lay, k).dense
        cd = codifferential_matrix(lay, k + 1).dense
        assert np.abs(cd - dm.conj().T).max() < 1e-14


def test_codifferential_1d_mode():
    lay = BasisLayout(1, 2)
    psi = FormVector.zero(1, lay)
    psi.set_coefficient((1,), (1,), 1.0)
    out = codifferential_matrix(lay, 1).apply(psi)
    assert out.coefficient((), (1,)) == -1j


def test_interior_constant_2d():
    lay = BasisLayout(2, 1)
    psi = FormVector.zero(2, lay)
    psi.set_coefficient((1, 2), (0, 0), 1.0)
    out = interior_matrix(FlowField.unit(2, 0), lay, 2).apply(psi)
    assert out.coefficient((2,), (0, 0)) == 1.0
    assert np.count_nonzero(out.coeffs) == 1


def test_interior_convolution_and_truncation():
    # iota_{cos(x) d/dx} (e^{ix} dx) = (e^{2ix} + 1)/2, mode 2 kept iff N >= 2
    G = FlowField([TrigField.cos(1, 0)])
    for N, keep2 in [(2, True), (1, False)]:
        lay = BasisLayout(1, N)
        psi = FormVector.zero(1, lay)
        psi.set_coefficient((1,), (1,), 1.0)
        out = interior_matrix(G, lay, 1).apply(psi)
        assert out.coefficient((), (0,)) == 0.5
        if keep2:
            assert out.coefficient((), (2,)) == 0.5
        else:
            assert np.count_nonzero(out.coeffs) == 1


def test_multiply_identity_and_cos():
    lay = BasisLayout(1, 3)
    one = multiply_matrix(TrigField.constant(1, 1.0), lay, 0).dense
    assert np.abs(one - np.eye(lay.n_modes)).max() == 0.0
    M = conv_matrix(TrigField.cos(1, 0), lay).toarray()
    col = M[:, lay.mode_index((0,))]
    assert col[lay.mode_index((1,))] == 0.5
    assert col[lay.mode_index((-1,))] == 0.5
    assert np.count_nonzero(col) == 2


def test_multiply_matches_grid_product_oracle():
    rng = np.random.default_rng(5)
    f = TrigField.random(1, 2, rng)
    lay = BasisLayout(1, 8)
    psi = FormVector.zero(0, lay)
    # band-limited input so that the product is resolvable at N = 8
    for kappa in range(-6, 7):
        psi.set_coefficient((), (kappa,), rng.standard_normal())
    out = multiply_matrix(f, lay, 0).apply(psi)
    grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)[:, None]
    fx = f.evaluate(grid)
    px = np.array(
        [sum(psi.coefficient((), (k,)) * np.exp(1j * k * g) for k in range(-8, 9))
         for g in grid[:, 0]]
    )
    prod = fx * px
    # transform the grid product back and compare mode by mode
    for kappa in range(-8, 9):
        coeff = np.mean(prod * np.exp(-1j * kappa * grid[:, 0]))
        assert abs(coeff - out.coefficient((), (kappa,))) < 1e-12 * max(
            1.0, abs(coeff)
        )


def test_hodge_star_2d_signs():
    lay = BasisLayout(2, 1)
    dx1 = FormVector.zero(1, lay)
    dx1.set_coefficient((1,), (0, 0), 1.0)
    out = hodge_star_matrix(lay, 1).apply(dx1)
    assert out.coefficient((2,), (0, 0)) == 1.0
    dx2 = FormVector.zero(1, lay)
    dx2.set_coefficient((2,), (0, 0), 1.0)
    out = hodge_star_matrix(lay, 1).apply(dx2)
    assert out.coefficient((1,), (0, 0)) == -1.0


def test_hodge_star_3d():
    lay = BasisLayout(3, 1)
    psi = FormVector.zero(2, lay)
    psi.set_coefficient((1, 2), (0, 0, 0), 1.0)
    out = hodge_star_matrix(lay, 2).apply(psi)
    assert out.coefficient((3,), (0, 0, 0)) == 1.0


@pytest.mark.parametrize("lay", LAYOUTS)
def test_star_star_sign_law(lay):
    D = lay.dimension
    for k in range(D + 1):
        twice = hodge_star_matrix(lay, D - k).matrix @ hodge_star_matrix(
            lay, k
        ).matrix
        sign = (-1) ** (k * (D - k))
        assert abs(twice - sign * np.eye(lay.size(k))).max() < 1e-14
        inv = hodge_star_inverse_matrix(lay, D - k).matrix @ hodge_star_matrix(
            lay, k
        ).matrix
        assert abs(inv - np.eye(lay.size(k))).max() < 1e-14


def test_wedge_identities():
    lay = BasisLayout(1, 3)
    one = FormVector.zero(0, lay)
    one.set_coefficient((), (0,), 1.0)
    p = FormVector.zero(1, lay)
    p.set_coefficient((1,), (0,), 1.0)
    p.set_coefficient((1,), (1,), 0.5)
    p.set_coefficient((1,), (-1,), 0.5)
    top = wedge_density(one, p)
    assert top.coefficient((1,), (0,)) == 1.0
    assert top.coefficient((1,), (1,)) == 0.5

    lay2 = BasisLayout(2, 1)
    a = FormVector.zero(1, lay2)
    a.set_coefficient((1,), (0, 0), 2.0)
    b = FormVector.zero(1, lay2)
    b.set_coefficient((2,), (0, 0), 3.0)
    assert wedge_density(a, b).coefficient((1, 2), (0, 0)) == 6.0
    assert wedge_density(b, a).coefficient((1, 2), (0, 0)) == -6.0


def test_wedge_graded_antisymmetry():
    rng = np.random.default_rng(8)
    lay = BasisLayout(3, 1)
    for p in range(4):
        a = random_form(p, lay, rng)
        b = random_form(3 - p, lay, rng)
        ab = wedge_density(a, b).coeffs
        ba = wedge_density(b, a).coeffs
        assert np.abs(ab - (-1) ** (p * (3 - p)) * ba).max() < 1e-12


def test_integrate_top():
    lay = BasisLayout(2, 1)
    psi = FormVector.zero(2, lay)
    psi.set_coefficient((1, 2), (0, 0), 1.0)
    assert abs(integrate_top(psi) - (2 * np.pi) ** 2) < 1e-12
    psi = FormVector.zero(2, lay)
    psi.set_coefficient((1, 2), (1, 0), 1.0)
    psi.set_coefficient((1, 2), (-1, 0), 1.0)
    assert integrate_top(psi) == 0.0


def test_pairing_row_matches_wedge_integral():
    rng = np.random.default_rng(12)
    for lay in LAYOUTS:
        D = lay.dimension
        for k in range(D + 1):
            bra = random_form(D - k, lay, rng)
            ket = random_form(k, lay, rng)
            direct = dual_pairing(bra, ket)
            row = pairing_row(bra, lay)
            assert abs(direct - row @ ket.coeffs) < 1e-10 * max(1, abs(direct))
            back = row_to_bra(row, k, lay)
            assert np.abs(back.coeffs - bra.coeffs).max() < 1e-12


def test_one_form_wedge_is_leibniz_compatible():
    # (dU) ^ phi = d(U phi) - U d(phi) when no modes overflow the box
    lay = BasisLayout(2, 3)
    U = TrigField.cos(2, 0) + TrigField.sin(2, 1)
    comps = [U.diff(j) for j in range(2)]
    W = one_form_wedge_matrix(comps, lay, 0)
    phi = FormVector.zero(0, lay)
    phi.set_coefficient((), (1, -1), 0.3 + 0.1j)
    phi.set_coefficient((), (-1, 1), 0.3 - 0.1j)
    MU0 = multiply_matrix(U, lay, 0).matrix
    MU1 = multiply_matrix(U, lay, 1).matrix
    d0 = d_matrix(lay, 0).matrix
    lhs = W.apply(phi).coeffs
    rhs = d0 @ (MU0 @ phi.coeffs) - MU1 @ (d0 @ phi.coeffs)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_degree_errors():
    lay = BasisLayout(2, 1)
    with pytest.raises(DegreeError):
        d_matrix(lay, 2)
    with pytest.raises(DegreeError):
        codifferential_matrix(lay, 0)
    with pytest.raises(DegreeError):
        interior_matrix(FlowField.unit(2, 0), lay, 0)


def test_form_reality_defect():
    lay = BasisLayout(1, 2)
    psi = FormVector.zero(1, lay)
    psi.set_coefficient((1,), (1,), 1 + 2j)
    psi.set_coefficient((1,), (-1,), 1 - 2j)
    assert psi.reality_defect() < 1e-15
    psi.set_coefficient((1,), (-1,), 1 + 2j)
    assert psi.reality_defect() > 1.0
