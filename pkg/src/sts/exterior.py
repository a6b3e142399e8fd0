"""Elementary operators of the exterior algebra in the truncated basis.

All operators are assembled as sparse complex matrices acting on the flat
coefficient vectors of :class:`~sts.layout.FormVector`.  Composite operators
elsewhere are built as products of these individually projected factors, so
the structural identities (d^2 = 0, adjointness, commutators with d) hold
exactly at finite truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .layout import BasisLayout, FormVector
from .trig import FlowField, TrigField


class DegreeError(ValueError):
    """Raised when an operator is requested outside its degree range."""


@dataclass
class OperatorBlock:
    """A linear map from degree k_in coefficients to degree k_out."""

    k_in: int
    k_out: int
    layout: BasisLayout
    matrix: sp.spmatrix = field(repr=False)

    def __post_init__(self):
        expected = (self.layout.size(self.k_out), self.layout.size(self.k_in))
        if self.matrix.shape != expected:
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match layout "
                f"sizes {expected}"
            )

    @property
    def dense(self):
        return self.matrix.toarray() if sp.issparse(self.matrix) else self.matrix

    def apply(self, form):
        if form.degree != self.k_in or form.layout != self.layout:
            raise ValueError("form does not match operator domain")
        return FormVector(self.k_out, self.layout, self.matrix @ form.coeffs)

    def __matmul__(self, other):
        if isinstance(other, OperatorBlock):
            if other.k_out != self.k_in or other.layout != self.layout:
                raise ValueError("operator degrees do not compose")
            return OperatorBlock(
                other.k_in, self.k_out, self.layout, self.matrix @ other.matrix
            )
        return NotImplemented

    def __add__(self, other):
        if (self.k_in, self.k_out) != (other.k_in, other.k_out):
            raise ValueError("cannot add blocks of different degrees")
        return OperatorBlock(
            self.k_in, self.k_out, self.layout, self.matrix + other.matrix
        )

    def __sub__(self, other):
        return self + (other * -1.0)

    def __mul__(self, scalar):
        return OperatorBlock(self.k_in, self.k_out, self.layout, self.matrix * scalar)

    __rmul__ = __mul__


# -- sign bookkeeping for increasing multi-indices ---------------------------


def insert_sign(axis, multi_index):
    """Sign of dx^axis wedged in front of dx^I, axis not in I."""
    return -1.0 if sum(1 for a in multi_index if a < axis) % 2 else 1.0


def remove_sign(axis, multi_index):
    """Sign of contracting dx^axis out of dx^I, axis in I."""
    return -1.0 if multi_index.index(axis) % 2 else 1.0


def complement_sign(multi_index, dimension):
    """Levi-Civita sign of the permutation (I, complement(I))."""
    comp = tuple(a for a in range(1, dimension + 1) if a not in multi_index)
    perm = multi_index + comp
    sign = 1.0
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign, comp


# -- scalar building blocks ---------------------------------------------------


def diff_matrix(layout, axis):
    """d/dx^axis on one scalar channel: diagonal i*kappa_axis."""
    kappa = layout.modes()[:, axis - 1]
    return sp.diags(1j * kappa.astype(float), format="csr")


def conv_matrix(f, layout):
    """Multiplication by TrigField f on one scalar channel.

    The product is a wavevector convolution sharply truncated to the
    layout box: out(kappa + mu) += f_hat(mu) * in(kappa).
    """
    N, D = layout.truncation, layout.dimension
    modes = layout.modes()
    n = layout.n_modes
    weights = (2 * N + 1) ** np.arange(D - 1, -1, -1)
    flat = (modes + N) @ weights
    rows, cols, vals = [], [], []
    for mu, c in f.coeffs.items():
        target = modes + np.asarray(mu)
        ok = np.all(np.abs(target) <= N, axis=1)
        rows.append(((target[ok] + N) @ weights))
        cols.append(flat[ok])
        vals.append(np.full(int(ok.sum()), c, dtype=complex))
    if not rows:
        return sp.csr_matrix((n, n), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )


def _channel_map(layout, k_in, k_out, entries):
    """Assemble a block from per-channel scalar matrices.

    ``entries`` is a list of (rank_out, rank_in, scalar_matrix) triples.
    """
    n = layout.n_modes
    rows_out = layout.size(k_out)
    cols_in = layout.size(k_in)
    blocks = {}
    for r_out, r_in, mat in entries:
        key = (r_out, r_in)
        blocks[key] = blocks[key] + mat if key in blocks else mat
    out = sp.csr_matrix((rows_out, cols_in), dtype=complex)
    for (r_out, r_in), m in blocks.items():
        pad = sp.coo_matrix(m)
        out = out + sp.csr_matrix(
            (pad.data, (pad.row + r_out * n, pad.col + r_in * n)),
            shape=(rows_out, cols_in),
        )
    return out


# -- the elementary operators -------------------------------------------------


def d_matrix(layout, k):
    """Exterior derivative Omega^k -> Omega^{k+1}; block-diagonal in kappa."""
    if not 0 <= k < layout.dimension:
        raise DegreeError(f"exterior derivative undefined at degree {k}")
    mi_in = layout.multi_indices(k)
    mi_out = layout.multi_indices(k + 1)
    entries = []
    for r_in, I in enumerate(mi_in):
        for axis in range(1, layout.dimension + 1):
            if axis in I:
                continue
            J = tuple(sorted(I + (axis,)))
            r_out = mi_out.index(J)
            entries.append((r_out, r_in, insert_sign(axis, I) * diff_matrix(layout, axis)))
    return OperatorBlock(k, k + 1, layout, _channel_map(layout, k, k + 1, entries))


def codifferential_matrix(layout, k):
    """Euclidean codifferential Omega^k -> Omega^{k-1}: -sum_i iota_i d_i."""
    if not 1 <= k <= layout.dimension:
        raise DegreeError(f"codifferential undefined at degree {k}")
    mi_in = layout.multi_indices(k)
    mi_out = layout.multi_indices(k - 1)
    entries = []
    for r_in, I in enumerate(mi_in):
        for axis in I:
            J = tuple(a for a in I if a != axis)
            r_out = mi_out.index(J)
            entries.append(
                (r_out, r_in, -remove_sign(axis, I) * diff_matrix(layout, axis))
            )
    return OperatorBlock(k, k - 1, layout, _channel_map(layout, k, k - 1, entries))


def multiply_matrix(f, layout, k):
    """Pointwise multiplication by a TrigField, channel-wise convolution."""
    mi = layout.multi_indices(k)
    conv = conv_matrix(f, layout)
    entries = [(r, r, conv) for r in range(len(mi))]
    return OperatorBlock(k, k, layout, _channel_map(layout, k, k, entries))


def interior_matrix(G, layout, k):
    """Interior product with a flow field, Omega^k -> Omega^{k-1}.

    iota_G = sum_i G^i iota_i with the component multiplications realized
    as truncated convolutions.
    """
    if not 1 <= k <= layout.dimension:
        raise DegreeError(f"interior product undefined at degree {k}")
    if G.dimension != layout.dimension:
        raise ValueError("flow dimension does not match layout")
    mi_in = layout.multi_indices(k)
    mi_out = layout.multi_indices(k - 1)
    entries = []
    for r_in, I in enumerate(mi_in):
        for axis in I:
            comp = G[axis - 1]
            if not comp.coeffs:
                continue
            J = tuple(a for a in I if a != axis)
            r_out = mi_out.index(J)
            entries.append(
                (r_out, r_in, remove_sign(axis, I) * conv_matrix(comp, layout))
            )
    return OperatorBlock(k, k - 1, layout, _channel_map(layout, k, k - 1, entries))


def one_form_wedge_matrix(components, layout, k):
    """Exterior multiplication by the 1-form sum_i components[i] dx^i."""
    if not 0 <= k < layout.dimension:
        raise DegreeError(f"wedge by a 1-form undefined at degree {k}")
    mi_in = layout.multi_indices(k)
    mi_out = layout.multi_indices(k + 1)
    entries = []
    for r_in, I in enumerate(mi_in):
        for axis in range(1, layout.dimension + 1):
            comp = components[axis - 1]
            if axis in I or not comp.coeffs:
                continue
            J = tuple(sorted(I + (axis,)))
            r_out = mi_out.index(J)
            entries.append(
                (r_out, r_in, insert_sign(axis, I) * conv_matrix(comp, layout))
            )
    return OperatorBlock(k, k + 1, layout, _channel_map(layout, k, k + 1, entries))


def hodge_star_matrix(layout, k):
    """Euclidean Hodge star Omega^k -> Omega^{D-k}: channel permutation."""
    if not 0 <= k <= layout.dimension:
        raise DegreeError(f"degree {k} outside 0..{layout.dimension}")
    D = layout.dimension
    mi_in = layout.multi_indices(k)
    mi_out = layout.multi_indices(D - k)
    eye = sp.identity(layout.n_modes, dtype=complex, format="csr")
    entries = []
    for r_in, I in enumerate(mi_in):
        sign, comp = complement_sign(I, D)
        r_out = mi_out.index(comp)
        entries.append((r_out, r_in, sign * eye))
    return OperatorBlock(k, D - k, layout, _channel_map(layout, k, D - k, entries))


def hodge_star_inverse_matrix(layout, k):
    """Inverse star Omega^k -> Omega^{D-k}: (-1)^{k(D-k)} times the star."""
    D = layout.dimension
    sign = -1.0 if (k * (D - k)) % 2 else 1.0
    return sign * hodge_star_matrix(layout, k)


# -- pairings ------------------------------------------------------------------


def wedge_density(bra, ket):
    """Top-form density bra ^ ket of complementary-degree forms.

    The convolution is carried without truncation loss: the result lives on
    a layout with doubled bandwidth 2N.
    """
    layout = bra.layout
    if ket.layout != layout:
        raise ValueError("operands live on different layouts")
    D = layout.dimension
    if bra.degree + ket.degree != D:
        raise ValueError(
            f"degrees {bra.degree} + {ket.degree} do not wedge to a top form"
        )
    big = BasisLayout(D, 2 * layout.truncation)
    out = np.zeros(big.n_modes, dtype=complex)
    N = layout.truncation
    modes = layout.modes()
    weights_big = (2 * big.truncation + 1) ** np.arange(D - 1, -1, -1)
    for J in layout.multi_indices(bra.degree):
        sign, I = complement_sign(J, D)
        # dx^J ^ dx^I = sign(J, complement) dx^1..dx^D
        a = bra.component(J)
        b = ket.component(I)
        nz_a = np.nonzero(a)[0]
        for ia in nz_a:
            mu = modes[ia]
            target = ((modes + mu) + big.truncation) @ weights_big
            np.add.at(out, target, sign * a[ia] * b)
    top = FormVector.zero(D, big)
    top.coeffs[:] = out
    return top


def integrate_top(psi):
    """Integral over T^D of a top form: (2 pi)^D times the kappa=0 amplitude."""
    D = psi.layout.dimension
    if psi.degree != D:
        raise ValueError(f"can only integrate top forms, got degree {psi.degree}")
    top_index = psi.layout.index(tuple(range(1, D + 1)), (0,) * D)
    return (2 * np.pi) ** D * psi.coeffs[top_index]


def dual_pairing(bra, ket):
    """The bi-orthogonal pairing integral of bra ^ ket."""
    return integrate_top(wedge_density(bra, ket))


def pairing_row(bra, layout):
    """Row vector r such that r . a equals the pairing of bra with any ket.

    ``bra`` has degree D-k; the row acts on degree-k coefficient vectors of
    the same layout.
    """
    D = layout.dimension
    k = D - bra.degree
    N = layout.n_modes
    row = np.zeros(layout.size(k), dtype=complex)
    vol = (2 * np.pi) ** D
    for r_in, I in enumerate(layout.multi_indices(k)):
        signJ, J = complement_sign(I, D)
        # bra_J(-kappa) pairs with ket_I(kappa); sign of dx^J ^ dx^I
        sign_JI, compJ = complement_sign(J, D)
        assert compJ == I
        comp = bra.component(J)
        row[r_in * N : (r_in + 1) * N] = vol * sign_JI * comp[::-1]
    return row


def row_to_bra(row, degree_ket, layout):
    """Inverse of :func:`pairing_row`: dual-row -> degree D-k bra form."""
    D = layout.dimension
    N = layout.n_modes
    vol = (2 * np.pi) ** D
    bra = FormVector.zero(D - degree_ket, layout)
    for r_in, I in enumerate(layout.multi_indices(degree_ket)):
        _, J = complement_sign(I, D)
        sign_JI, _ = complement_sign(J, D)
        bra.component(J)[:] = row[r_in * N : (r_in + 1) * N][::-1] / (vol * sign_JI)
    return bra
