"""Eigen-analysis of the graded evolution operators.

Solves each degree block densely, builds the bi-orthogonal left system,
verifies pairing and (iso)spectral identities, computes the Witten index
and the dynamical partition function, classifies the spectrum type, and
evaluates ground-state observables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .exterior import (
    OperatorBlock,
    d_matrix,
    dual_pairing,
    hodge_star_inverse_matrix,
    hodge_star_matrix,
    interior_matrix,
    multiply_matrix,
    row_to_bra,
)
from .layout import FormVector

UNBROKEN = "unbroken"
BROKEN_REAL = "broken-real"
BROKEN_COMPLEX = "broken-complex"
INDETERMINATE = "indeterminate"

_DEFECTIVE_COND = 1e10


@dataclass
class Tolerances:
    """Numerical thresholds used throughout the spectral pipeline.

    tol_zero is relative to the spectral radius; tol_pair is the pairing
    residual bound; tol_converge is the allowed relative eigenvalue drift
    when the truncation is refined from N to N + 2.
    """

    tol_zero: float = 1e-8
    tol_pair: float = 1e-6
    tol_converge: float = 1e-4

    def __post_init__(self):
        if min(self.tol_zero, self.tol_pair, self.tol_converge) <= 0:
            raise ValueError("all tolerances must be positive")


@dataclass
class EigenSystem:
    """Bi-orthogonal eigendecomposition of one degree block.

    Right vectors are the columns of ``right``; the matching left rows
    (rows of ``left``) satisfy left @ right = identity, so the row
    left[n] is the coefficient functional of the dual bra of state n.
    """

    degree: int
    layout: object
    eigenvalues: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    residual: float = 0.0
    condition: float = 1.0
    near_defective: bool = False

    @property
    def size(self):
        return len(self.eigenvalues)

    @property
    def has_vectors(self):
        return self.right is not None and not self.near_defective

    def right_form(self, n):
        return FormVector(self.degree, self.layout, self.right[:, n].copy())

    def left_bra(self, n):
        """Left functional of state n as a degree D-k form (bra convention)."""
        return row_to_bra(self.left[n], self.degree, self.layout)


def eigensolve(block, vectors=True):
    """Dense bi-orthogonal eigendecomposition of a degree block.

    Eigenvalues sorted by (Re, Im); each right vector's largest-modulus
    entry made real positive; left rows from the inverse of the right
    matrix.  Ill-conditioned eigenbases (condition > 1e10) fall back to a
    Schur decomposition and are flagged near-defective.  With
    ``vectors=False`` only eigenvalues are computed (advection-dominated
    3-D blocks routinely have unusable global eigenbases; use
    :func:`targeted_eigenpair` for individual states there).
    """
    A = block.dense
    if not np.all(np.isfinite(A)):
        raise ValueError("operator block contains non-finite entries")
    if not vectors:
        w = np.linalg.eigvals(A)
        order = np.lexsort((w.imag, w.real))
        return EigenSystem(
            block.k_in, block.layout, w[order], None, None,
            residual=float("nan"), condition=float("nan"),
        )
    w, V = sla.eig(A)
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    for n in range(V.shape[1]):
        j = int(np.argmax(np.abs(V[:, n])))
        phase = V[j, n] / abs(V[j, n])
        V[:, n] = V[:, n] / phase
    cond = float(np.linalg.cond(V))
    if cond > _DEFECTIVE_COND:
        # eigenbasis unusable; report Schur values and an orthonormal basis
        T, Q = sla.schur(A.astype(complex), output="complex")
        w = np.diag(T)
        order = np.lexsort((w.imag, w.real))
        w = w[order]
        return EigenSystem(
            block.k_in, block.layout, w, Q, Q.conj().T,
            residual=float("nan"), condition=cond, near_defective=True,
        )
    L = np.linalg.inv(V)
    residual = float(np.max(np.abs(L @ V - np.eye(len(w)))))
    return EigenSystem(
        block.k_in, block.layout, w, V, L,
        residual=residual, condition=cond,
    )


def spectral_radius(systems):
    return max(
        float(np.max(np.abs(s.eigenvalues))) if s.size else 0.0 for s in systems
    )


def zero_threshold(systems, tol):
    return tol.tol_zero * max(spectral_radius(systems), 1.0)


def zero_modes(systems, tol):
    """Per-degree counts of (numerically) zero eigenvalues vs Betti numbers."""
    thr = zero_threshold(systems, tol)
    counts = [int(np.sum(np.abs(s.eigenvalues) <= thr)) for s in systems]
    D = systems[0].layout.dimension
    betti = [comb(D, k) for k in range(D + 1)]
    return {"counts": counts, "betti": betti, "match": counts == betti}


def witten_index(systems, t_grid):
    """Alternating-trace samples W(t) = sum_k (-1)^k tr exp(-t H^(k))."""
    out = []
    for t in t_grid:
        w = 0.0 + 0.0j
        for s in systems:
            w += (-1) ** s.degree * np.sum(np.exp(-s.eigenvalues * t))
        out.append(complex(w))
    return out


def partition_function(systems, t_grid):
    """Unsigned-trace samples Z(t) = sum_k tr exp(-t H^(k))."""
    out = []
    for t in t_grid:
        z = 0.0 + 0.0j
        for s in systems:
            z += np.sum(np.exp(-s.eigenvalues * t))
        out.append(complex(z))
    return out


def partition_slope(systems, ground_energy, n_samples=25):
    """Large-t log-slope of Z(t), fitted over t in [T, 2T], T = 3/|Re E_g|.

    For an exponentially growing trace the slope converges to -Re of the
    ground eigenvalue.
    """
    re = abs(ground_energy.real)
    T = 3.0 / re if re > 0 else 3.0
    t = np.linspace(T, 2.0 * T, n_samples)
    z = np.array([abs(v) for v in partition_function(systems, t)])
    slope = np.polyfit(t, np.log(z), 1)[0]
    return float(slope), (float(T), float(2 * T))


def pairing_check(systems, tol, converged=None, blocks=None):
    """Verify the boson-fermion pairing of all nonzero eigenvalues.

    For each state with dpsi appreciably nonzero, dpsi must be an
    eigenvector of the next block with the same eigenvalue; otherwise a
    matching eigenvalue must exist one degree down.  Also compares the
    nonzero even- and odd-degree spectra as multisets.  Returns a dict
    with per-state partner records and a list of violations.
    """
    layout = systems[0].layout
    D = layout.dimension
    thr = zero_threshold(systems, tol)
    d_mats = [d_matrix(layout, k).matrix for k in range(D)]
    partners = []
    violations = []
    for k, s in enumerate(systems):
        mask = converged[k] if converged is not None else np.ones(s.size, bool)
        for n in range(s.size):
            lam = s.eigenvalues[n]
            if abs(lam) <= thr or not mask[n]:
                continue
            psi = s.right[:, n]
            if k < D:
                dpsi = d_mats[k] @ psi
                nd = np.linalg.norm(dpsi)
            else:
                nd = 0.0
            if nd > tol.tol_pair:
                if blocks is not None:
                    h_dpsi = blocks[k + 1].matrix @ dpsi
                else:
                    h_dpsi = systems[k + 1].right @ (
                        (systems[k + 1].left @ dpsi) * systems[k + 1].eigenvalues
                    )
                resid = np.linalg.norm(h_dpsi - lam * dpsi) / nd
                if resid <= tol.tol_pair:
                    partners.append((k, n, k + 1, resid))
                else:
                    violations.append((k, n, "d-image not an eigenvector", resid))
            else:
                if k == 0:
                    violations.append((k, n, "d-closed nonzero state in degree 0", nd))
                    continue
                gap = float(np.min(np.abs(systems[k - 1].eigenvalues - lam)))
                if gap <= tol.tol_pair * max(1.0, abs(lam)):
                    partners.append((k, n, k - 1, gap))
                else:
                    violations.append((k, n, "no partner one degree down", gap))
    even = np.concatenate([
        s.eigenvalues[np.abs(s.eigenvalues) > thr]
        for s in systems if s.degree % 2 == 0
    ])
    odd = np.concatenate([
        s.eigenvalues[np.abs(s.eigenvalues) > thr]
        for s in systems if s.degree % 2 == 1
    ])
    multiset_dist = hausdorff_distance(even, odd)
    return {
        "partners": partners,
        "violations": violations,
        "even_odd_distance": multiset_dist,
        "threshold": thr,
    }


def hausdorff_distance(a, b):
    """Hausdorff distance between two finite complex multisets."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if len(a) == 0 or len(b) == 0:
        return 0.0 if len(a) == len(b) else float("inf")
    d_ab = np.max([np.min(np.abs(b - x)) for x in a])
    d_ba = np.max([np.min(np.abs(a - y)) for y in b])
    return float(max(d_ab, d_ba))


def classify(systems, tol, converged=None):
    """Spectrum-type classification of the evolution operator.

    Returns one of "unbroken", "broken-real", "broken-complex" based on
    the converged eigenvalue with the most negative real part, or
    "indeterminate" if that eigenvalue failed the refinement check.
    """
    thr = zero_threshold(systems, tol)
    best = None
    for k, s in enumerate(systems):
        mask = converged[k] if converged is not None else np.ones(s.size, bool)
        for n in range(s.size):
            lam = s.eigenvalues[n]
            if not mask[n]:
                continue
            if best is None or lam.real < best.real:
                best = lam
    if best is None:
        return INDETERMINATE
    if best.real >= -thr:
        return UNBROKEN
    if abs(best.imag) <= thr:
        return BROKEN_REAL
    # conjugate partner must be present for a genuine resonance pair
    partner = min(
        abs(s.eigenvalues - np.conj(best)).min() for s in systems if s.size
    )
    if partner > tol.tol_pair * max(1.0, abs(best)):
        return INDETERMINATE
    return BROKEN_COMPLEX


def ground_state(systems, tol, converged=None):
    """Select the ground state: min Re, then min |Im|, preferring the
    negative-imaginary member of a resonance pair, then max degree, then
    basis index."""
    thr = zero_threshold(systems, tol)
    candidates = []
    for k, s in enumerate(systems):
        mask = converged[k] if converged is not None else np.ones(s.size, bool)
        for n in range(s.size):
            if mask[n]:
                candidates.append((k, n, s.eigenvalues[n]))
    if not candidates:
        raise ValueError("no converged eigenvalues to select a ground state from")
    min_re = min(c[2].real for c in candidates)
    pool = [c for c in candidates if c[2].real <= min_re + thr]
    min_aim = min(abs(c[2].imag) for c in pool)
    pool = [c for c in pool if abs(c[2].imag) <= min_aim + thr]
    min_im = min(c[2].imag for c in pool)
    pool = [c for c in pool if c[2].imag <= min_im + thr]
    pool.sort(key=lambda c: (-c[0], c[1]))
    k, n, lam = pool[0]
    return {"degree": k, "index": n, "energy": lam}


def isospectral_check(H_systems, HT_systems):
    """Per-degree Hausdorff distance between spec H^(k) and spec H_T^(D-k)."""
    D = H_systems[0].layout.dimension
    return [
        hausdorff_distance(H_systems[k].eigenvalues, HT_systems[D - k].eigenvalues)
        for k in range(D + 1)
    ]


def adjoint_check(H_blocks, HT_blocks):
    """Relative residual of H-dagger = star-inverse H_T star per degree."""
    layout = H_blocks.layout
    D = layout.dimension
    out = []
    for k in range(D + 1):
        star = hodge_star_matrix(layout, k).matrix
        star_inv = hodge_star_inverse_matrix(layout, D - k).matrix
        lhs = H_blocks[k].dense.conj().T
        rhs = (star_inv @ HT_blocks[D - k].matrix @ star).toarray()
        out.append(
            float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300))
        )
    return out


def hilbert_metric(system, block):
    """Possibility metric eta making the block pseudo-Hermitian.

    eta = L^H P L with L the left-row matrix and P the permutation pairing
    each eigenvalue with its complex conjugate (identity on real ones).
    Returns (eta, residual) with residual = ||inv(eta) H^H eta - H|| / ||H||.
    """
    if system.near_defective:
        raise ValueError("refusing to build a metric for a near-defective system")
    if system.condition > _DEFECTIVE_COND:
        raise ValueError("eigenbasis too ill-conditioned for a reliable metric")
    w = system.eigenvalues
    n = len(w)
    perm = np.full(n, -1, dtype=int)
    used = np.zeros(n, bool)
    for i in range(n):
        if perm[i] >= 0:
            continue
        cand = np.where(~used)[0]
        j = cand[int(np.argmin(np.abs(w[cand] - np.conj(w[i]))))]
        perm[i], perm[j] = j, i
        used[i] = used[j] = True
    P = np.zeros((n, n))
    P[perm, np.arange(n)] = 1.0
    L = system.left
    eta = L.conj().T @ P @ L
    H = block.dense
    resid = float(
        np.linalg.norm(np.linalg.solve(eta, H.conj().T @ eta) - H)
        / max(np.linalg.norm(H), 1e-300)
    )
    return eta, resid


def targeted_eigenpair(block, sigma, n_candidates=4):
    """Right and left eigenvectors of the eigenvalue nearest ``sigma``.

    Uses sparse shift-inverted Arnoldi on the block and its conjugate
    transpose, so it works on blocks whose global eigenbasis is too
    ill-conditioned to invert.  The left row is normalized so that
    left @ right = 1 (bi-orthogonal convention).

    Returns a dict with keys degree, index (-1: not tied to a dense
    solve), energy, right, left, layout.
    """
    A = block.matrix.tocsc()
    shift = complex(sigma) + 1e-7j
    w, V = spla.eigs(A, k=n_candidates, sigma=shift, which="LM")
    j = int(np.argmin(np.abs(w - sigma)))
    lam, right = w[j], V[:, j]
    wl, Vl = spla.eigs(A.conj().T.tocsc(), k=n_candidates,
                       sigma=np.conj(shift), which="LM")
    jl = int(np.argmin(np.abs(np.conj(wl) - lam)))
    left = Vl[:, jl].conj()
    overlap = left @ right
    if abs(overlap) < 1e-12 * np.linalg.norm(left) * np.linalg.norm(right):
        raise ValueError("left/right eigenvectors nearly orthogonal (defective)")
    left = left / overlap
    jmax = int(np.argmax(np.abs(right)))
    phase = right[jmax] / abs(right[jmax])
    right = right / phase
    left = left * phase
    return {
        "degree": block.k_in, "index": -1, "energy": complex(lam),
        "right": right, "left": left, "layout": block.layout,
    }


# -- ground-state observables --------------------------------------------------


def _ground_vectors(ground, systems):
    """Resolve (right vector, left row, degree, layout) for a ground record."""
    if "right" in ground:
        return ground["right"], ground["left"], ground["degree"], ground["layout"]
    s = systems[ground["degree"]]
    if not s.has_vectors:
        raise ValueError(
            "eigensystem has no usable vectors; use targeted_eigenpair"
        )
    n = ground["index"]
    return s.right[:, n], s.left[n], s.degree, s.layout


def expectation(f, ground, systems=None):
    """Ground-state average of a function via the dual-pairing integral.

    Computes the wedge of the ground bra with f times the ground ket and
    integrates over the torus.  The imaginary part is returned as a
    sanity residual.
    """
    right, left, k, layout = _ground_vectors(ground, systems)
    ket = FormVector(k, layout, right.copy())
    bra = row_to_bra(left, k, layout)
    f_ket = multiply_matrix(f, layout, k).apply(ket)
    val = dual_pairing(bra, f_ket)
    return float(val.real), float(abs(val.imag))


def response(f_field, ground, systems=None):
    """Ground-state matrix element of the d-exact probe [d, iota_f].

    Vanishes on d-symmetric (supersymmetric) ground states; an order-one
    value witnesses spontaneously broken topological supersymmetry.
    """
    right, left, k, layout = _ground_vectors(ground, systems)
    D = layout.dimension
    out = np.zeros_like(right)
    if k < D:
        out += interior_matrix(f_field, layout, k + 1).matrix @ (
            d_matrix(layout, k).matrix @ right
        )
    if k > 0:
        out += d_matrix(layout, k - 1).matrix @ (
            interior_matrix(f_field, layout, k).matrix @ right
        )
    return complex(left @ out)


def correlator(f, g, t_list, ground, systems):
    """Two-point ground-state correlator C(t) = <g| M_f e^{-tH} M_g |g>."""
    s = systems[ground["degree"]]
    n = ground["index"]
    layout = s.layout
    k = s.degree
    Mf = multiply_matrix(f, layout, k).matrix
    Mg = multiply_matrix(g, layout, k).matrix
    psi = s.right[:, n]
    bra = s.left[n]
    v = s.left @ (Mg @ psi)
    u = (bra @ Mf) @ s.right
    return [
        complex(np.sum(u * np.exp(-s.eigenvalues * t) * v)) for t in t_list
    ]


# -- truncation-refinement convergence ----------------------------------------


def convergence_masks(systems, builder, tol, candidates_per_degree=None):
    """Flag eigenvalues reproduced by the refined truncation N + 2.

    ``builder(layout)`` must return SeoBlocks on any layout.  For D <= 2
    the refined blocks are re-solved densely and every eigenvalue is
    checked.  For D = 3 a full dense refined solve is too costly, so only
    the lowest-real-part candidates per degree are checked with a
    shift-inverted sparse eigensolver; all other eigenvalues are left
    flagged unconverged.
    """
    layout = systems[0].layout
    fine = builder(layout.refined(2))
    masks = []
    if layout.dimension <= 2:
        for k, s in enumerate(systems):
            ref = np.linalg.eigvals(fine[k].dense)
            masks.append(_drift_mask(s.eigenvalues, ref, tol))
        return masks
    m = candidates_per_degree or 12
    for k, s in enumerate(systems):
        mask = np.zeros(s.size, bool)
        order = np.argsort(s.eigenvalues.real)
        targets = []
        for n in order:
            lam = s.eigenvalues[n]
            if all(abs(lam - t) > 1e-10 for t in targets):
                targets.append(lam)
            if len(targets) >= m:
                break
        ref = _refined_near(fine[k], targets)
        for n in order[: 4 * m]:
            lam = s.eigenvalues[n]
            if len(ref) and np.min(np.abs(ref - lam)) <= tol.tol_converge * max(
                1.0, abs(lam)
            ):
                mask[n] = True
        masks.append(mask)
    return masks


def _drift_mask(base, refined, tol):
    mask = np.zeros(len(base), bool)
    for n, lam in enumerate(base):
        if np.min(np.abs(refined - lam)) <= tol.tol_converge * max(1.0, abs(lam)):
            mask[n] = True
    return mask


def _refined_near(block, targets, k_each=6):
    """Refined eigenvalues near each shift, via sparse shift-invert."""
    A = block.matrix.tocsc()
    found = []
    for sigma in targets:
        # small imaginary offset keeps the shifted matrix nonsingular
        try:
            w = spla.eigs(
                A, k=k_each, sigma=complex(sigma) + 1e-7j,
                which="LM", return_eigenvectors=False,
            )
            found.extend(w.tolist())
        except (spla.ArpackNoConvergence, RuntimeError):
            continue
    return np.asarray(found)


# -- the full pipeline ---------------------------------------------------------


@dataclass
class SpectralReport:
    """Everything the spectral pipeline knows about one operator family."""

    systems: list = field(repr=False)
    zero_mode_summary: dict = None
    pairing: dict = None
    witten_samples: list = None
    witten_t_grid: list = None
    partition_samples: list = None
    partition_slope: float = None
    classification: str = INDETERMINATE
    ground: dict = None
    converged: list = field(repr=False, default=None)
    tolerances: Tolerances = None
    near_defective: bool = False

    def to_dict(self):
        """JSON-serializable summary (spectra included per degree)."""
        spectra = []
        for k, s in enumerate(self.systems):
            mask = (
                self.converged[k]
                if self.converged is not None
                else np.ones(s.size, bool)
            )
            spectra.append(
                [
                    {
                        "degree": k,
                        "index": n,
                        "re": float(s.eigenvalues[n].real),
                        "im": float(s.eigenvalues[n].imag),
                        "converged": bool(mask[n]),
                    }
                    for n in range(s.size)
                ]
            )
        ground = None
        if self.ground is not None:
            ground = {
                "degree": self.ground["degree"],
                "index": self.ground["index"],
                "re": float(self.ground["energy"].real),
                "im": float(self.ground["energy"].imag),
            }
        return {
            "spectra": spectra,
            "zero_modes": self.zero_mode_summary,
            "pairing_violations": len(self.pairing["violations"])
            if self.pairing
            else None,
            "even_odd_distance": self.pairing["even_odd_distance"]
            if self.pairing
            else None,
            "witten": {
                "t": self.witten_t_grid,
                "w": [[v.real, v.imag] for v in self.witten_samples],
            }
            if self.witten_samples is not None
            else None,
            "partition": {
                "t": self.witten_t_grid,
                "z": [[v.real, v.imag] for v in self.partition_samples],
                "slope": self.partition_slope,
            }
            if self.partition_samples is not None
            else None,
            "classification": self.classification,
            "ground": ground,
            "near_defective": self.near_defective,
            "tolerances": {
                "tol_zero": self.tolerances.tol_zero,
                "tol_pair": self.tolerances.tol_pair,
                "tol_converge": self.tolerances.tol_converge,
            },
        }


def analyze(blocks, builder=None, tol=None, t_grid=(0.1, 1.0, 10.0),
            check_convergence=True, candidates_per_degree=None, vectors=True):
    """Run the full spectral pipeline on a family of degree blocks.

    ``builder(layout) -> SeoBlocks`` re-assembles the same operator on a
    refined layout for the spectral-pollution guard; when omitted the
    convergence check is skipped and every eigenvalue is trusted.  With
    ``vectors=False`` (recommended for 3-D advection-dominated blocks)
    only eigenvalue-based diagnostics are produced and the pairing check
    is limited to the even/odd multiset comparison.
    """
    tol = tol or Tolerances()
    systems = [eigensolve(b, vectors=vectors) for b in blocks]
    near_def = any(s.near_defective for s in systems)
    converged = None
    if check_convergence and builder is not None:
        converged = convergence_masks(systems, builder, tol, candidates_per_degree)
    zm = zero_modes(systems, tol)
    if near_def or not all(s.has_vectors for s in systems):
        pairing = None
    else:
        pairing = pairing_check(systems, tol, converged, blocks)
    w = witten_index(systems, t_grid)
    z = partition_function(systems, t_grid)
    label = classify(systems, tol, converged)
    ground = None
    slope = None
    if label != INDETERMINATE:
        ground = ground_state(systems, tol, converged)
        if label in (BROKEN_REAL, BROKEN_COMPLEX):
            slope, _ = partition_slope(systems, ground["energy"])
    return SpectralReport(
        systems=systems,
        zero_mode_summary=zm,
        pairing=pairing,
        witten_samples=w,
        witten_t_grid=list(t_grid),
        partition_samples=z,
        partition_slope=slope,
        classification=label,
        ground=ground,
        converged=converged,
        tolerances=tol,
        near_defective=near_def,
    )
