"""Dense complex linear-algebra primitives used by every other module.

All matrices are numpy arrays of complex doubles with (row, col) indexing.
Hilbert dimensions in this package are at most 3 (Liouville space at most 9),
so everything here is dense and direct.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NonConvergence, NotHermitian, Overflow

# expm overflows double range once exp(norm) ~ 1e308; stay well below.
EXPM_NORM_BOUND = 700.0

HERMITICITY_TOL = 1e-8


def as_complex_matrix(a) -> np.ndarray:
    """Validate and return a as a square complex matrix with finite entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix entries must be finite")
    return m


@dataclass
class EigenDecomposition:
    """Eigenvalues in canonical order with unit-norm right eigenvectors.

    Canonical order: ascending real part, ties broken by imaginary part.
    Each eigenvector column is normalized and phase-fixed so that its first
    component with non-negligible magnitude is real and positive; this makes
    eigenvector bookkeeping across parameter sweeps deterministic.
    """

    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray


def _fix_phase(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    big = np.nonzero(mags > 1e-12 * mags.max())[0]
    k = big[0] if len(big) else int(np.argmax(mags))
    phase = v[k] / abs(v[k])
    return v / phase


def eig_general(a) -> EigenDecomposition:
    """Eigendecomposition of a general (non-Hermitian) square matrix."""
    m = as_complex_matrix(a)
    try:
        lam, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(
            f"eigensolver failed for matrix with Frobenius norm "
            f"{np.linalg.norm(m):.3e}: {exc}"
        ) from exc
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        col = col / np.linalg.norm(col)
        vecs[:, j] = _fix_phase(col)
    return EigenDecomposition(eigenvalues=lam, right_eigenvectors=vecs)


def kron(a, b) -> np.ndarray:
    """Kronecker product; entry [(i*rb+k),(j*cb+l)] = a[i,j]*b[k,l]."""
    am = np.asarray(a, dtype=complex)
    bm = np.asarray(b, dtype=complex)
    if am.size == 0 or bm.size == 0:
        raise ValueError("kron requires non-empty matrices")
    return np.kron(am, bm)


def expm(a) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade core).

    Raises Overflow when the 1-norm exceeds EXPM_NORM_BOUND, beyond which
    exp() leaves double range for generic matrices.
    """
    m = as_complex_matrix(a)
    norm1 = np.linalg.norm(m, 1)
    if norm1 > EXPM_NORM_BOUND:
        raise Overflow(
            f"matrix 1-norm {norm1:.3e} exceeds safe expm bound {EXPM_NORM_BOUND}"
        )
    return scipy.linalg.expm(m)


def require_hermitian(a, tol: float = HERMITICITY_TOL, what: str = "matrix") -> np.ndarray:
    m = as_complex_matrix(a)
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise NotHermitian(f"{what} deviates from Hermiticity by {dev:.3e} (tol {tol:.1e})")
    return m


def trace_distance(a, b) -> float:
    """Half the trace norm of (a - b); in [0, 1] for density matrices."""
    ma = require_hermitian(a, what="first argument")
    mb = require_hermitian(b, what="second argument")
    if ma.shape != mb.shape:
        raise ValueError(f"shape mismatch {ma.shape} vs {mb.shape}")
    diff = 0.5 * (ma - mb) + 0.5 * (ma - mb).conj().T
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def principal_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in [0, pi/2] between the rays spanned by two vectors."""
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = abs(np.vdot(u, v)) / (nu * nv)
    return float(np.arccos(min(1.0, c)))
