"""Symplectic and complex linear algebra over R^{2n} identified with C^n.

Conventions used throughout the package:

* points are ordered ``(x_1 .. x_n, y_1 .. y_n)``,
* the standard form matrix is ``Omega = [[0, -I], [I, 0]]``, which is also
  the matrix of multiplication by ``i``,
* the complex identification is ``z = x + i y``; a complex-linear map
  ``X + iY`` acts on real coordinates as the block matrix
  ``[[X, -Y], [Y, X]]``.

Angles returned by the pointwise phase maps are principal values in
``(-pi, pi]``; lifted rotation numbers (module :mod:`ruelle.paths`) are
measured in full turns.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    AmbiguousSpectrum,
    IllConditioned,
    NonSymplecticInput,
    NotUnitary,
    SingularP,
)

TOL_SYMP = 1e-10
TOL_RECON = 1e-9
TOL_EIG = 1e-8
COND_LIMIT = 1e14


def omega(n):
    """Matrix of the standard symplectic structure on R^{2n} (= mult. by i)."""
    out = np.zeros((2 * n, 2 * n))
    out[:n, n:] = -np.eye(n)
    out[n:, :n] = np.eye(n)
    return out


def symplectic_defect(A):
    """Max-norm of ``A Omega A^T - Omega``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    O = omega(n)
    return float(np.max(np.abs(A @ O @ A.T - O)))


def check_symplectic(A, tol=TOL_SYMP):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise NonSymplecticInput(f"expected a 2n x 2n matrix, got shape {A.shape}")
    defect = symplectic_defect(A)
    if defect > tol:
        raise NonSymplecticInput(f"symplectic defect {defect:.3e} exceeds tol {tol:.1e}")
    if np.linalg.det(A) <= 0:
        raise NonSymplecticInput("matrix has non-positive determinant")
    return A


def lie_algebra_defect(A):
    """Max-norm of ``A Omega + Omega A^T`` (membership in sp(2n))."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    O = omega(n)
    return float(np.max(np.abs(A @ O + O @ A.T)))


def random_symplectic(n, rng, scale=1.0):
    """Random element of Sp(2n): the exponential of Omega*S for symmetric S."""
    S = rng.standard_normal((2 * n, 2 * n))
    S = (S + S.T) / 2
    return scipy.linalg.expm(scale * omega(n) @ S)


def complex_blocks(M, tol=None):
    """Interpret a complex-linear real matrix as an n x n complex matrix.

    ``M`` must have the block structure ``[[X, -Y], [Y, X]]``; the structural
    defect beyond ``tol`` raises :class:`NotUnitary`.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0] // 2
    defect = max(
        np.max(np.abs(M[:n, :n] - M[n:, n:])),
        np.max(np.abs(M[:n, n:] + M[n:, :n])),
    )
    if tol is not None and defect > tol:
        raise NotUnitary(f"block structure defect {defect:.3e} exceeds tol {tol:.1e}")
    return M[:n, :n] + 1j * M[n:, :n]


def real_from_complex(C):
    """Real 2n x 2n representation of an n x n complex matrix."""
    C = np.asarray(C, dtype=complex)
    X, Y = C.real, C.imag
    return np.block([[X, -Y], [Y, X]])


def complex_linear_part(A):
    """The complex-linear part (A - Omega A Omega)/2 of A, as a complex matrix.

    For symplectic ``A = U P`` the complex determinant of this matrix has the
    same argument as ``det_C`` of the unitary polar factor ``U``, because the
    complex-linear part of ``P`` is Hermitian positive definite.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    X = (A[:n, :n] + A[n:, n:]) / 2
    Y = (A[n:, :n] - A[:n, n:]) / 2
    return X + 1j * Y


class PolarPair(NamedTuple):
    unitary: np.ndarray
    positive: np.ndarray


def polar_decompose(A, tol_symp=TOL_SYMP):
    """Polar decomposition ``A = U P`` of a symplectic matrix.

    ``P = (A^T A)^{1/2}`` is computed through the symmetric eigendecomposition
    of ``A^T A`` and ``U = A P^{-1}``.  ``U`` lies in O(2n) ∩ Sp(2n) and ``P``
    is symmetric positive definite symplectic.

    Raises
    ------
    NonSymplecticInput
        if ``A`` is not symplectic to ``tol_symp``.
    IllConditioned
        if ``cond(A^T A)`` exceeds ``1e14`` (the unitary part is unreliable).
    """
    A = check_symplectic(A, tol_symp)
    w, V = np.linalg.eigh(A.T @ A)
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        raise IllConditioned(f"cond(A^T A) = {w[-1] / max(w[0], 1e-300):.3e}")
    sq = np.sqrt(w)
    P = (V * sq) @ V.T
    U = A @ ((V / sq) @ V.T)
    return PolarPair(U, P)


def complex_determinant_phase(U, tol=1e-8):
    """Argument of ``det_C(X + iY)`` for an orthogonal-symplectic ``U``.

    The default tolerance is loose enough to absorb roundoff accumulated by
    upstream factorizations; pass a tighter one for direct checks.
    """
    U = np.asarray(U, dtype=float)
    if np.max(np.abs(U.T @ U - np.eye(U.shape[0]))) > tol:
        raise NotUnitary("matrix is not orthogonal to tolerance")
    C = complex_blocks(U, tol=tol)
    d = np.linalg.det(C)
    if abs(abs(d) - 1.0) > 1e-9:
        raise NotUnitary(f"|det_C| = {abs(d):.12f} deviates from 1")
    return float(np.angle(d))


def polar_phase(A):
    """Phase of ``det_C`` of the unitary polar factor, without factorizing.

    Equal to ``complex_determinant_phase(polar_decompose(A).unitary)`` for
    symplectic ``A``; computed directly as the argument of the complex
    determinant of the complex-linear part of ``A``.
    """
    d = np.linalg.det(complex_linear_part(A))
    return float(np.angle(d))


def solve_lyapunov(P, S):
    """Solve ``M P + P M = 2 S`` for symmetric positive definite ``P``.

    Solved entrywise in the eigenbasis of ``P``; equals the integral
    ``int_0^inf exp(-Ps) (2S) exp(-Ps) ds``.  The solution is antisymmetric
    whenever ``S`` is.
    """
    P = np.asarray(P, dtype=float)
    S = np.asarray(S, dtype=float)
    w, Q = np.linalg.eigh((P + P.T) / 2)
    if w[0] <= 0:
        raise SingularP(f"min eigenvalue of P is {w[0]:.3e}")
    St = Q.T @ S @ Q
    Mt = 2.0 * St / np.add.outer(w, w)
    return Q @ Mt @ Q.T


def polar_derivative(A, direction, tol_symp=TOL_SYMP):
    """Derivative of the unitary polar factor at ``A`` along ``direction``.

    With ``A = U P`` and ``B = U^T direction``, returns ``U M`` where ``M``
    solves the Lyapunov equation ``M P + P M = B - B^T``.  Symmetric
    directions (``U p(n)``) are in the kernel.
    """
    U, P = polar_decompose(A, tol_symp)
    B = U.T @ np.asarray(direction, dtype=float)
    M = solve_lyapunov(P, (B - B.T) / 2)
    return U @ M


def _spectrum_classes(evals, tol):
    """Indices of unit-circle (non-real) and negative-real eigenvalues."""
    on_circle = frozenset(
        int(i)
        for i, lam in enumerate(evals)
        if abs(abs(lam) - 1.0) <= tol and abs(lam.imag) > tol
    )
    negative = frozenset(
        int(i)
        for i, lam in enumerate(evals)
        if abs(lam.imag) <= tol and lam.real < 0
    )
    return on_circle, negative


def _principal(angle):
    a = np.remainder(angle + np.pi, 2 * np.pi) - np.pi
    if a <= -np.pi + 1e-15:
        a += 2 * np.pi
    return float(a)


def krein_positive_count(A, lam, radius=1e-6):
    """Number of positive eigenvalues of the form Im w(v, conj(w)) on V(lam).

    ``V(lam)`` is the generalized eigenspace, spanned by Schur vectors of the
    eigenvalue cluster within ``radius`` of ``lam``; the count is taken over
    a real basis of the underlying real vector space.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    T, Z, sdim = scipy.linalg.schur(
        A.astype(complex), output="complex", sort=lambda t: abs(t - lam) <= radius
    )
    if sdim == 0:
        return 0, 0
    B = Z[:, :sdim]
    E = np.hstack([B, 1j * B])
    form = -omega(n)  # matrix of the symplectic form as a bilinear pairing
    G = (E.T @ form @ E.conj()).imag
    G = (G + G.T) / 2
    gw = np.linalg.eigvalsh(G)
    thresh = 1e-12 * max(1.0, float(np.max(np.abs(gw))) if gw.size else 1.0)
    return int(np.sum(gw > thresh)), 2 * sdim


def eigenvalue_quasimorphism_base(A, tol_eig=TOL_EIG):
    """Phase of the spectral rotation map e(A), a principal angle.

    The value is ``arg`` of ``(-1)^{n(A)/2} prod lam^{m(A,lam)/2}`` taken over
    unit-circle eigenvalues ``lam`` distinct from +-1, where ``m(A, lam)`` is
    the Krein-positive dimension on the generalized eigenspace and ``n(A)``
    the total multiplicity of negative real eigenvalues.  Matrices with no
    relevant eigenvalues (e.g. unipotent or positive hyperbolic) give 0.

    Raises
    ------
    AmbiguousSpectrum
        if the unit-circle/real classification changes when the tolerance is
        halved; the caller should perturb the input or skip the sample.
    """
    A = check_symplectic(A)
    evals = np.linalg.eigvals(A)
    cls = _spectrum_classes(evals, tol_eig)
    if cls != _spectrum_classes(evals, tol_eig / 2):
        raise AmbiguousSpectrum(
            "eigenvalue classification is unstable under tolerance halving"
        )
    on_circle, negative = cls

    angle = np.pi * ((len(negative) // 2) % 2)

    # Group unit-circle eigenvalues into clusters; each cluster is handled by
    # its Schur invariant subspace, so multiplicities need no eigenvectors.
    remaining = sorted(on_circle, key=lambda i: np.angle(evals[i]))
    radius = max(10 * tol_eig, 1e-7)
    visited = np.zeros(len(evals), dtype=bool)
    for i in remaining:
        if visited[i]:
            continue
        lam = evals[i]
        cluster = [j for j in remaining if abs(evals[j] - lam) <= radius]
        for j in cluster:
            visited[j] = True
        lam_rep = np.mean([evals[j] for j in cluster])
        m, _ = krein_positive_count(A, lam_rep, radius=radius)
        angle += (m / 2) * np.angle(lam_rep)
    return _principal(angle)


def complex_trace(M):
    """Complex trace of a complex-linear real matrix (no structure check)."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0] // 2
    return complex(np.trace(M[:n, :n] + 1j * M[n:, :n]))
