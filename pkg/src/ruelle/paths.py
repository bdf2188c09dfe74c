"""Sampled symplectic paths, lifted rotation numbers and index calculus.

A path is a finite list of time samples of matrices in Sp(2n) starting at
the identity.  Lifts to the universal cover are realized by unwrapping the
phase of the complex determinant of the unitary polar part across samples;
the sampling contract is that consecutive phase jumps stay below a quarter
turn, otherwise the lift is ambiguous and :class:`UndersampledPath` is
raised.  All lifted values are in full turns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import symplin
from .errors import (
    AmbiguousSpectrum,
    DegenerateA,
    NonIntegralLift,
    NotALoop,
    PersistentDegeneracy,
    SpectralRadiusTooLarge,
    UndersampledPath,
    UnknownBlockType,
)

MAX_PHASE_JUMP = np.pi / 2


@dataclass(frozen=True)
class SymplecticPath:
    """Time-sampled path [0, T] -> Sp(2n) with t0 = 0 and M0 = I."""

    n: int
    times: np.ndarray
    frames: np.ndarray
    kind: str = "general"  # diagonal-unitary | unipotent | general

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        frames = np.asarray(self.frames, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "frames", frames)
        if times.ndim != 1 or frames.shape != (len(times), 2 * self.n, 2 * self.n):
            raise ValueError("inconsistent sample shapes")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if np.max(np.abs(frames[0] - np.eye(2 * self.n))) > 1e-9:
            raise ValueError("path must start at the identity")

    @property
    def endpoint(self):
        return self.frames[-1]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class LiftedAngle:
    """A lifted rotation number in full turns.

    ``defect_budget`` records the largest consecutive phase jump (in turns)
    consumed by the lift; values close to 0.25 signal marginal sampling.
    """

    value: float
    method: str
    defect_budget: float


def path_from_matrices(times, frames, kind="general", tol=1e-8):
    frames = np.asarray(frames, dtype=float)
    n = frames.shape[-1] // 2
    for M in frames[:: max(1, len(frames) // 16)]:
        symplin.check_symplectic(M, tol)
    return SymplecticPath(n=n, times=np.asarray(times, dtype=float), frames=frames, kind=kind)


def rotation_path(rates, T=1.0, num=None):
    """Diagonal-unitary path with constant angle rates (turns per unit time)."""
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    n = len(rates)
    if num is None:
        num = max(64, int(16 * T * (np.sum(np.abs(rates)) + 1)))
    times = np.linspace(0.0, T, num)
    phases = 2 * np.pi * np.outer(times, rates)
    frames = np.zeros((num, 2 * n, 2 * n))
    c, s = np.cos(phases), np.sin(phases)
    for j in range(n):
        frames[:, j, j] = c[:, j]
        frames[:, j, n + j] = -s[:, j]
        frames[:, n + j, j] = s[:, j]
        frames[:, n + j, n + j] = c[:, j]
    return SymplecticPath(n=n, times=times, frames=frames, kind="diagonal-unitary")


def generator_path(X, T=1.0, num=256, kind="general"):
    """Path t -> expm(t X) for a fixed Lie-algebra element X in sp(2n)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0] // 2
    w, V = np.linalg.eig(X.astype(complex))
    Vinv = np.linalg.inv(V)
    times = np.linspace(0.0, T, num)
    frames = np.einsum("ij,tj,jk->tik", V, np.exp(np.outer(times, w)), Vinv).real
    return SymplecticPath(n=n, times=times, frames=frames, kind=kind)


def concatenate(first, second):
    """Path traversing ``first`` then ``second`` translated by the endpoint."""
    if first.n != second.n:
        raise ValueError("dimension mismatch")
    E = first.endpoint
    times = np.concatenate([first.times, first.times[-1] + second.times[1:]])
    frames = np.concatenate([first.frames, second.frames[1:] @ E])
    return SymplecticPath(n=first.n, times=times, frames=frames)


def path_power(path, k):
    """The path iterated ``k`` times by endpoint translation."""
    E = path.endpoint
    blocks = [path.frames]
    times = [path.times]
    Ej = np.eye(2 * path.n)
    for j in range(1, k):
        Ej = E @ Ej
        blocks.append(path.frames[1:] @ Ej)
        times.append(j * path.times[-1] + path.times[1:])
    return SymplecticPath(
        n=path.n, times=np.concatenate(times), frames=np.concatenate(blocks), kind=path.kind
    )


def _unwrap_turns(phases, method):
    dphi = np.diff(phases)
    dphi -= 2 * np.pi * np.round(dphi / (2 * np.pi))
    worst = float(np.max(np.abs(dphi))) if len(dphi) else 0.0
    if worst >= MAX_PHASE_JUMP:
        raise UndersampledPath(
            f"consecutive phase jump {worst:.3f} rad >= pi/2; refine the sampling"
        )
    return float(np.sum(dphi) / (2 * np.pi)), worst / (2 * np.pi), np.cumsum(dphi) / (2 * np.pi)


def _det_phases(path):
    return np.array([symplin.polar_phase(M) for M in path.frames])


def lift_rotation(path, _cumulative=False):
    """Lift of det_C of the unitary polar part along the path, in turns.

    The phase at each sample is the argument of the complex determinant of
    the complex-linear part of the frame, which coincides with det_C of the
    unitary polar factor (see :func:`ruelle.symplin.polar_phase`); increments
    are unwrapped to the principal branch.
    """
    value, worst, cum = _unwrap_turns(_det_phases(path), "determinant")
    angle = LiftedAngle(value=value, method="determinant", defect_budget=worst)
    if _cumulative:
        return angle, np.concatenate([[0.0], cum])
    return angle


def lift_eigenvalue_rotation(path, tol_eig=symplin.TOL_EIG, _cumulative=False):
    """Lift of the spectral rotation map e along the path, in turns.

    Samples with an ambiguous spectral classification are skipped and the
    lift is unwrapped across the gap; more than 10% ambiguous samples raise
    :class:`PersistentDegeneracy`.
    """
    phases = []
    valid = []
    for i, M in enumerate(path.frames):
        try:
            phases.append(symplin.eigenvalue_quasimorphism_base(M, tol_eig))
            valid.append(i)
        except AmbiguousSpectrum:
            continue
    if len(path) - len(valid) > 0.10 * len(path):
        raise PersistentDegeneracy(
            f"{len(path) - len(valid)} of {len(path)} samples have ambiguous spectrum"
        )
    if not valid or valid[0] != 0:
        raise PersistentDegeneracy("initial sample is spectrally ambiguous")
    value, worst, cum = _unwrap_turns(np.asarray(phases), "eigenvalue")
    angle = LiftedAngle(value=value, method="eigenvalue", defect_budget=worst)
    if _cumulative:
        full = np.full(len(path), np.nan)
        full[np.asarray(valid)] = np.concatenate([[0.0], cum])
        return angle, full
    return angle


def maslov_index(loop, tol_loop=1e-8):
    """Winding number of det_C of the unitary part around a loop at I."""
    if np.max(np.abs(loop.endpoint - np.eye(2 * loop.n))) > tol_loop:
        raise NotALoop("path endpoint differs from the identity")
    lifted = lift_rotation(loop)
    k = round(lifted.value)
    if abs(lifted.value - k) >= 0.1:
        raise NonIntegralLift(
            f"loop lift {lifted.value:.6f} is not close to an integer; undersampled?"
        )
    return int(k)


def cz_signature_axiom(A):
    """Index (n+ - n-)/2 of the path t -> exp(2 pi Omega A t), t in [0, 1].

    ``A`` must be symmetric, nondegenerate and of spectral radius below 1.
    """
    A = np.asarray(A, dtype=float)
    if np.max(np.abs(A - A.T)) > 1e-12:
        raise DegenerateA("A must be symmetric")
    w = np.linalg.eigvalsh(A)
    if np.min(np.abs(w)) < 1e-10:
        raise DegenerateA("A has an eigenvalue within 1e-10 of zero")
    if np.max(np.abs(w)) >= 1.0:
        raise SpectralRadiusTooLarge("spectral radius of A must be below 1")
    return int(np.sum(w > 0) - np.sum(w < 0)) // 2


def signature_axiom_path(A, num=512):
    """The path t -> exp(2 pi Omega A t) used by the signature axiom."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    return generator_path(2 * np.pi * symplin.omega(n) @ A, T=1.0, num=num)


def _snap(theta, tol=1e-12):
    r = round(theta)
    return float(r) if abs(theta - r) < tol else theta


def lcz_u1(theta):
    """Lower semi-continuous index of the U(1) rotation path of angle theta."""
    return 2 * math.ceil(_snap(theta)) - 1


class U1Rotation(NamedTuple):
    theta: float


class Loop(NamedTuple):
    k: int


class UnipotentZeroRho(NamedTuple):
    m: int


class IndexResult(NamedTuple):
    """An index value; ``exact`` distinguishes values from certified lower bounds."""

    value: int
    exact: bool


def lcz_block_sum(blocks):
    """Index of a direct sum of elementary blocks.

    ``U1Rotation(theta)`` contributes the exact value ``2 ceil(theta) - 1``,
    ``Loop(k)`` contributes ``2k``, and ``UnipotentZeroRho(m)`` contributes a
    certified lower bound ``-m`` (a unipotent block has vanishing homogeneous
    rotation number).  The result is exact iff no unipotent block occurs.
    """
    total = 0
    exact = True
    for block in blocks:
        if isinstance(block, U1Rotation):
            total += lcz_u1(block.theta)
        elif isinstance(block, Loop):
            total += 2 * block.k
        elif isinstance(block, UnipotentZeroRho):
            total += -block.m
            exact = False
        else:
            raise UnknownBlockType(f"unknown block {block!r}")
    return IndexResult(value=total, exact=exact)


def path_to_json(path):
    """JSON form {n, samples: [[t, row-major matrix], ...]}."""
    return {
        "n": path.n,
        "kind": path.kind,
        "samples": [
            [float(t), [float(v) for v in M.ravel()]]
            for t, M in zip(path.times, path.frames)
        ],
    }


def path_from_json(obj):
    n = int(obj["n"])
    times = np.array([s[0] for s in obj["samples"]])
    frames = np.array(
        [np.asarray(s[1], dtype=float).reshape(2 * n, 2 * n) for s in obj["samples"]]
    )
    return SymplecticPath(
        n=n, times=times, frames=frames, kind=obj.get("kind", "general")
    )


class HomogenizedRotation(NamedTuple):
    value: float
    by_power: np.ndarray


def homogenized_rotation(path, k_max=32, method="eigenvalue"):
    """Estimate of the homogeneous rotation number by endpoint iteration.

    Evaluates the chosen lift on ``path^k`` (concatenation of ``k`` copies
    translated by endpoint powers) and returns the value at ``k_max`` along
    with the whole sequence ``lift(path^k)/k`` as a convergence diagnostic.
    The spectral (eigenvalue) lift is the default; it is already homogeneous
    on rotations and vanishes identically on unipotent paths.
    """
    big = path_power(path, k_max)
    if method == "eigenvalue":
        _, cum = lift_eigenvalue_rotation(big, _cumulative=True)
    elif method == "determinant":
        _, cum = lift_rotation(big, _cumulative=True)
    else:
        raise ValueError(f"unknown method {method!r}")
    m = len(path)
    ends = [m - 1 + j * (m - 1) for j in range(k_max)]
    # ambiguous samples hold NaN; read the nearest preceding valid value
    idx = np.arange(len(cum))
    last_valid = np.maximum.accumulate(np.where(np.isnan(cum), -1, idx))
    by_power = np.array([cum[last_valid[e]] / (j + 1) for j, e in enumerate(ends)])
    return HomogenizedRotation(value=float(by_power[-1]), by_power=by_power)
