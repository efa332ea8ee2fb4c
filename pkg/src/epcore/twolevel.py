"""Closed forms for the two-level family

    H(lam) = diag(w1, w2) + lam * [[e1, d1], [d2, e2]].

All square roots of ``d1*d2`` use the principal branch multiplied by an
explicit ``branch`` sign (+1 or -1); flipping it swaps the two exceptional
points but leaves them invariant as a set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (CrossingNotEP, DegenerateFamily, NonDiagonalizableCrossing,
                     PoleHit)
from .family import MatrixFamily


@dataclass(frozen=True)
class TwoLevelParams:
    w1: complex
    w2: complex
    e1: complex = 0.0
    e2: complex = 0.0
    d1: complex = 0.5
    d2: complex = 0.5

    @classmethod
    def canonical_dimer(cls) -> "TwoLevelParams":
        """``w = (1, 0)``, no diagonal slopes, ``d1 = d2 = 1/2``; EPs at ``-i, +i``."""
        return cls(1.0, 0.0, 0.0, 0.0, 0.5, 0.5)

    @property
    def H0(self) -> np.ndarray:
        return np.diag([self.w1, self.w2]).astype(complex)

    @property
    def V(self) -> np.ndarray:
        return np.array([[self.e1, self.d1], [self.d2, self.e2]], dtype=complex)

    def matrix(self, lam) -> np.ndarray:
        return self.H0 + lam * self.V

    def family(self) -> MatrixFamily:
        return MatrixFamily.single(self.H0, self.V, name="twolevel")

    @property
    def nontrivial(self) -> bool:
        """True when ``[H0, V] != 0``."""
        return bool(np.any(self.H0 @ self.V - self.V @ self.H0))

    @property
    def hermitian(self) -> bool:
        """Hermitian for real `lam`: real energies and slopes, ``d1 = conj(d2)``."""
        reals = (self.w1, self.w2, self.e1, self.e2)
        return (all(complex(x).imag == 0 for x in reals)
                and complex(self.d1) == complex(self.d2).conjugate())


@dataclass(frozen=True)
class EpPair:
    lam1: complex
    lam2: complex
    E1: complex
    E2: complex
    root: complex  # the square root of d1*d2 actually used
    branch: int


def _root(p: TwoLevelParams, branch: int) -> complex:
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    d1, d2 = complex(p.d1), complex(p.d2)
    if d1 == 0 and d2 == 0:
        raise CrossingNotEP("both couplings vanish: plain level crossing")
    if d1 == 0 or d2 == 0:
        raise NonDiagonalizableCrossing(
            "one coupling vanishes: non-diagonalizable crossing without branching")
    return branch * np.sqrt(d1 * d2)


def ep_locations(p: TwoLevelParams, branch: int = 1) -> EpPair:
    """Exceptional points and their coalesced energies."""
    r = _root(p, branch)
    dw = complex(p.w1) - complex(p.w2)
    de = complex(p.e1) - complex(p.e2)
    den1 = 1j * de + 2 * r
    den2 = 1j * de - 2 * r
    if den1 == 0 or den2 == 0:
        raise DegenerateFamily("EP location denominator vanishes (EP at infinity)")
    lam1 = -1j * dw / den1
    lam2 = -1j * dw / den2
    num = complex(p.e1) * complex(p.w2) - complex(p.e2) * complex(p.w1)
    ws = complex(p.w1) + complex(p.w2)
    E1 = (num - 1j * r * ws) / (de - 2j * r)
    E2 = (num + 1j * r * ws) / (de + 2j * r)
    return EpPair(lam1, lam2, E1, E2, r, branch)


def energies(p: TwoLevelParams, lam) -> tuple[complex, complex]:
    """Both eigenvalues of ``H(lam)`` in factored square-root form.

    Falls back to the unfactored quadratic formula when the EPs are absent
    (a vanishing coupling or a vanishing leading coefficient).
    """
    lam = complex(lam)
    w1, w2, e1, e2 = (complex(x) for x in (p.w1, p.w2, p.e1, p.e2))
    d1d2 = complex(p.d1) * complex(p.d2)
    mean = 0.5 * (w1 + w2 + lam * (e1 + e2))
    lead = (e1 - e2) ** 2 + 4 * d1d2
    try:
        if lead == 0:
            raise DegenerateFamily("leading coefficient vanishes")
        eps = ep_locations(p)
        half = 0.5 * np.sqrt(lead) * np.sqrt((lam - eps.lam1) * (lam - eps.lam2))
    except (CrossingNotEP, DegenerateFamily):
        half = 0.5 * np.sqrt((w1 - w2 + lam * (e1 - e2)) ** 2 + 4 * lam**2 * d1d2)
    return mean + half, mean - half


def ep_eigenvectors(p: TwoLevelParams, branch: int = 1):
    """Right and left eigenvectors at both EPs, second component set to 1.

    Returns ``(phi1, phi2, phit1, phit2)``; ``phit_k @ phi_k`` vanishes.
    """
    r = _root(p, branch)
    d1, d2 = complex(p.d1), complex(p.d2)
    phi1 = np.array([1j * d1 / r, 1.0])
    phi2 = np.array([-1j * d1 / r, 1.0])
    phit1 = np.array([1j * d2 / r, 1.0])
    phit2 = np.array([-1j * d2 / r, 1.0])
    return phi1, phi2, phit1, phit2


def jordan_at_ep(p: TwoLevelParams, which: int = 1, branch: int = 1):
    """Similarity ``S`` with ``H(lam_which) = S [[E, 1], [0, E]] S^-1``.

    The second column of ``S`` is the associate vector ``a`` with
    ``(H - E) a = phi``.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    eps = ep_locations(p, branch)
    dw = complex(p.w1) - complex(p.w2)
    if dw == 0:
        raise DegenerateFamily("w1 == w2: Jordan similarity is singular")
    r = eps.root if which == 1 else -eps.root
    E = eps.E1 if which == 1 else eps.E2
    S = np.array([
        [1j * complex(p.d1) / r,
         (2j * r - complex(p.e1) + complex(p.e2)) / (dw * complex(p.d2))],
        [1.0, 0.0],
    ], dtype=complex)
    return S, E


def greens_2x2(p: TwoLevelParams, lam, E) -> np.ndarray:
    """``(E - H(lam))^-1`` via the 2x2 adjugate."""
    A = E * np.eye(2) - p.matrix(lam)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) <= 1e-15 * max(1.0, np.abs(A).max()) ** 2:
        raise PoleHit(f"E={E} is an eigenvalue of H({lam})")
    adj = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])
    return adj / det


def ep_green_terms(p: TwoLevelParams, which: int = 1, branch: int = 1):
    """``(E_ep, N)`` such that ``G(E) = I/(E-E_ep) + N/(E-E_ep)^2`` at the EP.

    ``N = H(lam_ep) - E_ep I`` is used directly: it is exact and free of the
    branch ambiguity carried by ``sqrt(d1/d2)``-type factors.
    """
    eps = ep_locations(p, branch)
    lam, E = (eps.lam1, eps.E1) if which == 1 else (eps.lam2, eps.E2)
    return E, p.matrix(lam) - E * np.eye(2)
