"""Affine matrix families ``H(lam) = H0 + sum_m lam_m V_m``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def as_matrix(a) -> np.ndarray:
    """Return `a` as a finite square complex matrix."""
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """Affine family of complex square matrices.

    Parameters
    ----------
    H0 : (n, n) array_like
        Value at the origin of parameter space.
    generators : sequence of (n, n) array_like
        One matrix per complex parameter.
    name : str
        Free-form label used in reports.
    """

    H0: np.ndarray
    generators: tuple
    name: str = ""

    def __post_init__(self):
        h0 = as_matrix(self.H0)
        gens = self.generators
        if isinstance(gens, np.ndarray) and gens.ndim == 2:
            gens = (gens,)
        gens = tuple(as_matrix(g) for g in gens)
        if not gens:
            raise ValueError("a family needs at least one generator")
        for g in gens:
            if g.shape != h0.shape:
                raise ValueError("generator and H0 dimensions differ")
        object.__setattr__(self, "H0", h0)
        object.__setattr__(self, "generators", gens)

    @classmethod
    def single(cls, H0, V, name="") -> "MatrixFamily":
        return cls(H0, (V,), name)

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @property
    def n_params(self) -> int:
        return len(self.generators)

    @property
    def V(self) -> np.ndarray:
        """The generator of a single-parameter family."""
        return self.generators[0]

    @property
    def is_constant(self) -> bool:
        return all(not np.any(g) for g in self.generators)

    def _coords(self, lam) -> np.ndarray:
        c = np.atleast_1d(np.asarray(lam, dtype=complex))
        if c.shape != (self.n_params,):
            raise ValueError(
                f"family has {self.n_params} parameter(s), got {c.shape[0]}")
        return c

    def __call__(self, lam) -> np.ndarray:
        c = self._coords(lam)
        H = self.H0.copy()
        for cm, g in zip(c, self.generators):
            H += cm * g
        return H

    def stack(self, lams: Sequence[complex]) -> np.ndarray:
        """Evaluate a single-parameter family at many points, shape (K, n, n)."""
        lams = np.asarray(lams, dtype=complex).ravel()
        return self.H0[None] + lams[:, None, None] * self.V[None]

    def restrict(self, index) -> "MatrixFamily":
        """Sub-family on the coordinate subspace `index`."""
        ix = np.ix_(index, index)
        return MatrixFamily(self.H0[ix], tuple(g[ix] for g in self.generators),
                            self.name)

    def scale(self, lam=None) -> float:
        """Matrix-norm scale used for relative tolerances (at least 1)."""
        H = self.H0 if lam is None else self(lam)
        return max(1.0, float(np.linalg.norm(H, 2)))
