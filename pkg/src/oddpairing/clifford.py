"""Irreducible self-adjoint representations of the complex Clifford algebra C_d, d odd.

The construction is recursive doubling.  Start from d = 1 with gamma_1 = (1).
Given gamma_1..gamma_d on C^N, a representation of C_{d+2} on C^{2N} is

    gamma'_j     = sigma_x (x) gamma_j      (j <= d)
    gamma'_{d+1} = sigma_y (x) 1_N
    gamma'_{d+2} = sigma_z (x) 1_N

For d = 3 this reproduces the Pauli matrices in their usual order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge, EvenDimension

MAX_DIMENSION = 13

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class CliffordRep:
    """The d anticommuting Hermitian unitaries gamma_1..gamma_d acting on C^N."""

    d: int
    N: int
    gammas: tuple

    def __post_init__(self):
        for g in self.gammas:
            g.setflags(write=False)

    def __len__(self):
        return self.d

    def __getitem__(self, j):
        return self.gammas[j]

    def contract(self, n) -> np.ndarray:
        """Return sum_j n_j gamma_j for a real vector ``n`` of length d."""
        n = np.asarray(n, dtype=float)
        if n.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {n.shape}")
        return np.tensordot(n, np.asarray(self.gammas), axes=1)

    def chirality(self) -> int:
        """Sign c with gamma_1 ... gamma_d = c * i**((d-1)/2) * 1.

        For odd d the ordered product of the generators is a scalar in an
        irreducible representation; the two inequivalent representations differ
        in this sign.
        """
        prod = np.eye(self.N, dtype=complex)
        for g in self.gammas:
            prod = prod @ g
        c = prod[0, 0] / (1j ** ((self.d - 1) // 2))
        return int(np.rint(c.real))


def build_clifford(d: int) -> CliffordRep:
    """Build the deterministic irreducible representation of C_d for odd d.

    The fiber dimension is N = 2**((d-1)/2).

    Raises:
        EvenDimension: if d is even or not positive.
        DimensionTooLarge: if d > 13.
    """
    if d < 1 or d % 2 == 0:
        raise EvenDimension(f"Clifford representations are built for odd d >= 1, got {d}")
    if d > MAX_DIMENSION:
        raise DimensionTooLarge(f"d={d} exceeds the supported maximum {MAX_DIMENSION}")

    gammas = [np.ones((1, 1), dtype=complex)]
    while len(gammas) < d:
        eye = np.eye(gammas[0].shape[0], dtype=complex)
        gammas = [np.kron(SIGMA_X, g) for g in gammas]
        gammas += [np.kron(SIGMA_Y, eye), np.kron(SIGMA_Z, eye)]
    N = gammas[0].shape[0]
    assert N == 2 ** ((d - 1) // 2)
    return CliffordRep(d=d, N=N, gammas=tuple(gammas))


def clifford_defects(rep: CliffordRep) -> dict:
    """Largest entrywise violations of the defining relations.

    Returns a dict with keys ``anticommutator`` (max over i != j of
    |gamma_i gamma_j + gamma_j gamma_i|), ``square`` (max |gamma_j^2 - 1|),
    ``hermitian`` and ``unitary``.
    """
    eye = np.eye(rep.N)
    anti = square = herm = unit = 0.0
    for i, gi in enumerate(rep.gammas):
        herm = max(herm, np.abs(gi - gi.conj().T).max())
        unit = max(unit, np.abs(gi.conj().T @ gi - eye).max())
        square = max(square, np.abs(gi @ gi - eye).max())
        for j in range(i + 1, rep.d):
            gj = rep.gammas[j]
            anti = max(anti, np.abs(gi @ gj + gj @ gi).max())
    return {"anticommutator": anti, "square": square, "hermitian": herm, "unitary": unit}
