"""Subspaces and linear relations with orthonormal-basis storage.

A linear relation ``L: U ~> V`` is a subspace of ``U ⊕ V``; points are
stacked as ``(u, v)``.  Ranks are decided with a relative singular value
cutoff (``tol * sigma_max``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-9


def orth(a: np.ndarray, tol: float = RANK_TOL, scale: float = 0.0) -> np.ndarray:
    """Orthonormal basis (as columns) for the column span of ``a``.

    Singular values at or below ``tol * max(sigma_max, scale)`` count as zero;
    pass ``scale`` when the natural size of ``a`` is known (e.g. 1 for
    combinations of orthonormal vectors), so pure rounding noise is not
    mistaken for rank.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    cut = tol * max(float(s[0]) if s.size else 0.0, scale)
    if s.size == 0 or s[0] == 0 or s[0] <= cut:
        return np.zeros((a.shape[0], 0))
    rank = int((s > cut).sum())
    return u[:, :rank]


def null_space(a: np.ndarray, tol: float = RANK_TOL, scale: float = 0.0) -> np.ndarray:
    """Orthonormal basis (as columns) for the kernel of ``a`` (cutoff as in :func:`orth`)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[1]
    if a.shape[0] == 0 or n == 0:
        return np.eye(n)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    cut = tol * max(float(s[0]) if s.size else 0.0, scale)
    if s.size == 0 or s[0] <= cut:
        return np.eye(n)
    rank = int((s > cut).sum())
    return vh[rank:].T.copy()


class Subspace:
    """A linear subspace of R^n, stored by an orthonormal basis (columns)."""

    __slots__ = ("ambient_dim", "basis")

    def __init__(self, ambient_dim: int, basis: np.ndarray):
        basis = np.asarray(basis, dtype=float)
        basis = np.zeros((0, 0)) if ambient_dim == 0 else basis.reshape(ambient_dim, -1)
        self.ambient_dim = int(ambient_dim)
        self.basis = basis

    @classmethod
    def from_spanning(
        cls, vectors: np.ndarray, ambient_dim: int | None = None, tol: float = RANK_TOL, scale: float = 0.0
    ) -> "Subspace":
        """Span of the columns of ``vectors``."""
        vectors = np.asarray(vectors, dtype=float)
        n = vectors.shape[0] if ambient_dim is None else ambient_dim
        if n == 0:
            return cls.zero(0)
        return cls(n, orth(vectors.reshape(n, -1), tol, scale))

    @classmethod
    def from_constraints(cls, c: np.ndarray, ambient_dim: int | None = None, tol: float = RANK_TOL) -> "Subspace":
        """Solutions x of ``c @ x = 0``."""
        c = np.asarray(c, dtype=float)
        n = c.shape[1] if ambient_dim is None else ambient_dim
        if n == 0:
            return cls.zero(0)
        return cls(n, null_space(c.reshape(-1, n), tol))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(n, np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(n, np.eye(n))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.basis @ (self.basis.T @ v)

    def distance(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.project(v)))

    def contains(self, v: np.ndarray, tol: float = 1e-8) -> bool:
        """Membership up to ``tol`` relative to max(1, |v|)."""
        v = np.asarray(v, dtype=float)
        return self.distance(v) <= tol * max(1.0, float(np.linalg.norm(v)))

    def constraints(self) -> np.ndarray:
        """Rows spanning the orthogonal complement, so that ``C @ x = 0`` cuts out the subspace."""
        if self.dim == 0:
            return np.eye(self.ambient_dim)
        return null_space(self.basis.T, scale=1.0).T

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim} in R^{self.ambient_dim})"


def subspaces_equal(a: Subspace, b: Subspace, tol: float = 1e-8) -> bool:
    if a.ambient_dim != b.ambient_dim or a.dim != b.dim:
        return False
    if a.dim == 0:
        return True
    ra = b.basis - a.project(b.basis)
    rb = a.basis - b.project(a.basis)
    return bool(max(np.abs(ra).max(), np.abs(rb).max()) <= tol)


@dataclass(frozen=True, eq=False)
class LinRel:
    """A linear relation from R^dom_dim to R^cod_dim."""

    dom_dim: int
    cod_dim: int
    space: Subspace

    def __post_init__(self):
        if self.space.ambient_dim != self.dom_dim + self.cod_dim:
            raise ValueError(
                f"subspace lives in R^{self.space.ambient_dim}, expected R^{self.dom_dim + self.cod_dim}"
            )

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def basis(self) -> np.ndarray:
        return self.space.basis

    def contains(self, u: np.ndarray, v: np.ndarray, tol: float = 1e-8) -> bool:
        return self.space.contains(np.concatenate([np.ravel(u), np.ravel(v)]), tol)

    def __repr__(self) -> str:
        return f"LinRel(R^{self.dom_dim} ~> R^{self.cod_dim}, dim={self.dim})"


def from_graph_of_map(a: np.ndarray) -> LinRel:
    """The graph {(u, A u)} of a linear map."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    m, n = a.shape
    return LinRel(n, m, Subspace.from_spanning(np.vstack([np.eye(n), a])))


def from_constraints(c: np.ndarray, dom_dim: int, cod_dim: int, tol: float = RANK_TOL) -> LinRel:
    return LinRel(dom_dim, cod_dim, Subspace.from_constraints(c, dom_dim + cod_dim, tol))


def identity(n: int) -> LinRel:
    return from_graph_of_map(np.eye(n))


def compose_rel(first: LinRel, second: LinRel, tol: float = RANK_TOL) -> LinRel:
    """Relational composite: first ``U ~> V`` then second ``V ~> W``.

    With bases ``B1 = [B1u; B1v]`` and ``B2 = [B2v; B2w]`` the composite is
    spanned by ``(B1u a, B2w b)`` over the coefficients satisfying
    ``B1v a = B2v b``.
    """
    if first.cod_dim != second.dom_dim:
        raise ValueError(f"cannot compose R^{first.cod_dim} with R^{second.dom_dim}")
    u, w = first.dom_dim, second.cod_dim
    b1, b2 = first.basis, second.basis
    b1u, b1v = b1[:u], b1[u:]
    b2v, b2w = b2[: second.dom_dim], b2[second.dom_dim:]
    k1, k2 = b1.shape[1], b2.shape[1]
    if k1 + k2 == 0:
        return LinRel(u, w, Subspace.zero(u + w))
    # both bases are orthonormal, so cutoffs are measured against 1
    joint = np.hstack([b1v, -b2v])
    coeffs = null_space(joint, tol, scale=1.0)
    image = np.vstack([b1u @ coeffs[:k1], b2w @ coeffs[k1:]])
    return LinRel(u, w, Subspace(u + w, orth(image, tol, scale=1.0)))


def equal_rel(a: LinRel, b: LinRel, tol: float = 1e-8) -> bool:
    if (a.dom_dim, a.cod_dim) != (b.dom_dim, b.cod_dim):
        return False
    return subspaces_equal(a.space, b.space, tol)


def direct_sum(a: LinRel, b: LinRel) -> LinRel:
    """``a ⊕ b`` with coordinates ordered (U, U', V, V')."""
    u1, v1, u2, v2 = a.dom_dim, a.cod_dim, b.dom_dim, b.cod_dim
    n = u1 + u2 + v1 + v2
    basis = np.zeros((n, a.dim + b.dim))
    basis[:u1, : a.dim] = a.basis[:u1]
    basis[u1 + u2 : u1 + u2 + v1, : a.dim] = a.basis[u1:]
    basis[u1 : u1 + u2, a.dim :] = b.basis[:u2]
    basis[u1 + u2 + v1 :, a.dim :] = b.basis[u2:]
    return LinRel(u1 + u2, v1 + v2, Subspace(n, basis))


def dagger(a: LinRel) -> LinRel:
    """Transpose relation: swap the domain and codomain coordinates."""
    basis = np.vstack([a.basis[a.dom_dim :], a.basis[: a.dom_dim]])
    return LinRel(a.cod_dim, a.dom_dim, Subspace(a.dom_dim + a.cod_dim, basis))
