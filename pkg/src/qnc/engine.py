"""Sparse qudit statevector engine.

States live on an ordered collection of named registers of arbitrary integer
dimension.  Amplitudes are kept in a dict keyed by basis tuples, so circuits
whose support stays polynomial (everything in this package) cost far less
than the full product space.  The gate set is exactly what the protocol
needs: affine adders (basis permutations), powers of the diagonal phase
gate, isometries that split a wire into an environment plus a resent wire,
and destructive Fourier-basis measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

PRUNE_TOL = 1e-14


class LayoutError(ValueError):
    """Raised when a register name or dimension does not fit the layout."""


class ZeroProbabilityBranch(RuntimeError):
    """Raised when a forced measurement outcome has (numerically) zero weight."""


@lru_cache(maxsize=None)
def phase_table(dim: int) -> np.ndarray:
    """Unit phases exp(2*pi*i*r/dim) for r in [0, dim); exact periodicity."""
    return np.exp(2j * np.pi * np.arange(dim) / dim)


def fourier_basis_state(dim: int, k: int) -> np.ndarray:
    """The k-th Fourier (conjugate) basis vector of a dim-level system."""
    return phase_table(dim)[(k * np.arange(dim)) % dim] / math.sqrt(dim)


class RegisterLayout:
    """Ordered, uniquely named registers with integer dimensions."""

    def __init__(self, registers: Sequence[tuple[str, int]]):
        names = [n for n, _ in registers]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for n, d in registers:
            # dimension 1 is allowed: a trivial environment is still a register
            if d < 1:
                raise LayoutError(f"register {n!r} must have dimension >= 1, got {d}")
        self._registers: tuple[tuple[str, int], ...] = tuple((n, int(d)) for n, d in registers)
        self._index = {n: i for i, (n, _) in enumerate(self._registers)}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self._registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self._registers)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise LayoutError(f"no register named {name!r} in {self.names}") from None

    def dim(self, name: str) -> int:
        return self._registers[self.index(name)][1]

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def without(self, name: str) -> "RegisterLayout":
        i = self.index(name)
        return RegisterLayout(self._registers[:i] + self._registers[i + 1:])

    def appended(self, name: str, dim: int) -> "RegisterLayout":
        if name in self._index:
            raise LayoutError(f"register {name!r} already present")
        return RegisterLayout(self._registers + ((name, dim),))

    def subset(self, names: Sequence[str]) -> "RegisterLayout":
        return RegisterLayout(tuple((n, self.dim(n)) for n in names))

    def ravel(self, values: Sequence[int]) -> int:
        """Mixed-radix index of a basis tuple, first register most significant."""
        idx = 0
        for v, d in zip(values, self.dims):
            idx = idx * d + v
        return idx

    def __len__(self) -> int:
        return len(self._registers)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RegisterLayout) and other._registers == self._registers

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}:{d}" for n, d in self._registers)
        return f"RegisterLayout({inner})"


class SparseState:
    """Pure state stored as {basis tuple: amplitude}; ops return new states."""

    def __init__(
        self,
        layout: RegisterLayout,
        amplitudes: Mapping[tuple[int, ...], complex],
        prune: bool = True,
    ):
        self.layout = layout
        n = len(layout)
        amps: dict[tuple[int, ...], complex] = {}
        for key, a in amplitudes.items():
            if len(key) != n:
                raise LayoutError(f"basis tuple {key} does not match {n} registers")
            if prune and abs(a) < PRUNE_TOL:
                continue
            amps[tuple(int(v) for v in key)] = complex(a)
        self.amps = amps

    @classmethod
    def basis_state(cls, layout: RegisterLayout, values: Sequence[int]) -> "SparseState":
        key = tuple(int(v) % d for v, d in zip(values, layout.dims))
        return cls(layout, {key: 1.0})

    @classmethod
    def from_site_vectors(
        cls, layout: RegisterLayout, vectors: Sequence[np.ndarray]
    ) -> "SparseState":
        """Product state from one dense vector per register."""
        if len(vectors) != len(layout):
            raise LayoutError("need exactly one vector per register")
        amps: dict[tuple[int, ...], complex] = {(): 1.0}
        for vec, d in zip(vectors, layout.dims):
            vec = np.asarray(vec, dtype=complex)
            if vec.shape != (d,):
                raise LayoutError(f"site vector shape {vec.shape} does not match dim {d}")
            amps = {
                key + (v,): a * vec[v]
                for key, a in amps.items()
                for v in range(d)
                if abs(vec[v]) >= PRUNE_TOL
            }
        return cls(layout, amps)

    # -- bookkeeping ---------------------------------------------------

    def norm_squared(self) -> float:
        return float(sum((a * a.conjugate()).real for a in self.amps.values()))

    def renormalized(self) -> "SparseState":
        n = math.sqrt(self.norm_squared())
        if n == 0.0:
            raise ZeroProbabilityBranch("cannot normalize a zero state")
        return SparseState(self.layout, {k: a / n for k, a in self.amps.items()}, prune=False)

    def inner(self, other: "SparseState") -> complex:
        """<self|other> over the shared layout."""
        if other.layout != self.layout:
            raise LayoutError("inner product requires identical layouts")
        small, big = (self.amps, other.amps) if len(self.amps) < len(other.amps) else (other.amps, self.amps)
        total = 0.0 + 0.0j
        for key in small:
            if key in big:
                total += self.amps[key].conjugate() * other.amps[key]
        return total

    @property
    def support_size(self) -> int:
        return len(self.amps)

    def value_column(self, name: str) -> np.ndarray:
        """Basis value of one register across the support, in iteration order."""
        i = self.layout.index(name)
        return np.array([key[i] for key in self.amps], dtype=np.int64)

    def to_vector(self, order: Sequence[str] | None = None) -> np.ndarray:
        """Dense amplitude vector; intended for small layouts and tests."""
        layout = self.layout if order is None else self.layout.subset(order)
        perm = [self.layout.index(n) for n in layout.names]
        if sorted(perm) != list(range(len(self.layout))):
            raise LayoutError("order must be a permutation of the layout names")
        vec = np.zeros(layout.total_dim, dtype=complex)
        for key, a in self.amps.items():
            vec[layout.ravel([key[i] for i in perm])] += a
        return vec

    def to_json(self) -> dict:
        entries = sorted(self.amps.items())
        return {
            "registers": [[n, d] for n, d in zip(self.layout.names, self.layout.dims)],
            "amplitudes": [[list(k), a.real, a.imag] for k, a in entries],
        }

    # -- gates ---------------------------------------------------------

    def apply_affine_adder(
        self,
        target: str,
        terms: Sequence[tuple[str, int]] = (),
        constant: int = 0,
    ) -> "SparseState":
        """Map |t> to |t + sum(coeff * source) + constant mod d> on the target.

        A basis permutation, hence unitary for any coefficients.  The target
        may not appear among its own source terms.
        """
        ti = self.layout.index(target)
        d = self.layout.dim(target)
        src = [(self.layout.index(n), c % d) for n, c in terms]
        if any(i == ti for i, _ in src):
            raise LayoutError("adder target cannot be one of its own sources")
        out: dict[tuple[int, ...], complex] = {}
        for key, a in self.amps.items():
            shift = constant
            for i, c in src:
                shift += c * key[i]
            new = list(key)
            new[ti] = (key[ti] + shift) % d
            out[tuple(new)] = a
        return SparseState(self.layout, out, prune=False)

    def apply_phase_power(self, name: str, power: int) -> "SparseState":
        """Multiply each basis state by omega^(power * value) on one register."""
        i = self.layout.index(name)
        d = self.layout.dim(name)
        table = phase_table(d)
        out = {key: a * table[(power * key[i]) % d] for key, a in self.amps.items()}
        return SparseState(self.layout, out, prune=False)

    def apply_isometry(
        self, name: str, matrix: np.ndarray, env_name: str = "E"
    ) -> "SparseState":
        """Send one register through an isometry into (environment, register).

        ``matrix`` has shape (env_dim * d, d) with row index env * d + wire;
        the environment register is appended at the end of the layout.
        """
        i = self.layout.index(name)
        d = self.layout.dim(name)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[1] != d or matrix.shape[0] % d != 0:
            raise LayoutError(f"isometry shape {matrix.shape} does not fit dimension {d}")
        env_dim = matrix.shape[0] // d
        gram = matrix.conj().T @ matrix
        if not np.allclose(gram, np.eye(d), atol=1e-10):
            raise ValueError("matrix is not an isometry (V†V != I)")
        new_layout = self.layout.appended(env_name, env_dim)
        out: dict[tuple[int, ...], complex] = {}
        for key, a in self.amps.items():
            col = matrix[:, key[i]]
            for row in np.flatnonzero(np.abs(col) >= PRUNE_TOL):
                e, x = divmod(int(row), d)
                new = list(key)
                new[i] = x
                new_key = tuple(new) + (e,)
                out[new_key] = out.get(new_key, 0.0) + a * col[row]
        return SparseState(new_layout, out)

    # -- measurement ---------------------------------------------------

    def _collapse_x(self, name: str, outcome: int) -> "SparseState":
        """Project onto Fourier-basis outcome and drop the register (unnormalized)."""
        i = self.layout.index(name)
        d = self.layout.dim(name)
        table = phase_table(d)
        scale = 1.0 / math.sqrt(d)
        out: dict[tuple[int, ...], complex] = {}
        for key, a in self.amps.items():
            rest = key[:i] + key[i + 1:]
            out[rest] = out.get(rest, 0.0) + a * table[(-outcome * key[i]) % d] * scale
        return SparseState(self.layout.without(name), out)

    def x_outcome_probabilities(self, name: str) -> np.ndarray:
        d = self.layout.dim(name)
        return np.array([self._collapse_x(name, k).norm_squared() for k in range(d)])

    def measure_x_basis(
        self,
        name: str,
        outcome: int | None = None,
        rng: np.random.Generator | None = None,
        allow_zero: bool = False,
    ) -> "MeasurementResult":
        """Destructively measure one register in the Fourier basis.

        With ``outcome`` given the branch is forced; otherwise it is sampled
        from ``rng``.  The returned state is renormalized and no longer
        contains the register.
        """
        d = self.layout.dim(name)
        if outcome is None:
            if rng is None:
                raise ValueError("measure_x_basis needs either an outcome or an rng")
            probs = self.x_outcome_probabilities(name)
            total = probs.sum()
            if total <= 0.0:
                raise ZeroProbabilityBranch("state has no weight to measure")
            outcome = int(rng.choice(d, p=probs / total))
        outcome = int(outcome) % d
        collapsed = self._collapse_x(name, outcome)
        prob = collapsed.norm_squared()
        if prob < PRUNE_TOL**2:
            if not allow_zero:
                raise ZeroProbabilityBranch(
                    f"outcome {outcome} on {name!r} has probability {prob:.3e}"
                )
            return MeasurementResult(outcome, 0.0, collapsed)
        return MeasurementResult(outcome, prob, collapsed.renormalized())

    # -- reductions ----------------------------------------------------

    def partial_trace(self, keep: Sequence[str]) -> "DensityMatrix":
        """Density matrix of the kept registers, tracing out the rest."""
        kept_layout = self.layout.subset(keep)
        kept_idx = [self.layout.index(n) for n in keep]
        traced_idx = [i for i in range(len(self.layout)) if i not in kept_idx]
        dim = kept_layout.total_dim
        groups: dict[tuple[int, ...], list[tuple[int, complex]]] = {}
        for key, a in self.amps.items():
            tkey = tuple(key[i] for i in traced_idx)
            g = kept_layout.ravel([key[i] for i in kept_idx])
            groups.setdefault(tkey, []).append((g, a))
        rho = np.zeros((dim, dim), dtype=complex)
        for members in groups.values():
            gi = np.array([g for g, _ in members])
            av = np.array([a for _, a in members])
            rho[np.ix_(gi, gi)] += np.outer(av, av.conjugate())
        return DensityMatrix(kept_layout, rho)

    def __repr__(self) -> str:
        return f"SparseState({self.layout!r}, support={self.support_size})"


@dataclass(frozen=True)
class MeasurementResult:
    outcome: int
    probability: float
    state: SparseState


class DensityMatrix:
    """Dense density matrix over a register layout."""

    def __init__(self, layout: RegisterLayout, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        d = layout.total_dim
        if matrix.shape != (d, d):
            raise LayoutError(f"matrix shape {matrix.shape} does not match dimension {d}")
        self.layout = layout
        self.matrix = matrix

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, atol: float = 1e-10) -> None:
        """Check hermiticity, unit trace, and positivity up to ``atol``."""
        if not np.allclose(self.matrix, self.matrix.conj().T, atol=atol):
            raise ValueError("density matrix is not hermitian")
        if abs(np.trace(self.matrix) - 1.0) > atol:
            raise ValueError(f"trace {np.trace(self.matrix)} is not 1")
        eigs = np.linalg.eigvalsh(self.matrix)
        if eigs.min() < -atol:
            raise ValueError(f"negative eigenvalue {eigs.min():.3e}")

    def reordered(self, order: Sequence[str]) -> "DensityMatrix":
        new_layout = self.layout.subset(order)
        perm = [self.layout.index(n) for n in order]
        n = len(self.layout)
        dims = self.layout.dims
        t = self.matrix.reshape(dims + dims)
        t = t.transpose(perm + [q + n for q in perm])
        d = new_layout.total_dim
        return DensityMatrix(new_layout, t.reshape(d, d))

    def marginal(self, keep: Sequence[str]) -> "DensityMatrix":
        """Partial trace down to the kept registers (original relative order)."""
        keep = [n for n in self.layout.names if n in set(keep)]
        ordered = self.reordered(keep + [n for n in self.layout.names if n not in keep])
        dk = self.layout.subset(keep).total_dim
        dt = ordered.layout.total_dim // dk
        t = ordered.matrix.reshape(dk, dt, dk, dt)
        return DensityMatrix(self.layout.subset(keep), np.einsum("atbt->ab", t))

    def product_deviation(self, first_block: Sequence[str]) -> float:
        """Trace distance to the product of the two block marginals.

        Zero exactly when the state factorizes across the bipartition given
        by ``first_block`` versus the remaining registers.
        """
        first = list(first_block)
        second = [n for n in self.layout.names if n not in set(first)]
        if not first or not second:
            raise LayoutError("product_deviation needs a proper bipartition")
        rho_a = self.marginal(first).matrix
        rho_b = self.marginal(second).matrix
        reordered = self.reordered(first + second)
        return trace_distance(reordered.matrix, np.kron(rho_a, rho_b))

    def fidelity_with_pure(self, target: "SparseState | np.ndarray") -> float:
        """<psi|rho|psi> for a pure target given as state or dense vector."""
        if isinstance(target, SparseState):
            vec = target.to_vector(order=self.layout.names)
        else:
            vec = np.asarray(target, dtype=complex)
        if vec.shape != (self.layout.total_dim,):
            raise LayoutError("target vector does not match the layout dimension")
        return float(np.real(vec.conj() @ self.matrix @ vec))

    def __repr__(self) -> str:
        return f"DensityMatrix({self.layout!r})"


def trace_distance(a: np.ndarray | DensityMatrix, b: np.ndarray | DensityMatrix) -> float:
    """Half the trace norm of (a - b); both operators must be hermitian."""
    am = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    bm = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    diff = am - bm
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def pure_overlap_fidelity(a: SparseState, b: SparseState) -> float:
    """|<a|b>|^2 for two pure states on the same layout."""
    return float(abs(a.inner(b)) ** 2)
