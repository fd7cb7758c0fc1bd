"""Classical linear network code on the butterfly graph over F_p.

Two independent messages a1, a2 cross the butterfly in opposite corners while
a shared uniform scrambling key b1 is mixed into every interior edge.  The
code is chosen so that each sink decodes its message exactly and every
interior edge value, taken alone, is statistically independent of (a1, a2).

The graph is data, not code: ``EDGES`` lists tail/head node names for the 15
edges, ``FLOW_RULES`` gives each computed edge as an affine combination of
earlier edges, and everything else (flow evaluation, coefficient matrices,
wiretap propagation) is derived from those tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ffield import FieldElement, PrimeField, inverse_of_two, validate_modulus

# Edge index -> (tail node, head node).  Edges 3, 4, 14, 15 are classical
# channels; 1, 2 and 5..13 carry qudits in the quantum protocol.
EDGES: dict[int, tuple[str, str]] = {
    1: ("I1", "V1"),
    2: ("I2", "V2"),
    3: ("S1", "V1"),
    4: ("S1", "V2"),
    5: ("V1", "V3"),
    6: ("V2", "V3"),
    7: ("V1", "V5"),
    8: ("V2", "V6"),
    9: ("V3", "V4"),
    10: ("V4", "V5"),
    11: ("V4", "V6"),
    12: ("V6", "O1"),
    13: ("V5", "O2"),
    14: ("S2", "V5"),
    15: ("S2", "V6"),
}

# Computed edge -> list of (source edge, coefficient tag).  Coefficient tags:
# an int is taken literally, "half" means 1/2 in F_p.  Source edges appear
# earlier in index order, so one forward pass evaluates the whole flow.
FLOW_RULES: dict[int, tuple[tuple[int, int | str], ...]] = {
    5: ((1, 2), (3, 1)),
    6: ((2, 2), (4, 1)),
    7: ((1, 1), (3, 1)),
    8: ((2, 1), (4, 1)),
    9: ((5, 1), (6, 1)),
    10: ((9, 1),),
    11: ((9, 1),),
    12: ((11, "half"), (8, -1)),
    13: ((10, "half"), (7, -1)),
}

# Edges whose values enter the coefficient matrix, in fixed row order.
ROW_EDGES: tuple[int, ...] = (1, 2, 5, 6, 7, 8, 9, 10, 11, 12, 13)

# Interior edges a wiretapper may touch in the quantum protocol.
ATTACKABLE_EDGES: tuple[int, ...] = (5, 6, 7, 8, 9, 10, 11)

SINK_ROWS: tuple[int, ...] = (10, 11, 12, 13)


def _coeff(tag: int | str, p: int) -> int:
    if tag == "half":
        return inverse_of_two(p)
    return int(tag) % p


@dataclass(frozen=True)
class FlowAssignment:
    """All edge values for one choice of messages and keys.

    ``z`` maps edge index to its value; edges 14 and 15 carry the pair key
    b2 unchanged and are stored as tuples.
    """

    p: int
    a1: FieldElement
    a2: FieldElement
    b1: FieldElement
    b2: tuple[FieldElement, FieldElement]
    z: dict[int, FieldElement | tuple[FieldElement, FieldElement]] = field(repr=False)

    def value(self, edge: int) -> FieldElement:
        v = self.z[edge]
        if isinstance(v, tuple):
            raise ValueError(f"edge {edge} carries a pair, not a single value")
        return v

    def vector(self, edges: tuple[int, ...] = ROW_EDGES) -> np.ndarray:
        """Edge values as an integer array, in the given edge order."""
        return np.array([int(self.value(e)) for e in edges], dtype=np.int64)


def evaluate_flow(
    p: int,
    a1: int | FieldElement,
    a2: int | FieldElement,
    b1: int | FieldElement,
    b2: tuple[int, int] | tuple[FieldElement, FieldElement] = (0, 0),
) -> FlowAssignment:
    """Run the butterfly code once and return every edge value.

    The sinks recover the crossed messages: edge 12 carries a1 and edge 13
    carries a2, for every key choice.
    """
    F = PrimeField(p)
    a1, a2, b1 = F(a1), F(a2), F(b1)
    pad = (F(b2[0]), F(b2[1]))
    z: dict[int, FieldElement | tuple[FieldElement, FieldElement]] = {
        1: a1,
        2: a2,
        3: b1,
        4: b1,
        14: pad,
        15: pad,
    }
    for edge in sorted(FLOW_RULES):
        acc = F.zero
        for src, tag in FLOW_RULES[edge]:
            acc = acc + z[src] * _coeff(tag, p)  # type: ignore[operator]
        z[edge] = acc
    return FlowAssignment(p=p, a1=a1, a2=a2, b1=b1, b2=pad, z=z)


def evaluate_attacked_flow(
    p: int,
    a1: int | FieldElement,
    a2: int | FieldElement,
    b1: int | FieldElement,
    attacked_edge: int,
    injected: int | FieldElement,
) -> FlowAssignment:
    """Flow where the attacked edge's value is replaced by an injected symbol.

    Downstream nodes keep applying the honest rules to whatever arrives, so
    the substitution propagates to the sinks.
    """
    if attacked_edge not in ATTACKABLE_EDGES:
        raise ValueError(f"attacked edge must be in {ATTACKABLE_EDGES}, got {attacked_edge}")
    F = PrimeField(p)
    a1, a2, b1, injected = F(a1), F(a2), F(b1), F(injected)
    z: dict[int, FieldElement | tuple[FieldElement, FieldElement]] = {
        1: a1,
        2: a2,
        3: b1,
        4: b1,
    }
    for edge in sorted(FLOW_RULES):
        acc = F.zero
        for src, tag in FLOW_RULES[edge]:
            acc = acc + z[src] * _coeff(tag, p)  # type: ignore[operator]
        z[edge] = injected if edge == attacked_edge else acc
    return FlowAssignment(p=p, a1=a1, a2=a2, b1=b1, b2=(F.zero, F.zero), z=z)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Integer matrix expressing edge values as combinations of the inputs.

    Row i gives the coefficients of edge ``row_edges[i]`` with respect to
    ``columns`` (messages, scrambling key, and the injected symbol when an
    edge is attacked).  Entries are canonical representatives in [0, p).
    """

    p: int
    row_edges: tuple[int, ...]
    columns: tuple[str, ...]
    rows: np.ndarray
    attacked_edge: int | None = None

    def __post_init__(self) -> None:
        expected = (len(self.row_edges), len(self.columns))
        if self.rows.shape != expected:
            raise ValueError(f"matrix shape {self.rows.shape} does not match {expected}")

    def row(self, edge: int) -> np.ndarray:
        return self.rows[self.row_edges.index(edge)]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def reduced(self) -> "CoefficientMatrix":
        """Drop the sink-side rows (edges 10..13), keeping the wiretap view."""
        keep = [i for i, e in enumerate(self.row_edges) if e not in SINK_ROWS]
        return CoefficientMatrix(
            p=self.p,
            row_edges=tuple(self.row_edges[i] for i in keep),
            columns=self.columns,
            rows=self.rows[keep].copy(),
            attacked_edge=self.attacked_edge,
        )

    def apply(self, inputs: dict[str, int]) -> np.ndarray:
        vec = np.array([inputs[c] for c in self.columns], dtype=np.int64)
        return (self.rows @ vec) % self.p

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "row_edges": list(self.row_edges),
            "columns": list(self.columns),
            "rows": self.rows.tolist(),
            "attacked_edge": self.attacked_edge,
        }


def _propagate(p: int, source_vectors: dict[int, np.ndarray], ncols: int,
               attacked_edge: int | None = None) -> dict[int, np.ndarray]:
    """Forward pass of FLOW_RULES on coefficient vectors instead of values."""
    vecs = dict(source_vectors)
    inject = None
    if attacked_edge is not None:
        inject = np.zeros(ncols, dtype=np.int64)
        inject[-1] = 1
    for edge in sorted(FLOW_RULES):
        acc = np.zeros(ncols, dtype=np.int64)
        for src, tag in FLOW_RULES[edge]:
            acc = (acc + _coeff(tag, p) * vecs[src]) % p
        vecs[edge] = inject if edge == attacked_edge else acc
    return vecs


def coefficient_matrix(p: int) -> CoefficientMatrix:
    """Honest transfer matrix with columns (a1, a2, b1) and rows ROW_EDGES."""
    validate_modulus(p)
    sources = {
        1: np.array([1, 0, 0], dtype=np.int64),
        2: np.array([0, 1, 0], dtype=np.int64),
        3: np.array([0, 0, 1], dtype=np.int64),
        4: np.array([0, 0, 1], dtype=np.int64),
    }
    vecs = _propagate(p, sources, ncols=3)
    rows = np.stack([vecs[e] for e in ROW_EDGES])
    return CoefficientMatrix(p=p, row_edges=ROW_EDGES, columns=("a1", "a2", "b1"), rows=rows)


def attacked_coefficient_matrix(p: int, attacked_edge: int) -> CoefficientMatrix:
    """Transfer matrix when one interior edge is replaced by an injected symbol.

    The extra column "e1" tracks the injected value; the attacked edge's own
    row becomes (0, 0, 0, 1) and downstream rows absorb the substitution.
    """
    validate_modulus(p)
    if attacked_edge not in ATTACKABLE_EDGES:
        raise ValueError(f"attacked edge must be in {ATTACKABLE_EDGES}, got {attacked_edge}")
    sources = {
        1: np.array([1, 0, 0, 0], dtype=np.int64),
        2: np.array([0, 1, 0, 0], dtype=np.int64),
        3: np.array([0, 0, 1, 0], dtype=np.int64),
        4: np.array([0, 0, 1, 0], dtype=np.int64),
    }
    vecs = _propagate(p, sources, ncols=4, attacked_edge=attacked_edge)
    rows = np.stack([vecs[e] for e in ROW_EDGES])
    return CoefficientMatrix(
        p=p,
        row_edges=ROW_EDGES,
        columns=("a1", "a2", "b1", "e1"),
        rows=rows,
        attacked_edge=attacked_edge,
    )


def key_coefficient(p: int, edge: int) -> int:
    """Coefficient of the scrambling key b1 on an interior edge.

    Nonzero on every attackable edge; this is what makes a single wiretapped
    edge value look uniform.
    """
    return int(coefficient_matrix(p).row(edge)[2])


def recovery_check(p: int, flow=evaluate_flow) -> bool:
    """Exhaustively confirm edge 12 carries a1 and edge 13 carries a2.

    ``flow`` may be swapped for a mutated evaluator to confirm the check is
    actually discriminating.
    """
    validate_modulus(p)
    for a1, a2, b1 in itertools.product(range(p), repeat=3):
        fa = flow(p, a1, a2, b1)
        if fa.value(12) != a1 or fa.value(13) != a2:
            return False
    return True


def classical_secrecy_check(
    p: int, edge: int, b1_values: tuple[int, ...] | None = None
) -> float:
    """Mutual information, in bits, between one edge value and (a1, a2).

    Messages are uniform; the key b1 is uniform over ``b1_values`` (all of
    F_p by default).  Counting is exact over the full input cube, and exact
    independence is detected by an integer identity so a secure edge returns
    exactly 0.0.
    """
    validate_modulus(p)
    if edge not in ATTACKABLE_EDGES:
        raise ValueError(f"secrecy check applies to edges {ATTACKABLE_EDGES}, got {edge}")
    keys = tuple(range(p)) if b1_values is None else tuple(v % p for v in b1_values)
    if not keys:
        raise ValueError("b1_values must be non-empty")

    joint: dict[tuple[int, int, int], int] = {}
    for a1, a2 in itertools.product(range(p), repeat=2):
        for b1 in keys:
            zj = int(evaluate_flow(p, a1, a2, b1).value(edge))
            key = (zj, a1, a2)
            joint[key] = joint.get(key, 0) + 1

    total = p * p * len(keys)
    z_counts: dict[int, int] = {}
    for (zj, _, _), n in joint.items():
        z_counts[zj] = z_counts.get(zj, 0) + n
    msg_count = len(keys)  # each (a1, a2) occurs once per key

    # Independence as an integer identity: total * joint == marginal * marginal.
    independent = all(
        total * n == z_counts[zj] * msg_count for (zj, _, _), n in joint.items()
    )
    if independent and len(joint) == len(z_counts) * p * p:
        return 0.0

    mi = 0.0
    for (zj, _, _), n in joint.items():
        p_joint = n / total
        p_z = z_counts[zj] / total
        p_msg = msg_count / total
        mi += p_joint * math.log2(p_joint / (p_z * p_msg))
    return mi
