"""Three-dimensional skip-free Markov-modulated random walks.

A model is a family of 27 nonnegative ``s0 x s0`` blocks ``A[k]`` indexed by
level increments ``k in {-1, 0, 1}^3``.  Coordinates are 0-based here
(``0, 1, 2``); phases are 0-based as well.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SkipFreeError, ValidationError
from .phase import as_phase_matrix, is_irreducible, stationary_distribution
from .tridiag import Triplet

OFFSETS = tuple(itertools.product((-1, 0, 1), repeat=3))
STOCHASTIC_TOL = 1e-12


class ModelFormatError(SkipFreeError):
    """Model or triplet file cannot be read or parsed."""

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class MmrwModel:
    s0: int
    blocks: Mapping[tuple, np.ndarray]
    labels: Optional[tuple] = None
    stack: np.ndarray = field(init=False, repr=False, compare=False)
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.s0 < 1:
            raise ValidationError("s0 must be >= 1")
        full = {}
        for k, M in self.blocks.items():
            k = tuple(int(v) for v in k)
            if k not in OFFSETS:
                raise ValidationError(f"offset {k} is not in {{-1,0,1}}^3 (skip-free)")
            A = as_phase_matrix(M, f"block {k}")
            if A.shape[0] != self.s0:
                raise ValidationError(f"block {k} has dimension {A.shape[0]}, expected {self.s0}")
            full[k] = A
        zero = np.zeros((self.s0, self.s0))
        zero.setflags(write=False)
        for k in OFFSETS:
            full.setdefault(k, zero)
        stack = np.stack([full[k] for k in OFFSETS])
        stack.setflags(write=False)
        object.__setattr__(self, "blocks", full)
        object.__setattr__(self, "stack", stack)
        object.__setattr__(self, "offsets", np.array(OFFSETS, dtype=float))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.s0:
                raise ValidationError("labels must have one entry per phase")
            object.__setattr__(self, "labels", labels)

    def block(self, k) -> np.ndarray:
        return self.blocks[tuple(k)]

    def a_sum(self, z=(1.0, 1.0, 1.0)) -> np.ndarray:
        """sum_k z1^k1 z2^k2 z3^k3 A_k."""
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise DomainError(f"z must be positive, got {z}")
        w = np.exp(self.offsets @ np.log(z))
        return np.tensordot(w, self.stack, axes=1)

    def a_sum_log(self, s) -> np.ndarray:
        """A_***(e^s) for a log-scale point ``s``."""
        w = np.exp(self.offsets @ np.asarray(s, dtype=float))
        return np.tensordot(w, self.stack, axes=1)

    def row_sums(self) -> np.ndarray:
        return self.stack.sum(axis=(0, 2))

    def is_stochastic(self, tol=STOCHASTIC_TOL) -> bool:
        return bool(np.max(np.abs(self.row_sums() - 1.0)) <= tol)

    def permuted(self, coord_perm: Sequence[int], phase_perm: Optional[Sequence[int]] = None):
        """Relabel coordinates (new coordinate d is old ``coord_perm[d]``) and phases."""
        phase_perm = np.arange(self.s0) if phase_perm is None else np.asarray(phase_perm)
        blocks = {}
        for k, M in self.blocks.items():
            new_k = tuple(k[coord_perm[d]] for d in range(3))
            blocks[new_k] = M[np.ix_(phase_perm, phase_perm)]
        labels = None if self.labels is None else tuple(self.labels[p] for p in phase_perm)
        return MmrwModel(self.s0, blocks, labels)

    def to_dict(self) -> dict:
        out = {"s0": self.s0, "blocks": []}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        for k in OFFSETS:
            M = self.blocks[k]
            if np.any(M > 0):
                out["blocks"].append({"offset": list(k), "matrix": M.tolist()})
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "MmrwModel":
        try:
            s0 = int(data["s0"])
            blocks = {}
            for entry in data["blocks"]:
                k = tuple(int(v) for v in entry["offset"])
                if k in blocks:
                    raise ValidationError(f"offset {k} listed twice")
                blocks[k] = np.array(entry["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ModelFormatError(f"malformed model document: {exc!r}") from exc
        return cls(s0, blocks, data.get("labels"))


@dataclass(frozen=True)
class QueueRates:
    lam: tuple
    mu: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        mu = tuple(float(v) for v in self.mu)
        if len(lam) != 3 or len(mu) != 3:
            raise ValidationError("need three arrival and three service rates")
        if min(lam + mu) <= 0:
            raise ValidationError(f"rates must be positive, got lambda={lam}, mu={mu}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def nu(self) -> float:
        """Uniformization constant lambda_1 + lambda_2 + lambda_3 + mu_1 + mu_2 + mu_3."""
        return sum(self.lam) + sum(self.mu)


def three_queue_generator(rates: QueueRates) -> dict:
    """Nonzero continuous-time blocks of the 1-limited three-queue polling model.

    Phase j means the server is serving class j; a class-j completion moves
    the server to the next queue in cyclic order.
    """
    lam, mu = rates.lam, rates.mu
    I = np.eye(3)
    G = {
        (1, 0, 0): lam[0] * I,
        (0, 1, 0): lam[1] * I,
        (0, 0, 1): lam[2] * I,
        (-1, 0, 0): np.zeros((3, 3)),
        (0, -1, 0): np.zeros((3, 3)),
        (0, 0, -1): np.zeros((3, 3)),
    }
    G[(-1, 0, 0)][0, 1] = mu[0]
    G[(0, -1, 0)][1, 2] = mu[1]
    G[(0, 0, -1)][2, 0] = mu[2]
    G[(0, 0, 0)] = -np.diag([sum(lam) + m for m in mu])
    return G


def build_three_queue(rates: QueueRates) -> MmrwModel:
    """Uniformized discrete-time kernel: A_k = G_k / nu, A_0 = I + G_0 / nu."""
    if not isinstance(rates, QueueRates):
        rates = QueueRates(*rates)
    nu = rates.nu
    blocks = {k: G / nu for k, G in three_queue_generator(rates).items()}
    blocks[(0, 0, 0)] = np.eye(3) + blocks[(0, 0, 0)]
    return MmrwModel(3, blocks, labels=("serve1", "serve2", "serve3"))


def secondary_order(i: int) -> tuple:
    """Coordinate order (primary, secondary, tertiary) for direction ``i``."""
    others = [d for d in range(3) if d != i]
    return (i, *others)


def marginal(model: MmrwModel, kept: Sequence[int] = (), weights: Optional[Mapping[int, float]] = None):
    """Weighted sum over dropped level coordinates, nested over ``kept``.

    ``kept`` lists coordinates outermost first; every other coordinate is
    summed with weight ``weights.get(d, 1.0) ** k_d``.  With nothing kept the
    result is the phase matrix A_***(z); otherwise a nested Triplet whose
    depth equals ``len(kept)``.
    """
    weights = dict(weights or {})
    kept = tuple(int(d) for d in kept)
    if len(set(kept)) != len(kept) or any(d not in (0, 1, 2) for d in kept):
        raise ValidationError(f"kept coordinates must be distinct values in 0..2, got {kept}")
    for d, z in weights.items():
        if d in kept:
            raise ValidationError(f"coordinate {d} is both kept and weighted")
        if not z > 0:
            raise DomainError(f"weight for coordinate {d} must be positive, got {z}")
    dropped = [d for d in range(3) if d not in kept]
    log_w = np.zeros(3)
    for d in dropped:
        log_w[d] = np.log(weights.get(d, 1.0))

    def leaf_for(fixed):
        mask = np.ones(len(OFFSETS), dtype=bool)
        for d, k in fixed.items():
            mask &= model.offsets[:, d] == k
        w = np.exp(model.offsets[mask] @ log_w)
        return np.tensordot(w, model.stack[mask], axes=1)

    def build(pos, fixed):
        if pos == len(kept):
            return leaf_for(fixed)
        d = kept[pos]
        return Triplet(*(build(pos + 1, {**fixed, d: k}) for k in (-1, 0, 1)))

    return build(0, {})


def direction_operator(model: MmrwModel, i: int) -> Triplet:
    """Depth-3 nested operator of the walk with primary level ``i``.

    Its top-level triplet is (A^(i)_-1, A^(i)_0, A^(i)_1), each a depth-2
    block tri-diagonal operator over the two remaining coordinates.
    """
    return marginal(model, kept=secondary_order(i))


def box_matrix(model: MmrwModel, shape) -> sp.csr_matrix:
    """Kernel restricted to the box prod(range(L_d)) x phases; exits are dropped.

    State index ``((x1 * L2 + x2) * L3 + x3) * s0 + j``.
    """
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),) * 3
    shape = tuple(int(L) for L in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise DomainError(f"box shape must be three positive sizes, got {shape}")
    out = None
    for k, A in model.blocks.items():
        if not np.any(A > 0):
            continue
        T = sp.kron(
            sp.kron(sp.kron(sp.eye(shape[0], k=k[0]), sp.eye(shape[1], k=k[1])),
                    sp.eye(shape[2], k=k[2])),
            sp.csr_matrix(A),
        )
        out = T if out is None else out + T
    if out is None:
        n = int(np.prod(shape)) * model.s0
        return sp.csr_matrix((n, n))
    return sp.csr_matrix(out)


def period(pattern) -> int:
    """Period of an irreducible directed graph given by a boolean pattern."""
    G = sp.csr_matrix(pattern)
    n = G.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in G.indices[G.indptr[u]:G.indptr[u + 1]]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = np.gcd(g, level[u] + 1 - level[v])
        frontier = nxt
    return int(abs(g)) if g else 0


@dataclass
class ValidationReport:
    stochastic: bool
    max_row_deviation: float
    phase_irreducible: bool
    drift: Optional[tuple]
    drift_ok: bool
    up_positive: tuple
    box_irreducible: bool
    box_aperiodic: bool
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.stochastic and self.phase_irreducible and self.drift_ok
                and all(self.up_positive) and self.box_irreducible and self.box_aperiodic)

    def lines(self):
        def flag(v):
            return "pass" if v else "FAIL"
        drift = "n/a" if self.drift is None else ", ".join(f"{a:.6g}" for a in self.drift)
        out = [
            f"stochasticity          {flag(self.stochastic)} (max row-sum deviation {self.max_row_deviation:.3g})",
            f"phase irreducibility   {flag(self.phase_irreducible)}",
            f"drift condition        {flag(self.drift_ok)} (drift = {drift})",
        ]
        for d, v in enumerate(self.up_positive):
            out.append(f"upward rows positive {d + 1} {flag(v)}")
        out.append(f"Q irreducible (L=3)    {flag(self.box_irreducible)}")
        out.append(f"Q aperiodic (L=3)      {flag(self.box_aperiodic)}")
        return out + list(self.messages)


def drift_vector(model: MmrwModel) -> np.ndarray:
    """Mean drift a_d = pi (A_{up in d} - A_{down in d}) e, pi stationary for A_***."""
    pi = stationary_distribution(model.a_sum(), tol=1e-9)
    out = np.zeros(3)
    for d in range(3):
        up = model.stack[model.offsets[:, d] == 1].sum(axis=0)
        down = model.stack[model.offsets[:, d] == -1].sum(axis=0)
        out[d] = pi @ (up - down) @ np.ones(model.s0)
    return out


def validate(model: MmrwModel, box_levels: int = 3) -> ValidationReport:
    """Check stochasticity, irreducibility, drift and upward-row conditions."""
    messages = []
    dev = float(np.max(np.abs(model.row_sums() - 1.0)))
    stochastic = dev <= STOCHASTIC_TOL
    A = model.a_sum()
    irreducible = is_irreducible(A)
    drift = None
    drift_ok = False
    if irreducible and stochastic:
        drift = tuple(float(a) for a in drift_vector(model))
        drift_ok = all(abs(a) > STOCHASTIC_TOL for a in drift) and min(drift) < 0
    else:
        messages.append("drift not computed: A_*** must be irreducible and stochastic")
    up_positive = []
    for d in range(3):
        # corner rows of A^(d)_1 only see nonnegative moves in the other coordinates
        mask = (model.offsets[:, d] == 1) & np.all(
            (model.offsets >= 0) | (np.arange(3) == d), axis=1)
        rows = model.stack[mask].sum(axis=(0, 2))
        up_positive.append(bool(np.all(rows > 0)))
    Q = box_matrix(model, box_levels)
    box_irr = is_irreducible(Q)
    box_aper = box_irr and period(Q > 0) == 1
    return ValidationReport(stochastic, dev, irreducible, drift, drift_ok,
                            tuple(up_positive), box_irr, box_aper, messages)


def load_model(path) -> MmrwModel:
    """Read a model document (JSON) from ``path``."""
    return MmrwModel.from_dict(_read_json(path))


def save_model(model: MmrwModel, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_triplet(path) -> Triplet:
    """Read {"lower": M, "diag": M, "upper": M} (scalars allowed) from ``path``."""
    data = _read_json(path)
    try:
        return Triplet(*(np.atleast_2d(np.array(data[k], dtype=float))
                         for k in ("lower", "diag", "upper")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ModelFormatError(f"malformed triplet document: {exc!r}") from exc


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON in {path}: {exc.msg}", exc.lineno, exc.colno) from exc
