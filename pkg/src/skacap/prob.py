"""Exact probability calculus over finite joint distributions.

Dense-tensor primitives everything else builds on: joint PMFs over named
finite variables, discrete memoryless channels as row-stochastic matrices,
marginalization, conditional entropy, mutual information, statistical
distance, channel composition, and independent products.

Conventions
-----------
* All logarithms are base 2; every rate in this package is in bits.
* 0 * log(0) := 0, and entries below ``ZERO_CUTOFF`` are treated as exact
  zeros inside entropy sums.
* Values are immutable after construction and every operation is a pure
  function, so concurrent reads are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import InternalConsistencyError, ModelError

#: Construction-time normalization tolerance for PMFs and channel rows.
PMF_TOL = 1e-12

#: Entries below this are treated as exact zeros inside entropy sums.
ZERO_CUTOFF = 1e-15

#: Derived identities (chain rule, symmetry, clamping) hold to this tolerance.
DERIVED_TOL = 1e-10

#: Hard cap on dense joint alphabet size (number of cells).
MAX_CELLS = 1 << 24


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet of ``size`` symbols with optional distinct labels."""

    size: int
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.size < 1:
            raise ModelError(f"alphabet size must be >= 1, got {self.size}")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise ModelError(
                    f"{len(self.labels)} labels for alphabet of size {self.size}"
                )
            if len(set(self.labels)) != len(self.labels):
                raise ModelError("alphabet labels must be distinct")


#: Variables are identified by small nonnegative integers, unique per model.
VarId = int

#: An ordered variable declaration: (id, alphabet).
VarList = tuple[tuple[VarId, Alphabet], ...]


def _as_varlist(vars_) -> VarList:
    out = []
    for vid, alph in vars_:
        if not isinstance(vid, (int, np.integer)) or vid < 0:
            raise ModelError(f"variable id must be a nonnegative integer, got {vid!r}")
        if not isinstance(alph, Alphabet):
            alph = Alphabet(int(alph))
        out.append((int(vid), alph))
    ids = [v for v, _ in out]
    if len(set(ids)) != len(ids):
        raise ModelError(f"duplicate variable ids in {ids}")
    return tuple(out)


@dataclass(frozen=True)
class JointPMF:
    """Dense joint distribution over an ordered list of finite variables.

    ``probs`` is flat, row-major in the declared variable order.  Entries are
    nonnegative and sum to one within ``PMF_TOL``.
    """

    vars: VarList
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vars", _as_varlist(self.vars))
        arr = np.ascontiguousarray(self.probs, dtype=float).ravel()
        cells = 1
        for _, alph in self.vars:
            cells *= alph.size
        if cells > MAX_CELLS:
            raise ModelError(f"joint alphabet has {cells} cells, cap is {MAX_CELLS}")
        if arr.size != cells:
            raise ModelError(
                f"pmf has {arr.size} entries, expected {cells} for the declared alphabets"
            )
        if arr.size == 0:
            raise ModelError("pmf must have at least one variable")
        if np.any(arr < 0):
            raise ModelError(f"negative probability {arr.min():.3e}")
        total = float(arr.sum())
        if abs(total - 1.0) > PMF_TOL:
            raise ModelError(f"pmf sums to {total!r}, not 1 within {PMF_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    # -- structural helpers -------------------------------------------------
    @property
    def ids(self) -> tuple[VarId, ...]:
        return tuple(v for v, _ in self.vars)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for _, a in self.vars)

    def index_of(self, vid: VarId) -> int:
        for i, (v, _) in enumerate(self.vars):
            if v == vid:
                return i
        raise ModelError(f"unknown variable id {vid}")

    def alphabet_of(self, vid: VarId) -> Alphabet:
        return self.vars[self.index_of(vid)][1]

    def tensor(self) -> np.ndarray:
        """Probabilities reshaped to one axis per variable (read-only view)."""
        return self.probs.reshape(self.shape)


@dataclass(frozen=True)
class Dmc:
    """Discrete memoryless channel from a joint input to a joint output.

    ``rows`` has one row per joint input symbol (row-major over ``in_vars``)
    and one column per joint output symbol (row-major over ``out_vars``).
    Every row is a probability vector within ``PMF_TOL``.
    """

    in_vars: VarList
    out_vars: VarList
    rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "in_vars", _as_varlist(self.in_vars))
        object.__setattr__(self, "out_vars", _as_varlist(self.out_vars))
        in_ids = {v for v, _ in self.in_vars}
        out_ids = {v for v, _ in self.out_vars}
        if in_ids & out_ids:
            raise ModelError(f"in/out variables overlap: {sorted(in_ids & out_ids)}")
        n_in = int(np.prod([a.size for _, a in self.in_vars], dtype=np.int64))
        n_out = int(np.prod([a.size for _, a in self.out_vars], dtype=np.int64))
        arr = np.ascontiguousarray(self.rows, dtype=float).reshape(n_in, n_out)
        if np.any(arr < 0):
            raise ModelError("channel has a negative transition probability")
        sums = arr.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > PMF_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise ModelError(
                f"channel row {i} sums to {float(sums[i])!r}, not 1 within {PMF_TOL}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @property
    def in_ids(self) -> tuple[VarId, ...]:
        return tuple(v for v, _ in self.in_vars)

    @property
    def out_ids(self) -> tuple[VarId, ...]:
        return tuple(v for v, _ in self.out_vars)


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def marginalize(p: JointPMF, keep: Iterable[VarId]) -> JointPMF:
    """Marginal of ``p`` onto the ``keep`` variables (original order kept)."""
    keep_set = frozenset(keep)
    if not keep_set:
        raise ModelError("cannot marginalize onto an empty variable set")
    known = set(p.ids)
    unknown = keep_set - known
    if unknown:
        raise ModelError(f"unknown variable ids {sorted(unknown)}")
    drop_axes = tuple(i for i, (v, _) in enumerate(p.vars) if v not in keep_set)
    if not drop_axes:
        return p
    arr = p.tensor().sum(axis=drop_axes)
    kept_vars = tuple(va for va in p.vars if va[0] in keep_set)
    return JointPMF(kept_vars, arr.ravel())


def _plain_entropy(flat: np.ndarray) -> float:
    mask = flat > ZERO_CUTOFF
    vals = flat[mask]
    return float(-(vals * np.log2(vals)).sum())


def _subset_entropy(p: JointPMF, subset: frozenset) -> float:
    if not subset:
        return 0.0
    drop_axes = tuple(i for i, (v, _) in enumerate(p.vars) if v not in subset)
    arr = p.tensor().sum(axis=drop_axes) if drop_axes else p.tensor()
    return _plain_entropy(np.asarray(arr).ravel())


def _clamp_nonneg(value: float, what: str) -> float:
    if value < 0.0:
        if value < -DERIVED_TOL:
            raise InternalConsistencyError(f"{what} = {value!r} below -{DERIVED_TOL}")
        return 0.0
    return value


def entropy(p: JointPMF, s: Iterable[VarId], given: Iterable[VarId] = ()) -> float:
    """Conditional entropy H(S | given) in bits.

    ``given`` empty yields the unconditional entropy.  Result is clamped to
    be nonnegative; a violation beyond ``DERIVED_TOL`` raises.
    """
    s_set = frozenset(s)
    g_set = frozenset(given)
    if not s_set:
        raise ModelError("entropy target set must be nonempty")
    if s_set & g_set:
        raise ModelError(f"target and conditioning sets overlap: {sorted(s_set & g_set)}")
    known = set(p.ids)
    unknown = (s_set | g_set) - known
    if unknown:
        raise ModelError(f"unknown variable ids {sorted(unknown)}")
    h = _subset_entropy(p, s_set | g_set) - _subset_entropy(p, g_set)
    return _clamp_nonneg(h, "conditional entropy")


def mutual_information(
    p: JointPMF,
    s: Iterable[VarId],
    t: Iterable[VarId],
    given: Iterable[VarId] = (),
) -> float:
    """Conditional mutual information I(S; T | given) in bits.

    Computed as H(S|G) - H(S|T,G); tiny negatives from rounding clamp to 0.
    """
    s_set, t_set, g_set = frozenset(s), frozenset(t), frozenset(given)
    if not s_set or not t_set:
        raise ModelError("mutual information needs nonempty S and T")
    for x, y, names in (
        (s_set, t_set, "S/T"),
        (s_set, g_set, "S/given"),
        (t_set, g_set, "T/given"),
    ):
        if x & y:
            raise ModelError(f"overlapping argument sets {names}: {sorted(x & y)}")
    known = set(p.ids)
    unknown = (s_set | t_set | g_set) - known
    if unknown:
        raise ModelError(f"unknown variable ids {sorted(unknown)}")
    value = (
        _subset_entropy(p, s_set | g_set)
        - _subset_entropy(p, g_set)
        - _subset_entropy(p, s_set | t_set | g_set)
        + _subset_entropy(p, t_set | g_set)
    )
    return _clamp_nonneg(value, "mutual information")


def statistical_distance(p: JointPMF, q: JointPMF) -> float:
    """Total variation distance SD(P, Q) = (1/2) sum |P - Q|."""
    if p.vars != q.vars:
        raise ModelError("statistical distance needs identical variable lists")
    return float(0.5 * np.abs(p.probs - q.probs).sum())


def compose(input_pmf: JointPMF, channel: Dmc) -> JointPMF:
    """Joint distribution P(in) * P(out | in) over in_vars + out_vars.

    The input's variable list must match ``channel.in_vars`` exactly (same
    ids, same alphabets, same order).  The marginal of the result on the
    input variables reproduces ``input_pmf`` up to float addition.
    """
    if input_pmf.vars != channel.in_vars:
        raise ModelError(
            f"input variables {input_pmf.ids} do not match channel input {channel.in_ids}"
        )
    joint = input_pmf.probs[:, None] * channel.rows
    return JointPMF(channel.in_vars + channel.out_vars, joint.ravel())


def extend_with_channel(p: JointPMF, channel: Dmc) -> JointPMF:
    """Apply a channel whose inputs are a subset of ``p``'s variables.

    Returns the joint over ``p.vars + channel.out_vars`` under the
    conditional-independence assumption P(out | all) = P(out | in_vars).
    """
    in_ids = channel.in_ids
    for vid, alph in channel.in_vars:
        if vid not in p.ids:
            raise ModelError(f"channel input variable {vid} missing from joint")
        if p.alphabet_of(vid).size != alph.size:
            raise ModelError(f"alphabet mismatch on variable {vid}")
    out_overlap = set(channel.out_ids) & set(p.ids)
    if out_overlap:
        raise ModelError(f"channel output ids already present: {sorted(out_overlap)}")
    ndim = len(p.vars)
    k = len(in_ids)
    pos = [p.index_of(v) for v in in_ids]
    tens = np.moveaxis(p.tensor(), pos, range(ndim - k, ndim))
    lead_shape = tens.shape[: ndim - k]
    flat = tens.reshape(-1, channel.rows.shape[0])
    joint = flat[:, :, None] * channel.rows[None, :, :]
    out_shape = tuple(a.size for _, a in channel.out_vars)
    joint = joint.reshape(lead_shape + tuple(a.size for _, a in channel.in_vars) + out_shape)
    # undo the input-axis move; output axes stay appended at the end
    joint = np.moveaxis(joint, range(ndim - k, ndim), pos)
    return JointPMF(p.vars + channel.out_vars, joint.ravel())


def product_pmf(factors: list[JointPMF] | tuple[JointPMF, ...]) -> JointPMF:
    """Independent product of PMFs with pairwise-disjoint variable ids."""
    factors = list(factors)
    if not factors:
        raise ModelError("product of zero factors is undefined")
    seen: set[VarId] = set()
    for f in factors:
        dup = seen & set(f.ids)
        if dup:
            raise ModelError(f"duplicated variable ids across factors: {sorted(dup)}")
        seen |= set(f.ids)
    if len(factors) == 1:
        return factors[0]
    arr = factors[0].probs
    vars_: tuple = factors[0].vars
    for f in factors[1:]:
        arr = np.multiply.outer(arr, f.probs)
        vars_ = vars_ + f.vars
    return JointPMF(vars_, arr.ravel())


# ---------------------------------------------------------------------------
# Small constructors used across the package and its tests
# ---------------------------------------------------------------------------


def uniform_pmf(vars_) -> JointPMF:
    vl = _as_varlist(vars_)
    cells = int(np.prod([a.size for _, a in vl], dtype=np.int64))
    return JointPMF(vl, np.full(cells, 1.0 / cells))


def bsc_matrix(p: float) -> np.ndarray:
    """Binary symmetric channel transition matrix with crossover ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ModelError(f"crossover probability {p} outside [0, 1]")
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


def bec_matrix(eps: float) -> np.ndarray:
    """Binary erasure channel matrix; output symbol 1 is the erasure."""
    if not 0.0 <= eps <= 1.0:
        raise ModelError(f"erasure probability {eps} outside [0, 1]")
    return np.array([[1.0 - eps, eps, 0.0], [0.0, eps, 1.0 - eps]])


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), with h(0) = h(1) = 0."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))
