"""Source-model SK/PK capacity via the communication-for-omniscience LP.

The PK capacity of a source P_{X_M} with key set A and compromised set D is

    C_PK = H(X_M | X_D) - R_CO,

where R_CO is the least total rate letting every uncompromised terminal
learn the whole source:

    R_CO = min sum(R_j, j in D^c)
    s.t.  sum(R_j, j in B) >= H(X_B | X_{B^c})
          for every nonempty B strictly inside D^c with A not a subset of B.

D = empty gives the SK capacity.  The same quantity has a weighted dual
over the family Gamma(A) of sets not containing A:

    C_SK = min over lambda in Lambda(A) of
           H(X_M) - sum_B lambda_B H(X_B | X_{B^c}),

where Lambda(A) are the fractional covers: lambda_B in [0, 1] with
sum of lambda_B over B containing j equal to 1 for every terminal j.
Both programs run on the package's own simplex solver and are checked
against each other in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InternalConsistencyError, ModelError
from .linprog import LinearProgram, lp_solve
from .models import CapacityReport, PartySpec, SourceModel, bits, popcount
from .prob import _plain_entropy

#: Never enumerate families over more than this many participating terminals.
MAX_FAMILY_TERMINALS = 20

#: Guard on the dual family size.
MAX_GAMMA = 1 << 20

#: Tolerance for witness feasibility checks.
WITNESS_TOL = 1e-8


@dataclass(frozen=True)
class SubsetFamily:
    """Constraint index family: bitmask subsets of D^c, ascending order."""

    d_complement: int
    members: tuple[int, ...]


@dataclass(frozen=True)
class RateVector:
    """Per-terminal communication rates for the omniscience primal."""

    rates: dict[int, float]

    def total(self) -> float:
        return float(sum(self.rates.values()))


@dataclass(frozen=True)
class LambdaVector:
    """Fractional-cover weights lambda_B indexed by subset bitmask."""

    weights: dict[int, float]


@lru_cache(maxsize=256)
def constraint_family(spec: PartySpec) -> SubsetFamily:
    """All B with {} != B strictly inside D^c and A not a subset of B."""
    dc = spec.d_complement
    if popcount(dc) > MAX_FAMILY_TERMINALS:
        raise ModelError(
            f"|D^c| = {popcount(dc)} exceeds the 2^{MAX_FAMILY_TERMINALS} family guard"
        )
    members = []
    # ascending enumeration of submasks of dc
    for b in range(1, 1 << spec.m):
        if b & ~dc:
            continue
        if b == dc:
            continue
        if (spec.a & b) == spec.a:  # A subset of B
            continue
        members.append(b)
    return SubsetFamily(d_complement=dc, members=tuple(members))


class EntropyCache:
    """Subset entropies H(X_S) of a source, cached by terminal bitmask."""

    def __init__(self, model: SourceModel):
        self.model = model
        # one axis per terminal, eve and any extra variables summed out
        pmf = model.pmf
        order = [pmf.index_of(v) for g in model.terminal_vars for v in sorted(g)]
        tens = np.transpose(pmf.tensor(), order + [
            i for i in range(len(pmf.vars)) if i not in order
        ])
        extra = len(pmf.vars) - len(order)
        if extra:
            tens = tens.sum(axis=tuple(range(len(order), len(order) + extra)))
        shape = []
        for g in model.terminal_vars:
            size = 1
            for v in sorted(g):
                size *= pmf.vars[pmf.index_of(v)][1].size
            shape.append(size)
        self.tensor = tens.reshape(shape)
        self.m = model.m
        self._cache: dict[int, float] = {}

    def subset_entropy(self, mask: int) -> float:
        """H over the variables of the terminals in ``mask``."""
        if mask == 0:
            return 0.0
        hit = self._cache.get(mask)
        if hit is not None:
            return hit
        drop = tuple(j for j in range(self.m) if not (mask >> j) & 1)
        arr = self.tensor.sum(axis=drop) if drop else self.tensor
        h = _plain_entropy(np.asarray(arr).ravel())
        self._cache[mask] = h
        return h

    def conditional(self, b_mask: int) -> float:
        """H(X_B | X_{B^c}) with the complement inside the full terminal set."""
        full = (1 << self.m) - 1
        h = self.subset_entropy(full) - self.subset_entropy(full & ~b_mask)
        return max(h, 0.0)


def _check_compatible(model: SourceModel, spec: PartySpec):
    if model.m != spec.m:
        raise ModelError(f"model has {model.m} terminals, spec has {spec.m}")


def _require_pair(spec: PartySpec):
    if popcount(spec.a) < 2:
        raise ModelError(
            "key agreement needs at least two terminals in A "
            "(a lone terminal has no counterpart)"
        )


def rco(model: SourceModel, spec: PartySpec) -> CapacityReport:
    """Minimum total communication-for-omniscience rate for D^c."""
    _check_compatible(model, spec)
    family = constraint_family(spec)
    cache = EntropyCache(model)
    participants = bits(spec.d_complement)
    if not family.members:
        witness = RateVector({j: 0.0 for j in participants})
        return CapacityReport(
            0.0, "exact", "omniscience-lp-primal", _rate_witness(witness)
        )
    idx = {j: i for i, j in enumerate(participants)}
    incidence = np.zeros((len(family.members), len(participants)))
    h = np.zeros(len(family.members))
    for row, b in enumerate(family.members):
        for j in bits(b):
            incidence[row, idx[j]] = 1.0
        h[row] = cache.conditional(b)
    # Solve the packing dual  max h.lam  s.t.  incidence^T lam <= 1, lam >= 0
    # (slack-basis start, no phase 1); the optimal rates are its duals.
    sol = lp_solve(
        LinearProgram(c=-h, a_ge=-incidence.T, b_ge=-np.ones(len(participants)))
    )
    value = -sol.value
    rates_vec = sol.dual_ge
    rates = RateVector({j: float(rates_vec[idx[j]]) for j in participants})
    slack = incidence @ rates_vec - h
    if slack.min() < -WITNESS_TOL:
        worst = family.members[int(np.argmin(slack))]
        raise InternalConsistencyError(
            f"rate vector violates constraint B={{{','.join(str(t + 1) for t in bits(worst))}}}"
        )
    return CapacityReport(value, "exact", "omniscience-lp-primal", _rate_witness(rates))


def _rate_witness(rates: RateVector) -> dict:
    return {
        "rates": {str(j + 1): v for j, v in sorted(rates.rates.items())},
        "total": rates.total(),
    }


def pk_capacity(model: SourceModel, spec: PartySpec) -> CapacityReport:
    """Private-key capacity H(X_M | X_D) - R_CO (exact)."""
    _check_compatible(model, spec)
    _require_pair(spec)
    cache = EntropyCache(model)
    full = (1 << model.m) - 1
    h_given_d = cache.subset_entropy(full) - cache.subset_entropy(spec.d)
    co = rco(model, spec)
    value = h_given_d - co.value
    if value < -1e-9:
        raise InternalConsistencyError(
            f"PK capacity {value!r} below zero beyond tolerance"
        )
    witness = dict(co.witness)
    witness["rco"] = co.value
    witness["h_given_d"] = h_given_d
    return CapacityReport(max(value, 0.0), "exact", "omniscience-lp", witness)


def sk_capacity(model: SourceModel, a) -> CapacityReport:
    """Secret-key capacity: the D = empty specialization of pk_capacity."""
    a_mask = a if isinstance(a, int) else sum(1 << j for j in set(a))
    return pk_capacity(model, PartySpec(model.m, a_mask, 0))


def sk_capacity_dual(model: SourceModel, a) -> CapacityReport:
    """SK capacity by the fractional-cover dual; cross-checks the primal."""
    a_mask = a if isinstance(a, int) else sum(1 << j for j in set(a))
    spec = PartySpec(model.m, a_mask, 0)
    _require_pair(spec)
    gamma = constraint_family(spec)
    if len(gamma.members) > MAX_GAMMA:
        raise ModelError(f"|Gamma(A)| = {len(gamma.members)} exceeds the guard {MAX_GAMMA}")
    cache = EntropyCache(model)
    h = np.array([cache.conditional(b) for b in gamma.members])
    m = model.m
    cover = np.zeros((m, len(gamma.members)))
    for col, b in enumerate(gamma.members):
        for j in bits(b):
            cover[j, col] = 1.0
    sol = lp_solve(LinearProgram(c=-h, a_eq=cover, b_eq=np.ones(m)))
    lam = LambdaVector(
        {b: float(sol.x[i]) for i, b in enumerate(gamma.members) if sol.x[i] > 0}
    )
    coverage = cover @ sol.x
    if np.abs(coverage - 1.0).max() > WITNESS_TOL or sol.x.min() < -WITNESS_TOL:
        raise InternalConsistencyError("lambda witness violates Lambda(A) constraints")
    full = (1 << m) - 1
    value = cache.subset_entropy(full) + sol.value  # sol.value = -max sum(lam h)
    witness = {
        "lambda": {
            "{" + ",".join(str(t + 1) for t in bits(b)) + "}": w
            for b, w in sorted(lam.weights.items())
        }
    }
    return CapacityReport(max(value, 0.0), "exact", "omniscience-lp-dual", witness)
