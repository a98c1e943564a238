"""Polytree-PIN capacities: per-edge Blahut-Arimoto plus wiretapped bounds.

The noninteractive SK capacity of a polytree-PIN is the max-min of the
per-edge mutual informations, and because each edge term depends only on
its own edge-input marginal the max-min separates: it equals the minimum
over edges of the ordinary channel capacity.  The decomposition is
cross-checked against the generic transceiver optimizer in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError, InternalConsistencyError, ModelError
from .models import CapacityReport, Polytree, polytree_to_transceiver, emulated_to_source
from .optimize import InputOptimizerConfig, maximize_product_simplices
from .prob import Dmc, JointPMF, ZERO_CUTOFF

#: Blahut-Arimoto iteration cap.
BA_MAX_ITER = 100_000


@dataclass(frozen=True)
class EdgeCapacityResult:
    """Certified channel capacity of one edge."""

    edge: Optional[tuple[int, int]]
    capacity: float
    optimal_input: np.ndarray
    iterations: int
    gap: float


@dataclass(frozen=True)
class WiretapEdgeResult:
    """Best-found value of max_p I(T;Y|Z) on one wiretapped edge."""

    edge: Optional[tuple[int, int]]
    value: float
    optimal_input: np.ndarray
    converged: bool


def _rows_of(channel) -> np.ndarray:
    rows = channel.rows if isinstance(channel, Dmc) else np.asarray(channel, dtype=float)
    if rows.ndim != 2:
        raise ModelError("channel must be a matrix")
    if np.any(rows < 0):
        raise ModelError("channel has negative entries")
    sums = rows.sum(axis=1)
    bad = np.where(np.abs(sums - 1.0) > 1e-12)[0]
    if bad.size:
        raise ModelError(f"channel row {int(bad[0])} sums to {float(sums[bad[0]])!r}")
    return rows


def _divergences(rows: np.ndarray, p_y: np.ndarray) -> np.ndarray:
    # d[x] = D(W(.|x) || p_y) in bits, rows with zeros handled by masking
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(
            rows > ZERO_CUTOFF,
            np.log2(np.maximum(rows, 1e-300) / np.maximum(p_y, 1e-300)),
            0.0,
        )
    return (rows * logs).sum(axis=1)


def mutual_information_matrix(p_in: np.ndarray, rows: np.ndarray) -> float:
    """I(T; Y) in bits for input distribution ``p_in`` through ``rows``."""
    return float(p_in @ _divergences(rows, p_in @ rows))


def edge_capacity(channel, tol: float = 1e-9, max_iter: int = BA_MAX_ITER,
                  edge: Optional[tuple[int, int]] = None) -> EdgeCapacityResult:
    """Channel capacity by Blahut-Arimoto from the uniform input.

    Certified by the standard per-iteration bounds: the achieved mutual
    information I(r) lower-bounds capacity and max_x D(W(.|x)||p_y)
    upper-bounds it; iteration stops when their gap is at most ``tol``.
    """
    if tol <= 0:
        raise ModelError("tolerance must be positive")
    rows = _rows_of(channel)
    k = rows.shape[0]
    r = np.full(k, 1.0 / k)
    gap = np.inf
    for it in range(1, max_iter + 1):
        d = _divergences(rows, r @ rows)
        i_low = float(r @ d)
        i_up = float(d.max())
        gap = i_up - i_low
        if gap <= tol:
            return EdgeCapacityResult(
                edge=edge,
                capacity=max(i_low, 0.0),
                optimal_input=r,
                iterations=it,
                gap=max(gap, 0.0),
            )
        r = r * np.exp2(d)
        r = r / r.sum()
    raise ConvergenceError(
        f"Blahut-Arimoto hit the {max_iter}-iteration cap (gap {gap:.3e})", gap=gap
    )


def polytree_capacity(g: Polytree, tol: float = 1e-9) -> CapacityReport:
    """Noninteractive SK capacity of a polytree-PIN: min over edge capacities.

    The witness records each edge's certified capacity and optimal input;
    their product is a maximizing input distribution.
    """
    results = [
        edge_capacity(e.channel, tol=tol, edge=(e.sender, e.receiver)) for e in g.edges
    ]
    value = min(r.capacity for r in results)
    witness = {
        "edges": [
            {
                "edge": [r.edge[0] + 1, r.edge[1] + 1],
                "capacity": r.capacity,
                "optimal_input": [float(x) for x in r.optimal_input],
                "iterations": r.iterations,
                "gap": r.gap,
            }
            for r in results
        ]
    }
    return CapacityReport(value, "exact", "polytree-min-edge-ba", witness)


def _constant_wiretap(out_size: int) -> np.ndarray:
    return np.ones((out_size, 1))


def wiretapped_edge_lower(channel, wiretap, cfg: InputOptimizerConfig) -> WiretapEdgeResult:
    """Best found max_p [I(T;Y) - I(T;Z)] under the Markov chain T - Y - Z.

    Equals max_p I(T;Y|Z) by the Markov identity, so it lower-bounds the
    edge's wiretap key rate.  Flagged, not certified: the objective is a
    difference of mutual informations and is not assumed concave.
    """
    w_y = _rows_of(channel)
    w_z = w_y @ _rows_of(wiretap) if wiretap is not None else w_y @ _constant_wiretap(
        w_y.shape[1]
    )
    if (wiretap is not None) and _rows_of(wiretap).shape[0] != w_y.shape[1]:
        raise ModelError("wiretap input alphabet must match the edge output")

    def objective(point):
        p = point[0]
        return mutual_information_matrix(p, w_y) - mutual_information_matrix(p, w_z)

    res = maximize_product_simplices([w_y.shape[0]], objective, cfg)
    return WiretapEdgeResult(
        edge=None,
        value=max(res.value, 0.0),
        optimal_input=res.point[0],
        converged=res.converged,
    )


def wiretapped_polytree_bounds(
    g: Polytree, cfg: InputOptimizerConfig, tol: float = 1e-9
) -> tuple[CapacityReport, CapacityReport]:
    """Wiretap key-capacity bounds for a wiretapped polytree-PIN.

    Lower: min over edges of the best-found I(T;Y|Z) (edges without a
    wiretap entry count as constant wiretaps).  Upper: the private-key
    capacity with the eavesdropper promoted to a compromised terminal,
    maximized over a declared family of product inputs.  The pair is
    reported without asserting tightness.
    """
    from .transceiver import wsk_upper_by_pk  # local import avoids a cycle

    per_edge = []
    for e in g.edges:
        res = wiretapped_edge_lower(e.channel, e.wiretap, cfg)
        per_edge.append(
            WiretapEdgeResult(
                edge=(e.sender, e.receiver),
                value=res.value,
                optimal_input=res.optimal_input,
                converged=res.converged,
            )
        )
    lower_value = min(r.value for r in per_edge)
    all_converged = all(r.converged for r in per_edge)
    lower = CapacityReport(
        lower_value,
        "lower_bound",
        "wiretapped-pin-edges",
        {
            "edges": [
                {
                    "edge": [r.edge[0] + 1, r.edge[1] + 1],
                    "value": r.value,
                    "optimal_input": [float(x) for x in r.optimal_input],
                    "converged": r.converged,
                }
                for r in per_edge
            ],
            "all_converged": all_converged,
        },
    )

    t = polytree_to_transceiver(g)
    a_mask = (1 << g.m) - 1
    uniform = [np.full(a.size, 1.0 / a.size) for _, a in t.channel.in_vars]
    tuned = [r.optimal_input for r in per_edge]
    family = [uniform, _family_point(t, tuned, g)]
    best = None
    tried = []
    for vecs in family:
        flat = np.ones(1)
        for v in vecs:
            flat = np.multiply.outer(flat, np.asarray(v, dtype=float)).ravel()
        p_in = JointPMF(t.channel.in_vars, flat)
        src = emulated_to_source(t, p_in)
        if src.eve_var is None:
            from .omniscience import sk_capacity

            rep = sk_capacity(src, a_mask)
        else:
            rep = wsk_upper_by_pk(src, a_mask)
        tried.append({"input": [[float(x) for x in v] for v in vecs], "value": rep.value})
        if best is None or rep.value > best.value:
            best = rep
    upper = CapacityReport(
        best.value,
        "upper_bound",
        "wsk-pk-promotion-family",
        {"family": tried},
    )
    if lower.value > upper.value + 1e-7:
        raise InternalConsistencyError(
            f"wiretap lower bound {lower.value} exceeds upper bound {upper.value}"
        )
    return lower, upper


def _family_point(t, per_edge_inputs, g: Polytree):
    """Arrange per-edge optimal inputs into the transceiver's input order."""
    vecs = []
    edge_iter = iter(per_edge_inputs)
    k = len(g.edges)
    for i, (vid, alph) in enumerate(t.channel.in_vars):
        if i < k:
            vecs.append(np.asarray(next(edge_iter), dtype=float))
        else:
            vecs.append(np.ones(alph.size) / alph.size)
    return vecs
