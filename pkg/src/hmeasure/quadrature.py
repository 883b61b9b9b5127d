"""Deterministic integration engines on axis-aligned boxes.

* ``adaptive_cubature``: tensor Gauss-Legendre on cells, error from an
  order-q / order-(q-1) comparison, bisection of the worst cells.
* ``indicator_cubature``: cell subdivision for integrands times an indicator
  whose boundary is only known pointwise; straddling cells are refined.
* ``monte_carlo``: stratified or scrambled-Sobol estimates with a standard error.

Work is split into fixed chunks whose layout depends only on the problem,
never on the thread count; chunk results are combined with ``math.fsum`` in
chunk order, so results are bit-identical for any ``threads``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

Integrand = Callable[[np.ndarray], np.ndarray]

CHUNK_POINTS = 1 << 16


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    evaluations: int
    converged: bool
    cells: int = 0


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@lru_cache(maxsize=None)
def tensor_rule(order: int, d: int):
    """Nodes in [-1, 1]^d and weights of the tensor Gauss-Legendre rule."""
    x, w = gauss_legendre(order)
    nodes = np.array(list(itertools.product(x, repeat=d)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return nodes, weights


def _map_chunks(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _eval_points(f: Integrand, pts: np.ndarray, threads: int) -> np.ndarray:
    if len(pts) <= CHUNK_POINTS:
        return np.asarray(f(pts), dtype=float).reshape(len(pts))
    chunks = [pts[i:i + CHUNK_POINTS] for i in range(0, len(pts), CHUNK_POINTS)]
    outs = _map_chunks(lambda c: np.asarray(f(c), dtype=float).reshape(len(c)), chunks, threads)
    return np.concatenate(outs)


def _rule_on_cells(f, lo, hi, order, threads):
    """Apply the order-q rule to every cell; returns (values, nevals)."""
    d = lo.shape[1]
    nodes, weights = tensor_rule(order, d)
    half = (hi - lo) / 2
    mid = (hi + lo) / 2
    pts = mid[:, None, :] + half[:, None, :] * nodes[None, :, :]
    vals = _eval_points(f, pts.reshape(-1, d), threads).reshape(len(lo), len(weights))
    vol = np.prod(half, axis=1)
    return vals @ weights * vol, pts.shape[0] * pts.shape[1]


def _initial_cells(lower, upper, divisions):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    divisions = np.broadcast_to(np.asarray(divisions, dtype=int), (d,))
    edges = [np.linspace(lower[i], upper[i], divisions[i] + 1) for i in range(d)]
    idx = np.array(list(itertools.product(*[range(k) for k in divisions])))
    lo = np.column_stack([edges[i][idx[:, i]] for i in range(d)])
    hi = np.column_stack([edges[i][idx[:, i] + 1] for i in range(d)])
    return lo, hi


def _split(lo, hi):
    """Bisect every axis of each cell: (m, d) -> (m * 2^d, d), children grouped per parent."""
    d = lo.shape[1]
    mid = (lo + hi) / 2
    corners = np.array(list(itertools.product((0, 1), repeat=d)))
    clo = np.where(corners[None, :, :] == 0, lo[:, None, :], mid[:, None, :])
    chi = np.where(corners[None, :, :] == 0, mid[:, None, :], hi[:, None, :])
    return clo.reshape(-1, d), chi.reshape(-1, d)


def adaptive_cubature(f: Integrand, lower, upper, *, order: int = 8, divisions=2,
                      rtol: float = 1e-8, atol: float = 1e-13, max_cells: int = 400_000,
                      threads: int = 1) -> QuadResult:
    """Integrate a vectorised ``f((N, d)) -> (N,)`` over the box [lower, upper]."""
    lo, hi = _initial_cells(lower, upper, divisions)
    d = lo.shape[1]
    if order < 2:
        raise ValueError("order must be at least 2")
    hi_v, n1 = _rule_on_cells(f, lo, hi, order, threads)
    lo_v, n2 = _rule_on_cells(f, lo, hi, order - 1, threads)
    vals, errs = hi_v, np.abs(hi_v - lo_v)
    nevals = n1 + n2
    while True:
        total = math.fsum(vals)
        err = math.fsum(errs)
        if err <= max(rtol * abs(total), atol):
            return QuadResult(total, err, nevals, True, len(vals))
        if len(vals) + (2 ** d - 1) > max_cells:
            return QuadResult(total, err, nevals, False, len(vals))
        # refine the largest-error cells carrying half of the total error
        order_idx = np.argsort(-errs, kind="stable")
        cum = np.cumsum(errs[order_idx])
        k = int(np.searchsorted(cum, 0.5 * err)) + 1
        budget = max(1, (max_cells - len(vals)) // (2 ** d - 1))
        pick = np.sort(order_idx[:min(k, budget)])
        keep = np.ones(len(vals), dtype=bool)
        keep[pick] = False
        clo, chi = _split(lo[pick], hi[pick])
        cv, m1 = _rule_on_cells(f, clo, chi, order, threads)
        cl, m2 = _rule_on_cells(f, clo, chi, order - 1, threads)
        nevals += m1 + m2
        lo = np.vstack([lo[keep], clo])
        hi = np.vstack([hi[keep], chi])
        vals = np.concatenate([vals[keep], cv])
        errs = np.concatenate([errs[keep], np.abs(cv - cl)])


def indicator_cubature(f: Integrand, inside: Callable[[np.ndarray], np.ndarray], lower, upper, *,
                       divisions=8, max_depth: int = 12, order: int = 3, probe: int = 3,
                       max_cells: int = 2_000_000, threads: int = 1) -> QuadResult:
    """Integrate f over {inside} within the box by refining straddling cells.

    A cell is classified by evaluating ``inside`` on a probe^d grid (corners
    included).  Uniform cells are integrated with the tensor rule (or dropped);
    mixed cells are bisected until ``max_depth``; at that depth they contribute
    the cell integral times the inside fraction of the probe points, and half
    of their integral is added to the error estimate.
    """
    lo, hi = _initial_cells(lower, upper, divisions)
    d = lo.shape[1]
    g = np.linspace(0.0, 1.0, probe)
    probes = np.array(list(itertools.product(g, repeat=d)))
    acc_v, acc_e = [], []
    nevals = 0
    ncells = 0
    converged = True
    for depth in range(max_depth + 1):
        if len(lo) == 0:
            break
        pts = lo[:, None, :] + (hi - lo)[:, None, :] * probes[None, :, :]
        flags = _eval_points(lambda x: np.asarray(inside(x), dtype=float), pts.reshape(-1, d), threads)
        flags = flags.reshape(len(lo), len(probes)) > 0.5
        nevals += flags.size
        frac = flags.mean(axis=1)
        full = frac == 1.0
        mixed = (frac > 0) & ~full
        ncells += len(lo)
        if np.any(full):
            v, m = _rule_on_cells(f, lo[full], hi[full], order, threads)
            nevals += m
            acc_v.append(v)
            acc_e.append(np.zeros_like(v))
        last = depth == max_depth or len(lo[mixed]) * 2 ** d > max_cells
        if last:
            if np.any(mixed):
                v, m = _rule_on_cells(f, lo[mixed], hi[mixed], order, threads)
                nevals += m
                acc_v.append(v * frac[mixed])
                acc_e.append(0.5 * np.abs(v))
                if depth < max_depth:
                    converged = False
            break
        lo, hi = _split(lo[mixed], hi[mixed])
    vals = np.concatenate(acc_v) if acc_v else np.zeros(0)
    errs = np.concatenate(acc_e) if acc_e else np.zeros(0)
    return QuadResult(math.fsum(vals), math.fsum(errs), nevals, converged, ncells)


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class MCResult:
    value: float
    stderr: float
    samples: int


def _strata_grid(n_samples: int, d: int, per_stratum: int):
    m = max(1, int(math.floor((n_samples / per_stratum) ** (1.0 / d))))
    return m


def monte_carlo(f: Integrand, lower, upper, *, samples: int = 1_000_000, seed: int = 0,
                method: str = "stratified", threads: int = 1, replicates: int = 16) -> MCResult:
    """Estimate the integral of ``f`` over the box with a standard error.

    ``stratified``: m^d equal strata, ``samples // m^d`` (>= 2) uniform points
    each, variance from within-stratum sample variances.  ``sobol``: randomly
    scrambled Sobol points, ``replicates`` independent scramblings, standard
    error from their spread.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    vol = float(np.prod(upper - lower))
    root = np.random.SeedSequence(seed)
    if method == "stratified":
        per = 4
        m = _strata_grid(samples, d, per)
        per = max(2, samples // m ** d)
        n_strata = m ** d
        strata_per_chunk = max(1, CHUNK_POINTS // per)
        starts = list(range(0, n_strata, strata_per_chunk))
        seeds = root.spawn(len(starts))
        cell = (upper - lower) / m

        def run(i):
            s0 = starts[i]
            s1 = min(n_strata, s0 + strata_per_chunk)
            ids = np.arange(s0, s1)
            coords = np.stack(np.unravel_index(ids, (m,) * d), axis=-1)
            rng = np.random.default_rng(seeds[i])
            u = rng.random((len(ids), per, d))
            pts = lower + (coords[:, None, :] + u) * cell
            vals = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(len(ids), per)
            means = vals.mean(axis=1)
            var = vals.var(axis=1, ddof=1)
            return means, var

        parts = _map_chunks(run, list(range(len(starts))), threads)
        means = np.concatenate([p[0] for p in parts])
        var = np.concatenate([p[1] for p in parts])
        sv = vol / n_strata
        value = math.fsum(means * sv)
        stderr = math.sqrt(math.fsum(var * sv * sv / per))
        return MCResult(value, stderr, n_strata * per)
    if method == "sobol":
        from scipy.stats import qmc
        per_rep = 1 << max(1, int(round(math.log2(max(2, samples // replicates)))))
        seeds = root.spawn(replicates)

        def run(i):
            eng = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seeds[i]))
            pts = lower + eng.random(per_rep) * (upper - lower)
            vals = _eval_points(f, pts, 1)
            return vol * math.fsum(vals) / per_rep

        ests = np.array(_map_chunks(run, list(range(replicates)), threads))
        return MCResult(math.fsum(ests) / replicates, float(ests.std(ddof=1) / math.sqrt(replicates)),
                        per_rep * replicates)
    raise ValueError(f"unknown Monte Carlo method {method!r}")
