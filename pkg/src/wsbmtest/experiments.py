"""Monte Carlo harnesses for calibration and power of the two-sample test.

Four modes over a grid of graph sizes:

* ``type1``   — null rejection rates, view 1 mean-scaled by each gamma
                (gamma is the ratio of view-1 to view-2 block means, the
                convention the reference rejection tables were produced
                under);
* ``power``   — rejection rates when view 2's membership relocates
                floor(ell * n) nodes out of every community;
* ``clt_diag`` — distribution of the null z-scores (moments, KS distance);
* ``expansion_diag`` — size of the remainder between the statistic and its
                dominant linear term.

Replicate r of cell c draws all randomness from streams spawned off
(seed, spawn_key=(c, r)), so results are reproducible and identical whether
replicates run serially or on any number of workers.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Optional

import numpy as np
from scipy.stats import kstest

from .errors import DomainError, ValidationError, WsbmError
from .inference import two_sample_test
from .model import BlockModelSpec, Membership, WeightLaw, expectation_matrix, sample_graph
from .spectral import linear_term, scaled_subspace_statistic, top_k_spectrum

__all__ = [
    "ExperimentGrid",
    "CellResult",
    "ExperimentResult",
    "plant_power_alternative",
    "run_experiment",
    "run_type1",
    "run_power",
    "run_clt_diag",
    "run_expansion_diag",
    "grid_from_dict",
    "load_grid",
]

_MODES = ("type1", "power", "clt_diag", "expansion_diag")


@dataclass
class ExperimentGrid:
    """A sweep configuration; ``base_spec`` fixes the laws, and the block
    proportions (``block_ratio``, defaulting to the base partition's sizes)
    are re-apportioned at each n in ``ns``."""

    base_spec: BlockModelSpec
    mode: str
    ns: tuple[int, ...]
    gammas: tuple[float, ...] = (1.0,)
    ells: tuple[float, ...] = ()
    replicates: int = 2000
    alpha: float = 0.05
    seed: int = 0
    moments: str = "plug_in"
    # "subspace" runs the operational test as defined; the "expansion"
    # statistic paired with oracle moments reproduces the reference tables
    statistic: str = "subspace"
    transform: str = "procrustes"
    collect_z: bool = False
    block_ratio: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        self.ns = tuple(int(n) for n in self.ns)
        self.gammas = tuple(float(g) for g in self.gammas)
        self.ells = tuple(float(e) for e in self.ells)
        if self.block_ratio is None:
            self.block_ratio = tuple(int(s) for s in self.base_spec.membership.block_sizes)
        else:
            self.block_ratio = tuple(float(r) for r in self.block_ratio)
        if self.mode not in _MODES:
            raise ValidationError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        if any(g <= 0 for g in self.gammas):
            raise ValidationError("gammas must be positive")
        if self.mode == "power" and not self.ells:
            raise ValidationError("power mode needs at least one ell")
        if self.moments not in ("plug_in", "oracle"):
            raise ValidationError(f"moments must be 'plug_in' or 'oracle', got {self.moments!r}")
        if self.statistic not in ("subspace", "expansion"):
            raise ValidationError(
                f"statistic must be 'subspace' or 'expansion', got {self.statistic!r}"
            )

    def spec_at(self, n: int) -> BlockModelSpec:
        return BlockModelSpec(
            Membership.from_ratio(n, self.block_ratio),
            self.base_spec.intra,
            self.base_spec.inter,
        )

    def cells(self) -> list[dict]:
        out = []
        if self.mode == "power":
            sweep = [("ell", e) for e in self.ells]
        else:
            sweep = [("gamma", g) for g in self.gammas]
        for n in self.ns:
            for key, val in sweep:
                out.append({"n": n, key: val})
        return out


@dataclass
class CellResult:
    """Aggregated outcome of one grid point."""

    n: int
    gamma: Optional[float] = None
    ell: Optional[float] = None
    replicates: int = 0
    rejection_rate: Optional[float] = None
    mc_se: Optional[float] = None
    mean_z: Optional[float] = None
    var_z: Optional[float] = None
    runtime: float = 0.0
    error: Optional[str] = None
    extras: dict = field(default_factory=dict)
    z_samples: Optional[list] = None

    def to_dict(self, with_timing: bool = False) -> dict:
        d = {
            "n": self.n,
            "gamma": self.gamma,
            "ell": self.ell,
            "replicates": self.replicates,
            "rejection_rate": self.rejection_rate,
            "mc_se": self.mc_se,
            "mean_z": self.mean_z,
            "var_z": self.var_z,
            "error": self.error,
            "extras": self.extras,
        }
        if self.z_samples is not None:
            d["z_samples"] = self.z_samples
        if with_timing:
            d["runtime"] = self.runtime
        return d


@dataclass
class ExperimentResult:
    mode: str
    seed: int
    alpha: float
    replicates: int
    cells: list[CellResult]

    def cell(self, n: int, gamma: Optional[float] = None, ell: Optional[float] = None) -> CellResult:
        for c in self.cells:
            if c.n == n and (gamma is None or c.gamma == gamma) and (ell is None or c.ell == ell):
                return c
        raise KeyError(f"no cell with n={n}, gamma={gamma}, ell={ell}")

    def to_dict(self, with_timing: bool = False) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "alpha": self.alpha,
            "replicates": self.replicates,
            "cells": [c.to_dict(with_timing) for c in self.cells],
        }

    def to_json(self, with_timing: bool = False, **kwargs) -> str:
        # timing is excluded by default so identical (grid, seed) runs
        # serialize to identical bytes
        return json.dumps(self.to_dict(with_timing), sort_keys=True, **kwargs)

    def to_csv(self) -> str:
        """Rows n, columns gamma (type1/clt_diag) or ell (power); expansion
        mode emits its per-n diagnostics as columns."""
        lines = []
        if self.mode == "expansion_diag":
            lines.append("n,median_abs_remainder,remainder_ratio")
            for c in self.cells:
                if c.error:
                    lines.append(f"{c.n},NA,NA")
                else:
                    lines.append(
                        f"{c.n},{c.extras['median_abs_remainder']:.10g},"
                        f"{c.extras['remainder_ratio']:.10g}"
                    )
            return "\n".join(lines) + "\n"
        key = "ell" if self.mode == "power" else "gamma"
        sweep = sorted({getattr(c, key) for c in self.cells}, reverse=(key == "gamma"))
        header = "n," + ",".join(f"{key}={v:g}" for v in sweep)
        lines.append(header)
        for n in sorted({c.n for c in self.cells}):
            row = [str(n)]
            for v in sweep:
                try:
                    c = self.cell(n, **{key: v})
                    row.append("NA" if c.error else f"{c.rejection_rate:.10g}")
                except KeyError:
                    row.append("")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def plant_power_alternative(m: Membership, ell: float, seed) -> Membership:
    """The power-table alternative: floor(ell * n) nodes relocated out of
    every community (each to a uniformly chosen other label).

    The total displacement is K * floor(ell * n) nodes; a cell is infeasible
    when floor(ell * n) = 0. Redraws until no community is emptied.
    """
    n, K = m.n, m.K
    per_block = int(np.floor(ell * n))
    if per_block == 0:
        if ell > 0:
            raise DomainError(f"infeasible ell={ell}: floor(ell*n)=0 at n={n}")
        return m
    if K < 2:
        raise DomainError("cannot plant an alternative with K=1")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        labels = m.labels.copy()
        for k in range(1, K + 1):
            pool = np.flatnonzero(m.labels == k)
            if pool.size < per_block:
                raise DomainError(
                    f"infeasible ell={ell}: block {k} has {pool.size} nodes, "
                    f"needs {per_block} to relocate"
                )
            idx = rng.choice(pool, size=per_block, replace=False)
            shift = rng.integers(1, K, size=per_block)
            labels[idx] = (labels[idx] - 1 + shift) % K + 1
        counts = np.bincount(labels, minlength=K + 1)[1:]
        if np.all(counts > 0):
            return Membership(labels)
    raise DomainError(f"could not relocate {per_block} nodes per block without emptying one")


# ---------------------------------------------------------------------------
# per-replicate work, shared by the serial and multiprocess paths

_CTX: dict = {}


def _limit_worker_threads():
    try:
        from threadpoolctl import threadpool_limits

        _CTX["_limiter"] = threadpool_limits(limits=1)
    except ImportError:
        pass


def _init_worker(ctx: dict, limit_threads: bool = True):
    _CTX.clear()
    _CTX.update(ctx)
    if limit_threads:
        _limit_worker_threads()


def _replicate(rep: int) -> tuple[int, tuple]:
    ctx = _CTX
    ss = np.random.SeedSequence(ctx["seed"], spawn_key=(ctx["cell_index"], rep))
    s_w1, s_w2, s_plant, s_cluster = ss.spawn(4)
    spec1: BlockModelSpec = ctx["spec1"]
    spec2: BlockModelSpec = ctx["spec2"]
    if ctx["mode"] == "power":
        m2 = plant_power_alternative(spec2.membership, ctx["ell"], s_plant)
        spec2 = BlockModelSpec(m2, spec2.intra, spec2.inter)
    W1 = sample_graph(spec1, s_w1)
    W2 = sample_graph(spec2, s_w2)
    K = spec1.K
    if ctx["mode"] == "expansion_diag":
        S1 = top_k_spectrum(W1, K)
        S2 = top_k_spectrum(W2, K)
        T = scaled_subspace_statistic(S1.vectors, S2.vectors, S2.values, transform=ctx["transform"])
        L = linear_term(W1, W2, ctx["gamma_stat"], ctx["ve2"])
        return rep, (T, L)
    moments = "plug_in" if ctx["moments"] == "plug_in" else (spec1, spec2)
    report = two_sample_test(
        W1,
        W2,
        K,
        ctx["alpha"],
        statistic=ctx["statistic"],
        transform=ctx["transform"],
        moments=moments,
        seed=int(s_cluster.generate_state(1)[0]),
    )
    return rep, (report.reject, report.z)


def _run_cell(grid: ExperimentGrid, cell_index: int, cell: dict, workers: int) -> CellResult:
    n = cell["n"]
    gamma = cell.get("gamma")
    ell = cell.get("ell")
    result = CellResult(n=n, gamma=gamma, ell=ell, replicates=grid.replicates)
    start = time.perf_counter()
    try:
        base = grid.spec_at(n)
        scale = gamma if gamma is not None else (grid.gammas[0] if grid.gammas else 1.0)
        # gamma is the view-1/view-2 mean ratio, so view 1 carries the scaling
        spec1 = base.scale_gamma(scale) if scale != 1.0 else base
        spec2 = base
        if ell is not None and int(np.floor(ell * n)) == 0 and ell > 0:
            raise DomainError(f"infeasible ell={ell}: floor(ell*n)=0 at n={n}")
        ctx = {
            "seed": grid.seed,
            "cell_index": cell_index,
            "mode": grid.mode,
            "spec1": spec1,
            "spec2": spec2,
            # the statistic centers gamma_stat * W1 - W2
            "gamma_stat": spec2.intra.mean / spec1.intra.mean,
            "ell": ell,
            "alpha": grid.alpha,
            "moments": grid.moments,
            "statistic": grid.statistic,
            "transform": grid.transform,
        }
        if grid.mode == "expansion_diag":
            ctx["ve2"] = np.asarray(top_k_spectrum(expectation_matrix(spec2), spec1.K).vectors)
        reps = range(grid.replicates)
        if workers <= 1:
            _init_worker(ctx, limit_threads=False)
            pairs = [_replicate(r) for r in reps]
        else:
            mp = get_context("fork")
            chunk = max(1, grid.replicates // (workers * 8))
            with mp.Pool(workers, initializer=_init_worker, initargs=(ctx,)) as pool:
                pairs = list(pool.imap_unordered(_replicate, reps, chunksize=chunk))
        pairs.sort(key=lambda t: t[0])
        values = [v for _, v in pairs]
        _aggregate(grid, result, values)
    except (WsbmError, ValidationError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    result.runtime = time.perf_counter() - start
    return result


def _aggregate(grid: ExperimentGrid, result: CellResult, values: list[tuple]) -> None:
    N = len(values)
    if grid.mode == "expansion_diag":
        T = np.array([v[0] for v in values])
        L = np.array([v[1] for v in values])
        remainder = np.abs(T - L)
        rate_scale = grid.base_spec.K * math.log(result.n) ** 2 / result.n
        result.extras = {
            "median_abs_remainder": float(np.median(remainder)),
            "remainder_ratio": float(np.median(remainder) / rate_scale),
            "mean_statistic": float(T.mean()),
            "mean_linear_term": float(L.mean()),
        }
        return
    rejects = np.array([v[0] for v in values], dtype=bool)
    z = np.array([v[1] for v in values], dtype=float)
    r = float(rejects.mean())
    result.rejection_rate = r
    result.mc_se = math.sqrt(r * (1.0 - r) / N)
    result.mean_z = float(z.mean())
    result.var_z = float(z.var(ddof=1)) if N > 1 else 0.0
    if grid.mode == "clt_diag":
        ks = kstest(z, "norm")
        result.extras = {"ks_stat": float(ks.statistic), "ks_pvalue": float(ks.pvalue)}
    if grid.collect_z or grid.mode == "clt_diag":
        result.z_samples = [float(v) for v in z]


def run_experiment(grid: ExperimentGrid, workers: int = 1) -> ExperimentResult:
    """Run every cell of the grid; cells are independent and replicates are
    parallelized over ``workers`` processes."""
    cells = [
        _run_cell(grid, idx, cell, workers) for idx, cell in enumerate(grid.cells())
    ]
    return ExperimentResult(grid.mode, grid.seed, grid.alpha, grid.replicates, cells)


def _run_mode(grid: ExperimentGrid, mode: str, workers: int) -> ExperimentResult:
    if grid.mode != mode:
        raise ValidationError(f"grid mode is {grid.mode!r}, expected {mode!r}")
    return run_experiment(grid, workers)


def run_type1(grid: ExperimentGrid, workers: int = 1) -> ExperimentResult:
    return _run_mode(grid, "type1", workers)


def run_power(grid: ExperimentGrid, workers: int = 1) -> ExperimentResult:
    return _run_mode(grid, "power", workers)


def run_clt_diag(grid: ExperimentGrid, workers: int = 1) -> ExperimentResult:
    return _run_mode(grid, "clt_diag", workers)


def run_expansion_diag(grid: ExperimentGrid, workers: int = 1) -> ExperimentResult:
    return _run_mode(grid, "expansion_diag", workers)


# ---------------------------------------------------------------------------
# grid config files

def grid_from_dict(cfg: dict) -> ExperimentGrid:
    """Build a grid from a plain config mapping (parsed TOML or JSON).

    The ``model`` table gives the laws and either ``block_ratio`` or explicit
    ``block_sizes``; the base spec is materialized at the first n of ``ns``.
    """
    try:
        model = cfg["model"]
        ns = tuple(int(n) for n in cfg["ns"])
        intra = WeightLaw.from_dict(model["intra"])
        inter = WeightLaw.from_dict(model["inter"])
    except KeyError as exc:
        raise ValidationError(f"grid config missing required key: {exc}") from exc
    ratio = None
    if "block_sizes" in model:
        membership = Membership.from_block_sizes(model["block_sizes"])
    elif "block_ratio" in model:
        ratio = tuple(model["block_ratio"])
        membership = Membership.from_ratio(ns[0], ratio)
    else:
        raise ValidationError("model config needs block_sizes or block_ratio")
    base = BlockModelSpec(membership, intra, inter, model.get("beta"))
    return ExperimentGrid(
        base_spec=base,
        block_ratio=ratio,
        mode=cfg.get("mode", "type1"),
        ns=ns,
        gammas=tuple(cfg.get("gammas", (1.0,))),
        ells=tuple(cfg.get("ells", ())),
        replicates=int(cfg.get("replicates", 2000)),
        alpha=float(cfg.get("alpha", 0.05)),
        seed=int(cfg.get("seed", 0)),
        moments=cfg.get("moments", "plug_in"),
        statistic=cfg.get("statistic", "subspace"),
        transform=cfg.get("transform", "procrustes"),
        collect_z=bool(cfg.get("collect_z", False)),
    )


def load_grid(path: str) -> ExperimentGrid:
    """Read a grid config from a .toml or .json file."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    if str(path).endswith(".json"):
        cfg = json.loads(text)
    else:
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        cfg = tomllib.loads(text)
    return grid_from_dict(cfg)
