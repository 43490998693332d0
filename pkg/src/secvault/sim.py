"""I/O experiments: sparsity workloads, expected reads and Monte-Carlo averages."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from math import lgamma, log
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .codec import CodeParams, IoReport, Mode, encode_archive, first_qualifying_subset, read_cost, retrieval_plan
from .errors import InsufficientSamplesError
from .resilience import MAX_CENSUS_N, FailureModel, _recoverable_masks

TRIAL_CHUNK = 1 << 15
DEFAULT_GRID = (0.5, 1.0, 2.0, 4.0)

__all__ = [
    "SparsityPmf", "IoReport", "TrialConfig", "PairIo", "LatestIo", "MuEstimate", "ScenarioResult",
    "pmf_eval", "expected_io_pair", "expected_io_latest", "monte_carlo_mu", "exact_mu",
    "scenario_l5", "mu_rows", "expected_io_rows",
]


@dataclass(frozen=True)
class SparsityPmf:
    """Distribution of the delta sparsity over the support ``1..k``.

    Build with :meth:`trunc_exponential`, :meth:`trunc_poisson`,
    :meth:`explicit` or :meth:`parse`.
    """

    kind: str
    k: int
    probs: tuple
    param: float | None = None
    normalizer: float = 1.0

    def __post_init__(self):
        if len(self.probs) != self.k:
            raise ValueError("probabilities must cover the support 1..k")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    @classmethod
    def trunc_exponential(cls, alpha: float, k: int) -> "SparsityPmf":
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        logw = [-alpha * g for g in range(1, k + 1)]
        return cls._from_logweights("trunc_exponential", k, logw, alpha)

    @classmethod
    def trunc_poisson(cls, lam: float, k: int) -> "SparsityPmf":
        if lam <= 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        logw = [g * log(lam) - lam - lgamma(g + 1) for g in range(1, k + 1)]
        return cls._from_logweights("trunc_poisson", k, logw, lam)

    @classmethod
    def explicit(cls, table: Mapping[int, float] | Sequence[float], k: int | None = None) -> "SparsityPmf":
        """From weights per sparsity level (normalised here)."""
        if isinstance(table, Mapping):
            k = max(table) if k is None else k
            if any(not 1 <= g <= k for g in table):
                raise ValueError(f"sparsity levels must lie in 1..{k}")
            w = [float(table.get(g, 0.0)) for g in range(1, k + 1)]
        else:
            w = [float(v) for v in table]
            k = len(w) if k is None else k
            w += [0.0] * (k - len(w))
        if len(w) != k or any(v < 0 for v in w) or sum(w) <= 0:
            raise ValueError("explicit table needs k nonnegative weights with a positive sum")
        s = sum(w)
        probs = [v / s for v in w]
        probs[-1] = 1.0 - sum(probs[:-1]) if probs[-1] else probs[-1]
        return cls("explicit", k, tuple(probs), None, 1.0 / s)

    @classmethod
    def _from_logweights(cls, kind, k, logw, param):
        top = max(logw)
        w = np.exp(np.array(logw) - top)
        c = 1.0 / w.sum()
        probs = w * c
        return cls(kind, k, tuple(float(v) for v in probs), float(param), float(c * np.exp(-top)))

    @classmethod
    def parse(cls, text: str, k: int) -> "SparsityPmf":
        """``exp:<alpha>``, ``poisson:<lambda>`` or ``table:<file>``.

        A table file holds one ``gamma weight`` pair per line.
        """
        kind, _, arg = text.partition(":")
        if kind == "exp":
            return cls.trunc_exponential(float(arg), k)
        if kind == "poisson":
            return cls.trunc_poisson(float(arg), k)
        if kind == "table":
            table = {}
            for line in Path(arg).read_text().splitlines():
                line = line.split("#", 1)[0].strip()
                if line:
                    g, w = line.replace(",", " ").split()
                    table[int(g)] = float(w)
            return cls.explicit(table, k)
        raise ValueError(f"unknown PMF spec {text!r}; use exp:<a>, poisson:<l> or table:<file>")

    def __call__(self, gamma: int) -> float:
        return pmf_eval(self, gamma)

    @property
    def label(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param:g})"


def pmf_eval(pmf: SparsityPmf, gamma: int) -> float:
    if not 1 <= gamma <= pmf.k:
        raise ValueError(f"sparsity {gamma} outside the support 1..{pmf.k}")
    return pmf.probs[gamma - 1]


@dataclass(frozen=True)
class PairIo:
    expected: float
    reduction_pct: float


@dataclass(frozen=True)
class LatestIo:
    expected: float
    increase_pct: float


def _check_support(pmf, params):
    if pmf.k != params.k:
        raise ValueError(f"PMF support 1..{pmf.k} does not match k={params.k}")


def expected_io_pair(pmf: SparsityPmf, params: CodeParams) -> PairIo:
    """Expected reads for versions 1 and 2 together, and the % saving over ``2k``."""
    _check_support(pmf, params)
    k = params.k
    e = k + sum(pr * read_cost(params, g) for g, pr in enumerate(pmf.probs, 1))
    return PairIo(e, (2 * k - e) / (2 * k) * 100.0)


def expected_io_latest(pmf: SparsityPmf, params: CodeParams, mode: Mode | str = Mode.BASIC) -> LatestIo:
    """Expected reads for version 2 alone, and the % increase over ``k``."""
    _check_support(pmf, params)
    mode = Mode(mode)
    k = params.k
    if mode is Mode.BASIC:
        e = expected_io_pair(pmf, params).expected
    elif mode is Mode.OPTIMIZED:
        e = sum(pr * (k if 2 * g >= k else k + read_cost(params, g)) for g, pr in enumerate(pmf.probs, 1))
    else:
        e = float(k)
    return LatestIo(e, (e - k) / k * 100.0)


@dataclass(frozen=True)
class TrialConfig:
    params: CodeParams
    model: FailureModel
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class MuEstimate:
    mu: float
    p_sparse: float
    survivors: int
    trials: int

    def __float__(self):
        return self.mu


def _sparse_lookup(params: CodeParams, gamma: int):
    if params.n <= MAX_CENSUS_N:
        table = _recoverable_masks(params, gamma)[1]
        return lambda masks: table[masks]
    memo = {}

    def lookup(masks):
        out = np.empty(len(masks), dtype=bool)
        for i, m in enumerate(masks.tolist()):
            if m not in memo:
                alive = [b for b in range(params.n) if m >> b & 1]
                memo[m] = first_qualifying_subset(params, gamma, alive) is not None
            out[i] = memo[m]
        return out
    return lookup


def _run_chunk(args):
    seq, size, n, k, p, lookup = args
    rng = np.random.Generator(np.random.PCG64(seq))
    alive = rng.random((size, n)) >= p
    weights = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
    masks = (alive.astype(np.uint64) * weights).sum(axis=1).astype(np.int64)
    keep = alive.sum(axis=1) >= k
    hits = lookup(masks[keep])
    return int(keep.sum()), int(hits.sum())


def monte_carlo_mu(config: TrialConfig, gamma: int, differential: bool = True, workers: int = 1) -> MuEstimate:
    """Average reads to fetch a ``gamma``-sparse delta under random failures.

    Failure patterns leaving fewer than ``k`` live nodes are discarded.  Of
    the rest, a fraction ``p_sparse`` contains a live ``2*gamma`` subset
    allowing sparse recovery; the average is
    ``p_sparse * 2*gamma + (1 - p_sparse) * k``.  With
    ``differential=False`` every read costs ``k`` (the baseline).

    Trials are split into fixed-size chunks, each with its own stream
    spawned from ``seed``, so the result does not depend on ``workers``.
    """
    params = config.params
    n, k = params.n, params.k
    if not 1 <= gamma or not 2 * gamma < k:
        raise ValueError(f"need 1 <= gamma and 2*gamma < k, got gamma={gamma}, k={k}")
    lookup = _sparse_lookup(params, gamma)
    sizes = [TRIAL_CHUNK] * (config.trials // TRIAL_CHUNK)
    if config.trials % TRIAL_CHUNK:
        sizes.append(config.trials % TRIAL_CHUNK)
    seqs = np.random.SeedSequence(config.seed).spawn(len(sizes))
    jobs = [(s, size, n, k, config.model.p, lookup) for s, size in zip(seqs, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]
    survivors = sum(r[0] for r in results)
    hits = sum(r[1] for r in results)
    if survivors == 0:
        raise InsufficientSamplesError(f"no trial out of {config.trials} left {k} live nodes")
    p_sparse = hits / survivors if differential else 0.0
    mu = p_sparse * 2 * gamma + (1 - p_sparse) * k
    return MuEstimate(mu, p_sparse, survivors, config.trials)


def exact_mu(params: CodeParams, gamma: int, p: float) -> tuple[float, float]:
    """Exact ``(mu, p_sparse)`` by weighting every failure pattern (n <= 24)."""
    full_ok, sparse_ok, popcount = _recoverable_masks(params, gamma)
    n, k = params.n, params.k
    w = p ** (n - popcount) * (1 - p) ** popcount
    denom = w[full_ok].sum()
    p_sparse = float(w[full_ok & sparse_ok].sum() / denom)
    return p_sparse * 2 * gamma + (1 - p_sparse) * k, p_sparse


# -- the five-version scenario --------------------------------------------

L5_GAMMAS = (3, 8, 3, 6)
L5_BASIC_CUMULATIVE = (10, 16, 26, 32, 42)
L5_OPTIMIZED_PER_VERSION = (10, 16, 10, 16, 10)


def synthesize_versions(params: CodeParams, gammas: Sequence[int], seed: int = 0) -> list[np.ndarray]:
    """A dense first version followed by deltas of exactly the given sparsities."""
    rng = np.random.default_rng(seed)
    F, k = params.field, params.k
    versions = [F.random(k, rng, nonzero=True)]
    for g in gammas:
        z = np.zeros(k, dtype=np.int64)
        z[rng.choice(k, size=g, replace=False)] = F.random(g, rng, nonzero=True)
        versions.append(versions[-1] ^ z)
    return versions


@dataclass
class ScenarioResult:
    n: int
    k: int
    gammas: tuple
    # (code, mode) -> {"per_version": [...], "cumulative": [...], "pattern": [...]}
    tables: dict = dc_field(default_factory=dict)

    @property
    def baseline_per_version(self) -> list[int]:
        return [self.k] * (len(self.gammas) + 1)

    @property
    def baseline_cumulative(self) -> list[int]:
        return [self.k * l for l in range(1, len(self.gammas) + 2)]

    def saving_percent(self, code="nonsys", mode="basic") -> float:
        total = self.tables[(code, mode)]["cumulative"][-1]
        base = self.baseline_cumulative[-1]
        return (base - total) / base * 100.0

    def rows(self):
        out = []
        L = len(self.gammas) + 1
        for (code, mode), t in sorted(self.tables.items()):
            for l in range(1, L + 1):
                out.append((code, mode, l, "eta_version", t["per_version"][l - 1]))
                out.append((code, mode, l, "eta_cumulative", t["cumulative"][l - 1]))
        for l in range(1, L + 1):
            out.append(("nondiff", "", l, "eta_version", self.baseline_per_version[l - 1]))
            out.append(("nondiff", "", l, "eta_cumulative", self.baseline_cumulative[l - 1]))
        return out


def scenario_l5(n: int = 20, k: int = 10, gammas: Sequence[int] = L5_GAMMAS, seed: int = 0,
                modes: Iterable[Mode | str] = (Mode.BASIC, Mode.OPTIMIZED)) -> ScenarioResult:
    """Run the five-version I/O example through the real encoder and planner.

    With the default arguments the computed tables are checked against
    the published numbers and a mismatch raises ``AssertionError``.
    """
    result = ScenarioResult(n, k, tuple(gammas))
    for code, systematic in (("nonsys", False), ("sys", True)):
        params = CodeParams.cauchy(n, k, systematic)
        versions = synthesize_versions(params, gammas, seed)
        for mode in map(Mode, modes):
            archive = encode_archive(versions, params, mode)
            L = archive.L
            result.tables[(code, mode.value)] = {
                "pattern": archive.pattern,
                "per_version": [retrieval_plan(archive, l).total for l in range(1, L + 1)],
                "cumulative": [retrieval_plan(archive, l, prefix=True).total for l in range(1, L + 1)],
            }
    if (n, k, tuple(gammas)) == (20, 10, L5_GAMMAS):
        for code in ("nonsys", "sys"):
            if ("basic" in {m for _, m in result.tables}):
                assert tuple(result.tables[(code, "basic")]["cumulative"]) == L5_BASIC_CUMULATIVE
            if ("optimized" in {m for _, m in result.tables}):
                assert tuple(result.tables[(code, "optimized")]["per_version"]) == L5_OPTIMIZED_PER_VERSION
        assert result.baseline_cumulative[-1] == 50
    return result


# -- CSV row builders ------------------------------------------------------


def mu_rows(params: CodeParams, gamma: int, p_grid: Iterable[float], trials: int, seed: int):
    """Rows ``(sweep, value, metric, mu)`` for the sparse-read average across p."""
    rows = []
    sys_params = params if params.systematic else CodeParams.cauchy(
        params.n, params.k, True, params.field.width, params.field.poly)
    nonsys_params = params if not params.systematic else CodeParams.cauchy(
        params.n, params.k, False, params.field.width, params.field.poly)
    for p in p_grid:
        model = FailureModel(float(p))
        for name, prm, diff in (("mu_nonsys", nonsys_params, True), ("mu_sys", sys_params, True),
                                ("mu_nondiff", nonsys_params, False)):
            est = monte_carlo_mu(TrialConfig(prm, model, trials, seed), gamma, differential=diff)
            rows.append(("p", float(p), name, est.mu))
        if params.n <= MAX_CENSUS_N:
            rows.append(("p", float(p), "mu_sys_exact", exact_mu(sys_params, gamma, float(p))[0]))
    return rows


def expected_io_rows(params: CodeParams, pmfs: Iterable[SparsityPmf]):
    rows = []
    for pmf in pmfs:
        sweep = "alpha" if pmf.kind == "trunc_exponential" else "lambda" if pmf.kind == "trunc_poisson" else "table"
        value = pmf.param if pmf.param is not None else ""
        pair = expected_io_pair(pmf, params)
        rows.append((sweep, value, "expected_reads_pair", pair.expected))
        rows.append((sweep, value, "reduction_pct_pair", pair.reduction_pct))
        for mode in (Mode.BASIC, Mode.OPTIMIZED):
            latest = expected_io_latest(pmf, params, mode)
            rows.append((sweep, value, f"expected_reads_latest_{mode.value}", latest.expected))
            rows.append((sweep, value, f"increase_pct_latest_{mode.value}", latest.increase_pct))
    return rows
