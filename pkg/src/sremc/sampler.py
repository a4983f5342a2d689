"""Metropolis-Hastings Markov chains over spin/bit configurations.

Chains run as a vectorized ensemble: ``n_chains`` independent walkers are
stepped in lockstep so model evaluations are batched.  All move rules have
symmetric proposal probabilities, so the plain Metropolis acceptance
min(1, |Psi(s')|^2 / |Psi(s)|^2) satisfies detailed balance.  One sweep is
``n_sites`` proposal attempts.

The RNG is numpy's counter-based Philox generator; a run is reproducible
from (seed, n_chains).  Null proposals (e.g. an exchange move drawn on a
parallel-spin bond) leave the configuration unchanged and are counted as
rejected.

Error bars downstream use batch means over contiguous per-chain blocks,
which stays conservative under residual autocorrelation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ansatz import AmplitudeModel, strip_log_shift
from .errors import InitializationError


def _make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


class MoveRule:
    """Proposal kernel: symmetric, basis-aware, sector-preserving where stated."""

    basis: str
    n_sites: int

    def propose_batch(self, configs: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
        """Return (proposals, active) for a (C, n) batch.

        ``active`` is False where the rule had no valid move (proposal equals
        the input and is counted as rejected).
        """
        raise NotImplementedError

    def propose(self, config, rng):
        proposals, _ = self.propose_batch(np.asarray(config)[None, :], rng)
        return proposals[0]

    def initial_configurations(self, n_chains: int, rng) -> np.ndarray:
        raise NotImplementedError


class SingleFlip(MoveRule):
    """Flip one uniformly chosen spin."""

    def __init__(self, n_sites: int, basis: str = "pm1"):
        self.n_sites = n_sites
        self.basis = basis

    def _flip(self, configs, rows, sites):
        if self.basis == "pm1":
            configs[rows, sites] = -configs[rows, sites]
        else:
            configs[rows, sites] = 1 - configs[rows, sites]

    def propose_batch(self, configs, rng):
        out = configs.copy()
        c = out.shape[0]
        sites = rng.integers(self.n_sites, size=c)
        self._flip(out, np.arange(c), sites)
        return out, np.ones(c, dtype=bool)

    def initial_configurations(self, n_chains, rng):
        if self.basis == "pm1":
            return rng.choice(np.array([-1, 1], dtype=np.int8), size=(n_chains, self.n_sites))
        return rng.integers(0, 2, size=(n_chains, self.n_sites), dtype=np.int8)


class ReplicaSingleFlip(SingleFlip):
    """Flip one spin in one uniformly chosen block of a replicated configuration."""

    def __init__(self, n_physical: int, n_blocks: int = 4):
        super().__init__(n_physical * n_blocks, basis="pm1")
        self.n_physical = n_physical
        self.n_blocks = n_blocks

    def propose_batch(self, configs, rng):
        out = configs.copy()
        c = out.shape[0]
        blocks = rng.integers(self.n_blocks, size=c)
        sites = rng.integers(self.n_physical, size=c)
        self._flip(out, np.arange(c), blocks * self.n_physical + sites)
        return out, np.ones(c, dtype=bool)


class ExchangeMove(MoveRule):
    """Swap an opposite-spin pair on a uniformly chosen bond (magnetization preserving).

    A bond drawn with parallel spins yields a null proposal.  Initial
    configurations are drawn in the zero-magnetization sector (balanced up to
    parity for odd sizes).
    """

    basis = "pm1"

    def __init__(self, n_sites: int, bonds):
        self.n_sites = n_sites
        self.bonds = np.asarray(bonds, dtype=np.int64)
        if self.bonds.ndim != 2 or self.bonds.shape[1] != 2 or len(self.bonds) == 0:
            raise ValueError("bonds must be a nonempty (B, 2) array")
        if self.bonds.max() >= n_sites or self.bonds.min() < 0:
            raise ValueError("bond index out of range")

    def propose_batch(self, configs, rng):
        out = configs.copy()
        c = out.shape[0]
        rows = np.arange(c)
        picks = self.bonds[rng.integers(len(self.bonds), size=c)]
        i, j = picks[:, 0], picks[:, 1]
        si = out[rows, i]
        sj = out[rows, j]
        active = si != sj
        out[rows[active], i[active]] = sj[active]
        out[rows[active], j[active]] = si[active]
        return out, active

    def initial_configurations(self, n_chains, rng):
        base = np.ones(self.n_sites, dtype=np.int8)
        base[: self.n_sites // 2] = -1
        return rng.permuted(np.tile(base, (n_chains, 1)), axis=1)


class DoubledBellMove(MoveRule):
    """Move rule for the doubled (Bell-basis) space of 2N bits.

    With probability 1/2 flips one replica-block bit, otherwise flips two
    distinct physical-block bits.  Both branches preserve the parity of the
    physical block, which is the sector containing the all-zeros reference
    for Z2-symmetric problems; initial configurations are drawn there.
    """

    basis = "bits"

    def __init__(self, n_physical: int):
        self.n_physical = n_physical
        self.n_sites = 2 * n_physical

    def propose_batch(self, configs, rng):
        out = configs.copy()
        c = out.shape[0]
        rows = np.arange(c)
        n = self.n_physical
        replica_branch = rng.random(c) < 0.5
        r_sites = n + rng.integers(n, size=c)
        # two distinct physical sites: second drawn from the remaining n-1
        p1 = rng.integers(n, size=c)
        p2 = rng.integers(max(n - 1, 1), size=c)
        p2 = np.where(p2 >= p1, p2 + 1, p2)
        active = np.ones(c, dtype=bool)
        rep = rows[replica_branch]
        out[rep, r_sites[replica_branch]] ^= 1
        phys = rows[~replica_branch]
        if n >= 2:
            out[phys, p1[~replica_branch]] ^= 1
            out[phys, p2[~replica_branch]] ^= 1
        else:
            active[~replica_branch] = False
        return out, active

    def initial_configurations(self, n_chains, rng):
        bits = rng.integers(0, 2, size=(n_chains, self.n_sites), dtype=np.int8)
        parity = bits[:, : self.n_physical].sum(axis=1) % 2
        bits[parity == 1, 0] ^= 1  # project onto even physical parity
        return bits


class MarkovChainEnsemble:
    """n_chains Metropolis walkers advanced in lockstep over one model.

    The cached log-amplitude of each chain always matches the model at its
    current configuration; call ``refresh`` after external parameter updates.
    Constant log-amplitude shifts on the model are stripped, so gauge-shifted
    models produce bit-identical chains.
    """

    def __init__(self, model: AmplitudeModel, rule: MoveRule, n_chains: int, seed,
                 max_init_tries: int = 200):
        base, _ = strip_log_shift(model)
        if rule.basis != base.basis or rule.n_sites != base.n_sites:
            raise ValueError(
                f"move rule ({rule.basis}, {rule.n_sites}) does not match "
                f"model ({base.basis}, {base.n_sites})")
        self.model = base
        self.rule = rule
        self.n_chains = int(n_chains)
        self.rng = _make_rng(seed)
        configs = rule.initial_configurations(self.n_chains, self.rng)
        logs = base.log_amplitude_batch(configs)
        for _ in range(max_init_tries):
            bad = ~np.isfinite(logs.real)
            if not bad.any():
                break
            configs[bad] = rule.initial_configurations(int(bad.sum()), self.rng)
            logs[bad] = base.log_amplitude_batch(configs[bad])
        else:
            raise InitializationError("could not find nonzero-amplitude starting configurations")
        self.configs = configs.astype(np.int8)
        self.logs = logs
        self.accepted = 0
        self.proposed = 0

    def refresh(self):
        """Recompute cached log-amplitudes (after a parameter update)."""
        self.logs = self.model.log_amplitude_batch(self.configs)
        if not np.isfinite(self.logs.real).all():
            raise InitializationError("current configuration has zero amplitude after refresh")

    def step(self):
        proposals, active = self.rule.propose_batch(self.configs, self.rng)
        new_logs = self.model.log_amplitude_batch(proposals)
        with np.errstate(invalid="ignore"):
            log_ratio = 2.0 * (new_logs.real - self.logs.real)
        u = self.rng.random(self.n_chains)
        accept = active & (np.log(u) < log_ratio)
        self.configs[accept] = proposals[accept]
        self.logs[accept] = new_logs[accept]
        self.proposed += self.n_chains
        self.accepted += int(accept.sum())

    def sweep(self, n_sweeps: int = 1):
        for _ in range(n_sweeps * self.rule.n_sites):
            self.step()

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def sample(self, per_chain: int, n_skip: int = 1):
        """Collect ``per_chain`` configurations per chain, ``n_skip`` sweeps apart."""
        shape = (per_chain, self.n_chains, self.rule.n_sites)
        configs = np.empty(shape, dtype=np.int8)
        logs = np.empty((per_chain, self.n_chains), dtype=complex)
        for k in range(per_chain):
            self.sweep(n_skip)
            configs[k] = self.configs
            logs[k] = self.logs
        # chain-major layout: samples of chain c are contiguous
        configs = configs.transpose(1, 0, 2).reshape(per_chain * self.n_chains, -1)
        logs = logs.T.reshape(-1)
        return configs, logs


@dataclass
class ChainRun:
    """Pooled samples from an ensemble run, chain-major, plus diagnostics."""

    configs: np.ndarray
    log_amps: np.ndarray
    n_chains: int
    per_chain: int
    acceptance: float

    @property
    def n_samples(self) -> int:
        return self.configs.shape[0]


def run_chain(model: AmplitudeModel, rule: MoveRule, n_samples: int, n_burn: int,
              n_skip: int, seed, n_chains: int = 1) -> ChainRun:
    """Sample ~n_samples configurations from |model|^2 (rounded up to a chain multiple).

    Discards ``n_burn`` sweeps, then keeps one configuration per chain every
    ``n_skip`` sweeps.  Reproducible from (seed, n_chains).
    """
    if n_samples < 1 or n_skip < 1 or n_burn < 0:
        raise ValueError("bad sampling parameters")
    ensemble = MarkovChainEnsemble(model, rule, n_chains, seed)
    if n_burn:
        ensemble.sweep(n_burn)
    per_chain = math.ceil(n_samples / n_chains)
    configs, logs = ensemble.sample(per_chain, n_skip)
    return ChainRun(configs, logs, n_chains, per_chain, ensemble.acceptance)


def batch_means(values: np.ndarray, n_chains: int, n_batches: int = 32) -> np.ndarray:
    """Means of contiguous per-chain batches (~n_batches total, never spanning chains)."""
    values = np.asarray(values)
    per = values.size // n_chains
    rows = values.reshape(n_chains, per)
    nb = max(1, round(n_batches / n_chains))
    return np.array([chunk.mean() for row in rows for chunk in np.array_split(row, min(nb, per))])


def batch_means_error(values: np.ndarray, n_chains: int, n_batches: int = 32) -> float:
    """Standard error of the mean of a real series via batch means."""
    bm = batch_means(values, n_chains, n_batches)
    if bm.size < 2:
        return float("nan")
    return float(np.std(bm, ddof=1) / np.sqrt(bm.size))


def split_rhat(values: np.ndarray, n_chains: int) -> float:
    """Split-R-hat convergence statistic on a scalar series (1.0 = converged)."""
    values = np.asarray(values, dtype=float)
    per = values.size // n_chains
    half = per // 2
    if half < 2:
        return float("nan")
    rows = values.reshape(n_chains, per)
    halves = np.concatenate([rows[:, :half], rows[:, half: 2 * half]], axis=0)
    w = halves.var(axis=1, ddof=1).mean()
    b = half * halves.mean(axis=1).var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else float("inf")
    return float(np.sqrt((half - 1) / half + b / (w * half)))
