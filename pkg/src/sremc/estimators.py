"""Monte Carlo estimators of the order-2 stabilizer Renyi entropy M2.

Two sampling schemes:

* ``replicated_m2`` — four unentangled copies of the state; M2 is -log of the
  mean amplitude ratio between a configuration and its replica-mixed image.
  The estimator is signed and can be heavy-tailed; ``annealed_replicated_m2``
  telescopes it through interpolating distributions to tame outliers.
* ``bell_m2`` — the doubled, Clifford-rotated ground state Gamma; M2 is -log
  of the mean of |Gamma(nu)|^2 / |Gamma(nu_0)|^2, a positive-definite
  estimator (modulus gauge at the reference configuration).

Closed-form error predictions for both schemes are provided for calibration.
Every estimate is reproducible from (seed, n_chains); a constant shift of the
model's log-amplitude yields bit-identical results because all internals
consume log-amplitude differences of the unshifted base model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (AmplitudeModel, ReplicatedModel, build_replicated_model,
                     mix_replicas, strip_log_shift)
from .errors import GaugeError, UnresolvedEstimateError
from .sampler import (DoubledBellMove, ReplicaSingleFlip, batch_means,
                      run_chain, split_rhat)

RHAT_WARN = 1.1
OUTLIER_RATIO = 10.0
NONLINEAR_REL_ERR = 0.5
BOOTSTRAP_RESAMPLES = 1000
MAX_ANNEAL_STAGES = 64
ANNEAL_SPREAD_TARGET = 2.0


@dataclass
class SamplingConfig:
    """Monte Carlo budget for one estimator average.

    n_burn is in sweeps and defaults to 10% of the kept sweeps per chain
    (with a floor of 10).
    """

    n_samples: int
    seed: int = 0
    n_chains: int = 16
    n_skip: int = 1
    n_burn: int | None = None
    n_batches: int = 32

    def burn_sweeps(self) -> int:
        if self.n_burn is not None:
            return self.n_burn
        per_chain = math.ceil(self.n_samples / self.n_chains)
        return max(10, math.ceil(0.1 * per_chain * self.n_skip))


@dataclass
class EstimatorResult:
    """A single M2 estimate with its error bar and run diagnostics."""

    method: str
    m2: float
    stderr: float
    n_samples: int
    raw_mean: float
    seed: int
    systematic: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        def clean(v):
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, np.ndarray):
                return [clean(x) for x in v]
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v

        return {
            "method": self.method,
            "m2": self.m2,
            "stderr": self.stderr,
            "ns": self.n_samples,
            "raw_mean": self.raw_mean,
            "seed": self.seed,
            "systematic": self.systematic,
            "diagnostics": clean(self.diagnostics),
        }


def predicted_error_replicated(m2: float, ns: int) -> float:
    """Closed-form statistical error of the replicated estimator for i.i.d. samples."""
    if ns < 1:
        raise ValueError("ns must be >= 1")
    if m2 < 0:
        raise ValueError("m2 must be nonnegative")
    return math.sqrt(math.expm1(2.0 * m2) / ns)


def predicted_error_bell(m2: float, m3: float, ns: int) -> float:
    """Closed-form statistical error of the Bell-basis estimator for i.i.d. samples."""
    if ns < 1:
        raise ValueError("ns must be >= 1")
    if m2 < m3 - 1e-10:
        raise ValueError("m2 < m3 violates the Renyi monotonicity premise")
    return math.sqrt(math.expm1(2.0 * max(m2 - m3, 0.0)) / ns)


def validate_schedule(schedule) -> tuple:
    """Interpolation schedule: strictly increasing reals from exactly 0 to exactly 1."""
    betas = tuple(float(b) for b in schedule)
    if len(betas) < 2 or betas[0] != 0.0 or betas[-1] != 1.0:
        raise ValueError("schedule must start at 0.0 and end at 1.0")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("schedule must be strictly increasing")
    return betas


def uniform_schedule(n_stages: int) -> tuple:
    return validate_schedule(np.linspace(0.0, 1.0, n_stages + 1))


def _log_interp(beta: float, delta: np.ndarray) -> np.ndarray:
    """log(beta * e^delta + (1 - beta)) for complex delta, overflow-safe.

    delta with real part -inf (zero numerator amplitude) is handled; beta 0/1
    short-circuit so the endpoints are exact.
    """
    if beta == 0.0:
        return np.zeros_like(delta)
    if beta == 1.0:
        return np.asarray(delta, dtype=complex)
    m = np.maximum(delta.real, 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        shifted = np.where(np.isneginf(delta.real), 0.0, np.exp(delta - m))
        out = np.log(beta * shifted + (1.0 - beta) * np.exp(-m)) + m
    return out


class _AnnealStageModel(AmplitudeModel):
    """Sampling weight |Phi(eta)| * |Phi_beta(eta)| expressed as a model.

    At beta = 0 the log-amplitude is exactly log Phi(eta) (same floats, same
    chain path as sampling Phi directly).
    """

    def __init__(self, phi: AmplitudeModel, beta: float):
        self.phi = phi
        self.beta = float(beta)
        self.n_sites = phi.n_sites
        self.basis = phi.basis

    def log_amplitude(self, config):
        return complex(self.log_amplitude_batch(np.asarray(config)[None, :])[0])

    def log_amplitude_batch(self, configs):
        lp = self.phi.log_amplitude_batch(configs)
        if self.beta == 0.0:
            return lp
        delta = self.phi.log_amplitude_batch(mix_replicas(configs)) - lp
        return lp + 0.5 * _log_interp(self.beta, delta)


def _mean_and_stderr(values: np.ndarray, n_chains: int, n_batches: int):
    mean = float(np.mean(values))
    bm = batch_means(values, n_chains, n_batches)
    if bm.size < 2:
        return mean, float("nan"), bm
    return mean, float(np.std(bm.real, ddof=1) / np.sqrt(bm.size)), bm


def _ratio_values(phi: AmplitudeModel, configs, beta_sample: float, beta_target: float | None):
    """Per-sample estimator values for one annealing stage.

    beta_target None marks the final signed stage: e^Delta / |Phi_beta/Phi|;
    otherwise the positive ratio |Phi_{beta_target}| / |Phi_{beta_sample}|.
    """
    lp = phi.log_amplitude_batch(configs)
    delta = phi.log_amplitude_batch(mix_replicas(configs)) - lp
    log_den = _log_interp(beta_sample, delta).real
    if beta_target is None:
        if beta_sample == 0.0:
            return np.exp(delta)
        return np.exp(delta - log_den)
    log_num = _log_interp(beta_target, delta).real
    return np.exp(log_num - log_den)


def _delta_or_bootstrap(stage_means, stage_stderrs, stage_batch_means, rng):
    """Error on -log(prod of stage means): first-order by default, bootstrap
    over batch means when any stage is in the nonlinear regime."""
    rel_sq = 0.0
    nonlinear = False
    for mean, err in zip(stage_means, stage_stderrs):
        rel = err / abs(mean)
        rel_sq += rel * rel
        if rel > NONLINEAR_REL_ERR:
            nonlinear = True
    stderr = math.sqrt(rel_sq)
    if not nonlinear:
        return stderr, False
    draws = np.empty(BOOTSTRAP_RESAMPLES)
    n_bad = 0
    for b in range(BOOTSTRAP_RESAMPLES):
        prod = 1.0
        for bm in stage_batch_means:
            prod *= float(np.mean(rng.choice(bm.real, size=bm.size, replace=True)))
        if prod <= 0:
            n_bad += 1
            draws[b] = np.nan
        else:
            draws[b] = -math.log(prod)
    if n_bad > BOOTSTRAP_RESAMPLES // 100:
        raise UnresolvedEstimateError(
            "estimate unresolved - increase N_s or use annealing "
            f"(bootstrap produced {n_bad} non-positive resamples)")
    return float(np.nanstd(draws, ddof=1)), True


def _run_annealed(phi: AmplitudeModel, betas: tuple, cfg: SamplingConfig, method: str):
    n_stages = len(betas) - 1
    rule = ReplicaSingleFlip(phi.n_sites // 4)
    stage_means, stage_stderrs, stage_bms = [], [], []
    stage_acceptance, stage_spread = [], []
    diagnostics: dict = {}
    signed_mean_c = None
    for i in range(n_stages):
        beta_sample = betas[i]
        is_signed = i == n_stages - 1
        beta_target = None if is_signed else betas[i + 1]
        seed = np.random.SeedSequence([cfg.seed, n_stages, i])
        run = run_chain(_AnnealStageModel(phi, beta_sample), rule,
                        cfg.n_samples, cfg.burn_sweeps(), cfg.n_skip, seed, cfg.n_chains)
        vals = _ratio_values(phi, run.configs, beta_sample, beta_target)
        mean, stderr, bm = _mean_and_stderr(vals.real, run.n_chains, cfg.n_batches)
        stage_acceptance.append(run.acceptance)
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(vals))
        finite = np.isfinite(log_abs)
        stage_spread.append(float(log_abs[finite].max() - log_abs[finite].min()) if finite.any() else 0.0)
        stage_means.append(mean)
        stage_stderrs.append(stderr)
        stage_bms.append(bm)
        if is_signed:
            signed_mean_c = complex(np.mean(vals))
            abs_sq = np.abs(vals) ** 2
            abs2_mean, abs2_err, _ = _mean_and_stderr(abs_sq, run.n_chains, cfg.n_batches)
            _, imag_err, _ = _mean_and_stderr(vals.imag, run.n_chains, cfg.n_batches)
            diagnostics.update({
                "imag_mean": signed_mean_c.imag,
                "imag_stderr": imag_err,
                "abs_sq_mean": abs2_mean,
                "abs_sq_stderr": abs2_err,
                "outliers": int((np.abs(vals) > OUTLIER_RATIO).sum()),
                "rhat": split_rhat(vals.real, run.n_chains),
                "per_chain_means": vals.real.reshape(run.n_chains, -1).mean(axis=1),
            })
        if mean <= 0:
            raise UnresolvedEstimateError(
                f"estimate unresolved - increase N_s or use annealing (stage {i}, "
                f"beta={beta_sample:g}, mean={mean:.3e} +- {stderr:.3e})")
    raw_mean = float(np.prod(stage_means))
    if raw_mean <= 0:
        raise UnresolvedEstimateError("estimate unresolved - increase N_s or use annealing")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, n_stages, 2 ** 20]))
    stderr, nonlinear = _delta_or_bootstrap(stage_means, stage_stderrs, stage_bms, rng)
    diagnostics.update({
        "acceptance": stage_acceptance if n_stages > 1 else stage_acceptance[0],
        "schedule": list(betas),
        "max_stage_spread": max(stage_spread),
        "nonlinear_regime": nonlinear,
    })
    if n_stages > 1:
        diagnostics["stage_means"] = stage_means
        diagnostics["stage_stderrs"] = stage_stderrs
    if diagnostics.get("rhat", 0.0) > RHAT_WARN:
        diagnostics["rhat_warning"] = True
    per_chain = math.ceil(cfg.n_samples / cfg.n_chains)
    return EstimatorResult(
        method=method,
        m2=-math.log(raw_mean),
        stderr=stderr,
        n_samples=per_chain * cfg.n_chains,
        raw_mean=raw_mean,
        seed=cfg.seed,
        diagnostics=diagnostics,
    )


def _as_replicated(psi: AmplitudeModel) -> AmplitudeModel:
    base, _ = strip_log_shift(psi)
    if isinstance(base, ReplicatedModel):
        return base
    if base.basis != "pm1":
        raise ValueError("replicated estimator expects a {-1,+1} basis model")
    return build_replicated_model(base)


def replicated_m2(psi: AmplitudeModel, cfg: SamplingConfig) -> EstimatorResult:
    """M2 from the four-replica scheme: -log E[ Phi(mixed eta) / Phi(eta) ].

    ``psi`` is the single-copy model; the four-copy product state is built
    internally.  The real part of the ratio mean is used; its imaginary part
    (zero in expectation) and the mean squared modulus (one in expectation,
    the unitarity sum rule) are reported as diagnostics.
    """
    return _run_annealed(_as_replicated(psi), (0.0, 1.0), cfg, method="replicated")


def annealed_replicated_m2(psi: AmplitudeModel, schedule, cfg: SamplingConfig) -> EstimatorResult:
    """Replicated estimator telescoped over interpolating distributions.

    Each stage contributes one sampled average (all but the last are positive
    definite); stage errors combine in quadrature.  schedule=None picks a
    uniform grid adaptively, doubling the stage count until the largest
    per-stage log-ratio spread falls below 2 (or 64 stages are reached).
    ``(0, 1)`` reproduces ``replicated_m2`` bit-for-bit under a shared seed.
    """
    phi = _as_replicated(psi)
    if schedule is not None:
        return _run_annealed(phi, validate_schedule(schedule), cfg, method="replicated_annealed")
    n = 1
    while True:
        result = _run_annealed(phi, uniform_schedule(n), cfg, method="replicated_annealed")
        if result.diagnostics["max_stage_spread"] < ANNEAL_SPREAD_TARGET or n >= MAX_ANNEAL_STAGES:
            if n >= MAX_ANNEAL_STAGES:
                result.diagnostics["spread_target_missed"] = True
            return result
        n *= 2


def bell_m2(gamma: AmplitudeModel, cfg: SamplingConfig) -> EstimatorResult:
    """M2 from the Bell-basis scheme: -log E[ |Gamma(nu)|^2 / |Gamma(nu_0)|^2 ].

    ``gamma`` lives on 2N bits (physical block then replica block); nu_0 is
    the all-zeros configuration, whose amplitude modulus fixes the gauge.
    The estimator is positive definite; its mean squared value (equal to
    e^{-2 M3} in expectation) is reported for calibration.
    """
    base, _ = strip_log_shift(gamma)
    if base.basis != "bits":
        raise ValueError("Bell estimator expects a bit-basis model on the doubled space")
    if base.n_sites % 2:
        raise ValueError("doubled space must have an even number of sites")
    nu0 = np.zeros(base.n_sites, dtype=np.int8)
    log0 = base.log_amplitude(nu0)
    if not np.isfinite(log0.real):
        raise GaugeError("Gamma vanishes at the all-zeros reference configuration")
    rule = DoubledBellMove(base.n_sites // 2)
    seed = np.random.SeedSequence([cfg.seed, 1, 0])
    run = run_chain(base, rule, cfg.n_samples, cfg.burn_sweeps(), cfg.n_skip, seed, cfg.n_chains)
    vals = np.exp(2.0 * (run.log_amps.real - log0.real))
    mean, stderr, bm = _mean_and_stderr(vals, run.n_chains, cfg.n_batches)
    if mean <= 0:
        raise UnresolvedEstimateError("Bell estimator mean underflowed to zero")
    sq_mean, sq_err, _ = _mean_and_stderr(vals ** 2, run.n_chains, cfg.n_batches)
    rel = stderr / mean
    nonlinear = rel > NONLINEAR_REL_ERR
    if nonlinear:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, 2 ** 20]))
        m2_err, _ = _delta_or_bootstrap([mean], [stderr], [bm], rng)
    else:
        m2_err = rel
    diagnostics = {
        "acceptance": run.acceptance,
        "gauge": "modulus",
        "second_moment_mean": sq_mean,
        "second_moment_stderr": sq_err,
        "max_ratio": float(vals.max()),
        "rhat": split_rhat(vals, run.n_chains),
        "per_chain_means": vals.reshape(run.n_chains, -1).mean(axis=1),
        "nonlinear_regime": nonlinear,
    }
    if diagnostics["rhat"] > RHAT_WARN:
        diagnostics["rhat_warning"] = True
    return EstimatorResult(
        method="bell",
        m2=-math.log(mean),
        stderr=float(m2_err),
        n_samples=run.n_samples,
        raw_mean=mean,
        seed=cfg.seed,
        diagnostics=diagnostics,
    )
