"""Variational ground-state optimization with Stochastic Reconfiguration.

Local energies are exact for Pauli-sum Hamiltonians (sum over connected
configurations).  Parameter updates come in two equivalent formulations:

* classical SR   —  dtheta = tau (X X^T + lam I)^-1 X f   (parameter space)
* minSR          —  dtheta = tau X (X^T X + lam I)^-1 f   (sample space)

where X is the centered, 1/sqrt(Ns)-rescaled Jacobian of log Psi with
complex parameters split into independent real and imaginary components
(rows), and real/imaginary sample parts concatenated along columns.  On a
shared sample set the two coincide as lam -> 0 for Np <= Ns.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .ansatz import AmplitudeModel, index_from_config, strip_log_shift
from .errors import NumericalError
from .pauli import PauliSumOperator
from .sampler import MarkovChainEnsemble, MoveRule, SingleFlip, batch_means_error
from .oracle import _popcount


@dataclass
class SRConfig:
    """Stochastic Reconfiguration schedule and sampling budget.

    ``tau`` is either a scalar learning rate or a (start, end) pair for a
    cosine schedule over the step count.
    """

    tau: float | tuple = 1e-3
    lam: float = 1e-4
    n_samples: int = 8192
    n_steps: int = 500
    formulation: str = "classical"
    n_chains: int = 64
    n_skip: int = 1
    n_burn_initial: int = 100
    n_burn_step: int = 2

    def __post_init__(self):
        if self.formulation not in ("classical", "minsr"):
            raise ValueError(f"unknown SR formulation {self.formulation!r}")
        if self.lam <= 0 or self.n_samples < 2 or self.n_steps < 1:
            raise ValueError("bad SR configuration")
        for t in (self.tau if isinstance(self.tau, tuple) else (self.tau,)):
            if t <= 0:
                raise ValueError("learning rate must be positive")

    def rate(self, step: int) -> float:
        if not isinstance(self.tau, tuple):
            return float(self.tau)
        start, end = self.tau
        if self.n_steps == 1:
            return float(end)
        c = 0.5 * (1.0 + math.cos(math.pi * step / (self.n_steps - 1)))
        return float(end + (start - end) * c)


@dataclass
class OptimizationTrace:
    energies: list = field(default_factory=list)
    variances: list = field(default_factory=list)
    acceptances: list = field(default_factory=list)
    update_norms: list = field(default_factory=list)
    aborted: bool = False

    @property
    def n_steps(self) -> int:
        return len(self.energies)


def local_energy_batch(model: AmplitudeModel, h: PauliSumOperator, configs) -> np.ndarray:
    """E_loc(sigma) = <sigma|H|Psi>/<sigma|Psi> for a batch of configurations.

    Exact for Pauli sums: diagonal terms contribute their sign, off-diagonal
    terms the amplitude ratio to the flipped configuration times the
    conjugated matrix-element phase.
    """
    base, _ = strip_log_shift(model)
    configs = np.asarray(configs)
    if configs.ndim == 1:
        configs = configs[None, :]
    if base.n_sites != h.n or configs.shape[1] != h.n:
        raise ValueError("model, Hamiltonian and configurations must share the system size")
    coeffs, xm, zm, ph = h.compiled()
    idx = index_from_config(configs, base.basis)
    logs0 = base.log_amplitude_batch(configs)
    if not np.isfinite(logs0.real).all():
        raise ValueError("local energy undefined at a zero-amplitude configuration")
    n_cfg = configs.shape[0]
    e_loc = np.zeros(n_cfg, dtype=complex)
    off_terms = []
    for t in range(len(coeffs)):
        signs = 1.0 - 2.0 * (_popcount(idx & zm[t]) & 1)
        weight = coeffs[t] * np.conj(ph[t] * signs)
        if xm[t] == 0:
            e_loc += weight
        else:
            off_terms.append((t, weight))
    if off_terms:
        flips = np.empty((len(off_terms), n_cfg, h.n), dtype=configs.dtype)
        for k, (t, _) in enumerate(off_terms):
            xbits = (xm[t] >> np.arange(h.n)) & 1
            if base.basis == "pm1":
                flips[k] = configs * (1 - 2 * xbits).astype(configs.dtype)
            else:
                flips[k] = configs ^ xbits.astype(configs.dtype)
        logs1 = base.log_amplitude_batch(flips.reshape(-1, h.n)).reshape(len(off_terms), n_cfg)
        ratios = np.exp(logs1 - logs0[None, :])
        for k, (_, weight) in enumerate(off_terms):
            e_loc += weight * ratios[k]
    return e_loc


def local_energy(model: AmplitudeModel, h: PauliSumOperator, config) -> complex:
    return complex(local_energy_batch(model, h, np.asarray(config)[None, :])[0])


def _sr_matrices(model: AmplitudeModel, h: PauliSumOperator, configs):
    """Centered rescaled real Jacobian X (2P, 2B) and force vector f (2B,)."""
    o = model.log_derivatives_batch(configs)  # (B, P) complex, wrt complex params
    e = local_energy_batch(model, h, configs)
    b = o.shape[0]
    yc = (o - o.mean(axis=0)) / math.sqrt(b)  # (B, P)
    eps = -2.0 * np.conj(e - e.mean()) / math.sqrt(b)  # (B,)
    yfull = np.concatenate([yc.T, 1j * yc.T], axis=0)  # (2P, B): re-part rows, im-part rows
    x = np.concatenate([yfull.real, yfull.imag], axis=1)  # (2P, 2B)
    f = np.concatenate([eps.real, -eps.imag])  # (2B,)
    return x, f, e


def _shifted_spd_solve(mat: np.ndarray, rhs: np.ndarray, lam: float):
    """Cholesky solve of (mat + shift I) x = rhs, escalating shift x10 up to 3 times."""
    eye = np.eye(mat.shape[0])
    shift = lam
    for _ in range(4):
        try:
            factor = scipy.linalg.cho_factor(mat + shift * eye, lower=True)
            return scipy.linalg.cho_solve(factor, rhs), shift
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
            shift *= 10.0
    raise NumericalError(f"SR linear solve failed up to shift {shift / 10.0:g}")


def sr_update(model: AmplitudeModel, h: PauliSumOperator, configs, tau: float, lam: float,
              formulation: str = "classical") -> np.ndarray:
    """Parameter update dtheta (complex vector) from a fixed sample set."""
    x, f, _ = _sr_matrices(model, h, configs)
    if formulation == "classical":
        solution, _ = _shifted_spd_solve(x @ x.T, x @ f, lam)
    elif formulation == "minsr":
        inner, _ = _shifted_spd_solve(x.T @ x, f, lam)
        solution = x @ inner
    else:
        raise ValueError(f"unknown SR formulation {formulation!r}")
    p = solution.size // 2
    return tau * (solution[:p] + 1j * solution[p:])


def _sample_configs(ensemble: MarkovChainEnsemble, n_samples: int, n_skip: int):
    per_chain = math.ceil(n_samples / ensemble.n_chains)
    configs, _ = ensemble.sample(per_chain, n_skip)
    return configs


def sr_step_classical(model: AmplitudeModel, h: PauliSumOperator, cfg: SRConfig, seed,
                      rule: MoveRule | None = None) -> np.ndarray:
    """One freshly sampled classical-SR update (does not modify the model)."""
    return _sr_step(model, h, cfg, seed, "classical", rule)


def sr_step_minsr(model: AmplitudeModel, h: PauliSumOperator, cfg: SRConfig, seed,
                  rule: MoveRule | None = None) -> np.ndarray:
    """One freshly sampled minSR update (does not modify the model)."""
    return _sr_step(model, h, cfg, seed, "minsr", rule)


def _sr_step(model, h, cfg, seed, formulation, rule):
    base, _ = strip_log_shift(model)
    rule = rule or SingleFlip(base.n_sites, base.basis)
    ensemble = MarkovChainEnsemble(model, rule, cfg.n_chains, seed)
    ensemble.sweep(cfg.n_burn_initial)
    configs = _sample_configs(ensemble, cfg.n_samples, cfg.n_skip)
    return sr_update(model, h, configs, cfg.rate(0), cfg.lam, formulation)


def optimize(model: AmplitudeModel, h: PauliSumOperator, cfg: SRConfig,
             rule: MoveRule | None = None, seed: int = 0, callback=None):
    """Iterate sampling + SR updates; returns (trained model copy, trace).

    Chains stay warm across steps with a short re-equilibration after every
    parameter update.  A runaway energy (exceeding the initial mean by ten
    times its magnitude) aborts the loop with the partial trace flagged.
    """
    work = copy.deepcopy(model)
    base, _ = strip_log_shift(work)
    rule = rule or SingleFlip(base.n_sites, base.basis)
    ensemble = MarkovChainEnsemble(work, rule, cfg.n_chains, np.random.SeedSequence([seed, 0]))
    ensemble.sweep(cfg.n_burn_initial)
    trace = OptimizationTrace()
    guard = None
    for step in range(cfg.n_steps):
        configs = _sample_configs(ensemble, cfg.n_samples, cfg.n_skip)
        x, f, e_loc = _sr_matrices(work, h, configs)
        energy = float(e_loc.mean().real)
        variance = float((np.abs(e_loc) ** 2).mean() - abs(e_loc.mean()) ** 2)
        if guard is None:
            guard = energy + 10.0 * max(abs(energy), 1.0)
        if formulation_is_classical := (cfg.formulation == "classical"):
            solution, _ = _shifted_spd_solve(x @ x.T, x @ f, cfg.lam)
        else:
            inner, _ = _shifted_spd_solve(x.T @ x, f, cfg.lam)
            solution = x @ inner
        p = solution.size // 2
        delta = cfg.rate(step) * (solution[:p] + 1j * solution[p:])
        trace.energies.append(energy)
        trace.variances.append(variance)
        trace.acceptances.append(ensemble.acceptance)
        trace.update_norms.append(float(np.linalg.norm(delta)))
        if callback is not None:
            callback(step, {
                "energy": energy, "variance": variance,
                "acceptance": trace.acceptances[-1], "update_norm": trace.update_norms[-1],
            })
        if energy > guard:
            trace.aborted = True
            break
        work.set_parameters(work.parameters + delta)
        ensemble.refresh()
        if cfg.n_burn_step:
            ensemble.sweep(cfg.n_burn_step)
    return work, trace


def energy_variance(model: AmplitudeModel, h: PauliSumOperator, n_samples: int, seed,
                    rule: MoveRule | None = None, n_chains: int = 32,
                    n_burn: int = 100, n_skip: int = 1):
    """Monte Carlo Var(H) = E[|E_loc|^2] - |E[E_loc]|^2 over |Psi|^2, with stderr."""
    base, _ = strip_log_shift(model)
    rule = rule or SingleFlip(base.n_sites, base.basis)
    ensemble = MarkovChainEnsemble(model, rule, n_chains, seed)
    ensemble.sweep(n_burn)
    configs = _sample_configs(ensemble, n_samples, n_skip)
    e_loc = local_energy_batch(model, h, configs)
    mean = e_loc.mean()
    centered_sq = np.abs(e_loc - mean) ** 2
    variance = float(centered_sq.mean())
    stderr = batch_means_error(centered_sq, ensemble.n_chains)
    return variance, stderr


def m2_systematic_error(variance: float, n_qubits: int) -> float:
    """Leading-order systematic error on the magic density from an imperfect
    variational state: sqrt(Var(H)) / N."""
    if variance < -1e-12:
        raise ValueError("variance must be nonnegative")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return math.sqrt(max(variance, 0.0)) / n_qubits
