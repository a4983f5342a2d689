"""Amplitude models: the log-amplitude contract, the complex RBM, replicated
and doubled-space wrappers, and the random-RBM ensemble generator.

Conventions
-----------
Every model declares ``n_sites`` and a ``basis``:

* ``"pm1"``  — configurations are spins in {-1, +1}.  Used by the single-copy
  and four-replica machinery, where the elementwise spin product is the
  natural operation.
* ``"bits"`` — configurations are bits in {0, 1}.  Used by the doubled
  (Bell-basis) machinery, whose physical block is sites 0..N-1 and replica
  block N..2N-1; the all-zeros configuration is the Bell-estimator reference.

Conversion between the two is always explicit (``as_bit_basis``), never
implicit.  A log-amplitude equal to -inf (real part) means the amplitude is
exactly zero; ratios with a -inf numerator evaluate to 0.

Constant shifts of the log-amplitude are pure gauge for every estimator in
this package.  They are represented by thin wrapper models and stripped
exactly (``strip_log_shift``) inside the samplers and estimators, so
shifted and unshifted models produce bit-identical Monte Carlo results.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import GaugeError

NEG_INF = complex(-np.inf, 0.0)


def spins_from_bits(bits):
    """{0,1} -> {+1,-1} with bit 0 mapping to spin +1."""
    return 1 - 2 * np.asarray(bits, dtype=np.int8)


def bits_from_spins(spins):
    return ((1 - np.asarray(spins, dtype=np.int64)) // 2).astype(np.int8)


def index_from_config(config, basis: str):
    """Basis-state index with site j at bit j (site 0 least significant)."""
    config = np.asarray(config)
    bits = config if basis == "bits" else bits_from_spins(config)
    weights = (1 << np.arange(bits.shape[-1], dtype=np.int64))
    return (bits.astype(np.int64) @ weights).astype(np.int64)


def config_from_index(index, n_sites: int, basis: str):
    idx = np.asarray(index, dtype=np.int64)
    bits = ((idx[..., None] >> np.arange(n_sites)) & 1).astype(np.int8)
    return bits if basis == "bits" else spins_from_bits(bits)


def all_configurations(n_sites: int, basis: str):
    """(2^n, n) array of every configuration, ordered by basis-state index."""
    return config_from_index(np.arange(1 << n_sites), n_sites, basis)


class AmplitudeModel:
    """Maps a configuration to a complex log-amplitude.

    Subclasses implement ``log_amplitude``; vectorized paths can override
    ``log_amplitude_batch`` (default loops).  Differentiable models also
    provide ``log_derivatives`` / ``log_derivatives_batch`` and the
    ``parameters`` property with ``set_parameters``.
    """

    n_sites: int
    basis: str

    def log_amplitude(self, config) -> complex:
        raise NotImplementedError

    def log_amplitude_batch(self, configs) -> np.ndarray:
        configs = np.asarray(configs)
        return np.array([self.log_amplitude(c) for c in configs], dtype=complex)

    def log_derivatives(self, config) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no parameter derivatives")

    def log_derivatives_batch(self, configs) -> np.ndarray:
        return np.stack([self.log_derivatives(c) for c in np.asarray(configs)])


def strip_log_shift(model: AmplitudeModel):
    """Unwrap constant log-amplitude shifts: returns (base_model, offset).

    ``offset`` is the total constant such that model.log_amplitude(c) equals
    base.log_amplitude(c) + offset in exact arithmetic.  Ratio-based consumers
    run on ``base`` so that gauge shifts cancel exactly.
    """
    offset = 0j
    while isinstance(model, _ShiftedBase):
        offset += model.shift_value()
        model = model.base
    return model, offset


class _ShiftedBase(AmplitudeModel):
    def __init__(self, base: AmplitudeModel):
        self.base = base
        self.n_sites = base.n_sites
        self.basis = base.basis

    def shift_value(self) -> complex:
        raise NotImplementedError

    def log_amplitude(self, config):
        return self.base.log_amplitude(config) + self.shift_value()

    def log_amplitude_batch(self, configs):
        return self.base.log_amplitude_batch(configs) + self.shift_value()

    @property
    def parameters(self):
        return self.base.parameters

    def set_parameters(self, values):
        self.base.set_parameters(values)


class LogShiftedModel(_ShiftedBase):
    """Adds a fixed complex constant to the log-amplitude (pure gauge)."""

    def __init__(self, base: AmplitudeModel, offset: complex):
        super().__init__(base)
        self.offset = complex(offset)

    def shift_value(self) -> complex:
        return self.offset

    def log_derivatives(self, config):
        return self.base.log_derivatives(config)

    def log_derivatives_batch(self, configs):
        return self.base.log_derivatives_batch(configs)


class ReferenceShiftedModel(_ShiftedBase):
    """Gauge-fixes the log-amplitude to be exactly 0 at a reference configuration.

    The shift is re-evaluated against the current parameters, so the gauge
    stays pinned through optimization updates.  Parameter derivatives are
    shifted accordingly (O(c) - O(ref)).
    """

    def __init__(self, base: AmplitudeModel, reference_config):
        super().__init__(base)
        self.reference = np.asarray(reference_config)
        if self.reference.shape != (base.n_sites,):
            raise ValueError("reference configuration has wrong length")
        self._check_reference()

    def _check_reference(self):
        value = self.base.log_amplitude(self.reference)
        if not np.isfinite(value.real):
            raise GaugeError("reference configuration has zero amplitude")
        return value

    def shift_value(self) -> complex:
        return -self._check_reference()

    def log_derivatives(self, config):
        return self.base.log_derivatives(config) - self.base.log_derivatives(self.reference)

    def log_derivatives_batch(self, configs):
        return self.base.log_derivatives_batch(configs) - self.base.log_derivatives(self.reference)


def shift_to_reference(model: AmplitudeModel, reference_config) -> ReferenceShiftedModel:
    """Wrapper whose log-amplitude is exactly 0 at ``reference_config``.

    All amplitude ratios against the reference are unchanged; raises
    GaugeError if the reference amplitude vanishes.
    """
    return ReferenceShiftedModel(model, reference_config)


class DenseAmplitudeModel(AmplitudeModel):
    """Amplitude table over all 2^n configurations (exact states, tests, oracles)."""

    def __init__(self, amplitudes, basis: str):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        n = int(np.log2(amplitudes.size))
        if (1 << n) != amplitudes.size:
            raise ValueError("amplitude table length must be a power of two")
        if basis not in ("pm1", "bits"):
            raise ValueError(f"unknown basis {basis!r}")
        self.amplitudes = amplitudes
        self.n_sites = n
        self.basis = basis
        with np.errstate(divide="ignore"):
            logs = np.log(amplitudes)
        logs[amplitudes == 0] = NEG_INF
        self._logs = logs

    def log_amplitude(self, config):
        return complex(self._logs[index_from_config(config, self.basis)])

    def log_amplitude_batch(self, configs):
        return self._logs[index_from_config(np.asarray(configs), self.basis)]


def _log_cosh(z):
    """log cosh for complex arrays, stable for large |Re z|.

    cosh is even, so fold onto Re >= 0 and use cosh z = e^z (1 + e^{-2z}) / 2;
    the principal branch is taken per element (estimators only consume
    exponentiated differences, which are branch-insensitive).
    """
    z = np.where(z.real < 0, -z, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = z + np.log(1.0 + np.exp(-2.0 * z)) - np.log(2.0)
    return out


class ComplexRBM(AmplitudeModel):
    """Restricted Boltzmann Machine wavefunction on spins in {-1,+1}.

    log Psi(s) = sum_i a_i s_i + sum_k log cosh( sum_j W_kj s_j + b_k )
    with complex visible biases a (N), hidden biases b (M) and weights W (M,N).
    """

    basis = "pm1"

    def __init__(self, a, b, w):
        self.a = np.asarray(a, dtype=complex).copy()
        self.b = np.asarray(b, dtype=complex).copy()
        self.w = np.asarray(w, dtype=complex).copy()
        if self.w.ndim != 2 or self.a.ndim != 1 or self.b.ndim != 1:
            raise ValueError("bad parameter shapes")
        m, n = self.w.shape
        if self.a.shape != (n,) or self.b.shape != (m,):
            raise ValueError(f"parameter shapes inconsistent: a{self.a.shape} b{self.b.shape} w{self.w.shape}")
        self.n_sites = n
        self.n_hidden = m

    @classmethod
    def zeros(cls, n: int, m: int) -> "ComplexRBM":
        return cls(np.zeros(n), np.zeros(m), np.zeros((m, n)))

    def log_amplitude(self, config):
        return complex(self.log_amplitude_batch(np.asarray(config)[None, :])[0])

    def log_amplitude_batch(self, configs):
        s = np.asarray(configs, dtype=float)
        if s.shape[-1] != self.n_sites:
            raise ValueError("configuration length mismatch")
        theta = s @ self.w.T + self.b
        return s @ self.a + _log_cosh(theta).sum(axis=-1)

    def log_derivatives(self, config):
        return self.log_derivatives_batch(np.asarray(config)[None, :])[0]

    def log_derivatives_batch(self, configs):
        s = np.asarray(configs, dtype=float)
        theta = s @ self.w.T + self.b
        t = np.tanh(theta)  # (B, M)
        dw = t[:, :, None] * s[:, None, :]  # (B, M, N)
        return np.concatenate([s.astype(complex), t, dw.reshape(s.shape[0], -1)], axis=1)

    @property
    def n_parameters(self) -> int:
        return self.a.size + self.b.size + self.w.size

    @property
    def parameters(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.w.ravel()])

    def set_parameters(self, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (self.n_parameters,):
            raise ValueError("parameter vector length mismatch")
        n, m = self.n_sites, self.n_hidden
        self.a = values[:n].copy()
        self.b = values[n:n + m].copy()
        self.w = values[n + m:].reshape(m, n).copy()

    def copy(self) -> "ComplexRBM":
        return ComplexRBM(self.a, self.b, self.w)

    def to_json(self, seed=None) -> str:
        def pairs(arr):
            return [[z.real, z.imag] for z in np.asarray(arr).ravel()]

        data = {
            "n": self.n_sites,
            "m": self.n_hidden,
            "a": pairs(self.a),
            "b": pairs(self.b),
            "w": [pairs(row) for row in self.w],
        }
        if seed is not None:
            data["seed"] = int(seed)
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "ComplexRBM":
        data = json.loads(text)
        n, m = data["n"], data["m"]

        def unpairs(rows):
            return np.array([complex(re, im) for re, im in rows], dtype=complex)

        a = unpairs(data["a"])
        b = unpairs(data["b"])
        w = np.array([unpairs(row) for row in data["w"]], dtype=complex).reshape(m, n)
        return cls(a, b, w)


def random_rbm_ensemble(n: int, density=1, seed: int = 0) -> ComplexRBM:
    """Random-ensemble RBM instance: zero biases, hidden density M/N.

    Weight real parts are uniform on [-3/N, 3/N], imaginary parts uniform on
    [-pi, pi], all independent and reproducible from the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m_exact = density * n
    m = int(round(m_exact))
    if abs(m_exact - m) > 1e-9 or m < 1:
        raise ValueError(f"hidden density {density} gives non-integral hidden count for n={n}")
    rng = np.random.default_rng(seed)
    re = rng.uniform(-3.0 / n, 3.0 / n, size=(m, n))
    im = rng.uniform(-np.pi, np.pi, size=(m, n))
    return ComplexRBM(np.zeros(n), np.zeros(m), re + 1j * im)


def mix_replicas(eta):
    """Involutive change of basis on four replica blocks of N spins each.

    Each block is replaced by the elementwise product of the other three:
    (s1,s2,s3,s4) -> (s2*s3*s4, s1*s3*s4, s1*s2*s4, s1*s2*s3).  Works on a
    single configuration (4N,) or a batch (..., 4N) in the {-1,+1} basis.
    """
    eta = np.asarray(eta)
    if eta.shape[-1] % 4:
        raise ValueError("replicated configuration length must be 4N")
    n = eta.shape[-1] // 4
    blocks = eta.reshape(eta.shape[:-1] + (4, n))
    total = blocks.prod(axis=-2, keepdims=True)
    # s_j^2 = 1, so product of the other three = total product * s_j
    out = total * blocks
    return out.reshape(eta.shape)


class ReplicatedModel(AmplitudeModel):
    """Four unentangled copies (psi*, psi*, psi*, psi) over 4N spins.

    log Phi(eta) = conj(log psi(s1)) + conj(log psi(s2)) + conj(log psi(s3))
                   + log psi(s4);  -inf propagates (zero amplitude).
    """

    basis = "pm1"

    def __init__(self, base: AmplitudeModel):
        if base.basis != "pm1":
            raise ValueError("replicated model requires a {-1,+1} basis model")
        self.base = base
        self.n_sites = 4 * base.n_sites

    def log_amplitude(self, config):
        return complex(self.log_amplitude_batch(np.asarray(config)[None, :])[0])

    def log_amplitude_batch(self, configs):
        configs = np.asarray(configs)
        n = self.base.n_sites
        flat = configs.reshape(-1, 4, n).reshape(-1, n)
        vals = self.base.log_amplitude_batch(flat).reshape(-1, 4)
        out = vals[:, 0].conj() + vals[:, 1].conj() + vals[:, 2].conj() + vals[:, 3]
        return out.reshape(configs.shape[:-1])


class BitBasisModel(AmplitudeModel):
    """Explicit basis adapter: evaluate a {-1,+1} model on {0,1} configurations."""

    basis = "bits"

    def __init__(self, base: AmplitudeModel):
        if base.basis != "pm1":
            raise ValueError("adapter expects a {-1,+1} basis model")
        self.base = base
        self.n_sites = base.n_sites

    def log_amplitude(self, config):
        return self.base.log_amplitude(spins_from_bits(config))

    def log_amplitude_batch(self, configs):
        return self.base.log_amplitude_batch(spins_from_bits(configs))

    def log_derivatives(self, config):
        return self.base.log_derivatives(spins_from_bits(config))

    def log_derivatives_batch(self, configs):
        return self.base.log_derivatives_batch(spins_from_bits(configs))

    @property
    def parameters(self):
        return self.base.parameters

    def set_parameters(self, values):
        self.base.set_parameters(values)


def as_bit_basis(model: AmplitudeModel) -> AmplitudeModel:
    return model if model.basis == "bits" else BitBasisModel(model)


def build_replicated_model(psi: AmplitudeModel) -> ReplicatedModel:
    return ReplicatedModel(psi)


def build_shifted_gamma_model(gamma: AmplitudeModel) -> ReferenceShiftedModel:
    """Gauge the doubled-space model to log-amplitude 0 at the all-zeros configuration."""
    if gamma.basis != "bits":
        raise ValueError("doubled-space model must use the bit basis")
    nu0 = np.zeros(gamma.n_sites, dtype=np.int8)
    return shift_to_reference(gamma, nu0)
