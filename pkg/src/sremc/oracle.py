"""Exact dense reference computations.

Everything here is exponential in the qubit count and exists to provide
ground truth for the Monte Carlo estimators: full state vectors, exact
stabilizer Renyi entropies, the Pauli-string probability distribution,
exact ground states, and the brute-force four-replica sum.

Pauli strings act on basis indices through bit masks: with x = x_mask and
z = z_mask of a string P,

    P |n> = i^popcount(x & z) * (-1)^popcount(n & z) * |n ^ x>.

Pauli expectations for all 4^N strings are enumerated per x-mask, with the
sum over z-masks evaluated as a Walsh-Hadamard transform of
conj(psi[n ^ x]) * psi[n]; this reproduces the per-string bit application
exactly while keeping the oracle fast enough at the size caps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .ansatz import AmplitudeModel, all_configurations
from .errors import CapacityError, NumericalError
from .pauli import PauliString, PauliSumOperator, bell_pair_circuit
from . import pauli as _pauli

DEFAULT_SINGLE_CAP = 14
DEFAULT_DOUBLED_CAP = 12
DEFAULT_XI_CAP = 8
DENSE_EIG_MAX = 10  # full diagonalization up to here, Lanczos beyond


@dataclass
class DenseState:
    """Full complex amplitude vector over 2^n basis states (may be unnormalized)."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n,):
            raise ValueError("amplitude vector length must be 2^n")

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "DenseState":
        norm = np.sqrt(self.norm_sq)
        if norm == 0:
            raise ValueError("cannot normalize the zero state")
        return DenseState(self.amplitudes / norm, self.n)

    def to_json(self) -> str:
        import json

        return json.dumps({
            "n": self.n,
            "amplitudes": [[z.real, z.imag] for z in self.amplitudes],
        })

    @classmethod
    def from_json(cls, text: str) -> "DenseState":
        import json

        data = json.loads(text)
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return cls(amps, data["n"])


def _check_cap(n: int, cap: int, what: str):
    if n > cap:
        raise CapacityError(f"{what}: n={n} exceeds cap {cap}")


def _popcount(values):
    values = np.asarray(values)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(values.astype(np.uint64)).astype(np.int64)
    table = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)
    out = np.zeros(values.shape, dtype=np.int64)
    v = values.astype(np.uint64)
    for shift in (0, 16, 32, 48):
        out += table[(v >> np.uint64(shift)) & np.uint64(0xFFFF)]
    return out


def apply_pauli_string(x_mask: int, z_mask: int, vec: np.ndarray) -> np.ndarray:
    """P applied to a dense vector via bit operations."""
    dim = vec.size
    idx = np.arange(dim, dtype=np.int64)
    signs = 1.0 - 2.0 * (_popcount(idx & z_mask) & 1)
    phase = 1j ** (bin(x_mask & z_mask).count("1") % 4)
    out = np.empty_like(vec, dtype=complex)
    out[idx ^ x_mask] = phase * signs * vec
    return out


def apply_operator(h: PauliSumOperator, vec: np.ndarray, compiled=None) -> np.ndarray:
    """H applied to a dense vector, term by term (matrix-free)."""
    coeffs, xm, zm, ph = compiled if compiled is not None else h.compiled()
    dim = vec.size
    idx = np.arange(dim, dtype=np.int64)
    out = np.zeros(dim, dtype=complex)
    for c, x, z, p in zip(coeffs, xm, zm, ph):
        signs = 1.0 - 2.0 * (_popcount(idx & z) & 1)
        out[idx ^ x] += (c * p) * signs * vec
    return out


def operator_matrix(h: PauliSumOperator, cap: int = 12) -> np.ndarray:
    """Dense matrix of a Pauli sum (test/oracle use only)."""
    _check_cap(h.n, cap, "operator_matrix")
    dim = 1 << h.n
    m = np.zeros((dim, dim), dtype=complex)
    for c, p in h.terms:
        m += c * p.matrix()
    return m


def expectation(h: PauliSumOperator, state: DenseState) -> float:
    """<H> on a (possibly unnormalized) state."""
    v = state.amplitudes
    return float(np.vdot(v, apply_operator(h, v)).real / state.norm_sq)


def _walsh_hadamard_last_axis(values: np.ndarray) -> np.ndarray:
    """W[..., z] = sum_n (-1)^popcount(n & z) values[..., n] for power-of-two length."""
    v = values.copy()
    n = v.shape[-1]
    h = 1
    while h < n:
        shaped = v.reshape(v.shape[:-1] + (n // (2 * h), 2, h))
        top = shaped[..., 0, :].copy()
        bot = shaped[..., 1, :]
        shaped[..., 0, :] = top + bot
        shaped[..., 1, :] = top - bot
        h *= 2
    return v


def pauli_expectation_blocks(state: DenseState, block: int | None = None):
    """Yield (x_masks, e) with e[i, z] = <P(x_i, z)> (unnormalized by <Psi|Psi>).

    Covers every string in P_N once: x enumerates flip masks, z sign masks.
    Expectations of hermitian strings are real; the real part is returned.
    """
    psi = state.amplitudes
    dim = psi.size
    if block is None:
        block = max(1, (1 << 22) // dim)
    idx = np.arange(dim, dtype=np.int64)
    pc = _popcount(idx)
    i_pow = 1j ** (pc % 4)
    conj_psi = psi.conj()
    for start in range(0, dim, block):
        xs = idx[start:start + block]
        f = conj_psi[idx[None, :] ^ xs[:, None]] * psi[None, :]
        t = _walsh_hadamard_last_axis(f)
        # phase i^popcount(x & z) restores the Y-letter factors
        phases = i_pow[xs[:, None] & idx[None, :]]
        yield xs, (phases * t).real


def exact_sre(state: DenseState, alpha: float, cap: int = DEFAULT_SINGLE_CAP) -> float:
    """Stabilizer Renyi entropy M_alpha of a pure (possibly unnormalized) state.

    alpha = 1 uses the dedicated Shannon-limit expression; any other positive
    alpha uses the direct power sum.  Invariant under state rescaling.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    _check_cap(state.n, cap, "exact_sre")
    norm_sq = state.norm_sq
    if norm_sq <= 0:
        raise ValueError("state has zero norm")
    dim = 1 << state.n
    if alpha == 1:
        acc = 0.0
        for _, e in pauli_expectation_blocks(state):
            xi = (e / norm_sq) ** 2 / dim
            nz = xi > 0
            acc -= float((xi[nz] * np.log(xi[nz])).sum())
        return acc - state.n * np.log(2.0)
    acc = 0.0
    for _, e in pauli_expectation_blocks(state):
        acc += float((((e / norm_sq) ** 2) ** alpha).sum())
    return float(np.log(acc / dim) / (1.0 - alpha))


_LETTER_FROM_BITS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}


def _string_from_masks(x: int, z: int, n: int) -> str:
    return "".join(_LETTER_FROM_BITS[((x >> j) & 1, (z >> j) & 1)] for j in range(n))


@dataclass
class XiDistribution:
    """Probability of each Pauli string: squared normalized expectation / 2^N."""

    entries: dict

    def probability(self, p: PauliString) -> float:
        return self.entries.get(p, 0.0)

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def to_rows(self):
        return [(p.letters, prob) for p, prob in sorted(self.entries.items(), key=lambda kv: kv[0].letters)]


def exact_xi_distribution(state: DenseState, cap: int = DEFAULT_XI_CAP) -> XiDistribution:
    _check_cap(state.n, cap, "exact_xi_distribution")
    norm_sq = state.norm_sq
    if norm_sq <= 0:
        raise ValueError("state has zero norm")
    dim = 1 << state.n
    entries = {}
    for xs, e in pauli_expectation_blocks(state):
        probs = (e / norm_sq) ** 2 / dim
        for row, x in enumerate(xs):
            for z in range(dim):
                entries[PauliString(_string_from_masks(int(x), z, state.n))] = float(probs[row, z])
    return XiDistribution(entries)


def exact_lowest_states(h: PauliSumOperator, k: int = 1, cap: int = DEFAULT_SINGLE_CAP,
                        seed: int = 7):
    """The k lowest eigenpairs of a hermitian Pauli sum.

    Dense full diagonalization up to DENSE_EIG_MAX qubits, matrix-free Lanczos
    (ARPACK) with a deterministic seeded start vector beyond.  Degenerate
    levels return whichever orthonormal basis the solver produces.
    """
    if not h.is_hermitian():
        raise ValueError("eigensolver requires a hermitian operator")
    _check_cap(h.n, cap, "exact_lowest_states")
    dim = 1 << h.n
    k = int(k)
    if not 1 <= k < dim:
        raise ValueError("k out of range")
    if h.n <= DENSE_EIG_MAX:
        vals, vecs = np.linalg.eigh(operator_matrix(h, cap=cap))
        energies = vals[:k]
        states = [DenseState(vecs[:, i].copy(), h.n) for i in range(k)]
    else:
        compiled = h.compiled()
        op = scipy.sparse.linalg.LinearOperator(
            (dim, dim), matvec=lambda v: apply_operator(h, v.astype(complex), compiled),
            dtype=complex)
        rng = np.random.default_rng(seed)
        v0 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        ncv = min(dim - 1, max(40, 4 * k + 1))
        vals, vecs = scipy.sparse.linalg.eigsh(op, k=k, which="SA", v0=v0, ncv=ncv)
        order = np.argsort(vals)
        energies = vals[order]
        states = [DenseState(vecs[:, i].copy(), h.n) for i in order]
    bound = h.coefficient_norm()
    for e, s in zip(energies, states):
        residual = np.linalg.norm(apply_operator(h, s.amplitudes) - e * s.amplitudes)
        if residual > 1e-9 * max(bound, 1.0):
            raise NumericalError(f"eigenpair residual {residual:.3e} exceeds tolerance")
    return np.asarray(energies, dtype=float), states


def exact_ground_state(h: PauliSumOperator, cap: int = DEFAULT_SINGLE_CAP, seed: int = 7):
    energies, states = exact_lowest_states(h, k=1, cap=cap, seed=seed)
    return float(energies[0]), states[0]


def densify(model: AmplitudeModel, cap: int = DEFAULT_SINGLE_CAP) -> DenseState:
    """Evaluate a model on every configuration; -inf log-amplitudes map to exact 0."""
    n = model.n_sites
    _check_cap(n, cap, "densify")
    logs = model.log_amplitude_batch(all_configurations(n, model.basis))
    with np.errstate(over="raise"):
        amps = np.where(np.isneginf(logs.real), 0.0, np.exp(logs))
    return DenseState(amps, n)


def brute_force_replicated_sum(model: AmplitudeModel, n: int) -> float:
    """Full 2^(4N)-term four-replica sum; equals exact_sre(densify(model), 2).

    Independent of the Monte Carlo path: evaluates the raw amplitude product
    over all configuration quadruples and returns -log of the normalized sum.
    """
    if 4 * n > 16:
        raise CapacityError(f"brute_force_replicated_sum: 4N = {4 * n} exceeds 16")
    if model.n_sites != n:
        raise ValueError("model size mismatch")
    amps = densify(model, cap=n).amplitudes
    z = float((np.abs(amps) ** 2).sum())
    dim = 1 << n
    i1 = np.arange(dim)[:, None, None, None]
    i2 = np.arange(dim)[None, :, None, None]
    i3 = np.arange(dim)[None, None, :, None]
    i4 = np.arange(dim)[None, None, None, :]
    a = amps
    total = (
        a[i1] * a[i2] * a[i3] * a[i4].conj()
        * a[i2 ^ i3 ^ i4].conj() * a[i1 ^ i3 ^ i4].conj() * a[i1 ^ i2 ^ i4].conj()
        * a[i1 ^ i2 ^ i3]
    ).sum()
    value = float(total.real) / z ** 4
    if value <= 0:
        raise ValueError("four-replica sum is non-positive")
    return -float(np.log(value))


def apply_circuit(circuit, state: DenseState, dagger: bool = False) -> DenseState:
    """Dense application of an H/CNOT circuit (or its inverse)."""
    if circuit.n != state.n:
        raise ValueError("circuit and state sizes differ")
    v = state.amplitudes.copy()
    dim = v.size
    idx = np.arange(dim, dtype=np.int64)
    gates = tuple(reversed(circuit.gates)) if dagger else circuit.gates
    for g in gates:  # H and CNOT are self-adjoint, so dagger = reversed order
        if g[0] == "H":
            bit = 1 << g[1]
            low = idx[(idx & bit) == 0]
            a = v[low].copy()
            b = v[low | bit]
            inv_sqrt2 = 1.0 / np.sqrt(2.0)
            v[low] = (a + b) * inv_sqrt2
            v[low | bit] = (a - b) * inv_sqrt2
        else:
            _, c, t = g
            v = v[idx ^ (((idx >> c) & 1) << t)]
    return DenseState(v, state.n)


def psi_psi_star(psi: DenseState, cap: int = DEFAULT_DOUBLED_CAP) -> DenseState:
    """|Psi, Psi*> on 2N qubits: physical block low bits, conjugated replica high bits."""
    _check_cap(2 * psi.n, cap, "psi_psi_star")
    amps = np.outer(psi.amplitudes.conj(), psi.amplitudes).ravel()
    return DenseState(amps, 2 * psi.n)


def exact_gamma_state(psi: DenseState, cap: int = DEFAULT_DOUBLED_CAP) -> DenseState:
    """The Bell-estimator reference state: bell-pair circuit dagger on |Psi, Psi*>.

    Its amplitude at the all-zeros configuration equals <Psi|Psi>/2^(N/2),
    positive real, and <Gamma|Gamma> = 2^N |Gamma(0)|^2.
    """
    doubled = psi_psi_star(psi, cap=cap)
    return apply_circuit(bell_pair_circuit(psi.n), doubled, dagger=True)


def random_clifford_circuit(n: int, n_gates: int, rng) -> _pauli.CliffordCircuit:
    """Random circuit over the H/CNOT generators (for invariance tests)."""
    gates = []
    for _ in range(n_gates):
        if n >= 2 and rng.random() < 0.5:
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(_pauli.cnot(int(c), int(t)))
        else:
            gates.append(_pauli.hadamard(int(rng.integers(n))))
    return _pauli.CliffordCircuit(n, tuple(gates))


def singlet_chain_state(n: int, offset: int = 0) -> DenseState:
    """Product of two-site singlets on pairs (offset+2k, offset+2k+1) mod n.

    offset 0 and 1 give the two dimer coverings of a periodic even chain; both
    are exact ground states of the Majumdar-Ghosh Hamiltonian.
    """
    if n % 2:
        raise ValueError("singlet chain needs an even number of sites")
    dim = 1 << n
    idx = np.arange(dim)
    amps = np.ones(dim, dtype=complex)
    scale = 1.0 / np.sqrt(2.0)
    for k in range(n // 2):
        i = (offset + 2 * k) % n
        j = (offset + 2 * k + 1) % n
        bi = (idx >> i) & 1
        bj = (idx >> j) & 1
        factor = np.where((bi == 0) & (bj == 1), scale, np.where((bi == 1) & (bj == 0), -scale, 0.0))
        amps *= factor
    return DenseState(amps, n)
