"""Exact Pauli-string algebra and Clifford conjugation.

Pauli strings are letter vectors over {I, X, Y, Z} with a tracked unit
phase from {+1, +i, -1, -i}, stored as an exponent of i so that phase
arithmetic is integer-exact.  Clifford circuits are restricted to the
Hadamard/CNOT generators, which is all the Bell-pair construction needs;
conjugation is table-driven and bit-exact.

Bit conventions used by the dense helpers elsewhere: qubit ``j`` of a
basis index ``n`` is bit ``(n >> j) & 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

LETTERS = "IXYZ"
PHASES = (1 + 0j, 1j, -1 + 0j, -1j)  # value of i**k for k = 0..3

_PHASE_LABEL = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LABEL_PHASE = {v: k for k, v in _PHASE_LABEL.items()}

# Single-letter products: _MUL[a][b] = (letter, k) with  a * b = i**k * letter.
_MUL = {
    ("I", "I"): ("I", 0), ("I", "X"): ("X", 0), ("I", "Y"): ("Y", 0), ("I", "Z"): ("Z", 0),
    ("X", "I"): ("X", 0), ("X", "X"): ("I", 0), ("X", "Y"): ("Z", 1), ("X", "Z"): ("Y", 3),
    ("Y", "I"): ("Y", 0), ("Y", "X"): ("Z", 3), ("Y", "Y"): ("I", 0), ("Y", "Z"): ("X", 1),
    ("Z", "I"): ("Z", 0), ("Z", "X"): ("Y", 1), ("Z", "Y"): ("X", 3), ("Z", "Z"): ("I", 0),
}

# Conjugation images g P g for the self-inverse generators (H, CNOT).
_H_CONJ = {"I": ("I", 0), "X": ("Z", 0), "Y": ("Y", 2), "Z": ("X", 0)}

_CNOT_CONJ = {
    ("I", "I"): ("I", "I", 0), ("I", "X"): ("I", "X", 0),
    ("I", "Y"): ("Z", "Y", 0), ("I", "Z"): ("Z", "Z", 0),
    ("X", "I"): ("X", "X", 0), ("X", "X"): ("X", "I", 0),
    ("X", "Y"): ("Y", "Z", 0), ("X", "Z"): ("Y", "Y", 2),
    ("Y", "I"): ("Y", "X", 0), ("Y", "X"): ("Y", "I", 0),
    ("Y", "Y"): ("X", "Z", 2), ("Y", "Z"): ("X", "Y", 0),
    ("Z", "I"): ("Z", "I", 0), ("Z", "X"): ("Z", "X", 0),
    ("Z", "Y"): ("I", "Y", 0), ("Z", "Z"): ("I", "Z", 0),
}


@dataclass(frozen=True)
class PauliString:
    """An N-qubit Pauli string  i**phase_power * letters[0] x letters[1] x ...

    ``letters`` is a string over "IXYZ" with position j acting on qubit j.
    """

    letters: str
    phase_power: int = 0

    def __post_init__(self):
        if len(self.letters) < 1 or any(c not in LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "phase_power", self.phase_power % 4)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels like "+XIZY", "-iZZ", "YX" (bare means phase +1)."""
        for prefix in ("+i", "-i", "+", "-"):
            if label.startswith(prefix):
                return cls(label[len(prefix):], _LABEL_PHASE[prefix])
        return cls(label, 0)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def phase(self) -> complex:
        return PHASES[self.phase_power]

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def y_count(self) -> int:
        return self.letters.count("Y")

    @property
    def x_mask(self) -> int:
        """Bit j set iff letter j flips qubit j (X or Y)."""
        m = 0
        for j, c in enumerate(self.letters):
            if c in "XY":
                m |= 1 << j
        return m

    @property
    def z_mask(self) -> int:
        """Bit j set iff letter j carries a Z-type sign (Z or Y)."""
        m = 0
        for j, c in enumerate(self.letters):
            if c in "ZY":
                m |= 1 << j
        return m

    def label(self) -> str:
        return _PHASE_LABEL[self.phase_power] + self.letters

    def __str__(self):
        return self.label()

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("system sizes differ")
        out = []
        k = self.phase_power + other.phase_power
        for a, b in zip(self.letters, other.letters):
            c, dk = _MUL[(a, b)]
            out.append(c)
            k += dk
        return PauliString("".join(out), k % 4)

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (qubit 0 = least significant bit)."""
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        m = np.array([[1]], dtype=complex)
        for c in self.letters:  # qubit 0 innermost factor
            m = np.kron(single[c], m)
        return self.phase * m


def hadamard(i: int) -> tuple:
    return ("H", i)


def cnot(control: int, target: int) -> tuple:
    return ("CNOT", control, target)


@dataclass(frozen=True)
class CliffordCircuit:
    """Ordered list of H/CNOT gates; gates[0] is applied to the state first.

    The circuit unitary is therefore gates[-1] * ... * gates[0].
    """

    n: int
    gates: tuple

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if g[0] == "H":
                if not 0 <= g[1] < self.n:
                    raise ValueError(f"H index out of range: {g}")
            elif g[0] == "CNOT":
                _, c, t = g
                if not (0 <= c < self.n and 0 <= t < self.n):
                    raise ValueError(f"CNOT index out of range: {g}")
                if c == t:
                    raise ValueError("CNOT control equals target")
            else:
                raise ValueError(f"unknown gate {g}")

    def inverse(self) -> "CliffordCircuit":
        # H and CNOT are involutions, so reversing the order inverts the circuit.
        return CliffordCircuit(self.n, tuple(reversed(self.gates)))

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n
        u = np.eye(dim, dtype=complex)
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        for g in self.gates:
            if g[0] == "H":
                u = _single_qubit_matrix(h, g[1], self.n) @ u
            else:
                u = _cnot_matrix(g[1], g[2], self.n) @ u
        return u


def _single_qubit_matrix(m2, i, n):
    m = np.array([[1]], dtype=complex)
    for j in range(n):
        m = np.kron(m2 if j == i else np.eye(2), m)
    return m


def _cnot_matrix(c, t, n):
    dim = 1 << n
    u = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    flipped = idx ^ (((idx >> c) & 1) << t)
    u[flipped, idx] = 1.0
    return u


def bell_pair_circuit(n: int) -> CliffordCircuit:
    """Circuit pairing physical qubit i with replica qubit i+n: prod_i CNOT(i,i+n) H(i).

    Acting on |0...0> it produces n Bell pairs; its dagger maps the doubled
    product state into the computational basis used by the Bell estimator.
    """
    gates = []
    for i in range(n):
        gates.append(hadamard(i))
        gates.append(cnot(i, i + n))
    return CliffordCircuit(2 * n, tuple(gates))


def conjugate_pauli(circuit: CliffordCircuit, p: PauliString) -> PauliString:
    """Return C^dag p C with exact phase tracking."""
    if circuit.n != p.n:
        raise ValueError("circuit and string sizes differ")
    letters = list(p.letters)
    k = p.phase_power
    # C^dag P C = g1^dag ( ... (gk^dag P gk) ... ) g1, so process gates last-first;
    # each generator is self-inverse, so conjugation uses the g P g tables.
    for g in reversed(circuit.gates):
        if g[0] == "H":
            letters[g[1]], dk = _H_CONJ[letters[g[1]]]
        else:
            _, c, t = g
            letters[c], letters[t], dk = _CNOT_CONJ[(letters[c], letters[t])]
        k += dk
    return PauliString("".join(letters), k % 4)


class PauliSumOperator:
    """Weighted sum of phase-free Pauli strings in canonical merged form.

    Terms are keyed by the letter vector; any string phase is folded into the
    coefficient on construction.  Term order is lexicographic on letters, so
    serialization is deterministic.
    """

    def __init__(self, n: int, terms=None):
        self.n = int(n)
        if self.n < 1:
            raise ValueError("system size must be >= 1")
        merged: dict[str, complex] = {}
        for coeff, string in terms or []:
            if isinstance(string, PauliString):
                if string.n != self.n:
                    raise ValueError("term size mismatch")
                c = complex(coeff) * string.phase
                key = string.letters
            else:
                key = str(string)
                if len(key) != self.n or any(ch not in LETTERS for ch in key):
                    raise ValueError(f"bad letters {key!r}")
                c = complex(coeff)
            merged[key] = merged.get(key, 0j) + c
        self._terms = {k: v for k, v in sorted(merged.items()) if v != 0}

    @property
    def terms(self) -> list:
        """Sorted list of (coefficient, PauliString with phase +1)."""
        return [(c, PauliString(k)) for k, c in self._terms.items()]

    @property
    def n_terms(self) -> int:
        return len(self._terms)

    def coefficient(self, letters: str) -> complex:
        return self._terms.get(letters, 0j)

    def __add__(self, other: "PauliSumOperator") -> "PauliSumOperator":
        if self.n != other.n:
            raise ValueError("system sizes differ")
        items = [(c, k) for k, c in self._terms.items()]
        items += [(c, k) for k, c in other._terms.items()]
        return PauliSumOperator(self.n, items)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "PauliSumOperator":
        return PauliSumOperator(self.n, [(scalar * c, k) for k, c in self._terms.items()])

    def __matmul__(self, other: "PauliSumOperator") -> "PauliSumOperator":
        """Operator product, exact phases; size grows as n_terms^2 before merging."""
        if self.n != other.n:
            raise ValueError("system sizes differ")
        items = []
        for ka, ca in self._terms.items():
            pa = PauliString(ka)
            for kb, cb in other._terms.items():
                items.append((ca * cb, pa * PauliString(kb)))
        return PauliSumOperator(self.n, items)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        # In merged form every string is hermitian, so hermiticity reduces to
        # real coefficients.
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def coefficient_norm(self) -> float:
        """Sum of |coeff|, an upper bound on the spectral norm."""
        return float(sum(abs(c) for c in self._terms.values()))

    def compiled(self):
        """Arrays (coeffs, x_masks, z_masks, xz_phase) for fast bit-level application."""
        coeffs = np.array([c for c, _ in self.terms], dtype=complex)
        xm = np.array([p.x_mask for _, p in self.terms], dtype=np.int64)
        zm = np.array([p.z_mask for _, p in self.terms], dtype=np.int64)
        ph = np.array([1j ** bin(x & z).count("1") for x, z in zip(xm, zm)], dtype=complex)
        return coeffs, xm, zm, ph

    def to_json(self) -> str:
        rows = [
            {"coeff_re": c.real, "coeff_im": c.imag, "string": k}
            for k, c in self._terms.items()
        ]
        return json.dumps({"n": self.n, "terms": rows})

    @classmethod
    def from_json(cls, text: str) -> "PauliSumOperator":
        data = json.loads(text)
        terms = [(complex(r["coeff_re"], r["coeff_im"]), r["string"]) for r in data["terms"]]
        return cls(data["n"], terms)

    def __repr__(self):
        inner = " + ".join(f"({c:.6g})*{k}" for k, c in list(self._terms.items())[:4])
        more = "" if self.n_terms <= 4 else f" + ... [{self.n_terms} terms]"
        return f"PauliSumOperator(n={self.n}, {inner}{more})"


def conjugate_operator(circuit: CliffordCircuit, h: PauliSumOperator) -> PauliSumOperator:
    """Term-by-term C^dag H C with phases folded into coefficients."""
    if circuit.n != h.n:
        raise ValueError("circuit and operator sizes differ")
    items = []
    for c, p in h.terms:
        q = conjugate_pauli(circuit, p)
        items.append((c, q))
    return PauliSumOperator(h.n, items)


def complex_conjugate_operator(h: PauliSumOperator) -> PauliSumOperator:
    """Elementwise complex conjugate H*: coefficients conjugated, odd-Y strings flip sign."""
    items = []
    for c, p in h.terms:
        sign = -1.0 if p.y_count % 2 else 1.0
        items.append((sign * c.conjugate(), p))
    return PauliSumOperator(h.n, items)


def build_doubled_hamiltonian(h: PauliSumOperator) -> PauliSumOperator:
    """C^dag (H (x) I + I (x) H*) C on 2N qubits, with C = bell_pair_circuit(N).

    Physical qubits occupy indices 0..N-1 and replica qubits N..2N-1; the
    ground energy of the result is twice the ground energy of ``h``.
    """
    if not h.is_hermitian():
        raise ValueError("doubled Hamiltonian requires a hermitian input")
    n = h.n
    pad = "I" * n
    items = [(c, p.letters + pad) for c, p in h.terms]
    items += [(c, pad + p.letters) for c, p in complex_conjugate_operator(h).terms]
    doubled = PauliSumOperator(2 * n, items)
    return conjugate_operator(bell_pair_circuit(n), doubled)
