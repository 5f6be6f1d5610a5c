"""Single-qubit rotations and the 24-element Clifford group.

Every Clifford is stored in the canonical form ``Z(phi_post) . core . Z(phi_pre)``
where the core is the only physically driven (or timed) part of the gate. The ideal
product convention is left-multiplication: a sequence ``[C_1, ..., C_J]`` acts as
``U_J ... U_1``.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Self, Sequence, TypeAlias

import numpy as np
from cachetools import cached

Unitary2: TypeAlias = np.ndarray

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

HALF_PI = np.pi / 2
Z_ANGLES = (0.0, HALF_PI, np.pi, -HALF_PI)
CLIFFORD_COUNT = 24
AXIS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Rotation:
    axis: tuple[float, float, float]
    angle: float

    def __post_init__(self):
        norm = float(np.linalg.norm(self.axis))
        if abs(norm - 1.0) > AXIS_TOLERANCE:
            raise ValueError(f"Invalid rotation axis {self.axis}, |n| = {norm}")
        if not -2 * np.pi < self.angle <= 4 * np.pi:
            raise ValueError(f"Invalid rotation angle {self.angle}")

    @classmethod
    def about_x(cls, angle: float) -> Self:
        return cls((1.0, 0.0, 0.0), angle)

    @classmethod
    def about_y(cls, angle: float) -> Self:
        return cls((0.0, 1.0, 0.0), angle)

    @classmethod
    def about_z(cls, angle: float) -> Self:
        return cls((0.0, 0.0, 1.0), angle)


def unitary_of(rotation: Rotation) -> Unitary2:
    """exp(-i angle/2 n.sigma) = cos(angle/2) I - i sin(angle/2) n.sigma"""
    n = np.asarray(rotation.axis, dtype=float)
    half = rotation.angle / 2
    return np.cos(half) * IDENTITY - 1j * np.sin(half) * np.tensordot(n, PAULIS, axes=1)


def rz(phi: float) -> Unitary2:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def trace_fidelity(a: Unitary2, b: Unitary2) -> float:
    """|Tr(a^dagger b)| / 2, one for operators equal up to a global phase."""
    return float(abs(np.trace(a.conj().T @ b)) / 2)


def equal_up_to_phase(a: Unitary2, b: Unitary2, tol: float = 1e-12) -> bool:
    return abs(trace_fidelity(a, b) - 1.0) <= tol


def is_unitary(u: Unitary2, tol: float = 1e-9) -> bool:
    return bool(np.linalg.norm(u.conj().T @ u - IDENTITY) <= tol)


def adjoint(u: Unitary2) -> np.ndarray:
    """SO(3) image of u: R_ij = Re Tr(sigma_i u sigma_j u^dagger) / 2."""
    rotated = u @ PAULIS @ u.conj().T
    return 0.5 * np.real(np.einsum("iab,jba->ij", PAULIS, rotated))


def pauli_vector(h: np.ndarray) -> np.ndarray:
    """Coefficients of a traceless Hermitian 2x2 matrix in the Pauli basis."""
    return 0.5 * np.real(np.einsum("kab,ba->k", PAULIS, h))


class Core(Enum):
    """Physically driven part of a Clifford."""

    NONE = "none"
    WAIT = "wait"
    X_PI = "x180"
    Y_PI = "y180"
    X_HALF = "x90"
    X_MINUS_HALF = "-x90"
    Y_HALF = "y90"
    Y_MINUS_HALF = "-y90"

    @property
    def rotation(self) -> Rotation | None:
        return CORE_ROTATIONS.get(self)

    @property
    def unitary(self) -> Unitary2:
        rotation = self.rotation
        return IDENTITY.copy() if rotation is None else unitary_of(rotation)

    @property
    def target_angle(self) -> float:
        """Magnitude of the driven rotation, zero for NONE and WAIT."""
        rotation = self.rotation
        return 0.0 if rotation is None else abs(rotation.angle)

    @property
    def axis_phase(self) -> float:
        """Phase of the drive axis in the xy plane, negative rotations flipped by pi."""
        rotation = self.rotation
        if rotation is None:
            return 0.0
        phase = 0.0 if rotation.axis[0] else HALF_PI
        if rotation.angle < 0:
            phase += np.pi
        return phase

    @classmethod
    def pi_cores(cls) -> list["Core"]:
        return [cls.X_PI, cls.Y_PI]

    @classmethod
    def half_pi_cores(cls) -> list["Core"]:
        return [cls.X_HALF, cls.X_MINUS_HALF, cls.Y_HALF, cls.Y_MINUS_HALF]


CORE_ROTATIONS = {
    Core.X_PI: Rotation.about_x(np.pi),
    Core.Y_PI: Rotation.about_y(np.pi),
    Core.X_HALF: Rotation.about_x(HALF_PI),
    Core.X_MINUS_HALF: Rotation.about_x(-HALF_PI),
    Core.Y_HALF: Rotation.about_y(HALF_PI),
    Core.Y_MINUS_HALF: Rotation.about_y(-HALF_PI),
}


@dataclass(frozen=True)
class CliffordElement:
    index: int
    phi_pre: float
    core: Core
    phi_post: float
    unitary: Unitary2 = field(compare=False, repr=False)

    @classmethod
    def build(cls, index: int, phi_pre: float, core: Core, phi_post: float) -> Self:
        u = rz(phi_post) @ core.unitary @ rz(phi_pre)
        return cls(index, phi_pre, core, phi_post, u)

    @property
    def frame(self) -> np.ndarray:
        return adjoint(self.unitary)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "phi_pre": self.phi_pre,
            "core": self.core.value,
            "phi_post": self.phi_post,
        }


def _key(u: Unitary2) -> tuple[int, ...]:
    return tuple(int(x) for x in np.rint(adjoint(u)).astype(int).ravel())


def _z_combinations() -> list[tuple[float, float]]:
    combos = [(pre, post) for pre in Z_ANGLES for post in Z_ANGLES]
    return sorted(combos, key=lambda c: (c[0] != 0) + (c[1] != 0))


@cached(cache={})
def clifford_table() -> tuple[CliffordElement, ...]:
    """The 24 Cliffords in fixed order, index 1 is the identity (a timed wait)."""
    candidates: list[tuple[float, Core, float]] = [(0.0, Core.WAIT, 0.0)]
    candidates += [(0.0, Core.NONE, phi) for phi in Z_ANGLES[1:]]
    for cores in (Core.pi_cores(), Core.half_pi_cores()):
        for pre, post in _z_combinations():
            candidates += [(pre, core, post) for core in cores]

    elements: list[CliffordElement] = []
    seen: set[tuple[int, ...]] = set()
    for pre, core, post in candidates:
        element = CliffordElement.build(len(elements) + 1, pre, core, post)
        key = _key(element.unitary)
        if key in seen:
            continue
        seen.add(key)
        elements.append(element)

    if len(elements) != CLIFFORD_COUNT:
        raise RuntimeError(f"Clifford enumeration produced {len(elements)} elements")
    return tuple(elements)


@cached(cache={})
def _index_by_key() -> dict[tuple[int, ...], int]:
    return {_key(c.unitary): c.index for c in clifford_table()}


def clifford(index: int) -> CliffordElement:
    if not 1 <= index <= CLIFFORD_COUNT:
        raise ValueError(f"Invalid Clifford index {index}")
    return clifford_table()[index - 1]


def lookup(u: Unitary2) -> int:
    """Index of the Clifford equal to u up to global phase."""
    try:
        return _index_by_key()[_key(u)]
    except KeyError:
        raise ValueError("Unitary is not a single-qubit Clifford")


def find_element(phi_pre: float, core: Core, phi_post: float) -> int:
    return lookup(rz(phi_post) @ core.unitary @ rz(phi_pre))


def identity_index() -> int:
    return 1


@cached(cache={})
def cayley_table() -> np.ndarray:
    """table[a-1, b-1] is the index c with U_c = U_b U_a (a applied first)."""
    table = np.zeros((CLIFFORD_COUNT, CLIFFORD_COUNT), dtype=int)
    for a in clifford_table():
        for b in clifford_table():
            table[a.index - 1, b.index - 1] = lookup(b.unitary @ a.unitary)
    return table


@cached(cache={})
def _inverse_table() -> np.ndarray:
    table = cayley_table()
    inverses = np.zeros(CLIFFORD_COUNT, dtype=int)
    for a in range(CLIFFORD_COUNT):
        inverses[a] = int(np.flatnonzero(table[a] == identity_index())[0]) + 1
    return inverses


def compose(a: int, b: int) -> int:
    return int(cayley_table()[a - 1, b - 1])


def inverse(a: int) -> int:
    return int(_inverse_table()[a - 1])


def inverting_gate(prefix: Sequence[int]) -> int:
    """Clifford that returns the ideal product of prefix to the identity."""
    product = identity_index()
    for index in prefix:
        product = compose(product, index)
    return inverse(product)


@dataclass(frozen=True)
class CliffordSequence:
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) < 2:
            raise ValueError(f"Invalid sequence length {len(self.indices)}, need J >= 2")
        if any(not 1 <= i <= CLIFFORD_COUNT for i in self.indices):
            raise ValueError("Invalid Clifford index in sequence")
        if self.ideal_product() != identity_index():
            raise ValueError(
                f"Sequence does not return to the identity, ideal product is {self.ideal_product()}"
            )

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    @property
    def length(self) -> int:
        return len(self.indices)

    def ideal_product(self) -> int:
        product = identity_index()
        for index in self.indices:
            product = compose(product, index)
        return product

    def prefix_products(self) -> list[int]:
        """Ideal products of the first j gates for j = 0..J."""
        products = [identity_index()]
        for index in self.indices:
            products.append(compose(products[-1], index))
        return products

    def to_json(self) -> str:
        return json.dumps(list(self.indices))

    @classmethod
    def from_json(cls, raw: str) -> Self:
        return cls(tuple(int(i) for i in json.loads(raw)))


def generate_sequence(length: int, rng: np.random.Generator) -> CliffordSequence:
    """J-1 uniform Cliffords followed by the inverting gate."""
    if length < 2:
        raise ValueError(f"Invalid sequence length {length}, need J >= 2")
    prefix = [int(i) for i in rng.integers(1, CLIFFORD_COUNT + 1, size=length - 1)]
    return CliffordSequence(tuple(prefix + [inverting_gate(prefix)]))


def clifford_table_records() -> list[dict]:
    return [c.to_dict() for c in clifford_table()]
