"""
Group-connected BD-RIS model: architecture, admittance parameterization and
scattering-matrix validation.
"""

import numpy as np
from dataclasses import dataclass
from functools import cached_property
from scipy.linalg import block_diag, eigh


DEFAULT_REFERENCE_IMPEDANCE = 50.0


class ArchitectureError(Exception):
    pass


@dataclass(frozen=True)
class RisArchitecture:
    num_groups: int
    group_size: int

    def __post_init__(self):
        if self.num_groups < 1 or self.group_size < 1:
            raise ArchitectureError(
                f"Group count and size must be positive, got {self.num_groups}x{self.group_size}"
            )

    @classmethod
    def from_group_size(cls, total: int, group_size: int) -> "RisArchitecture":
        if group_size < 1 or total < 1 or total % group_size != 0:
            raise ArchitectureError(
                f"{total} elements cannot be split into groups of {group_size}"
            )
        return cls(num_groups=total // group_size, group_size=group_size)

    @classmethod
    def from_label(cls, total: int, label: str) -> "RisArchitecture":
        """Parse `single`, `fully` or `group-<N_E>`"""
        if label == "single":
            return cls.from_group_size(total, 1)
        if label == "fully":
            return cls.from_group_size(total, total)
        if label.startswith("group-"):
            try:
                group_size = int(label.removeprefix("group-"))
            except ValueError as e:
                raise ArchitectureError(f"Invalid group size in label: {label}") from e
            return cls.from_group_size(total, group_size)
        raise ArchitectureError(f"Unsupported architecture label: {label}")

    @property
    def total(self) -> int:
        return self.num_groups * self.group_size

    @property
    def kind(self) -> str:
        if self.group_size == 1:
            return "single"
        if self.num_groups == 1:
            return "fully"
        return "group"

    @property
    def label(self) -> str:
        if self.kind == "group":
            return f"group-{self.group_size}"
        return self.kind

    @property
    def block_pack_size(self) -> int:
        return self.group_size * (self.group_size + 1) // 2

    @property
    def pack_size(self) -> int:
        return self.num_groups * self.block_pack_size

    def group_slice(self, g: int) -> slice:
        return slice(g * self.group_size, (g + 1) * self.group_size)

    @cached_property
    def pack_index_matrix(self) -> np.ndarray:
        """M x M map from (row, col) to the packed index, -1 outside the blocks"""
        local = np.empty((self.group_size, self.group_size), dtype=int)
        rows, cols = np.triu_indices(self.group_size)
        local[rows, cols] = np.arange(self.block_pack_size)
        local[cols, rows] = np.arange(self.block_pack_size)

        index = np.full((self.total, self.total), -1, dtype=int)
        for g in range(self.num_groups):
            span = self.group_slice(g)
            index[span, span] = local + g * self.block_pack_size
        return index


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Real symmetric blocks B_g with Y = jB"""

    blocks: tuple
    reference_impedance: float = DEFAULT_REFERENCE_IMPEDANCE

    def __post_init__(self):
        if not self.blocks:
            raise ArchitectureError("Admittance matrix needs at least one block")
        size = self.blocks[0].shape[0]
        for block in self.blocks:
            if block.shape != (size, size):
                raise ArchitectureError(
                    f"All admittance blocks must be {size}x{size}, got {block.shape}"
                )
            if np.iscomplexobj(block):
                raise ArchitectureError("Admittance blocks must be real")
            if not np.array_equal(block, block.T):
                raise ArchitectureError("Admittance blocks must be symmetric")

    @classmethod
    def zeros(
        cls,
        arch: RisArchitecture,
        reference_impedance: float = DEFAULT_REFERENCE_IMPEDANCE,
    ) -> "AdmittanceMatrix":
        blocks = tuple(
            np.zeros((arch.group_size, arch.group_size)) for _ in range(arch.num_groups)
        )
        return cls(blocks=blocks, reference_impedance=reference_impedance)

    @property
    def arch(self) -> RisArchitecture:
        return RisArchitecture(len(self.blocks), self.blocks[0].shape[0])

    def full(self) -> np.ndarray:
        return block_diag(*self.blocks)


@dataclass(frozen=True)
class ScatteringMatrix:
    blocks: tuple

    @property
    def arch(self) -> RisArchitecture:
        return RisArchitecture(len(self.blocks), self.blocks[0].shape[0])

    def full(self) -> np.ndarray:
        return block_diag(*self.blocks)

    @classmethod
    def identity(cls, arch: RisArchitecture) -> "ScatteringMatrix":
        return cls(
            blocks=tuple(
                np.eye(arch.group_size, dtype=complex) for _ in range(arch.num_groups)
            )
        )


@dataclass(frozen=True)
class ScatteringReport:
    unitarity: float
    symmetry: float
    block_leakage: float
    passed: bool

    @property
    def max_violation(self) -> float:
        return max(self.unitarity, self.symmetry, self.block_leakage)


def admittance_to_scattering(admittance: AdmittanceMatrix) -> ScatteringMatrix:
    """
    Per-block map Theta_g = (I + j Z0 B_g)^-1 (I - j Z0 B_g).

    Evaluated through the eigendecomposition of B_g, so each block is
    V diag((1 - j Z0 e) / (1 + j Z0 e)) V^T: unitary and symmetric by
    construction.
    """
    z0 = admittance.reference_impedance
    blocks = []
    for block in admittance.blocks:
        eigvals, eigvecs = eigh(block)
        denominator = 1.0 + 1j * z0 * eigvals
        assert np.all(np.abs(denominator) > 0.0)
        phases = (1.0 - 1j * z0 * eigvals) / denominator
        blocks.append((eigvecs * phases) @ eigvecs.T)
    return ScatteringMatrix(blocks=tuple(blocks))


def validate_scattering(
    theta: ScatteringMatrix | np.ndarray,
    arch: RisArchitecture,
    unitary_tol: float = 1e-8,
    symmetric_tol: float = 1e-10,
    block_tol: float = 0.0,
) -> ScatteringReport:
    full = theta.full() if isinstance(theta, ScatteringMatrix) else np.asarray(theta)
    if full.shape != (arch.total, arch.total):
        raise ArchitectureError(
            f"Scattering matrix shape {full.shape} does not match M={arch.total}"
        )

    identity = np.eye(arch.total)
    unitarity = float(np.linalg.norm(full.conj().T @ full - identity, "fro"))
    symmetry = float(np.linalg.norm(full - full.T, "fro"))

    off_block = arch.pack_index_matrix < 0
    block_leakage = float(np.linalg.norm(full[off_block]))

    passed = (
        unitarity <= unitary_tol
        and symmetry <= symmetric_tol
        and block_leakage <= block_tol
    )
    return ScatteringReport(
        unitarity=unitarity,
        symmetry=symmetry,
        block_leakage=block_leakage,
        passed=passed,
    )


def upper_triangular_pack(admittance: AdmittanceMatrix) -> np.ndarray:
    """Group order, row-major upper triangle within each block"""
    rows, cols = np.triu_indices(admittance.arch.group_size)
    for block in admittance.blocks:
        if not np.array_equal(block, block.T):
            raise ArchitectureError("Only symmetric blocks can be packed")
    return np.concatenate([block[rows, cols] for block in admittance.blocks])


def upper_triangular_unpack(
    x: np.ndarray,
    arch: RisArchitecture,
    reference_impedance: float = DEFAULT_REFERENCE_IMPEDANCE,
) -> AdmittanceMatrix:
    x = np.asarray(x, dtype=float)
    if x.shape != (arch.pack_size,):
        raise ArchitectureError(
            f"Packed vector must have length {arch.pack_size}, got {x.shape}"
        )

    rows, cols = np.triu_indices(arch.group_size)
    blocks = []
    for g in range(arch.num_groups):
        segment = x[g * arch.block_pack_size : (g + 1) * arch.block_pack_size]
        block = np.zeros((arch.group_size, arch.group_size))
        block[rows, cols] = segment
        block[cols, rows] = segment
        blocks.append(block)
    return AdmittanceMatrix(blocks=tuple(blocks), reference_impedance=reference_impedance)
