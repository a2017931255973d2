"""Truncated joint Hilbert space of a two- or three-level emitter and one cavity mode.

Basis ordering is emitter (x) cavity with the emitter index major; emitter
levels are 0 = crystal ground state, 1 = exciton, and optionally
2 = higher-lying filling state.  All operators are dense complex matrices:
the spaces used here never exceed a few tens of dimensions, so sparsity
would only add noise.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemSpace",
    "Operators",
    "DensityMatrix",
    "PureState",
    "build_system_operators",
    "tensor_product",
    "expectation",
]

GROUND = 0
EXCITON = 1
FILLING = 2

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIGENVALUE_TOL = 1e-8
NORM_TOL = 1e-10


class DimensionError(ValueError):
    """Operator/state dimensions do not match."""


@dataclass(frozen=True)
class SystemSpace:
    """Joint space of an ``emitter_levels``-level emitter and a cavity mode
    truncated at ``fock_cutoff`` photons."""

    emitter_levels: int = 2
    fock_cutoff: int = 2

    def __post_init__(self):
        if self.emitter_levels not in (2, 3):
            raise ValueError(f"emitter_levels must be 2 or 3, got {self.emitter_levels}")
        if self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be >= 1, got {self.fock_cutoff}")

    @property
    def cavity_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def total_dim(self) -> int:
        return self.emitter_levels * self.cavity_dim

    def index(self, level: int, photons: int) -> int:
        """Flat basis index of |level, photons>."""
        if not 0 <= level < self.emitter_levels:
            raise ValueError(f"emitter level {level} outside 0..{self.emitter_levels - 1}")
        if not 0 <= photons <= self.fock_cutoff:
            raise ValueError(f"photon number {photons} outside 0..{self.fock_cutoff}")
        return level * self.cavity_dim + photons


@dataclass(frozen=True)
class Operators:
    """The canonical operator set on a :class:`SystemSpace`.

    ``sigma_minus``/``sigma_plus`` act between the ground and exciton
    levels, ``lower_fx`` (three-level spaces only) between the filling
    state and the exciton.  Generators carry units of rad/ps once scaled
    by rates.
    """

    space: SystemSpace
    identity: np.ndarray
    sigma_z: np.ndarray
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    a: np.ndarray
    a_dag: np.ndarray
    number: np.ndarray
    excited_projector: np.ndarray
    ground_projector: np.ndarray
    filling_projector: np.ndarray | None = None
    lower_fx: np.ndarray | None = None

    def populations(self, state) -> dict[str, float]:
        """Emitter-level populations plus the mean cavity photon number."""
        pops = {
            "ground": expectation(self.ground_projector, state).real,
            "exciton": expectation(self.excited_projector, state).real,
            "cavity": expectation(self.number, state).real,
        }
        if self.filling_projector is not None:
            pops["filling"] = expectation(self.filling_projector, state).real
        return pops


def _emitter_matrix(space: SystemSpace, rows, cols, vals) -> np.ndarray:
    m = np.zeros((space.emitter_levels, space.emitter_levels), dtype=complex)
    for r, c, v in zip(rows, cols, vals):
        m[r, c] = v
    return m


def build_system_operators(space: SystemSpace) -> Operators:
    """Construct the operator set {sigma_z, sigma-, sigma+, a, a+, ...} on ``space``.

    On the truncated cavity ladder, [a, a+] = 1 everywhere except the
    highest Fock block, and sigma+ sigma- projects onto the exciton level.
    """
    ne = space.emitter_levels
    nc = space.cavity_dim
    ie = np.eye(ne, dtype=complex)
    ic = np.eye(nc, dtype=complex)

    a_c = np.diag(np.sqrt(np.arange(1, nc, dtype=float)), 1).astype(complex)
    sm_e = _emitter_matrix(space, [GROUND], [EXCITON], [1.0])
    sz_e = _emitter_matrix(space, [GROUND, EXCITON], [GROUND, EXCITON], [-1.0, 1.0])

    sigma_minus = np.kron(sm_e, ic)
    a = np.kron(ie, a_c)
    ops = dict(
        space=space,
        identity=np.kron(ie, ic),
        sigma_z=np.kron(sz_e, ic),
        sigma_minus=sigma_minus,
        sigma_plus=sigma_minus.conj().T,
        a=a,
        a_dag=a.conj().T,
    )
    ops["number"] = ops["a_dag"] @ ops["a"]
    ops["excited_projector"] = ops["sigma_plus"] @ ops["sigma_minus"]
    proj_g = _emitter_matrix(space, [GROUND], [GROUND], [1.0])
    ops["ground_projector"] = np.kron(proj_g, ic)
    if ne == 3:
        proj_f = _emitter_matrix(space, [FILLING], [FILLING], [1.0])
        low_fx = _emitter_matrix(space, [EXCITON], [FILLING], [1.0])
        ops["filling_projector"] = np.kron(proj_f, ic)
        ops["lower_fx"] = np.kron(low_fx, ic)
    return Operators(**ops)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two operator matrices."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


@dataclass
class PureState:
    """State vector on a :class:`SystemSpace`; normalized on construction."""

    amplitudes: np.ndarray
    space: SystemSpace

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.space.total_dim,):
            raise DimensionError(
                f"state length {self.amplitudes.shape} does not match dim {self.space.total_dim}"
            )

    @classmethod
    def basis(cls, space: SystemSpace, level: int, photons: int = 0) -> "PureState":
        amp = np.zeros(space.total_dim, dtype=complex)
        amp[space.index(level, photons)] = 1.0
        return cls(amp, space)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        return PureState(self.amplitudes / self.norm, self.space)

    def validate(self, tol: float = NORM_TOL) -> None:
        if abs(self.norm - 1.0) > tol:
            raise ValueError(f"state norm {self.norm} deviates from 1 beyond {tol}")

    def to_density(self) -> "DensityMatrix":
        amp = self.amplitudes / self.norm
        return DensityMatrix(np.outer(amp, amp.conj()), self.space)


@dataclass
class DensityMatrix:
    """Density operator on a :class:`SystemSpace`."""

    entries: np.ndarray
    space: SystemSpace

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        d = self.space.total_dim
        if self.entries.shape != (d, d):
            raise DimensionError(
                f"density matrix shape {self.entries.shape} does not match dim {d}"
            )

    @classmethod
    def ground_state(cls, space: SystemSpace) -> "DensityMatrix":
        return PureState.basis(space, GROUND, 0).to_density()

    @classmethod
    def pure(cls, space: SystemSpace, level: int, photons: int = 0) -> "DensityMatrix":
        return PureState.basis(space, level, photons).to_density()

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def validate(
        self,
        hermiticity_tol: float = HERMITICITY_TOL,
        trace_tol: float = TRACE_TOL,
        eigenvalue_tol: float = EIGENVALUE_TOL,
    ) -> None:
        """Check Hermiticity, unit trace and positivity within tolerances."""
        herm = np.max(np.abs(self.entries - self.entries.conj().T))
        if herm > hermiticity_tol:
            raise ValueError(f"Hermiticity violation {herm:.3e} > {hermiticity_tol}")
        if abs(self.trace - 1.0) > trace_tol:
            raise ValueError(f"trace deviates from 1 by {abs(self.trace - 1.0):.3e}")
        lowest = float(np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T)).min())
        if lowest < -eigenvalue_tol:
            raise ValueError(f"negative eigenvalue {lowest:.3e} beyond -{eigenvalue_tol}")


def expectation(op: np.ndarray, state) -> complex:
    """Tr(op rho) for a density matrix or <psi|op|psi> for a pure state."""
    op = np.asarray(op, dtype=complex)
    if isinstance(state, PureState):
        vec = state.amplitudes
        if op.shape[1] != vec.shape[0]:
            raise DimensionError(f"operator {op.shape} incompatible with state {vec.shape}")
        return complex(vec.conj() @ (op @ vec))
    entries = state.entries if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)
    if op.shape[1] != entries.shape[0]:
        raise DimensionError(f"operator {op.shape} incompatible with state {entries.shape}")
    return complex(np.trace(op @ entries))
