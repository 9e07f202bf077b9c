"""Single-atom and two-atom operator construction.

Each atom is a four-level system {|g,-1/2>, |g,+1/2>, |e,-1/2>, |e,+1/2>}
quantized along x (the magnetic-field axis).  The optical transition is
J=1/2 -> J'=1/2; dipole matrix elements carry the corresponding
Clebsch-Gordan factors (pi branch: amplitude 1/sqrt(3), sigma branch:
sqrt(2/3)) with the reduced element d0 = 1.  All energies are angular
frequencies (hbar = 1) and the light-matter problem is posed in the frame
rotating at the laser frequency, with the excited manifold shifted by
-detuning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

TWOPI = 2.0 * np.pi

# basis ordering used everywhere in this package
BASIS_LABELS = ("g,-1/2", "g,+1/2", "e,-1/2", "e,+1/2")

N_SINGLE = 4
N_PAIR = N_SINGLE * N_SINGLE

Polarization = Literal["sigma", "pi"]


@dataclass(frozen=True)
class SingleAtomOps:
    """Spin and dipole operators of one atom in the x-quantized basis.

    ``d_plus``/``d_minus`` are keyed by polarization component
    ("x", "sigma+", "sigma-"); the Cartesian combinations are exposed via
    :meth:`d_plus_cartesian` / :meth:`d_minus_cartesian`.
    """

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    d_plus: dict
    d_minus: dict
    d0: float = 1.0
    labels: tuple = BASIS_LABELS
    includes_cg: bool = True

    def d_plus_cartesian(self) -> dict:
        dp = self.d_plus
        return {
            "x": dp["x"],
            "y": (dp["sigma+"] + dp["sigma-"]) / np.sqrt(2.0),
            "z": (dp["sigma+"] - dp["sigma-"]) / (np.sqrt(2.0) * 1j),
        }

    def d_minus_cartesian(self) -> dict:
        dm = self.d_minus
        return {
            "x": dm["x"],
            "y": (dm["sigma+"] + dm["sigma-"]) / np.sqrt(2.0),
            "z": (dm["sigma+"] - dm["sigma-"]) / (np.sqrt(2.0) * 1j),
        }


def _spin_half_block() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # 2x2 spin components in the basis (|-1/2>_x, |+1/2>_x); the ladder
    # operators along the quantization axis are s+/- = sy -/+ ... built so
    # that [sx, sy] = i sz cyclically.
    sx = np.array([[-0.5, 0.0], [0.0, 0.5]], dtype=complex)
    sy = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
    sz = np.array([[0.0, 0.5j], [-0.5j, 0.0]], dtype=complex)
    return sx, sy, sz


def build_single_atom_ops(include_cg: bool = True) -> SingleAtomOps:
    """Construct the 4x4 spin and dipole operators of one atom.

    With ``include_cg=False`` the dipole amplitudes are normalized to unit
    magnitude (signs kept); this variant reproduces the bare exchange
    structure without the J=1/2 -> J'=1/2 branching weights.
    """
    bx, by, bz = _spin_half_block()
    zero = np.zeros((2, 2), dtype=complex)
    sx = np.block([[bx, zero], [zero, bx]])
    sy = np.block([[by, zero], [zero, by]])
    sz = np.block([[bz, zero], [zero, bz]])

    pi_amp = 1.0 / np.sqrt(3.0)
    sig_amp = np.sqrt(2.0 / 3.0)
    if not include_cg:
        pi_amp = 1.0
        sig_amp = 1.0

    dp_x = np.zeros((4, 4), dtype=complex)
    dp_x[2, 0] = -pi_amp   # |e,-1/2><g,-1/2|
    dp_x[3, 1] = +pi_amp   # |e,+1/2><g,+1/2|

    dp_sp = np.zeros((4, 4), dtype=complex)
    dp_sp[3, 0] = -sig_amp  # |e,+1/2><g,-1/2|

    dp_sm = np.zeros((4, 4), dtype=complex)
    dp_sm[2, 1] = -sig_amp  # |e,-1/2><g,+1/2|

    d_plus = {"x": dp_x, "sigma+": dp_sp, "sigma-": dp_sm}
    # de-excitation components pair with the conjugate circular polarization
    d_minus = {
        "x": dp_x.conj().T,
        "sigma+": dp_sm.conj().T,
        "sigma-": dp_sp.conj().T,
    }
    return SingleAtomOps(sx=sx, sy=sy, sz=sz, d_plus=d_plus, d_minus=d_minus,
                         includes_cg=include_cg)


def excited_projector() -> np.ndarray:
    p = np.zeros((4, 4), dtype=complex)
    p[2, 2] = 1.0
    p[3, 3] = 1.0
    return p


def ground_projector() -> np.ndarray:
    return np.eye(4, dtype=complex) - excited_projector()


@dataclass
class SimulationParams:
    """Physical and numerical parameters.

    All rates/frequencies are angular (rad/s); the CLI boundary converts
    from plain Hz.  ``noise_amplitude`` scales the white forcing of the
    ground-state spin components (units 1/sqrt(s)); the absolute spectral
    power is arbitrary.  ``dt`` is the trace sampling step; the exact
    exponential propagator is used between samples, so ``dt`` only needs to
    resolve the signal band, not the optical scales.
    """

    omega_rabi: float
    detuning: float
    larmor: float
    gamma0: float
    gamma_t: float
    polarization: Polarization = "sigma"
    noise_amplitude: float = 2.8
    dt: float = 2e-9
    t_trace: float = 50e-6
    tau_c: float = 100e-9
    density: float = 1e12            # atoms per cm^3
    k0: float = TWOPI / 780e-9       # rad/m

    def __post_init__(self):
        self.validate()

    def validate(self, integrator: str = "expm") -> None:
        for name in ("omega_rabi", "larmor", "gamma0", "gamma_t"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.polarization not in ("sigma", "pi"):
            raise ValueError(f"unknown polarization {self.polarization!r}")
        if self.dt <= 0 or self.t_trace <= 0:
            raise ValueError("dt and t_trace must be positive")
        if self.tau_c <= self.dt:
            raise ValueError("tau_c must exceed the sampling step dt")
        if self.density <= 0 or self.k0 <= 0:
            raise ValueError("density and k0 must be positive")
        if integrator == "rk4":
            # explicit steppers must resolve the fastest coherent scale
            fastest = max(self.omega_rabi, abs(self.detuning),
                          self.larmor, self.gamma0)
            if self.dt * fastest > 0.1:
                raise ValueError(
                    "dt too large for rk4: dt*max(Omega,|Delta|,omega_L,"
                    f"Gamma0) = {self.dt * fastest:.3g} > 0.1")

    @property
    def gamma_coh(self) -> float:
        """Optical coherence decay rate (half the population rate)."""
        return 0.5 * self.gamma0

    def max_coherent_scale(self) -> float:
        return max(self.omega_rabi, abs(self.detuning), self.larmor,
                   self.gamma0)


# Clebsch-Gordan magnitude of every linear dipole component (x, y or z);
# the per-transition coupling element is therefore (omega_rabi/2)/sqrt(3).
LINEAR_CG = 1.0 / np.sqrt(3.0)


def effective_rabi(omega_rabi: float) -> float:
    """Per-transition Rabi frequency omega_rabi * CG for linear light."""
    return omega_rabi * LINEAR_CG


def build_single_atom_hamiltonian(p: SimulationParams,
                                  ops: SingleAtomOps | None = None) -> np.ndarray:
    """4x4 rotating-frame Hamiltonian: Zeeman + light coupling.

    H = larmor * s_x - detuning * P_e - (omega_rabi/2) (D+ + D-) where the
    dipole component matches the linear polarization (x for pi, y for
    sigma) and keeps its Clebsch-Gordan factors: omega_rabi is the bare
    (reduced-dipole) Rabi frequency, and each allowed transition is driven
    with amplitude omega_rabi/(2 sqrt(3)).
    """
    if ops is None:
        ops = build_single_atom_ops()
    dpc = ops.d_plus_cartesian()
    dmc = ops.d_minus_cartesian()
    key = "x" if p.polarization == "pi" else "y"
    dp, dm = dpc[key], dmc[key]
    h = p.larmor * ops.sx - p.detuning * excited_projector()
    h = h - (p.omega_rabi / 2.0) * (dp + dm)
    return h


def embed_two_atom(op: np.ndarray, which: int) -> np.ndarray:
    """Embed a 4x4 single-atom operator into the 16-dim pair space."""
    if op.shape != (N_SINGLE, N_SINGLE):
        raise ValueError(f"expected a 4x4 operator, got {op.shape}")
    eye = np.eye(N_SINGLE, dtype=complex)
    if which == 1:
        return np.kron(op, eye)
    if which == 2:
        return np.kron(eye, op)
    raise ValueError(f"which must be 1 or 2, got {which}")


def total_sz(ops: SingleAtomOps | None = None) -> np.ndarray:
    if ops is None:
        ops = build_single_atom_ops()
    return embed_two_atom(ops.sz, 1) + embed_two_atom(ops.sz, 2)


def total_sx(ops: SingleAtomOps | None = None) -> np.ndarray:
    if ops is None:
        ops = build_single_atom_ops()
    return embed_two_atom(ops.sx, 1) + embed_two_atom(ops.sx, 2)


def build_vdd(tensors, ops: SingleAtomOps | None = None) -> np.ndarray:
    """Excitation-exchange coupling between the two atoms.

    Assembled in the Cartesian polarization basis,
    V = sum_ab zeta_ab (D+^a x D-^b + D-^b x D+^a), with the coherent
    coupling tensor ``tensors.zeta`` in the lab frame.  The operator only
    connects states within the singly-excited sector.
    """
    if ops is None:
        ops = build_single_atom_ops()
    zeta = np.asarray(tensors.zeta, dtype=float)
    dpc = ops.d_plus_cartesian()
    dmc = ops.d_minus_cartesian()
    axes = ("x", "y", "z")
    v = np.zeros((N_PAIR, N_PAIR), dtype=complex)
    for a in range(3):
        for b in range(3):
            z = zeta[a, b]
            if z == 0.0:
                continue
            dp_a = dpc[axes[a]]
            dm_b = dmc[axes[b]]
            v += z * (np.kron(dp_a, dm_b) + np.kron(dm_b, dp_a))
    return v


def build_pair_hamiltonian(p: SimulationParams, tensors=None,
                           ops: SingleAtomOps | None = None) -> np.ndarray:
    """16x16 Hamiltonian of the pair: two dressed atoms plus exchange."""
    if ops is None:
        ops = build_single_atom_ops()
    h1 = build_single_atom_hamiltonian(p, ops)
    h = embed_two_atom(h1, 1) + embed_two_atom(h1, 2)
    if tensors is not None:
        h = h + build_vdd(tensors, ops)
    return h
