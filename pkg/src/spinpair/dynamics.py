"""Pair master equation: generator assembly, steady states, noisy traces.

The equation of motion is
    drho/dt = -i[H0 + V, rho] + D[rho] + noise
with H0 the two dressed atoms, V the excitation-exchange coupling, and
D[rho] containing (i) radiative decay with self rates gamma0/2 per
polarization component and cross rates given by the dissipative coupling
tensor, and (ii) transit relaxation toward the unpolarized ground manifold,
implemented as the linear generator gamma_t*(Tr(rho)*rho_rest - rho) so the
whole Liouvillian stays a linear operator.

States are propagated in an orthonormal Hermitian operator basis (real
coordinates), where Hermiticity is preserved exactly and the per-step cost
is a real 256-vector times matrix product.  The deterministic part uses the
exact exponential propagator at the sampling step; a classic RK4 stepper is
kept for cross-validation.  White noise kicks the ground-state spin
components of each atom once per step (Ito / Euler-Maruyama).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter

from .coupling import Conformation, coupling_tensors, sample_conformation
from .qcore import (
    N_PAIR,
    SimulationParams,
    SingleAtomOps,
    build_single_atom_hamiltonian,
    build_single_atom_ops,
    build_pair_hamiltonian,
    embed_two_atom,
    ground_projector,
    total_sz,
)

# stream labels for counter-based seeding (scheduling independent)
_STREAM_POOL = 1
_STREAM_NOISE = 2
_STREAM_CONF = 3


class DegenerateSteadyStateError(RuntimeError):
    """The Liouvillian null space is not one-dimensional."""


class IntegratorError(RuntimeError):
    """Trace blow-up or non-finite state during integration."""


@dataclass
class TimeTrace:
    """Uniformly sampled <S_z>(t) record plus provenance and health data."""

    dt: float
    samples: np.ndarray
    conformation_log: list
    seed: int
    mode: str
    diagnostics: dict = field(default_factory=dict)


# -- vectorization and the Hermitian operator basis ------------------------

def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim)


def _sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # superoperator of rho -> a rho b for row-major vec
    return np.kron(a, b.T)


def _left(a: np.ndarray) -> np.ndarray:
    return np.kron(a, np.eye(a.shape[0], dtype=complex))


def _right(b: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(b.shape[0], dtype=complex), b.T)


def hermitian_basis(dim: int) -> np.ndarray:
    """Orthonormal (Frobenius) Hermitian basis, shape (dim*dim, dim, dim).

    Ordering: dim diagonal units, then for i<j the symmetric and
    antisymmetric combinations.  Real linear combinations of these span
    exactly the Hermitian matrices.
    """
    out = np.zeros((dim * dim, dim, dim), dtype=complex)
    k = 0
    for i in range(dim):
        out[k, i, i] = 1.0
        k += 1
    s = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            out[k, i, j] = s
            out[k, j, i] = s
            k += 1
            out[k, i, j] = 1j * s
            out[k, j, i] = -1j * s
            k += 1
    return out


class _BasisCache:
    def __init__(self, dim: int):
        self.dim = dim
        self.stack = hermitian_basis(dim)
        # unitary map: vec(rho) = V @ coords for Hermitian rho
        self.V = self.stack.reshape(dim * dim, dim * dim).T.copy()
        self.Vh = self.V.conj().T.copy()
        # Tr(B_k) and observable coordinate helpers
        self.trace_vec = np.array([np.trace(b).real for b in self.stack])

    def coords(self, rho: np.ndarray) -> np.ndarray:
        return (self.Vh @ vec(rho)).real

    def matrix(self, x: np.ndarray) -> np.ndarray:
        return unvec(self.V @ x, self.dim)

    def matrices(self, x: np.ndarray) -> np.ndarray:
        """Batch reconstruction, x of shape (n, dim*dim)."""
        flat = x @ self.V.T
        return flat.reshape(x.shape[0], self.dim, self.dim)

    def observable_coords(self, op: np.ndarray) -> np.ndarray:
        """Coordinates r such that Tr(op @ rho) = r . coords(rho)."""
        return np.array([np.trace(b @ op).real for b in self.stack])

    def real_superop(self, L: np.ndarray) -> np.ndarray:
        m = self.Vh @ L @ self.V
        return m.real.copy()


_basis_16: _BasisCache | None = None


def pair_basis() -> _BasisCache:
    global _basis_16
    if _basis_16 is None:
        _basis_16 = _BasisCache(16)
    return _basis_16


# -- Liouvillian assembly ---------------------------------------------------

def _dissipator_terms(rates: np.ndarray, dps: list, dms: list) -> np.ndarray:
    """sum_ab g_ab * (2 Dm_b rho Dp_a - {Dp_a Dm_b, rho}) as a superoperator."""
    dim = dps[0].shape[0]
    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    for a in range(len(dps)):
        for b in range(len(dms)):
            g = rates[a, b]
            if g == 0.0:
                continue
            p = dps[a] @ dms[b]
            L += g * (2.0 * _sandwich(dms[b], dps[a]) - _left(p) - _right(p))
    return L


def _transit_superop(gamma_t: float, rho_rest: np.ndarray) -> np.ndarray:
    dim = rho_rest.shape[0]
    eye_vec = vec(np.eye(dim, dtype=complex))
    return gamma_t * (np.outer(vec(rho_rest), eye_vec) - np.eye(dim * dim))


def rest_state_pair() -> np.ndarray:
    """Unpolarized ground manifold of the pair (transit reset target)."""
    single = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    return np.kron(single, single)


def thermal_state_pair() -> np.ndarray:
    """Uncorrelated unpolarized start state (same as the reset target)."""
    return rest_state_pair()


def liouvillian(p: SimulationParams, c: Conformation | None = None,
                ops: SingleAtomOps | None = None) -> np.ndarray:
    """Full pair Liouvillian as a 256x256 complex superoperator.

    ``c=None`` means infinite separation: no exchange coupling and no cross
    dissipation, i.e. two independent driven atoms.
    """
    if ops is None:
        ops = build_single_atom_ops()
    tensors = None if c is None else coupling_tensors(c, p.gamma0)
    h = build_pair_hamiltonian(p, tensors, ops)
    L = -1j * (_left(h) - _right(h))

    dpc = ops.d_plus_cartesian()
    dmc = ops.d_minus_cartesian()
    axes = ("x", "y", "z")
    self_rates = 0.5 * p.gamma0 * np.eye(3)
    for atom in (1, 2):
        dps = [embed_two_atom(dpc[a], atom) for a in axes]
        dms = [embed_two_atom(dmc[a], atom) for a in axes]
        L += _dissipator_terms(self_rates, dps, dms)
    if tensors is not None:
        dp1 = [embed_two_atom(dpc[a], 1) for a in axes]
        dm1 = [embed_two_atom(dmc[a], 1) for a in axes]
        dp2 = [embed_two_atom(dpc[a], 2) for a in axes]
        dm2 = [embed_two_atom(dmc[a], 2) for a in axes]
        L += _dissipator_terms(tensors.gamma, dp1, dm2)
        L += _dissipator_terms(tensors.gamma, dp2, dm1)
    L += _transit_superop(p.gamma_t, rest_state_pair())
    return L


def liouvillian_single_atom(p: SimulationParams,
                            ops: SingleAtomOps | None = None) -> np.ndarray:
    """16x16 superoperator for one driven, decaying atom (reference)."""
    if ops is None:
        ops = build_single_atom_ops()
    h = build_single_atom_hamiltonian(p, ops)
    L = -1j * (_left(h) - _right(h))
    dpc = ops.d_plus_cartesian()
    dmc = ops.d_minus_cartesian()
    axes = ("x", "y", "z")
    L += _dissipator_terms(0.5 * p.gamma0 * np.eye(3),
                           [dpc[a] for a in axes], [dmc[a] for a in axes])
    rest = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    L += _transit_superop(p.gamma_t, rest)
    return L


def single_atom_line(p: SimulationParams) -> tuple[float, float]:
    """(hwhm, center) of the one-atom spin-noise line, both rad/s.

    Taken from the Liouvillian eigenvalue of the ground Zeeman coherence
    mode: the eigenvalue closest to +i*larmor among the weakly damped ones.
    """
    L = liouvillian_single_atom(p)
    evals = np.linalg.eigvals(L)
    # the spin-noise line is the least-damped mode oscillating near larmor
    band = evals[(evals.imag > 0.3 * p.larmor) & (evals.imag < 3.0 * p.larmor)]
    if band.size == 0:
        raise RuntimeError("no oscillating mode found near the Larmor band")
    best = band[np.argmax(band.real)]
    return float(-best.real), float(abs(best.imag))


# -- steady state -----------------------------------------------------------

def steady_state(L: np.ndarray, method: str = "nullspace",
                 rho0: np.ndarray | None = None,
                 tol: float = 1e-13) -> np.ndarray:
    """Stationary density matrix of a (linear) Liouvillian.

    ``nullspace`` solves the SVD null vector with the trace fixed to one and
    raises :class:`DegenerateSteadyStateError` when the null space is not
    one-dimensional.  ``propagate`` relaxes ``rho0`` (default: unpolarized
    ground manifold) under exp(L t) with period doubling until
    ||drho/dt|| < tol relative to the fastest rate in L.
    """
    dim = int(round(np.sqrt(L.shape[0])))
    if method == "nullspace":
        _, sv, vh = np.linalg.svd(L)
        if sv[-2] < max(1e-10 * sv[0], 10.0 * sv[-1]):
            raise DegenerateSteadyStateError(
                f"second singular value {sv[-2]:.3e} is not separated "
                f"from the null space (s0={sv[0]:.3e})")
        rho = unvec(vh[-1].conj(), dim)
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        return rho
    if method == "propagate":
        scale = np.max(np.abs(L))
        if rho0 is None:
            rho0 = thermal_state_pair() if dim == N_PAIR else np.diag(
                [0.5, 0.5, 0.0, 0.0]).astype(complex)
        t_step = 10.0 / scale
        E = expm(L * t_step)
        x = vec(rho0.astype(complex))
        best = None
        best_res = np.inf
        stale = 0
        for it in range(400):
            x = E @ x
            rho = unvec(x, dim)
            rho = 0.5 * (rho + rho.conj().T)
            tr = np.trace(rho).real
            rho /= tr
            x = vec(rho)
            res = np.max(np.abs(L @ x))
            if res < best_res:
                best, best_res, stale = rho, res, 0
            else:
                stale += 1
            if res < tol * scale:
                return rho
            if stale > 12:     # rounding floor reached
                break
            if it % 4 == 3:
                E = E @ E
        if best is not None and best_res < 1e-9 * scale:
            return best
        raise IntegratorError(
            f"steady-state propagation stalled at residual {best_res:.3e}")
    raise ValueError(f"unknown method {method!r}")


# -- noise operator ---------------------------------------------------------

def _ground_spin_ops(ops: SingleAtomOps) -> list[np.ndarray]:
    pg = ground_projector()
    return [pg @ s @ pg for s in (ops.sx, ops.sy, ops.sz)]


def noise_basis(ops: SingleAtomOps | None = None) -> np.ndarray:
    """The six Hermitian kick generators, shape (6, 16, 16).

    Per atom: ground-manifold population imbalance (x spin component) and
    the real/imaginary quadratures of the ground Zeeman coherence (y and z
    components), embedded into the pair space and restricted to the
    ground (x) ground block, so no matrix element touches an excited state.
    Order: atom 1 (x, y, z), atom 2 (x, y, z).
    """
    if ops is None:
        ops = build_single_atom_ops()
    gs = _ground_spin_ops(ops)
    pgg = embed_two_atom(ground_projector(), 1) @ embed_two_atom(
        ground_projector(), 2)
    out = [pgg @ embed_two_atom(g, 1) @ pgg for g in gs] \
        + [pgg @ embed_two_atom(g, 2) @ pgg for g in gs]
    return np.array(out)


def noise_increment(rng: np.random.Generator, a_f: float, dt: float,
                    ops: SingleAtomOps | None = None) -> np.ndarray:
    """One Ito noise increment f*sqrt(dt): Hermitian, traceless, zero mean."""
    if a_f <= 0:
        raise ValueError("noise amplitude must be positive")
    basis_ops = noise_basis(ops)
    eta = rng.standard_normal(6)
    f = np.tensordot(eta, basis_ops, axes=(0, 0)) * a_f
    return f * np.sqrt(dt)


# -- trace simulation -------------------------------------------------------

def _trace_seed(master_seed: int, stream: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed,
                                  spawn_key=(stream, index))


def _conformation_pool(p: SimulationParams, master_seed: int, size: int,
                       isotropic: bool = False) -> list[Conformation]:
    rng = np.random.default_rng(_trace_seed(master_seed, _STREAM_POOL, 0))
    return [sample_conformation(p.density, rng, p.k0, isotropic=isotropic)
            for _ in range(size)]


class _SuperopBlocks:
    """Real-basis superoperator pieces; the generator is linear in every
    physical coefficient, so all structure matrices are parameter-free and
    cached at module level (first construction costs a few seconds)."""

    def __init__(self):
        ops = build_single_atom_ops()
        basis = pair_basis()
        self.ops = ops
        self.basis = basis

        def komm(a16):
            return basis.real_superop(-1j * (_left(a16) - _right(a16)))

        sx_tot = embed_two_atom(ops.sx, 1) + embed_two_atom(ops.sx, 2)
        from .qcore import excited_projector
        pe = excited_projector()
        pe_tot = embed_two_atom(pe, 1) + embed_two_atom(pe, 2)
        dpc = ops.d_plus_cartesian()
        dmc = ops.d_minus_cartesian()
        self.K_sx = komm(sx_tot)
        self.K_pe = komm(pe_tot)
        self.K_light = {}
        for pol, key in (("pi", "x"), ("sigma", "y")):
            lop = dpc[key] + dmc[key]
            self.K_light[pol] = komm(embed_two_atom(lop, 1)
                                     + embed_two_atom(lop, 2))

        axes = ("x", "y", "z")
        unit = np.zeros((3, 3))
        self_diss = np.zeros((N_PAIR * N_PAIR,) * 2, dtype=complex)
        for atom in (1, 2):
            dps = [embed_two_atom(dpc[a], atom) for a in axes]
            dms = [embed_two_atom(dmc[a], atom) for a in axes]
            self_diss += _dissipator_terms(np.eye(3), dps, dms)
        self.R_self = basis.real_superop(self_diss)   # scale: gamma0/2
        self.R_transit = basis.real_superop(
            _transit_superop(1.0, rest_state_pair()))

        dp1 = [embed_two_atom(dpc[a], 1) for a in axes]
        dm1 = [embed_two_atom(dmc[a], 1) for a in axes]
        dp2 = [embed_two_atom(dpc[a], 2) for a in axes]
        dm2 = [embed_two_atom(dmc[a], 2) for a in axes]
        self.R_zeta = np.empty((3, 3, 256, 256))
        self.R_gamma = np.empty((3, 3, 256, 256))
        for a in range(3):
            for b in range(3):
                unit[:] = 0.0
                unit[a, b] = 1.0
                v_ab = (np.kron(dpc[axes[a]], dmc[axes[b]])
                        + np.kron(dmc[axes[b]], dpc[axes[a]]))
                self.R_zeta[a, b] = komm(v_ab)
                cross = (_dissipator_terms(unit, dp1, dm2)
                         + _dissipator_terms(unit, dp2, dm1))
                self.R_gamma[a, b] = basis.real_superop(cross)

        self.sz_coords = basis.observable_coords(total_sz(ops))

    def generator(self, p: SimulationParams,
                  c: Conformation | None) -> np.ndarray:
        m = (p.larmor * self.K_sx
             - p.detuning * self.K_pe
             - 0.5 * p.omega_rabi * self.K_light[p.polarization]
             + 0.5 * p.gamma0 * self.R_self
             + p.gamma_t * self.R_transit)
        if c is not None:
            tens = coupling_tensors(c, p.gamma0)
            m = m + np.tensordot(tens.zeta, self.R_zeta, axes=2)
            m = m + np.tensordot(tens.gamma, self.R_gamma, axes=2)
        return m


_blocks: _SuperopBlocks | None = None


def superop_blocks() -> _SuperopBlocks:
    global _blocks
    if _blocks is None:
        _blocks = _SuperopBlocks()
    return _blocks


def _steady_coords(m: np.ndarray, basis: _BasisCache) -> np.ndarray:
    """Fast stationary solve in real coordinates (trace row replacement)."""
    a = m.copy()
    a[0, :] = basis.trace_vec
    rhs = np.zeros(m.shape[0])
    rhs[0] = 1.0
    x = np.linalg.solve(a, rhs)
    res = np.max(np.abs(m @ x))
    if not np.isfinite(res) or res > 1e-6 * max(np.max(np.abs(m)), 1.0):
        raise DegenerateSteadyStateError(
            f"stationary solve residual too large ({res:.3e})")
    return x


class _Propagators:
    """Per-conformation real-basis one-step propagators and steady data."""

    def __init__(self, p: SimulationParams, ops: SingleAtomOps):
        self.p = p
        self.ops = ops
        self.blocks = superop_blocks()
        self.basis = self.blocks.basis
        self._cache: dict[int, tuple[np.ndarray, np.ndarray, float]] = {}

    def build(self, key: int, c: Conformation | None):
        if key in self._cache:
            return self._cache[key]
        M = self.blocks.generator(self.p, c)
        E = expm(M * self.p.dt)
        x_ss = _steady_coords(M, self.basis)
        sz_ss = float(x_ss @ self.blocks.sz_coords)
        self._cache[key] = (E, x_ss, sz_ss)
        return self._cache[key]


def simulate_ensemble(p: SimulationParams, mode: str, n_traces: int,
                      master_seed: int,
                      conformation: Conformation | None = None,
                      pool_size: int = 160,
                      isotropic_angles: bool = False,
                      monitor_every: int = 50,
                      integrator: str = "expm") -> list[TimeTrace]:
    """Simulate a seeded ensemble of noisy <S_z> traces.

    ``static`` keeps one conformation for the whole trace (``conformation``,
    or uncoupled atoms when None); ``dynamic`` redraws the pair geometry
    every tau_c from a seeded pool of ``pool_size`` samples of the
    nearest-neighbor/angle distributions.  Trace k uses noise and geometry
    streams derived from (master_seed, k), so results do not depend on
    batching or thread count.  Returns one TimeTrace per requested trace.
    """
    if mode not in ("static", "dynamic"):
        raise ValueError(f"unknown mode {mode!r}")
    if integrator != "expm":
        raise ValueError("simulate_ensemble only runs the expm integrator; "
                         "use rk4_reference_trace for cross-checks")
    p.validate()
    ops = build_single_atom_ops()
    basis = pair_basis()
    props = _Propagators(p, ops)

    n_steps = int(round(p.t_trace / p.dt))
    if mode == "dynamic":
        seg_len = max(1, int(round(p.tau_c / p.dt)))
        pool = _conformation_pool(p, master_seed, pool_size,
                                  isotropic_angles)
        n_segments = int(np.ceil(n_steps / seg_len))
    else:
        seg_len = min(n_steps, max(monitor_every, 1))
        pool = [conformation]
        n_segments = int(np.ceil(n_steps / seg_len))

    # per-trace streams
    noise_rngs = [np.random.default_rng(_trace_seed(master_seed, _STREAM_NOISE, k))
                  for k in range(n_traces)]
    if mode == "dynamic":
        conf_rngs = [np.random.default_rng(_trace_seed(master_seed, _STREAM_CONF, k))
                     for k in range(n_traces)]
        assign = np.array([r.integers(0, len(pool)) for r in conf_rngs])
    else:
        assign = np.zeros(n_traces, dtype=int)

    sz_coords = basis.observable_coords(total_sz(ops))
    nc = np.array([basis.observable_coords(op) for op in noise_basis(ops)])
    # Tr(B_k N_m) gives d<..>; the state kick adds N_m itself:
    # coords of N_m in the orthonormal basis equal Tr(B_k N_m) (real).
    kick = p.noise_amplitude * np.sqrt(p.dt) * nc

    # initial states at the steady state of each trace's first conformation
    X = np.empty((n_traces, N_PAIR * N_PAIR))
    sz_steady = np.empty(len(pool))
    for k in range(n_traces):
        E, x_ss, sz_ss = props.build(int(assign[k]), pool[int(assign[k])])
        X[k] = x_ss
        sz_steady[int(assign[k])] = sz_ss

    samples = np.empty((n_traces, n_steps))
    logs = [[(0.0, pool[int(assign[k])])] for k in range(n_traces)]
    steady_logs = [[] for _ in range(n_traces)]
    trace_dev = 0.0
    herm_defect = 0.0
    min_eig = np.inf

    tvec = basis.trace_vec
    step = 0
    for seg in range(n_segments):
        seg_steps = min(seg_len, n_steps - step)
        if seg_steps <= 0:
            break
        groups = {}
        for k in range(n_traces):
            groups.setdefault(int(assign[k]), []).append(k)
        group_items = [(props.build(g, pool[g])[0], np.array(idx, dtype=int))
                       for g, idx in sorted(groups.items())]
        for k in range(n_traces):
            steady_logs[k].append((step * p.dt, sz_steady[int(assign[k])]))
        eta = np.stack([r.standard_normal((seg_steps, 6)) for r in noise_rngs])
        for s in range(seg_steps):
            for E, idx in group_items:
                X[idx] = X[idx] @ E.T
            X += eta[:, s, :] @ kick
            tr = X @ tvec
            trace_dev = max(trace_dev, float(np.max(np.abs(tr - 1.0))))
            X /= tr[:, None]
            samples[:, step] = X @ sz_coords
            step += 1
        # health checks at segment boundaries
        rhos = basis.matrices(X)
        herm_defect = max(herm_defect, float(np.max(np.abs(
            rhos - rhos.conj().transpose(0, 2, 1)))))
        ev = np.linalg.eigvalsh(rhos)
        min_eig = min(min_eig, float(ev.min()))
        if not np.all(np.isfinite(X)):
            raise IntegratorError(f"non-finite state at step {step}")
        if trace_dev > 1e-3:
            raise IntegratorError(f"trace blow-up ({trace_dev:.2e}) at step {step}")
        if mode == "dynamic" and step < n_steps:
            assign = np.array([r.integers(0, len(pool)) for r in conf_rngs])
            for k in range(n_traces):
                g = int(assign[k])
                E, x_ss, sz_ss = props.build(g, pool[g])
                sz_steady[g] = sz_ss
                logs[k].append((step * p.dt, pool[g]))

    diag_common = {
        "max_trace_dev": trace_dev,
        "max_herm_defect": herm_defect,
        "min_eigenvalue": min_eig,
        "n_eig_checks": n_segments,
    }
    traces = []
    for k in range(n_traces):
        traces.append(TimeTrace(
            dt=p.dt,
            samples=samples[k].copy(),
            conformation_log=logs[k],
            seed=master_seed,
            mode=mode,
            diagnostics=dict(diag_common,
                             trace_index=k,
                             steady_values=steady_logs[k]),
        ))
    return traces


def simulate_trace(p: SimulationParams, mode: str, seed: int,
                   conformation: Conformation | None = None,
                   **kwargs) -> TimeTrace:
    """Single noisy trace; see :func:`simulate_ensemble`."""
    return simulate_ensemble(p, mode, 1, seed, conformation=conformation,
                             **kwargs)[0]


def rk4_reference_trace(p: SimulationParams, seed: int,
                        conformation: Conformation | None = None,
                        n_steps: int | None = None,
                        substeps: int | None = None) -> TimeTrace:
    """Static-mode integration with RK4 plus Euler-Maruyama noise.

    Slow (explicit stepping must resolve the optical scales); used to
    validate the exponential propagator, not for production runs.
    """
    ops = build_single_atom_ops()
    basis = pair_basis()
    L = liouvillian(p, conformation, ops)
    M = basis.real_superop(L)
    if substeps is None:
        substeps = max(1, int(np.ceil(p.dt * p.max_coherent_scale() / 0.1)))
    h = p.dt / substeps
    if n_steps is None:
        n_steps = int(round(p.t_trace / p.dt))
    rng = np.random.default_rng(_trace_seed(seed, _STREAM_NOISE, 0))
    x = basis.coords(steady_state(L))
    sz_coords = basis.observable_coords(total_sz(ops))
    nc = np.array([basis.observable_coords(op) for op in noise_basis(ops)])
    kick = p.noise_amplitude * np.sqrt(p.dt) * nc
    tvec = basis.trace_vec
    samples = np.empty(n_steps)
    for k in range(n_steps):
        for _ in range(substeps):
            k1 = M @ x
            k2 = M @ (x + 0.5 * h * k1)
            k3 = M @ (x + 0.5 * h * k2)
            k4 = M @ (x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = x + rng.standard_normal(6) @ kick
        x = x / (x @ tvec)
        samples[k] = x @ sz_coords
    log = [(0.0, conformation)] if conformation is not None else []
    return TimeTrace(dt=p.dt, samples=samples, conformation_log=log,
                     seed=seed, mode="static", diagnostics={"integrator": "rk4"})


def ensemble_psd_theory(p: SimulationParams, c: Conformation | None,
                        freqs_hz) -> np.ndarray:
    """Exact one-sided <S_z> PSD of the noise-driven pair at one geometry.

    The sampled process is the linear recursion x -> E x + kick*eta, so its
    spectrum is available in closed form,
        S(f) = 2 dt |sz^T (I - e^{-i w dt} E)^{-1} kick|^2 (summed channels),
    which is the exact expectation of the Welch estimate (up to window
    leakage).  Useful as an oracle for the simulate->PSD pipeline and as a
    fast predictor of static spectra.
    """
    blocks = superop_blocks()
    M = blocks.generator(p, c)
    E = expm(M * p.dt)
    basis = blocks.basis
    nc = np.array([basis.observable_coords(op) for op in noise_basis(blocks.ops)])
    kick = p.noise_amplitude * np.sqrt(p.dt) * nc   # (6, 256)
    sz = blocks.sz_coords
    lam, V = np.linalg.eig(E)
    # sz^T (I - z E)^-1 K^T = sum_k (sz^T V)_k (V^-1 K^T)_k / (1 - z lam_k)
    left = V.T @ sz
    right = np.linalg.solve(V, kick.T)       # (256, 6)
    amp = left[:, None] * right               # (256, 6)
    out = np.empty(len(np.atleast_1d(freqs_hz)))
    for i, f in enumerate(np.atleast_1d(freqs_hz)):
        z = np.exp(-2j * np.pi * f * p.dt)
        g = amp / (1.0 - z * lam[:, None])
        out[i] = 2.0 * p.dt * np.sum(np.abs(g.sum(axis=0)) ** 2)
    return out


# -- damped-precession reference process ------------------------------------

def ou_reference_trace(gamma: float, omega_l: float, amplitude: float,
                       dt: float, duration: float, seed: int,
                       initial: tuple | None = None) -> TimeTrace:
    """Damped spin precession driven by white noise (Euler-Maruyama).

    Integrates S' = R S + sqrt(amplitude) * eta with
    R = [[-gamma, omega_l], [-omega_l, -gamma]] acting on (S_y, S_z) and
    unit white noise, starting from a stationary draw (or ``initial`` =
    (S_y0, S_z0) when given); returns the S_z component.  In complex form
    s = S_y + i S_z the drift is
    -(gamma + i omega_l) s; the naive explicit step is unstable (and badly
    biased) once omega_l^2 dt approaches 2 gamma, so the damping is stepped
    with Euler-Maruyama in the co-rotating envelope u = exp(i omega_l t) s
    (where the white noise law is unchanged) and the exact rotation is
    restored afterwards.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if gamma * dt > 0.05:
        raise ValueError("dt too coarse: gamma*dt must stay below 0.05")
    n = int(round(duration / dt))
    rng = np.random.default_rng(seed)
    if initial is None:
        sigma0 = np.sqrt(amplitude / (2.0 * gamma))
        u0 = complex(*(sigma0 * rng.standard_normal(2)))
    else:
        u0 = complex(initial[0], initial[1])
    w = rng.standard_normal((n, 2))
    drive = np.sqrt(amplitude * dt) * (w[:, 0] + 1j * w[:, 1])
    a = 1.0 - gamma * dt
    u, _ = lfilter([1.0], [1.0, -a], drive, zi=np.array([a * u0]))
    phase = np.exp(-1j * omega_l * dt * np.arange(1, n + 1))
    samples = (u * phase).imag.copy()
    return TimeTrace(dt=dt, samples=samples, conformation_log=[],
                     seed=seed, mode="ou_reference",
                     diagnostics={"gamma": gamma, "omega_l": omega_l,
                                  "amplitude": amplitude})
