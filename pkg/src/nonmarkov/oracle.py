"""Brute-force verification suites.

Random-state identity checks for the information-measure layer, truncated
Fock-space checks for the special functions, and the dense cross-check of
the branch Gram method.  Every suite is deterministic per seed; violations
are reported, not thrown.  Entries whose name ends in ``_recorded`` are
informational (tolerance = inf): they log margins for bounds that are not
theorems for the implemented (Petz) recovery map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import dephasing, info, measures
from .states import (
    DensityMatrix,
    SystemPartition,
    apply_channel,
    basis_state,
    haar_random_unitary,
    partial_trace,
    pure_state,
    random_channel,
    random_density_matrix,
    tensor,
)

IDENTITY_TOL = 1e-8
DENSE_TOL = 1e-7


@dataclass(frozen=True)
class CheckResult:
    name: str
    samples: int
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": int(self.samples),
            "max_violation": float(self.max_violation),
            "tolerance": float(self.tolerance),
            "passed": self.passed,
        }


@dataclass(frozen=True)
class SuiteReport:
    checks: tuple[CheckResult, ...]
    seed: int

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "all_passed": self.all_passed,
            "checks": [c.to_dict() for c in self.checks],
        }

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"[{status}] {c.name}: max violation {c.max_violation:.3e} "
                f"(tol {c.tolerance:.0e}, {c.samples} samples)"
            )
        return "\n".join(lines)


def _rng_for(seed: int, sample: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(sample,)))


def _qubit_split(rng: np.random.Generator, n_parts: int, total_range=(3, 5)) -> list[int]:
    """Random dims, one qubit or more per part, total qubits in range."""
    total = int(rng.integers(total_range[0], total_range[1] + 1))
    extra = total - n_parts
    counts = [1] * n_parts
    for _ in range(extra):
        counts[int(rng.integers(0, n_parts))] += 1
    return [2**c for c in counts]


def _rand_state(rng: np.random.Generator, part: SystemPartition) -> DensityMatrix:
    return random_density_matrix(part, part.total_dim, int(rng.integers(0, 2**31)))


def _u_on(part: SystemPartition, labels: set[str], seed: int) -> np.ndarray:
    """Embed a Haar unitary acting on `labels` into the full space."""
    dims = part.dims
    pos = part.positions(labels)
    d_sub = int(np.prod([dims[i] for i in pos]))
    u = haar_random_unitary(d_sub, seed)
    n = len(dims)
    t = u.reshape([dims[i] for i in pos] * 2)
    operands = [t, [*pos, *[i + n for i in pos]]]
    for i in range(n):
        if i not in pos:
            operands += [np.eye(dims[i]), [i, i + n]]
    out = list(range(n)) + [i + n for i in range(n)]
    full = np.einsum(*operands, out)
    d = int(np.prod(dims))
    return full.reshape(d, d)


def _conj(rho: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    return DensityMatrix(u @ rho.data @ u.conj().T, rho.partition)


def _check_conservation(rng, negative: bool = False) -> float:
    """(a) I(A:SE) conserved under U_SE (x) 1_A; negative control rotates A too."""
    da, ds, de = _qubit_split(rng, 3)
    part = SystemPartition([("A", da), ("S", ds), ("E", de)])
    rho = _rand_state(rng, part)
    labels = {"A", "S", "E"} if negative else {"S", "E"}
    u = _u_on(part, labels, int(rng.integers(0, 2**31)))
    before = info.mutual_information(rho, {"A"}, {"S", "E"})
    after = info.mutual_information(_conj(rho, u), {"A"}, {"S", "E"})
    return abs(after - before)


def _four_party(rng) -> tuple[SystemPartition, DensityMatrix]:
    da, ds, de1, de2 = _qubit_split(rng, 4, total_range=(4, 5))
    part = SystemPartition([("A", da), ("S", ds), ("E1", de1), ("E2", de2)])
    return part, _rand_state(rng, part)


def _cmi_sub(rho: DensityMatrix, env: set[str]) -> float:
    reduced = partial_trace(rho, {"A", "S"} | env)
    return info.conditional_mutual_information(reduced, {"A"}, env, {"S"})


def _check_sub_env(rng) -> float:
    """(b) delta I(A:E1E2|S) = delta I(A:E1|S) under U on S+E1."""
    part, rho = _four_party(rng)
    u = _u_on(part, {"S", "E1"}, int(rng.integers(0, 2**31)))
    rho2 = _conj(rho, u)
    d_full = _cmi_sub(rho2, {"E1", "E2"}) - _cmi_sub(rho, {"E1", "E2"})
    d_e1 = _cmi_sub(rho2, {"E1"}) - _cmi_sub(rho, {"E1"})
    return abs(d_full - d_e1)


def _check_chain_rule(rng) -> float:
    """(c) I(E1E2:A|S) = I(E1:A|S) + I(E2:A|SE1)."""
    _, rho = _four_party(rng)
    lhs = info.conditional_mutual_information(rho, {"E1", "E2"}, {"A"}, {"S"})
    t1 = _cmi_sub(rho, {"E1"})
    t2 = info.conditional_mutual_information(rho, {"E2"}, {"A"}, {"S", "E1"})
    return abs(lhs - (t1 + t2))


def _check_interaction_decomposition(rng) -> float:
    """(d) I(A:E1E2|S) = I(A:E1|S) + I(A:E2|S) - I(E1;E2;A|S)."""
    _, rho = _four_party(rng)
    lhs = _cmi_sub(rho, {"E1", "E2"})
    rhs = (
        _cmi_sub(rho, {"E1"})
        + _cmi_sub(rho, {"E2"})
        - info.interaction_information(rho, {"E1"}, {"E2"}, {"A"}, {"S"})
    )
    return abs(lhs - rhs)


def _check_broadcast(rng) -> float:
    """(e) broadcast copying gives every sub-environment the same leaked information.

    The premise requires states classical on E1 in the copy basis, so the
    sample is rho_AS^(e) mixed over projectors on E1 before CNOT-copying into
    |0>-initialized fresh sub-environments.
    """
    da, ds = _qubit_split(rng, 2, total_range=(2, 3))
    de = 2
    part_as = SystemPartition([("A", da), ("S", ds)])
    probs = rng.dirichlet(np.ones(de))
    blocks = [
        _rand_state(rng, part_as).data * p for p in probs
    ]
    part = SystemPartition([("A", da), ("S", ds), ("E1", de)])
    data = np.zeros((da * ds * de,) * 2, dtype=complex)
    for e, blk in enumerate(blocks):
        proj = np.zeros((de, de))
        proj[e, e] = 1.0
        data += np.kron(blk, proj)
    rho = DensityMatrix(data, part)
    base = _cmi_sub(rho, {"E1"})
    # attach two fresh |0> sub-environments and copy E1's basis into them
    fresh = SystemPartition([("E2", de), ("E3", de)])
    sigma = tensor(rho, basis_state(fresh, [0, 0]))
    cnot = np.zeros((de**3, de**3))
    for e in range(de):
        for j in range(de):
            for k in range(de):
                cnot[(e * de + ((j + e) % de)) * de + ((k + e) % de), (e * de + j) * de + k] = 1.0
    full = np.kron(np.eye(da * ds), cnot)
    sigma = DensityMatrix(full @ sigma.data @ full.conj().T, sigma.partition)
    worst = 0.0
    for env in ({"E1"}, {"E2"}, {"E3"}, {"E1", "E2", "E3"}):
        reduced = partial_trace(sigma, {"A", "S"} | env)
        val = info.conditional_mutual_information(reduced, {"A"}, env, {"S"})
        worst = max(worst, abs(val - base))
    return worst


def _check_initial_markovianity(rng) -> float:
    """(f) I(A:E|S)=0 initially implies I >= 0 after a short U_SE step."""
    da, ds, de = _qubit_split(rng, 3)
    part_as = SystemPartition([("A", da), ("S", ds)])
    part_e = SystemPartition([("E", de)])
    rho0 = tensor(_rand_state(rng, part_as), _rand_state(rng, part_e))
    start = info.conditional_mutual_information(rho0, {"A"}, {"E"}, {"S"})
    h = rng.standard_normal((ds * de, ds * de)) + 1j * rng.standard_normal((ds * de, ds * de))
    h = 0.5 * (h + h.conj().T)
    u_small = expm(-1j * 0.05 * h)
    t = u_small.reshape([ds, de, ds, de])
    operands = [t, [1, 2, 4, 5], np.eye(da), [0, 3]]
    full = np.einsum(*operands, [0, 1, 2, 3, 4, 5]).reshape(da * ds * de, da * ds * de)
    after = info.conditional_mutual_information(_conj(rho0, full), {"A"}, {"E"}, {"S"})
    return max(start, -after, 0.0)


def _check_pair_state_identity(rng) -> float:
    """(g) S(rho_SA^op || rho_S (x) rho_A) = ln2 * D_tele(rho1, rho2)."""
    ds = int(rng.integers(2, 5))
    part_s = SystemPartition([("S", ds)])
    rho1 = _rand_state(rng, part_s)
    rho2 = _rand_state(rng, part_s)
    op = measures.optimal_pair_state(rho1, rho2)
    prod = tensor(partial_trace(op, {"S"}), partial_trace(op, {"A"}))
    lhs = info.relative_entropy(op, prod)
    rhs = math.log(2.0) * info.jensen_shannon_telescopic(rho1, rho2)
    return abs(lhs - rhs)


def _check_telescopic_dpi(rng) -> float:
    """(h) S_a is non-increasing under CPTP maps."""
    d = int(rng.integers(2, 5))
    part = SystemPartition([("S", d)])
    rho = _rand_state(rng, part)
    sigma = _rand_state(rng, part)
    a = float(rng.uniform(0.1, 0.9))
    ch = random_channel(d, int(rng.integers(2, 4)), int(rng.integers(0, 2**31)))
    before = info.telescopic_relative_entropy(rho, sigma, a)
    after = info.telescopic_relative_entropy(
        apply_channel(rho, ch, "S"), apply_channel(sigma, ch, "S"), a
    )
    return max(after - before, 0.0)


def _petz_three_qubit(rng) -> tuple[float, float, float]:
    """RACMI margin (asserted) and the recovery-bound margins (recorded)."""
    part = SystemPartition([("A", 2), ("B", 2), ("C", 2)])
    rho = _rand_state(rng, part)
    sigma = info.petz_recovery(rho, {"A"}, {"B"}, {"C"})
    cmi = info.conditional_mutual_information(rho, {"A"}, {"C"}, {"B"})
    d = info.trace_distance(rho, sigma)
    racmi_violation = max(cmi - 7.0 * math.log2(2) * math.sqrt(d), 0.0)
    # D^2 <= ln2 * I(A:C|B) holds for an optimal recovery map; record the Petz
    # margins under both distance normalizations.
    half_norm = d * d - math.log(2.0) * cmi
    full_norm = (2 * d) ** 2 - math.log(2.0) * cmi
    return racmi_violation, half_norm, full_norm


def identity_suite(seed: int, samples: int) -> SuiteReport:
    """Run checks (a)-(h) plus the negative control on random instances."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    names = [
        ("a_conservation_I_A_SE", _check_conservation),
        ("b_sub_environment", _check_sub_env),
        ("c_chain_rule", _check_chain_rule),
        ("d_interaction_decomposition", _check_interaction_decomposition),
        ("e_broadcast_redundancy", _check_broadcast),
        ("f_initial_markovianity", _check_initial_markovianity),
        ("g_pair_state_identity", _check_pair_state_identity),
        ("h_telescopic_dpi", _check_telescopic_dpi),
    ]
    worst = {name: 0.0 for name, _ in names}
    neg_min = math.inf
    racmi_worst = 0.0
    dsq_half = -math.inf
    dsq_full = -math.inf
    for i in range(samples):
        rng = _rng_for(seed, i)
        for name, fn in names:
            worst[name] = max(worst[name], float(fn(rng)))
        neg_min = min(neg_min, _check_conservation(_rng_for(seed, i), negative=True))
        r, h, f = _petz_three_qubit(_rng_for(seed + 1, i))
        racmi_worst = max(racmi_worst, r)
        dsq_half = max(dsq_half, h)
        dsq_full = max(dsq_full, f)
    checks = [
        CheckResult(name, samples, worst[name], IDENTITY_TOL) for name, _ in names
    ]
    # sensitivity: the deliberately broken precondition must be detected
    checks.append(
        CheckResult("negative_control_detected", samples, 0.0 if neg_min > 1e-6 else math.inf, IDENTITY_TOL)
    )
    checks.append(CheckResult("petz_racmi_bound", samples, racmi_worst, IDENTITY_TOL))
    checks.append(CheckResult("petz_dsq_half_norm_recorded", samples, dsq_half, math.inf))
    checks.append(CheckResult("petz_dsq_full_norm_recorded", samples, dsq_full, math.inf))
    return SuiteReport(tuple(checks), seed)


# ---------------------------------------------------------------------------
# special functions


def special_function_suite(seed: int = 0) -> SuiteReport:
    """Truncated-Fock checks of the displaced-number overlap and both pair factors."""
    rng = np.random.default_rng(seed)
    n_dim = 61
    b = np.diag(np.sqrt(np.arange(1.0, n_dim)), k=1)

    def disp(gamma: complex) -> np.ndarray:
        return expm(gamma * b.conj().T - np.conj(gamma) * b)

    # (a) <n| e^{-i x p} |n> vs exp(-x^2/4) L_n(x^2/2); e^{-ixp} = D(x/sqrt2)
    worst_a = 0.0
    xs = np.concatenate([np.linspace(-2, 2, 9), rng.uniform(-2, 2, 4)])
    for x in xs:
        d = disp(x / math.sqrt(2.0))
        for n in range(11):
            worst_a = max(worst_a, abs(d[n, n].real - dephasing.displaced_fock_overlap(n, x)))

    # (b) classical factor vs the Laguerre sum at r = 0.8
    r = 0.8
    u = math.tanh(r)
    n_sum = 200
    nn = np.arange(n_sum + 1)
    probs = (1 - u * u) * u ** (2 * nn)
    worst_b = 0.0

    def lag_all(z: float) -> np.ndarray:
        out = np.empty(n_sum + 1)
        out[0] = 1.0
        if n_sum >= 1:
            out[1] = 1.0 - z
        for k in range(1, n_sum):
            out[k + 1] = ((2 * k + 1 - z) * out[k] - k * out[k - 1]) / (k + 1)
        return out

    for x1, x2 in [(0.5, 0.5), (1.2, 0.3), (0.0, 0.9), (1.5, 1.5), (2.0, 0.7)]:
        ref = float(
            (probs * np.exp(-(x1 * x1 + x2 * x2) / 4.0) * lag_all(x1 * x1 / 2) * lag_all(x2 * x2 / 2)).sum()
        )
        g1, g2 = x1 / math.sqrt(2.0), x2 / math.sqrt(2.0)
        val = math.exp(dephasing.classical_char_factor(g1, g2, r))
        worst_b = max(worst_b, abs(val - ref))

    # (c) entangled factor vs the truncated TMSV expectation at r = 0.8
    n_t = 41
    bt = np.diag(np.sqrt(np.arange(1.0, n_t)), k=1)

    def disp_t(gamma: complex) -> np.ndarray:
        return expm(gamma * bt.conj().T - np.conj(gamma) * bt)

    v = u ** np.arange(n_t)
    v = v / np.linalg.norm(v)
    vec = np.zeros(n_t * n_t, dtype=complex)
    vec[np.arange(n_t) * n_t + np.arange(n_t)] = v
    worst_c = 0.0
    pts = [(0.3, 0.3), (0.3 + 0.2j, -0.1 + 0.4j), (0.5j, 0.5j), (0.8, -0.4 + 0.1j)]
    rnd = rng.uniform(-0.6, 0.6, (2, 4))
    pts += [(complex(a, b_), complex(c, d_)) for a, b_, c, d_ in rnd]
    for g1, g2 in pts:
        ref = np.vdot(vec, np.kron(disp_t(g1), disp_t(g2)) @ vec)
        val = math.exp(dephasing.entangled_char_factor(g1, g2, r))
        worst_c = max(worst_c, abs(ref - val))

    checks = (
        CheckResult("displaced_fock_overlap", len(xs) * 11, worst_a, 1e-8),
        CheckResult("classical_char_factor_vs_sum", 5, worst_b, 1e-6),
        CheckResult("entangled_char_factor_vs_tmsv", len(pts), worst_c, 1e-6),
    )
    return SuiteReport(checks, seed)


# ---------------------------------------------------------------------------
# dense cross-check of the branch Gram method


def dense_dephasing_check(
    model: dephasing.DiscreteDephasingModel,
    initial: DensityMatrix,
    times: Sequence[float],
    budget: int = 4096,
) -> SuiteReport:
    """Compare branch Gram entropies/CMI against dense full-space evolution.

    Also records how far the dense system coherences sit from the continuum
    quadrature factors (a convergence indicator for the mode count, looser by
    construction and not asserted).
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    branch = dephasing.BranchComputer(model, initial, budget=budget)
    dense = dephasing.DenseComputer(model, initial, budget=budget)
    worst_cmi = 0.0
    worst_ent = 0.0
    for ti in t:
        for part in dephasing.ENV_PARTS:
            eb = branch.entropies_at(ti, part)
            ed = dense.entropies_at(ti, part)
            worst_cmi = max(worst_cmi, abs(eb["cmi"] - ed["cmi"]))
            for key in ("S_AS", "S_S", "S_A", "S_SE", "S_ASE", "mi_sa"):
                worst_ent = max(worst_ent, abs(eb[key] - ed[key]))
    # coherence convergence vs quadrature (recorded); probed with a state that
    # populates every system coherence (the measurement initial usually doesn't)
    part_as = SystemPartition([("A", 2), ("S1", 2), ("S2", 2)])
    amps = np.zeros(8, dtype=complex)
    amps[:4] = 0.5
    probe = pure_state(amps, part_as)
    dense_probe = dephasing.DenseComputer(model, probe, budget=budget)
    branch_probe = dephasing.BranchComputer(model, probe, budget=budget)
    rho0 = dense_probe.system_state(0.0).data
    quad_dev = 0.0
    mod_dev = 0.0
    path_dev = 0.0
    for ti in t:
        dm = dense_probe.system_state(ti).data
        bm = branch_probe.system_state(ti).data
        cont = dephasing.coherence_factor_matrix(model.params, ti)
        path_dev = max(path_dev, float(np.max(np.abs(dm - bm))))
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                quad_dev = max(quad_dev, abs(dm[i, j] / rho0[i, j] - cont[i, j]))
        if model.env_kind == "classical":
            pf = dephasing.discrete_phase_factors(model, ti)
            mod_dev = max(mod_dev, abs(abs(pf.k12) - abs(pf.lam12)))
            mod_dev = max(mod_dev, abs(abs(bm[2, 1]) - abs(dm[2, 1])))
    checks = [
        CheckResult("branch_vs_dense_cmi", t.size, worst_cmi, DENSE_TOL),
        CheckResult("branch_vs_dense_entropies", t.size, worst_ent, DENSE_TOL),
        CheckResult("branch_vs_dense_coherences", t.size, path_dev, DENSE_TOL),
        CheckResult(
            f"quadrature_coherence_dev_{model.n_pairs}_pairs_recorded",
            t.size,
            quad_dev,
            math.inf,
        ),
    ]
    if model.env_kind == "classical":
        checks.append(CheckResult("classical_k12_lam12_modulus", t.size, mod_dev, 1e-10))
    return SuiteReport(tuple(checks), seed=0)
