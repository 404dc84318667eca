"""Memory experiments, the quadratic-law fit and the concatenation calculator.

A memory experiment encodes a logical input without noise, runs ``rounds``
noisy EC rounds and then decodes ideally (one noiseless EC round followed by
a noiseless destructive logical measurement).  Failure means the decoded
value differs from the input.  Shots whose ancilla supply ran dry are
counted as aborts and kept out of ``p_logical``.

Rates are reported for the whole window and, assuming independent rounds,
per EC round.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest
from tqdm import tqdm

from . import gadgets
from .concat import SCHEDULES, ConcatenatedExecutor
from .dense import dense_fidelity, rz
from .errors import ConfigurationError, InsufficientDataError, NoConvergenceError
from .executors import (BranchingDenseExecutor, DenseExecutor, Executor, FrameExecutor, RecordingExecutor,
                        TableauExecutor)
from .noise import NoiseModel, ScheduledFaults, adversary_assign, bernoulli_indices
from .pauli import PauliOperator
from .steane import N, encode_ideal, measure_logical_destructive

INPUTS = ("0", "1", "+")
CODES = ("none", "steane", "concat")
MEMORY_BACKENDS = ("frame", "tableau", "dense")
CSV_COLUMNS = ("p", "shots", "failures", "aborts", "p_logical", "ci_low", "ci_high", "seed", "circuit_hash")


@dataclass(frozen=True)
class MemoryExperiment:
    """One memory-experiment configuration.

    ``code`` selects the unencoded qubit (``"none"``), one Steane block
    (``"steane"``) or the 49-qubit two-level encoding (``"concat"``).
    """

    input: str = "0"
    rounds: int = 1
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: int = 10_000
    seed: int = 0
    backend: str = "frame"
    code: str = "steane"
    schedule: str = "none"
    max_retries: int = gadgets.DEFAULT_RETRIES
    repeat_syndrome: bool = False
    chunk_size: int = 65_536
    error_timing: str = "after"

    def __post_init__(self):
        if self.input not in INPUTS:
            raise ConfigurationError(f"input must be one of {INPUTS}")
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if self.shots < 1:
            raise ConfigurationError("shots must be >= 1")
        if self.backend not in MEMORY_BACKENDS:
            raise ConfigurationError(f"backend must be one of {MEMORY_BACKENDS}")
        if self.code not in CODES:
            raise ConfigurationError(f"code must be one of {CODES}")
        if self.schedule not in SCHEDULES:
            raise ConfigurationError(f"schedule must be one of {SCHEDULES}")
        if self.chunk_size < 1:
            raise ConfigurationError("chunk_size must be >= 1")
        if not self.noise.is_pauli and self.backend != "dense":
            raise ConfigurationError(f"coherent noise needs the dense backend, not {self.backend}")

    def replace(self, **kw) -> MemoryExperiment:
        return dataclasses.replace(self, **kw)

    @property
    def p(self) -> float:
        n = self.noise
        return float(n.p_gate or n.p_idle or n.p_meas)

    def effective_noise(self):
        if self.code != "none":
            return self.noise
        # the bare qubit only idles
        n = self.noise
        if not n.is_pauli:
            return n
        return dataclasses.replace(n, p_gate=0.0, p_meas=0.0, p_idle=n.p_idle or n.p_gate)


def wilson_interval(failures: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    ci = binomtest(int(failures), int(n)).proportion_ci(level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ExperimentResult:
    shots: int
    failures: int
    aborts: int = 0
    p: float = float("nan")
    rounds: int = 1
    seed: int | None = None
    circuit_hash: str = ""
    p_logical: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        if self.failures < 0 or self.aborts < 0 or self.failures + self.aborts > self.shots:
            raise ValueError("need failures + aborts <= shots")
        n = self.shots - self.aborts
        rate = self.failures / n if n else float("nan")
        lo, hi = wilson_interval(self.failures, n)
        object.__setattr__(self, "p_logical", rate)
        object.__setattr__(self, "ci_low", lo)
        object.__setattr__(self, "ci_high", hi)

    @property
    def accepted(self) -> int:
        return self.shots - self.aborts

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``p_logical``."""
        n = self.accepted
        if not n:
            return float("nan")
        return math.sqrt(max(self.p_logical * (1 - self.p_logical), 0.0) / n)

    @property
    def p_per_round(self) -> float:
        """Per-round rate assuming independent rounds: ``1 - (1 - p_L)**(1/rounds)``."""
        return 1.0 - (1.0 - self.p_logical) ** (1.0 / self.rounds)

    def row(self) -> dict:
        return {"p": self.p, "shots": self.shots, "failures": self.failures, "aborts": self.aborts,
                "p_logical": self.p_logical, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "seed": self.seed, "circuit_hash": self.circuit_hash}


# ---------------------------------------------------------------------------
# execution


def _executor(exp: MemoryExperiment, n: int, rng, noise=None) -> Executor:
    noise = exp.effective_noise() if noise is None else noise
    if exp.backend == "frame":
        ex = FrameExecutor(n, noise, rng, error_timing=exp.error_timing)
    elif exp.backend == "tableau":
        ex = TableauExecutor(noise, rng, error_timing=exp.error_timing)
    else:
        ex = DenseExecutor(noise, rng, error_timing=exp.error_timing)
    if exp.code == "concat":
        ex = ConcatenatedExecutor(ex, schedule=exp.schedule, max_retries=exp.max_retries)
    return ex


def memory_body(ex: Executor, exp: MemoryExperiment) -> np.ndarray:
    """Run one memory experiment on every shot of ``ex``; returns the failure mask."""
    basis = "X" if exp.input == "+" else "Z"
    if exp.code == "none":
        with ex.noiseless():
            q = ex.alloc_ideal(1)
            if exp.input == "1":
                ex.gate("X", q)
            elif exp.input == "+":
                ex.gate("H", q)
        for _ in range(exp.rounds):
            ex.step([], tag="idle")
        with ex.noiseless():
            bits = ex.measure(q, basis)[0]
    else:
        data = ex.alloc_encoded([exp.input])
        concat = isinstance(ex, ConcatenatedExecutor)
        for _ in range(exp.rounds):
            if concat:
                gadgets.ec_round(ex.inner, ex.inner_blocks(data[0]), max_retries=exp.max_retries)
            gadgets.ec_round(ex, data, repeat_syndrome=exp.repeat_syndrome, max_retries=exp.max_retries)
        with ex.noiseless():
            if concat:
                gadgets.ec_round(ex.inner, ex.inner_blocks(data[0]), max_retries=exp.max_retries)
            gadgets.ec_round(ex, data, max_retries=exp.max_retries)
            bits, _, _ = measure_logical_destructive(ex, data[0], basis=basis)
            bits = bits[:, 0]
    expected = 1 if (exp.input == "1" and not ex.relative) else 0
    return np.asarray(bits) != expected


def _chunks(exp: MemoryExperiment) -> list[tuple[int, int, int]]:
    cs = exp.chunk_size
    return [(c, lo, min(lo + cs, exp.shots)) for c, lo in enumerate(range(0, exp.shots, cs))]


def _run_chunk(exp: MemoryExperiment, chunk: tuple[int, int, int]) -> tuple[int, int, int]:
    """``(failures, aborts, shots)`` for one chunk; its RNG streams depend only on the chunk."""
    c, lo, hi = chunk
    if exp.backend == "frame":
        rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(c,)))
        ex = _executor(exp, hi - lo, rng)
        fail = memory_body(ex, exp)
        ab = ex.aborted
        return int((fail & ~ab).sum()), int(ab.sum()), hi - lo
    failures = aborts = 0
    for shot in range(lo, hi):
        rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(shot,)))
        ex = _executor(exp, 1, rng)
        fail = memory_body(ex, exp)
        if ex.aborted[0]:
            aborts += 1
        else:
            failures += int(fail[0])
    return failures, aborts, hi - lo


def circuit_hash(exp: MemoryExperiment) -> str:
    """Digest of the physical circuit one shot of ``exp`` emits (no retries)."""
    rec = RecordingExecutor(exp.effective_noise() if exp.noise.is_pauli else NoiseModel())
    ex = ConcatenatedExecutor(rec, schedule=exp.schedule, max_retries=exp.max_retries) if exp.code == "concat" else rec
    memory_body(ex, exp)
    text = rec.circuit().to_text() + f"\ncorrections={rec.rec['corrections']}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def run_memory(exp: MemoryExperiment, *, workers: int = 1, progress: bool = False) -> ExperimentResult:
    """Failures and aborts over ``exp.shots`` shots; identical for any ``workers``."""
    chunks = _chunks(exp)
    failures = aborts = 0
    bar = tqdm(total=exp.shots, unit="shot", file=sys.stderr, disable=not progress,
               desc=f"{exp.code} p={exp.p:.3g}")
    with bar:
        if workers <= 1 or len(chunks) == 1:
            results = (_run_chunk(exp, c) for c in chunks)
            for f, a, n in results:
                failures += f
                aborts += a
                bar.update(n)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for f, a, n in pool.map(_run_chunk, [exp] * len(chunks), chunks):
                    failures += f
                    aborts += a
                    bar.update(n)
    return ExperimentResult(exp.shots, failures, aborts, p=exp.p, rounds=exp.rounds, seed=exp.seed,
                            circuit_hash=circuit_hash(exp))


def run_memory_until(exp: MemoryExperiment, *, min_failures: int = 10, max_shots: int | None = None,
                     workers: int = 1, progress: bool = False) -> ExperimentResult:
    """``run_memory``, doubling the shot count until ``min_failures`` or ``max_shots``."""
    max_shots = max_shots or 16 * exp.shots
    res = run_memory(exp, workers=workers, progress=progress)
    while res.failures < min_failures and exp.shots < max_shots:
        exp = exp.replace(shots=min(2 * exp.shots, max_shots))
        res = run_memory(exp, workers=workers, progress=progress)
    return res


def memory_sweep(exp: MemoryExperiment, p_grid, *, min_failures: int = 0, max_shots: int | None = None,
                 workers: int = 1, progress: bool = False) -> list[ExperimentResult]:
    """One result per ``p``: every nonzero rate of ``exp.noise`` set to ``p``; point ``i`` uses seed ``seed + i``."""
    out = []
    for i, p in enumerate(p_grid):
        e = exp.replace(noise=exp.noise.scaled(float(p)), seed=exp.seed + i)
        if min_failures:
            out.append(run_memory_until(e, min_failures=min_failures, max_shots=max_shots, workers=workers,
                                        progress=progress))
        else:
            out.append(run_memory(e, workers=workers, progress=progress))
    return out


def run_level1_concat(exp: MemoryExperiment, shots: int | None = None, **kw) -> ExperimentResult:
    """Memory experiment on the 49-qubit block: each inner block is a Steane block."""
    if exp.backend == "dense":
        raise ConfigurationError("49 qubits are beyond the dense backend; use frame or tableau")
    return run_memory(exp.replace(code="concat", shots=shots or exp.shots), **kw)


def bare_failure_probability(p: float, rounds: int, input: str = "0") -> float:
    """Exact flip probability of an idling qubit under depolarizing noise.

    Two of the three Paulis flip the measured basis, so each round flips with
    ``q = 2p/3`` and the readout is wrong after an odd number of flips.
    """
    q = 2 * p / 3
    return (1 - (1 - 2 * q) ** rounds) / 2


# ---------------------------------------------------------------------------
# fit


@dataclass(frozen=True)
class ThresholdFit:
    C: float
    C_ci: tuple[float, float]
    slope: float
    slope_se: float
    intercept: float
    residuals: tuple[float, ...]
    points: tuple[float, ...]
    excluded: tuple[float, ...] = ()
    circuit_hash: str = ""

    @property
    def p_T(self) -> float:
        return 1.0 / self.C

    @property
    def p_T_ci(self) -> tuple[float, float]:
        return 1.0 / self.C_ci[1], 1.0 / self.C_ci[0]

    @property
    def slope_ci(self) -> tuple[float, float]:
        return self.slope - 1.96 * self.slope_se, self.slope + 1.96 * self.slope_se

    def predict(self, p) -> np.ndarray:
        return self.C * np.asarray(p, dtype=float) ** 2

    def to_dict(self) -> dict:
        return {"C": self.C, "C_ci": list(self.C_ci), "p_T": self.p_T, "p_T_ci": list(self.p_T_ci),
                "slope": self.slope, "slope_ci": list(self.slope_ci), "slope_se": self.slope_se,
                "intercept": self.intercept, "residuals": list(self.residuals), "points": list(self.points),
                "excluded": list(self.excluded), "circuit_hash": self.circuit_hash,
                "normalization": "per EC round window (rounds=1)", "min_failures": 10}


def fit_threshold(points, min_failures: int = 10) -> ThresholdFit:
    """Weighted least squares of ``log p_L`` on ``log p``.

    ``points`` is a list of ``(p, ExperimentResult)``.  Weights are inverse
    binomial variances of ``log p_L``.  The free fit gives the slope; the fit
    with slope fixed at 2 gives ``C`` (and ``p_T = 1/C``).
    """
    use, excluded = [], []
    for p, r in points:
        (use if r.failures >= min_failures else excluded).append((float(p), r))
    if excluded:
        warnings.warn(f"excluded {len(excluded)} point(s) with fewer than {min_failures} failures: "
                      f"{[p for p, _ in excluded]}", stacklevel=2)
    if len(use) < 3:
        raise InsufficientDataError(f"need >= 3 points with >= {min_failures} failures, have {len(use)}")
    x = np.log([p for p, _ in use])
    y = np.log([r.p_logical for _, r in use])
    w = np.array([r.failures / max(1.0 - r.p_logical, 1e-12) for _, r in use])
    # free slope
    A = np.stack([np.ones_like(x), x], axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    # slope fixed at 2
    log_c = float(np.sum(w * (y - 2 * x)) / np.sum(w))
    se = 1.0 / math.sqrt(float(np.sum(w)))
    hashes = sorted({r.circuit_hash for _, r in use if r.circuit_hash})
    return ThresholdFit(
        C=math.exp(log_c),
        C_ci=(math.exp(log_c - 1.96 * se), math.exp(log_c + 1.96 * se)),
        slope=float(coef[1]),
        slope_se=float(math.sqrt(cov[1, 1])),
        intercept=float(coef[0]),
        residuals=tuple(float(v) for v in y - (log_c + 2 * x)),
        points=tuple(p for p, _ in use),
        excluded=tuple(p for p, _ in excluded),
        circuit_hash=",".join(hashes),
    )


# ---------------------------------------------------------------------------
# concatenation calculator


@dataclass(frozen=True)
class ConcatProjection:
    p: float
    p_T: float
    k: int
    p_k: float
    p_k_iterated: float
    qubits_per_logical: int

    def __post_init__(self):
        if self.qubits_per_logical != 7**self.k:
            raise ValueError("qubits_per_logical must be 7**k")


def concat_project(p: float, p_T: float, k: int) -> ConcatProjection:
    """``p_k = p_T (p/p_T)**(2**k)``, checked against ``p_{j+1} = p_j**2 / p_T``."""
    if p <= 0 or p_T <= 0 or k < 0:
        raise ConfigurationError("need p > 0, p_T > 0 and k >= 0")
    closed = p_T * (p / p_T) ** (2**k)
    it = p
    for _ in range(k):
        it = it * it / p_T
    return ConcatProjection(p, p_T, int(k), closed, it, 7**k)


def levels_for_target(p: float, p_T: float, epsilon: float) -> tuple[int, int]:
    """Smallest ``k`` with ``p_k <= epsilon``; returns ``(k, 7**k)``."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    if p >= p_T:
        raise NoConvergenceError(f"p = {p:g} is not below the threshold {p_T:g}: concatenation does not help")
    k = 0
    while concat_project(p, p_T, k).p_k > epsilon:
        k += 1
    return k, 7**k


# ---------------------------------------------------------------------------
# coherent errors


@dataclass(frozen=True)
class CoherentResult:
    theta: float
    shots: int
    nontrivial: int
    expected: float
    corrected_fidelity: float
    collapse_fidelity: float
    branches: int

    @property
    def rate(self) -> float:
        return self.nontrivial / self.shots

    @property
    def z_score(self) -> float:
        sd = math.sqrt(self.expected * (1 - self.expected) / self.shots)
        return (self.rate - self.expected) / sd if sd else float("inf") * (self.rate != self.expected)


def _collapse_candidates() -> list:
    base = encode_ideal(0)
    out = [base]
    for q in range(N):
        for letter in "XYZ":
            st = base.copy()
            st.apply_pauli(PauliOperator.single(N, q, letter))
            out.append(st)
    return out


def coherent_collapse(theta: float, shots: int = 100_000, seed: int = 0, qubit: int = 0) -> CoherentResult:
    """``Rz(theta)`` on one qubit of ``|0_L>``, then one noiseless EC round.

    Reports how often the Z-error syndrome is nontrivial, the worst fidelity
    with ``|0_L>`` after correction, and (from a run without corrections) the
    worst fidelity of the collapsed data with its nearest of the 22 states
    "codeword or codeword hit by one single-qubit Pauli".
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    results = {}
    for apply in (True, False):
        ex = BranchingDenseExecutor(shots, rng=rng)
        d = ex.alloc_encoded([0])
        ex.apply_unitary(rz(theta), d[0, qubit])
        rep = gadgets.ec_round(ex, d, apply_corrections=apply)
        results[apply] = (rep, ex.branch_states(d[0]))
    rep, states = results[True]
    ideal = encode_ideal(0)
    corrected = min(dense_fidelity(st, ideal) for st, _ in states)
    cands = _collapse_candidates()
    collapse = min(max(dense_fidelity(st, c) for c in cands) for st, _ in results[False][1])
    return CoherentResult(theta, shots, int((rep.z_syndrome != 0).sum()), math.sin(theta / 2) ** 2,
                          corrected, collapse, len(states))


# ---------------------------------------------------------------------------
# adversarial errors


@dataclass(frozen=True)
class AdversaryComparison:
    p: float
    adversarial: ExperimentResult
    depolarizing: ExperimentResult
    fallbacks: int
    n_locations: int

    @property
    def z_score(self) -> float:
        """``(adv - dep) / sigma``; the adversary should not lose by more than 3 sigma."""
        a, d = self.adversarial, self.depolarizing
        sd = math.sqrt(a.sigma**2 + d.sigma**2)
        diff = a.p_logical - d.p_logical
        return diff / sd if sd else (0.0 if diff == 0 else math.copysign(float("inf"), diff))


def indexed_locations(exp: MemoryExperiment) -> list:
    """Noisy locations of one shot of ``exp`` as ``(index, Location)`` in execution order."""
    rec = RecordingExecutor(ScheduledFaults([{}]))
    ex = ConcatenatedExecutor(rec, schedule=exp.schedule) if exp.code == "concat" else rec
    memory_body(ex, exp)
    return list(rec.rec["indexed"])


def scheduled_failures(exp: MemoryExperiment, tables, batch: int = 65_536) -> np.ndarray:
    """Failure (1.0) or not (0.0) of ``exp`` with exactly the faults of each table (aborts count 0)."""
    out = []
    for lo in range(0, len(tables), batch):
        part = tables[lo:lo + batch]
        ex = _executor(exp.replace(backend="frame"), len(part), np.random.default_rng(0), ScheduledFaults(part))
        fail = memory_body(ex, exp)
        out.append((fail & ~ex.aborted).astype(float))
    return np.concatenate(out) if out else np.zeros(0)


def adversary_compare(p: float, shots: int = 20_000, seed: int = 0, *, max_locations: int = 3,
                      rounds: int = 1, workers: int = 1) -> AdversaryComparison:
    """Exhaustive adversary vs depolarizing noise at matched ``p`` on one EC round.

    Every gate, preparation and measurement location fails independently with
    probability ``p``.  The adversary then picks the joint Pauli assignment
    that makes the shot fail, if there is one (searching only up to
    ``max_locations`` struck locations; beyond that it uses all-Y).

    Both arms run without preparation retries (a rejected ancilla aborts the
    shot) so that scheduled fault indices line up with the recorded circuit.
    """
    base = MemoryExperiment(rounds=rounds, shots=shots, seed=seed, noise=NoiseModel.circuit_level(p), max_retries=1)
    locs = indexed_locations(base)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    struck = [sorted(bernoulli_indices(rng, len(locs), p).tolist()) for _ in range(shots)]

    tables: list[dict] = []
    index: dict[tuple, int] = {}

    def key(events):
        return tuple((e.index, e.pauli.label()) for e in events)

    def collect(cands):
        for c in cands:
            k = key(c)
            if k not in index:
                index[k] = len(tables)
                tables.append({e.index: e.pauli for e in c})
        return np.zeros(len(cands))

    fallbacks = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plans = []
        for s in struck:
            if not s:
                plans.append(None)
                continue
            items = [locs[i] for i in s]
            if len(items) > max_locations:
                fallbacks += 1
                chosen = adversary_assign(items, "all_Y_heuristic")
                collect([chosen])
                plans.append(("fixed", chosen))
            else:
                adversary_assign(items, "exhaustive_worst_case", batch_oracle=collect, max_locations=max_locations)
                plans.append(("search", items))
        scores = scheduled_failures(base, tables)

        def lookup(cands):
            return [scores[index[key(c)]] for c in cands]

        failures = 0
        for plan in plans:
            if plan is None:
                continue
            if plan[0] == "fixed":
                failures += int(scores[index[key(plan[1])]])
            else:
                chosen = adversary_assign(plan[1], "exhaustive_worst_case", batch_oracle=lookup,
                                          max_locations=max_locations)
                failures += int(scores[index[key(chosen)]])
    adv = ExperimentResult(shots, failures, 0, p=p, rounds=rounds, seed=seed, circuit_hash=circuit_hash(base))
    dep = run_memory(base, workers=workers)
    return AdversaryComparison(p, adv, dep, fallbacks, len(locs))
