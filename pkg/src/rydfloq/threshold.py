"""Threshold-field extraction and scans over the initial quantum number.

The experimental observable is the drive amplitude at which 10% of the
population ionizes within a fixed interaction time. find_threshold walks a
geometric grid in the scaled field until the yield first crosses 10%, then
bisects on log F0; fluctuating yield curves are resolved by always keeping
the lowest crossing. Each record carries the diagnostics evaluated at the
threshold: photon count to the effective continuum, localization-length
estimate, and the Shannon width of the initial state's Floquet
decomposition.

run_scan executes one search per n0 with checkpoint journaling; a finished
plan reruns as a pure journal read, and the merged output depends only on
the sort key (n0), never on completion order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Callable

from .basis import SturmianBasis, build_operators
from .errors import (
    ConvergenceError,
    InsufficientSpectrumError,
    NoThresholdError,
    SingularShiftError,
)
from .eigensolve import EigenRequest, c_product, shift_invert_eigs
from .floquet import FloquetConfig, assemble, block_count_heuristic, embed_initial
from .observables import (
    SpectralDecomposition,
    decompose,
    ionization_probability,
    localization_length,
    photon_number,
    rotated_initial_state,
    shannon_width,
)
from .units import TWO_PI, AtomicParams, scale

TARGET_YIELD = 0.10
YIELD_TOLERANCE = 0.005
BRACKET_TOLERANCE = 0.01  # relative width at which bisection may stop

F0_START = 1e-3
F0_RATIO = 1.3
F0_FLOOR = 1e-8

CSV_HEADER = "n0,omega0,F0_threshold,P_at_threshold,N_photons,xi,xi_over_N,shannon,converged,n_eigensolves"

_JOURNAL_SCHEMA = 1


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs of the Floquet pipeline, independent of the scan point."""

    theta: float = 0.15
    basis_size: int | None = None  # None: sized from n0 and omega
    block_margin: int = 4
    block_cap: int = 64
    ring_windows: int = 2  # photon range tiled by shift windows around the bound energy
    # near threshold the initial state fragments over a dozen or more Floquet
    # states plus their photon images; each window must return enough pairs
    # to hold its share of that spread
    n_eigs: int = 32
    tol: float = 1e-10
    max_iter: int = 300
    inner_solver: str = "sparse"
    capture_target: float = 0.995  # stop opening windows once this weight is found

    def __post_init__(self):
        if not 0.0 <= self.theta < math.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2), got {self.theta}")
        if self.basis_size is not None and self.basis_size < 4:
            raise ValueError(f"basis_size must be at least 4, got {self.basis_size}")
        if self.block_margin < 0 or self.block_cap < 1:
            raise ValueError(f"invalid block window bounds: margin={self.block_margin}, cap={self.block_cap}")
        if self.ring_windows < 0:
            raise ValueError(f"ring_windows must be nonnegative, got {self.ring_windows}")
        if not 0.0 < self.capture_target <= 1.0:
            raise ValueError(f"capture_target must lie in (0, 1], got {self.capture_target}")


@dataclass(frozen=True)
class ThresholdRecord:
    """One scan point: threshold field, its bracket, and the diagnostics there."""

    n0: int
    omega0: float
    F0_threshold: float
    P_at_threshold: float
    N_photons: int
    xi: float
    shannon: float
    bracket: tuple[float, float]
    n_eigensolves: int
    converged: bool

    @property
    def xi_over_n(self) -> float:
        return self.xi / self.N_photons if self.N_photons > 0 else math.inf


@dataclass(frozen=True)
class ScanPlan:
    """Threshold scan over n0 at fixed lab frequency or fixed scaled frequency."""

    n0_values: tuple[int, ...]
    t_cycles: float
    omega: float | None = None
    omega0_fixed: float | None = None
    n_eff: float | None = None  # None: 10 above the largest n0
    f0_max: float = 1.0
    settings: SolverSettings = SolverSettings()
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n0_values", tuple(int(n) for n in self.n0_values))
        if not self.n0_values:
            raise ValueError("n0_values must be non-empty")
        if any(n < 1 for n in self.n0_values):
            raise ValueError(f"n0 values must be positive, got {self.n0_values}")
        if len(set(self.n0_values)) != len(self.n0_values):
            raise ValueError("n0_values must not repeat; checkpoints are keyed by n0")
        if (self.omega is None) == (self.omega0_fixed is None):
            raise ValueError("exactly one of omega and omega0_fixed must be set")
        if self.omega is not None and not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.omega0_fixed is not None and not self.omega0_fixed > 0:
            raise ValueError(f"omega0_fixed must be positive, got {self.omega0_fixed}")
        if not self.t_cycles > 0:
            raise ValueError(f"t_cycles must be positive, got {self.t_cycles}")
        if self.n_eff is not None and not self.n_eff > 0:
            raise ValueError(f"n_eff must be positive, got {self.n_eff}")
        if not self.f0_max > 0:
            raise ValueError(f"f0_max must be positive, got {self.f0_max}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")

    def omega_for(self, n0: int) -> float:
        return self.omega if self.omega is not None else self.omega0_fixed / n0**3

    def effective_n_eff(self) -> float:
        return self.n_eff if self.n_eff is not None else max(self.n0_values) + 10.0


def default_scan_plan(workers: int = 1, t_cycles: float = 300.0) -> ScanPlan:
    """Reference scan: n0 from 20 to 60 at a fixed lab frequency of 5.5e-5 a.u.

    Over this set the scaled frequency runs from 0.44 to 11.9 and the photon
    count to the effective continuum falls from 21 to 1, so a single scan
    crosses from the many-photon (localized) regime into the one-photon one.
    """
    return ScanPlan(
        n0_values=tuple(range(20, 61, 4)),
        t_cycles=t_cycles,
        omega=5.5e-5,
        workers=workers,
    )


def auto_basis_size(n0: int, omega: float) -> int:
    # the ladder top: the level one photon below the continuum, or n0 itself
    reach = max(float(n0), 1.0 / math.sqrt(2.0 * omega))
    # 8 functions per n0 keeps the discretized continuum dense enough for
    # one- and two-photon rates; the reach term takes over in the
    # many-photon regime where high shelf levels must be held as well
    return math.ceil(max(8.0 * n0, 1.25 * reach * reach / n0))


@lru_cache(maxsize=3)
def _cached_operators(n0: int, size: int):
    return build_operators(SturmianBasis(size, float(n0)))


def _ring_order(rings: int):
    # half-photon spacing: integer offsets catch the photon images of a
    # fragment, half-integer ones the fragments lying between them, so the
    # windows tile the whole quasi-energy zone
    yield 0.0
    for half in range(1, 2 * rings + 1):
        yield 0.5 * half
        yield -0.5 * half


def _captured(initial, pairs, b) -> float:
    return sum(abs(c_product(p.vector, initial, b)) ** 2 for p in pairs)


def _merge_pairs(accepted, batch, b, eps_tol: float):
    for p in batch:
        duplicate = False
        for q in accepted:
            if abs(p.epsilon - q.epsilon) <= eps_tol and abs(c_product(p.vector, q.vector, b)) > 0.5:
                duplicate = True
                break
        if not duplicate:
            accepted.append(p)


def _decompose_initial(params: AtomicParams, settings: SolverSettings,
                       _retry: bool = True) -> tuple[SpectralDecomposition, int]:
    """Initial-state weights over Floquet resonances near the bound energy.

    Windows are opened at the field-free quasi-energy and its photon images
    until the captured weight reaches the target; a short capture triggers
    one deterministic retry with a wider net before the error propagates.
    """
    n0 = params.n0
    size = settings.basis_size or auto_basis_size(n0, params.omega)
    ops = _cached_operators(n0, size)
    scaled = scale(params)
    k_min, k_max = block_count_heuristic(
        n0, scaled.omega0, scaled.F0, params.n_eff,
        margin=settings.block_margin, cap=settings.block_cap,
    )
    cfg = FloquetConfig(theta=settings.theta, k_min=k_min, k_max=k_max,
                        F=params.field, omega=params.omega)
    problem = assemble(ops, cfg)
    initial = embed_initial(problem, rotated_initial_state(ops, n0, settings.theta))

    eps0 = -0.5 / n0**2
    eps_tol = 1e-6 * max(abs(eps0), params.omega)
    pairs: list = []
    n_solves = 0
    for m in _ring_order(settings.ring_windows):
        # nudged off the eigenvalue so the first factorization is regular
        sigma = eps0 * (1.0 + 1e-6) + m * params.omega
        # upper-half and c-null artifacts are dropped; the capture floor below
        # audits that nothing carrying real weight was thrown away
        req = EigenRequest(sigma=sigma, n_eigs=settings.n_eigs, tol=settings.tol,
                           max_iter=settings.max_iter, start_vector=initial,
                           inner_solver=settings.inner_solver,
                           upper_half="drop", c_null="drop")
        n_solves += 1
        try:
            batch = shift_invert_eigs(problem, req)
        except (ConvergenceError, SingularShiftError):
            continue  # a barren window is not fatal; the capture floor decides
        _merge_pairs(pairs, batch, problem.B, eps_tol)
        if _captured(initial, pairs, problem.B) >= settings.capture_target:
            break
    try:
        return decompose(initial, pairs, problem.B), n_solves
    except InsufficientSpectrumError:
        if not _retry:
            raise
        wider = replace(settings, n_eigs=2 * settings.n_eigs,
                        ring_windows=settings.ring_windows + 1)
        dec, extra = _decompose_initial(params, wider, _retry=False)
        return dec, n_solves + extra


def pion_at(params: AtomicParams, settings: SolverSettings = SolverSettings()) -> float:
    """Ionization probability after params.time for one drive setting."""
    if params.field == 0.0:
        return 0.0
    dec, _ = _decompose_initial(params, settings)
    return ionization_probability(dec, params.time)


def initial_state_decomposition(params: AtomicParams,
                                settings: SolverSettings = SolverSettings(),
                                ) -> SpectralDecomposition:
    """Floquet decomposition of the bound initial state for one drive setting."""
    dec, _ = _decompose_initial(params, settings)
    return dec


def find_threshold(n0: int, omega: float, t_cycles: float,
                   settings: SolverSettings = SolverSettings(), *,
                   n_eff: float = math.inf, f0_max: float = 1.0,
                   pion_fn: Callable[[float], float] | None = None) -> ThresholdRecord:
    """Locate the scaled field where the yield after t_cycles crosses 10%.

    Coarse geometric grid upward from F0_START, then bisection on log F0
    until the yield is within YIELD_TOLERANCE of 10% or the bracket closes
    to BRACKET_TOLERANCE relative width. Non-monotone yields keep the lowest
    crossing. pion_fn substitutes the full pipeline with an arbitrary yield
    curve (diagnostics and tests); the eigensolve counter then counts curve
    evaluations instead.
    """
    if n0 < 1 or omega <= 0 or t_cycles <= 0 or f0_max <= 0:
        raise ValueError(f"invalid search point: n0={n0}, omega={omega}, t_cycles={t_cycles}, f0_max={f0_max}")
    time = t_cycles * TWO_PI / omega
    counters = {"solves": 0}
    yields: dict[float, float] = {}
    spectra: dict[float, SpectralDecomposition] = {}

    def evaluate(F0: float) -> float:
        if F0 in yields:
            return yields[F0]
        if pion_fn is not None:
            p = float(pion_fn(F0))
            counters["solves"] += 1
        else:
            params = AtomicParams(omega=omega, time=time, field=F0 / n0**4, n0=n0, n_eff=n_eff)
            dec, n_solves = _decompose_initial(params, settings)
            counters["solves"] += n_solves
            spectra[F0] = dec
            p = ionization_probability(dec, time)
        yields[F0] = p
        return p

    # coarse geometric grid: stop at the first crossing, which is the lowest.
    # A ceiling under the usual grid start shrinks the grid to that single
    # point rather than skipping the search entirely.
    below = None
    above = None
    start = min(F0_START, f0_max)
    F0 = start
    while F0 <= f0_max * (1.0 + 1e-9):
        p = evaluate(F0)
        if p >= TARGET_YIELD:
            above = (F0, p)
            break
        below = (F0, p)
        F0 *= F0_RATIO
    if above is None:
        raise NoThresholdError(
            f"yield stayed below {TARGET_YIELD} up to F0 = {below[0]:.6g} (P = {below[1]:.4f})"
        )
    if below is None:
        F0 = start
        while True:  # threshold sits below the grid start: walk down
            F0 /= F0_RATIO
            if F0 < F0_FLOOR:
                raise NoThresholdError(f"yield above {TARGET_YIELD} down to F0 = {F0_FLOOR}")
            p = evaluate(F0)
            if p < TARGET_YIELD:
                below = (F0, p)
                break
            above = (F0, p)

    (lo, p_lo), (hi, p_hi) = below, above
    threshold = None
    for _ in range(60):
        if hi - lo <= BRACKET_TOLERANCE * lo:
            break
        mid = math.sqrt(lo * hi)
        p_mid = evaluate(mid)
        if p_mid >= TARGET_YIELD:
            hi, p_hi = mid, p_mid
        else:
            lo, p_lo = mid, p_mid
        if abs(p_mid - TARGET_YIELD) <= YIELD_TOLERANCE:
            threshold, p_at = mid, p_mid
            break
    if threshold is None:
        threshold = math.sqrt(lo * hi)
        p_at = evaluate(threshold)

    omega0 = omega * n0**3
    if pion_fn is None:
        shannon = shannon_width(spectra[threshold].weights())
    else:
        shannon = math.nan
    return ThresholdRecord(
        n0=n0,
        omega0=omega0,
        F0_threshold=threshold,
        P_at_threshold=p_at,
        N_photons=photon_number(n0, n_eff, omega),
        xi=localization_length(threshold, omega0, n0),
        shannon=shannon,
        bracket=(lo, hi),
        n_eigensolves=counters["solves"],
        converged=True,
    )


def _failed_record(plan: ScanPlan, n0: int) -> ThresholdRecord:
    omega = plan.omega_for(n0)
    return ThresholdRecord(
        n0=n0,
        omega0=omega * n0**3,
        F0_threshold=math.nan,
        P_at_threshold=math.nan,
        N_photons=photon_number(n0, plan.effective_n_eff(), omega),
        xi=math.nan,
        shannon=math.nan,
        bracket=(math.nan, math.nan),
        n_eigensolves=0,
        converged=False,
    )


def _scan_point(plan: ScanPlan, n0: int, pion_fn):
    try:
        record = find_threshold(
            n0, plan.omega_for(n0), plan.t_cycles, plan.settings,
            n_eff=plan.effective_n_eff(), f0_max=plan.f0_max, pion_fn=pion_fn,
        )
        return record, ""
    except Exception as exc:  # a lost point must not sink the other points
        return _failed_record(plan, n0), f"{type(exc).__name__}: {exc}"


def plan_hash(plan: ScanPlan) -> str:
    blob = json.dumps(asdict(plan), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _journal_line(plan_h: str, n0: int, record: ThresholdRecord, error: str) -> str:
    payload = {
        "schema": _JOURNAL_SCHEMA,
        "plan": plan_h,
        "n0": n0,
        "error": error,
        "record": asdict(record),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def load_journal(path, plan_h: str) -> dict[int, ThresholdRecord]:
    """Completed records of a plan; malformed lines (torn writes) are skipped."""
    done: dict[int, ThresholdRecord] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                continue
            if payload.get("schema") != _JOURNAL_SCHEMA or payload.get("plan") != plan_h:
                continue
            raw = payload["record"]
            raw["bracket"] = tuple(raw["bracket"])
            done[payload["n0"]] = ThresholdRecord(**raw)
    return done


def run_scan(plan: ScanPlan, journal_path=None, pion_fn=None) -> list[ThresholdRecord]:
    """One ThresholdRecord per n0, sorted by n0, resumable through the journal.

    Points already present in the journal under this plan's hash are not
    recomputed. Failures become converged=False records; they never abort
    the remaining points. Injected yield curves run serially because they
    need not survive pickling into worker processes.
    """
    plan_h = plan_hash(plan)
    results: dict[int, ThresholdRecord] = {}
    if journal_path is not None and os.path.exists(journal_path):
        results = load_journal(journal_path, plan_h)
    pending = [n0 for n0 in sorted(plan.n0_values) if n0 not in results]

    journal = None
    if journal_path is not None:
        journal = open(journal_path, "a", encoding="utf-8")

    def complete(n0: int, record: ThresholdRecord, error: str):
        results[n0] = record
        if journal is not None:
            journal.write(_journal_line(plan_h, n0, record, error) + "\n")
            journal.flush()

    try:
        if plan.workers == 1 or len(pending) <= 1 or pion_fn is not None:
            for n0 in pending:
                record, error = _scan_point(plan, n0, pion_fn)
                complete(n0, record, error)
        else:
            with ProcessPoolExecutor(max_workers=min(plan.workers, len(pending))) as pool:
                futures = {pool.submit(_scan_point, plan, n0, None): n0 for n0 in pending}
                for fut in as_completed(futures):
                    record, error = fut.result()
                    complete(futures[fut], record, error)
    finally:
        if journal is not None:
            journal.close()
    return [results[n0] for n0 in sorted(plan.n0_values)]


def _field(x: float) -> str:
    return repr(float(x))


def write_csv(records, path, comment: str | None = None) -> None:
    """Scan records as CSV; floats printed as shortest round-trip decimals."""
    lines = []
    if comment is not None:
        lines.append(f"# {comment}")
    lines.append(CSV_HEADER)
    for r in records:
        lines.append(",".join([
            str(r.n0),
            _field(r.omega0),
            _field(r.F0_threshold),
            _field(r.P_at_threshold),
            str(r.N_photons),
            _field(r.xi),
            _field(r.xi_over_n),
            _field(r.shannon),
            "true" if r.converged else "false",
            str(r.n_eigensolves),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
