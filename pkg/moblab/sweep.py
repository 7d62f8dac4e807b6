"""
Campaigns over grids of phases alpha.

A sweep evaluates S_k(x, y; alpha) for y = floor(x^theta) at every
(theta, k, alpha) of a `SweepSpec` and reports, per row, the arc label
and witness, |S_k| and |S_k|/y, the major-arc term, the twisted-sum
bound for small q and the plain Weyl sum. Every (theta, k) group shares
one sieve and one power table; rows run on a worker pool and are
reassembled in grid order.
"""

import math
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import gmpy2
import numpy as np
from gmpy2 import mpq, mpz
from loguru import logger
from scipy.stats import linregress
from tqdm.auto import tqdm

from moblab import arcs, file_io, utils
from moblab.characters import lemma31_rhs
from moblab.constants import (
    ARC_PREC_BITS,
    BUDGET_TERMS,
    DEFAULT_DELTAS,
    DEFAULT_Q_MAX,
    DEFAULT_UNIFORM_COUNT,
    EPS,
    LEMMA31_Q_MAX,
    UNIFORM_BITS,
)
from moblab.exceptions import ArgumentError, ParameterError, PrecisionError, ResourceError
from moblab.expsum import (
    PhaseTable,
    major_arc_term,
    mobius_expsum,
    power_table,
    w_k,
    weyl_sum,
    wk_sum_lemma37,
    wk_sum_lemma37_shifted,
)
from moblab.phase import PhaseReal, parse_phase
from moblab.sieve import ArithSegment, sieve_segment

REPORT_COLUMNS = (
    "theta",
    "k",
    "x",
    "y",
    "alpha",
    "family",
    "label",
    "a",
    "q",
    "lambda",
    "abs_S",
    "abs_S_over_y",
    "major_arc_term",
    "lemma31_rhs",
    "weyl_abs",
)
NAMED_DELTAS = ("1/R", "-1/R", "1/(qQ)", "-1/(qQ)")
DECAY_POWERS = (1, 2, 3)
TRIVIAL_SLACK = 2.0**-30


def _exact(value) -> mpq:
    """ Floats are read through their shortest repr, so 0.85 means 17/20. """
    if isinstance(value, float):
        value = repr(value)
    return utils.to_mpq(value)


@dataclass(frozen=True)
class AlphaGrid:
    """
    Three families of phases plus optional explicit points.

    Parameters
    ----------
    uniform : int
        Number of seeded uniform points in [0, 1), each a 64-bit dyadic
    q_max : int
        Every a/q with 0 <= a < q <= q_max and gcd(a, q) = 1
    deltas : Tuple[str, ...]
        Offsets added to each rational: "1/R", "-1/R", "1/(qQ)",
        "-1/(qQ)" or any exact number
    points : Tuple[str, ...]
        Extra phases, parsed like the --alpha flag
    """
    uniform: int = DEFAULT_UNIFORM_COUNT
    q_max: int = DEFAULT_Q_MAX
    deltas: Tuple[str, ...] = DEFAULT_DELTAS
    points: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.uniform < 0 or self.q_max < 0:
            raise ParameterError(f"uniform and q_max must be >= 0, got {self.uniform}, {self.q_max}.")
        if self.uniform == 0 and self.q_max == 0 and not self.points:
            raise ParameterError("The alpha grid is empty.")
        if self.deltas and self.q_max == 0:
            logger.debug("Deltas given without rationals; no perturbed points.")

    @classmethod
    def from_dict(cls, data: dict) -> "AlphaGrid":
        data = dict(data)
        for key in ("deltas", "points"):
            if key in data:
                data[key] = tuple(str(item) for item in data[key])
        unknown = set(data) - {"uniform", "q_max", "deltas", "points"}
        if unknown:
            raise ParameterError(f"Unknown alpha_grid keys {sorted(unknown)}.")
        return cls(**data)


@dataclass(frozen=True)
class SweepSpec:
    """
    A sweep campaign; file keys mirror these fields one for one.

    c1 defaults to 1 rather than 8(k + 1): at desk scale the latter puts
    P above Q for every x a sweep can afford.
    """
    x: int
    theta_list: Tuple[str, ...]
    k_list: Tuple[int, ...] = (3,)
    alpha_grid: AlphaGrid = field(default_factory=AlphaGrid)
    c1: float = 1.0
    seed: int = 0
    eps: float = EPS
    lemma31_q_max: int = LEMMA31_Q_MAX
    budget_terms: int = BUDGET_TERMS
    workers: int = 1
    progress: bool = False

    def __post_init__(self):
        if int(self.x) < 2:
            raise ParameterError(f"x must be >= 2, got {self.x}.")
        if not self.theta_list or not self.k_list:
            raise ParameterError("theta_list and k_list must not be empty.")
        for theta in self.theta_list:
            value = _exact(theta)
            if not mpq(3, 4) < value <= 1:
                raise ParameterError(f"theta must lie in (3/4, 1], got {theta}.")
        for k in self.k_list:
            if int(k) < 3:
                raise ParameterError(f"k must be >= 3, got {k}.")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        known = {name for name in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"Unknown sweep keys {sorted(unknown)}.")
        if "x" not in data or "theta_list" not in data:
            raise ParameterError("A sweep needs x and theta_list.")
        data["x"] = utils.floor(_exact(data["x"]))
        data["theta_list"] = tuple(
            repr(theta) if isinstance(theta, float) else str(theta) for theta in data["theta_list"]
        )
        if "k_list" in data:
            data["k_list"] = tuple(int(k) for k in data["k_list"])
        if "alpha_grid" in data and not isinstance(data["alpha_grid"], AlphaGrid):
            data["alpha_grid"] = AlphaGrid.from_dict(data["alpha_grid"])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "SweepSpec":
        return cls.from_dict(utils.load_mapping(path))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AlphaPoint:
    family: str
    descriptor: str
    alpha: PhaseReal


@dataclass
class GroupContext:
    """ Data shared by every row with the same (theta, k). """
    theta: str
    k: int
    x: int
    y: int
    params: arcs.ArcParams
    segment: ArithSegment
    powers: List[mpz]

    @property
    def key(self) -> Tuple[str, int]:
        return (self.theta, self.k)


def interval_length(x: int, theta) -> int:
    """ floor(x^theta), evaluated at 256 bits. """
    with utils.high_precision(ARC_PREC_BITS):
        value = gmpy2.mpfr(utils.to_mpq(x))**gmpy2.mpfr(_exact(theta))
        return int(gmpy2.floor(value))


def uniform_points(count: int, seed: int) -> List[mpq]:
    """
    `count` dyadic rationals m / 2^64, m taken in order from the raw
    64-bit stream of the seeded default bit generator.
    """
    raw = np.random.default_rng(seed).bit_generator.random_raw(count)
    return [mpq(int(m), mpz(1) << UNIFORM_BITS) for m in raw]


def coprime_rationals(q_max: int) -> List[Tuple[int, int]]:
    return [(a, q) for q in range(1, q_max + 1) for a in range(q) if math.gcd(a, q) == 1]


def _delta_value(delta: str, q: int, x: int, y: int, k: int, c1: float, bits: int) -> mpq:
    """
    The offset named by `delta` as an exact rational; 1/(qQ) is cut to
    `bits` fractional bits toward zero so the point stays on its side
    of the boundary.
    """
    if delta not in NAMED_DELTAS:
        return utils.to_mpq(delta)
    sign = -1 if delta.startswith("-") else 1
    if delta.endswith("1/R"):
        return mpq(sign, mpz(x)**(k - 1) * y)
    with utils.high_precision(bits + ARC_PREC_BITS):
        P = gmpy2.log(gmpy2.mpfr(x))**gmpy2.mpfr(utils.to_mpq(c1))
        Q = gmpy2.mpfr(mpz(x)**(k - 2) * mpz(y)**2) / P
        scaled = gmpy2.floor((mpz(1) << bits) / (q * Q))
    return sign * mpq(mpz(scaled), mpz(1) << bits)


def alpha_points(spec: SweepSpec, x: int, y: int, k: int) -> List[AlphaPoint]:
    """ The grid for one (theta, k) in report order: points, uniform, rationals, perturbed. """
    grid = spec.alpha_grid
    bits = PhaseReal.required_bits(x, y, k)
    points = [AlphaPoint("point", text, parse_phase(text, bits)) for text in grid.points]
    for value in uniform_points(grid.uniform, spec.seed):
        alpha = PhaseReal(value, bits)
        points.append(AlphaPoint("uniform", alpha.to_string(), alpha))
    rationals = coprime_rationals(grid.q_max)
    for a, q in rationals:
        points.append(AlphaPoint("rational", f"{a}/{q}", PhaseReal.from_fraction(a, q, bits)))
    for a, q in rationals:
        for delta in grid.deltas:
            offset = _delta_value(delta, q, x, y, k, spec.c1, bits)
            sign = "" if delta.startswith("-") else "+"
            points.append(
                AlphaPoint("perturbed", f"{a}/{q}{sign}{delta}", PhaseReal(mpq(a, q) + offset, bits))
            )
    return points


def grid_size(spec: SweepSpec) -> int:
    grid = spec.alpha_grid
    rationals = len(coprime_rationals(grid.q_max))
    return len(grid.points) + grid.uniform + rationals * (1 + len(grid.deltas))


def estimate_work(spec: SweepSpec) -> int:
    """ Terms touched by a sweep: y per (theta, k, alpha) row. """
    per_k = grid_size(spec)
    return sum(
        interval_length(spec.x, theta) * per_k * len(spec.k_list) for theta in spec.theta_list
    )


_CONTEXTS: Dict[Tuple[str, int], GroupContext] = dict()


def _install_contexts(contexts: Dict[Tuple[str, int], GroupContext]):
    global _CONTEXTS
    _CONTEXTS = contexts


def evaluate_row(context: GroupContext, point: AlphaPoint, eps: float = EPS,
                 lemma31_q_max: int = LEMMA31_Q_MAX) -> dict:
    """ One report row for `point` within its (theta, k) group. """
    x, y, k = context.x, context.y, context.k
    alpha = point.alpha
    table = PhaseTable.build(x, y, k, alpha, powers=context.powers)
    mobius = mobius_expsum(x, y, k, alpha, context.segment, table=table)
    weyl = weyl_sum(x, y, k, alpha, table=table)
    arc = arcs.classify(alpha, context.params)
    a, q = arc.witness.a, arc.witness.q
    rhs = None
    if q <= lemma31_q_max:
        lam = PhaseReal(arc.witness.lam, alpha.bits, alpha.radius)
        rhs = lemma31_rhs(x, y, k, q, a, lam, eps)
    return {
        "theta": float(_exact(context.theta)),
        "k": k,
        "x": x,
        "y": y,
        "alpha": point.descriptor,
        "family": point.family,
        "label": arc.label,
        "a": a,
        "q": q,
        "lambda": float(arc.witness.lam),
        "abs_S": abs(mobius),
        "abs_S_over_y": abs(mobius) / y,
        "major_arc_term": major_arc_term(q, a, alpha, x, y, k),
        "lemma31_rhs": rhs,
        "weyl_abs": abs(weyl),
    }


def _evaluate_task(key: Tuple[str, int], point: AlphaPoint, eps: float, lemma31_q_max: int) -> dict:
    return evaluate_row(_CONTEXTS[key], point, eps, lemma31_q_max)


def build_context(spec: SweepSpec, theta: str, k: int, segment: Optional[ArithSegment] = None) -> GroupContext:
    x = int(spec.x)
    y = interval_length(x, theta)
    params = arcs.arc_params(x, y, k, spec.c1)
    if segment is None:
        segment = sieve_segment(x, y, ("mu",))
    return GroupContext(theta, int(k), x, y, params, segment, power_table(x, x + y, k))


@dataclass
class SweepReport:
    rows: List[dict]
    summary: dict
    columns: Tuple[str, ...] = REPORT_COLUMNS

    def __len__(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": self.rows, "summary": self.summary}

    def emit(self, fmt: str = "json", path: Optional[str] = None) -> str:
        return file_io.emit(self, fmt, path)


def _group_label(theta: str, k: int) -> str:
    return f"theta={theta},k={k}"


def summarize(rows: Sequence[dict]) -> dict:
    """
    Per (theta, k) group: max |S_k|/y per arc class, the largest
    |S_k| / lemma31_rhs seen, and (log y)^-A for A = 1, 2, 3. When a k
    is swept over several theta, log(max |S_k|/y) is also fit against
    log log y.
    """
    groups: Dict[str, dict] = dict()
    for row in rows:
        label = _group_label(repr(row["theta"]), row["k"])
        group = groups.setdefault(
            label,
            {
                "theta": row["theta"],
                "k": row["k"],
                "y": row["y"],
                "max_abs_S_over_y": {name: None for name in arcs.ARC_LABELS},
                "lemma31_constant": None,
            },
        )
        best = group["max_abs_S_over_y"]
        if best[row["label"]] is None or row["abs_S_over_y"] > best[row["label"]]:
            best[row["label"]] = row["abs_S_over_y"]
        if row["lemma31_rhs"]:
            ratio = row["abs_S"] / row["lemma31_rhs"]
            if group["lemma31_constant"] is None or ratio > group["lemma31_constant"]:
                group["lemma31_constant"] = ratio
    for group in groups.values():
        log_y = math.log(group["y"])
        group["log_decay_reference"] = {str(A): log_y**-A for A in DECAY_POWERS}
        values = [value for value in group["max_abs_S_over_y"].values() if value is not None]
        group["max_abs_S_over_y_all"] = max(values) if values else None
    fits = dict()
    for k in sorted({group["k"] for group in groups.values()}):
        points = sorted(
            (math.log(math.log(group["y"])), math.log(group["max_abs_S_over_y_all"]))
            for group in groups.values()
            if group["k"] == k and group["max_abs_S_over_y_all"]
        )
        if len({log_log for log_log, _ in points}) < 2:
            continue
        fit = linregress(*zip(*points))
        fits[str(k)] = {"slope": fit.slope, "intercept": fit.intercept, "rvalue": fit.rvalue}
    worst = max((row["abs_S_over_y"] for row in rows), default=0.0)
    return {
        "n_rows": len(rows),
        "groups": groups,
        "decay_fit": fits,
        "max_abs_S_over_y": worst,
        "trivial_bound_ok": worst <= 1.0 + TRIVIAL_SLACK,
    }


def run_sweep(spec: SweepSpec) -> SweepReport:
    """
    Evaluate every (theta, k, alpha) row of `spec`.

    Raises
    ------
    ResourceError
        If the estimated work exceeds spec.budget_terms; nothing is
        evaluated in that case
    """
    work = estimate_work(spec)
    logger.info(f"Sweep of {grid_size(spec)} phases over {len(spec.theta_list)} theta and {len(spec.k_list)} k: {work} terms.")
    if work > spec.budget_terms:
        raise ResourceError(f"Sweep needs {work} terms, over the budget of {spec.budget_terms}.")
    contexts, tasks, segments = dict(), list(), dict()
    for theta in spec.theta_list:
        for k in spec.k_list:
            y = interval_length(spec.x, theta)
            if y not in segments:
                segments[y] = sieve_segment(spec.x, y, ("mu",))
            context = build_context(spec, theta, k, segments[y])
            contexts[context.key] = context
            tasks.extend((context.key, point) for point in alpha_points(spec, context.x, context.y, context.k))
    if spec.workers > 1 and len(tasks) > 1:
        logger.info(f"Evaluating {len(tasks)} rows with {spec.workers} processes.")
        with Pool(spec.workers, initializer=_install_contexts, initargs=(contexts,)) as pool:
            results = [
                pool.apply_async(_evaluate_task, args=(key, point, spec.eps, spec.lemma31_q_max))
                for key, point in tasks
            ]
            rows = [result.get() for result in tqdm(results, disable=not spec.progress)]
    else:
        _install_contexts(contexts)
        rows = [
            _evaluate_task(key, point, spec.eps, spec.lemma31_q_max)
            for key, point in tqdm(tasks, disable=not spec.progress)
        ]
    return SweepReport(rows, summarize(rows))


def lemma38_dichotomy_report(x, y, k: int, alpha: PhaseReal, gamma, rho,
                             budget: int = BUDGET_TERMS) -> dict:
    """
    Compare the Weyl sum over (x, x + y] against both sides of the
    short-interval dichotomy: the minor-arc size y^(1 - rho), and, when
    some a/q with q <= y^(k rho) and |q alpha - a| <= x^(1-k) y^(k rho - 1)
    exists, the major-arc term for the smallest such q. Precondition
    failures are listed under "violations" rather than raised.
    """
    k = int(k)
    x_q, y_q = utils.to_mpq(x), utils.to_mpq(y)
    gamma, rho = utils.to_mpq(gamma), utils.to_mpq(rho)
    sigma = mpq(1, 2 * k * (k - 1))
    violations = list()
    if not 0 < rho <= sigma / gamma:
        violations.append("rho must satisfy 0 < rho <= sigma_k / gamma")
    with utils.high_precision(ARC_PREC_BITS):
        x_f, y_f = gmpy2.mpfr(x_q), gmpy2.mpfr(y_q)
        if y_f < x_f**gmpy2.mpfr(gamma / (2 * gamma - sigma - 1)):
            violations.append("y below x^(gamma / (2 gamma - sigma_k - 1))")
        minor_ref = y_f**gmpy2.mpfr(1 - rho)
        q_window = y_f**gmpy2.mpfr(k * rho)
        tolerance = x_f**(1 - k) * y_f**gmpy2.mpfr(k * rho - 1)
    record = {
        "x": float(x_q),
        "y": float(y_q),
        "k": k,
        "gamma": float(gamma),
        "rho": float(rho),
        "minor_ref": float(minor_ref),
        "q_window": float(q_window),
        "violations": violations,
    }
    try:
        weyl = abs(weyl_sum(x, y, k, alpha, budget))
        window = None
        for a, q in arcs.convergents(alpha, max(utils.floor(utils.to_mpq(q_window)), 1)):
            if q <= q_window and abs(q * alpha.value - a) <= tolerance:
                window = (a, q)
                break
    except PrecisionError as error:
        violations.append(str(error))
        record.update(weyl_abs=None, branch=None, a=None, q=None, major_arc_term=None,
                      ratio=None, dominant=None)
        return record
    record["weyl_abs"] = weyl
    if window is None:
        record.update(branch="minor", a=None, q=None, major_arc_term=None,
                      ratio=weyl / float(minor_ref), dominant="minor")
        return record
    a, q = window
    major = major_arc_term(q, a, alpha, x, y, k)
    record.update(
        branch="major",
        a=a,
        q=q,
        major_arc_term=major,
        ratio=weyl / major if major else None,
        dominant="major" if major >= float(minor_ref) else "minor",
    )
    return record


def _local_growth(records: List[dict]) -> None:
    """ d log(ratio) / d log log N between consecutive N, in place. """
    for previous, current in zip(records, records[1:]):
        span = math.log(math.log(current["N"])) - math.log(math.log(previous["N"]))
        if span > 0 and previous["ratio"] > 0 and current["ratio"] > 0:
            current["growth"] = math.log(current["ratio"] / previous["ratio"]) / span


def lemma37_ratio_report(N_list: Iterable[int], q_list: Iterable[int], j: int, k: int, c: int,
                         shifts: Iterable[int] = ()) -> List[dict]:
    """
    Exact left-hand sides of the two w_k summation inequalities against
    w_k(q) N, one record per (q, N) and, for each shift h, per (q, h, N).
    """
    N_list, shifts = sorted(int(N) for N in N_list), [int(h) for h in shifts]
    if any(N < 2 for N in N_list):
        raise ArgumentError("Every N must be >= 2.")
    records = list()
    for q in q_list:
        q = int(q)
        weight = w_k(q, k).value
        series = [(None, lambda N: wk_sum_lemma37(N, q, j, k, c))]
        series.extend((h, lambda N, h=h: wk_sum_lemma37_shifted(N, q, h, k, c)) for h in shifts)
        for h, lhs_of in series:
            block = list()
            for N in N_list:
                lhs = lhs_of(N)
                block.append({
                    "kind": "plain" if h is None else "shifted",
                    "q": q,
                    "h": h,
                    "N": N,
                    "lhs": lhs,
                    "wk_N": weight * N,
                    "ratio": lhs / (weight * N),
                    "log_N": math.log(N),
                    "growth": None,
                })
            _local_growth(block)
            records.extend(block)
    return records
