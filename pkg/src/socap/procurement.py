"""Contract-level corruption-risk red flags and their settlement aggregates.

Eight elementary indicators are scored per contract. Two composites follow:
``csb`` (closed procedure or single bidder) and ``cri`` (the mean of all
eight). A missing input masks the indicators that depend on it.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Hashable, Iterable, Literal, Optional

import numpy as np

log = logging.getLogger(__name__)

INDICATORS = (
    "singlebid", "closedproc", "nocall", "eligcrit",
    "decidetime", "bidtime", "nonprice", "callmod",
)

MissingMode = Literal["impute0", "strict"]


class ProcedureKind(str, enum.Enum):
    OPEN_CALL = "open_call"
    DIRECT_AWARD = "direct_award"
    INVITE_ONLY = "invite_only"


class AwardCriteria(str, enum.Enum):
    PRICE_ONLY = "price_only"
    NON_PRICE = "non_price"


class InvalidContract(ValueError):
    pass


@dataclass(frozen=True)
class ContractRecord:
    contract_id: Hashable
    settlement_id: Hashable
    cpv_code: Optional[str] = None
    n_bidders: Optional[int] = None
    procedure_kind: Optional[ProcedureKind] = None
    call_published: Optional[bool] = None
    call_date: Optional[date] = None
    submission_deadline: Optional[date] = None
    decision_date: Optional[date] = None
    eligibility_criteria_len: Optional[int] = None
    award_criteria: Optional[AwardCriteria] = None
    call_modified: Optional[bool] = None

    def validate(self) -> None:
        """Raise :class:`InvalidContract` on negative counts or inverted dates."""
        if self.n_bidders is not None and self.n_bidders < 0:
            raise InvalidContract(f"{self.contract_id}: negative bidder count")
        dates = [("call_date", self.call_date), ("submission_deadline", self.submission_deadline),
                 ("decision_date", self.decision_date)]
        present = [(k, d) for k, d in dates if d is not None]
        for (k1, d1), (k2, d2) in zip(present, present[1:]):
            if d1 > d2:
                raise InvalidContract(f"{self.contract_id}: {k1} {d1} after {k2} {d2}")


@dataclass(frozen=True)
class DecisionWindow:
    """Day thresholds for the extreme-decision-period flag.

    Gaps of ``fast_days`` or fewer (``fast_inclusive``) and gaps above
    ``slow_days`` (or at it, with ``slow_inclusive``) are flagged.
    """

    fast_days: int = 5
    slow_days: int = 100
    fast_inclusive: bool = True
    slow_inclusive: bool = False

    def flag(self, gap: int) -> int:
        fast = gap <= self.fast_days if self.fast_inclusive else gap < self.fast_days
        slow = gap >= self.slow_days if self.slow_inclusive else gap > self.slow_days
        return int(fast or slow)


@dataclass(frozen=True)
class MarketStats:
    """Mean eligibility-criteria length per CPV market."""

    means: dict
    counts: dict
    cpv_digits: Optional[int] = None

    def market_of(self, cpv_code: Optional[str]):
        return market_key(cpv_code, self.cpv_digits)


def market_key(cpv_code: Optional[str], cpv_digits: Optional[int] = None):
    if cpv_code is None or cpv_code == "":
        return None
    code = str(cpv_code).strip()
    return code[:cpv_digits] if cpv_digits else code


@dataclass
class IndicatorVector:
    """Indicator values keyed by name; ``None`` marks an unavailable indicator."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, name: str):
        return self.values.get(name)

    @property
    def missing_mask(self) -> dict:
        return {k: self.values.get(k) is None for k in INDICATORS}

    def as_tuple(self) -> tuple:
        return tuple(self.values.get(k) for k in INDICATORS)

    @classmethod
    def from_sequence(cls, seq) -> "IndicatorVector":
        return cls(dict(zip(INDICATORS, seq)))


def market_averages(contracts: Iterable[ContractRecord], cpv_digits: Optional[int] = None) -> MarketStats:
    sums, counts = defaultdict(float), Counter()
    for c in contracts:
        key = market_key(c.cpv_code, cpv_digits)
        if key is None or c.eligibility_criteria_len is None:
            continue
        sums[key] += c.eligibility_criteria_len
        counts[key] += 1
    return MarketStats({k: sums[k] / counts[k] for k in counts}, dict(counts), cpv_digits)


def bidtime_score(days: int) -> float:
    if days < 5:
        return 1.0
    if days <= 15:
        return 0.5
    return 0.0


def elementary_indicators(c: ContractRecord, m: MarketStats,
                          window: DecisionWindow = DecisionWindow()) -> IndicatorVector:
    """Score one contract.

    Raises
    ------
    InvalidContract
        When the contract's dates are out of order.
    """
    c.validate()
    v = {}
    v["singlebid"] = None if c.n_bidders is None else int(c.n_bidders == 1)
    v["closedproc"] = (None if c.procedure_kind is None
                       else int(ProcedureKind(c.procedure_kind) != ProcedureKind.OPEN_CALL))
    v["nocall"] = None if c.call_published is None else int(not c.call_published)
    mean = m.means.get(m.market_of(c.cpv_code))
    v["eligcrit"] = (None if c.eligibility_criteria_len is None or mean is None
                     else int(c.eligibility_criteria_len > mean))
    if c.decision_date is None or c.submission_deadline is None:
        v["decidetime"] = None
    else:
        v["decidetime"] = window.flag((c.decision_date - c.submission_deadline).days)
    if c.call_date is None or c.submission_deadline is None:
        v["bidtime"] = None
    else:
        v["bidtime"] = bidtime_score((c.submission_deadline - c.call_date).days)
    v["nonprice"] = (None if c.award_criteria is None
                     else int(AwardCriteria(c.award_criteria) == AwardCriteria.NON_PRICE))
    v["callmod"] = None if c.call_modified is None else int(bool(c.call_modified))
    return IndicatorVector(v)


def c_csb(v: IndicatorVector) -> Optional[int]:
    """Closed procedure or single bidder; masked if either input is."""
    a, b = v["singlebid"], v["closedproc"]
    if a is None or b is None:
        return None
    return max(a, b)


def cri(v: IndicatorVector, mode: MissingMode = "impute0") -> Optional[float]:
    """Mean of the eight indicators.

    ``impute0`` counts masked indicators as 0 over a fixed denominator of 8;
    ``strict`` averages the available ones. All masked gives ``None``.
    """
    present = [x for x in v.as_tuple() if x is not None]
    if not present:
        return None
    if mode == "impute0":
        return sum(present) / len(INDICATORS)
    if mode == "strict":
        return sum(present) / len(present)
    raise ValueError(f"unknown missing-data mode {mode!r}")


@dataclass(frozen=True)
class ScoredContract:
    record: ContractRecord
    indicators: IndicatorVector
    csb: Optional[int]
    cri_impute0: Optional[float]
    cri_strict: Optional[float]

    def cri(self, mode: MissingMode = "impute0"):
        return self.cri_impute0 if mode == "impute0" else self.cri_strict


@dataclass(frozen=True)
class SettlementRisk:
    settlement_id: Hashable
    mean_csb: float
    mean_cri: float
    n_contracts: int
    mean_cri_impute0: float = np.nan
    mean_cri_strict: float = np.nan


def score_contracts(contracts: list[ContractRecord], cpv_digits: Optional[int] = None,
                    window: DecisionWindow = DecisionWindow()):
    """Two-pass scoring: market means, then per-contract indicators.

    Returns
    -------
    scored : list of ScoredContract
    invalid : list of (contract_id, reason)
    """
    valid, invalid = [], []
    for c in contracts:
        try:
            c.validate()
        except InvalidContract as exc:
            log.warning("INVALID_CONTRACT %s", exc)
            invalid.append((c.contract_id, str(exc)))
        else:
            valid.append(c)
    m = market_averages(valid, cpv_digits)
    scored = []
    for c in valid:
        v = elementary_indicators(c, m, window)
        scored.append(ScoredContract(c, v, c_csb(v), cri(v, "impute0"), cri(v, "strict")))
    return scored, invalid


def _mean(xs) -> float:
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else np.nan


def aggregate_settlement(scored: list[ScoredContract], mode: MissingMode = "impute0") -> SettlementRisk:
    if not scored:
        raise ValueError("no scored contracts to aggregate")
    sid = scored[0].record.settlement_id
    imp = _mean(s.cri_impute0 for s in scored)
    strict = _mean(s.cri_strict for s in scored)
    return SettlementRisk(sid, _mean(s.csb for s in scored), imp if mode == "impute0" else strict,
                          len(scored), imp, strict)


def aggregate_all(scored: list[ScoredContract], mode: MissingMode = "impute0") -> dict:
    groups = defaultdict(list)
    for s in scored:
        groups[s.record.settlement_id].append(s)
    return {sid: aggregate_settlement(g, mode) for sid, g in groups.items()}


def eligibility_filter(contracts: Iterable[ContractRecord], years: int = 9, min_rate: float = 5.0,
                       excluded: Iterable = ()) -> set:
    """Settlements issuing at least ``min_rate`` contracts per year on average."""
    if years < 1:
        raise ValueError("years must be at least 1")
    counts = Counter(c.settlement_id for c in contracts)
    excluded = set(excluded)
    return {s for s, n in counts.items() if n / years >= min_rate and s not in excluded}
