"""Ground-truth generators: planted-partition towns, controlled ego structures,
contract corpora with known indicator rates and whole synthetic countries
whose corruption outcomes depend linearly on the standardized network
measures and controls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional

import numpy as np

from .graph import SocialGraph, from_index_arrays
from .procurement import INDICATORS, AwardCriteria, ContractRecord, ProcedureKind
from .seeding import entity_rng
from .stats import CONTROL_COLUMNS

log = logging.getLogger(__name__)

# Location/scale of each control, taken from settlement descriptive statistics.
CONTROL_MOMENTS = {
    "income_per_capita": (823.57, 189.93),
    "log_population": (9.72, 0.89),
    "iwiw_use_rate": (0.33, 0.06),
    "mayor_victory_margin": (0.15, 0.14),
    "pct_hs_grads": (47.23, 10.22),
    "distance_to_capital_minutes": (114.0, 54.34),
    "share_inactive": (0.30, 0.04),
    "unemployment_rate": (0.06, 0.01),
    "share_over_60": (0.24, 0.03),
}
CPV_MARKETS = ("45000000", "45200000", "45230000", "34000000", "50000000",
               "71000000", "79000000", "90000000")
WINDOW_START = date(2006, 1, 1)
WINDOW_DAYS = 9 * 365


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class TownSpec:
    n_users: int
    k_blocks: int
    p_in: float
    p_out: float
    cross_town_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_users < 1 or self.k_blocks < 1 or self.k_blocks > self.n_users:
            raise SpecError(f"bad town size/blocks: {self}")
        if not 0 <= self.p_out <= self.p_in <= 1:
            raise SpecError(f"need 0 <= p_out <= p_in <= 1: {self}")
        if not 0 <= self.cross_town_rate <= 1:
            raise SpecError(f"cross_town_rate outside [0, 1]: {self}")


@dataclass
class TownDraw:
    graph: SocialGraph
    labels: np.ndarray
    n_intra_block: int
    n_inter_block: int


def _tri_decode(k: np.ndarray, n: int):
    """Index into the strict upper triangle of an n x n matrix -> (i, j)."""
    # row i starts at i*n - i*(i+1)/2
    i = (n - 2 - np.floor(np.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2 - 0.5)).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    j = k - start + i + 1
    return i, j


def block_labels(n: int, k: int) -> np.ndarray:
    return np.repeat(np.arange(k), np.diff(np.linspace(0, n, k + 1).round().astype(int)))


def sample_sbm(rng: np.random.Generator, labels: np.ndarray, p_in: float, p_out: float):
    """Edge arrays (u, v) of a stochastic block model; labels must be sorted."""
    k = int(labels.max()) + 1 if labels.size else 0
    starts = np.searchsorted(labels, np.arange(k))
    sizes = np.bincount(labels, minlength=k)
    us, vs, intra = [], [], 0
    for a in range(k):
        for b in range(a, k):
            p = p_in if a == b else p_out
            if a == b:
                M = sizes[a] * (sizes[a] - 1) // 2
            else:
                M = sizes[a] * sizes[b]
            if M == 0 or p == 0:
                continue
            cnt = int(rng.binomial(M, p))
            idx = rng.choice(M, size=cnt, replace=False) if cnt < M else np.arange(M)
            idx = np.sort(idx)
            if a == b:
                i, j = _tri_decode(idx, int(sizes[a]))
                intra += cnt
            else:
                i, j = idx // sizes[b], idx % sizes[b]
            us.append(i + starts[a])
            vs.append(j + starts[b])
    u = np.concatenate(us) if us else np.empty(0, np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, np.int64)
    return u.astype(np.int64), v.astype(np.int64), intra


def generate_town(spec: TownSpec, name: str = "T0") -> TownDraw:
    """One settlement drawn from a planted-partition model (no outside ties)."""
    spec.validate()
    rng = entity_rng(spec.seed, f"town:{name}")
    labels = block_labels(spec.n_users, spec.k_blocks)
    u, v, intra = sample_sbm(rng, labels, spec.p_in, spec.p_out)
    g = from_index_arrays(u, v, [f"{name}_u{i}" for i in range(spec.n_users)],
                          np.zeros(spec.n_users, np.int64), [name])
    return TownDraw(g, labels, intra, int(u.shape[0] - intra))


# -- ego fixtures -------------------------------------------------------------

def generate_ego_town(n_egos: int, frac_bridging: float = 0.5, clique_sizes=(4, 7), seed: int = 0,
                      town: str = "EGO", elsewhere: str = "ELSEWHERE") -> tuple[SocialGraph, np.ndarray]:
    """Town whose egos have either one clique of alters or two disjoint cliques.

    Alters live in another settlement, so only the egos count toward the
    town's diversity. Returns the graph and a boolean array marking bridging
    egos (expected ``Q_ego`` near 0.5; clique egos score 0).
    """
    rng = entity_rng(seed, f"egotown:{town}")
    bridging = np.zeros(n_egos, dtype=bool)
    bridging[rng.permutation(n_egos)[: int(round(frac_bridging * n_egos))]] = True
    ids, codes, us, vs = [], [], [], []
    for e in range(n_egos):
        ego = len(ids)
        ids.append(f"{town}_e{e}")
        codes.append(0)
        groups = 2 if bridging[e] else 1
        size = int(rng.integers(clique_sizes[0], clique_sizes[1] + 1))
        for _ in range(groups):
            members = list(range(len(ids), len(ids) + size))
            for m in members:
                ids.append(f"{town}_e{e}_a{m}")
                codes.append(1)
                us.append(ego)
                vs.append(m)
            for i, a in enumerate(members):
                for b in members[i + 1:]:
                    us.append(a)
                    vs.append(b)
    g = from_index_arrays(np.array(us), np.array(vs), ids, np.array(codes), [town, elsewhere])
    return g, bridging


# -- contracts ------------------------------------------------------------------

def make_contract(rng: np.random.Generator, contract_id: str, settlement, bits: dict,
                  market: str) -> ContractRecord:
    """A contract whose inputs realize the given indicator values.

    ``eligcrit`` is realized as a long (2900-3100) or short (900-1100)
    criteria text, which scores as intended whenever the market mixes both.
    """
    closed = bits["closedproc"]
    kind = (ProcedureKind.OPEN_CALL if not closed
            else (ProcedureKind.DIRECT_AWARD if rng.random() < 0.5 else ProcedureKind.INVITE_ONLY))
    n_bidders = 1 if bits["singlebid"] else int(rng.integers(2, 9))
    call = WINDOW_START + timedelta(days=int(rng.integers(0, WINDOW_DAYS - 200)))
    bt = bits["bidtime"]
    bid_days = int(rng.integers(1, 5) if bt == 1 else rng.integers(5, 16) if bt == 0.5 else rng.integers(16, 46))
    if bits["decidetime"]:
        gap = int(rng.integers(0, 6) if rng.random() < 0.5 else rng.integers(101, 151))
    else:
        gap = int(rng.integers(6, 101))
    deadline = call + timedelta(days=bid_days)
    length = int(rng.integers(2900, 3101) if bits["eligcrit"] else rng.integers(900, 1101))
    return ContractRecord(
        contract_id=contract_id, settlement_id=settlement, cpv_code=market, n_bidders=n_bidders,
        procedure_kind=kind, call_published=not bits["nocall"], call_date=call,
        submission_deadline=deadline, decision_date=deadline + timedelta(days=gap),
        eligibility_criteria_len=length,
        award_criteria=AwardCriteria.NON_PRICE if bits["nonprice"] else AwardCriteria.PRICE_ONLY,
        call_modified=bool(bits["callmod"]),
    )


def _mask(rng, c: ContractRecord, missing_rate: float) -> ContractRecord:
    if missing_rate <= 0:
        return c
    import dataclasses

    optional = ["n_bidders", "procedure_kind", "call_published", "call_date", "submission_deadline",
                "decision_date", "eligibility_criteria_len", "award_criteria", "call_modified"]
    drop = {k: None for k in optional if rng.random() < missing_rate}
    return dataclasses.replace(c, **drop)


def generate_contracts(n: int, rates: dict, seed: int = 0, settlements=("S0",), markets=CPV_MARKETS,
                       missing_rate: float = 0.0) -> list[ContractRecord]:
    """Corpus with independent per-indicator Bernoulli rates.

    ``rates`` maps indicator name to P(indicator = 1); ``bidtime_half`` may
    give P(bidtime = 0.5).
    """
    rng = entity_rng(seed, "contracts")
    out = []
    half = rates.get("bidtime_half", 0.0)
    for i in range(n):
        bits = {k: int(rng.random() < rates.get(k, 0.0)) for k in INDICATORS if k != "bidtime"}
        r = rng.random()
        bits["bidtime"] = 1 if r < rates.get("bidtime", 0.0) else (0.5 if r < rates.get("bidtime", 0.0) + half else 0)
        s = settlements[i % len(settlements)]
        c = make_contract(rng, f"c{i}", s, bits, markets[int(rng.integers(len(markets)))])
        out.append(_mask(rng, c, missing_rate))
    return out


# -- whole country ------------------------------------------------------------------

DEFAULT_THETA = {
    "mayor_victory_margin": 0.25,
    "distance_to_capital_minutes": 0.20,
    "income_per_capita": -0.15,
    "log_population": 0.10,
}


@dataclass
class CountrySpec:
    towns: list
    beta_F: float = 0.25
    beta_D: float = -0.55
    theta: dict = field(default_factory=lambda: dict(DEFAULT_THETA))
    noise_sd: float = 0.3
    csb_base: float = 0.59
    csb_scale: float = 0.12
    other_base: float = 0.26
    other_scale: float = 0.06
    log_contracts_mean: float = 4.8
    log_contracts_sd: float = 0.5
    min_contracts: int = 45
    tie_bundle: int = 3
    seed: int = 0
    with_contracts: bool = True

    @classmethod
    def random(cls, n_towns: int = 150, seed: int = 0, users=(60, 160), blocks=(2, 6),
               ratio=(2.0, 60.0), mean_degree=(8.0, 14.0), cross=(0.02, 0.6), **kw) -> "CountrySpec":
        """Towns with heterogeneous block structure and outside connectivity."""
        rng = entity_rng(seed, "country-spec")
        towns = []
        for t in range(n_towns):
            n = int(rng.integers(users[0], users[1] + 1))
            k = int(rng.integers(blocks[0], blocks[1] + 1))
            r = float(np.exp(rng.uniform(np.log(ratio[0]), np.log(ratio[1]))))
            deg = float(rng.uniform(*mean_degree))
            # mean degree = p_in*(n/k - 1) + p_out*(n - n/k)
            p_in = deg / ((n / k - 1) + (n - n / k) / r)
            p_in = min(p_in, 1.0)
            towns.append(TownSpec(n, k, p_in, p_in / r, float(rng.uniform(*cross)), seed))
        return cls(towns=towns, seed=seed, **kw)

    def validate(self) -> None:
        for t in self.towns:
            t.validate()
        for name in ("csb_base", "other_base"):
            if not 0 <= getattr(self, name) <= 1:
                raise SpecError(f"{name} must be a probability")
        unknown = set(self.theta) - set(CONTROL_COLUMNS)
        if unknown:
            raise SpecError(f"unknown controls in theta: {sorted(unknown)}")


@dataclass
class Country:
    graph: SocialGraph
    contracts: list
    controls: dict
    truth: dict
    planted: dict
    town_ids: list


def town_id(t: int) -> str:
    return f"S{t:04d}"


def generate_network(spec: CountrySpec) -> tuple[SocialGraph, dict]:
    """All towns plus cross-town tie bundles; returns graph and planted block labels."""
    names = [town_id(t) for t in range(len(spec.towns))]
    offsets = np.concatenate([[0], np.cumsum([t.n_users for t in spec.towns])])
    N = int(offsets[-1])
    us, vs, planted = [], [], {}
    for t, (ts, name) in enumerate(zip(spec.towns, names)):
        ts.validate()
        rng = entity_rng(spec.seed, f"town:{name}")
        labels = block_labels(ts.n_users, ts.k_blocks)
        u, v, _ = sample_sbm(rng, labels, ts.p_in, ts.p_out)
        us.append(u + offsets[t])
        vs.append(v + offsets[t])
        planted[name] = labels
    if len(spec.towns) > 1:
        for t, (ts, name) in enumerate(zip(spec.towns, names)):
            if ts.cross_town_rate == 0:
                continue
            rng = entity_rng(spec.seed, f"cross:{name}")
            egos = np.flatnonzero(rng.random(ts.n_users) < ts.cross_town_rate)
            for e in egos:
                other = int(rng.integers(len(spec.towns) - 1))
                other += other >= t
                lab = planted[names[other]]
                block = int(rng.integers(lab.max() + 1))
                members = np.flatnonzero(lab == block)
                pick = rng.choice(members, size=min(spec.tie_bundle, members.size), replace=False)
                us.append(np.full(pick.size, offsets[t] + e))
                vs.append(pick + offsets[other])
    codes = np.repeat(np.arange(len(names)), [t.n_users for t in spec.towns])
    ids = [f"{names[c]}_u{i - offsets[c]}" for i, c in zip(range(N), codes)]
    g = from_index_arrays(np.concatenate(us), np.concatenate(vs), ids, codes, names)
    return g, planted


def draw_controls(spec: CountrySpec, names: list, n_contracts: dict) -> dict:
    out = {}
    for name in names:
        rng = entity_rng(spec.seed, f"controls:{name}")
        row = {}
        for col in CONTROL_COLUMNS:
            if col == "log_n_contracts":
                row[col] = float(np.log(n_contracts[name]))
            elif col == "has_university":
                row[col] = float(rng.random() < 0.25)
            else:
                mu, sd = CONTROL_MOMENTS[col]
                x = rng.normal(mu, sd)
                if col in ("mayor_victory_margin",):
                    x = abs(x)
                row[col] = float(x)
        out[name] = row
    return out


def generate_country(spec: CountrySpec, measure_seed: Optional[int] = None, strict_diversity: bool = False,
                     crossing: str = "both") -> Country:
    """Synthetic country with a correctly specified linear corruption model.

    Networks are drawn first; their fragmentation and diversity are then
    measured with the library's own seeded routines (``measure_seed``,
    default ``spec.seed``), standardized together with the controls, and
    combined with the planted coefficients into latent outcomes

        y = beta_F z_F + beta_D z_D + theta . z_X + noise_sd * eps.

    Each town's closed-or-single-bid rate is ``csb_base + csb_scale * y_csb``
    and the rate of the six remaining indicators is
    ``other_base + other_scale * y_other``; contracts are drawn from those
    rates. ``planted`` reports the implied coefficients in outcome units.
    """
    from .community import all_fragmentation
    from .diversity import all_settlements
    spec.validate()
    measure_seed = spec.seed if measure_seed is None else measure_seed
    g, _ = generate_network(spec)
    names = list(g.settlement_ids)
    frag = all_fragmentation(g, measure_seed, crossing)
    div = all_settlements(g, measure_seed, strict=strict_diversity)
    n_contracts = {}
    for name in names:
        rng = entity_rng(spec.seed, f"ncontracts:{name}")
        n_contracts[name] = max(spec.min_contracts,
                                int(round(np.exp(rng.normal(spec.log_contracts_mean, spec.log_contracts_sd)))))
    controls = draw_controls(spec, names, n_contracts)

    usable = [s for s in names if np.isfinite(frag[s].F) and np.isfinite(div[s].D)]
    if len(usable) < len(names):
        log.warning("%d towns have undefined network measures", len(names) - len(usable))
    cols = ["F", "D"] + list(CONTROL_COLUMNS)
    raw = np.array([[frag[s].F, div[s].D] + [controls[s][c] for c in CONTROL_COLUMNS] for s in usable])
    sd = raw.std(axis=0, ddof=1) if len(usable) > 1 else np.zeros(raw.shape[1])
    flat = ~(sd > 0)
    if flat.any():
        # few towns can leave a column constant; it then carries no signal
        log.warning("constant columns in generated country: %s", [c for c, f in zip(cols, flat) if f])
    Z = np.where(flat, 0.0, (raw - raw.mean(axis=0)) / np.where(flat, 1.0, sd))
    coef = np.array([spec.beta_F, spec.beta_D] + [spec.theta.get(c, 0.0) for c in CONTROL_COLUMNS])
    signal = Z @ coef
    truth, contracts = {}, []
    clipped = 0
    for i, s in enumerate(usable):
        rng = entity_rng(spec.seed, f"outcome:{s}")
        y_csb = signal[i] + spec.noise_sd * rng.standard_normal()
        y_other = signal[i] + spec.noise_sd * rng.standard_normal()
        p = spec.csb_base + spec.csb_scale * y_csb
        q = spec.other_base + spec.other_scale * y_other
        if not (0 <= p <= 1 and 0 <= q <= 1):
            clipped += 1
        p, q = float(np.clip(p, 0, 1)), float(np.clip(q, 0, 1))
        truth[s] = {"F": frag[s].F, "D": div[s].D, "D_internal": np.nan, "z_F": Z[i, 0], "z_D": Z[i, 1],
                    "y_csb": y_csb, "y_other": y_other, "p_csb": p, "p_other": q,
                    "expected_cri": (1.15 * p + 6 * q) / 8, "n_contracts": n_contracts[s]}
        if spec.with_contracts:
            crng = entity_rng(spec.seed, f"contracts:{s}")
            for j in range(n_contracts[s]):
                csb = crng.random() < p
                closed = int(csb and crng.random() < 0.5)
                single = int(csb and (not closed or crng.random() < 0.3))
                bits = {"singlebid": single, "closedproc": closed}
                for k in ("nocall", "eligcrit", "decidetime", "nonprice", "callmod"):
                    bits[k] = int(crng.random() < q)
                bits["bidtime"] = 1 if crng.random() < q else 0
                market = CPV_MARKETS[int(crng.integers(len(CPV_MARKETS)))]
                contracts.append(make_contract(crng, f"{s}_c{j}", s, bits, market))
    if clipped:
        log.warning("%d towns had target rates clipped to [0, 1]", clipped)
    planted = {
        "beta_F": spec.beta_F, "beta_D": spec.beta_D, "theta": dict(spec.theta),
        "mean_csb": {"F": spec.csb_scale * spec.beta_F, "D": spec.csb_scale * spec.beta_D},
        "mean_cri": {"F": (1.15 * spec.csb_scale + 6 * spec.other_scale) / 8 * spec.beta_F,
                     "D": (1.15 * spec.csb_scale + 6 * spec.other_scale) / 8 * spec.beta_D},
        "clipped_towns": clipped, "measure_seed": measure_seed,
    }
    return Country(g, contracts, controls, truth, planted, names)
