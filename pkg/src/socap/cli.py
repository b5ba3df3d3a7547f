"""Command-line pipeline: ingest, measures, score, regress, compare, synth.

Stages communicate through files in the output directory, so each command
can run alone or as part of ``pipeline``. Every dropped node, contract or
settlement is written to the calling stage's ``audit_<stage>.csv``.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import math
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io, procurement, stats, synth
from .community import all_fragmentation
from .diversity import all_settlements
from .graph import IngestError, SocialGraph, from_index_arrays

log = logging.getLogger("socap")

STAGES = ("ingest", "score", "measures", "regress", "compare")


class FatalError(RuntimeError):
    pass


def _list(value) -> tuple:
    if value is None or value == "":
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(x.strip() for x in str(value).split(",") if x.strip())


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


@dataclass
class RunConfig:
    edges: Optional[str] = None
    attribution: Optional[str] = None
    contracts: Optional[str] = None
    controls: Optional[str] = None
    groups: Optional[str] = None
    out: str = "out"
    seed: int = 0
    threads: Optional[int] = None
    header: bool = True
    delimiter: str = ","
    max_degree: int = 10_000
    foreign: tuple = ()
    max_error_rate: float = 0.01
    years: int = 9
    min_rate: float = 5.0
    exclude: tuple = ()
    missing_mode: str = "impute0"
    standardize_dv: bool = False
    cpv_digits: Optional[int] = None
    crossing: str = "both"
    strict_diversity: bool = False
    grid_min: float = -2.0
    grid_max: float = 2.0
    grid_n: int = 41
    level: float = 0.90
    alpha: float = 0.05
    bins: int = 20
    n_towns: int = 150

    _casts = {
        "seed": int, "threads": int, "header": _bool, "max_degree": int, "foreign": _list,
        "max_error_rate": float, "years": int, "min_rate": float, "exclude": _list,
        "standardize_dv": _bool, "cpv_digits": int, "strict_diversity": _bool, "grid_min": float,
        "grid_max": float, "grid_n": int, "level": float, "alpha": float, "bins": int, "n_towns": int,
    }

    @classmethod
    def load(cls, path=None, overrides: Optional[dict] = None) -> "RunConfig":
        """Read ``[run]`` from an INI file, then apply non-None ``overrides``.

        Relative input paths in the file resolve against the file's directory.
        """
        values = {}
        if path:
            cp = configparser.ConfigParser()
            if not cp.read(path, encoding="utf-8"):
                raise FatalError(f"cannot read config {path}")
            section = cp["run"] if cp.has_section("run") else cp.defaults()
            base = Path(path).resolve().parent
            for k, v in section.items():
                if k not in cls.__dataclass_fields__ or k.startswith("_"):
                    raise FatalError(f"unknown config key {k!r}")
                if k in ("edges", "attribution", "contracts", "controls", "groups", "out") and v:
                    v = str((base / v).resolve()) if not Path(v).is_absolute() else v
                values[k] = v
        for k, v in (overrides or {}).items():
            if v is not None:
                values[k] = v
        for k, cast in cls._casts.items():
            if k not in values:
                continue
            if values[k] is None or values[k] == "":
                values.pop(k)
            else:
                values[k] = cast(values[k])
        cfg = cls(**values)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.missing_mode not in ("impute0", "strict"):
            raise FatalError(f"missing_mode must be impute0 or strict, got {self.missing_mode!r}")
        if self.crossing not in ("both", "half"):
            raise FatalError(f"crossing must be both or half, got {self.crossing!r}")
        if self.max_degree <= 0 or self.min_rate <= 0 or self.years < 1:
            raise FatalError("thresholds must be positive")

    def require(self, *names) -> None:
        for n in names:
            p = getattr(self, n)
            if not p:
                raise FatalError(f"config needs {n!r}")
            if not Path(p).exists():
                raise FatalError(f"{n} file {p} does not exist")

    @property
    def outdir(self) -> Path:
        return Path(self.out)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if not f.name.startswith("_")}


class Audit:
    """Collects (entity_type, entity_id, reason) for one stage."""

    def __init__(self, stage: str):
        self.stage = stage
        self.rows = []

    def drop(self, kind: str, entity, reason: str, detail: str = "") -> None:
        self.rows.append((kind, entity, reason, detail))
        log.info("%s %s %s %s", reason, kind, entity, detail)

    def write(self, outdir: Path) -> Path:
        return io.write_table(outdir / f"audit_{self.stage}.csv", ["entity_type", "entity_id", "reason", "detail"],
                              self.rows)

    def counts(self) -> dict:
        return dict(sorted(Counter(r[2] for r in self.rows).items()))


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)

    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return str(o)

    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=default, allow_nan=True) + "\n",
                    encoding="utf-8")


# -- ingest ---------------------------------------------------------------------

def clean_graph(g: SocialGraph, max_degree: int, foreign=(), audit: Optional[Audit] = None):
    """Drop users located abroad and users with more than ``max_degree`` ties.

    Degrees are taken on the deduplicated input graph. A user in both
    categories is reported once, as foreign.
    """
    foreign = set(foreign)
    deg = g.degrees()
    is_foreign = np.array([g.settlement_ids[c] in foreign for c in g.settlement_codes], dtype=bool)
    too_many = (deg > max_degree) & ~is_foreign
    if audit is not None:
        for i in np.flatnonzero(is_foreign):
            audit.drop("node", g.node_ids[i], "DROP_FOREIGN", g.settlement_ids[g.settlement_codes[i]])
        for i in np.flatnonzero(too_many):
            audit.drop("node", g.node_ids[i], "DROP_SUPERDEGREE", f"degree={deg[i]}")
    keep = np.flatnonzero(~(is_foreign | too_many))
    remap = np.full(g.n_nodes, -1, np.int64)
    remap[keep] = np.arange(keep.size)
    e = g.edge_array()
    e = remap[e]
    e = e[(e[:, 0] >= 0) & (e[:, 1] >= 0)]
    # settlement order of first appearance among kept nodes
    first = {}
    for c in g.settlement_codes[keep]:
        first.setdefault(int(c), len(first))
    order = sorted(first, key=first.get)
    lut = {c: i for i, c in enumerate(order)}
    codes = np.array([lut[int(c)] for c in g.settlement_codes[keep]], dtype=np.int64)
    cleaned = from_index_arrays(e[:, 0], e[:, 1], [g.node_ids[i] for i in keep], codes,
                                [g.settlement_ids[c] for c in order])
    report = {"input_nodes": g.n_nodes, "input_edges": g.edge_count(),
              "dropped_foreign": int(is_foreign.sum()), "dropped_superdegree": int(too_many.sum()),
              "nodes": cleaned.n_nodes, "edges": cleaned.edge_count(), "max_degree": max_degree}
    return cleaned, report


def load_raw_graph(cfg: RunConfig, audit: Audit) -> SocialGraph:
    cfg.require("edges", "attribution")
    pairs, errs = io.read_pairs(cfg.edges, cfg.delimiter, cfg.header, cfg.max_error_rate, "edges")
    for line, reason, text in errs:
        audit.drop("edge_row", f"{cfg.edges}:{line}", reason, text)
    attr_pairs, errs = io.read_pairs(cfg.attribution, cfg.delimiter, cfg.header, cfg.max_error_rate,
                                     "attribution")
    for line, reason, text in errs:
        audit.drop("attribution_row", f"{cfg.attribution}:{line}", reason, text)
    attribution = {}
    for node, s in attr_pairs:
        if node in attribution and attribution[node] != s:
            raise IngestError(f"node {node!r} attributed to both {attribution[node]!r} and {s!r}")
        attribution[node] = s
    return io.graph_from_pairs(pairs, attribution)


def cmd_ingest(cfg: RunConfig) -> dict:
    audit = Audit("ingest")
    g = load_raw_graph(cfg, audit)
    cleaned, report = clean_graph(g, cfg.max_degree, cfg.foreign, audit)
    out = cfg.outdir
    io.write_graph(cleaned, out / "graph_edges.csv", out / "graph_attribution.csv")
    report["malformed_rows"] = audit.counts().get("MALFORMED_ROW", 0)
    _write_json(out / "cleaning_report.json", report)
    audit.write(out)
    log.info("ingest: %s", report)
    return report


def load_clean_graph(cfg: RunConfig) -> SocialGraph:
    e, a = cfg.outdir / "graph_edges.csv", cfg.outdir / "graph_attribution.csv"
    if not (e.exists() and a.exists()):
        cmd_ingest(cfg)
    pairs, _ = io.read_pairs(e, ",", True, 0.0, "edges")
    attr, _ = io.read_pairs(a, ",", True, 0.0, "attribution")
    return io.graph_from_pairs(pairs, dict(attr))


# -- score ------------------------------------------------------------------------

RISK_COLUMNS = ("settlement_id", "mean_csb", "mean_cri", "mean_cri_impute0", "mean_cri_strict", "n_contracts")


def _load_contracts(cfg: RunConfig, audit: Optional[Audit]):
    cfg.require("contracts")
    contracts, errs = io.read_contracts(cfg.contracts, cfg.delimiter, cfg.max_error_rate)
    if audit is not None:
        for line, reason, text in errs:
            audit.drop("contract_row", f"{cfg.contracts}:{line}", reason, text)
    return contracts


def eligible_settlements(cfg: RunConfig, contracts) -> set:
    return procurement.eligibility_filter(contracts, cfg.years, cfg.min_rate, cfg.exclude)


def cmd_score(cfg: RunConfig) -> dict:
    audit = Audit("score")
    contracts = _load_contracts(cfg, audit)
    scored, invalid = procurement.score_contracts(contracts, cfg.cpv_digits)
    for cid, reason in invalid:
        audit.drop("contract", cid, "INVALID_CONTRACT", reason)
    out = cfg.outdir
    cols = ["contract_id", "settlement_id"] + [f"C_{k}" for k in procurement.INDICATORS] + [
        "C_csb", "CRI_impute0", "CRI_strict"]
    io.write_table(out / "contracts_scored.csv", cols,
                   ([s.record.contract_id, s.record.settlement_id] + list(s.indicators.as_tuple())
                    + [s.csb, s.cri_impute0, s.cri_strict] for s in scored))
    eligible = eligible_settlements(cfg, contracts)
    risk = procurement.aggregate_all(scored, cfg.missing_mode)
    counts = Counter(c.settlement_id for c in contracts)
    for s in sorted(counts, key=str):
        if s in set(cfg.exclude):
            audit.drop("settlement", s, "EXCLUDED")
        elif s not in eligible:
            audit.drop("settlement", s, "INELIGIBLE", f"{counts[s]} contracts over {cfg.years} years")
        elif s not in risk:
            audit.drop("settlement", s, "NO_VALID_CONTRACTS")
    kept = [risk[s] for s in sorted(risk, key=str) if s in eligible]
    io.write_table(out / "settlement_risk.csv", RISK_COLUMNS,
                   ([r.settlement_id, r.mean_csb, r.mean_cri, r.mean_cri_impute0, r.mean_cri_strict,
                     r.n_contracts] for r in kept),
                   {"mean_csb": "float", "mean_cri": "float", "mean_cri_impute0": "float",
                    "mean_cri_strict": "float", "n_contracts": "integer"})
    audit.write(out)
    summary = {"contracts": len(contracts), "scored": len(scored), "invalid": len(invalid),
               "settlements": len(kept), "missing_mode": cfg.missing_mode}
    log.info("score: %s", summary)
    return summary


# -- measures ----------------------------------------------------------------------

FRAG_COLUMNS = ("settlement_id", "n_nodes", "n_edges", "K", "Q", "Q_max", "F", "degenerate_flag")
DIV_COLUMNS = ("settlement_id", "D", "D_internal", "n_included", "n_excluded")


def measure_targets(cfg: RunConfig, g: SocialGraph) -> list:
    risk = cfg.outdir / "settlement_risk.csv"
    if risk.exists():
        return [r["settlement_id"] for r in io.read_table(risk)]
    if cfg.contracts:
        return sorted(eligible_settlements(cfg, _load_contracts(cfg, None)), key=str)
    return list(g.settlement_ids)


def compute_measures(g: SocialGraph, settlements: list, seed: int, crossing: str = "both",
                     strict: bool = False):
    present = [s for s in settlements if s in set(g.settlement_ids)]
    frag = all_fragmentation(g, seed, crossing, present)
    div = all_settlements(g, seed, strict, settlements=present)
    div_int = all_settlements(g, seed, strict, internal_only=True, settlements=present)
    return frag, div, div_int


def cmd_measures(cfg: RunConfig) -> dict:
    g = load_clean_graph(cfg)
    targets = measure_targets(cfg, g)
    frag, div, div_int = compute_measures(g, targets, cfg.seed, cfg.crossing, cfg.strict_diversity)
    frows, drows = [], []
    for s in targets:
        f = frag.get(s)
        if f is None:
            frows.append([s, 0, 0, 0, None, None, None, "undefined"])
        else:
            flag = "undefined" if f.undefined else ("degenerate" if f.degenerate else "")
            frows.append([s, f.n_nodes, f.L, f.K, f.Q, f.Q_max, f.F, flag])
        d, di = div.get(s), div_int.get(s)
        drows.append([s, d.D if d else None, di.D if di else None,
                      d.n_users_included if d else 0, d.n_users_excluded if d else 0])
    out = cfg.outdir
    io.write_table(out / "fragmentation.csv", FRAG_COLUMNS, frows,
                   {"n_nodes": "integer", "n_edges": "integer", "K": "integer", "Q": "float",
                    "Q_max": "float", "F": "float", "degenerate_flag": "enum:|degenerate|undefined"})
    io.write_table(out / "diversity.csv", DIV_COLUMNS, drows,
                   {"D": "float", "D_internal": "float", "n_included": "integer", "n_excluded": "integer"})
    summary = {"settlements": len(targets), "degenerate": sum(r[7] == "degenerate" for r in frows),
               "undefined": sum(r[7] == "undefined" for r in frows)}
    log.info("measures: %s", summary)
    return summary


# -- regress ------------------------------------------------------------------------

def join_rows(cfg: RunConfig, audit: Audit) -> list:
    out = cfg.outdir
    cfg.require("controls")
    risk = {r["settlement_id"]: r for r in io.read_table(out / "settlement_risk.csv")}
    frag = {r["settlement_id"]: r for r in io.read_table(out / "fragmentation.csv")}
    div = {r["settlement_id"]: r for r in io.read_table(out / "diversity.csv")}
    controls = io.read_numeric_table(cfg.controls)
    # settlements the score stage already dropped are audited there, not again here
    scored_audit = out / "audit_score.csv"
    dropped = ({r["entity_id"] for r in io.read_table(scored_audit) if r["entity_type"] == "settlement"}
               if scored_audit.exists() else set())
    rows = []
    universe = sorted((set(risk) | set(frag) | set(div) | set(controls)) - (dropped - set(risk)), key=str)
    for s in universe:
        if s not in risk:
            audit.drop("settlement", s, "JOIN_NO_RISK")
            continue
        f = frag.get(s, {}).get("F", "")
        d = div.get(s, {}).get("D", "")
        if f == "":
            audit.drop("settlement", s, "JOIN_NO_FRAGMENTATION")
            continue
        if d == "":
            audit.drop("settlement", s, "JOIN_NO_DIVERSITY")
            continue
        if s not in controls:
            audit.drop("settlement", s, "JOIN_NO_CONTROLS")
            continue
        ctrl = dict(controls[s])
        if "log_n_contracts" not in ctrl or math.isnan(ctrl["log_n_contracts"]):
            ctrl["log_n_contracts"] = math.log(float(risk[s]["n_contracts"]))
        missing = [c for c in stats.CONTROL_COLUMNS if c not in ctrl or math.isnan(ctrl[c])]
        if missing:
            audit.drop("settlement", s, "JOIN_MISSING_CONTROL", ";".join(missing))
            continue
        r = risk[s]
        if r["mean_csb"] == "" or r["mean_cri"] == "":
            audit.drop("settlement", s, "JOIN_NO_RISK", "masked outcome")
            continue
        rows.append(stats.SettlementRow(s, float(r["mean_csb"]), float(r["mean_cri"]), float(f), float(d),
                                        {c: ctrl[c] for c in stats.CONTROL_COLUMNS}))
    return rows


LABELS = {
    "F": "Fragmentation", "D": "Diversity", "const": "Constant",
    "income_per_capita": "Income/capita", "log_n_contracts": "N contracts (log)",
    "log_population": "Population (log)", "iwiw_use_rate": "Rate of network use",
    "mayor_victory_margin": "Mayor victory margin", "pct_hs_grads": "% high school grads",
    "distance_to_capital_minutes": "Distance to capital", "share_inactive": "Share of pop. inactive",
    "unemployment_rate": "Unemployment rate", "share_over_60": "% population 60+",
    "has_university": "Has university",
}


def regress_rows(rows: list, cfg: RunConfig) -> dict:
    """Model suite, diagnostics and marginal effects for joined rows."""
    suite = stats.model_suite(rows, standardize_dv=cfg.standardize_dv)
    features = list(stats.NETWORK_COLUMNS) + list(stats.CONTROL_COLUMNS)
    Z, _, _ = stats.standardize(stats.design(rows, features), features)
    result = {"suite": suite, "vif": stats.vif(Z, features), "anova": {}, "marginal": {}}
    grid = np.linspace(cfg.grid_min, cfg.grid_max, cfg.grid_n)
    for dv, fits in suite.fits.items():
        result["anova"][dv] = stats.anova_f_importance(fits["full"], cfg.alpha)
        result["marginal"][dv] = {f: stats.marginal_effects(fits["full"], f, grid, cfg.level)
                                  for f in stats.NETWORK_COLUMNS}
    return result


def cmd_regress(cfg: RunConfig) -> dict:
    audit = Audit("regress")
    rows = join_rows(cfg, audit)
    res = regress_rows(rows, cfg)
    out = cfg.outdir
    suite = res["suite"]
    summary = {"n": len(rows), "standardize_dv": cfg.standardize_dv, "models": {}}
    for dv, fits in suite.fits.items():
        main = {"base": fits["base"], "full": fits["full"]}
        (out / f"regression_{dv}.txt").write_text(
            stats.render_table(main, f"Dependent variable: {dv}", LABELS), encoding="utf-8")
        (out / f"stepwise_{dv}.txt").write_text(
            stats.render_table(fits, f"Stepwise models, dependent variable: {dv}", LABELS), encoding="utf-8")
        base_adj = fits["base"].rsquared_adj
        summary["models"][dv] = {
            name: dict(f.summary_dict(), adj_r2_delta_vs_base=f.rsquared_adj - base_adj)
            for name, f in fits.items()}
        io.write_table(out / f"anova_{dv}.csv", ["feature", "F", "p", "significant"],
                       ([r.name, r.F, r.p, r.significant] for r in res["anova"][dv]))
        for feat, me in res["marginal"][dv].items():
            io.write_table(out / f"marginal_{dv}_{feat}.csv", ["grid", "prediction", "se", "lower", "upper"],
                           zip(me.grid, me.prediction, me.se, me.lower, me.upper))
    _write_json(out / "regression.json", summary)
    io.write_table(out / "vif.csv", ["predictor", "VIF"], res["vif"].items(), {"VIF": "float"})
    audit.write(out)
    log.info("regress: n=%d", len(rows))
    return summary


# -- compare --------------------------------------------------------------------------

def read_groups(path) -> dict:
    pairs, _ = io.read_pairs(path, ",", True, 0.0, "groups")
    return dict(pairs)


def compare_groups(risk: dict, groups: dict, measures=("mean_csb", "mean_cri"), bins: int = 20,
                   seed: int = 0, power_reps: int = 1000) -> dict:
    """Mann-Whitney U between the two labels of ``groups`` for each measure.

    ``risk`` maps settlement to a dict of measure values. Each test also
    reports the simulated power to detect the observed mean gap at the
    observed group sizes and pooled spread.
    """
    unknown = [s for s in groups if s not in risk]
    if unknown:
        raise FatalError(f"group file references unknown settlement(s): {', '.join(map(str, unknown))}")
    labels = sorted(set(groups.values()))
    if len(labels) != 2:
        raise FatalError(f"group file must have exactly two labels, found {labels}")
    members = {lab: [s for s in groups if groups[s] == lab] for lab in labels}
    for lab, m in members.items():
        if len(m) < 2:
            raise FatalError(f"group {lab!r} has fewer than 2 members")
    out = {"groups": {lab: len(m) for lab, m in members.items()}, "tests": {}, "histograms": {}}
    edges = np.linspace(0, 1, bins + 1)
    for meas in measures:
        a = np.array([float(risk[s][meas]) for s in members[labels[0]]])
        b = np.array([float(risk[s][meas]) for s in members[labels[1]]])
        r = stats.mann_whitney_u(a, b)
        out["tests"][meas] = {"U": r.U, "p": r.p, "n1": r.n1, "n2": r.n2, "method": r.method,
                              "group1": labels[0], "group2": labels[1],
                              "mean1": float(a.mean()), "mean2": float(b.mean()),
                              "median1": float(np.median(a)), "median2": float(np.median(b))}
        pooled = math.sqrt(((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2))
        out["tests"][meas]["power"] = (stats.mwu_power(a.size, b.size, float(a.mean() - b.mean()), pooled,
                                                       reps=power_reps, seed=seed)
                                          if np.ptp(np.concatenate([a, b])) > 0 else math.nan)
        lo, hi = min(a.min(), b.min(), 0.0), max(a.max(), b.max(), 1.0)
        e = edges if (lo, hi) == (0.0, 1.0) else np.linspace(lo, hi, bins + 1)
        out["histograms"][meas] = {"edges": e.tolist(), labels[0]: np.histogram(a, e)[0].tolist(),
                                   labels[1]: np.histogram(b, e)[0].tolist()}
    return out


def cmd_compare(cfg: RunConfig, group_file=None) -> dict:
    group_file = group_file or cfg.groups
    if not group_file or not Path(group_file).exists():
        raise FatalError(f"group file {group_file!r} not found")
    risk = {r["settlement_id"]: r for r in io.read_table(cfg.outdir / "settlement_risk.csv")}
    res = compare_groups(risk, read_groups(group_file), bins=cfg.bins, seed=cfg.seed)
    out = cfg.outdir
    _write_json(out / "compare.json", {"groups": res["groups"], "tests": res["tests"]})
    for meas, h in res["histograms"].items():
        labs = [k for k in h if k != "edges"]
        e = h["edges"]
        io.write_table(out / f"compare_hist_{meas}.csv", ["bin_lo", "bin_hi"] + labs,
                       ([e[i], e[i + 1]] + [h[lab][i] for lab in labs] for i in range(len(e) - 1)))
    log.info("compare: %s", res["tests"])
    return res


# -- synth --------------------------------------------------------------------------------

def write_country(country: "synth.Country", outdir: Path, n_scandal: int = 35, seed: int = 0) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    io.write_graph(country.graph, outdir / "edges.csv", outdir / "attribution.csv")
    io.write_contracts(outdir / "contracts.csv", country.contracts)
    io.write_table(outdir / "controls.csv", ["settlement_id"] + list(stats.CONTROL_COLUMNS),
                   ([s] + [country.controls[s][c] for c in stats.CONTROL_COLUMNS] for s in country.town_ids))
    truth_cols = ["F", "D", "z_F", "z_D", "y_csb", "y_other", "p_csb", "p_other", "expected_cri", "n_contracts"]
    io.write_table(outdir / "ground_truth.csv", ["settlement_id"] + truth_cols,
                   ([s] + [country.truth[s][c] for c in truth_cols] for s in country.truth))
    _write_json(outdir / "ground_truth.json", country.planted)
    rng = synth.entity_rng(seed, "groups")
    towns = list(country.truth)
    flagged = set(rng.choice(len(towns), size=min(n_scandal, max(len(towns) - 2, 0)), replace=False).tolist())
    io.write_table(outdir / "groups.csv", ["settlement_id", "group"],
                   ([s, "scandal" if i in flagged else "other"] for i, s in enumerate(towns)))
    ini = outdir / "run.ini"
    ini.write_text("[run]\nedges = edges.csv\nattribution = attribution.csv\ncontracts = contracts.csv\n"
                   "controls = controls.csv\ngroups = groups.csv\nheader = true\n"
                   f"seed = {country.planted['measure_seed']}\nout = results\n", encoding="utf-8")
    return ini


def cmd_synth(cfg: RunConfig) -> dict:
    spec = synth.CountrySpec.random(cfg.n_towns, seed=cfg.seed)
    country = synth.generate_country(spec, measure_seed=cfg.seed, strict_diversity=cfg.strict_diversity,
                                     crossing=cfg.crossing)
    ini = write_country(country, cfg.outdir, seed=cfg.seed)
    summary = {"towns": len(country.town_ids), "nodes": country.graph.n_nodes,
               "edges": country.graph.edge_count(), "contracts": len(country.contracts), "config": str(ini)}
    log.info("synth: %s", summary)
    return summary


def cmd_pipeline(cfg: RunConfig) -> dict:
    out = {"ingest": cmd_ingest(cfg), "score": cmd_score(cfg), "measures": cmd_measures(cfg),
           "regress": cmd_regress(cfg)}
    if cfg.groups:
        out["compare"] = cmd_compare(cfg)["tests"]
    return out


COMMANDS = {
    "ingest": cmd_ingest, "measures": cmd_measures, "score": cmd_score, "regress": cmd_regress,
    "compare": cmd_compare, "synth": cmd_synth, "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="socap", description="Settlement social capital and procurement risk.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--missing-mode", choices=("impute0", "strict"), dest="missing_mode")
        sp.add_argument("--standardize-dv", action="store_const", const=True, dest="standardize_dv")
        sp.add_argument("--out")
        sp.add_argument("--edges")
        sp.add_argument("--attribution")
        sp.add_argument("--contracts")
        sp.add_argument("--controls")
        sp.add_argument("--groups")
        sp.add_argument("--max-degree", type=int, dest="max_degree")
        sp.add_argument("--foreign", help="comma-separated settlement ids located abroad")
        sp.add_argument("--exclude", help="comma-separated settlement ids to leave out")
        sp.add_argument("--no-header", action="store_const", const=False, dest="header")
        if name == "synth":
            sp.add_argument("--n-towns", type=int, dest="n_towns")
        if name == "compare":
            sp.add_argument("group_file", nargs="?")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s %(message)s")
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose", "group_file")}
    try:
        cfg = RunConfig.load(args.config, overrides)
        if cfg.threads:
            import numba

            numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
        if args.command == "compare":
            result = cmd_compare(cfg, args.group_file)
            print(json.dumps(result["tests"], indent=2, sort_keys=True))
        else:
            print(json.dumps(COMMANDS[args.command](cfg), indent=2, sort_keys=True, default=str))
    except (FatalError, IngestError, ValueError, np.linalg.LinAlgError) as exc:
        log.error("FATAL %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
