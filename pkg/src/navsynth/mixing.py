"""Mixing-of-flows analysis: adjusted mutual information between incoming and outgoing traffic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .sessions import SequenceCorpus
from .stats import rng_stream, spearman

EXACT_EMI_TOTAL_LIMIT = 5000  # above this, Monte-Carlo EMI (seeded) replaces the exact sum
MC_EMI_DRAWS = 10_000
LOG2 = np.log(2.0)


@dataclass
class JointFlowTable:
    """Counts of (source, target) pairs of triples passing through one article."""

    middle: int
    counts: dict[tuple[int, int], int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def contingency(self) -> np.ndarray:
        """Dense count matrix with rows = distinct sources, cols = distinct targets."""
        sources = sorted({s for s, _ in self.counts})
        targets = sorted({t for _, t in self.counts})
        si = {s: i for i, s in enumerate(sources)}
        ti = {t: i for i, t in enumerate(targets)}
        m = np.zeros((len(sources), len(targets)), dtype=np.int64)
        for (s, t), c in self.counts.items():
            m[si[s], ti[t]] = c
        return m


@dataclass
class AmiRecord:
    middle: int
    num_triples: int
    mi_bits: float
    ami: float
    entropy_source: float
    entropy_target: float


def extract_triples(corpus: SequenceCorpus):
    """Yield every window of 3 consecutive pages as (source, middle, target)."""
    for seq in corpus.sequences:
        for i in range(len(seq) - 2):
            yield seq[i], seq[i + 1], seq[i + 2]


def collect_flow_tables(corpus: SequenceCorpus) -> dict[int, JointFlowTable]:
    tables: dict[int, JointFlowTable] = {}
    for s, m, t in extract_triples(corpus):
        tab = tables.get(m)
        if tab is None:
            tab = tables[m] = JointFlowTable(m, {})
        tab.counts[(s, t)] = tab.counts.get((s, t), 0) + 1
    return tables


def entropy_bits(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def mutual_information(table: JointFlowTable) -> float:
    """MI in bits between sources and targets of the joint flow counts."""
    m = table.contingency()
    return _mi_bits(m)


def _mi_bits(m: np.ndarray) -> float:
    total = m.sum()
    if total <= 0:
        raise ValueError("empty table")
    p = m / total
    ps = p.sum(axis=1, keepdims=True)
    pt = p.sum(axis=0, keepdims=True)
    nz = p > 0
    ratio = np.where(nz, p / (ps * pt), 1.0)
    return float((p[nz] * np.log2(ratio[nz])).sum())


def expected_mi(row_sums, col_sums, total: int,
                rng: np.random.Generator | None = None,
                exact_total_limit: int = EXACT_EMI_TOTAL_LIMIT,
                mc_draws: int = MC_EMI_DRAWS) -> float:
    """Expected MI (bits) under the fixed-marginal permutation null.

    Exact hypergeometric summation up to `exact_total_limit` total counts;
    beyond that a seeded Monte-Carlo permutation estimate (the bias at that
    size is negligible relative to AMI resolution).
    """
    a = np.asarray(row_sums, dtype=np.int64)
    b = np.asarray(col_sums, dtype=np.int64)
    n = int(total)
    if a.sum() != n or b.sum() != n:
        raise ValueError("marginals inconsistent with total")
    if len(a) <= 1 and len(b) <= 1:
        return 0.0
    if n <= exact_total_limit:
        return _expected_mi_exact(a, b, n)
    if rng is None:
        rng = rng_stream(0)
    return _expected_mi_mc(a, b, n, rng, mc_draws)


def _expected_mi_exact(a: np.ndarray, b: np.ndarray, n: int) -> float:
    # E[MI] = sum_{i,j} sum_{nij} (nij/n) log2(n*nij/(ai*bj)) * P_hypergeom(nij)
    lg = gammaln
    emi = 0.0
    log_n = np.log(n)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1)
            log_pmf = (lg(ai + 1) + lg(bj + 1) + lg(n - ai + 1) + lg(n - bj + 1)
                       - lg(n + 1) - lg(nij + 1) - lg(ai - nij + 1)
                       - lg(bj - nij + 1) - lg(n - ai - bj + nij + 1))
            term = (nij / n) * (np.log(nij) + log_n - np.log(ai) - np.log(bj)) / LOG2
            emi += float((term * np.exp(log_pmf)).sum())
    return emi


def _expected_mi_mc(a, b, n, rng, draws) -> float:
    s_labels = np.repeat(np.arange(len(a)), a)
    t_labels = np.repeat(np.arange(len(b)), b)
    rows, cols = len(a), len(b)
    acc = 0.0
    for _ in range(draws):
        perm = rng.permutation(t_labels)
        m = np.bincount(s_labels * cols + perm, minlength=rows * cols)
        acc += _mi_bits(m.reshape(rows, cols))
    return acc / draws


def adjusted_mi(table: JointFlowTable,
                rng: np.random.Generator | None = None) -> AmiRecord:
    """AMI with the max-entropy normalizer.

    AMI = (MI - EMI) / (max(H(S), H(T)) - EMI); defined as 0 when both
    marginals are degenerate. Chance fluctuations below 0 are reported as-is.
    """
    m = table.contingency()
    a = m.sum(axis=1)
    b = m.sum(axis=0)
    n = int(m.sum())
    mi = _mi_bits(m)
    hs = entropy_bits(a)
    ht = entropy_bits(b)
    emi = expected_mi(a, b, n, rng=rng)
    denom = max(hs, ht) - emi
    ami = (mi - emi) / denom if abs(denom) > 1e-15 else 0.0
    return AmiRecord(table.middle, n, mi, float(ami), hs, ht)


@dataclass
class SurveyResult:
    records: list[AmiRecord]
    # Spearman correlation between triple counts and AMI; None when degenerate
    volume_ami_spearman: float | None


def ami_survey(corpus: SequenceCorpus, min_triples: int = 100) -> SurveyResult:
    """One AMI record per middle article with at least `min_triples` triples.

    Records are ordered by article id for deterministic output.
    """
    tables = collect_flow_tables(corpus)
    records = []
    for m in sorted(tables):
        tab = tables[m]
        if tab.total < min_triples:
            continue
        records.append(adjusted_mi(tab, rng=rng_stream(0, m)))
    rho = None
    if len(records) >= 3:
        counts = [r.num_triples for r in records]
        amis = [r.ami for r in records]
        try:
            rho = spearman(counts, amis)
        except ValueError:
            rho = None
    return SurveyResult(records, rho)


def ami_cdf(records: list[AmiRecord], bin_width: float = 0.01) -> list[tuple[float, float]]:
    """Cumulative fraction of records with AMI <= each bin edge in [0, 1]."""
    values = np.array([r.ami for r in records])
    edges = np.round(np.arange(0.0, 1.0 + bin_width / 2, bin_width), 10)
    if len(values) == 0:
        return [(float(e), 0.0) for e in edges]
    return [(float(e), float((values <= e).mean())) for e in edges]


def write_survey_csv(result: SurveyResult, path, interner, header_comment: str = ""):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header_comment:
            f.write("# %s\n" % header_comment)
        f.write("article,num_triples,mi_bits,ami\n")
        for r in result.records:
            f.write("%s,%d,%.10g,%.10g\n"
                    % (interner.name(r.middle), r.num_triples, r.mi_bits, r.ami))


def write_cdf_csv(records: list[AmiRecord], path, header_comment: str = ""):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header_comment:
            f.write("# %s\n" % header_comment)
        f.write("ami_bin,cumulative_fraction\n")
        for edge, frac in ami_cdf(records):
            f.write("%.2f,%.10g\n" % (edge, frac))
