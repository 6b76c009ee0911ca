"""Alignment of sentences with quarterly indicators, labels, folds and fusion."""

import csv
import json
from dataclasses import dataclass, field
from datetime import date

import numpy as np

SEMANTIC_DIM = 600
NUMERIC_DIM = 12

INDICATOR_NAMES = (
    "capital_to_asset",
    "interest_to_liabilities",
    "reserves_to_asset",
    "mortgages_to_loans_d4",
    "securities_to_liabilities_d4",
    "financial_assets_to_gdp",
    "house_price_gap",
    "mip_international_investment_position",
    "private_debt",
    "government_bond_yield_d4",
    "credit_to_gdp",
    "credit_to_gdp_d12",
)

ARMS = ("text_only", "numeric_only", "combined")

EVENT_KINDS = ("bankruptcy_default", "state_aid", "distressed_merger")


@dataclass(frozen=True)
class QuarterlyIndicators:
    bank_id: str
    year: int
    quarter: int  # 1..4
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (NUMERIC_DIM,):
            raise ValueError("expected %d indicator values, got %s" % (NUMERIC_DIM, vals.shape))
        if not np.all(np.isfinite(vals)):
            raise ValueError("indicator values must be finite")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class DistressEvent:
    bank_id: str
    start_date: date
    end_date: date
    kind: str

    def __post_init__(self):
        if self.start_date > self.end_date:
            raise ValueError("event window ends before it starts")
        if self.kind not in EVENT_KINDS:
            raise ValueError("unknown event kind %r" % self.kind)


@dataclass(frozen=True)
class FusedSample:
    sentence_id: str
    bank_id: str
    month: tuple  # (year, 1..12)
    input: np.ndarray  # 600 semantic + 12 normalized numeric
    label: int


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray  # bool mask of zero-variance columns
    source_folds: tuple


@dataclass
class FoldAssignment:
    k: int
    fold_of: dict  # bank_id -> fold index

    def banks_in(self, fold):
        return sorted(b for b, f in self.fold_of.items() if f == fold)


@dataclass
class DropReport:
    n_dropped: int
    dropped_by_bank: dict
    banks_fully_dropped: list


def quarter_of(dt):
    return (dt.year, (dt.month - 1) // 3 + 1)


def month_of(dt):
    return (dt.year, dt.month)


def align(sentences, indicators):
    """Match each sentence to its bank's record for the publication quarter.

    Sentences without a (bank, quarter) indicator record are dropped and
    counted; banks losing all their sentences are listed in the report.
    """
    table = {(q.bank_id, q.year, q.quarter): q for q in indicators}
    aligned = []
    dropped = {}
    survivors = set()
    seen = set()
    for sent in sentences:
        seen.add(sent.bank_id)
        year, quarter = quarter_of(sent.published_at)
        rec = table.get((sent.bank_id, year, quarter))
        if rec is None:
            dropped[sent.bank_id] = dropped.get(sent.bank_id, 0) + 1
        else:
            aligned.append((sent, rec))
            survivors.add(sent.bank_id)
    report = DropReport(
        n_dropped=sum(dropped.values()),
        dropped_by_bank=dropped,
        banks_fully_dropped=sorted(seen - survivors),
    )
    return aligned, report


def label(sentence, events):
    """1 iff the sentence date falls inside any distress window of its bank."""
    d = sentence.published_at.date()
    for ev in events:
        if ev.bank_id == sentence.bank_id and ev.start_date <= d <= ev.end_date:
            return 1
    return 0


def fit_normalization(values, source_folds=()):
    """Per-indicator mean and population std over training-fold samples."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2 or vals.shape[0] < 2:
        raise ValueError("need at least 2 samples to fit normalization")
    mean = vals.mean(axis=0)
    std = vals.std(axis=0)  # population convention (divisor N)
    return NormalizationStats(
        mean=mean,
        std=std,
        degenerate=std < 1e-12,
        source_folds=tuple(source_folds),
    )


def apply_normalization(stats, values):
    """z-score transform; degenerate columns map to 0."""
    vals = np.asarray(values, dtype=float)
    safe_std = np.where(stats.degenerate, 1.0, stats.std)
    z = (vals - stats.mean) / safe_std
    if vals.ndim == 1:
        z[stats.degenerate] = 0.0
    else:
        z[:, stats.degenerate] = 0.0
    return z


def fuse(sentence, semantic, normalized_numeric, label_value):
    """Concatenate semantic and numeric parts into one classifier input."""
    sem = np.asarray(semantic, dtype=float)
    num = np.asarray(normalized_numeric, dtype=float)
    if sem.shape != (SEMANTIC_DIM,):
        raise ValueError("semantic part must have %d entries, got %s" % (SEMANTIC_DIM, sem.shape))
    if num.shape != (NUMERIC_DIM,):
        raise ValueError("numeric part must have %d entries, got %s" % (NUMERIC_DIM, num.shape))
    return FusedSample(
        sentence_id=sentence.sentence_id,
        bank_id=sentence.bank_id,
        month=month_of(sentence.published_at),
        input=np.concatenate([sem, num]),
        label=int(label_value),
    )


def assign_folds(bank_ids, k=5, seed=0):
    """Seeded shuffle of banks, round-robin into k folds (sizes differ by <=1)."""
    banks = sorted(set(bank_ids))
    if len(banks) < k:
        raise ValueError("need at least %d banks for %d folds, have %d" % (k, k, len(banks)))
    rng = np.random.default_rng(seed)
    order = list(banks)
    rng.shuffle(order)
    return FoldAssignment(k=k, fold_of={b: i % k for i, b in enumerate(order)})


def project_arm(input_vec, arm, semantic_dim=SEMANTIC_DIM):
    """Slice a fused input down to the requested experiment arm."""
    vec = np.asarray(input_vec, dtype=float)
    if arm == "combined":
        return vec
    if arm == "text_only":
        return vec[..., :semantic_dim]
    if arm == "numeric_only":
        return vec[..., semantic_dim:]
    raise ValueError("unknown arm %r" % arm)


@dataclass
class SampleTable:
    """Column-wise aligned dataset, numeric part kept raw for per-run z-scoring."""

    sentence_ids: list
    bank_ids: list
    months: list
    semantic: np.ndarray     # N x semantic_dim
    numeric_raw: np.ndarray  # N x 12
    labels: np.ndarray       # N, in {0, 1}
    semantic_dim: int = field(default=SEMANTIC_DIM)

    def __len__(self):
        return len(self.sentence_ids)

    def class_prior(self):
        return float(self.labels.mean())


def build_sample_table(sentences, vectors_by_id, indicators, events):
    """Align, label and stack everything the experiment harness consumes."""
    aligned, report = align(sentences, indicators)
    sids, bids, months, sem, num, labels = [], [], [], [], [], []
    for sent, rec in aligned:
        vec = vectors_by_id.get(sent.sentence_id)
        if vec is None:
            raise KeyError("no semantic vector for sentence %r" % sent.sentence_id)
        sids.append(sent.sentence_id)
        bids.append(sent.bank_id)
        months.append(month_of(sent.published_at))
        sem.append(np.asarray(vec, dtype=float))
        num.append(rec.values)
        labels.append(label(sent, events))
    if not sids:
        raise ValueError("no aligned samples")
    sem = np.vstack(sem)
    return (
        SampleTable(
            sentence_ids=sids,
            bank_ids=bids,
            months=months,
            semantic=sem,
            numeric_raw=np.vstack(num),
            labels=np.array(labels, dtype=np.int64),
            semantic_dim=sem.shape[1],
        ),
        report,
    )


# ---------------------------------------------------------------------------
# File formats


def read_indicators(path):
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            q = row["quarter"]
            year, quarter = int(q[:4]), int(q[5])
            out.append(
                QuarterlyIndicators(
                    bank_id=row["bank_id"],
                    year=year,
                    quarter=quarter,
                    values=np.array([float(row[name]) for name in INDICATOR_NAMES]),
                )
            )
    return out


def write_indicators(indicators, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("bank_id", "quarter") + INDICATOR_NAMES)
        for rec in indicators:
            writer.writerow(
                [rec.bank_id, "%dQ%d" % (rec.year, rec.quarter)]
                + ["%r" % v for v in rec.values.tolist()]
            )


def read_events(path):
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                DistressEvent(
                    bank_id=row["bank_id"],
                    start_date=date.fromisoformat(row["start_date"]),
                    end_date=date.fromisoformat(row["end_date"]),
                    kind=row["kind"],
                )
            )
    return out


def write_events(events, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bank_id", "start_date", "end_date", "kind"])
        for ev in events:
            writer.writerow([ev.bank_id, ev.start_date.isoformat(), ev.end_date.isoformat(), ev.kind])


def write_sample_table(table, path):
    """JSON-lines fused-dataset export.

    ``input`` holds the semantic part followed by whole-dataset z-scored
    numerics (audit view); ``numeric_raw`` is kept alongside so experiment
    runs can re-fit normalization on their own training folds.
    """
    stats = fit_normalization(table.numeric_raw, source_folds=("all",))
    numeric_z = apply_normalization(stats, table.numeric_raw)
    with open(path, "w", encoding="utf-8") as fh:
        for i, sid in enumerate(table.sentence_ids):
            fh.write(
                json.dumps(
                    {
                        "sentence_id": sid,
                        "bank_id": table.bank_ids[i],
                        "month": "%04d-%02d" % table.months[i],
                        "label": int(table.labels[i]),
                        "input": np.concatenate([table.semantic[i], numeric_z[i]]).tolist(),
                        "numeric_raw": table.numeric_raw[i].tolist(),
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
    return stats


def read_sample_table(path):
    sids, bids, months, sem, num, labels = [], [], [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            sids.append(row["sentence_id"])
            bids.append(row["bank_id"])
            year, month = row["month"].split("-")
            months.append((int(year), int(month)))
            num_raw = np.array(row["numeric_raw"], dtype=float)
            sem.append(np.array(row["input"][: -NUMERIC_DIM], dtype=float))
            num.append(num_raw)
            labels.append(int(row["label"]))
    if not sids:
        raise ValueError("empty fused dataset %s" % path)
    sem = np.vstack(sem)
    return SampleTable(
        sentence_ids=sids,
        bank_ids=bids,
        months=months,
        semantic=sem,
        numeric_raw=np.vstack(num),
        labels=np.array(labels, dtype=np.int64),
        semantic_dim=sem.shape[1],
    )


def write_normalization_stats(stats, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "mean": stats.mean.tolist(),
                "std": stats.std.tolist(),
                "degenerate": stats.degenerate.astype(bool).tolist(),
                "source_folds": list(stats.source_folds),
                "indicators": list(INDICATOR_NAMES),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
