"""Shared helpers for the test suite."""

from datetime import date

import numpy as np

from bankdistress import fusion
from bankdistress.fusion import DistressEvent, SampleTable


def toy_table(n_banks=10, n_months=24, per_month=2, sem_dim=8, seed=0):
    """Small labeled sample table with signal in both parts, plus events.

    Every bank gets one five-month distress window so each fold role sees
    both classes regardless of the fold draw.
    """
    rng = np.random.default_rng(seed)
    banks = ["b%02d" % i for i in range(n_banks)]
    events = []
    distress = {}
    for i, bank in enumerate(banks):
        start = 10 + (i % 3) * 2
        months = [(2010 + (m - 1) // 12, (m - 1) % 12 + 1) for m in range(start, start + 5)]
        distress[bank] = set(months)
        events.append(DistressEvent(
            bank_id=bank,
            start_date=date(months[0][0], months[0][1], 1),
            end_date=date(months[-1][0], months[-1][1], 28),
            kind="state_aid",
        ))
    sids, bids, months_col, sem, num, labels = [], [], [], [], [], []
    for bank in banks:
        for m in range(1, n_months + 1):
            month = (2010 + (m - 1) // 12, (m - 1) % 12 + 1)
            for j in range(per_month):
                lab = int(month in distress[bank])
                sids.append("%s:%d:%d" % (bank, m, j))
                bids.append(bank)
                months_col.append(month)
                sem.append(rng.normal(size=sem_dim) + 1.5 * lab)
                num.append(rng.normal(size=fusion.NUMERIC_DIM) + 1.5 * lab)
                labels.append(lab)
    table = SampleTable(
        sentence_ids=sids, bank_ids=bids, months=months_col,
        semantic=np.vstack(sem), numeric_raw=np.vstack(num),
        labels=np.array(labels, dtype=np.int64), semantic_dim=sem_dim,
    )
    return table, events
