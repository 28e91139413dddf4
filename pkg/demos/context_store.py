"""How the context store ages and ranks tokens.

    python3 demos/context_store.py
"""

import numpy as np

from ctxbeam.embed import ContextToken, Tag, TTLClass
from ctxbeam.store import ContextStore, StoreConfig, radio_map_prior


def show(store, now, label):
    items = ", ".join(f"{t.tag.value}@{t.timestamp:.1f}({store.score(t, now):.2f})"
                      for t in store.tokens)
    print(f"t={now:.1f} {label:<22} [{items}]")


store = ContextStore(StoreConfig(budget=4))
store.insert(radio_map_prior({5: np.zeros(32)}, 5), 0.0)
show(store, 0.0, "radio-map prior")

for t, tag in ((0.0, Tag.GPS), (0.0, Tag.LIDAR), (0.1, Tag.GPS), (0.1, Tag.IMAGE)):
    store.sweep(t)
    store.insert(ContextToken(np.zeros(32), tag, t, TTLClass.FAST), t)
    show(store, t, f"insert {tag.value}")

store.sweep(0.3)
show(store, 0.3, "sweep: FAST tokens gone")
