"""Best one-to-one match between planted and recovered labels."""
import csv
import itertools
import sys
from collections import Counter

truth = {r["node_id"]: r["planted_label"] for r in csv.DictReader(open(sys.argv[1]))}
found = {r["node_id"]: r["label"] for r in csv.DictReader(open(sys.argv[2]))}
pairs = Counter((truth[u], found.get(u, "")) for u in truth)
planted = sorted({p for p, _ in pairs})
labels = sorted({f for _, f in pairs if f not in ("", "-1")})
labels += [None] * max(0, len(planted) - len(labels))
best = max(
    sum(pairs[(p, f)] for p, f in zip(planted, perm))
    for perm in itertools.permutations(labels, len(planted))
)
print(f"{best}/{len(truth)} users ({100.0 * best / len(truth):.1f}%) in their planted community")
