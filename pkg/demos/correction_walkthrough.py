"""Follow one repartition pass sample by sample.

Warm up a classifier on noisy labels, split the data by agreement,
build class prototypes from the confident side, and watch where the
unconfident samples land: small circle (corrected outright), ring
(corrected with a probability that grows with similarity), or outside
(left alone).

    python3 demos/correction_walkthrough.py
"""

import numpy as np

from protosemi import (
    TrainConfig,
    Thresholds,
    build_prototypes,
    correction_stats,
    generate_blobs,
    init_network,
    inject_factual_noise,
    repartition,
    repartition_rng,
    split_by_agreement,
    train_epoch,
)

ds = generate_blobs(num_classes=3, per_class=80, dim=8,
                    separation=5.0, spread=1.1, seed=5)
ds = inject_factual_noise(ds, 0.3, seed=6)
print(f"dataset: n={ds.n}, {int((ds.working_labels != ds.true_labels).sum())} labels wrong")

net = init_network([8, 24, 12, 3], seed=5)
config = TrainConfig(base_lr=0.1, total_epochs=8, batch_size=16, seed=5)
for epoch in range(8):
    loss = train_epoch(net, ds.features, ds.working_labels, config, epoch)
print(f"warmed up 8 epochs, final epoch loss {loss:.3f}")

part = split_by_agreement(net, ds)
print(f"\nagreement split: {part.confident_idx.size} confident, "
      f"{part.unconfident_idx.size} unconfident")

# how dirty is each side? agreement should concentrate the clean labels
conf_clean = np.mean(ds.working_labels[part.confident_idx]
                     == ds.true_labels[part.confident_idx])
unconf_clean = np.mean(ds.working_labels[part.unconfident_idx]
                       == ds.true_labels[part.unconfident_idx])
print(f"label correctness: confident side {conf_clean:.0%}, "
      f"unconfident side {unconf_clean:.0%}")

protos = build_prototypes(net, ds, part)
print(f"prototypes: {protos.rows.shape[0]} rows of dim {protos.rows.shape[1]}, "
      f"support {protos.support_counts.tolist()}")

thresholds = Thresholds(alpha=0.9, beta=0.4)
work = ds.copy()
new_part, log = repartition(net, work, part, thresholds, repartition_rng(5, 0))

for zone in ("small", "ring", "outside"):
    entries = [r for r in log if r.zone == zone]
    corrected = sum(1 for r in entries if r.action == "corrected")
    print(f"  {zone:8s} {len(entries):3d} samples, {corrected} corrected")

print("\na few log entries (index, zone, similarity, prior -> proto):")
for r in log[:8]:
    mark = "*" if r.action == "corrected" else " "
    print(f" {mark} {r.index:4d} {r.zone:8s} d_max={r.d_max:.3f} "
          f"{r.prior_label} -> {r.proto_label} (p={r.p_correct:.2f})")

stats = correction_stats(log, work)
print(f"\nsmall-circle scorecard: {stats.right}/{stats.corrected} corrected "
      f"labels are actually right = {stats.accuracy_text()}")
print(f"confident set grew from {part.confident_idx.size} "
      f"to {new_part.confident_idx.size}")

# tighter alpha: fewer deterministic corrections, same machinery
tight = Thresholds(alpha=0.97, beta=0.4)
_, tight_log = repartition(net, ds.copy(), part, tight, repartition_rng(5, 0))
small = sum(1 for r in tight_log if r.zone == "small")
print(f"\nwith alpha=0.97 the small circle shrinks to {small} samples "
      f"(was {sum(1 for r in log if r.zone == 'small')})")
