#!/usr/bin/env python3
"""Non-wear detection and per-window statistics on actigraphy counts.

Builds a six-hour counts stream with a 90-minute off-body gap in the middle
(including one small interruption spike that the detector must absorb), then
shows which 5-minute windows survive.
"""


from fatiguekit import acti, synth

DURATION_S = 6 * 3600
rec = synth.gen_counts(
    DURATION_S,
    activity_profile=[(0, 7200, 250.0), (7200 + 5400, DURATION_S, 180.0)],
    seed=7,
)
# carve the off-body gap by hand: zeros with one 40 counts/min blip
counts = rec.counts.copy()
gap = slice(240, 240 + 180)  # epochs 240..419 = 90 minutes
counts[gap] = 0
counts[300] = 20
counts[301] = 20
rec = type(rec)(rec.subject_id, rec.epoch_start_times, counts)

wear = acti.detect_nonwear(rec)
print(f"epochs: {len(counts)}, non-wear epochs: {(~wear).sum()} "
      f"({(~wear).sum() / 2:.0f} minutes)")
print(f"interruption spike at epoch 300 absorbed: {not wear[300]}")

windows = acti.window_counts(rec, wear, 0, DURATION_S * 1000)
valid = [w for w in windows if w.wear]
print(f"windows: {len(windows)} total, {len(valid)} fully worn")

print("\nstatistics of the first three worn windows:")
print("  " + "  ".join(f"{n:>10s}" for n in acti.ACTI_FEATURE_NAMES))
for w in valid[:3]:
    print("  " + "  ".join(f"{v:10.2f}" for v in w.features))
