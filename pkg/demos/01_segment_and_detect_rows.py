"""Segment a synthetic field and find its crop rows.

Run:  python3 demos/01_segment_and_detect_rows.py
"""

import numpy as np

from sswc import rowdetect
from sswc.raster import compute_exgi, threshold_mask
from sswc.synthfield import FieldSpec, generate

# a 12 m x 6 m strip of 0.762 m rows, one plant in ten missing, some weeds
spec = FieldSpec(width_m=12.0, height_m=6.0, plant_dropout_prob=0.1,
                 weed_density_per_m2=1.0, seed=4)
rgb, truth = generate(spec)
print("image", rgb.width, "x", rgb.height, "px at", spec.gsd_m, "m/px")

# excess green, then a fixed cut
exgi = compute_exgi(rgb)
veg = threshold_mask(exgi)
print("vegetation fraction %.4f" % veg.bits.mean())

# the row profile: vegetation pixels per image row
prof = rowdetect.projection_profile(rowdetect.tile_mask(veg)[0])
smooth = rowdetect.smooth_profile(prof.sums, 31)
print("profile max", prof.sums.max(), "smoothed max %.1f" % smooth.max())

lines = rowdetect.detect_rows(veg)
ys = sorted(ln.y1 for ln in lines)
print("rows found", len(lines), "of", len(truth.row_lines))
print("row y (m):", np.round(ys, 3))

# compare against the generator's rows
ev = rowdetect.evaluate_detection(lines, truth.row_lines)
print("recall", ev.recall, "precision", ev.precision)

# the wide box filter flattens each row's peak; refining recenters it
refined = rowdetect.detect_rows(veg, refine=True)
true_y = np.array(sorted(ln.y1 for ln in truth.row_lines))
print("max offset, plain   %.4f m" % np.abs(np.array(ys) - true_y).max())
print("max offset, refined %.4f m" % np.abs(np.array(sorted(ln.y1 for ln in refined)) - true_y).max())
