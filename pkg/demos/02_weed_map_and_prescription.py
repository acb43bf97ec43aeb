"""From vegetation and rows to a weed map and a spray prescription.

Run:  python3 demos/02_weed_map_and_prescription.py
"""

from sswc import prescription, rowdetect, weedmap
from sswc.raster import compute_exgi, threshold_mask
from sswc.synthfield import FieldSpec, generate

spec = FieldSpec(width_m=12.0, height_m=6.0, weed_density_per_m2=0.3, seed=11)
rgb, truth = generate(spec)
veg = threshold_mask(compute_exgi(rgb))
lines = rowdetect.detect_rows(veg, refine=True)

# everything within 3.5 in of a row is crop; the rest is weed
crop = weedmap.buffer_rows(lines, weedmap.BufferSpec(0.0889), veg.geo, veg.width, veg.height)
weeds = weedmap.extract_weeds(veg, crop)
regions = weedmap.connected_components(weeds)
print("weed pixels", int(weeds.bits.sum()), "in", len(regions), "patches")
print("weed area %.4f m^2 (%d weeds planted)" % (weedmap.mask_area_m2(weeds), len(truth.weeds)))

# one 0.509 m x 10 ft cell per nozzle strip; spray only where a weed pixel falls
grid = prescription.build_grid(veg.geo.extent(veg.width, veg.height))
pmap = prescription.assign_rates(grid, weeds)
print("grid", pmap.shape, "cells")
print(prescription.prescription_stats(pmap).to_report(), end="")
