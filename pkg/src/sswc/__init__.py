"""Site-specific weed control: crop-row detection, weed maps, spray prescriptions.

Submodules
----------
raster        georeferenced rasters, excess-green index, thresholding
rowdetect     tiled projection-profile row detection and its evaluation
weedmap       row buffering, weed extraction, connected weed regions
prescription  spray/no-spray grids and their GeoJSON documents
sprayersim    section-control sprayer replay and application accuracy
analysis      paired t-test and treatment ratios
synthfield    seeded synthetic fields with ground truth
cli           command-line pipeline (``sswc``)
"""

__version__ = "0.1.0"
