import sys

import numpy as np

from sswc.raster import BinaryMask, GeoTransform


def grid_geo(height, gsd=1.0):
    """North-up grid whose lower-left pixel corner sits at the world origin."""
    return GeoTransform(0.5 * gsd, (height - 0.5) * gsd, gsd, -gsd)


def make_mask(bits, gsd=1.0):
    bits = np.asarray(bits, dtype=bool)
    return BinaryMask(bits, grid_geo(bits.shape[0], gsd))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
