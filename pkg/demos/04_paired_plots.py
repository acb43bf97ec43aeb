"""Compare weed area between treated and untreated plots.

Run:  python3 demos/04_paired_plots.py
"""

from sswc.analysis import PlotObservation, group_ratio, pair_observations, paired_t_test

obs = [
    PlotObservation("1", "SSWC", 0.42), PlotObservation("2", "no-SSWC", 0.61),
    PlotObservation("3", "SSWC", 0.35), PlotObservation("4", "no-SSWC", 0.58),
    PlotObservation("5", "SSWC", 0.51), PlotObservation("6", "no-SSWC", 0.49),
    PlotObservation("7", "SSWC", 0.30), PlotObservation("8", "no-SSWC", 0.55),
]

print("mean ratio %.3f" % group_ratio(obs))
res = paired_t_test(pair_observations(obs))
print(res.to_report(), end="")

# the textbook fixture: differences 1..5
print(paired_t_test([(d, 0.0) for d in (1, 2, 3, 4, 5)]).to_report(), end="")
