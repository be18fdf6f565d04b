"""Reference values for the incomplete beta and Welch tests (scipy)."""
from scipy import special, stats

BETA_POINTS = [(0.5, 0.5, 0.3), (1.0, 1.0, 0.42), (2.0, 3.0, 0.4), (5.0, 0.5, 0.9),
               (0.5, 5.0, 0.05), (10.0, 10.0, 0.5), (2.5, 7.5, 0.2), (30.0, 0.5, 0.97),
               (1.5, 0.5, 0.999), (100.0, 120.0, 0.47)]
for a, b, x in BETA_POINTS:
    print(f"{{{a!r}, {b!r}, {x!r}, {special.betainc(a, b, x)!r}}},")

CASES = [
    ([0.85, 0.86, 0.84, 0.85, 0.87], [0.92, 0.91, 0.93, 0.92, 0.92]),
    ([1.0, 2.0, 3.0, 4.0, 5.0], [2.0, 4.0, 6.0, 8.0, 10.0]),
    ([0.1, 0.5, 0.3], [0.2, 0.4, 0.35, 0.25, 0.3, 0.33]),
    ([10.0, 12.0, 9.0, 11.0], [10.5, 10.7]),
    ([0.88, 0.90, 0.87, 0.89, 0.86], [0.96, 0.95, 0.97, 0.96, 0.95]),
]
for a, b in CASES:
    r = stats.ttest_ind(a, b, equal_var=False)
    print(f"t={r.statistic!r} df={r.df!r} p={r.pvalue!r}")
r = stats.ttest_rel(CASES[0][0], CASES[0][1])
print(f"paired t={r.statistic!r} p={r.pvalue!r}")
