"""trendmeter: search-trend occupancy proxies for building energy models.

Screens country-level daily search-volume topics against per-meter
calendar signals, injects the best-fit topic into a boosted-tree energy
model, and reports the RMSLE change segmented by day type.
"""

__version__ = "0.1.0"
