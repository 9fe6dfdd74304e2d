"""cloudward: malware epidemics on cloud topologies — simulation, detection,
scoring, forecasting, containment planning, and privacy-preserving federated
training, plus an HTTP control plane and a batch CLI."""

__version__ = "0.1.0"

__all__ = [
    "cli",
    "containment",
    "epidemic",
    "federated",
    "forecast",
    "gnn",
    "logfeat",
    "logsynth",
    "rng",
    "scoring",
    "service",
    "topology",
]
