"""Synthetic system-log generation conditioned on epidemic state, plus
ingestion of external log files.

Templates are short token patterns; slots like ``<pid>`` are filled from
small closed value pools so the token universe stays finite.  Every rendered
entry starts with its template tag, the way a syslog line starts with its
program name.  Each attack scenario owns an anomalous template pool with a
distinct sub-vocabulary; clean (S/R) vertices only ever draw from the
normal pool.

Log file format (UTF-8, one entry per line):

    <vertex_id> <step> <token> [<token> ...]
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .epidemic import D, I, ScenarioPreset, Trajectory
from .rng import generator
from .topology import CloudGraph

SLOT_VALUES = {
    "<pid>": tuple(f"pid{i}" for i in range(8)),
    "<user>": ("root", "svc", "admin", "app", "backup"),
    "<addr>": tuple(f"10.0.{i}.{j}" for i in range(2) for j in range(4)),
    "<port>": ("22", "80", "443", "8080", "3306"),
    "<code>": ("0", "1", "137", "255"),
    "<dev>": ("eth0", "eth1", "vda", "vdb"),
}


@dataclass(frozen=True)
class LogTemplate:
    tag: str
    pattern: tuple[str, ...]
    klass: str = "normal"   # "normal" or "anomalous:<scenario>"

    def __post_init__(self):
        if not self.pattern:
            raise ValueError(f"template {self.tag} has an empty pattern")

    def render(self, rng) -> tuple[str, ...]:
        toks = [self.tag]
        for tok in self.pattern:
            pool = SLOT_VALUES.get(tok)
            toks.append(tok if pool is None else pool[int(rng.integers(len(pool)))])
        return tuple(toks)


def _normal(tag, *pattern):
    return LogTemplate(tag, tuple(pattern))


def _anom(scenario, tag, *pattern):
    return LogTemplate(tag, tuple(pattern), klass=f"anomalous:{scenario}")


NORMAL_TEMPLATES = (
    _normal("sshd", "session", "opened", "user", "<user>"),
    _normal("sshd", "session", "closed", "user", "<user>"),
    _normal("cron", "job", "started", "<pid>"),
    _normal("cron", "job", "finished", "<pid>", "status", "<code>"),
    _normal("kernel", "link", "up", "<dev>"),
    _normal("httpd", "request", "ok", "<addr>", "port", "<port>"),
    _normal("httpd", "response", "sent", "<addr>"),
    _normal("systemd", "service", "reloaded"),
    _normal("disk", "write", "complete", "<dev>"),
    _normal("ntpd", "clock", "sync", "ok"),
)

ANOMALOUS_TEMPLATES = {
    "ddos": (
        _anom("ddos", "netflt", "syn", "flood", "from", "<addr>"),
        _anom("ddos", "netflt", "conn", "surge", "port", "<port>"),
        _anom("ddos", "httpd", "backlog", "saturated"),
    ),
    "hypercall": (
        _anom("hypercall", "hvtrap", "hypercall", "malformed", "<code>"),
        _anom("hypercall", "hvtrap", "ring0", "violation", "<pid>"),
    ),
    "hypervisor-dos": (
        _anom("hypervisor-dos", "hvsched", "vcpu", "starvation"),
        _anom("hypervisor-dos", "hvsched", "resource", "exhausted", "<dev>"),
    ),
    "mitm": (
        _anom("mitm", "arpwatch", "arp", "spoof", "<addr>"),
        _anom("mitm", "tlsmon", "cert", "mismatch", "<addr>"),
    ),
    "hyperjacking": (
        _anom("hyperjacking", "hvguard", "hypervisor", "handoff", "unexpected"),
        _anom("hyperjacking", "hvguard", "firmware", "tamper", "<dev>"),
    ),
    "co-location": (
        _anom("co-location", "cachemon", "sidechannel", "probe", "<pid>"),
        _anom("co-location", "cachemon", "timing", "leak", "detected"),
    ),
    "live-migration": (
        _anom("live-migration", "migrated", "migration", "storm", "<addr>"),
        _anom("live-migration", "migrated", "replay", "suspect", "<code>"),
    ),
}


@dataclass(frozen=True)
class LogCorpus:
    """Per-vertex ordered (step, tokens) entries."""

    n: int
    entries: tuple[tuple[tuple[int, tuple[str, ...]], ...], ...]   # [vertex][i] = (step, tokens)

    def __post_init__(self):
        if len(self.entries) != self.n:
            raise ValueError("entries length must equal n")

    def tokens_for(self, v: int) -> list[str]:
        out: list[str] = []
        for _, toks in self.entries[v]:
            out.extend(toks)
        return out

    def sequences(self) -> list[list[str]]:
        """One token sequence per entry, for embedding training."""
        return [list(toks) for per_vertex in self.entries for _, toks in per_vertex]

    def total_entries(self) -> int:
        return sum(len(per_vertex) for per_vertex in self.entries)


def generate_logs(g: CloudGraph, trajectory: Trajectory, preset: ScenarioPreset,
                  rate: int, mix: float, seed: int) -> LogCorpus:
    """Emit `rate` entries per vertex per trajectory snapshot.

    S/R vertices draw from the normal pool; D/I vertices draw an anomalous
    template of the preset's profile with probability `mix`, normal
    otherwise.  Per-vertex derived seeds keep generation order-independent
    across vertices.
    """
    if rate < 1:
        raise ValueError("rate must be >= 1")
    if not (0.0 <= mix <= 1.0):
        raise ValueError("mix must lie in [0, 1]")
    anomalous = ANOMALOUS_TEMPLATES.get(preset.template_profile)
    if not anomalous:
        raise ValueError(f"no anomalous templates for profile {preset.template_profile!r}")

    per_vertex: list[tuple[tuple[int, tuple[str, ...]], ...]] = []
    for v in range(g.n):
        rng = generator("logs", seed, v)
        rows = []
        for state in trajectory.states:
            infected = state.comp[v] in (D, I)
            for _ in range(rate):
                if infected and rng.random() < mix:
                    tpl = anomalous[int(rng.integers(len(anomalous)))]
                else:
                    tpl = NORMAL_TEMPLATES[int(rng.integers(len(NORMAL_TEMPLATES)))]
                rows.append((state.t, tpl.render(rng)))
        per_vertex.append(tuple(rows))
    return LogCorpus(n=g.n, entries=tuple(per_vertex))


def generate_state_logs(g: CloudGraph, state, preset: ScenarioPreset,
                        rate: int, mix: float, seed: int) -> list[tuple[int, tuple[str, ...]]]:
    """Entries for one snapshot only, keyed by (vertex, step) streams.

    Suited to interactive stepping where snapshots arrive one at a time;
    returns [(vertex, tokens)] in vertex order, `rate` entries each, all
    stamped with state.t.
    """
    if rate < 1:
        raise ValueError("rate must be >= 1")
    if not (0.0 <= mix <= 1.0):
        raise ValueError("mix must lie in [0, 1]")
    anomalous = ANOMALOUS_TEMPLATES.get(preset.template_profile)
    if not anomalous:
        raise ValueError(f"no anomalous templates for profile {preset.template_profile!r}")
    out = []
    for v in range(g.n):
        rng = generator("logs", seed, v, state.t)
        infected = state.comp[v] in (D, I)
        for _ in range(rate):
            if infected and rng.random() < mix:
                tpl = anomalous[int(rng.integers(len(anomalous)))]
            else:
                tpl = NORMAL_TEMPLATES[int(rng.integers(len(NORMAL_TEMPLATES)))]
            out.append((v, tpl.render(rng)))
    return out


def export_logs(corpus: LogCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in range(corpus.n):
            for step_idx, tokens in corpus.entries[v]:
                fh.write(f"{v} {step_idx} " + " ".join(tokens) + "\n")


def ingest_logs(path, expected_n: int | None = None) -> LogCorpus:
    """Parse the plain-text format; tokens are whitespace-split.

    With `expected_n`, vertex ids must lie below it and every vertex needs
    at least one entry; otherwise n is inferred as max id + 1.
    """
    rows: dict[int, list[tuple[int, tuple[str, ...]]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not any(line.strip() for line in lines):
        raise ValueError(f"empty log file: {path}")
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ValueError(f"line {lineno}: expected '<vertex> <step> <tokens...>', got {line!r}")
        try:
            v, step_idx = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: vertex and step must be integers") from None
        if v < 0 or step_idx < 0:
            raise ValueError(f"line {lineno}: negative vertex or step")
        if expected_n is not None and v >= expected_n:
            raise ValueError(f"line {lineno}: unknown vertex {v} (n={expected_n})")
        rows.setdefault(v, []).append((step_idx, tuple(parts[2:])))
    n = expected_n if expected_n is not None else max(rows) + 1
    if expected_n is not None:
        missing = [v for v in range(n) if v not in rows]
        if missing:
            raise ValueError(f"vertices without log entries: {missing}")
    return LogCorpus(n=n, entries=tuple(tuple(rows.get(v, ())) for v in range(n)))
