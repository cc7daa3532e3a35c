"""Scenario assembly, convergence measurement, invariant checks, sweeps.

`run_scenario` turns a declarative scenario (topology, channel parameters,
crash schedule) into a wired Engine, runs it to the horizon, and reports
when every correct process settled on the smallest correct id.
`check_oracles` re-derives the quiescence and message-size properties from
a finished run so experiments fail loudly instead of drifting silently.
`sweep` fans a parameter grid over worker processes and folds the results
into rows ready for `write_csv`.
"""

from __future__ import annotations

import csv
import dataclasses
import os
import random
import statistics
from dataclasses import dataclass
from multiprocessing import get_context

from .core import AddParams, AliveKnown, compute_delta, encode_known, \
    known_payload_bytes
from .known import KnownProcess
from .netsim import Channel, Engine
from .topology import Digraph, build_regular, build_ring, diameter, \
    load_edge_file, load_edge_lines, validate_span_tree
from .unknown import UnknownProcess


@dataclass
class Scenario:
    """One run's worth of configuration.

    topology picks the graph: {"kind": "ring", "n": 10},
    {"kind": "regular", "n": 100, "degree": 3, "seed": 7},
    {"kind": "single"}, {"kind": "file", "path": ...} or
    {"kind": "edges", "lines": [...]}.  K/D/stabilization/drop are the
    channel defaults; edge files may override them per channel.  crashes
    is a tuple of (pid, time) pairs, each strictly inside the horizon.
    scripts maps "u->v" to explicit per-send delays for script mode.
    """

    topology: dict
    K: int = 4
    D: int = 12
    T: int = 1
    drop: float = 0.0
    mode: str = "iid"
    stabilization: int = 0
    pre_drop: float = 1.0
    algorithm: str = "known"
    crashes: tuple = ()
    horizon: int = 1000
    seed: int = 1
    offsets: dict | None = None
    scripts: dict | None = None
    use_seq: bool = False
    reelect: bool = False


@dataclass
class RunRecord:
    """A finished run with its engine attached, for oracle checks."""

    scenario: Scenario
    graph: Digraph
    correct: frozenset
    crashes: tuple
    convergence_time: int | None
    total_messages: int
    max_message_bits: int
    engine: Engine


@dataclass
class RunResult:
    """Public outcome of a scenario run.

    For re-election runs, convergence_time comes from the crash-free
    baseline while the traffic totals and timeline show the crash run,
    which is the execution of interest there.
    """

    convergence_time: int | None
    reelection: dict | None
    total_messages: int
    max_message_bits: int
    timeline: dict


def _build_graph(sc: Scenario) -> Digraph:
    spec = sc.topology
    kind = spec.get("kind")
    if kind == "ring":
        return build_ring(spec["n"])
    if kind == "regular":
        return build_regular(spec["n"], spec.get("degree", 3),
                             spec.get("seed", sc.seed))
    if kind == "single":
        return Digraph(1, frozenset())
    if kind == "file":
        return load_edge_file(spec["path"])
    if kind == "edges":
        return load_edge_lines(spec["lines"])
    raise ValueError(f"unknown topology kind {kind!r}")


def _validate(sc: Scenario, g: Digraph):
    if sc.algorithm not in ("known", "unknown"):
        raise ValueError(f"unknown algorithm {sc.algorithm!r}")
    if sc.mode not in ("iid", "strict", "script"):
        raise ValueError(f"unknown loss mode {sc.mode!r}")
    if sc.horizon < 1:
        raise ValueError("horizon must be at least 1")
    if sc.scripts and sc.mode != "script":
        raise ValueError("delivery scripts only apply to script mode")
    crashes = []
    seen = set()
    for pid, ct in sc.crashes:
        if not 1 <= pid <= g.n:
            raise ValueError(f"crash names process {pid} outside 1..{g.n}")
        if pid in seen:
            raise ValueError(f"crash schedule names process {pid} twice")
        seen.add(pid)
        if not 1 <= ct < sc.horizon:
            raise ValueError(
                f"crash time {ct} for process {pid} must fall inside the "
                f"horizon (1 <= t < {sc.horizon})")
        crashes.append((pid, int(ct)))
    correct = frozenset(range(1, g.n + 1)) - seen
    if not correct:
        raise ValueError("at least one process must stay correct")
    if sc.algorithm == "known":
        # every channel counts as eventually timely here, so the required
        # tree exists iff the correct processes can all be reached from
        # the smallest correct id over correct-only paths
        if not validate_span_tree(g, g.edges, correct):
            raise ValueError(
                "no spanning tree of timely channels covers the correct "
                "processes from the smallest correct id")
    else:
        for u, v in g.edges:
            if (v, u) not in g.edges:
                raise ValueError(
                    f"channel {u}->{v} has no reverse direction; the "
                    "unknown-membership variant runs on bidirectional links")
        if len(correct) > 1:
            try:
                diameter(g, restrict_to=correct)
            except ValueError:
                raise ValueError(
                    "correct processes are not strongly connected") from None
    if sc.mode == "script":
        scripts = sc.scripts or {}
        for u, v in sorted(g.edges):
            if f"{u}->{v}" not in scripts:
                raise ValueError(
                    f"script mode: no delivery script for channel {u}->{v}")
    for pid in (sc.offsets or {}):
        if not 1 <= pid <= g.n:
            raise ValueError(f"offset names process {pid} outside 1..{g.n}")
    return tuple(crashes), correct


def _assemble(sc: Scenario, record=False):
    g = _build_graph(sc)
    crashes, correct = _validate(sc, g)
    pairs = sorted({(min(u, v), max(u, v)) for u, v in g.edges})
    link_of = {pair: i for i, pair in enumerate(pairs)}
    out_channels = {pid: [] for pid in range(1, g.n + 1)}
    for u, v in sorted(g.edges):
        o = g.overrides.get((u, v), {})
        ap = AddParams(o.get("K", sc.K), o.get("D", sc.D),
                       o.get("stabilization", sc.stabilization))
        drop = o.get("drop", sc.drop)
        cid = link_of[(min(u, v), max(u, v))]
        if sc.mode == "script":
            ch = Channel(u, v, ap, drop, mode="script", cid=cid,
                         script=sc.scripts[f"{u}->{v}"])
        else:
            ch = Channel(u, v, ap, drop, mode=sc.mode, pre_drop=sc.pre_drop,
                         rng=random.Random(f"{sc.seed}/ch/{u}->{v}"), cid=cid)
        out_channels[u].append(ch)
    if sc.algorithm == "known":
        states = {pid: KnownProcess(pid, g.n) for pid in range(1, g.n + 1)}
    else:
        states = {}
        for pid in range(1, g.n + 1):
            links = sorted(c for pair, c in link_of.items() if pid in pair)
            states[pid] = UnknownProcess(pid, links, use_seq=sc.use_seq)
    engine = Engine(states, out_channels, T=sc.T, offsets=sc.offsets or {},
                    crashes=dict(crashes), algorithm=sc.algorithm,
                    record=record)
    return g, correct, crashes, engine


def run_record(sc: Scenario, record=False) -> RunRecord:
    """Run one scenario and keep the engine around for inspection."""
    g, correct, crashes, engine = _assemble(sc, record=record)
    engine.run(sc.horizon)
    conv = measure_convergence(engine.transitions, correct)
    if sc.algorithm == "known":
        bits = 8 * known_payload_bytes(g.n) if engine.total_sends else 0
    else:
        bits = engine.max_bits_empty
    return RunRecord(sc, g, correct, crashes, conv, engine.total_sends,
                     bits, engine)


def measure_convergence(transitions, correct):
    """Earliest time from which every correct process holds the smallest
    correct id for the rest of the run, or None.

    transitions is the engine's (time, pid, new_leader) list; since it is
    the complete change history, the last change among correct processes
    is the convergence point whenever the final snapshot is unanimous.
    """
    correct = frozenset(correct)
    target = min(correct)
    leaders = {p: p for p in correct}
    last = dict.fromkeys(correct, 0)
    for t, pid, ldr in transitions:
        if pid in leaders:
            leaders[pid] = ldr
            last[pid] = t
    if all(ldr == target for ldr in leaders.values()):
        return max(last.values())
    return None


def measure_first_agreement(transitions, correct):
    """First instant every correct process holds the smallest correct id.

    Unlike measure_convergence this ignores whatever happens afterwards,
    so it captures the onset of agreement even in regimes where rare
    total-silence windows still force an occasional demotion much later
    (extreme loss rates make those windows unbounded). None if the run
    never reaches full agreement at all.
    """
    correct = frozenset(correct)
    target = min(correct)
    waiting = {p for p in correct if p != target}
    if not waiting:
        return 0
    for t, pid, ldr in transitions:
        if pid not in correct:
            continue
        if ldr == target:
            waiting.discard(pid)
            if not waiting:
                return t
        else:
            waiting.add(pid)
    return None


def _crash_run(base: Scenario, rec1: RunRecord, record=False):
    """Re-run `base` with its elected leader crashing at convergence."""
    t_c = rec1.convergence_time
    ell = min(rec1.correct)
    sc2 = dataclasses.replace(base, crashes=((ell, t_c),),
                              horizon=t_c + base.horizon)
    rec2 = run_record(sc2, record=record)
    prev = {p: p for p in rec2.correct}
    dropped = dict.fromkeys(rec2.correct)
    for t, pid, ldr in rec2.engine.transitions:
        if pid in prev:
            if prev[pid] == ell and ldr != ell:
                dropped[pid] = t
            prev[pid] = ldr
    if any(v is None for v in dropped.values()) or ell in prev.values():
        discard = None
    else:
        discard = statistics.fmean(dropped.values()) - t_c
    conv2 = rec2.convergence_time
    out = {
        "crash_time": t_c,
        "discard_time": discard,
        "new_convergence_time": None if conv2 is None else conv2 - t_c,
    }
    return out, rec2


def measure_reelection(sc: Scenario, want_records=False):
    """Crash the elected leader at the moment of convergence and time the
    fallout, relative to the crash: discard_time is the mean over the
    survivors of the last instant each dropped the dead leader, and
    new_convergence_time is when they settled on the next one.
    """
    if sc.crashes:
        raise ValueError("re-election runs schedule their own leader crash; "
                         "clear the pre-scheduled crashes")
    base = dataclasses.replace(sc, reelect=False)
    rec1 = run_record(base)
    if rec1.convergence_time is None:
        raise ValueError("baseline run did not converge before the horizon")
    out, rec2 = _crash_run(base, rec1)
    if want_records:
        return out, rec1, rec2
    return out


def run_scenario(sc: Scenario) -> RunResult:
    """Run a scenario end to end and return the public result."""
    return _execute(sc)[0]


def _execute(sc: Scenario, record=False):
    """run_scenario plus the record behind it (the crash run if there
    was one), for callers that need the engine, e.g. event dumps."""
    base = dataclasses.replace(sc, reelect=False) if sc.reelect else sc
    rec = run_record(base, record=record)
    reelection = None
    show = rec
    if sc.reelect and rec.convergence_time is not None:
        reelection, show = _crash_run(base, rec, record=record)
    timeline = {pid: [(0, pid)] for pid in range(1, show.graph.n + 1)}
    for t, pid, ldr in show.engine.transitions:
        timeline[pid].append((t, ldr))
    result = RunResult(
        convergence_time=rec.convergence_time,
        reelection=reelection,
        total_messages=show.total_messages,
        max_message_bits=show.max_message_bits,
        timeline=timeline,
    )
    return result, show


def check_oracles(rec: RunRecord) -> list:
    """Re-derive a finished run's invariants; returns violation strings.

    Covers: stale traffic for crashed ids, post-convergence message
    purity, per-variant message-size bounds, membership agreement and
    pending quiescence for the unknown variant, and (on strict, crash-free
    runs) the convergence-time bound diameter * delta * 3.
    """
    sc = rec.scenario
    eng = rec.engine
    correct = rec.correct
    n = rec.graph.n
    vios = []

    prev = {p: p for p in correct}
    last_held = {}  # leader id -> last time a correct process moved off it
    for t, pid, ldr in eng.transitions:
        if pid in prev:
            if prev[pid] != ldr:
                last_held[prev[pid]] = t
            prev[pid] = ldr

    for c, t_crash in rec.crashes:
        if c in prev.values():
            vios.append(f"a correct process still trusts crashed process "
                        f"{c} at the horizon")
            continue
        t_d = max(t_crash, last_held.get(c, 0))
        t_send = eng.last_send_for.get(c, 0)
        if t_send > t_d:
            vios.append(
                f"stale advertisement of crashed process {c}: sent at "
                f"{t_send}, after the last correct holder dropped it at {t_d}")

    conv = rec.convergence_time
    if conv is not None:
        ell = min(correct)
        for j, t_send in sorted(eng.last_send_for.items()):
            if j != ell and t_send > conv:
                vios.append(
                    f"impure traffic after convergence at {conv}: a message "
                    f"advertising {j} went out at {t_send}")

    bound = 8 * known_payload_bytes(n)
    if sc.algorithm == "known":
        if rec.max_message_bits > bound:
            vios.append(f"message payload of {rec.max_message_bits} bits "
                        f"exceeds the {bound}-bit id-pair bound")
        if eng.sends:
            for s in eng.sends:
                blen = len(encode_known(AliveKnown(s[3], s[4]), n))
                if blen * 8 != bound:
                    vios.append(
                        f"send at {s[0]} encoded to {blen} bytes instead of "
                        f"{bound // 8}")
                    break
    else:
        if rec.max_message_bits > bound + 8:
            vios.append(
                f"empty-pending message took {rec.max_message_bits} bits, "
                f"above the {bound + 8}-bit (id pair + flag byte) bound")
        sets = {p: frozenset(eng.states[p].known) for p in correct}
        if len(set(sets.values())) > 1:
            vios.append("correct processes disagree on known membership: "
                        + "; ".join(f"{p}: {sorted(s)}"
                                    for p, s in sorted(sets.items())))
        for p in sorted(correct):
            missing = correct - sets[p]
            if missing:
                vios.append(f"process {p} never discovered {sorted(missing)}")
        pairs = sorted({(min(u, v), max(u, v)) for u, v in rec.graph.edges})
        for cid, (u, v) in enumerate(pairs):
            if u not in correct or v not in correct:
                continue
            for side in (u, v):
                if eng.states[side].pending.get(cid):
                    vios.append(f"pending set on link {u}-{v} not empty at "
                                f"the horizon (process {side})")
            last_ne = eng.last_nonempty.get(cid, 0)
            if last_ne > 0.75 * sc.horizon:
                vios.append(
                    f"link {u}-{v} still carried pending entries at "
                    f"{last_ne}, inside the final quarter of the run")

    if sc.mode == "strict" and not rec.crashes and not rec.graph.overrides:
        delta = compute_delta(sc.K, sc.D, sc.T)
        diam = diameter(rec.graph) if n > 1 else 0
        if conv is None:
            vios.append("strict channels but no convergence inside the "
                        "horizon")
        elif conv - sc.stabilization > 3 * diam * delta:
            vios.append(
                f"convergence took {conv - sc.stabilization} ticks past "
                f"stabilization, above diameter*delta*3 = {3 * diam * delta}")
    return vios


COLUMNS = ("n", "diameter", "K", "D", "T", "drop_rate", "mode", "seed",
           "convergence_time", "discard_time", "reelection_time",
           "total_messages", "max_message_bits")

_MEAN_COLS = ("diameter", "convergence_time", "discard_time",
              "reelection_time", "total_messages", "max_message_bits")


@dataclass
class SweepSpec:
    """A parameter grid: one run per (size, drop rate, T, seed) cell.

    Ring sizes use one fixed graph; regular topologies draw a fresh
    degree-`degree` graph per seed, so the diameter column varies within
    a configuration there.  horizon = horizon_base + horizon_per_diameter
    * diameter, sized per topology.
    """

    sizes: tuple
    kind: str = "ring"
    degree: int = 3
    K: int = 4
    D: int = 12
    T_values: tuple = (1,)
    drop_rates: tuple = (0.0,)
    mode: str = "iid"
    algorithm: str = "known"
    seeds: tuple = (1, 2, 3)
    horizon_base: int = 1000
    horizon_per_diameter: int = 0
    stabilization: int = 0
    pre_drop: float = 1.0
    reelect: bool = False
    use_seq: bool = False


def _cell(args):
    spec, n, drop, T, seed = args
    if spec.kind == "ring":
        topo = {"kind": "ring", "n": n} if n > 1 else {"kind": "single"}
    elif spec.kind == "regular":
        topo = {"kind": "regular", "n": n, "degree": spec.degree,
                "seed": seed}
    else:
        raise ValueError(
            f"sweeps cover ring and regular topologies, not {spec.kind!r}")
    sc = Scenario(topology=topo, K=spec.K, D=spec.D, T=T, drop=drop,
                  mode=spec.mode, stabilization=spec.stabilization,
                  pre_drop=spec.pre_drop, algorithm=spec.algorithm,
                  horizon=spec.horizon_base, seed=seed,
                  reelect=spec.reelect, use_seq=spec.use_seq)
    g = _build_graph(sc)
    diam = diameter(g) if g.n > 1 else 0
    if spec.horizon_per_diameter:
        sc = dataclasses.replace(
            sc, horizon=spec.horizon_base + spec.horizon_per_diameter * diam)
    res = run_scenario(sc)
    re = res.reelection or {}
    return {
        "n": n, "diameter": diam, "K": spec.K, "D": spec.D, "T": T,
        "drop_rate": drop, "mode": spec.mode, "seed": seed,
        "convergence_time": res.convergence_time,
        "discard_time": re.get("discard_time"),
        "reelection_time": re.get("new_convergence_time"),
        "total_messages": res.total_messages,
        "max_message_bits": res.max_message_bits,
    }


def _mean_row(group):
    row = dict(group[0])
    row["seed"] = "mean"
    for col in _MEAN_COLS:
        vals = [r[col] for r in group if r[col] is not None]
        row[col] = statistics.fmean(vals) if vals else None
    return row


def sweep(spec: SweepSpec):
    """Run the grid and return rows in (size, drop, T, seed) order, with
    a mean row after each configuration's seeds.

    Worker count comes from OMEGASIM_WORKERS (default: cpu count); the
    output order never depends on it.
    """
    configs = [(n, drop, T) for n in spec.sizes for drop in spec.drop_rates
               for T in spec.T_values]
    jobs = [(spec, n, drop, T, seed) for (n, drop, T) in configs
            for seed in spec.seeds]
    workers = int(os.environ.get("OMEGASIM_WORKERS") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    workers = min(workers, len(jobs))
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            cells = pool.map(_cell, jobs)
    else:
        cells = [_cell(j) for j in jobs]
    rows = []
    per = len(spec.seeds)
    for i in range(len(configs)):
        group = cells[i * per:(i + 1) * per]
        rows.extend(group)
        rows.append(_mean_row(group))
    return rows


def _field(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_csv(rows, path, comments=()):
    """Write sweep rows under the fixed header; None becomes an empty
    field.  `comments` go first as '#'-prefixed provenance lines."""
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_field(row[c]) for c in COLUMNS])
