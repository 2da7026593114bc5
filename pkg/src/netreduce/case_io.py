"""Reading and writing grid cases and zone assignments.

Case files use a subset of the MATPOWER text format: ``mpc.baseMVA``, and the
``mpc.bus``, ``mpc.gen`` and ``mpc.branch`` matrices. Only the columns needed
by the DC model are interpreted:

========  ==========================================================
table     columns used (1-based MATPOWER numbering)
========  ==========================================================
bus       1 bus id, 2 type (3 = slack), 3 Pd [MW]
gen       1 bus id, 2 Pg [MW], 8 status (optional, default 1)
branch    1 from bus, 2 to bus, 4 reactance x [p.u.], 11 status
          (optional, default 1); tap ratio / shift are read but unused
========  ==========================================================

Any other ``mpc.*`` block is skipped. Zone files are plain text with one
``bus zone`` pair per line and ``#`` comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "CaseFormatError",
    "Network",
    "ZonalAssignment",
    "parse_case",
    "parse_zones",
    "read_case",
    "read_zones",
    "format_case",
    "write_reduced_case",
    "validate",
    "bundled_cases",
    "bundled_case_path",
]


class CaseFormatError(ValueError):
    """Raised for malformed or inconsistent case and zone data."""


@dataclass(frozen=True, eq=False)
class Network:
    """DC transmission network.

    Buses and branches keep file order; every matrix built downstream is
    indexed by these positions.
    """

    bus_ids: np.ndarray
    p_inj: np.ndarray  # net injection Pg - Pd per bus, MW
    from_bus: np.ndarray
    to_bus: np.ndarray
    x: np.ndarray  # branch reactance, p.u.
    status: np.ndarray
    slack_bus: int
    base_mva: float = 100.0
    name: str = "case"
    comments: tuple[str, ...] = field(default=())

    @property
    def n_b(self) -> int:
        return int(self.bus_ids.size)

    @property
    def n_l(self) -> int:
        return int(self.from_bus.size)

    @property
    def bus_index(self) -> dict[int, int]:
        return {int(b): i for i, b in enumerate(self.bus_ids)}

    @property
    def slack_index(self) -> int:
        return self.bus_index[self.slack_bus]

    @property
    def non_slack(self) -> np.ndarray:
        """Positions of all buses except the slack, in bus order."""
        return np.flatnonzero(self.bus_ids != self.slack_bus)

    def branch_labels(self) -> list[str]:
        return [f"{int(f)}-{int(t)}" for f, t in zip(self.from_bus, self.to_bus)]

    def in_service(self) -> "Network":
        """Copy of the network without out-of-service branches."""
        keep = self.status != 0
        if keep.all():
            return self
        return Network(
            bus_ids=self.bus_ids,
            p_inj=self.p_inj,
            from_bus=self.from_bus[keep],
            to_bus=self.to_bus[keep],
            x=self.x[keep],
            status=self.status[keep],
            slack_bus=self.slack_bus,
            base_mva=self.base_mva,
            name=self.name,
            comments=self.comments,
        )


@dataclass(frozen=True)
class ZonalAssignment:
    """Total map from bus id to zone id, zones numbered 1..n_z."""

    zone_of: dict[int, int]
    slack_zone: int

    @property
    def zones(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.zone_of.values())))

    @property
    def n_z(self) -> int:
        return len(self.zones)

    @property
    def non_slack_zones(self) -> tuple[int, ...]:
        return tuple(z for z in self.zones if z != self.slack_zone)

    def buses_in(self, zone: int) -> list[int]:
        return [b for b, z in self.zone_of.items() if z == zone]

    @classmethod
    def identity(cls, net: Network) -> "ZonalAssignment":
        """Every bus in its own zone (zone k = k-th bus in file order)."""
        zone_of = {int(b): i + 1 for i, b in enumerate(net.bus_ids)}
        return cls(zone_of=zone_of, slack_zone=zone_of[net.slack_bus])


# ---------------------------------------------------------------------------
# case parsing
# ---------------------------------------------------------------------------

_BLOCK_START = re.compile(r"^\s*mpc\.(\w+)\s*=\s*\[(.*)$")
_SCALAR = re.compile(r"^\s*mpc\.(\w+)\s*=\s*([^\[;]+?)\s*;?\s*$")

_MIN_COLS = {"bus": 3, "gen": 2, "branch": 4}


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _parse_row(tokens: list[str], lineno: int) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not _is_number(t))
        raise CaseFormatError(f"line {lineno}: syntax error, non-numeric value {bad!r}") from None


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _read_blocks(text: str) -> tuple[dict[str, list[tuple[int, list[float]]]], dict[str, str]]:
    blocks: dict[str, list[tuple[int, list[float]]]] = {}
    scalars: dict[str, str] = {}
    current: str | None = None
    start_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if current is None:
            m = _BLOCK_START.match(line)
            if m:
                current, start_line = m.group(1), lineno
                blocks[current] = []
                line = m.group(2)
            else:
                s = _SCALAR.match(line)
                if s:
                    scalars[s.group(1)] = s.group(2).strip()
                continue
        closed = "]" in line
        if closed:
            line = line[: line.index("]")]
        for chunk in line.split(";"):
            tokens = chunk.replace(",", " ").split()
            if tokens:
                blocks[current].append((lineno, _parse_row(tokens, lineno)))
        if closed:
            current = None
    if current is not None:
        raise CaseFormatError(f"line {start_line}: syntax error, matrix mpc.{current} is never closed")
    return blocks, scalars


def parse_case(text: str, name: str = "case") -> Network:
    """Parse MATPOWER-style case text into a :class:`Network`.

    Injections are net per bus (generation minus load, in MW); out-of-service
    generators contribute nothing. Branch status is kept, so callers decide
    whether to drop out-of-service branches (all matrix builders do).
    """
    blocks, scalars = _read_blocks(text)
    for table in ("bus", "branch"):
        if table not in blocks:
            raise CaseFormatError(f"missing mpc.{table} table")
    for table, rows in blocks.items():
        need = _MIN_COLS.get(table)
        if need is None:
            continue
        for lineno, row in rows:
            if len(row) < need:
                raise CaseFormatError(
                    f"line {lineno}: syntax error, mpc.{table} row needs at least {need} columns"
                )

    base_mva = 100.0
    if "baseMVA" in scalars:
        try:
            base_mva = float(scalars["baseMVA"])
        except ValueError:
            raise CaseFormatError(f"invalid baseMVA {scalars['baseMVA']!r}") from None

    bus_rows = blocks["bus"]
    bus_ids = np.array([int(r[0]) for _, r in bus_rows], dtype=int)
    index: dict[int, int] = {}
    for (lineno, _), b in zip(bus_rows, bus_ids):
        if int(b) in index:
            raise CaseFormatError(f"line {lineno}: duplicate bus id {int(b)}")
        index[int(b)] = len(index)

    slack = [int(r[0]) for _, r in bus_rows if int(r[1]) == 3]
    if not slack:
        raise CaseFormatError("no slack bus (bus type 3) in mpc.bus")
    if len(slack) > 1:
        raise CaseFormatError(f"multiple slack buses: {slack}")

    p_inj = np.array([-r[2] for _, r in bus_rows], dtype=float)
    for lineno, r in blocks.get("gen", []):
        bus = int(r[0])
        if bus not in index:
            raise CaseFormatError(f"line {lineno}: generator at unknown bus {bus}")
        if len(r) > 7 and r[7] <= 0:
            continue
        p_inj[index[bus]] += r[1]

    fb, tb, x, st = [], [], [], []
    for lineno, r in blocks["branch"]:
        f, t = int(r[0]), int(r[1])
        for bus in (f, t):
            if bus not in index:
                raise CaseFormatError(f"line {lineno}: branch {f}-{t} references unknown bus {bus}")
        if f == t:
            raise CaseFormatError(f"line {lineno}: branch {f}-{t} connects a bus to itself")
        fb.append(f)
        tb.append(t)
        x.append(r[3])
        st.append(int(r[10] > 0) if len(r) > 10 else 1)

    return Network(
        bus_ids=bus_ids,
        p_inj=p_inj,
        from_bus=np.array(fb, dtype=int),
        to_bus=np.array(tb, dtype=int),
        x=np.array(x, dtype=float),
        status=np.array(st, dtype=int),
        slack_bus=slack[0],
        base_mva=base_mva,
        name=name,
        comments=_header_comments(text),
    )


def _header_comments(text: str) -> tuple[str, ...]:
    """Leading ``%`` comment block after the ``function`` line."""
    out = []
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("function") and not out:
            continue
        if not s.startswith("%") or s.startswith("%%"):
            break
        out.append(s[1:].strip())
    return tuple(out)


def validate(net: Network) -> None:
    """Check the in-service network is usable for DC analysis.

    Raises :class:`CaseFormatError` on zero reactance or a disconnected graph.
    """
    live = net.in_service()
    for k in np.flatnonzero(live.x == 0):
        raise CaseFormatError(
            f"branch {k + 1} ({live.from_bus[k]}-{live.to_bus[k]}) has zero reactance"
        )
    idx = net.bus_index
    rows = [idx[int(b)] for b in live.from_bus]
    cols = [idx[int(b)] for b in live.to_bus]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(net.n_b, net.n_b))
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        raise CaseFormatError(f"network is disconnected ({n_comp} islands)")


# ---------------------------------------------------------------------------
# zones
# ---------------------------------------------------------------------------


def parse_zones(text: str, net: Network) -> ZonalAssignment:
    """Parse ``bus zone`` lines and bind them to ``net``.

    The slack zone is the zone holding the network's slack bus. Zone ids must
    cover 1..n_z without gaps.
    """
    known = net.bus_index
    zone_of: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise CaseFormatError(f"line {lineno}: expected 'bus zone', got {raw.strip()!r}")
        try:
            bus, zone = int(parts[0]), int(parts[1])
        except ValueError:
            raise CaseFormatError(f"line {lineno}: expected integers, got {raw.strip()!r}") from None
        if bus not in known:
            raise CaseFormatError(f"line {lineno}: unknown bus {bus}")
        if bus in zone_of and zone_of[bus] != zone:
            raise CaseFormatError(f"line {lineno}: bus {bus} assigned to zones {zone_of[bus]} and {zone}")
        if zone < 1:
            raise CaseFormatError(f"line {lineno}: zone ids start at 1, got {zone}")
        zone_of[bus] = zone

    missing = [int(b) for b in net.bus_ids if int(b) not in zone_of]
    if missing:
        listed = ", ".join(map(str, missing))
        raise CaseFormatError(f"bus {listed} unassigned")
    used = set(zone_of.values())
    for z in range(1, max(used) + 1):
        if z not in used:
            raise CaseFormatError(f"zone {z} is empty")
    if len(used) < 2:
        raise CaseFormatError("at least two zones are required")
    # keep bus order of the network
    ordered = {int(b): zone_of[int(b)] for b in net.bus_ids}
    return ZonalAssignment(zone_of=ordered, slack_zone=ordered[net.slack_bus])


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

_BUNDLED = {"ieee14": "ieee14", "ieee39": "ieee39", "six_bus": "six_bus", "6bus": "six_bus"}


def bundled_cases() -> list[str]:
    return sorted(set(_BUNDLED.values()))


def bundled_case_path(name: str, zones: bool = False) -> Path:
    """Path to a case (or its zone file) shipped with the package."""
    stem = _BUNDLED[name]
    fname = f"{stem}_zones.txt" if zones else f"{stem}.m"
    return Path(str(resources.files("netreduce") / "data" / fname))


def _resolve(path: str | Path, zones: bool = False) -> Path:
    p = Path(path)
    if not p.exists() and str(path) in _BUNDLED:
        return bundled_case_path(str(path), zones=zones)
    return p


def read_case(path: str | Path) -> Network:
    """Read a case file; bundled names such as ``ieee14`` are accepted."""
    p = _resolve(path)
    return parse_case(p.read_text(encoding="utf-8"), name=p.stem)


def read_zones(path: str | Path, net: Network) -> ZonalAssignment:
    p = _resolve(path, zones=True)
    return parse_zones(p.read_text(encoding="utf-8"), net)


def _num(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_case(net: Network) -> str:
    """Render ``net`` as case text that :func:`parse_case` reads back exactly."""
    lines = [f"function mpc = {net.name}"]
    lines += [f"% {c}" if c else "%" for c in net.comments]
    lines += [
        "",
        "%% MATPOWER Case Format : Version 2",
        "mpc.version = '2';",
        "",
        "%% system MVA base",
        f"mpc.baseMVA = {_num(net.base_mva)};",
        "",
        "%% bus data",
        "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
        "mpc.bus = [",
    ]
    for b, p in zip(net.bus_ids, net.p_inj):
        btype = 3 if int(b) == net.slack_bus else 1
        pd = -p if p < 0 else 0.0
        lines.append(f"\t{int(b)}\t{btype}\t{_num(pd)}\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;")
    lines += [
        "];",
        "",
        "%% generator data",
        "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
        "mpc.gen = [",
    ]
    for b, p in zip(net.bus_ids, net.p_inj):
        if p > 0:
            lines.append(f"\t{int(b)}\t{_num(p)}\t0\t0\t0\t1\t{_num(net.base_mva)}\t1\t{_num(p)}\t0;")
    lines += [
        "];",
        "",
        "%% branch data",
        "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus",
        "mpc.branch = [",
    ]
    for f, t, x, s in zip(net.from_bus, net.to_bus, net.x, net.status):
        lines.append(f"\t{int(f)}\t{int(t)}\t0\t{_num(x)}\t0\t0\t0\t0\t0\t0\t{int(s)};")
    lines += ["];", ""]
    return "\n".join(lines)


def write_reduced_case(reduced: Network, path: str | Path) -> None:
    """Write a reduced (zonal) network as a case file."""
    if reduced.n_l == 0:
        raise CaseFormatError("degenerate reduced network: no branches")
    Path(path).write_text(format_case(reduced), encoding="utf-8")
