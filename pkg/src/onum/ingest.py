"""Trace loading, arrival synthesis and a synthetic Abilene-shaped network."""

from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .core import Arrival, DomainError, Instance, LinearUtility, LogUtility, Network

SLOTS_PER_EPISODE = 288
ABILENE_NODES = 11
ABILENE_LINKS = 41
ABILENE_SLOTS = 2016


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class TraceFormatError(ValueError):
    def __init__(self, message: str, row: int, col: int | None = None):
        loc = f"row {row}" if col is None else f"row {row}, column {col}"
        super().__init__(f"{message}, {loc}")
        self.row, self.col = row, col


class RowLengthError(TraceFormatError):
    pass


class BadValueError(TraceFormatError):
    pass


class NegativeTrafficError(TraceFormatError):
    pass


class NonBinaryRoutingError(TraceFormatError):
    pass


class EmptyRouteError(TraceFormatError):
    pass


# ---------------------------------------------------------------------------
# Matrices and their CSV form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrafficMatrix:
    """Traffic volume per 5-minute slot (rows) and source-destination pair (columns)."""

    volumes: np.ndarray

    @property
    def shape(self):
        return self.volumes.shape


@dataclass(frozen=True)
class RoutingMatrix:
    """Binary pair-by-link incidence; row j is the path of pair j."""

    matrix: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def link_count(self) -> int:
        return self.matrix.shape[1]

    def path(self, pair: int) -> tuple[int, ...]:
        return tuple(int(l) for l in np.flatnonzero(self.matrix[pair]))


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row]


def load_traffic(path) -> TrafficMatrix:
    rows = _read_rows(path)
    width = len(rows[0]) if rows else 0
    out = np.zeros((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise RowLengthError(f"expected {width} values, got {len(row)}", r)
        for c, tok in enumerate(row):
            try:
                v = float(tok)
            except ValueError:
                raise BadValueError(f"not a number: {tok!r}", r, c) from None
            if not v >= 0 or math.isinf(v):
                raise NegativeTrafficError(f"traffic must be finite and nonnegative, got {tok}", r, c)
            out[r, c] = v
    return TrafficMatrix(out)


def load_routing(path) -> RoutingMatrix:
    rows = _read_rows(path)
    width = len(rows[0]) if rows else 0
    out = np.zeros((len(rows), width), dtype=np.int8)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise RowLengthError(f"expected {width} values, got {len(row)}", r)
        for c, tok in enumerate(row):
            tok = tok.strip()
            if tok not in ("0", "1"):
                raise NonBinaryRoutingError(f"routing entry must be 0 or 1, got {tok!r}", r, c)
            out[r, c] = int(tok)
        if not out[r].any():
            raise EmptyRouteError("empty route", r)
    return RoutingMatrix(out)


def save_traffic(tm: TrafficMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        for row in tm.volumes:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_routing(rm: RoutingMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        for row in rm.matrix:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named concern derived from a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))


def truncated_gaussian_array(mu, sigma: float, lb: float, ub: float,
                             rng: np.random.Generator) -> np.ndarray:
    """Gaussian(mu, sigma) conditioned on [lb, ub], one draw per entry of ``mu``.

    Rejection from the untruncated Gaussian; entries whose acceptance mass is
    below 1% fall back to inverse-CDF sampling.
    """
    if lb > ub:
        raise DomainError(f"lb > ub ({lb} > {ub})")
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if sigma == 0:
        return np.clip(mu, lb, ub)
    lo, hi = (lb - mu) / sigma, (ub - mu) / sigma
    mass = stats.norm.cdf(hi) - stats.norm.cdf(lo)
    out = np.empty_like(mu)
    rare = mass < 0.01
    pending = np.flatnonzero(~rare)
    while pending.size:
        draw = rng.normal(mu[pending], sigma)
        ok = (draw >= lb) & (draw <= ub)
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
    if rare.any():
        u = rng.uniform(size=int(rare.sum()))
        out[rare] = stats.truncnorm.ppf(u, lo[rare], hi[rare], loc=mu[rare], scale=sigma)
        out[rare] = np.clip(out[rare], lb, ub)
    return out


def truncated_gaussian(mu: float, sigma: float, lb: float, ub: float,
                       rng: np.random.Generator) -> float:
    return float(truncated_gaussian_array([mu], sigma, lb, ub, rng)[0])


@dataclass(frozen=True)
class UtilityDistSpec:
    """Distribution of the log-utility coefficients a_i.

    ``var`` is the variance of the underlying Gaussian. With ``mu_end`` set,
    the mean drifts linearly from ``mu`` to ``mu_end`` across the arrival
    index. Budgets are always Uniform(0, 1).
    """

    mu: float
    var: float
    lb: float
    ub: float
    mu_end: float | None = None

    def __post_init__(self):
        if self.lb > self.ub:
            raise DomainError("LB must not exceed UB")
        if self.var < 0:
            raise DomainError("variance must be nonnegative")

    @classmethod
    def fixed(cls, mu, var, lb, ub):
        return cls(mu, var, lb, ub)

    @classmethod
    def drift(cls, mu_start, mu_end, var, lb, ub):
        return cls(mu_start, var, lb, ub, mu_end=mu_end)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.var)

    def means(self, n: int) -> np.ndarray:
        if self.mu_end is None or n <= 1:
            return np.full(n, float(self.mu))
        return np.linspace(self.mu, self.mu_end, n)


def coefficient_bounds(m: float, M: float, b_max: float = 1.0) -> tuple[float, float]:
    """(LB, UB) keeping a/(1+y) within [m, M] for every y in [0, b_max]."""
    return m * (1.0 + b_max), M


# ---------------------------------------------------------------------------
# Instance synthesis
# ---------------------------------------------------------------------------

def synthesize_instance(traffic: TrafficMatrix, routing: RoutingMatrix, slot_range,
                        rate_scale: float, spec: UtilityDistSpec, seed) -> Instance:
    """Poisson arrivals per (slot, pair) with rate proportional to the pair's traffic share.

    ``rate_scale`` is the expected number of arrivals per slot. Arrivals from
    different pairs in the same slot are interleaved by a seeded shuffle.
    """
    vol = traffic.volumes
    if vol.shape[1] != routing.shape[0]:
        raise DomainError(f"traffic has {vol.shape[1]} pairs, routing has {routing.shape[0]}")
    if not rate_scale > 0:
        raise DomainError("rate_scale must be positive")
    slots = range(*slot_range) if isinstance(slot_range, tuple) else slot_range
    block = vol[list(slots)]
    totals = block.sum(axis=1, keepdims=True)
    share = np.divide(block, totals, out=np.zeros_like(block), where=totals > 0)

    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate_scale * share)
    order = []
    for row in counts:
        seq = np.repeat(np.arange(len(row)), row)
        rng.shuffle(seq)
        order.extend(seq.tolist())
    n = len(order)
    budgets = rng.uniform(0.0, 1.0, size=n)
    coefs = truncated_gaussian_array(spec.means(n), spec.sigma, spec.lb, spec.ub, rng) if n else []

    paths = [routing.path(j) for j in range(routing.shape[0])]
    arrivals = tuple(
        Arrival(LogUtility(float(a), float(len(paths[j]))), paths[j], float(b))
        for j, a, b in zip(order, coefs, budgets)
    )
    return Instance(Network(routing.link_count), arrivals)


def make_episodes(traffic: TrafficMatrix, routing: RoutingMatrix, spec: UtilityDistSpec,
                  seed: int, rate_scale: float = 0.5,
                  slots_per_episode: int = SLOTS_PER_EPISODE) -> list[Instance]:
    """One instance per consecutive day-long block of slots; a trailing partial block is dropped."""
    T = traffic.shape[0]
    if T < slots_per_episode:
        raise DomainError(f"need at least {slots_per_episode} slots, got {T}")
    seeds = np.random.SeedSequence(seed).spawn(T // slots_per_episode)
    return [
        synthesize_instance(traffic, routing, (e * slots_per_episode, (e + 1) * slots_per_episode),
                            rate_scale, spec, seeds[e])
        for e in range(T // slots_per_episode)
    ]


# ---------------------------------------------------------------------------
# Synthetic Abilene-shaped trace
# ---------------------------------------------------------------------------

def generate_synthetic_abilene(seed: int, slots: int = ABILENE_SLOTS
                               ) -> tuple[TrafficMatrix, RoutingMatrix]:
    """11 nodes, 41 directed links, 110 ordered pairs, diurnal lognormal traffic."""
    rng = np.random.default_rng(seed)
    n = ABILENE_NODES
    arcs = {(i, (i + 1) % n) for i in range(n)} | {((i + 1) % n, i) for i in range(n)}
    spare = sorted({(i, j) for i in range(n) for j in range(n) if i != j} - arcs)
    extra = rng.choice(len(spare), size=ABILENE_LINKS - len(arcs), replace=False)
    arcs = sorted(arcs | {spare[k] for k in extra})
    link_of = {arc: k for k, arc in enumerate(arcs)}
    weights = rng.uniform(1.0, 10.0, size=len(arcs))
    graph = csr_matrix((weights, ([a for a, _ in arcs], [b for _, b in arcs])), shape=(n, n))
    _, pred = shortest_path(graph, directed=True, return_predecessors=True)

    pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    routing = np.zeros((len(pairs), len(arcs)), dtype=np.int8)
    for p, (s, d) in enumerate(pairs):
        node = d
        while node != s:
            prev = pred[s, node]
            routing[p, link_of[(prev, node)]] = 1
            node = prev

    base = rng.lognormal(0.0, 1.0, size=len(pairs))
    phase = rng.normal(0.0, 0.3, size=len(pairs))
    t = np.arange(slots)[:, None]
    diurnal = 1.0 + 0.6 * np.sin(2 * np.pi * t / SLOTS_PER_EPISODE + phase[None, :])
    noise = rng.lognormal(0.0, 0.2, size=(slots, len(pairs)))
    traffic = base[None, :] * diurnal * noise
    return TrafficMatrix(traffic), RoutingMatrix(routing)


# ---------------------------------------------------------------------------
# Instance CSV
# ---------------------------------------------------------------------------

INSTANCE_FIELDS = ["index", "variant", "a_or_s", "k", "budget", "links"]


def write_instance(inst: Instance, fh) -> None:
    fh.write(f"# link_count={inst.link_count}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(INSTANCE_FIELDS)
    for i, arr in enumerate(inst.arrivals):
        u = arr.utility
        if isinstance(u, LogUtility):
            variant, coef, k = "log", repr(float(u.a)), repr(float(u.k))
        else:
            variant, coef, k = "linear", repr(float(u.s)), ""
        w.writerow([i, variant, coef, k, repr(arr.budget), ";".join(map(str, arr.links))])


def instance_to_text(inst: Instance) -> str:
    buf = io.StringIO()
    write_instance(inst, buf)
    return buf.getvalue()


def read_instance(fh) -> Instance:
    lines = list(fh)
    link_count = None
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "link_count":
                link_count = int(val)
        else:
            body.append(line)
    arrivals = []
    for r, row in enumerate(csv.DictReader(body)):
        links = [int(x) for x in row["links"].split(";") if x != ""]
        if row["variant"] == "log":
            u = LogUtility(float(row["a_or_s"]), float(row["k"]))
        elif row["variant"] == "linear":
            u = LinearUtility(float(row["a_or_s"]))
        else:
            raise TraceFormatError(f"unknown variant {row['variant']!r}", r)
        arrivals.append(Arrival(u, tuple(links), float(row["budget"])))
    if link_count is None:
        link_count = max((a.links[-1] for a in arrivals), default=0) + 1
    return Instance(Network(link_count), tuple(arrivals))


def save_instance(inst: Instance, path) -> None:
    with open(path, "w", newline="") as fh:
        write_instance(inst, fh)


def load_instance(path) -> Instance:
    with open(path, newline="") as fh:
        return read_instance(fh)
