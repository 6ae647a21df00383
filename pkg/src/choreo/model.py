"""Domain types: mass systems, sign words, sampled arcs and loops.

Conventions used throughout the package:

* the choreography problem has ``2n`` unit masses and time period ``n``;
* a :class:`FundamentalArc` holds the track of body 0 on ``[0, n/4]``
  sampled at ``M + 1`` uniform nodes -- the full set of degrees of
  freedom of an equivariant loop;
* a :class:`FullLoop` holds all body positions on one period, sampled
  uniformly, with periodic wraparound at the last index.

All types are immutable value objects (arrays are frozen); operations
return new values.
"""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

TRAJECTORY_FORMAT = "choreo-trajectory"
TRAJECTORY_VERSION = 1

MIN_SAMPLES = 8


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MassSystem:
    """N point masses. body_count >= 2, all masses positive."""

    body_count: int
    masses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "masses", _frozen(self.masses))
        if self.body_count < 2:
            raise ValueError("body_count must be >= 2")
        if self.masses.shape != (self.body_count,):
            raise ValueError("masses must have length body_count")
        if not np.all(self.masses > 0):
            raise ValueError("all masses must be positive")

    @staticmethod
    def choreography(n: int) -> "MassSystem":
        """Equal unit masses for the 2n-body double-choreography problem."""
        if n < 2:
            raise ValueError("n must be >= 2")
        return MassSystem(2 * n, np.ones(2 * n))


@dataclass(frozen=True)
class OmegaSequence:
    """Sign word selecting how the two loops tangle along the z-axis.

    ``signs`` has length floor(n/2) + 1 with entries in {+1, -1}; entry i
    prescribes the sign of z_0 at time i/2.  Structural validity is
    enforced here; admissibility (non-constant word, and the extra
    condition for odd n) is checked by ``constraints.validate_omega``.
    """

    n: int
    signs: tuple

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        signs = tuple(int(s) for s in self.signs)
        object.__setattr__(self, "signs", signs)
        want = self.n // 2 + 1
        if len(signs) != want:
            raise ValueError(f"omega for n={self.n} needs {want} signs, got {len(signs)}")
        if any(s not in (-1, 1) for s in signs):
            raise ValueError("omega entries must be +1 or -1")

    @staticmethod
    def from_word(n: int, word: str) -> "OmegaSequence":
        """Parse a comma-separated '+'/'-' token word, e.g. '+,-,+'."""
        tokens = [t.strip() for t in word.split(",") if t.strip()]
        table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
        try:
            signs = tuple(table[t] for t in tokens)
        except KeyError as exc:
            raise ValueError(f"bad omega token {exc.args[0]!r} in {word!r}") from None
        return OmegaSequence(n, signs)

    @property
    def word(self) -> str:
        return ",".join("+" if s > 0 else "-" for s in self.signs)

    def flipped(self) -> "OmegaSequence":
        return OmegaSequence(self.n, tuple(-s for s in self.signs))


@dataclass(frozen=True)
class FundamentalArc:
    """Sampled track of body 0 on [0, n/4] at times t_k = (n/4) k / M.

    Boundary identities pin y at the first node and x at the last node
    to zero; ``boundary_residual`` measures how far a raw arc is from
    them.  Weak feasibility additionally asks the x and y samples to be
    nondecreasing in k.
    """

    n: int
    samples: np.ndarray  # (M + 1, 3)

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen(self.samples))
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.samples.ndim != 2 or self.samples.shape[1] != 3:
            raise ValueError("samples must be (M + 1, 3)")
        if self.node_count < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} arc intervals")

    @property
    def node_count(self) -> int:
        """M: number of intervals (samples has M + 1 rows)."""
        return self.samples.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        m = self.node_count
        return (self.n / 4.0) * np.arange(m + 1) / m

    def boundary_residual(self) -> float:
        return float(max(abs(self.samples[0, 1]), abs(self.samples[-1, 0])))

    def with_samples(self, samples) -> "FundamentalArc":
        return FundamentalArc(self.n, samples)


@dataclass(frozen=True)
class FullLoop:
    """Positions of all bodies over one period, uniformly sampled.

    ``positions[s, i]`` is body i at time t_s = period * s / S; index S
    wraps to index 0.
    """

    mass_system: MassSystem
    period: float
    positions: np.ndarray  # (S, N, 3)

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        s, nbody, three = self.positions.shape
        if three != 3:
            raise ValueError("positions must be (S, N, 3)")
        if nbody != self.mass_system.body_count:
            raise ValueError("positions body axis must match mass_system")
        if s < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples")
        if self.period <= 0:
            raise ValueError("period must be positive")

    @property
    def sample_count(self) -> int:
        return self.positions.shape[0]

    @property
    def times(self) -> np.ndarray:
        s = self.sample_count
        return self.period * np.arange(s) / s

    def track(self, i: int) -> np.ndarray:
        return self.positions[:, i, :]

    def position(self, s: int) -> np.ndarray:
        return self.positions[s % self.sample_count]


@dataclass(frozen=True)
class ConstraintFlags:
    """Feasibility summary carried inside an ActionReport."""

    boundary_ok: bool
    x_monotone: str  # "strict" | "weak" | "violated"
    y_monotone: str
    topo_satisfied: bool | None = None  # None when no omega was supplied


@dataclass(frozen=True)
class ActionReport:
    kinetic_integral: float
    potential_integral: float
    action: float
    gradient_inf_norm: float
    min_pairwise_distance: float
    constraint_flags: ConstraintFlags | None = None

    def as_dict(self) -> dict:
        d = {
            "kinetic_integral": self.kinetic_integral,
            "potential_integral": self.potential_integral,
            "action": self.action,
            "gradient_inf_norm": self.gradient_inf_norm,
            "min_pairwise_distance": self.min_pairwise_distance,
        }
        if self.constraint_flags is not None:
            d["constraint_flags"] = vars(self.constraint_flags)
        return d


def resample(loop: FullLoop, new_sample_count: int) -> FullLoop:
    """Periodic linear-in-time resampling of a loop.

    Identity when the count is unchanged and the new grid nodes land on
    old ones (values are copied, not recomputed).
    """
    if new_sample_count < MIN_SAMPLES:
        raise ValueError(f"new_sample_count must be >= {MIN_SAMPLES}")
    s_old = loop.sample_count
    if new_sample_count == s_old:
        return loop
    # new node s' sits at old fractional index s' * S / S'
    idx = np.arange(new_sample_count) * s_old
    base, rem = np.divmod(idx, new_sample_count)
    w = rem / new_sample_count
    nxt = (base + 1) % s_old
    pos = loop.positions
    new = pos[base] + w[:, None, None] * (pos[nxt] - pos[base])
    return FullLoop(loop.mass_system, loop.period, new)


def resample_arc(arc: FundamentalArc, new_node_count: int) -> FundamentalArc:
    """Linear-in-time resampling of an arc (non-periodic, ends clamped)."""
    if new_node_count < MIN_SAMPLES:
        raise ValueError(f"new_node_count must be >= {MIN_SAMPLES}")
    m_old = arc.node_count
    if new_node_count == m_old:
        return arc
    idx = np.arange(new_node_count + 1) * m_old
    base, rem = np.divmod(idx, new_node_count)
    base = np.minimum(base, m_old - 1)
    w = (idx - base * new_node_count) / new_node_count
    new = arc.samples[base] + w[:, None] * (arc.samples[base + 1] - arc.samples[base])
    new[-1] = arc.samples[-1]
    return FundamentalArc(arc.n, new)


# ---------------------------------------------------------------------------
# trajectory file format (self-describing JSON text document)
# ---------------------------------------------------------------------------

def trajectory_document(loop: FullLoop, n: int | None = None,
                        omega: OmegaSequence | None = None,
                        arc_node_count: int | None = None,
                        provenance: dict | None = None,
                        certificate: dict | None = None) -> dict:
    meta = {
        "format": TRAJECTORY_FORMAT,
        "version": TRAJECTORY_VERSION,
        "n": n,
        "omega": list(omega.signs) if omega is not None else None,
        "period": loop.period,
        "sample_count": loop.sample_count,
        "body_count": loop.mass_system.body_count,
        "arc_node_count": arc_node_count,
        "masses": loop.mass_system.masses.tolist(),
        "positions": loop.positions.reshape(-1, 3).tolist(),
        "provenance": dict(provenance or {}),
    }
    meta["provenance"].setdefault("created", datetime.now(timezone.utc).isoformat())
    meta["provenance"].setdefault("tool", "choreo")
    if certificate is not None:
        meta["certificate"] = certificate
    return meta


def save_trajectory(path, loop: FullLoop, **kwargs) -> None:
    """Write a loop to the self-describing trajectory file (JSON text).

    Round-trips positions bit-exactly: floats are serialized with full
    shortest-representation precision.
    """
    doc = trajectory_document(loop, **kwargs)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_trajectory(path):
    """Read a trajectory file; returns (FullLoop, metadata dict)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != TRAJECTORY_FORMAT:
        raise ValueError(f"{path}: not a {TRAJECTORY_FORMAT} file")
    nbody = doc["body_count"]
    s = doc["sample_count"]
    pos = np.array(doc["positions"], dtype=np.float64).reshape(s, nbody, 3)
    masses = np.array(doc.get("masses", np.ones(nbody)), dtype=np.float64)
    loop = FullLoop(MassSystem(nbody, masses), float(doc["period"]), pos)
    return loop, doc


def export_csv(path, loop: FullLoop) -> None:
    """One row per (time, body, x, y, z)."""
    times = loop.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "body", "x", "y", "z"])
        for s, t in enumerate(times):
            for i in range(loop.mass_system.body_count):
                x, y, z = loop.positions[s, i]
                writer.writerow([repr(float(t)), i, repr(float(x)), repr(float(y)), repr(float(z))])
