"""Sign-sector partition of the extreme latent region and support-set selection.

A sector is fixed by the selected variables, a threshold ``th`` and one sign
per variable. Bit ``i`` of a sector id is set when ``z[selected[i]]`` is
negative. Under the default ``"coordinate"`` rule a point belongs to a sector
only if every selected coordinate has magnitude at least ``th``; the
``"euclidean"`` rule instead bounds the norm of the selected sub-vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .importance import GainReport
from .numerics.rng import RngState

NONE = -1
RULES = ("coordinate", "euclidean")


def _ids_and_mask(Z, selected, th, rule):
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    sub = Z[:, np.asarray(selected, dtype=int)]
    if rule == "coordinate":
        inside = np.all(np.abs(sub) >= th, axis=1)
    elif rule == "euclidean":
        inside = (np.linalg.norm(sub, axis=1) >= th) & np.all(sub != 0, axis=1)
    else:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    bits = (sub < 0).astype(np.int64)
    ids = (bits << np.arange(len(selected), dtype=np.int64)).sum(axis=1)
    return np.where(inside, ids, NONE), sub


def sector_ids(Z, selected, th: float, rule: str = "coordinate") -> np.ndarray:
    """Sector id per row of ``Z``, or -1 when the row lies in no sector."""
    if th <= 0:
        raise ValueError("th must be > 0")
    return _ids_and_mask(Z, selected, th, rule)[0]


def sector_of(z, selected, th: float, rule: str = "coordinate"):
    sid = int(sector_ids(np.asarray(z)[None], selected, th, rule)[0])
    return None if sid == NONE else sid


def sector_signs(sector_id: int, n: int) -> np.ndarray:
    return np.where((sector_id >> np.arange(n)) & 1, -1, 1)


def sector_census(Z, selected, th: float, rule: str = "coordinate"):
    """Returns ``(counts, none_count)``; ``counts`` has length 2**n."""
    if len(Z) == 0:
        raise ValueError("encodings are empty")
    ids = sector_ids(Z, selected, th, rule)
    counts = np.bincount(ids[ids >= 0], minlength=2 ** len(selected))
    return counts, int(np.sum(ids == NONE))


@dataclass
class SupportSet:
    indices: list[int]
    tags: list  # sector id (int) or "topup"
    n: int
    th: float
    target_size: int
    selected: list[int]
    rule: str = "coordinate"
    random_pick: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def n_sector_picks(self) -> int:
        return sum(1 for t in self.tags if t != "topup")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "th": self.th,
            "target_size": self.target_size,
            "selected_vars": [int(i) for i in self.selected],
            "rule": self.rule,
            "pick": "random" if self.random_pick else "extreme",
            "entries": [
                {"dataset_index": int(i), "sector_id": (t if t == "topup" else int(t))}
                for i, t in zip(self.indices, self.tags)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SupportSet":
        entries = d["entries"]
        return cls(
            indices=[int(e["dataset_index"]) for e in entries],
            tags=[e["sector_id"] for e in entries],
            n=int(d["n"]),
            th=float(d["th"]),
            target_size=int(d["target_size"]),
            selected=[int(i) for i in d["selected_vars"]],
            rule=d.get("rule", "coordinate"),
            random_pick=d.get("pick") == "random",
        )


def farthest_point_topup(Z, chosen, k: int) -> list[int]:
    """Greedy farthest-point additions to ``chosen``; ties go to the lowest index."""
    Z = np.asarray(Z, dtype=np.float64)
    n = len(Z)
    taken = np.zeros(n, dtype=bool)
    taken[list(chosen)] = True
    added: list[int] = []
    if k <= 0 or taken.all():
        return added
    if chosen:
        diff = Z[:, None, :] - Z[None, list(chosen), :]
        dist = np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
    else:
        # no anchor yet: start from the point farthest from the origin
        dist = np.einsum("ij,ij->i", Z, Z)
    dist[taken] = -np.inf
    for _ in range(min(k, n - taken.sum())):
        i = int(np.argmax(dist))  # argmax returns the first maximum
        added.append(i)
        taken[i] = True
        d_new = np.einsum("ij,ij->i", Z - Z[i], Z - Z[i])
        dist = np.minimum(dist, d_new)
        dist[taken] = -np.inf
    return added


def build_support_set(
    Z,
    gains: GainReport,
    n: int,
    th: float,
    target_size: int,
    rule: str = "coordinate",
    random_pick: bool = False,
    seed: int = 0,
) -> SupportSet:
    """One representative per occupied sector, then farthest-point top-ups.

    The representative is the member maximizing the smallest selected
    magnitude (lowest index on ties); ``random_pick`` draws a uniformly random
    member instead. If more sectors are occupied than ``target_size``, the
    most populated sectors win (lowest id on ties).
    """
    Z = np.asarray(Z, dtype=np.float64)
    if len(Z) == 0:
        raise ValueError("encodings are empty")
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    selected = gains.order[:n]
    ids, sub = _ids_and_mask(Z, selected, th, rule)
    counts = np.bincount(ids[ids >= 0], minlength=2**n)
    occupied = np.flatnonzero(counts)
    if len(occupied) > target_size:
        keep = np.lexsort((occupied, -counts[occupied]))[:target_size]
        occupied = np.sort(occupied[keep])
    extremity = np.min(np.abs(sub), axis=1)
    rng = RngState(seed)
    indices, tags = [], []
    for sid in occupied:
        members = np.flatnonzero(ids == sid)
        if random_pick:
            pick = int(members[rng.choice(len(members), 1)[0]])
        else:
            best = extremity[members]
            pick = int(members[np.lexsort((members, -best))[0]])
        indices.append(pick)
        tags.append(int(sid))
    extra = farthest_point_topup(Z, indices, target_size - len(indices))
    indices += extra
    tags += ["topup"] * len(extra)
    return SupportSet(indices, tags, n, float(th), target_size, [int(i) for i in selected], rule, random_pick)


def diversity_score(images, indices=None) -> float:
    """Mean per-pixel MSE over all unordered pairs of the chosen images."""
    x = np.asarray(images, dtype=np.float64)
    if indices is not None:
        x = x[np.asarray(indices, dtype=int)]
    if len(x) < 2:
        raise ValueError("need at least two images")
    x = x.reshape(len(x), -1)
    iu = np.triu_indices(len(x), k=1)
    d = ((x[:, None, :] - x[None, :, :]) ** 2).mean(axis=2)
    return float(d[iu].mean())
