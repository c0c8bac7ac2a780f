"""Pharmacophore docking mapped onto a binding graph.

A contact pairs one ligand point with one receptor point whose kinds
interact. Two contacts are geometrically compatible (an edge of the binding
graph) when they involve distinct points on both molecules and the
intra-ligand distance matches the intra-receptor distance within the
flexibility tolerance tau. Cliques of the binding graph are candidate
binding poses, so the maximum-weight clique (equivalently, the
maximum-weight independent set of the complement) is the best pose.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError
from .graphs import WeightedGraph

DEFAULT_TAU = 2.0


class Kind(str, Enum):
    HDONOR = "HDonor"
    HACCEPTOR = "HAcceptor"
    HYDROPHOBE = "Hydrophobe"
    AROMATIC = "Aromatic"
    POS_ION = "PosIon"
    NEG_ION = "NegIon"


@dataclass(frozen=True)
class PharmacophorePoint:
    id: str
    kind: Kind
    position: tuple

    def __post_init__(self):
        if len(self.position) != 3:
            raise InputError(f"point {self.id}: position must have 3 coordinates")


@dataclass(frozen=True)
class Molecule:
    name: str
    points: tuple

    def __post_init__(self):
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise InputError(f"molecule {self.name}: duplicate point ids")
        if not self.points:
            raise InputError(f"molecule {self.name}: no points")

    def distance(self, a: str, b: str) -> float:
        pa = next(p for p in self.points if p.id == a)
        pb = next(p for p in self.points if p.id == b)
        return float(math.dist(pa.position, pb.position))

    def distance_matrix(self) -> np.ndarray:
        coords = np.array([p.position for p in self.points])
        diff = coords[:, None, :] - coords[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True)
class InteractionTable:
    """Symmetric kind-pair interaction strengths; missing pairs are 0."""

    pairs: dict

    def strength(self, a: Kind, b: Kind) -> float:
        return self.pairs.get(frozenset((a, b)), 0.0)


def default_table() -> InteractionTable:
    return InteractionTable(pairs={
        frozenset((Kind.HDONOR, Kind.HACCEPTOR)): 1.0,
        frozenset((Kind.HYDROPHOBE,)): 0.5,
        frozenset((Kind.AROMATIC,)): 0.5,
        frozenset((Kind.POS_ION, Kind.NEG_ION)): 1.0,
    })


@dataclass(frozen=True)
class Contact:
    """One candidate interaction: a ligand point matched to a receptor point."""

    ligand_point: str
    receptor_point: str
    weight: float

    @property
    def vertex_id(self) -> str:
        return f"{self.ligand_point}:{self.receptor_point}"


def enumerate_contacts(ligand: Molecule, receptor: Molecule,
                       table: InteractionTable | None = None,
                       dist_lambda: float = math.inf) -> list:
    """All (ligand point, receptor point) pairs with positive strength.

    Ordered ligand-major, following each molecule's point order. The
    optional kernel exp(-d / lambda) damps the weight by d = the difference
    of each point's distance to its own molecule's centroid, a pose-free
    proxy for how far the pair sits from a size-matched fit; it is disabled
    (lambda = inf) by default.
    """
    table = table or default_table()
    lig_centroid = np.mean([p.position for p in ligand.points], axis=0)
    rec_centroid = np.mean([p.position for p in receptor.points], axis=0)
    out = []
    for lp in ligand.points:
        for rp in receptor.points:
            s = table.strength(lp.kind, rp.kind)
            if s <= 0:
                continue
            w = s
            if math.isfinite(dist_lambda):
                d = abs(
                    float(np.linalg.norm(np.array(lp.position) - lig_centroid))
                    - float(np.linalg.norm(np.array(rp.position) - rec_centroid))
                )
                w = s * math.exp(-d / dist_lambda)
            out.append(Contact(ligand_point=lp.id, receptor_point=rp.id, weight=w))
    return out


def build_binding_graph(ligand: Molecule, receptor: Molecule,
                        table: InteractionTable | None = None,
                        tau: float = DEFAULT_TAU,
                        dist_lambda: float = math.inf) -> WeightedGraph:
    """Binding graph over contacts; see the module docstring for the rule."""
    if tau < 0:
        raise InputError("tau must be non-negative")
    contacts = enumerate_contacts(ligand, receptor, table, dist_lambda)
    ids = [c.vertex_id for c in contacts]
    weights = [c.weight for c in contacts]
    edges = []
    for a, b in itertools.combinations(range(len(contacts)), 2):
        ca, cb = contacts[a], contacts[b]
        if ca.ligand_point == cb.ligand_point:
            continue
        if ca.receptor_point == cb.receptor_point:
            continue
        d_lig = ligand.distance(ca.ligand_point, cb.ligand_point)
        d_rec = receptor.distance(ca.receptor_point, cb.receptor_point)
        if abs(d_lig - d_rec) <= tau:
            edges.append((ids[a], ids[b]))
    return WeightedGraph.from_parts(ids, edges, weights=weights)


def pose_from_clique(clique, contacts) -> list:
    """Map a clique of the binding graph back to (ligand, receptor) pairs.

    Rejects selections that reuse a ligand or receptor point; a physical
    pose assigns each point at most once.
    """
    members = clique.members if hasattr(clique, "members") else set(map(str, clique))
    known = {c.vertex_id for c in contacts}
    unknown = members - known
    if unknown:
        raise InputError(f"unknown contacts {sorted(unknown)}")
    lig_seen, rec_seen = set(), set()
    pose = []
    for c in contacts:
        if c.vertex_id not in members:
            continue
        if c.ligand_point in lig_seen:
            raise InputError(f"ligand point {c.ligand_point} used twice")
        if c.receptor_point in rec_seen:
            raise InputError(f"receptor point {c.receptor_point} used twice")
        lig_seen.add(c.ligand_point)
        rec_seen.add(c.receptor_point)
        pose.append((c.ligand_point, c.receptor_point))
    return pose


def load_molecule(path) -> Molecule:
    """Read a pharmacophore JSON file: {"name", "points": [{"id", "kind", "xyz"}]}."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from None
    if "points" not in doc:
        raise InputError(f"{path}: missing 'points'")
    points = []
    for p in doc["points"]:
        for key in ("id", "kind", "xyz"):
            if key not in p:
                raise InputError(f"{path}: point missing '{key}'")
        try:
            kind = Kind(p["kind"])
        except ValueError:
            allowed = ", ".join(k.value for k in Kind)
            raise InputError(
                f"{path}: unknown kind {p['kind']!r} (expected one of {allowed})"
            ) from None
        points.append(PharmacophorePoint(
            id=str(p["id"]), kind=kind, position=tuple(float(x) for x in p["xyz"]),
        ))
    return Molecule(name=str(doc.get("name", "molecule")), points=tuple(points))


def load_table(path) -> InteractionTable:
    """Read an interaction table JSON file: {"pairs": [{"a", "b", "s"}]}."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from None
    pairs = {}
    for entry in doc.get("pairs", []):
        try:
            a, b = Kind(entry["a"]), Kind(entry["b"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}: bad table entry {entry}: {exc}") from None
        pairs[frozenset((a, b))] = float(entry["s"])
    return InteractionTable(pairs=pairs)
