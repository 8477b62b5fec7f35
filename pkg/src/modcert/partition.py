"""Vertex partitions."""

from __future__ import annotations

import numpy as np


class VertexPartition:
    """Disjoint, non-empty blocks of vertex ids.

    Blocks are stored as sorted tuples and ordered by their smallest id, so two
    partitions with the same blocks compare equal regardless of input order.
    Coverage of a particular vertex set is checked by the consumer (see
    ``check_covers``) since a partition does not know its graph.
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        out = []
        seen = set()
        for b in blocks:
            t = tuple(sorted(int(v) for v in b))
            if not t:
                raise ValueError("empty block")
            for v in t:
                if v < 0:
                    raise ValueError(f"negative vertex id {v}")
                if v in seen:
                    raise ValueError(f"vertex {v} appears in two blocks")
                seen.add(v)
            out.append(t)
        out.sort(key=lambda t: t[0])
        self.blocks = tuple(out)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __eq__(self, other):
        return isinstance(other, VertexPartition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        if len(self.blocks) > 6:
            return f"VertexPartition(<{len(self.blocks)} blocks>)"
        return f"VertexPartition({[list(b) for b in self.blocks]})"

    @property
    def sizes(self):
        return [len(b) for b in self.blocks]

    def vertices(self):
        return sorted(v for b in self.blocks for v in b)

    def labels(self, n):
        """Block index per vertex id; -1 for ids not covered."""
        lab = np.full(n, -1, dtype=np.int64)
        for i, b in enumerate(self.blocks):
            idx = np.fromiter(b, dtype=np.int64, count=len(b))
            if idx.size and idx[-1] >= n:
                raise ValueError(f"vertex id {idx[-1]} out of range for n={n}")
            lab[idx] = i
        return lab

    @classmethod
    def from_labels(cls, labels, vertices=None):
        labels = np.asarray(labels)
        if vertices is None:
            vertices = np.arange(labels.size)
        else:
            vertices = np.asarray(vertices)
            labels = labels[vertices]
        order = np.argsort(labels, kind="stable")
        lab = labels[order]
        cuts = np.flatnonzero(np.diff(lab)) + 1
        groups = np.split(vertices[order], cuts) if vertices.size else []
        return cls(g.tolist() for g in groups)


def check_covers(partition, vertices):
    """Raise ValueError unless the partition's union equals ``vertices``."""
    got = partition.vertices()
    want = sorted(int(v) for v in vertices)
    if got != want:
        missing = sorted(set(want) - set(got))[:5]
        extra = sorted(set(got) - set(want))[:5]
        raise ValueError(f"partition does not cover the vertex set (missing {missing}, extra {extra})")
