"""
Interference graphs of program variables and their greedy Welsh-Powell coloring.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import graphviz
import networkx as nx

from pcfp.liveness import ControlFlow
from pcfp.liveness import LivenessMap
from pcfp.program import Program

logger = logging.getLogger(__name__)


def _add_clique(graph: nx.Graph, members: Iterable[str], order: dict[str, int]) -> None:
    for u, v in combinations(sorted(members, key=order.__getitem__), 2):
        graph.add_edge(u, v)


def build_ig(program: Program, live: LivenessMap) -> nx.Graph:
    """
    Build the interference graph of a program.

    Vertices are the declared variables, in declaration order. Two variables interfere iff
    (a) both are live at some command enabled at location 0, or (b) some command `c` has both
    live in `live(succ(c))`, the union of the live sets of its successors.

    Args:
        program: The program.
        live: The result of `lra(program)`.
    """
    flow = ControlFlow(program)
    order = {name: i for i, name in enumerate(program.variables)}

    graph = nx.Graph()
    graph.add_nodes_from(program.variables)

    _add_clique(graph, live.union(flow.at(0)), order)
    for c in program.commands:
        _add_clique(graph, live.union(flow.succ(c)), order)

    logger.debug(
        "Interference graph: %d vertices, %d edges",
        graph.number_of_nodes(),
        graph.number_of_edges(),
    )
    return graph


@dataclass(frozen=True, kw_only=True)
class ColorAssignment:
    """
    A vertex coloring with colors `1..color_count`.

    Attributes:
        colors: Vertex -> color, in the vertex order of the colored graph.
        color_count: The number of distinct colors used.
    """

    colors: dict[str, int]
    color_count: int

    def classes(self) -> dict[int, list[str]]:
        """Color -> vertices of that color, both in ascending order of first appearance."""
        result: dict[int, list[str]] = {}
        for vertex, color in self.colors.items():
            result.setdefault(color, []).append(vertex)
        return dict(sorted(result.items()))

    def is_proper(self, graph: nx.Graph) -> bool:
        """True if no edge of `graph` joins two vertices of the same color."""
        return all(self.colors[u] != self.colors[v] for u, v in graph.edges())


def welsh_powell(graph: nx.Graph) -> ColorAssignment:
    """
    Greedy Welsh-Powell coloring.

    Vertices are ordered by non-increasing degree, ties broken by the graph's vertex order. For
    each color in turn, every still uncolored vertex in that order receives the color unless one of
    its neighbours already has it.
    """
    position = {v: i for i, v in enumerate(graph.nodes())}
    order = sorted(graph.nodes(), key=lambda v: (-graph.degree(v), position[v]))

    colors: dict[str, int] = {}
    color = 0
    while len(colors) < len(order):
        color += 1
        for vertex in order:
            if vertex in colors:
                continue
            if all(colors.get(n) != color for n in graph.neighbors(vertex)):
                colors[vertex] = color

    return ColorAssignment(
        colors={v: colors[v] for v in graph.nodes()},
        color_count=color,
    )


def to_dot(graph: nx.Graph, coloring: ColorAssignment | None = None) -> str:
    """DOT source of an interference graph, annotating each vertex with its color if given."""
    dot = graphviz.Graph(name="interference")
    for vertex in graph.nodes():
        label = vertex if coloring is None else f"{vertex} ({coloring.colors[vertex]})"
        dot.node(vertex, label=label)
    for u, v in graph.edges():
        dot.edge(u, v)
    return str(dot.source)
