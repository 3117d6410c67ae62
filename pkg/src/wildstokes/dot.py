"""Graphviz DOT text for fission trees and Stokes quivers."""
from __future__ import annotations

from .exact import rat_str
from .irregular import Fiber, FissionTree, IrregularClass, fiber


def _quote(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_id(stage, p) -> str:
    return f"s{stage}_c{p.circle}_{p.sheet}"


def _factor_label(theta: IrregularClass, p) -> str:
    circle, mult = theta.entries[p.circle]
    q = circle.sheet(p.sheet)
    text = str(q)
    return f"{text} (x{mult})" if mult > 1 else text


def fission_tree_dot(tree: FissionTree, name="fission") -> str:
    """Stage 0 is the class; each further stage identifies points closer than its level."""
    lines = [f"digraph {_quote(name)} {{", "  rankdir=TB;", "  node [shape=box, fontsize=10];"]
    for s, theta in enumerate(tree.stages):
        title = "class" if s == 0 else f"I({rat_str(tree.levels[s - 1])})"
        lines.append(f"  subgraph cluster_{s} {{ label={_quote(title)};")
        for p in fiber(theta):
            lines.append(f"    {_node_id(s, p)} [label={_quote(_factor_label(theta, p))}];")
        lines.append("  }")
    for s, proj in enumerate(tree.maps):
        for p in sorted(proj):
            lines.append(f"  {_node_id(s, p)} -> {_node_id(s + 1, proj[p])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def quiver_dot(fib: Fiber, t, name=None) -> str:
    """Stokes arrows at the direction t, drawn from the subdominant label."""
    name = name or f"quiver_{rat_str(t)}"
    lines = [f"digraph {_quote(name)} {{", f"  label={_quote('direction ' + rat_str(t) + ' pi')};",
             "  node [shape=circle, fontsize=10];"]
    for p in fib.labels:
        lines.append(f"  c{p.circle}_{p.sheet} [label={_quote(f'{p.circle}.{p.sheet}')}];")
    for i, j, k in sorted(fib.arrows_at(t)):
        lines.append(f"  c{i.circle}_{i.sheet} -> c{j.circle}_{j.sheet} [label={_quote('k=' + rat_str(k))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def class_dot(theta: IrregularClass, tree: FissionTree, directions) -> str:
    fib = Fiber.of_class(theta)
    out = [fission_tree_dot(tree)]
    out += [quiver_dot(fib, t) for t in directions]
    return "".join(out)
