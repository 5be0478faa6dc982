"""Directed topologies and the exact-rational floor quantizer.

Walks through the two foundations everything else builds on: seeded
strongly connected digraph generation and lattice quantization.
"""

import numpy as np

from qjadmm import (
    QuantizationLevel,
    dequantize,
    diameter,
    from_edge_list,
    is_strongly_connected,
    quantize_floor,
    random_strongly_connected,
    to_edge_list,
)

# --- a reproducible random digraph -----------------------------------------

g = random_strongly_connected(n=12, edge_density=0.25, seed=7)
print(f"graph: {g}")
print(f"strongly connected: {is_strongly_connected(g)}")
print(f"diameter: {diameter(g)}")

view = g.neighbor_view(1)
print(f"node 1 receives from {sorted(view.in_neighbors)} "
      f"and transmits to {sorted(view.out_neighbors)}")

# determinism: the same arguments always give the same edge set
assert random_strongly_connected(12, 0.25, 7) == g

# --- edge-list serialization -------------------------------------------------

text = to_edge_list(g)
print("\nfirst lines of the edge-list form (self-loops are implied):")
print("\n".join(text.splitlines()[:5]))
assert from_edge_list(text) == g

# --- quantization ------------------------------------------------------------

# levels parse exactly: "1e-3" is the rational 1/1000, not a binary float
level = QuantizationLevel("1e-3")
print(f"\nquantization level: {level} (float {level.as_float})")

values = np.array([0.12345, -0.12345, 2.0, -0.0004])
q = quantize_floor(values, level)
back = dequantize(q)
print(f"values:      {values}")
print(f"lattice:     {q.values}")
print(f"dequantized: {back}")
print(f"residuals in [0, delta): {values - back}")

# floors are exact: re-quantizing a dequantized vector changes nothing
assert np.array_equal(quantize_floor(back, level).values, q.values)
