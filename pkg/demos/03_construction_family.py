"""Walk the energy-divergent family over the constant baseline.

Each member concentrates the same total mass into a spike of radius
r_k = 2^-(k+1), with the core width eta chosen so the overlap integral
buys at least k units.  The depth condition forces eta below the float64
floor almost immediately, which is why the construction works in
log space: eta itself prints as 0.0 from k = 12 on, while log_eta is the
honest number.

The family converges to the baseline in L^p and W^{1,2} while its energy
runs off to -infinity: that pairing is the whole point.
"""
from kslab.grid import build_grid
from kslab.initial_data import constant_recipe, lemma14_pair
from kslab.verifier import check_lemma14_sequence

grid = build_grid(3, 1.0, 512, grading=1.05)
recipe = constant_recipe(grid, c=1.0, p=1.1)
print(f"grid: N={grid.ncells}, innermost center {grid.centers[0]:.3e}")
print(f"exponents: p={recipe.p}, alpha={recipe.alpha:.6f} (window midpoint)")
print()
print(" k      r_k       log_eta      margin    F0         |du|_p     "
      "|dv|_W12   uv/k")
table = []
for k in range(1, 17):
    d = lemma14_pair(recipe, k)
    table.append(d)
    print(f"{d.k:2d}  {d.r_k:9.3e}  {d.log_eta:11.4e}  {d.margin:8.2g}  "
          f"{d.F0:9.3f}  {d.du_lp:9.3e}  {d.dv_w12:9.3e}  {d.uv_over_k:7.4f}")

print()
rep = check_lemma14_sequence(table, tail_start=10)
print(rep)
for key, val in rep.details.items():
    print(f"  {key}: {val}")
print()
print("grid-sampled sup of u_k (what a solver actually sees):")
for d in (table[0], table[5], table[11], table[15]):
    print(f"  k={d.k:2d}: sup u0 = {d.u0.values.max():.3e}")
print("note the inversion: the continuum core deepens with k, but its")
print("width shrinks much faster than any grid can follow, so the")
print("sampled amplitude falls while the continuum F0 dives")
