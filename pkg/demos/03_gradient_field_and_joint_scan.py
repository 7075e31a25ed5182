"""
The simultaneous gradient field and the improper summed objective
=================================================================

On a two-bin world both models are a single probability, so the joint
state is a point (x, y) in the unit square and the game's simultaneous
gradient is a planar vector field. The field's only interior zero is the
true pair of probabilities.

Summing the two losses into one objective and minimizing it instead is
not proper: the scan below finds the minimum of the summed population
loss well away from the truth.
"""

import numpy as np

import gamesurv as gs

TRUTH = gs.MarginalWorld([0.3, 0.7], [0.4, 0.6])

field = gs.gradient_field(TRUTH, resolution=17)
norm = np.hypot(field.u, field.v)
i, j = np.unravel_index(np.argmin(norm), norm.shape)
print(f"gradient field on a {norm.shape[0]}x{norm.shape[1]} grid")
print(f"quietest cell: x={field.x[j]:.3f}, y={field.y[i]:.3f} "
      f"(truth at x=0.3, y=0.4), |xi|={norm[i, j]:.4f}")

# coarse ascii rendering: (u, v) is already the descent direction -xi,
# the flow followed by simultaneous GD; O marks the quietest cell
glyphs = ["→", "↗", "↑", "↖", "←", "↙", "↓", "↘"]
print("\nflow of simultaneous descent (x right, y up):")
for row in range(norm.shape[0] - 1, -1, -1):
    line = []
    for col in range(norm.shape[1]):
        if (row, col) == (i, j):
            line.append("O")
            continue
        angle = np.arctan2(field.v[row, col], field.u[row, col])
        line.append(glyphs[int(np.round(angle / (np.pi / 4))) % 8])
    print("  " + " ".join(line))

# the emitted rows are what the CLI writes to field.csv for plotting
rows = list(field.rows())
print(f"\n{len(rows)} (x, y, u, v) rows ready for a quiver plot; first: "
      f"{tuple(round(float(v), 4) for v in rows[0])}")

# minimizing the summed loss walks away from the truth
scan = gs.joint_objective_scan(TRUTH, resolution=201)
print(f"\nsummed population BS at truth:   {scan.truth_value:.6f}")
print(f"grid minimum of the summed loss: {scan.min_value:.6f} "
      f"at x={scan.argmin_x:.4f}, y={scan.argmin_y:.4f}")
print(f"improper: {scan.improper} (the minimizer misstates the failure "
      f"probability by {abs(scan.argmin_x - 0.3):.3f})")
