"""Compare network structure across reference, current and projected states.

Net multipliers are turned into correlation distances and clustered.  The
histograms of distance changes show whether sectors drift apart or together
between states.  Figures are written as SVG into --out.
"""

import argparse
from pathlib import Path

import numpy as np

from ccesnet import svg
from ccesnet.equilibrium import coefficients, current_state, reference_state, solve_equilibrium
from ccesnet.netanalysis import distance_change_histogram, distance_matrix, hierarchical_cluster, net_multipliers
from ccesnet.propagation import ShockScenario
from ccesnet.synthetic import GeneratorConfig, generate_economy

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--out", default="network_figures")
args = parser.parse_args()
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

econ, data, hidden = generate_economy(GeneratorConfig(n=50, seed=7))
z = ShockScenario.single(econ.n, int(hidden[econ.n // 2])).z
states = {
    "ref": reference_state(econ),
    "cur": current_state(econ),
    "proj": coefficients(econ, solve_equilibrium(econ, z), z),
}

D = {}
for name, st in states.items():
    mu = net_multipliers(st.coefficients)
    D[name] = distance_matrix(mu).d
    dend = hierarchical_cluster(D[name])
    (out / f"dendrogram_{name}.svg").write_text(svg.dendrogram(dend.linkage, dend.leaf_order, econ.sector_ids, name))
    print(f"{name:4s} mean multiplier {mu.sum(axis=0).mean():.3f}, top merge height {dend.linkage[-1, 2]:.3f}")

for a, b in (("ref", "cur"), ("cur", "proj")):
    ch = distance_change_histogram(D[a], D[b])
    (out / f"distance_change_{a}_{b}.svg").write_text(svg.histogram(ch.counts, ch.edges, f"{a} to {b}", "change"))
    print(f"{a} -> {b}: {ch.n_obs} pairs, mean shift {ch.mean_shift:+.2e}, "
          f"{100 * np.mean(ch.diffs < 0):.0f}% of pairs closer")
print(f"figures in {out}/")
