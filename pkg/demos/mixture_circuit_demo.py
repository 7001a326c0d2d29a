"""Build the deterministic mixture circuit and check it against the analytic
convex combination of channels.

The circuit prepares a coefficient register in sum_a sqrt(p_a)|a>, applies
each channel's unitary dilation controlled on |a>, and traces the ancillas.
No measurement or post-selection appears anywhere: the mixture lands on the
system register with probability one.
"""

import numpy as np

from chanmix.channels import (
    ConvexCombination,
    amplitude_damping_channel,
    apply_channel,
    convex_combination,
    depolarizing_channel,
    identity_channel,
    stinespring_dilation,
    unitary_channel,
    PAULI_X,
)
from chanmix.circuit import build_ccc_circuit, run_on_system
from chanmix.lindblad import trace_distance
from chanmix.qops import DensityMatrix

rng = np.random.default_rng(0)

print("=== A three-channel mixture on one qubit ===")
mix = ConvexCombination(
    (
        identity_channel(2),
        unitary_channel(PAULI_X, label="X"),
        amplitude_damping_channel(0.3),
    ),
    (0.5, 0.3, 0.2),
)
circuit = build_ccc_circuit(mix, n_sys=1)
layout = circuit.layout
print(f"registers: coeff={layout.coeff_qubits} env={layout.env_qubits} "
      f"sys={layout.sys_qubits}  (total {layout.total} qubits)")
print(f"items: {[item.name for item in circuit.items]}")

rho = DensityMatrix((2,), np.array([[0.7, 0.2 + 0.1j], [0.2 - 0.1j, 0.3]]))
marginal = run_on_system(circuit, rho)
analytic = apply_channel(convex_combination(mix), rho)
print(f"trace distance circuit vs analytic mixture: "
      f"{trace_distance(marginal, analytic):.2e}")

print()
print("=== The dilation block structure ===")
ad = amplitude_damping_channel(0.36)
dil = stinespring_dilation(ad)
print(f"amplitude damping (beta=0.36): env_dim={dil.env_dim}, unitary=")
with np.printoptions(precision=3, suppress=True):
    print(dil.unitary.real)
print("rows i*d..(i+1)*d of the first d columns are exactly the Kraus "
      "operators; the rest is a deterministic orthonormal completion.")

print()
print("=== Mixtures of many random channels ===")
from util_demo import random_cptp  # noqa: E402

for n_chan in (2, 4):
    chans = tuple(random_cptp(2, int(rng.integers(1, 4)), rng) for _ in range(n_chan))
    w = rng.uniform(0.1, 1.0, n_chan)
    cc = ConvexCombination(chans, tuple(w / w.sum()))
    circ = build_ccc_circuit(cc, 1)
    rho = DensityMatrix((2,), np.diag([0.25, 0.75]).astype(complex))
    d = trace_distance(run_on_system(circ, rho),
                       apply_channel(convex_combination(cc), rho))
    print(f"N={n_chan}: {circ.layout.total} qubits, deviation {d:.2e}")

print()
print("Adding depolarizing components keeps everything CPTP:")
cc = ConvexCombination(
    (depolarizing_channel(0.2), identity_channel(2)), (0.4, 0.6)
)
from chanmix.qops import cptp_check  # noqa: E402

print("mixture CPTP report:", cptp_check(convex_combination(cc)))
