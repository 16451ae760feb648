"""Walk through the LIF neuron dynamics one step at a time.

Shows the three ingredients of the neuron model: exponential membrane decay,
integration of masked synaptic input, and the fire-at-threshold reset. Run:

    python demos/01_lif_dynamics.py
"""

import numpy as np

from spikeprune import LifParams, WeightLayer, layer_forward, lif_membrane_update, spike_and_reset

params = LifParams(tau=5.0, threshold=1.0, reset_value=0.0, dt=1.0)
print(f"tau={params.tau}, dt={params.dt} -> per-step decay factor "
      f"exp(-dt/tau) = {params.decay:.6f}\n")

# 1. pure decay: start a membrane at 2.0 and feed it nothing
print("pure decay from u=2.0:")
u = np.array([2.0])
for step in range(6):
    print(f"  step {step}: u = {u[0]:.6f}")
    u = lif_membrane_update(u, np.array([0.0]), params)
print()

# 2. integrate-and-fire: constant subthreshold current accumulates until
#    the threshold is reached, then the neuron resets and starts over
print("constant current 0.25 into one neuron (threshold 1.0):")
u = np.array([0.0])
for step in range(16):
    u = lif_membrane_update(u, np.array([0.25]), params)
    spikes, u = spike_and_reset(u, params)
    marker = "  <-- spike, reset" if spikes[0] else ""
    print(f"  step {step}: u = {u[0]:.6f}{marker}")
print()

# 3. a masked synapse is invisible no matter what weight value it stores
layer = WeightLayer(weights=np.array([[0.6, 100.0]]),
                    mask=np.array([[1, 0]]))
out, state = layer_forward(np.array([1.0, 1.0]), layer, np.zeros(1),
                           params, spiking=True)
print("two presynaptic spikes into weights [0.6, 100.0] with mask [1, 0]:")
print(f"  resulting membrane = {state[0]:.3f} (only the unmasked 0.6 counts)")
print(f"  stored-but-masked weights never reach the computation")
