"""Queue-aware beamforming for a STAR-RIS assisted NOMA downlink.

Subpackages:

* :mod:`starqwsr.model`     - system model: channels composed with the
  surface, SIC rates, queue-weighted objective, feasibility checks
* :mod:`starqwsr.channel`   - geometry, path loss, Rician sampling
* :mod:`starqwsr.queueing`  - queue recursion, arrivals, stability metrics
* :mod:`starqwsr.conic`     - embedded interior-point solver
* :mod:`starqwsr.optimizer` - per-slot weighted-sum-rate algorithms for the
  energy/mode/time-switching protocols and the baselines
* :mod:`starqwsr.harness`   - multi-slot simulation, sweeps, CLI
"""

__version__ = "0.1.0"
