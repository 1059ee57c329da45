"""Channel-aware random access design for wireless control loops.

Workflow: express each loop as a two-mode switched system with a
quadratic performance contract (``control``), turn the contract into a
per-link delivery requirement, design fade-threshold access policies by
dual decomposition over a shared collision channel (``channel``,
``policy``, ``optimizer``), and validate the closed design at slot level
(``simulate``). ``cli`` wires the stages into commands.
"""

from .channel import (
    CollisionMatrix,
    ExponentialFading,
    FadingChannel,
    LogisticLogCurve,
    MonteCarlo,
    Quadrature,
    SaturatingExpCurve,
    UniformFading,
    decode_success_prob,
    expected_policy_rate,
    expected_policy_success,
    invert_success_curve,
    link_success_probability,
    sample_channel,
)
from .control import (
    InfeasibleContractError,
    PlantControllerPair,
    SwitchedSystem,
    assemble_example_loop,
    compute_success_requirement,
    expected_lyapunov_next,
    lmi_slack,
    max_symmetric_eigenvalue,
    steady_state_cost_bound,
)
from .optimizer import (
    DivergenceError,
    DualState,
    OptimizationResult,
    ProblemInstance,
    StepSchedule,
    StopRule,
    run_algorithm1,
)
from .policy import (
    AccessPolicy,
    PricingVector,
    constant_policy,
    evaluate_constant_success,
    threshold_from_prices,
    threshold_policy,
)
from .simulate import (
    SimConfig,
    SimMetrics,
    UnstableSimulationError,
    empirical_gamma_rate_check,
    lyapunov_drift_check,
    run_simulation,
    simulate_slot,
)

__version__ = "0.1.0"
