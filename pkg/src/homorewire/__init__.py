"""Homophily and avoidance detection in weighted bipartite interaction networks.

Observed guest/host group-pairing frequencies are compared with the 95%
range reached by strength-preserving xSwap randomizations of the network.
"""
__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .network import (  # noqa: F401
    AttributeSet,
    BipartiteNetwork,
    EdgeRecord,
    HostProfile,
    NodeRecord,
    QuintileBins,
    SliceKey,
    attribute_view,
    build_network,
    in_strength,
    out_strength,
    quintile_bins,
)
from .io import load_dataset, validate_dataset, write_dataset  # noqa: F401
from .rewiring import (  # noqa: F401
    AutoKendall,
    FixedBurnIn,
    NetworkState,
    RewireConfig,
    StreamRNG,
    SwapMove,
    XSwapRewirer,
    calibrate_burn_in,
    generate_ensemble,
    kendall_tau,
    xswap_step,
)
from .pairing import (  # noqa: F401
    Expression,
    ExpressionReport,
    HomophilyDetector,
    IntervalEstimate,
    PairingMatrix,
    analyze_network,
    classify,
    demography_summary,
    ensemble_intervals,
    pairing_frequencies,
)
from .robustness import (  # noqa: F401
    HostMatcher,
    LabelPerturber,
    MatchedPairResult,
    PerturbationSpec,
    PriceTercileFilter,
    matched_pairs,
    perturb_labels,
    rate_t_test,
    rerun_with_confidence,
    tercile_filter,
    white_guest_rate,
)
from .synth import SynthSpec, generate  # noqa: F401
