"""Chinese restaurant process block compositions and their Poisson limits."""

__version__ = "0.1.0"

from .special import (  # noqa: E402
    falling_factorial,
    log_falling_factorial,
    log_rising_factorial,
    reg_inc_beta,
    rising_factorial,
)
from .engine import (  # noqa: E402
    CrpParams,
    InsertionDraw,
    TrackerConfig,
    extract_point_measure,
    observe_first_singleton,
    observe_q_path,
    observe_shortlived,
    permutation_run,
    run,
    run_singletons,
    step,
)
from .oracle import (  # noqa: E402
    TupleFamily,
    exhaustive_partition_distribution,
    joint_probability,
    overlap_counts,
    stepwise_probability,
)
from .intensity import ConeWindow, consistency_check, lambda_ij, lambda_tail, mass  # noqa: E402
from .limits import sample_ST_closed_form, sample_Q_path, sample_xi  # noqa: E402
from .verify import GofReport, SuiteConfig, default_config, run_suite  # noqa: E402
