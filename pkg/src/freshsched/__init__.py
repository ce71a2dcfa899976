"""Freshness-aware scheduling.

Loss-induced information measures for inference error as a function of
Age of Information, Gittins/threshold single-source schedules, Whittle-index
multi-source schedules and a slotted simulator to check them.
"""

from .errors import (AbsoluteContinuityError, AlphabetMismatchError, ComputationError,
                     ConfigurationError, ConvergenceError, FreshSchedError, InputError,
                     InsufficientDataError, MisuseError, PenaltyFormatError, SupportError,
                     TruncationError, UnreachableThresholdError, UnsupportedLossError)
from .gittins import (GittinsTable, expected_penalty_after_service, gittins_index,
                      gittins_table)
from .info_metrics import (AlphaLoss, Alphabet, BrierLoss, ChainModel, Distribution,
                           FreshnessCurve, JointDistribution, LogLoss, LossFunction,
                           MarkovDecomposition, QuadraticLoss, TimeSeriesDataset, TripleJoint,
                           ZeroOneLoss, bayes_action, chi2_conditional_mutual_information,
                           chi2_divergence, epsilon_markov_coefficient, freshness_curve,
                           l_conditional_cross_entropy, l_conditional_entropy,
                           l_conditional_mutual_information, l_divergence, l_entropy,
                           l_mutual_information, lag_epsilons, load_time_series_csv,
                           markov_decomposition, stochastic_order_check)
from .multi_source import (Arm, IndexabilityReport, WhittleTable, build_whittle_table,
                           charged_threshold, indexability_diagnostic, source_arms,
                           whittle_decide, whittle_index, whittle_special_case,
                           whittle_waiting_time)
from .penalty import (PenaltyCurve, ServiceTimeDistribution, dip_penalty, monotone_penalty,
                      penalty_from_csv, penalty_from_inference_curve, service_constant,
                      service_from_spec, service_geometric, service_lognormal_discretized)
from .simulator import (Periodic, SimConfig, SimResult, SourceSpec, Threshold, ZeroWait,
                        optimal_gaw, optimal_sfb, replicate, simulate, simulate_multi,
                        simulate_single)
from .single_source import (CycleStatistics, ThresholdPolicy, cycle_statistics,
                            mdp_oracle_average_cost, optimal_buffer_offset,
                            optimal_threshold_policy, threshold_root, threshold_roots,
                            waiting_time)

__version__ = "0.1.0"
