"""Universal denoising of continuous-valued sequences corrupted by a known
memoryless channel: nonparametric output density estimation, L1 channel
inversion onto a quantized clean support, and Bayes-response reconstruction,
with sliding-window context extensions and a bridge to the discrete rule.
"""

from .channels import (AdditiveGaussianChannel, ChannelConfigError,
                       ChannelDomainError, ChannelMatrix, ChannelModel,
                       InputScaledRayleighChannel,
                       MultiplicativeGaussianChannel, TabulatedChannel,
                       load_tabulated_channel, parse_channel_spec)
from .denoise import (DenoiseError, DenoiserRule, LossFunction,
                      SubsequencePlan, TuplePmf, bayes_envelope,
                      bayes_response, cumulative_loss, denoise_sliding,
                      denoise_symbolwise, genie_d0, genie_dk,
                      partition_subsequences)
from .density import (DensityError, DensityEstimate, GridAxis, Kernel,
                      cross_validated_bandwidth, histogram_estimate, kde,
                      l1_distance, load_density_csv, silverman_bandwidth,
                      super_symbols)
from .dude_bridge import (BridgeError, CountStatistics, EquivalenceReport,
                          count_inversion, count_statistics,
                          equivalence_check, histogram_pmf, quantize_outputs)
from .harness import (ExperimentConfig, HarnessError, MetricsRow,
                      corrupt_image, make_source, rmse, run_experiment)
from .inversion import (InversionError, LpSolution, QuantizedPmf, SupportGrid,
                        empirical_cdf, inversion_objective, invert_channel,
                        levy_distance, levy_distance_samples, quantize_levels,
                        quantize_support)

__version__ = "0.1.0"
