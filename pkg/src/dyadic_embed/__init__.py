"""Almost bi-Lipschitz embeddings of finite samples of l_p into block sequence spaces."""

from .certification import CertificateReport, ModulusProfile, certify_lower, certify_upper, moduli, report, witness_lower_bound
from .embedding import BuildConfig, EmbeddingArtifact, build, epsilon_schedule, glue, level_map, shell_map
from .modulus import CompressionTarget, GaugePair, majorant_mu, sigma_of, validate_phi
from .nets import NetTable, ShellSystem, build_shells, greedy_net, retract
from .normed_spaces import AmbientSpace, BlockSpec, BlockVector, PointCloud, block_extract, block_project, norm, projection_norm_bound
from .representability import FcrOracle, LinearMap, diagonal_oracle, distortion, identity_oracle, operator_norm

__version__ = "0.1.0"
