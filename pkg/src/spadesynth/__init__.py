"""Semantic image synthesis with spatially-adaptive normalization: a
self-contained tensor engine, the mask-conditioned layer family, GAN
training, procedural data, and evaluation."""

from .autograd import Tape, Tensor, backward, grad_check, no_grad, use_tape
from .config import TrainConfig, desk_profile, load_config, parse_config
from .errors import (
    ConfigError,
    DimensionError,
    ParseError,
    SpadeError,
    TrainingDiverged,
    UsageError,
)
from .losses import LossWeights, hinge_d, hinge_g, kld_loss, reparameterize
from .masks import SegMask, mask_pyramid
from .metrics import GaussianStats, feature_stats, frechet_distance, miou, pixel_accuracy
from .networks import (
    Discriminator,
    DiscriminatorConfig,
    Encoder,
    FeatureNet,
    Generator,
    GeneratorConfig,
)
from .norms import ChannelStats, ModulationField, Spade, adain, batch_stats, instance_norm
from .rng import SplitMix64
from .scenes import SceneSpec, generate_scene, load_pair, save_pair

__version__ = "0.1.0"
