"""Robust image steganography in the latent space of a frozen autoencoder."""

from .autoencoder import (
    AutoencoderConfig,
    FrozenAutoencoder,
    latent_perturb_probe,
    train_reference_autoencoder,
)
from .baseline import DwtDctSvdWatermarker, FreqEmbedConfig, dwtdctsvd_embed, dwtdctsvd_extract
from .color import rgb_to_yuv, yuv_to_rgb
from .corruption import (
    DIFF_CLASS,
    KINDS,
    PerturbationSpec,
    apply_perturbation,
    sample_perturbation,
    straight_through,
)
from .ecc import BchCodec, EccConfig, ecc_decode, ecc_encode
from .harness import BaselineMethod, LatentMethod, evaluate, evaluate_per_kind, run_sweep
from .jpeg import differentiable_jpeg
from .metrics import QualityReport, bit_accuracy, psnr, ssim, word_accuracy
from .payload import (
    bits_to_hex,
    bits_to_string,
    hex_to_bits,
    random_secret,
    string_to_bits,
)
from .perceptual import PerceptualDistance, train_feature_extractor
from .secret_decoder import SecretDecoder, SecretDecoderConfig, decode_secret, recovery_loss
from .secret_encoder import (
    JointSecretEncoder,
    SecretEncoder,
    SecretEncoderConfig,
    build_secret_encoder,
    encode_secret,
)
from .training import (
    StegoModel,
    StegoTrainConfig,
    TrainSchedule,
    TrainState,
    curriculum_update,
    quality_loss,
    total_loss,
    train,
    training_step,
)

__version__ = "0.1.0"
