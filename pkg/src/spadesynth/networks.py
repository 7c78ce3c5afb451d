"""Generator, discriminator, encoder, baseline variants, and the frozen
feature extractor.

All image-sized tensors are (N, C, H, W) with values in [-1, 1]. Resolutions
are powers of two; the generator grows a 4x4 seed by nearest-neighbor
upsampling, so a size-S output needs log2(S) - 2 upsampling stages.

Downsampling anywhere in this file is conv(3x3, stride 1, pad 1) followed by
2x2 average pooling. A strided odd-kernel conv cannot halve an even grid under
the exact-divisibility rule the conv op enforces, so the pool carries the
stride instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import masks, norms, ops
from .autograd import Tensor
from .errors import ConfigError, DimensionError
from .layers import ChannelAffine, Conv2d, Linear, Module, ModuleList, glorot_init
from .rng import SplitMix64

SLOPE = 0.2  # leaky-relu slope used by every block in this file

INPUT_MODES = ("noise", "downsampled_segmap")
VARIANTS = ("spade", "concat", "encdec")


@dataclass
class GeneratorConfig:
    out_size: int = 32
    num_labels: int = 6
    nf: int = 16
    z_dim: int = 64
    img_channels: int = 3
    input_mode: str = "noise"
    norm_kind: str = "batch"
    modulation_kernel: int = 3
    modulation_hidden: int = 32
    variant: str = "spade"
    spectral: bool = True
    max_mult: int = 16
    bottleneck_blocks: int = 4  # encdec baseline only

    def __post_init__(self):
        s = self.out_size
        if s < 8 or s & (s - 1):
            raise ConfigError(f"out_size must be a power of two >= 8, got {s}")
        if self.input_mode not in INPUT_MODES:
            raise ConfigError(f"input_mode must be one of {INPUT_MODES}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.norm_kind not in ("batch", "instance", "positional"):
            raise ConfigError(f"unknown norm_kind {self.norm_kind!r}")

    @property
    def num_up(self) -> int:
        return int(math.log2(self.out_size)) - 2

    def width(self, stage: int) -> int:
        """Channel count entering stage j; halves from 4x4 up, capped."""
        return self.nf * min(self.max_mult, 2 ** (self.num_up - stage))


def _lrelu(x: Tensor) -> Tensor:
    return ops.leaky_relu(x, SLOPE)


class SpadeResBlk(Module):
    """Residual block: each conv input passes mask-conditioned normalization
    then a leaky relu. A 1x1-projected skip exists exactly when in != out."""

    def __init__(self, fin: int, fout: int, cfg: GeneratorConfig, rng: SplitMix64):
        super().__init__()
        self.fin, self.fout = fin, fout
        fmid = min(fin, fout)

        def spade(ch, tag):
            return norms.Spade(
                ch,
                cfg.num_labels,
                hidden=cfg.modulation_hidden,
                kernel=cfg.modulation_kernel,
                kind=cfg.norm_kind,
                spectral=cfg.spectral,
                rng=rng.spawn(tag),
            )

        self.spade_0 = spade(fin, "s0")
        self.conv_0 = Conv2d(fin, fmid, 3, spectral=cfg.spectral, rng=rng.spawn("c0"))
        self.spade_1 = spade(fmid, "s1")
        self.conv_1 = Conv2d(fmid, fout, 3, spectral=cfg.spectral, rng=rng.spawn("c1"))
        self.learned_skip = fin != fout
        if self.learned_skip:
            self.spade_s = spade(fin, "ss")
            self.conv_s = Conv2d(
                fin, fout, 1, bias=False, spectral=cfg.spectral, rng=rng.spawn("cs")
            )

    def __call__(self, x: Tensor, mask_oh) -> Tensor:
        dx = self.conv_0(_lrelu(self.spade_0(x, mask_oh)))
        dx = self.conv_1(_lrelu(self.spade_1(dx, mask_oh)))
        skip = self.conv_s(self.spade_s(x, mask_oh)) if self.learned_skip else x
        return ops.add(skip, dx)


class ConcatResBlk(Module):
    """Ablation block: the one-hot mask is concatenated before each conv in
    place of modulation; normalization is plain with a learned affine."""

    def __init__(self, fin: int, fout: int, cfg: GeneratorConfig, rng: SplitMix64):
        super().__init__()
        self.fin, self.fout = fin, fout
        self.kind = cfg.norm_kind
        L = cfg.num_labels
        fmid = min(fin, fout)
        self.aff_0 = ChannelAffine(fin)
        self.conv_0 = Conv2d(fin + L, fmid, 3, spectral=cfg.spectral, rng=rng.spawn("c0"))
        self.aff_1 = ChannelAffine(fmid)
        self.conv_1 = Conv2d(fmid + L, fout, 3, spectral=cfg.spectral, rng=rng.spawn("c1"))
        self.learned_skip = fin != fout
        if self.learned_skip:
            self.aff_s = ChannelAffine(fin)
            self.conv_s = Conv2d(
                fin + L, fout, 1, bias=False, spectral=cfg.spectral, rng=rng.spawn("cs")
            )

    def _cat(self, x: Tensor, m) -> Tensor:
        if not isinstance(m, Tensor):
            m = ops.const(np.asarray(m, dtype=x.data.dtype))
        return ops.concat_channels([x, m])

    def __call__(self, x: Tensor, mask_oh) -> Tensor:
        dx = self.conv_0(self._cat(_lrelu(self.aff_0(norms.normalize(x, self.kind))), mask_oh))
        dx = self.conv_1(self._cat(_lrelu(self.aff_1(norms.normalize(dx, self.kind))), mask_oh))
        if self.learned_skip:
            skip = self.conv_s(self._cat(self.aff_s(norms.normalize(x, self.kind)), mask_oh))
        else:
            skip = x
        return ops.add(skip, dx)


class PlainResBlk(Module):
    """Unconditional residual block for the encoder-decoder baseline."""

    def __init__(self, fin: int, fout: int, cfg: GeneratorConfig, rng: SplitMix64):
        super().__init__()
        self.fin, self.fout = fin, fout
        self.kind = cfg.norm_kind
        fmid = min(fin, fout)
        self.aff_0 = ChannelAffine(fin)
        self.conv_0 = Conv2d(fin, fmid, 3, spectral=cfg.spectral, rng=rng.spawn("c0"))
        self.aff_1 = ChannelAffine(fmid)
        self.conv_1 = Conv2d(fmid, fout, 3, spectral=cfg.spectral, rng=rng.spawn("c1"))
        self.learned_skip = fin != fout
        if self.learned_skip:
            self.aff_s = ChannelAffine(fin)
            self.conv_s = Conv2d(
                fin, fout, 1, bias=False, spectral=cfg.spectral, rng=rng.spawn("cs")
            )

    def __call__(self, x: Tensor) -> Tensor:
        dx = self.conv_0(_lrelu(self.aff_0(norms.normalize(x, self.kind))))
        dx = self.conv_1(_lrelu(self.aff_1(norms.normalize(dx, self.kind))))
        skip = self.conv_s(self.aff_s(norms.normalize(x, self.kind))) if self.learned_skip else x
        return ops.add(skip, dx)


class Generator(Module):
    """Decoder-only synthesis network.

    noise mode: linear map of z reshaped to a 4x4 seed. downsampled_segmap
    mode: a conv on the 4x4 one-hot mask seeds the stack instead (no z).
    Then one block at 4x4 and, per stage, nearest upsample + block, closing
    with leaky relu, a 3x3 conv to image channels, and tanh.
    """

    def __init__(self, cfg: GeneratorConfig, rng: SplitMix64 | None = None):
        super().__init__()
        if cfg.variant == "encdec":
            raise ConfigError("use EncDecBaseline for the encdec variant")
        rng = rng or SplitMix64(0)
        self.cfg = cfg
        blk = SpadeResBlk if cfg.variant == "spade" else ConcatResBlk
        ch0 = cfg.width(0)
        if cfg.input_mode == "noise":
            self.fc = Linear(
                cfg.z_dim, ch0 * 16, spectral=cfg.spectral, rng=rng.spawn("fc")
            )
        else:
            self.seed_conv = Conv2d(
                cfg.num_labels, ch0, 3, spectral=cfg.spectral, rng=rng.spawn("seed")
            )
        self.head = blk(ch0, ch0, cfg, rng.spawn("head"))
        self.ups = ModuleList(
            blk(cfg.width(j), cfg.width(j + 1), cfg, rng.spawn(f"up{j}"))
            for j in range(cfg.num_up)
        )
        self.conv_out = Conv2d(
            cfg.width(cfg.num_up), cfg.img_channels, 3,
            spectral=cfg.spectral, rng=rng.spawn("out"),
        )

    def _check_pyramid(self, pyr) -> None:
        want = self.cfg.num_up + 1
        if len(pyr) != want:
            raise ConfigError(f"mask pyramid has {len(pyr)} levels, expected {want}")
        h = np.asarray(pyr[0].data if isinstance(pyr[0], Tensor) else pyr[0]).shape[-1]
        if h != 4:
            raise ConfigError(f"coarsest pyramid level is {h}x{h}, expected 4x4")

    def __call__(self, z: Tensor | None, pyramid: list) -> Tensor:
        """pyramid: one-hot batches from 4x4 (index 0) up to out_size."""
        self._check_pyramid(pyramid)
        if self.cfg.input_mode == "noise":
            if z is None:
                raise ConfigError("noise input mode needs z")
            ch0 = self.cfg.width(0)
            n = z.data.shape[0]
            x = ops.reshape(self.fc(z), (n, ch0, 4, 4))
        else:
            seed = pyramid[0]
            if not isinstance(seed, Tensor):
                seed = ops.const(np.asarray(seed))
            x = self.seed_conv(seed)
        x = self.head(x, pyramid[0])
        for j, blk in enumerate(self.ups):
            x = blk(ops.nearest_upsample(x, 2), pyramid[j + 1])
        return ops.tanh(self.conv_out(_lrelu(x)))

    def synthesize(self, z: Tensor | None, mask_list: list[masks.SegMask]) -> Tensor:
        pyr = masks.batch_pyramid(mask_list, self.cfg.num_up)
        return self(z, pyr)


class EncDecBaseline(Module):
    """Full encoder-decoder generator: the mask is consumed once at the input,
    encoded to the 4x4 bottleneck, passed through unconditional residual
    blocks, and decoded without any further mask access. Carries more
    parameters than the decoder-only network at the same width."""

    def __init__(self, cfg: GeneratorConfig, rng: SplitMix64 | None = None):
        super().__init__()
        rng = rng or SplitMix64(0)
        self.cfg = cfg
        n_up = cfg.num_up
        enc = []
        cin = cfg.num_labels
        # widths mirror the decoder: nf at full res doubling toward 4x4
        for j in range(n_up):
            cout = cfg.width(n_up - j)
            enc.append(Conv2d(cin, cout, 3, spectral=cfg.spectral, rng=rng.spawn(f"e{j}")))
            cin = cout
        self.enc = ModuleList(enc)
        self.enc_out = Conv2d(cin, cfg.width(0), 3, spectral=cfg.spectral, rng=rng.spawn("eo"))
        self.bottleneck = ModuleList(
            PlainResBlk(cfg.width(0), cfg.width(0), cfg, rng.spawn(f"b{j}"))
            for j in range(cfg.bottleneck_blocks)
        )
        self.ups = ModuleList(
            PlainResBlk(cfg.width(j), cfg.width(j + 1), cfg, rng.spawn(f"d{j}"))
            for j in range(n_up)
        )
        self.conv_out = Conv2d(
            cfg.width(n_up), cfg.img_channels, 3, spectral=cfg.spectral, rng=rng.spawn("out")
        )

    def __call__(self, z, pyramid: list) -> Tensor:
        """Signature matches Generator; z is ignored, only pyramid[-1] is read."""
        full = pyramid[-1]
        x = full if isinstance(full, Tensor) else ops.const(np.asarray(full))
        if x.data.shape[-1] != self.cfg.out_size:
            raise ConfigError(
                f"finest mask level is {x.data.shape[-1]}, expected {self.cfg.out_size}"
            )
        for conv in self.enc:
            x = ops.avg_pool2(_lrelu(conv(x)))
        x = self.enc_out(x)
        for blk in self.bottleneck:
            x = blk(x)
        for blk in self.ups:
            x = blk(ops.nearest_upsample(x, 2))
        return ops.tanh(self.conv_out(_lrelu(x)))

    def synthesize(self, z, mask_list: list[masks.SegMask]) -> Tensor:
        return self(z, masks.batch_pyramid(mask_list, self.cfg.num_up))


def build_generator(cfg: GeneratorConfig, rng: SplitMix64 | None = None) -> Module:
    return EncDecBaseline(cfg, rng) if cfg.variant == "encdec" else Generator(cfg, rng)


@dataclass
class ScaleOutput:
    features: list  # intermediate activations, shallow to deep
    logits: Tensor  # patch logits map


@dataclass
class DiscriminatorConfig:
    num_labels: int = 6
    img_channels: int = 3
    nf: int = 16
    num_scales: int = 2
    num_blocks: int = 3
    spectral: bool = True
    max_mult: int = 8


class Discriminator(Module):
    """Multi-scale patch discriminator over image + one-hot mask.

    Each scale runs num_blocks conv blocks (instance norm + leaky relu from
    the second block on), halving resolution per block, then a 3x3 conv to a
    1-channel patch logits map. The input is average-pooled between scales.
    """

    def __init__(self, cfg: DiscriminatorConfig, rng: SplitMix64 | None = None):
        super().__init__()
        rng = rng or SplitMix64(0)
        self.cfg = cfg
        cin = cfg.num_labels + cfg.img_channels
        scales = []
        for s in range(cfg.num_scales):
            convs, c = [], cin
            for b in range(cfg.num_blocks):
                cout = cfg.nf * min(cfg.max_mult, 2 ** b)
                convs.append(
                    Conv2d(c, cout, 3, spectral=cfg.spectral, rng=rng.spawn(f"s{s}b{b}"))
                )
                c = cout
            scale = Module()
            scale.convs = ModuleList(convs)
            scale.logits = Conv2d(c, 1, 3, spectral=cfg.spectral, rng=rng.spawn(f"s{s}l"))
            scales.append(scale)
        self.scales = ModuleList(scales)

    def __call__(self, image: Tensor, mask_oh) -> list[ScaleOutput]:
        if not isinstance(mask_oh, Tensor):
            mask_oh = ops.const(np.asarray(mask_oh, dtype=image.data.dtype))
        if mask_oh.data.shape[-2:] != image.data.shape[-2:]:
            raise DimensionError(
                f"mask {mask_oh.data.shape} does not align with image {image.data.shape}"
            )
        x = ops.concat_channels([image, mask_oh])
        out = []
        for s, scale in enumerate(self.scales):
            if s > 0:
                x = ops.avg_pool2(x)
            h, feats = x, []
            for b, conv in enumerate(scale.convs):
                h = conv(h)
                if b > 0:  # mask planes would be erased by normalizing block 0
                    h = norms.instance_norm(h)
                h = _lrelu(h)
                feats.append(h)
                h = ops.avg_pool2(h)
            out.append(ScaleOutput(features=feats, logits=scale.logits(h)))
        return out


class Encoder(Module):
    """Image to (mu, logvar) of q(z|image); log2(H)-2 downsampling stages."""

    def __init__(
        self,
        in_size: int,
        z_dim: int,
        nf: int = 16,
        img_channels: int = 3,
        spectral: bool = True,
        max_mult: int = 8,
        rng: SplitMix64 | None = None,
    ):
        super().__init__()
        if in_size < 16 or in_size & (in_size - 1):
            raise ConfigError(f"encoder input size must be a power of two >= 16, got {in_size}")
        rng = rng or SplitMix64(0)
        self.in_size = in_size
        self.z_dim = z_dim
        stages = int(math.log2(in_size)) - 2
        convs, c = [], img_channels
        for j in range(stages):
            cout = nf * min(max_mult, 2 ** j)
            convs.append(Conv2d(c, cout, 3, spectral=spectral, rng=rng.spawn(f"e{j}")))
            c = cout
        self.convs = ModuleList(convs)
        flat = c * 16  # stages stop at a 4x4 grid
        self.fc_mu = Linear(flat, z_dim, spectral=spectral, rng=rng.spawn("mu"))
        self.fc_logvar = Linear(flat, z_dim, spectral=spectral, rng=rng.spawn("lv"))

    def __call__(self, image: Tensor) -> tuple[Tensor, Tensor]:
        n, _, h, w = image.data.shape
        if h != w:
            raise DimensionError(f"encoder input must be square, got {h}x{w}")
        if h != self.in_size:
            raise DimensionError(f"encoder built for {self.in_size}, got {h}")
        x = image
        for j, conv in enumerate(self.convs):
            x = conv(x)
            if j > 0:
                x = norms.instance_norm(x)
            x = ops.avg_pool2(_lrelu(x))
        x = ops.reshape(x, (n, -1))
        return self.fc_mu(x), self.fc_logvar(x)


FEATURE_NET_SEED = 0x0FEA_70E5


class FeatureNet(Module):
    """Frozen 4-stage random conv stack.

    Serves the perceptual loss (all stage activations) and the distribution
    distance (final stage, globally pooled, 32-d). Weights come from a fixed
    literal seed and are buffers, so no gradient ever reaches them and every
    build is identical.
    """

    STAGE_WIDTHS = (8, 16, 32, 32)

    def __init__(self, img_channels: int = 3):
        super().__init__()
        rng = SplitMix64(FEATURE_NET_SEED)
        c = img_channels
        for j, cout in enumerate(self.STAGE_WIDTHS):
            self.register_buffer(f"w{j}", glorot_init((cout, c, 3, 3), rng.spawn(f"w{j}")))
            self.register_buffer(f"b{j}", np.zeros(cout, dtype=np.float32))
            c = cout

    def __call__(self, image: Tensor) -> list[Tensor]:
        x, out = image, []
        for j in range(len(self.STAGE_WIDTHS)):
            w = Tensor(getattr(self, f"w{j}").astype(x.data.dtype))
            b = Tensor(getattr(self, f"b{j}").astype(x.data.dtype))
            x = _lrelu(ops.conv2d(x, w, b, padding=1))
            out.append(x)
            x = ops.avg_pool2(x)
        return out

    def embed(self, image: Tensor) -> Tensor:
        """Final stage pooled over space: one 32-d vector per sample."""
        deep = self(image)[-1]
        return ops.tmean(deep, axes=(2, 3))
