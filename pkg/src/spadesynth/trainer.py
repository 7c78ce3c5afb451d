"""Training loop, evaluation, sampling, the wash-away demonstration, and the
variant-comparison harness.

One counter-based RNG stream drives batch sampling and every noise draw, and
its (seed, counter) state rides along in checkpoints, so a resumed run
replays the exact step sequence an uninterrupted run would have produced.
"""

from __future__ import annotations

import dataclasses
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import losses, masks, metrics, norms, ops, optim, scenes
from .autograd import Tape, Tensor, backward, no_grad, use_tape
from .checkpoint import load_arrays, save_arrays
from .config import TrainConfig, dump_config, parse_config
from .errors import ConfigError, TrainingDiverged, UsageError
from .layers import Conv2d
from .networks import (
    Discriminator,
    EncDecBaseline,
    Encoder,
    FeatureNet,
    Generator,
    build_generator,
)
from .norms import Spade
from .rng import SplitMix64


@dataclass
class StepReport:
    step: int
    loss_d: float
    loss_g: float
    components: dict
    grad_norm_d: float
    grad_norm_g: float
    lr_g: float
    lr_d: float

    def log_line(self) -> str:
        comp = " ".join(f"{k}={v!r}" for k, v in sorted(self.components.items()))
        return (
            f"step={self.step} loss_d={self.loss_d!r} loss_g={self.loss_g!r} "
            f"lr_g={self.lr_g!r} lr_d={self.lr_d!r} {comp}"
        ).rstrip()


@dataclass
class TrainState:
    cfg: TrainConfig
    gen: object
    disc: Discriminator
    enc: Encoder | None
    opt_g: optim.Adam
    opt_d: optim.Adam
    rng: SplitMix64
    feature_net: FeatureNet
    global_step: int = 0

    @property
    def epoch(self) -> int:
        return self.global_step // self.cfg.steps_per_epoch

    def models(self):
        out = [("gen", self.gen), ("disc", self.disc)]
        if self.enc is not None:
            out.append(("enc", self.enc))
        return out


def build_state(cfg: TrainConfig) -> TrainState:
    root = SplitMix64(cfg.seed)
    gen = build_generator(cfg.gen, root.spawn("gen"))
    disc = Discriminator(cfg.disc, root.spawn("disc"))
    uses_z = cfg.gen.variant != "encdec" and cfg.gen.input_mode == "noise"
    enc = None
    if cfg.use_encoder and uses_z:
        enc = Encoder(
            cfg.gen.out_size, cfg.gen.z_dim, nf=cfg.disc.nf, rng=root.spawn("enc")
        )
    g_params = [(f"gen.{n}", p) for n, p in gen.named_parameters()]
    if enc is not None:
        g_params += [(f"enc.{n}", p) for n, p in enc.named_parameters()]
    opt_g = optim.Adam(g_params, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    opt_d = optim.Adam(
        [(f"disc.{n}", p) for n, p in disc.named_parameters()],
        beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps,
    )
    return TrainState(
        cfg=cfg, gen=gen, disc=disc, enc=enc, opt_g=opt_g, opt_d=opt_d,
        rng=root.spawn("steps"), feature_net=FeatureNet(cfg.gen.img_channels),
    )


def ensure_dataset(cfg: TrainConfig) -> tuple[scenes.Dataset, scenes.Dataset]:
    """Load data.root, generating it first if the manifests are missing."""
    d = cfg.data
    train_dir = os.path.join(d.root, "train")
    if not os.path.exists(os.path.join(train_dir, "index.txt")):
        scenes.make_dataset(
            d.root, d.n_train, d.n_val, cfg.seed,
            resolution=d.resolution, num_labels=d.num_labels,
        )
    return (
        scenes.load_dataset(train_dir),
        scenes.load_dataset(os.path.join(d.root, "val")),
    )


def _grad_norm(named_params) -> float:
    total = 0.0
    for _, p in named_params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def _check_finite(name: str, value: float, step: int) -> None:
    if not np.isfinite(value):
        raise TrainingDiverged(f"{name} is {value} at step {step}")


def train_step(
    state: TrainState,
    batch_masks: list,
    batch_images: np.ndarray,
    lr_g: float,
    lr_d: float,
) -> StepReport:
    """One D update then one G update on a single batch."""
    cfg = state.cfg
    gen, disc, enc = state.gen, state.disc, state.enc
    with use_tape(Tape()):
        for _, m in state.models():
            m.power_iterate()
        pyr = masks.batch_pyramid(batch_masks, cfg.gen.num_up)
        real = Tensor(batch_images)
        mask_full = pyr[-1]

        mu = logvar = None
        if cfg.gen.variant == "encdec" or cfg.gen.input_mode != "noise":
            z = None
        elif enc is not None:
            mu, logvar = enc(real)
            z = losses.reparameterize(mu, logvar, state.rng)
        else:
            z = Tensor(
                state.rng.normal((len(batch_masks), cfg.gen.z_dim)).astype(np.float32)
            )
        fake = gen(z, pyr)

        # discriminator update; the generator output enters detached
        out_real = disc(real, mask_full)
        out_fake = disc(fake.detach(), mask_full)
        hinge = losses.hinge_d(
            [s.logits for s in out_real], [s.logits for s in out_fake]
        )
        loss_d = ops.mul(hinge, ops.const(np.asarray(cfg.loss.w_gan, hinge.data.dtype)))
        _check_finite("loss_d", float(loss_d.data), state.global_step)
        backward(loss_d)
        grad_norm_d = _grad_norm(state.opt_d.params)
        state.opt_d.step(lr_d)
        for _, m in state.models():
            m.zero_grad()

        # generator update against the just-updated discriminator
        out_fake_g = disc(fake, mask_full)
        out_real_g = disc(real, mask_full)
        loss_g, comps = losses.generator_objective(
            [s.logits for s in out_fake_g],
            [s.features for s in out_real_g],
            [s.features for s in out_fake_g],
            real,
            fake,
            state.feature_net,
            cfg.loss,
            mu=mu,
            logvar=logvar,
        )
        _check_finite("loss_g", float(loss_g.data), state.global_step)
        backward(loss_g)
        grad_norm_g = _grad_norm(state.opt_g.params)
        state.opt_g.step(lr_g)
        for _, m in state.models():
            m.zero_grad()

    state.global_step += 1
    return StepReport(
        step=state.global_step,
        loss_d=float(loss_d.data),
        loss_g=float(loss_g.data),
        components=comps,
        grad_norm_d=grad_norm_d,
        grad_norm_g=grad_norm_g,
        lr_g=lr_g,
        lr_d=lr_d,
    )


def draw_batch(state: TrainState, ds: scenes.Dataset):
    idx = state.rng.integers(len(ds), size=(state.cfg.batch_size,))
    return [ds.masks[i] for i in idx], ds.images[idx]


def evaluate(state: TrainState, val: scenes.Dataset, tag: int = 0) -> dict:
    """mIoU / accuracy of the oracle segmenter on synthesized images, plus
    the feature-space Fréchet distance to the real set."""
    cfg = state.cfg
    rng = SplitMix64(cfg.seed).spawn(f"eval{tag}")
    tex = scenes.default_texture_map(cfg.data.num_labels)
    n = len(val)
    fakes = []
    with no_grad():
        bs = max(1, cfg.batch_size)
        for lo in range(0, n, bs):
            chunk = val.masks[lo : lo + bs]
            if cfg.gen.variant == "encdec" or cfg.gen.input_mode != "noise":
                z = None
            else:
                z = Tensor(rng.normal((len(chunk), cfg.gen.z_dim)).astype(np.float32))
            pyr = masks.batch_pyramid(chunk, cfg.gen.num_up)
            fakes.append(state.gen(z, pyr).data)
    fake_batch = np.concatenate(fakes, axis=0)
    cm = None
    for i in range(n):
        pred = metrics.oracle_segment(fake_batch[i : i + 1], tex)
        c = metrics.confusion_matrix(val.masks[i], pred)
        cm = c if cm is None else cm + c
    tp = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - tp
    present = union > 0
    report = {
        "miou": float(np.mean(tp[present] / union[present])),
        "accu": float(tp.sum() / cm.sum()),
        "fd_star": metrics.frechet_distance(
            metrics.feature_stats(val.images, state.feature_net),
            metrics.feature_stats(fake_batch, state.feature_net),
        ),
    }
    return {"metrics": report, "confusion": cm}


def fit(cfg: TrainConfig, log=None, state: TrainState | None = None,
        ckpt_path: str | None = None) -> TrainState:
    """Run (or resume) training to cfg.epochs * cfg.steps_per_epoch steps."""
    if state is None:
        state = build_state(cfg)
    train_ds, val_ds = ensure_dataset(cfg)
    if cfg.batch_size > len(train_ds):
        raise ConfigError(
            f"batch_size {cfg.batch_size} exceeds training set size {len(train_ds)}"
        )
    total = cfg.epochs * cfg.steps_per_epoch
    while state.global_step < total:
        epoch = state.epoch
        lr_g, lr_d = optim.lr_schedule(epoch, cfg)
        bm, bi = draw_batch(state, train_ds)
        rep = train_step(state, bm, bi, lr_g, lr_d)
        if log:
            log(rep.log_line())
        if state.global_step % cfg.steps_per_epoch == 0:
            done = state.global_step // cfg.steps_per_epoch
            if cfg.eval_every and done % cfg.eval_every == 0 and log:
                ev = evaluate(state, val_ds, tag=state.global_step)["metrics"]
                log(
                    f"eval epoch={done - 1} miou={ev['miou']!r} "
                    f"accu={ev['accu']!r} fd_star={ev['fd_star']!r}"
                )
            if ckpt_path:
                save_checkpoint(state, ckpt_path)
    if ckpt_path:
        save_checkpoint(state, ckpt_path)
    return state


def save_checkpoint(state: TrainState, path: str) -> None:
    arrays = {}
    for prefix, model in state.models():
        for n, p in model.named_parameters():
            arrays[f"{prefix}.param.{n}"] = p.data
        for n, b in model.named_buffers():
            arrays[f"{prefix}.buf.{n}"] = b
    arrays.update(state.opt_g.state_arrays("opt.g"))
    arrays.update(state.opt_d.state_arrays("opt.d"))
    seed, counter = state.rng.state()
    arrays["rng.state"] = np.array([seed, counter], dtype=np.uint64)
    arrays["progress.step"] = np.array([state.global_step], dtype=np.uint64)
    save_arrays(path, dump_config(state.cfg), arrays)


def load_checkpoint(path: str) -> TrainState:
    config_text, arrays = load_arrays(path)
    cfg = parse_config(config_text)
    state = build_state(cfg)
    for prefix, model in state.models():
        for n, p in model.named_parameters():
            arr = arrays[f"{prefix}.param.{n}"]
            if arr.shape != p.data.shape:
                raise UsageError(
                    f"checkpoint {prefix}.{n} has shape {arr.shape}, "
                    f"model expects {p.data.shape}"
                )
            p.data = arr.astype(p.data.dtype)
        for n, _ in model.named_buffers():
            model.set_buffer(n, arrays[f"{prefix}.buf.{n}"])
    state.opt_g.load_state_arrays("opt.g", arrays)
    state.opt_d.load_state_arrays("opt.d", arrays)
    seed, counter = arrays["rng.state"]
    state.rng.set_state((int(seed), int(counter)))
    state.global_step = int(arrays["progress.step"][0])
    return state


def sample_images(
    state: TrainState, mask: masks.SegMask, k: int, rng: SplitMix64,
    style_image: np.ndarray | None = None,
) -> np.ndarray:
    """k synthesized images (k, 3, H, W) for one mask; a style image routes
    z through the encoder's mean instead of the prior."""
    cfg = state.cfg
    with no_grad():
        if cfg.gen.variant == "encdec" or cfg.gen.input_mode != "noise":
            z = None
        elif style_image is not None:
            if state.enc is None:
                raise UsageError("checkpoint has no encoder; cannot use a style image")
            if style_image.ndim == 3:
                style_image = style_image[None]
            mu, _ = state.enc(Tensor(style_image.astype(np.float32)))
            z = Tensor(np.repeat(mu.data, k, axis=0))
        else:
            z = Tensor(rng.normal((k, cfg.gen.z_dim)).astype(np.float32))
        pyr = masks.batch_pyramid([mask] * k, cfg.gen.num_up)
        return state.gen(z, pyr).data


def run_washaway_demo(
    mask: masks.SegMask, out_path: str, seed: int = 0xA5
) -> dict:
    """Contrast two normalizations of the same conv activations.

    A zero-padding-free conv maps any uniform one-hot mask to a spatially
    constant field, which instance normalization collapses to zeros no matter
    which label produced it. The modulated path re-injects the mask through
    its gamma/beta fields, so different labels stay distinguishable.
    """
    L = mask.num_labels
    size = mask.shape[0]
    rng = SplitMix64(seed)
    # 64-bit so the collapse shows at numerical precision, not float32 noise
    conv = Conv2d(L, 8, 3, padding=0, rng=rng.spawn("conv")).astype(np.float64)
    spade = Spade(8, L, hidden=16, kernel=3, kind="instance", rng=rng.spawn("spade"))
    spade.astype(np.float64)

    def paths(m: masks.SegMask):
        oh = Tensor(m.onehot().astype(np.float64))
        with no_grad():
            h = conv(oh)
            in_out = norms.instance_norm(h)
            crop = Tensor(oh.data[:, :, 1:-1, 1:-1])
            sp_out = spade(h, crop)
        return in_out.data, sp_out.data

    def l2(a):
        return float(np.sqrt(np.sum(a.astype(np.float64) ** 2)))

    report = {"labels": {}, "input": {}}
    spade_outs = []
    for lab in range(L):
        uni = masks.uniform_mask(lab, size, L)
        in_a, sp_a = paths(uni)
        report["labels"][lab] = {"in_l2": l2(in_a), "spade_l2": l2(sp_a)}
        spade_outs.append(sp_a)
    diffs = [
        float(np.max(np.abs(spade_outs[i] - spade_outs[j])))
        for i in range(L)
        for j in range(i + 1, L)
    ]
    report["spade_min_pairwise_diff"] = min(diffs)
    in_m, sp_m = paths(mask)
    uniform = bool(np.all(mask.labels == mask.labels.flat[0]))
    report["input"] = {"uniform": uniform, "in_l2": l2(in_m), "spade_l2": l2(sp_m)}

    lines = [f"input_uniform={uniform}", f"input_in_l2={report['input']['in_l2']:.6e}"]
    for lab in range(L):
        r = report["labels"][lab]
        lines.append(f"label={lab} in_l2={r['in_l2']:.6e} spade_l2={r['spade_l2']:.6e}")
    lines.append(f"spade_min_pairwise_diff={report['spade_min_pairwise_diff']:.6e}")
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return report


@dataclass
class AblateRow:
    name: str
    seed: int
    miou: float
    accu: float
    fd_star: float
    param_count: int
    state: TrainState = field(repr=False, default=None)


def _axis_variants(axis: str):
    g = lambda **kw: kw  # generator-config overrides
    if axis == "concat":
        return [
            ("spade", g(variant="spade"), True),
            ("concat", g(variant="concat"), False),
            ("encdec", g(variant="encdec"), False),
        ]
    if axis == "input":
        return [
            ("noise", g(input_mode="noise"), True),
            ("segmap", g(input_mode="downsampled_segmap"), False),
        ]
    if axis == "norm":
        return [(k, g(norm_kind=k), True) for k in ("batch", "instance", "positional")]
    if axis == "kernel":
        return [(f"k{k}", g(modulation_kernel=k), True) for k in (1, 3, 5)]
    if axis == "width":
        return [(f"nf{w}", g(nf=w), True) for w in (4, 8, 16)]
    raise ConfigError(f"unknown ablation axis {axis!r}")


def run_ablation(cfg: TrainConfig, axis: str, seeds: int | None = None, log=None):
    """Train every variant on the shared dataset under each seed and score it
    on the validation split; returns (rows, table text)."""
    seeds = seeds or cfg.ablate.seeds
    variants = _axis_variants(axis)
    rows = []
    for name, overrides, wants_encoder in variants:
        for i in range(seeds):
            gen_cfg = dataclasses.replace(cfg.gen, **overrides)
            run_cfg = dataclasses.replace(
                cfg, gen=gen_cfg, seed=cfg.seed + i, use_encoder=wants_encoder
            )
            t0 = time.time()
            state = fit(run_cfg, log=None)
            _, val = ensure_dataset(run_cfg)
            ev = evaluate(state, val, tag=10_000 + i)["metrics"]
            rows.append(
                AblateRow(
                    name=name, seed=run_cfg.seed, miou=ev["miou"], accu=ev["accu"],
                    fd_star=ev["fd_star"], param_count=state.gen.param_count(),
                    state=state,
                )
            )
            if log:
                log(
                    f"ablate axis={axis} variant={name} seed={run_cfg.seed} "
                    f"miou={ev['miou']:.4f} accu={ev['accu']:.4f} "
                    f"fd_star={ev['fd_star']:.4f} params={rows[-1].param_count} "
                    f"secs={time.time() - t0:.1f}"
                )
    header = f"{'variant':<10} {'seed':>6} {'miou':>8} {'accu':>8} {'fd_star':>10} {'params':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.name:<10} {r.seed:>6} {r.miou:>8.4f} {r.accu:>8.4f} "
            f"{r.fd_star:>10.4f} {r.param_count:>9}"
        )
    for name, _, _ in variants:
        sel = [r.miou for r in rows if r.name == name]
        lines.append(f"{name:<10} {'mean':>6} {np.mean(sel):>8.4f}")
    return rows, "\n".join(lines) + "\n"
