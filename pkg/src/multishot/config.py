"""Run-level configuration: every knob of the pipeline in one serializable
dataclass, with the single-seed fan-out that makes one flag reproduce a
whole run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from .conditioning import make_condition_mean
from .diffusion import GaussianWorld, NoiseSchedule, make_schedule
from .errors import ConfigError
from .metrics import PAIRINGS, MetricsSettings
from .seeds import derive_seed
from .smoothing import MODES, SmoothConfig

LLM_BACKENDS = ("mock", "http")
ENCODERS = ("mock", "external")
EXTRACTORS = ("toy", "external")


@dataclass(frozen=True)
class PipelineConfig:
    """Behavioral knobs of a run. Field names are the config.json keys."""

    n_shots: int = 4
    frames_per_shot: int = 8
    mode: str = "fifo-reset"
    steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.3
    eta: float = 0.0
    height: int = 8
    width: int = 8
    channels: int = 8
    identity_channels: int = 4
    embed_dim: int = 16
    n_tokens: int = 4
    ip_scale: float = 1.0
    identity_gain: float = 6.0
    content_gain: float = 5.0
    sigma0: float = 0.5
    shots_per_avatar: int = 2
    style_channels: int = 6
    pairing: str = "consecutive"
    psnr_max: float = 1.0
    reset_boundary: Optional[int] = None
    seed: int = 0
    llm: str = "mock"
    llm_endpoint: str = ""
    encoder: str = "mock"
    extractors: str = "toy"

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = (
            "n_shots", "frames_per_shot", "steps", "height", "width", "channels",
            "identity_channels", "embed_dim", "n_tokens", "shots_per_avatar",
            "style_channels",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.llm not in LLM_BACKENDS:
            raise ConfigError(f"llm must be one of {LLM_BACKENDS}, got '{self.llm}'")
        if self.encoder not in ENCODERS:
            raise ConfigError(f"encoder must be one of {ENCODERS}, got '{self.encoder}'")
        if self.extractors not in EXTRACTORS:
            raise ConfigError(
                f"extractors must be one of {EXTRACTORS}, got '{self.extractors}'"
            )
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"pairing must be one of {PAIRINGS}, got '{self.pairing}'")
        if not (0.0 < self.beta_start <= self.beta_end < 1.0):
            raise ConfigError(
                f"betas must satisfy 0 < start <= end < 1, got "
                f"[{self.beta_start}, {self.beta_end}]"
            )
        if self.identity_channels > self.channels:
            raise ConfigError("identity_channels cannot exceed channels")
        if self.embed_dim % self.n_tokens != 0:
            raise ConfigError("embed_dim must be divisible by n_tokens")
        if self.sigma0 < 0:
            raise ConfigError(f"sigma0 must be nonnegative, got {self.sigma0}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.ip_scale < 0:
            raise ConfigError(f"ip_scale must be nonnegative, got {self.ip_scale}")
        if self.psnr_max <= 0:
            raise ConfigError(f"psnr_max must be positive, got {self.psnr_max}")
        if self.reset_boundary is not None and self.reset_boundary < 1:
            raise ConfigError(f"reset_boundary must be >= 1, got {self.reset_boundary}")

    # -- derived pieces -----------------------------------------------------

    @property
    def latent_shape(self) -> tuple:
        return (self.height, self.width, self.channels)

    @property
    def encoder_seed(self) -> int:
        return derive_seed("encoders", self.seed)

    @property
    def projector_seed(self) -> int:
        return derive_seed("projector", self.seed)

    @property
    def style_seed(self) -> int:
        return derive_seed("style", self.seed)

    def schedule(self) -> NoiseSchedule:
        return make_schedule(self.steps, self.beta_start, self.beta_end)

    def world(self) -> GaussianWorld:
        if self.encoder != "mock":
            raise ConfigError(
                "encoder='external' requires adapter embeddings supplied by the caller"
            )
        mean_map = make_condition_mean(
            self.projector_seed,
            self.latent_shape,
            d_e=self.embed_dim,
            n_tokens=self.n_tokens,
            d_id=self.identity_channels,
            identity_gain=self.identity_gain,
            content_gain=self.content_gain,
        )
        return GaussianWorld(sigma0=self.sigma0, mean_map=mean_map)

    def smooth_config(self) -> SmoothConfig:
        return SmoothConfig(
            mode=self.mode,
            k=self.frames_per_shot,
            T=self.steps,
            L=self.reset_boundary,
            eta=self.eta,
        )

    def metrics_settings(self) -> MetricsSettings:
        return MetricsSettings(
            identity_channels=self.identity_channels,
            style_seed=self.style_seed,
            style_channels=self.style_channels,
            pairing=self.pairing,
            psnr_max=self.psnr_max,
            projector_seed=self.projector_seed,
            encoder_seed=self.encoder_seed,
            shape=self.latent_shape,
            d_e=self.embed_dim,
            n_tokens=self.n_tokens,
            identity_gain=self.identity_gain,
            content_gain=self.content_gain,
        )

    # -- (de)serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def merged(self, **overrides) -> "PipelineConfig":
        """Apply overrides, ignoring None values (CLI flag precedence)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self


def config_to_json(config: PipelineConfig, user_input: Optional[str] = None) -> bytes:
    """Canonical config document; user_input is included when known so a
    run can be reproduced from config.json alone."""
    doc = {} if user_input is None else {"user_input": user_input}
    doc.update(config.to_dict())
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def config_from_json(data: bytes):
    """Returns (config, extras). Extras carry non-behavioral keys a config
    file may provide: 'user_input' and 'out_dir'."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    extras = {key: doc.pop(key) for key in ("user_input", "out_dir") if key in doc}
    return PipelineConfig.from_dict(doc), extras
