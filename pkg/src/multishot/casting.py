"""Avatar derivation and identity-consistent keyframe generation.

Avatars are recurring characters proposed from the shot descriptions; each
shot is assigned exactly one. Rendering an avatar samples a portrait latent
from its prompt (text-only condition, per-avatar seed) and encodes it into
a unit-norm image embedding. Keyframes are then sampled under the full
five-domain script text plus that identity embedding, so keyframes sharing
an avatar share identity channels up to sampler noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .conditioning import (
    DEFAULT_EMBED_DIM,
    Condition,
    Embedding,
    encode_text_mock,
)
from .diffusion import DEFAULT_SHAPE, AnalyticDenoiser, GaussianWorld, NoiseSchedule, sample_reverse
from .errors import InputError, ParseError, StateError, TransportError, ValidationError
from .script import DOMAIN_FIELDS, DomainPrompt, LlmClient, ShotDescription, ShotScript
from .seeds import derive_seed, spawn_rng

DEFAULT_SHOTS_PER_AVATAR = 6  # mirrors a 30-shot story split across 5 recurring figures


@dataclass(frozen=True)
class AvatarProfile:
    """A recurring character: prompt, render seed, and (once rendered) the
    identity-preserving image embedding."""

    id: str
    prompt: DomainPrompt
    seed: int
    ip_embedding: Optional[Embedding] = None


@dataclass(frozen=True)
class Keyframe:
    """The anchoring latent for one shot."""

    latent: np.ndarray
    shot_index: int
    avatar_id: str


_AVATARS_INSTRUCTION = (
    "Propose recurring character avatars for this story and assign one to "
    "every shot. Reply with JSON: {\"avatars\": [{\"id\", \"character\", "
    "\"background\", \"relations\", \"camera\", \"hdr\"}], \"assignment\": "
    "[avatar id per shot, in shot order]}."
)


def derive_avatars(
    descriptions: List[ShotDescription],
    llm: LlmClient,
    shots_per_avatar: int = DEFAULT_SHOTS_PER_AVATAR,
    seed: int = 0,
) -> Tuple[List[AvatarProfile], List[str]]:
    """Propose avatars and a total per-shot assignment.

    The mock client implements the grouping rule (ceil(N / shots_per_avatar)
    avatars, shot i -> avatar i // shots_per_avatar); any client's completion
    is parsed and coverage-validated the same way.
    """
    if not descriptions:
        raise InputError("cannot derive avatars from an empty story")
    if shots_per_avatar < 1:
        raise InputError(f"shots_per_avatar must be >= 1, got {shots_per_avatar}")
    context = json.dumps(
        {
            "task": "avatars",
            "descriptions": [d.text for d in descriptions],
            "shots_per_avatar": shots_per_avatar,
        }
    )
    try:
        completion = llm.complete(_AVATARS_INSTRUCTION, context)
    except (ParseError, ValidationError, TransportError):
        raise
    except Exception as exc:
        raise TransportError(f"LLM client failed while proposing avatars: {exc}") from exc

    try:
        payload = json.loads(completion)
    except json.JSONDecodeError as exc:
        raise ParseError(f"avatar completion is not valid JSON: {exc}") from exc
    raw_avatars = payload.get("avatars")
    assignment = payload.get("assignment")
    if not isinstance(raw_avatars, list) or not isinstance(assignment, list):
        raise ParseError("avatar completion needs 'avatars' and 'assignment' lists")

    avatars = []
    for entry in raw_avatars:
        missing = [f for f in ("id",) + DOMAIN_FIELDS if not entry.get(f)]
        if missing:
            raise ParseError(f"avatar entry missing fields: {missing}")
        prompt = DomainPrompt(**{f: entry[f] for f in DOMAIN_FIELDS})
        avatars.append(
            AvatarProfile(
                id=entry["id"],
                prompt=prompt,
                seed=derive_seed("avatar-render", seed, entry["id"]) % (2**31),
            )
        )
    ids = [a.id for a in avatars]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate avatar ids in completion: {ids}")

    if len(assignment) != len(descriptions):
        raise ValidationError(
            f"assignment covers {len(assignment)} shots, story has {len(descriptions)}"
        )
    id_set = set(ids)
    for i, aid in enumerate(assignment):
        if aid not in id_set:
            raise ValidationError(f"shot {i} assigned to unknown avatar '{aid}'")
    return avatars, list(assignment)


def encode_image_mock(
    latent: np.ndarray, d_e: int = DEFAULT_EMBED_DIM, seed: int = 0
) -> Embedding:
    """Fixed seeded linear map of the latent, normalized to unit length.

    A (near-)zero latent maps to the first basis vector so the degenerate
    case stays deterministic and NaN-free.
    """
    flat = np.asarray(latent, dtype=float).ravel()
    weights = spawn_rng("image-encoder", seed, d_e, flat.size).standard_normal(
        (d_e, flat.size)
    ) / np.sqrt(flat.size)
    vec = weights @ flat
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        vec = np.zeros(d_e)
        vec[0] = 1.0
    else:
        vec = vec / norm
    return Embedding(data=vec, kind="image", source=f"latent:{flat.size}")


def render_avatar(
    profile: AvatarProfile,
    schedule: NoiseSchedule,
    world: GaussianWorld,
    shape: tuple = DEFAULT_SHAPE,
    d_e: int = DEFAULT_EMBED_DIM,
    encoder_seed: int = 0,
) -> AvatarProfile:
    """Render the avatar portrait and attach its image embedding."""
    cond = Condition(text=encode_text_mock(profile.prompt.as_text(), d_e, encoder_seed))
    portrait = sample_reverse(AnalyticDenoiser(world), cond, schedule, profile.seed, shape)
    return replace(profile, ip_embedding=encode_image_mock(portrait, d_e, encoder_seed))


def generate_keyframe(
    script: ShotScript,
    avatar: AvatarProfile,
    ip_scale: float,
    schedule: NoiseSchedule,
    world: GaussianWorld,
    seed: int,
    shot_index: int,
    shape: tuple = DEFAULT_SHAPE,
    d_e: int = DEFAULT_EMBED_DIM,
    encoder_seed: int = 0,
) -> Keyframe:
    """Sample the shot keyframe under the full five-domain script text plus
    the avatar's identity embedding."""
    if avatar.ip_embedding is None:
        raise StateError(f"avatar '{avatar.id}' has not been rendered")
    cond = Condition(
        text=encode_text_mock(script.as_text(), d_e, encoder_seed),
        ip=avatar.ip_embedding,
        ip_scale=ip_scale,
    )
    latent = sample_reverse(AnalyticDenoiser(world), cond, schedule, seed, shape)
    return Keyframe(latent=latent, shot_index=shot_index, avatar_id=avatar.id)
