"""Synthetic transition-caption generation.

For every consecutive caption pair (C_i, C_{i+1}) of a video, a
language model is asked for one caption describing the event between
them, the raw text is embedded with the same text encoder as the real
captions, and the manifest gains a per-video synthetic file holding
exactly caption_count - 1 rows.

SYSTEM_PROMPT and USER_TEMPLATE are frozen byte for byte, including
the mixed quote characters and the asymmetric spacing around the two
caption slots. They are a wire contract with runs recorded elsewhere;
normalizing them would break prompt-level reproducibility, so they
must never be reformatted.

Every pair produces one transcript record (JSON lines, call order).
A failed completion is retried up to three times; after the fourth
failure the caption falls back to "transition between: C_i; C_{i+1}"
and the record carries fallback=true.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import embfile
from .encoders import DEFAULT_DIM, Encoder, resolve_encoder
from .errors import AnnotationError, GenerationError, IoError
from .llm import (
    DEFAULT_MAX_NEW_TOKENS,
    DEFAULT_MODEL,
    DEFAULT_TEMPERATURE,
    CompletionClient,
)

log = logging.getLogger("embridge")

MAX_ATTEMPTS = 4  # one attempt plus up to three retries

SYSTEM_PROMPT = (
    "You are a “Video Context Inference Expert,\" an AI specialized in "
    "analyzing sequences of video event captions. Your primary goal is to "
    "generate one new, plausible caption for the event that likely occurred "
    "*between* the two provided captions, creating a smooth and logical "
    "narrative flow.\n"
    "\n"
    "1.  **Context is Key**: Deeply analyze the preceding and succeeding "
    "captions. The generated caption must serve as a logical bridge, "
    "connecting the two events seamlessly.\n"
    "\n"
    "2.  **Infer the Unseen Action**: Do not simply rephrase or combine the "
    "given captions. Your task is to infer the most probable *transitional "
    "action* or *change of state*. Focus on the single most important action "
    "that connects the two moments.\n"
    "\n"
    "3.  **Maintain Consistency**: The style, tone, and level of detail of "
    "your generated captions should match the input captions. They should be "
    "concise, descriptive, and written from the perspective of an objective "
    "observer.\n"
    "\n"
    "4.  **Plausibility over Creativity**: The generated event must be highly "
    "plausible. Avoid introducing new elements that cannot be reasonably "
    "inferred.\n"
    "\n"
    "5.  **Output**: Provide ONLY the single generated caption text, without "
    "any labels or explanations."
)

USER_TEMPLATE = (
    "Analyze the following two consecutive video captions and generate a "
    "single, concise caption that describes the most plausible event "
    "happening between them.\n"
    "\n"
    "**Caption 1:**:{caption1}\n"
    "\n"
    "**Caption 2:** :{caption2}\n"
    "\n"
    "Based on the rules, what is the single event that connects these two "
    "captions?"
)


def build_user_prompt(caption1: str, caption2: str) -> str:
    # split on the slots rather than str.format or chained replace, so
    # captions containing braces or a slot name are inserted literally
    head, rest = USER_TEMPLATE.split("{caption1}")
    mid, tail = rest.split("{caption2}")
    return head + caption1 + mid + caption2 + tail


def fallback_caption(caption1: str, caption2: str) -> str:
    return f"transition between: {caption1}; {caption2}"


@dataclass
class AugmentationJob:
    manifest_path: str | Path
    captions_by_video: dict[str, list[str]]
    model: str = DEFAULT_MODEL
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    encoder: str = "mock"
    embed_dim: int = DEFAULT_DIM
    transcript_path: str | Path | None = None  # default: transcript.jsonl beside the manifest


@dataclass
class AugmentReport:
    manifest_path: Path
    transcript_path: Path
    pairs: int = 0
    fallbacks: list[tuple[str, int]] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)


def _generate_one(client: CompletionClient, job: AugmentationJob, user: str):
    attempts = 0
    while True:
        attempts += 1
        try:
            text = client.complete(
                SYSTEM_PROMPT, user, job.max_new_tokens, job.temperature
            )
            return text, attempts, False
        except GenerationError:
            if attempts >= MAX_ATTEMPTS:
                return None, attempts, True


def run_augment(
    job: AugmentationJob,
    client: CompletionClient,
    encoder: Encoder | None = None,
) -> AugmentReport:
    """Generate, embed, and record synthetic captions for a manifest.

    The manifest is read and rewritten as plain JSON; caption counts
    are cross-checked against the embedding files. Videos with fewer
    than two captions are skipped (their augmentation loss is simply
    disabled downstream) and logged.
    """
    manifest_path = Path(job.manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("videos"), list):
        raise AnnotationError(f"{manifest_path}: not a manifest")

    enc = encoder if encoder is not None else resolve_encoder(job.encoder, job.embed_dim)
    out_dir = manifest_path.parent
    transcript_path = (
        Path(job.transcript_path)
        if job.transcript_path is not None
        else out_dir / "transcript.jsonl"
    )

    report = AugmentReport(manifest_path=manifest_path, transcript_path=transcript_path)
    with open(transcript_path, "w", encoding="utf-8") as transcript:
        for entry in doc["videos"]:
            vid = entry.get("id")
            captions = job.captions_by_video.get(vid)
            if captions is None:
                raise AnnotationError(f"no caption texts for video {vid!r}")
            stored = embfile.read_matrix(out_dir / entry["captions"])
            if stored.shape[0] != len(captions):
                raise AnnotationError(
                    f"{vid}: manifest holds {stored.shape[0]} caption embeddings "
                    f"but {len(captions)} texts were supplied"
                )
            if len(captions) < 2:
                log.warning("skipping %s: fewer than two captions", vid)
                report.skipped.append((vid, "fewer than two captions"))
                continue

            texts = []
            for i in range(len(captions) - 1):
                user = build_user_prompt(captions[i], captions[i + 1])
                text, attempts, fell_back = _generate_one(client, job, user)
                if fell_back:
                    text = fallback_caption(captions[i], captions[i + 1])
                    log.warning("%s pair %d: fell back after %d attempts", vid, i, attempts)
                    report.fallbacks.append((vid, i))
                texts.append(text)
                record = {
                    "video": vid,
                    "pair": [i, i + 1],
                    "model": job.model,
                    "max_new_tokens": job.max_new_tokens,
                    "temperature": job.temperature,
                    "system": SYSTEM_PROMPT,
                    "user": user,
                    "response": text,
                    "attempts": attempts,
                    "fallback": fell_back,
                }
                transcript.write(json.dumps(record) + "\n")
                transcript.flush()
                report.pairs += 1

            synthetic_name = f"{vid}.synthetic.emb"
            embfile.write_matrix(enc.encode_texts(texts), out_dir / synthetic_name)
            entry["synthetic"] = synthetic_name

    manifest_path.write_text(json.dumps(doc, indent=2) + "\n")
    return report
