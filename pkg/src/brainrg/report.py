"""Global report assembly from regional reports.

A reporter is any callable ``(volume, prompt, atlas) -> str``. The built-in
:func:`stub_report` describes intensity contrast per structure and stands in
for a learned decoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from brainrg.errors import ConfigError, EmptyPromptError, MissingAnomalyMask, MissingUserPrompts
from brainrg.roiselect import RegionalPrompt, global_prompt, regional_prompts
from brainrg.volume import AtlasLabelMap, BinaryMask, Volume, brain_mask, check_dims

Reporter = Callable[[Volume, RegionalPrompt, AtlasLabelMap], str]

FALLBACK_KEY = "__fallback__"
DEFAULT_FALLBACK = "No abnormal signal is seen in the {structure}"
MODES = ("global", "autoseg", "prompt")


def _clean(sentence: str) -> str:
    return sentence.strip().rstrip(".").strip()


def join_sentences(sentences: Sequence[str]) -> str:
    parts = [_clean(s) for s in sentences if _clean(s)]
    return ". ".join(parts) + "." if parts else ""


@dataclass(frozen=True)
class TemplateTable:
    """Normal-finding sentence per structure id.

    The fallback may contain ``{structure}``, replaced by the structure name.
    """

    sentences: Mapping[int, str] = field(default_factory=dict)
    fallback: str = DEFAULT_FALLBACK

    def normal_sentence(self, label: int, atlas: AtlasLabelMap) -> str:
        if label in self.sentences:
            return _clean(self.sentences[label])
        return _clean(self.fallback.replace("{structure}", atlas.name_of(label)))

    @classmethod
    def from_names(cls, doc: Mapping[str, str], atlas: AtlasLabelMap) -> TemplateTable:
        sentences = {}
        fallback = DEFAULT_FALLBACK
        for name, sentence in doc.items():
            if not isinstance(sentence, str):
                raise ConfigError(f"template for {name!r} must be a string")
            if name == FALLBACK_KEY:
                fallback = sentence
            else:
                sentences[atlas.label_of(name)] = sentence
        return cls(sentences, fallback)

    @classmethod
    def from_json(cls, path, atlas: AtlasLabelMap) -> TemplateTable:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ConfigError("template file must hold a JSON object")
        return cls.from_names(doc, atlas)


@dataclass(frozen=True)
class RegionalReport:
    prompt: RegionalPrompt
    text: str
    modality_tag: str = ""

    def __post_init__(self):
        if not self.text:
            raise ValueError("regional report text must be nonempty")


def _prompt_structures(prompt: RegionalPrompt, atlas: AtlasLabelMap) -> list[int]:
    if prompt.is_global:
        return atlas.present_labels()
    return prompt.sorted_labels()


def stub_report(
    volume: Volume,
    prompt: RegionalPrompt,
    atlas: AtlasLabelMap,
    anomaly: Optional[BinaryMask] = None,
    templates: Optional[TemplateTable] = None,
) -> str:
    """Deterministic description of the anomaly inside each prompted structure."""
    if not prompt.mask.any():
        raise EmptyPromptError("prompt mask is empty")
    templates = templates or TemplateTable()
    anomaly_bits = np.zeros(atlas.dims, dtype=bool) if anomaly is None else anomaly.bits
    check_dims(volume, atlas, prompt.mask)
    data = volume.data.astype(np.float64)
    sentences = []
    for label in _prompt_structures(prompt, atlas):
        region = atlas.labels == label
        lesion = region & anomaly_bits
        if not lesion.any():
            sentences.append(templates.normal_sentence(label, atlas))
            continue
        healthy = region & ~anomaly_bits
        if not healthy.any():
            healthy = brain_mask(atlas).bits & ~anomaly_bits
        sentences.append(f"{_contrast(data, lesion, healthy)} signal in the {atlas.name_of(label)}")
    if not sentences:
        # background-only component: no structure to name
        lesion = prompt.mask.bits & anomaly_bits
        if lesion.any():
            sentences.append(f"{_contrast(data, lesion, ~anomaly_bits)} signal outside the labelled brain structures")
        else:
            sentences.append("No abnormal signal is seen in the selected region")
    return join_sentences(sentences)


def _contrast(data: np.ndarray, lesion: np.ndarray, healthy: np.ndarray) -> str:
    if not healthy.any():
        return "Abnormal"
    return "Hyperintense" if data[lesion].mean() > data[healthy].mean() else "Hypointense"


def stub_reporter(anomaly: Optional[BinaryMask] = None, templates: Optional[TemplateTable] = None) -> Reporter:
    def reporter(volume: Volume, prompt: RegionalPrompt, atlas: AtlasLabelMap) -> str:
        return stub_report(volume, prompt, atlas, anomaly, templates)

    return reporter


def assemble_global(regional: Sequence[RegionalReport], atlas: AtlasLabelMap, templates: TemplateTable) -> str:
    """Regional paragraphs in order, then one template paragraph for uncovered structures."""
    covered: set[int] = set()
    for r in regional:
        check_dims(r.prompt.mask, atlas)
        covered |= set(_prompt_structures(r.prompt, atlas))
    paragraphs = [r.text.strip() for r in regional]
    normal = [templates.normal_sentence(l, atlas) for l in atlas.present_labels() if l not in covered]
    if normal:
        paragraphs.append(join_sentences(normal))
    return "\n\n".join(paragraphs)


@dataclass(frozen=True)
class ReportResult:
    text: str
    regional: list[RegionalReport]

    def to_json(self, atlas: AtlasLabelMap) -> dict:
        return {
            "global_text": self.text,
            "regional": [
                {
                    "structures": [atlas.name_of(l) for l in _prompt_structures(r.prompt, atlas)],
                    "text": r.text,
                }
                for r in self.regional
            ],
        }


def run_mode(
    mode: str,
    volume: Volume,
    atlas: AtlasLabelMap,
    reporter: Reporter,
    templates: TemplateTable,
    anomaly: Optional[BinaryMask] = None,
    user_prompts: Optional[Sequence[RegionalPrompt]] = None,
    connectivity: int = 26,
) -> ReportResult:
    check_dims(volume, atlas)
    if mode == "global":
        prompt = global_prompt(atlas.dims, atlas.spacing)
        text = reporter(volume, prompt, atlas)
        return ReportResult(text, [RegionalReport(prompt, text)])
    if mode == "autoseg":
        if anomaly is None:
            raise MissingAnomalyMask("autoseg mode needs an anomaly mask")
        prompts = regional_prompts(anomaly, atlas, connectivity)
    elif mode == "prompt":
        if not user_prompts:
            raise MissingUserPrompts("prompt mode needs at least one user prompt")
        prompts = list(user_prompts)
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    reports = [RegionalReport(p, reporter(volume, p, atlas)) for p in prompts]
    return ReportResult(assemble_global(reports, atlas, templates), reports)
