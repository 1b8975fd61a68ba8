"""Prompt rendering and structured parsing of generated candidate features.

The user prompt always carries four sections in order: dataset metadata,
label co-occurrence, reasoning instructions and the output format.  Feedback
from earlier iterations is injected between reasoning and output format.
Label column names are confined to the metadata section so the generation
constraints can never name a label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .label_stats import CooccurrenceStats, top_pairs
from .metadata import DatasetProfile, render_report

NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SYSTEM_TEXT = (
    "You are an expert feature engineer for multi-label tabular classification. "
    "You propose new per-row features expressed in a small transformation "
    "language, exactly following the requested output format."
)


@dataclass(frozen=True)
class CandidateFeature:
    name: str
    description: str
    usefulness: str
    samples: tuple[str, ...]
    program: str
    raw_text: str = ""


@dataclass(frozen=True)
class ParsedResponse:
    candidates: tuple[CandidateFeature, ...]
    malformed: tuple[str, ...]  # raw text of blocks that failed structural parse


@dataclass
class FeedbackState:
    accepted: list = field(default_factory=list)   # (name, delta_acc, delta_hl)
    rejected: list = field(default_factory=list)   # (name, reason)
    banned_names: set = field(default_factory=set)

    def record_accept(self, name, delta_acc, delta_hl):
        self.accepted.append((name, delta_acc, delta_hl))
        self.banned_names.add(name)

    def record_reject(self, name, reason):
        self.rejected.append((name, reason))
        self.banned_names.add(name)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    iteration: int
    byte_length: int
    # carried for the offline mock backend, which has no real model to read
    # the prose: numeric columns with their means, names it must not reuse,
    # and how many candidates were requested
    numeric_columns: tuple = ()
    banned_names: tuple = ()
    candidates_requested: int = 0


def _metadata_section(profile: DatasetProfile) -> str:
    lines = ["## Dataset metadata", ""]
    lines.append(render_report(profile))
    if profile.sample_rows:
        lines.append("")
        lines.append(f"First {len(profile.sample_rows)} rows of the file "
                     "(including label columns):")
        lines.append(" | ".join(profile.sample_header))
        for row in profile.sample_rows:
            lines.append(" | ".join(row))
    return "\n".join(lines)


def _cooccurrence_section(profile: DatasetProfile, stats: CooccurrenceStats) -> str:
    lines = ["## Label co-occurrence", ""]
    lines.append("Joint probability that two labels are active together, and the")
    lines.append("conditional probability of one given the other:")
    pairs = top_pairs(stats)
    if not pairs:
        lines.append("  (no label pair ever co-occurs)")
    for i, j, cij, pji, pij in pairs:
        ni, nj = stats.label_names[i], stats.label_names[j]
        pji_s = f"{pji:.3f}" if pji is not None else "undefined"
        pij_s = f"{pij:.3f}" if pij is not None else "undefined"
        lines.append(f"  P({ni} and {nj}) = {cij:.3f}; "
                     f"P({nj} | {ni}) = {pji_s}; P({ni} | {nj}) = {pij_s}")
    return "\n".join(lines)


_REASONING_SECTION = """\
## Reasoning instructions

Propose new per-row features that help predict all target labels jointly.
Consider the relationships between labels shown above: features that explain
why certain labels fire together are especially valuable.  Derive value from
the input feature columns through combinations, ratios, thresholds and
transformations.  Hard constraints:
- Never reference any label column in a program; use input feature columns only.
- Every feature must evaluate to a number for every row (no text outputs).
- Prefer simple, interpretable constructions over convoluted ones."""


def _feedback_section(feedback: FeedbackState) -> str:
    lines = ["## Feedback from previous iterations", ""]
    if not feedback.accepted and not feedback.rejected:
        lines.append("(none yet)")
        return "\n".join(lines)
    if feedback.accepted:
        lines.append("Accepted features (do not propose again):")
        for name, da, dhl in feedback.accepted:
            lines.append(f"  {name}: delta accuracy {da:+.4f}, delta hamming loss {dhl:+.4f}")
    if feedback.rejected:
        lines.append("Rejected features (do not propose again, avoid similar mistakes):")
        for name, reason in feedback.rejected:
            lines.append(f"  {name}: {reason}")
    banned = sorted(feedback.banned_names)
    if banned:
        lines.append("Banned feature names: " + ", ".join(banned))
    return "\n".join(lines)


def _output_section(count: int, dsl_spec_text: str) -> str:
    return f"""\
## Output format

Emit exactly {count} candidate feature(s).  Each candidate must follow this
block format, with the CODE fence as the last field:

### FEATURE <index>
NAME: <identifier matching [A-Za-z_][A-Za-z0-9_]*>
DESCRIPTION: <one line>
USEFULNESS: <one line explaining the contribution to the classification targets>
SAMPLES: <v1> | <v2> | <v3>
CODE:
```dsl
<single expression>
```

Programs are written in this expression language:

{dsl_spec_text}"""


def build_prompt(profile: DatasetProfile, stats: CooccurrenceStats,
                 feedback: FeedbackState, candidates_per_iteration: int,
                 dsl_spec_text: str, iteration: int = 0) -> PromptBundle:
    """Deterministic four-section prompt plus the feedback digest."""
    sections = [
        _metadata_section(profile),
        _cooccurrence_section(profile, stats),
        _REASONING_SECTION,
        _feedback_section(feedback),
        _output_section(candidates_per_iteration, dsl_spec_text),
    ]
    user_text = "\n\n".join(sections)
    return PromptBundle(
        system_text=SYSTEM_TEXT,
        user_text=user_text,
        iteration=iteration,
        byte_length=len(user_text.encode("utf-8")),
        numeric_columns=profile.numeric_columns(),
        banned_names=tuple(sorted(feedback.banned_names)),
        candidates_requested=candidates_per_iteration,
    )


def render_candidate(index: int, cand: CandidateFeature) -> str:
    """Wire-format block for one candidate (used by the mock backend)."""
    samples = " | ".join(cand.samples)
    return (f"### FEATURE {index}\n"
            f"NAME: {cand.name}\n"
            f"DESCRIPTION: {cand.description}\n"
            f"USEFULNESS: {cand.usefulness}\n"
            f"SAMPLES: {samples}\n"
            f"CODE:\n"
            f"```dsl\n{cand.program}\n```")


_FIELD_RES = {
    "name": re.compile(r"^NAME:\s*(.+)$", re.MULTILINE),
    "description": re.compile(r"^DESCRIPTION:\s*(.+)$", re.MULTILINE),
    "usefulness": re.compile(r"^USEFULNESS:\s*(.+)$", re.MULTILINE),
    "samples": re.compile(r"^SAMPLES:\s*(.+)$", re.MULTILINE),
}
_CODE_RE = re.compile(r"^CODE:\s*\n```(?:dsl)?\s*\n(.*?)\n```", re.MULTILINE | re.DOTALL)


def parse_response(text: str) -> ParsedResponse:
    """Extract candidate blocks; structurally broken ones land in `malformed`.

    DSL programs are not validated here; that is the transform language's job.
    """
    blocks = re.split(r"^### FEATURE\b.*$", text, flags=re.MULTILINE)[1:]
    candidates = []
    malformed = []
    for block in blocks:
        fields = {}
        ok = True
        for key, rx in _FIELD_RES.items():
            m = rx.search(block)
            if m is None:
                ok = False
                break
            fields[key] = m.group(1).strip()
        code = _CODE_RE.search(block)
        if not ok or code is None or not NAME_RE.match(fields.get("name", "")):
            malformed.append(block.strip())
            continue
        samples = tuple(s.strip() for s in fields["samples"].split("|"))
        candidates.append(CandidateFeature(
            name=fields["name"],
            description=fields["description"],
            usefulness=fields["usefulness"],
            samples=samples,
            program=code.group(1).strip(),
            raw_text=block.strip(),
        ))
    return ParsedResponse(tuple(candidates), tuple(malformed))
