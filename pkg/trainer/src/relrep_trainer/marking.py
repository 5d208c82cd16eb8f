"""Entity-marker insertion around subject and object spans.

The marked sequence is [CLS] ... [SUB_T] span [/SUB_T] ... [OBJ_T] span
[/OBJ_T] ... [SEP], with T the entity type when provided and bare
[SUB]/[OBJ] otherwise. The relation representation is read off the two
begin-marker positions, so those indices are tracked through the insertion
itself (never rediscovered by token match), which keeps de-marking exact
even when a context token happens to look like a marker.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import Example

CLS = "[CLS]"
SEP = "[SEP]"


@dataclass(frozen=True)
class MarkedSequence:
    tokens: tuple[str, ...]
    subj_marker_idx: int  # position of the subject begin marker
    obj_marker_idx: int  # position of the object begin marker
    inserted: tuple[int, ...]  # positions of all six inserted tokens


def marker_names(example: Example) -> tuple[str, str, str, str]:
    sub = f"SUB_{example.subj_type}" if example.subj_type else "SUB"
    obj = f"OBJ_{example.obj_type}" if example.obj_type else "OBJ"
    return f"[{sub}]", f"[/{sub}]", f"[{obj}]", f"[/{obj}]"


def mark_entities(example: Example) -> MarkedSequence:
    sub_open, sub_close, obj_open, obj_close = marker_names(example)
    inserts = [
        (example.subj_start, sub_open, False, "sub_open"),
        (example.subj_end, sub_close, True, "sub_close"),
        (example.obj_start, obj_open, False, "obj_open"),
        (example.obj_end, obj_close, True, "obj_close"),
    ]
    tagged: list[tuple[str, str | None]] = [(tok, None)
                                            for tok in example.tokens]
    # Right-to-left keeps earlier offsets valid; at a shared offset the close
    # marker must precede the open marker, so the open one is inserted first.
    for pos, marker, is_close, tag in sorted(inserts,
                                             key=lambda e: (-e[0], e[2])):
        tagged.insert(pos, (marker, tag))
    tagged = [(CLS, "cls")] + tagged + [(SEP, "sep")]
    positions = {tag: i for i, (_, tag) in enumerate(tagged) if tag}
    return MarkedSequence(
        tokens=tuple(tok for tok, _ in tagged),
        subj_marker_idx=positions["sub_open"],
        obj_marker_idx=positions["obj_open"],
        inserted=tuple(sorted(positions.values())),
    )


def demark(marked: MarkedSequence) -> tuple[str, ...]:
    """Remove exactly the inserted positions, recovering the original tokens."""
    drop = set(marked.inserted)
    return tuple(tok for i, tok in enumerate(marked.tokens) if i not in drop)
