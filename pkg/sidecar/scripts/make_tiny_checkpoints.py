"""Build the tiny committed checkpoints used by the offline sidecar tests.

Run from the sidecar directory:

    python3 scripts/make_tiny_checkpoints.py

Produces two miniature BERT checkpoints under tests/checkpoints/: a QA model
overfitted on the shared fixture plot (so its top answer to the character
question is a real character mention, with a working no-answer head) and a
randomly initialized decoder for generation-protocol tests. Training is
seeded and takes seconds on CPU. Also freezes the golden /qa response under
shared/golden/.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertForQuestionAnswering, BertLMHeadModel, BertTokenizerFast

SIDECAR_DIR = Path(__file__).resolve().parent.parent
REPO_DIR = SIDECAR_DIR.parent
CHECKPOINTS = SIDECAR_DIR / "tests" / "checkpoints"
SHARED = REPO_DIR / "shared"

STORY = (SHARED / "vault_story.txt").read_text("utf-8")

CHARACTER_QUESTION = "Who is a character in the story?"
LOCATION_QUESTION = "Where is a location in the story?"
UNANSWERABLE_QUESTION = "What is the name of the captain's ship?"

TRAINING_EXAMPLES = [
    (CHARACTER_QUESTION, "Archie"),
    (LOCATION_QUESTION, "Bank vault"),
    (UNANSWERABLE_QUESTION, None),
]


def build_vocab(texts: list[str]) -> list[str]:
    tokens: list[str] = []
    seen = set()
    for text in texts:
        for token in re.findall(r"\w+|[^\w\s]", text.lower()):
            if token not in seen:
                seen.add(token)
                tokens.append(token)
    return ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + tokens


def make_tokenizer() -> BertTokenizerFast:
    vocab = build_vocab([STORY] + [q for q, _ in TRAINING_EXAMPLES])
    vocab_map = {token: i for i, token in enumerate(vocab)}
    tokenizer = Tokenizer(models.WordPiece(vocab=vocab_map, unk_token="[UNK]"))
    tokenizer.normalizer = normalizers.BertNormalizer(lowercase=True)
    tokenizer.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tokenizer.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", vocab_map["[CLS]"]), ("[SEP]", vocab_map["[SEP]"])],
    )
    return BertTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


def tiny_config(vocab_size: int, **extra) -> BertConfig:
    # Dropout off: these checkpoints exist to be overfitted deterministically.
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=64,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=128,
        max_position_embeddings=512,
        hidden_dropout_prob=0.0,
        attention_probs_dropout_prob=0.0,
        **extra,
    )


def char_span_to_token_span(encoding, row: int, char_start: int, char_end: int) -> tuple[int, int]:
    offsets = encoding["offset_mapping"][row].tolist()
    sequence_ids = encoding.sequence_ids(row)
    token_start = token_end = None
    for i, (sid, (a, b)) in enumerate(zip(sequence_ids, offsets)):
        if sid != 1 or a == b:
            continue
        if token_start is None and b > char_start:
            token_start = i
        if a < char_end:
            token_end = i
    assert token_start is not None and token_end is not None
    return token_start, token_end


def train_qa(tokenizer: BertTokenizerFast, out_dir: Path) -> None:
    torch.manual_seed(0)
    model = BertForQuestionAnswering(tiny_config(tokenizer.vocab_size))
    optimizer = torch.optim.AdamW(model.parameters(), lr=5e-4)

    questions = [question for question, _ in TRAINING_EXAMPLES]
    encoding = tokenizer(
        questions,
        [STORY] * len(questions),
        return_tensors="pt",
        return_offsets_mapping=True,
        truncation=True,
        max_length=256,
        padding=True,
    )
    starts, ends = [], []
    for row, (_, answer) in enumerate(TRAINING_EXAMPLES):
        if answer is None:
            starts.append(0)  # CLS marks no-answer
            ends.append(0)
            continue
        char_start = STORY.index(answer)
        start, end = char_span_to_token_span(encoding, row, char_start, char_start + len(answer))
        starts.append(start)
        ends.append(end)
    inputs = {k: v for k, v in encoding.items() if k != "offset_mapping"}
    start_positions = torch.tensor(starts)
    end_positions = torch.tensor(ends)

    model.train()
    loss = float("inf")
    for step in range(5000):
        optimizer.zero_grad()
        output = model(**inputs, start_positions=start_positions, end_positions=end_positions)
        output.loss.backward()
        optimizer.step()
        loss = float(output.loss.detach())
        if loss < 0.002:
            break
    print(f"qa training stopped at step {step} with loss {loss:.5f}")

    model.eval()
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)


def make_gen(tokenizer: BertTokenizerFast, out_dir: Path) -> None:
    torch.manual_seed(1)
    model = BertLMHeadModel(tiny_config(tokenizer.vocab_size, is_decoder=True))
    model.eval()
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)


def freeze_golden() -> None:
    sys.path.insert(0, str(SIDECAR_DIR / "src"))
    from sidecar.models import ModelService

    service = ModelService(str(CHECKPOINTS / "tiny-qa"), str(CHECKPOINTS / "tiny-gen"))
    response = service.qa(STORY, CHARACTER_QUESTION, top_k=5)
    golden_path = SHARED / "golden" / "qa_character_response.json"
    golden_path.parent.mkdir(parents=True, exist_ok=True)
    golden_path.write_text(json.dumps(response, indent=2), "utf-8")

    top = response["answers"][0]
    characters = ("Archie", "John Clay", "Helper")
    overlaps = any(
        STORY.index(name) < top["end"] and top["start"] < STORY.index(name) + len(name)
        for name in characters
    )
    print("top answer:", repr(top["text"]), "overlaps character:", overlaps)
    if not overlaps:
        raise SystemExit("training failed to produce a character-overlapping top span")


def main() -> None:
    qa_dir = CHECKPOINTS / "tiny-qa"
    gen_dir = CHECKPOINTS / "tiny-gen"
    tokenizer = make_tokenizer()
    train_qa(tokenizer, qa_dir)
    make_gen(tokenizer, gen_dir)
    freeze_golden()
    print("checkpoints written to", CHECKPOINTS)


if __name__ == "__main__":
    main()
