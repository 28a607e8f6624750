"""Inference wrappers: extractive QA with span/token probabilities, seeded generation.

The QA head scores candidate answer spans with start+end logits; candidates
(plus the CLS no-answer position) are normalized together with a softmax, so
the reported span probabilities and the no-answer probability share one
distribution. A token's probability is its marginal chance of being inside
the answer: the summed probability of every candidate span covering it.
"""

from __future__ import annotations

import threading

import torch
from transformers import (
    AutoModelForCausalLM,
    AutoModelForQuestionAnswering,
    AutoTokenizer,
)

MAX_ANSWER_TOKENS = 30
CANDIDATES_PER_SIDE = 20


class ModelService:
    """Holds both models; inference is serialized behind one lock."""

    def __init__(self, qa_model_id: str, gen_model_id: str, device: str = "cpu"):
        self.qa_model_id = qa_model_id
        self.gen_model_id = gen_model_id
        self.device = torch.device(device)
        self.qa_tokenizer = AutoTokenizer.from_pretrained(qa_model_id)
        self.qa_model = AutoModelForQuestionAnswering.from_pretrained(qa_model_id).to(self.device).eval()
        self.gen_tokenizer = AutoTokenizer.from_pretrained(gen_model_id)
        self.gen_model = AutoModelForCausalLM.from_pretrained(gen_model_id).to(self.device).eval()
        self._lock = threading.Lock()

    # --- extractive QA ------------------------------------------------------

    def qa(self, context: str, question: str, top_k: int) -> dict:
        with self._lock:
            return self._qa_locked(context, question, top_k)

    def _qa_locked(self, context: str, question: str, top_k: int) -> dict:
        inputs = self.qa_tokenizer(
            question,
            context,
            return_tensors="pt",
            truncation="only_second",
            max_length=min(self.qa_tokenizer.model_max_length, 512),
            return_offsets_mapping=True,
        )
        offsets = inputs.pop("offset_mapping")[0].tolist()
        sequence_ids = inputs.sequence_ids(0)
        inputs = {k: v.to(self.device) for k, v in inputs.items()}
        with torch.no_grad():
            output = self.qa_model(**inputs)
        start_logits = output.start_logits[0]
        end_logits = output.end_logits[0]

        context_positions = [
            i
            for i, sid in enumerate(sequence_ids)
            if sid == 1 and offsets[i][0] != offsets[i][1]
        ]
        if not context_positions:
            return {"answers": [], "no_answer_probability": 1.0}

        def top_positions(logits: torch.Tensor) -> list[int]:
            ranked = sorted(context_positions, key=lambda i: -float(logits[i]))
            return ranked[:CANDIDATES_PER_SIDE]

        candidates: dict[tuple[int, int], float] = {}
        for start in top_positions(start_logits):
            for end in top_positions(end_logits):
                if end < start or end - start + 1 > MAX_ANSWER_TOKENS:
                    continue
                char_span = (offsets[start][0], offsets[end][1])
                score = float(start_logits[start] + end_logits[end])
                if char_span not in candidates or score > candidates[char_span][0]:
                    candidates[char_span] = (score, start, end)

        no_answer_score = float(start_logits[0] + end_logits[0])
        spans = list(candidates.items())
        scores = torch.tensor([score for _, (score, _, _) in spans] + [no_answer_score])
        probabilities = torch.softmax(scores, dim=0).tolist()
        no_answer_probability = probabilities[-1]

        # Marginal in-answer probability per token position.
        marginal: dict[int, float] = {}
        for ((_, _), (_, start, end)), probability in zip(spans, probabilities):
            for position in range(start, end + 1):
                marginal[position] = marginal.get(position, 0.0) + probability

        ranked = sorted(
            zip(spans, probabilities), key=lambda item: -item[1]
        )[:top_k]
        answers = []
        for ((char_start, char_end), (_, start, end)), probability in ranked:
            tokens = [
                [context[offsets[i][0] : offsets[i][1]], min(1.0, marginal[i])]
                for i in range(start, end + 1)
            ]
            answers.append(
                {
                    "text": context[char_start:char_end],
                    "start": char_start,
                    "end": char_end,
                    "span_probability": probability,
                    "token_probabilities": tokens,
                }
            )
        return {"answers": answers, "no_answer_probability": no_answer_probability}

    # --- generation -----------------------------------------------------------

    def generate(self, prompt: str, max_tokens: int, temperature: float, stop: list[str], seed: int) -> str:
        with self._lock:
            torch.manual_seed(seed)
            inputs = self.gen_tokenizer(
                prompt,
                return_tensors="pt",
                truncation=True,
                max_length=min(self.gen_tokenizer.model_max_length, 1024),
            )
            inputs = {k: v.to(self.device) for k, v in inputs.items()}
            kwargs = dict(
                max_new_tokens=max_tokens,
                pad_token_id=self.gen_tokenizer.pad_token_id or self.gen_tokenizer.eos_token_id,
            )
            if temperature > 0:
                kwargs.update(do_sample=True, temperature=temperature)
            else:
                kwargs.update(do_sample=False)
            with torch.no_grad():
                output_ids = self.gen_model.generate(**inputs, **kwargs)
        new_tokens = output_ids[0][inputs["input_ids"].shape[1] :]
        text = self.gen_tokenizer.decode(new_tokens, skip_special_tokens=True)
        for stop_sequence in stop:
            if stop_sequence and stop_sequence in text:
                text = text[: text.index(stop_sequence)]
        return text
