"""Compact encoder-decoder suggestion model with reply-token output.

The input and output embedding tables are the same tensor: logits are the
decoder states projected onto the shared embedding matrix. Reply-token rows
are initialized to the bag-of-words mean of their constituent word embeddings
so the model starts with a semantic prior over the otherwise unseen tokens;
all rows stay trainable.
"""

from __future__ import annotations

import torch
from torch import nn

from .vocab import BOS_ID, PAD_ID, ReplyVocabulary


def bow_initialize(reply_text: str, embedding: torch.Tensor, tokenizer) -> torch.Tensor:
    """Mean of the word embeddings of the reply's pieces.

    Raises on a reply with no pieces; unknown pieces fall back to the
    tokenizer's unknown id like any other lookup.
    """
    ids = tokenizer.encode(reply_text)
    if not ids:
        raise ValueError(f"reply {reply_text!r} tokenizes to zero pieces")
    return embedding[torch.tensor(ids, dtype=torch.long)].mean(dim=0)


class ReplySetModel(nn.Module):
    def __init__(
        self,
        vocab: ReplyVocabulary,
        d_model: int = 128,
        n_heads: int = 4,
        n_layers: int = 2,
        ff_dim: int = 256,
        dropout: float = 0.1,
        max_positions: int = 80,
    ):
        super().__init__()
        self.vocab = vocab
        self.d_model = d_model
        self.embedding = nn.Embedding(vocab.size, d_model, padding_idx=PAD_ID)
        self.src_positions = nn.Embedding(max_positions, d_model)
        self.tgt_positions = nn.Embedding(max_positions, d_model)
        # small init keeps tied-projection logits near zero at the start
        for table in (self.embedding, self.src_positions, self.tgt_positions):
            nn.init.normal_(table.weight, std=0.02)
        with torch.no_grad():
            self.embedding.weight[PAD_ID].zero_()
        enc_layer = nn.TransformerEncoderLayer(
            d_model, n_heads, ff_dim, dropout, batch_first=True, norm_first=True
        )
        dec_layer = nn.TransformerDecoderLayer(
            d_model, n_heads, ff_dim, dropout, batch_first=True, norm_first=True
        )
        self.encoder = nn.TransformerEncoder(enc_layer, n_layers, enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(dec_layer, n_layers)

    def initialize_reply_embeddings(self, mode: str = "bow", seed: int = 0) -> None:
        """Fill the reply-token rows of the shared table, in place.

        ``bow`` uses the piece-mean prior; ``random`` draws fresh normal rows
        (the tabula-rasa configuration).
        """
        weight = self.embedding.weight
        with torch.no_grad():
            if mode == "bow":
                base = weight[: self.vocab.base_size].clone()
                for reply_id, text in enumerate(self.vocab.reply_texts):
                    row = self.vocab.reply_token(reply_id)
                    weight[row] = bow_initialize(text, base, self.vocab.tokenizer)
            elif mode == "random":
                gen = torch.Generator().manual_seed(seed)
                fresh = torch.randn(
                    self.vocab.n_replies, self.d_model, generator=gen
                ) * 0.02
                weight[self.vocab.base_size :] = fresh
            else:
                raise ValueError(f"unknown init mode {mode!r}")

    def _embed(self, ids: torch.Tensor, positions: nn.Embedding) -> torch.Tensor:
        pos = torch.arange(ids.shape[1], device=ids.device)
        return self.embedding(ids) + positions(pos)[None, :, :]

    def encode(self, src_ids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        pad_mask = src_ids == PAD_ID
        memory = self.encoder(self._embed(src_ids, self.src_positions),
                              src_key_padding_mask=pad_mask)
        return memory, pad_mask

    def forward(self, src_ids: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        """Logits over the full vocabulary for each decoder position.

        ``tgt_in`` is the shifted target: BOS followed by the gold reply
        tokens, so position k predicts reply k.
        """
        memory, src_pad = self.encode(src_ids)
        causal = nn.Transformer.generate_square_subsequent_mask(
            tgt_in.shape[1], device=tgt_in.device
        )
        states = self.decoder(
            self._embed(tgt_in, self.tgt_positions),
            memory,
            tgt_mask=causal,
            memory_key_padding_mask=src_pad,
        )
        return states @ self.embedding.weight.T  # output layer shares the table

    @torch.no_grad()
    def greedy_reply_tokens(
        self, src_ids: torch.Tensor, k: int, block_repeats: bool = True
    ) -> torch.Tensor:
        """Greedy constrained decode of ``k`` reply tokens per batch row.

        Non-reply logits are masked to -inf at every step; with
        ``block_repeats`` already-emitted reply tokens are masked as well, so
        each set contains distinct replies.
        """
        self.eval()
        batch = src_ids.shape[0]
        out = torch.full((batch, k), -1, dtype=torch.long, device=src_ids.device)
        tgt = torch.full((batch, 1), BOS_ID, dtype=torch.long, device=src_ids.device)
        for step in range(k):
            logits = self.forward(src_ids, tgt)[:, -1, :]
            logits[:, : self.vocab.base_size] = float("-inf")
            if block_repeats and step > 0:
                logits.scatter_(1, out[:, :step], float("-inf"))
            nxt = logits.argmax(dim=1)
            out[:, step] = nxt
            tgt = torch.cat([tgt, nxt[:, None]], dim=1)
        return out

    @torch.no_grad()
    def first_step_topk(self, src_ids: torch.Tensor, k: int) -> torch.Tensor:
        """Top-k distinct reply tokens from a single decode step.

        Inference path for models trained on one reply per example (the
        predict-replies-separately configuration).
        """
        self.eval()
        tgt = torch.full((src_ids.shape[0], 1), BOS_ID, dtype=torch.long,
                         device=src_ids.device)
        logits = self.forward(src_ids, tgt)[:, -1, :]
        logits[:, : self.vocab.base_size] = float("-inf")
        return logits.topk(k, dim=1).indices
