"""Input layer (embedding lookup + BiLSTM) and heterogeneous graph attention.

Character states are contextualized by a BiLSTM whose two directions are
each half the model width, so the concatenation matches the embedding
dimension d.  Each attention layer projects nodes with a matrix specific
to the node's own type, scores neighbor pairs with an attention vector
specific to the edge kind (c2c, w2c, c2w; LeakyReLU slope 0.2), normalizes
per neighborhood, and fuses per-type aggregates for character nodes with a
learned type-level softmax.  Word nodes take their character-side
aggregate directly as the next state; with no inbound edges they carry
their state unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import HeteroGraph

LEAKY_SLOPE = 0.2

_EDGE_KIND = {("char", "char"): "c2c", ("char", "word"): "w2c", ("word", "char"): "c2w"}


@dataclass
class LstmCellParams:
    w_x: Tensor  # (d, 4h)
    w_h: Tensor  # (h, 4h)
    b: Tensor    # (1, 4h)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]


@dataclass
class HgatLayerParams:
    proj: dict[str, Tensor]   # node type -> (d, d); one shared object when tied
    attn: dict[str, Tensor]   # edge kind -> (2d, 1)
    type_q: Tensor            # (d, 1)
    type_w: Tensor            # (d, d)
    type_b: Tensor            # (1, d)


@dataclass
class EncoderParams:
    lstm_fwd: LstmCellParams
    lstm_bwd: LstmCellParams
    layers: list[HgatLayerParams]


@dataclass
class NodeStates:
    h_char: Tensor           # (n, d)
    h_word: Tensor | None    # (m, d), None when the sentence has no word nodes


@dataclass
class EncoderDiagnostics:
    """Attention weights captured for the normalization property checks."""

    node_attn: dict = field(default_factory=dict)   # (layer, kind, idx, type) -> weights
    type_attn: dict = field(default_factory=dict)   # (layer, idx) -> betas


@dataclass
class EncodeResult:
    snapshots: list[NodeStates]  # layer 0 (input) through layer L
    diagnostics: EncoderDiagnostics | None

    @property
    def h_char(self) -> Tensor:
        return self.snapshots[-1].h_char


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_encoder_params(rng: np.random.Generator, d: int, n_layers: int,
                        share_projection: bool = False) -> EncoderParams:
    if d % 2:
        raise ValueError("model width d must be even")
    h = d // 2

    def cell():
        return LstmCellParams(
            w_x=Tensor(uniform_init(rng, (d, 4 * h), d), requires_grad=True),
            w_h=Tensor(uniform_init(rng, (h, 4 * h), h), requires_grad=True),
            b=Tensor(np.zeros((1, 4 * h)), requires_grad=True),
        )

    layers = []
    for _ in range(n_layers):
        w_char = Tensor(uniform_init(rng, (d, d), d), requires_grad=True)
        proj = {"char": w_char, "word": w_char if share_projection
                else Tensor(uniform_init(rng, (d, d), d), requires_grad=True)}
        layers.append(
            HgatLayerParams(
                proj=proj,
                attn={
                    kind: Tensor(uniform_init(rng, (2 * d, 1), 2 * d), requires_grad=True)
                    for kind in ("c2c", "w2c", "c2w")
                },
                type_q=Tensor(uniform_init(rng, (d, 1), d), requires_grad=True),
                type_w=Tensor(uniform_init(rng, (d, d), d), requires_grad=True),
                type_b=Tensor(np.zeros((1, d)), requires_grad=True),
            )
        )
    return EncoderParams(lstm_fwd=cell(), lstm_bwd=cell(), layers=layers)


def _lstm_direction(xs: Tensor, cell: LstmCellParams, order: np.ndarray) -> list[Tensor]:
    """Run one LSTM direction over rows of ``xs`` in ``order``; returns states in that order."""
    h_dim = cell.hidden
    h = Tensor(np.zeros((1, h_dim)))
    c = Tensor(np.zeros((1, h_dim)))
    states = []
    for t in order:
        x = xs[int(t) : int(t) + 1]
        z = (x @ cell.w_x) + (h @ cell.w_h) + cell.b
        gate_i = ad.sigmoid(z[:, 0:h_dim])
        gate_f = ad.sigmoid(z[:, h_dim : 2 * h_dim])
        gate_g = ad.tanh(z[:, 2 * h_dim : 3 * h_dim])
        gate_o = ad.sigmoid(z[:, 3 * h_dim : 4 * h_dim])
        c = gate_f * c + gate_i * gate_g
        h = gate_o * ad.tanh(c)
        states.append(h)
    return states


def input_layer(char_ids, word_ids, char_table: Tensor, word_table: Tensor,
                params: EncoderParams) -> NodeStates:
    """Layer-0 states: BiLSTM over char embeddings; raw embedding rows for words."""
    n = len(char_ids)
    xs = char_table[np.asarray(char_ids, dtype=np.intp)]
    fwd = _lstm_direction(xs, params.lstm_fwd, np.arange(n))
    bwd = _lstm_direction(xs, params.lstm_bwd, np.arange(n - 1, -1, -1))
    h_fwd = ad.concat(fwd, axis=0)
    h_bwd = ad.concat(list(reversed(bwd)), axis=0)
    h_char = ad.concat([h_fwd, h_bwd], axis=1)
    h_word = None
    if len(word_ids):
        h_word = word_table[np.asarray(word_ids, dtype=np.intp)]
    return NodeStates(h_char=h_char, h_word=h_word)


def _attend(center: Tensor, neighbors: Tensor, attn_vec: Tensor):
    """Score-normalize-aggregate over one neighborhood; returns (state, weights)."""
    p = neighbors.shape[0]
    tiled = Tensor(np.ones((p, 1))) @ center
    pair = ad.concat([tiled, neighbors], axis=1)
    logits = ad.leaky_relu(pair @ attn_vec, LEAKY_SLOPE)
    weights = ad.softmax(logits, axis=0)
    mixed = ad.transpose(weights) @ neighbors
    return ad.elu(mixed), weights.data.ravel().copy()


def node_attention(states: NodeStates, graph: HeteroGraph, params: HgatLayerParams,
                   node: tuple[str, int], neighbor_type: str) -> Tensor:
    """Aggregate of ``neighbor_type`` neighbors of ``node`` (one attention head)."""
    neighbors = graph.neighbor_set(node, neighbor_type)
    if not neighbors:
        raise ValueError(f"node {node} has no {neighbor_type}-type neighbors")
    kind, idx = node
    center_states = states.h_char if kind == "char" else states.h_word
    center_row = center_states[idx - 1 : idx] if kind == "char" else center_states[idx : idx + 1]
    center = center_row @ params.proj[kind]
    if neighbor_type == "char":
        rows = states.h_char[np.asarray(neighbors, dtype=np.intp) - 1] @ params.proj["char"]
    else:
        rows = states.h_word[np.asarray(neighbors, dtype=np.intp)] @ params.proj["word"]
    z, _ = _attend(center, rows, params.attn[_EDGE_KIND[(kind, neighbor_type)]])
    return z


def type_attention(z_by_type: dict[str, Tensor], params: HgatLayerParams) -> Tensor:
    fused, _ = _fuse_types(z_by_type, params)
    return fused


def _fuse_types(z_by_type: dict[str, Tensor], params: HgatLayerParams):
    """Learned convex combination over the node types present."""
    order = [t for t in ("char", "word") if t in z_by_type]
    if not order:
        raise ValueError("type attention requires at least one aggregate")
    logits = [
        ad.tanh(z_by_type[t] @ params.type_w + params.type_b) @ params.type_q
        for t in order
    ]
    scaled = ad.concat(logits, axis=0) * (1.0 / len(order))
    betas = ad.softmax(scaled, axis=0)
    stacked = ad.concat([z_by_type[t] for t in order], axis=0)
    fused = ad.transpose(betas) @ stacked
    return fused, betas.data.ravel().copy()


def hgat_layer(states: NodeStates, graph: HeteroGraph, params: HgatLayerParams,
               layer_idx: int = 0, diagnostics: EncoderDiagnostics | None = None) -> NodeStates:
    """One propagation step over the sentence graph."""
    n = graph.n_chars
    proj_char = states.h_char @ params.proj["char"]
    proj_word = None
    if graph.n_words and states.h_word is not None:
        proj_word = states.h_word @ params.proj["word"]

    char_rows = []
    for i in range(1, n + 1):
        z_by_type: dict[str, Tensor] = {}
        char_nbrs = graph.char_neighbors(i)
        center = proj_char[i - 1 : i]
        if char_nbrs:
            rows = proj_char[np.asarray(char_nbrs, dtype=np.intp) - 1]
            z, weights = _attend(center, rows, params.attn["c2c"])
            z_by_type["char"] = z
            if diagnostics is not None:
                diagnostics.node_attn[(layer_idx, "char", i, "char")] = weights
        word_nbrs = graph.words_covering(i) if proj_word is not None else []
        if word_nbrs:
            rows = proj_word[np.asarray(word_nbrs, dtype=np.intp)]
            z, weights = _attend(center, rows, params.attn["w2c"])
            z_by_type["word"] = z
            if diagnostics is not None:
                diagnostics.node_attn[(layer_idx, "char", i, "word")] = weights
        if not z_by_type:
            raise ValueError(f"character {i} has an empty neighborhood")
        fused, betas = _fuse_types(z_by_type, params)
        char_rows.append(fused)
        if diagnostics is not None:
            diagnostics.type_attn[(layer_idx, i)] = betas
    new_char = ad.concat(char_rows, axis=0)

    new_word = states.h_word
    if proj_word is not None:
        word_rows = []
        for w in range(graph.n_words):
            covered = graph.chars_of_word(w)
            if covered:
                rows = proj_char[np.asarray(covered, dtype=np.intp) - 1]
                z, weights = _attend(proj_word[w : w + 1], rows, params.attn["c2w"])
                word_rows.append(z)
                if diagnostics is not None:
                    diagnostics.node_attn[(layer_idx, "word", w, "char")] = weights
            else:
                word_rows.append(states.h_word[w : w + 1])
        new_word = ad.concat(word_rows, axis=0)
    return NodeStates(h_char=new_char, h_word=new_word)


def encode(char_ids, word_ids, graph: HeteroGraph, char_table: Tensor, word_table: Tensor,
           params: EncoderParams, collect_diagnostics: bool = False) -> EncodeResult:
    """Input layer followed by the full attention stack; keeps per-layer snapshots."""
    diagnostics = EncoderDiagnostics() if collect_diagnostics else None
    states = input_layer(char_ids, word_ids, char_table, word_table, params)
    snapshots = [states]
    for layer_idx, layer in enumerate(params.layers):
        states = hgat_layer(states, graph, layer, layer_idx, diagnostics)
        snapshots.append(states)
    return EncodeResult(snapshots=snapshots, diagnostics=diagnostics)
